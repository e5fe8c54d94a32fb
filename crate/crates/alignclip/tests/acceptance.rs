//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails. The training grid (criteria 4 to 6) takes the bulk
//! of the runtime.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use alignclip::checkpoint::{encode_checkpoint, load_checkpoint};
use alignclip::dataset_file::{encode_dataset, load_dataset, save_dataset};
use alignclip::presets::preset;
use alignclip_core::data::{generate_dataset, Dataset, GenConfig, GroundTruthSemantics, Split};
use alignclip_core::encoder::{encode_image, encode_text, init_params, Sharing, SharedEncoderConfig};
use alignclip_core::metrics::{evaluate, MetricsReport, Provenance};
use alignclip_core::trainer::{train, Trainer};
use support::checks;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let worst = checks::oracle_max_error(100, 2024);
    let el = t.elapsed();
    outcome(
        worst < 1e-10 && el < Duration::from_secs(10),
        format!("100 batches, worst |lib - oracle| {worst:.2e} (< 1e-10), {:.2} s (< 10 s)", secs(el)),
    )
}

fn gradient_correctness() -> Outcome {
    let t = Instant::now();
    let batch = checks::loss_gradient_max_rel_err(1e-5, 2024);
    let enc = checks::encoder_gradient_max_rel_err(20, 1e-4, 2024);
    let el = t.elapsed();
    outcome(
        batch < 1e-4 && enc < 1e-3 && el < Duration::from_secs(120),
        format!(
            "batch-level rel err {batch:.2e} (< 1e-4), encoder rel err {enc:.2e} (< 1e-3), 4 modes x 2 rescaling, {:.2} s (< 120 s)",
            secs(el)
        ),
    )
}

fn analytic_anchors() -> Outcome {
    let a = checks::anchors(2024);
    outcome(
        a.uniform_rows < 1e-9 && a.zero_distance_offdiag == 0.0 && a.orthogonal_neutrality < 1e-12 && a.crsep_twice_clip < 1e-12,
        format!(
            "|clip - ln b| {:.1e}, max off-diagonal at D=0 {:.1e}, neutrality {:.1e}, |crsep - 2 clip| {:.1e}",
            a.uniform_rows, a.zero_distance_offdiag, a.orthogonal_neutrality, a.crsep_twice_clip
        ),
    )
}

const SEEDS: [u64; 3] = [0, 1, 2];
const COMPARED: [&str; 3] = ["clip", "sharedclip", "alignclip"];
const ABLATION: &str = "alignclip-no-rescale";

struct Run {
    val: MetricsReport,
    test: MetricsReport,
    time: Duration,
}

struct Grid {
    /// `runs[preset][seed]` in the order of `COMPARED` followed by `ABLATION`.
    runs: Vec<Vec<Run>>,
}

impl Grid {
    fn preset(&self, name: &str) -> &[Run] {
        let i = COMPARED.iter().chain([&ABLATION]).position(|n| *n == name).unwrap();
        &self.runs[i]
    }
}

fn run_grid() -> Grid {
    let gen = GenConfig {
        n_samples: 4096,
        imbalance: 0.5,
        ..GenConfig::default()
    };
    let data = generate_dataset(&gen).unwrap();
    let mut runs = Vec::new();
    for name in COMPARED.iter().chain([&ABLATION]) {
        let mut per_seed = Vec::new();
        for &seed in &SEEDS {
            let t = Instant::now();
            let mut cfg = preset(name).unwrap();
            cfg.seed = seed;
            let mut trainer = Trainer::new(cfg, &data, &GroundTruthSemantics).unwrap();
            trainer.run().unwrap();
            let params = &trainer.state().params;
            let prov = |split: Split| Provenance {
                model: name.to_string(),
                dataset: "acceptance".into(),
                seed,
                split: split.as_str().into(),
            };
            let val = evaluate(params, &data, Split::Val, prov(Split::Val)).unwrap();
            let test = evaluate(params, &data, Split::Test, prov(Split::Test)).unwrap();
            let time = t.elapsed();
            eprintln!(
                "  {name:<21} seed {seed}: val alignment {:.4} median {:.4} | test top-1 {:.4} I->T R@1 {:.4} | {:.0} s",
                val.alignment,
                val.median_positive_cosine,
                test.zeroshot_top1,
                test.recall_image_to_text[0],
                secs(time)
            );
            per_seed.push(Run { val, test, time });
        }
        runs.push(per_seed);
    }
    Grid { runs }
}

fn mean(runs: &[Run], f: impl Fn(&Run) -> f64) -> f64 {
    runs.iter().map(f).sum::<f64>() / runs.len() as f64
}

fn trend_reproduction(g: &Grid) -> Outcome {
    let (c, s, a) = (g.preset("clip"), g.preset("sharedclip"), g.preset("alignclip"));
    let mut ordered = 0;
    let mut median_ordered = 0;
    let mut cells = Vec::new();
    for i in 0..SEEDS.len() {
        let (ac, sc, cc) = (a[i].val.alignment, s[i].val.alignment, c[i].val.alignment);
        if ac - sc >= 0.02 && sc - cc >= 0.02 {
            ordered += 1;
        }
        if a[i].val.median_positive_cosine > c[i].val.median_positive_cosine {
            median_ordered += 1;
        }
        cells.push(format!("seed {}: {ac:.3}/{sc:.3}/{cc:.3}", SEEDS[i]));
    }
    let time: Duration = [c, s, a].iter().flat_map(|r| r.iter().map(|r| r.time)).sum();
    outcome(
        ordered >= 2 && median_ordered >= 2 && time < Duration::from_secs(45 * 60),
        format!(
            "alignment alignclip/sharedclip/clip {}; margin-ordered seeds {ordered}/3 (need 2), median alignclip > clip in {median_ordered}/3 (need 2), 9 runs {:.1} min (< 45)",
            cells.join(", "),
            secs(time) / 60.0
        ),
    )
}

fn downstream_non_regression(g: &Grid) -> Outcome {
    let (c, a) = (g.preset("clip"), g.preset("alignclip"));
    let (t1c, t1a) = (mean(c, |r| r.test.zeroshot_top1), mean(a, |r| r.test.zeroshot_top1));
    let r1 = |r: &Run| r.test.recall_image_to_text[0];
    let (r1c, r1a) = (mean(c, r1), mean(a, r1));
    outcome(
        t1a >= t1c - 0.01 && r1a >= r1c - 0.01,
        format!("test zero-shot top-1 alignclip {t1a:.4} vs clip {t1c:.4}; I->T R@1 alignclip {r1a:.4} vs clip {r1c:.4} (3-seed means, tolerance 0.01)"),
    )
}

fn ablation_direction(g: &Grid) -> Outcome {
    let (a, n) = (g.preset("alignclip"), g.preset(ABLATION));
    let (al_a, al_n) = (mean(a, |r| r.val.alignment), mean(n, |r| r.val.alignment));
    let (t1a, t1n) = (mean(a, |r| r.test.zeroshot_top1), mean(n, |r| r.test.zeroshot_top1));
    outcome(
        al_a >= al_n - 0.01 && t1a >= t1n - 0.01,
        format!("val alignment alignclip {al_a:.4} vs no-rescale {al_n:.4}; test top-1 alignclip {t1a:.4} vs no-rescale {t1n:.4} (3-seed means, tolerance 0.01)"),
    )
}

fn block_count(m: &SharedEncoderConfig) -> usize {
    let (d, h) = (m.model_dim, m.mlp_dim());
    let norms = 4 * d;
    let attention = d * 3 * d + 3 * d + d * d + d;
    let mlp = d * h + h + h * d + d;
    norms + attention + mlp
}

fn sharing_structure() -> Outcome {
    let mut worst_norm: f64 = 0.0;
    let mut notes = Vec::new();
    let mut pass = true;
    for model in [SharedEncoderConfig::toy(Sharing::Shared), checks::small_encoder(Sharing::Shared)] {
        let shared = init_params(&model, 1).unwrap();
        let unshared = init_params(&SharedEncoderConfig { sharing: Sharing::Unshared, ..model }, 1).unwrap();
        let trunk = model.layers * block_count(&model) + 2 * model.model_dim;
        let projection = model.model_dim * model.proj_dim;
        let diff = unshared.parameter_count() as i64 - shared.parameter_count() as i64;
        pass &= shared.parameter_count() < unshared.parameter_count() && diff == (trunk + projection) as i64;
        notes.push(format!(
            "{} vs {} params, difference {diff} = trunk {trunk} + projection {projection}",
            shared.parameter_count(),
            unshared.parameter_count()
        ));
        let inputs = checks::random_inputs(&model, 16, 30);
        for p in [&shared, &checks::spread_params(&model, 3), &unshared] {
            for e in [encode_image(&inputs.images, p).unwrap(), encode_text(&inputs.tokens, p).unwrap()] {
                for r in 0..e.rows() {
                    let n = e.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst_norm = worst_norm.max((n - 1.0).abs());
                }
            }
        }
    }
    pass &= worst_norm < 1e-9;
    outcome(pass, format!("{}; worst | |e| - 1 | {worst_norm:.1e} (< 1e-9)", notes.join("; ")))
}

fn alignclip_bin(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_alignclip"))
        .args(args)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    matches!((std::fs::read(a), std::fs::read(b)), (Ok(x), Ok(y)) if x == y)
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let s = |q: &Path| q.to_str().unwrap().to_string();
    let gen = GenConfig {
        n_samples: 512,
        seed: 11,
        ..GenConfig::default()
    };
    let d: Dataset = generate_dataset(&gen).unwrap();
    let data = p("data.acld");
    save_dataset(&data, &d).unwrap();
    let (loaded, _) = load_dataset(&data).unwrap();
    let data_ok = loaded == d && encode_dataset(&loaded) == std::fs::read(&data).unwrap();

    std::fs::write(p("run.cfg"), "preset = alignclip\nepochs = 2\nbatch_size = 32\n").unwrap();
    let mut ran = true;
    for out in ["a", "b"] {
        ran &= alignclip_bin(&[
            "--threads", "1", "train", "--config", &s(&p("run.cfg")), "--data", &s(&data), "--out", &s(&p(out)),
        ]);
    }
    let identical = ran
        && same_bytes(&p("a").join("checkpoint"), &p("b").join("checkpoint"))
        && same_bytes(&p("a").join("report.json"), &p("b").join("report.json"));

    let mut ckpt_ok = false;
    if ran {
        let ck = load_checkpoint(&p("a").join("checkpoint"), None).unwrap();
        let direct = train(&ck.spec.config, &loaded, &GroundTruthSemantics).unwrap();
        ckpt_ok = encode_checkpoint(&ck) == std::fs::read(p("a").join("checkpoint")).unwrap() && ck.state == direct;
    }
    outcome(
        identical && data_ok && ckpt_ok,
        format!("two train runs byte-identical (checkpoint, report): {identical}; dataset round trip lossless: {data_ok}; checkpoint round trip lossless and equal to in-process training: {ckpt_ok}"),
    )
}

fn main() {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        let line = format!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        println!("{line}");
        lines.push((o.pass, line));
    };
    report(1, "oracle equivalence", oracle_equivalence());
    report(2, "gradient correctness", gradient_correctness());
    report(3, "analytic anchors", analytic_anchors());
    report(7, "sharing structure", sharing_structure());
    report(8, "reproducibility", reproducibility());
    eprintln!("training {} presets x {} seeds", COMPARED.len() + 1, SEEDS.len());
    let grid = run_grid();
    report(4, "trend reproduction", trend_reproduction(&grid));
    report(5, "downstream non-regression", downstream_non_regression(&grid));
    report(6, "ablation direction", ablation_direction(&grid));

    lines.sort_by_key(|(_, l)| l[10..11].to_string());
    println!("\nacceptance summary ({:.1} min)", secs(started.elapsed()) / 60.0);
    for (_, l) in &lines {
        println!("{}", &l[..l.find(" (").unwrap_or(l.len())]);
    }
    let failed = lines.iter().filter(|(p, _)| !p).count();
    if failed > 0 {
        println!("{failed} of {} criteria failed", lines.len());
        std::process::exit(1);
    }
}
