//! Report, history and projection files, and the side-by-side comparison table.

use std::fmt::Write as _;
use std::path::Path;

use alignclip_core::encoder::Modality;
use alignclip_core::metrics::{MetricsReport, ProjectedPoint};
use alignclip_core::trainer::{EpochRecord, RunHistory};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "alignclip-report/1";
/// How `gap_norm` is defined, recorded in every report.
pub const GAP_METRIC: &str = "centroid_distance";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ReportFile {
    format: String,
    gap_metric: String,
    #[serde(flatten)]
    report: MetricsReport,
}

/// Pretty JSON with a fixed key order and a trailing newline.
pub fn report_json(report: &MetricsReport) -> Result<String> {
    report.validate()?;
    let file = ReportFile {
        format: REPORT_FORMAT.into(),
        gap_metric: GAP_METRIC.into(),
        report: report.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("reports serialize");
    s.push('\n');
    Ok(s)
}

pub fn emit_report(report: &MetricsReport, path: &Path) -> Result<()> {
    let text = report_json(report)?;
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn parse_report(text: &str, path: &Path) -> Result<MetricsReport> {
    let file: ReportFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    if file.format != REPORT_FORMAT {
        return Err(Error::VersionMismatch {
            what: path.display().to_string(),
            reason: format!("report format {:?}", file.format),
        });
    }
    file.report.validate()?;
    Ok(file.report)
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_report(&text, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct HistoryLine {
    epoch: usize,
    step: u64,
    lr: f64,
    loss_total: f64,
    loss_crsep: f64,
    loss_clip: f64,
    loss_imsep_image: f64,
    loss_imsep_text: f64,
    val_alignment: f64,
    val_gap: f64,
}

impl From<&EpochRecord> for HistoryLine {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            step: r.step,
            lr: r.lr,
            loss_total: r.loss.total,
            loss_crsep: r.loss.crsep,
            loss_clip: r.loss.clip,
            loss_imsep_image: r.loss.imsep_image,
            loss_imsep_text: r.loss.imsep_text,
            val_alignment: r.val_alignment,
            val_gap: r.val_gap,
        }
    }
}

/// One JSON object per epoch.
pub fn history_jsonl(h: &RunHistory) -> String {
    h.records
        .iter()
        .map(|r| serde_json::to_string(&HistoryLine::from(r)).expect("history serializes") + "\n")
        .collect()
}

pub fn write_history(path: &Path, h: &RunHistory) -> Result<()> {
    std::fs::write(path, history_jsonl(h)).map_err(Error::io(path))
}

pub fn write_projection(path: &Path, points: &[ProjectedPoint]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["x", "y", "z", "modality"]).map_err(csv_err)?;
    for p in points {
        let m = match p.modality {
            Modality::Image => "image",
            Modality::Text => "text",
        };
        w.write_record([p.x.to_string(), p.y.to_string(), p.z.to_string(), m.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(Error::io(path))
}

/// Columns appear in this order when present; other tags follow.
const SYSTEM_ORDER: [&str; 3] = ["clip", "sharedclip", "alignclip"];

/// Markdown table of seed-averaged metrics, one column per model tag.
/// Reports must share one dataset checksum and one split.
pub fn compare(reports: &[MetricsReport]) -> Result<String> {
    let Some(first) = reports.first() else {
        return Err(Error::config("compare", "no reports given"));
    };
    for r in reports {
        if r.provenance.dataset != first.provenance.dataset {
            return Err(Error::MixedDatasets(format!(
                "{} vs {}",
                first.provenance.dataset, r.provenance.dataset
            )));
        }
        if r.provenance.split != first.provenance.split {
            return Err(Error::MixedDatasets(format!(
                "splits {} vs {}",
                first.provenance.split, r.provenance.split
            )));
        }
    }
    let mut tags: Vec<&str> = Vec::new();
    for t in SYSTEM_ORDER {
        if reports.iter().any(|r| r.provenance.model == t) {
            tags.push(t);
        }
    }
    for r in reports {
        if !tags.contains(&r.provenance.model.as_str()) {
            tags.push(&r.provenance.model);
        }
    }
    let mut rows: Vec<(String, Box<dyn Fn(&MetricsReport) -> f64>)> = vec![
        ("alignment".into(), Box::new(|r| r.alignment)),
        ("mean angle (deg)".into(), Box::new(|r| r.mean_angle_deg)),
        ("gap (centroid distance)".into(), Box::new(|r| r.gap_norm)),
        ("median positive cosine".into(), Box::new(|r| r.median_positive_cosine)),
        ("zero-shot top-1".into(), Box::new(|r| r.zeroshot_top1)),
        ("zero-shot top-5".into(), Box::new(|r| r.zeroshot_top5)),
    ];
    for (i, k) in first.recall_ks.iter().enumerate() {
        rows.push((format!("I→T R@{k}"), Box::new(move |r| r.recall_image_to_text[i])));
    }
    for (i, k) in first.recall_ks.iter().enumerate() {
        rows.push((format!("T→I R@{k}"), Box::new(move |r| r.recall_text_to_image[i])));
    }
    if reports.iter().any(|r| r.recall_ks != first.recall_ks) {
        return Err(Error::config("compare", "reports use different recall cut-offs"));
    }

    let mut s = String::new();
    let _ = writeln!(s, "dataset {} split {}", first.provenance.dataset, first.provenance.split);
    let _ = writeln!(s);
    let _ = writeln!(s, "| metric | {} |", tags.join(" | "));
    let _ = writeln!(s, "|---|{}", "---:|".repeat(tags.len()));
    let groups: Vec<Vec<&MetricsReport>> = tags
        .iter()
        .map(|t| reports.iter().filter(|r| r.provenance.model == *t).collect())
        .collect();
    let seeds: Vec<String> = groups.iter().map(|g| g.len().to_string()).collect();
    let _ = writeln!(s, "| runs | {} |", seeds.join(" | "));
    for (name, f) in &rows {
        let cells: Vec<String> = groups
            .iter()
            .map(|g| format!("{:.4}", g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64))
            .collect();
        let _ = writeln!(s, "| {name} | {} |", cells.join(" | "));
    }
    Ok(s)
}
