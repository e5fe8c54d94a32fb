//! Plain-text `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once. Every setting has a default, so a file only lists overrides.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use alignclip_core::data::{GenConfig, Vocabulary};
use alignclip_core::encoder::Sharing;
use alignclip_core::objectives::SeparationMode;
use alignclip_core::trainer::TrainConfig;

use crate::error::{Error, Result};
use crate::presets;

pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(format!("{origin}:{}", no + 1), format!("expected key = value, got {line:?}")));
        };
        let (k, v) = (k.trim(), v.trim());
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::config(format!("{origin}:{}", no + 1), format!("duplicate key {k:?}")));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

fn value<T: FromStr>(origin: &str, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e: T::Err| Error::config(origin, format!("bad value {v:?} for {key}: {e}")))
}

fn flag(origin: &str, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::config(origin, format!("bad value {v:?} for {key}: expected true or false"))),
    }
}

pub fn parse_gen_config(text: &str, origin: &str) -> Result<GenConfig> {
    let mut g = GenConfig::default();
    for (k, v) in parse_pairs(text, origin)? {
        match k.as_str() {
            "n_samples" => g.n_samples = value(origin, &k, &v)?,
            "image_size" => g.image_size = value(origin, &k, &v)?,
            "imbalance" => g.imbalance = value(origin, &k, &v)?,
            "noise_std" => g.noise_std = value(origin, &k, &v)?,
            "seq_len" => g.seq_len = value(origin, &k, &v)?,
            "train_frac" => g.train_frac = value(origin, &k, &v)?,
            "val_frac" => g.val_frac = value(origin, &k, &v)?,
            "test_frac" => g.test_frac = value(origin, &k, &v)?,
            "seed" => g.seed = value(origin, &k, &v)?,
            "vocab" => {
                let words = v.split(',').map(|w| w.trim().to_string()).collect();
                g.vocab = Vocabulary::new(words).map_err(|e| Error::config(origin, e.to_string()))?;
            }
            _ => return Err(Error::config(origin, format!("unknown key {k:?}"))),
        }
    }
    g.validate().map_err(|e| Error::config(origin, e.to_string()))?;
    Ok(g)
}

pub fn render_gen_config(g: &GenConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n_samples = {}", g.n_samples);
    let _ = writeln!(s, "image_size = {}", g.image_size);
    let _ = writeln!(s, "imbalance = {}", g.imbalance);
    let _ = writeln!(s, "noise_std = {}", g.noise_std);
    let _ = writeln!(s, "seq_len = {}", g.seq_len);
    let _ = writeln!(s, "train_frac = {}", g.train_frac);
    let _ = writeln!(s, "val_frac = {}", g.val_frac);
    let _ = writeln!(s, "test_frac = {}", g.test_frac);
    let _ = writeln!(s, "seed = {}", g.seed);
    let _ = writeln!(s, "vocab = {}", g.vocab.words().join(","));
    s
}

/// A training configuration and the preset it started from, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSpec {
    pub preset: Option<String>,
    pub config: TrainConfig,
}

impl TrainSpec {
    /// Model tag used in reports.
    pub fn tag(&self) -> &str {
        self.preset.as_deref().unwrap_or("custom")
    }
}

/// Applies the file's `preset` key (or `preset_override`) first, then every
/// other key on top of it.
pub fn parse_train_config(text: &str, origin: &str, preset_override: Option<&str>) -> Result<TrainSpec> {
    let pairs = parse_pairs(text, origin)?;
    let from_file = pairs.iter().find(|(k, _)| k == "preset").map(|(_, v)| v.as_str());
    let preset = preset_override.or(from_file);
    let mut c = match preset {
        Some(name) => presets::preset(name)?,
        None => TrainConfig::default(),
    };
    for (k, v) in &pairs {
        let (k, v) = (k.as_str(), v.as_str());
        match k {
            "preset" => {}
            "epochs" => c.epochs = value(origin, k, v)?,
            "batch_size" => c.batch_size = value(origin, k, v)?,
            "base_lr" => c.base_lr = value(origin, k, v)?,
            "warmup_steps" => c.warmup_steps = if v == "auto" { None } else { Some(value(origin, k, v)?) },
            "weight_decay" => c.weight_decay = value(origin, k, v)?,
            "beta1" => c.beta1 = value(origin, k, v)?,
            "beta2" => c.beta2 = value(origin, k, v)?,
            "eps" => c.eps = value(origin, k, v)?,
            "seed" => c.seed = value(origin, k, v)?,
            "loss.alpha" => c.loss.alpha = value(origin, k, v)?,
            "loss.beta" => c.loss.beta = value(origin, k, v)?,
            "loss.separation_mode" => {
                c.loss.separation_mode = SeparationMode::parse(v)
                    .ok_or_else(|| Error::config(origin, format!("bad value {v:?} for {k}")))?
            }
            "loss.rescaling_enabled" => c.loss.rescaling_enabled = flag(origin, k, v)?,
            "model.layers" => c.model.layers = value(origin, k, v)?,
            "model.heads" => c.model.heads = value(origin, k, v)?,
            "model.model_dim" => c.model.model_dim = value(origin, k, v)?,
            "model.proj_dim" => c.model.proj_dim = value(origin, k, v)?,
            "model.image_size" => c.model.image_size = value(origin, k, v)?,
            "model.patch_size" => c.model.patch_size = value(origin, k, v)?,
            "model.vocab_size" => c.model.vocab_size = value(origin, k, v)?,
            "model.max_seq_len" => c.model.max_seq_len = value(origin, k, v)?,
            "model.sharing" => {
                c.model.sharing =
                    Sharing::parse(v).ok_or_else(|| Error::config(origin, format!("bad value {v:?} for {k}")))?
            }
            _ => return Err(Error::config(origin, format!("unknown key {k:?}"))),
        }
    }
    c.validate().map_err(|e| Error::config(origin, e.to_string()))?;
    Ok(TrainSpec {
        preset: preset.map(str::to_string),
        config: c,
    })
}

/// Every setting written out explicitly; parses back to the same spec.
pub fn render_train_config(spec: &TrainSpec) -> String {
    let c = &spec.config;
    let mut s = String::new();
    if let Some(p) = &spec.preset {
        let _ = writeln!(s, "preset = {p}");
    }
    let _ = writeln!(s, "epochs = {}", c.epochs);
    let _ = writeln!(s, "batch_size = {}", c.batch_size);
    let _ = writeln!(s, "base_lr = {}", c.base_lr);
    match c.warmup_steps {
        Some(w) => writeln!(s, "warmup_steps = {w}"),
        None => writeln!(s, "warmup_steps = auto"),
    }
    .ok();
    let _ = writeln!(s, "weight_decay = {}", c.weight_decay);
    let _ = writeln!(s, "beta1 = {}", c.beta1);
    let _ = writeln!(s, "beta2 = {}", c.beta2);
    let _ = writeln!(s, "eps = {}", c.eps);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "loss.alpha = {}", c.loss.alpha);
    let _ = writeln!(s, "loss.beta = {}", c.loss.beta);
    let _ = writeln!(s, "loss.separation_mode = {}", c.loss.separation_mode.as_str());
    let _ = writeln!(s, "loss.rescaling_enabled = {}", c.loss.rescaling_enabled);
    let m = &c.model;
    let _ = writeln!(s, "model.layers = {}", m.layers);
    let _ = writeln!(s, "model.heads = {}", m.heads);
    let _ = writeln!(s, "model.model_dim = {}", m.model_dim);
    let _ = writeln!(s, "model.proj_dim = {}", m.proj_dim);
    let _ = writeln!(s, "model.image_size = {}", m.image_size);
    let _ = writeln!(s, "model.patch_size = {}", m.patch_size);
    let _ = writeln!(s, "model.vocab_size = {}", m.vocab_size);
    let _ = writeln!(s, "model.max_seq_len = {}", m.max_seq_len);
    let _ = writeln!(s, "model.sharing = {}", m.sharing.as_str());
    s
}
