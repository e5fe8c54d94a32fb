//! Checkpoint file (`ACLC`): training config, dataset tag, ownership map
//! and tensors, optimizer moments, step count and run history.

use std::path::Path;

use alignclip_core::encoder::{Owner, SharedEncoderParams};
use alignclip_core::objectives::LossBreakdown;
use alignclip_core::optim::OptimizerState;
use alignclip_core::trainer::{EpochRecord, RunHistory, TrainConfig, TrainState};

use crate::config::{parse_train_config, render_train_config, TrainSpec};
use crate::container::{trailer_hex, Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ACLC";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: TrainSpec,
    /// Checksum tag of the training dataset.
    pub dataset: String,
    pub state: TrainState,
}

fn put_breakdown(w: &mut Writer, b: &LossBreakdown) {
    for v in [b.clip, b.crsep, b.imsep_image, b.imsep_text, b.total] {
        w.f64(v);
    }
}

fn get_breakdown(r: &mut Reader) -> Result<LossBreakdown> {
    Ok(LossBreakdown {
        clip: r.f64()?,
        crsep: r.f64()?,
        imsep_image: r.f64()?,
        imsep_text: r.f64()?,
        total: r.f64()?,
    })
}

pub fn encode_checkpoint(c: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.str(&render_train_config(&c.spec));
    w.str(&c.dataset);
    let p = &c.state.params;
    w.u64(p.num_tensors() as u64);
    for (id, info) in p.infos().iter().enumerate() {
        w.str(&info.name);
        w.u8(info.owner.as_u8());
        w.u64(info.shape.len() as u64);
        info.shape.iter().for_each(|&d| w.u64(d as u64));
        w.f64s(p.tensor(id));
    }
    let o = &c.state.optimizer;
    w.u64(o.step);
    for m in o.first.iter().chain(&o.second) {
        w.f64s(m);
    }
    put_breakdown(&mut w, &c.state.epoch_sum);
    w.u64(c.state.epoch_batches);
    w.u64(c.state.history.records.len() as u64);
    for rec in &c.state.history.records {
        w.u64(rec.epoch as u64);
        w.u64(rec.step);
        put_breakdown(&mut w, &rec.loss);
        w.f64(rec.val_alignment);
        w.f64(rec.val_gap);
        w.f64(rec.lr);
    }
    w.finish()
}

pub fn decode_checkpoint(bytes: &[u8], what: &str) -> Result<Checkpoint> {
    let mut r = Reader::open(bytes, MAGIC, VERSION, what)?;
    let echo = r.str()?;
    let spec = parse_train_config(&echo, what, None).map_err(|e| r.corrupt(format!("header config: {e}")))?;
    let dataset = r.str()?;
    let count = r.len()?;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.str()?;
        let owner = Owner::from_u8(r.u8()?).ok_or_else(|| r.corrupt(format!("unknown owner of {name}")))?;
        let ndim = r.len()?;
        let shape = (0..ndim).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| r.corrupt("shape overflow"))?;
        let values = r.f64s(n)?;
        tensors.push((name, owner, shape, values));
    }
    let params = SharedEncoderParams::from_tensors(&spec.config.model, tensors)
        .map_err(|e| r.corrupt(format!("tensors do not match the stored config: {e}")))?;
    let step = r.u64()?;
    let mut moments = Vec::with_capacity(2 * params.num_tensors());
    for _ in 0..2 {
        for id in 0..params.num_tensors() {
            moments.push(r.f64s(params.tensor(id).len())?);
        }
    }
    let second = moments.split_off(params.num_tensors());
    let optimizer = OptimizerState {
        step,
        first: moments,
        second,
    };
    let epoch_sum = get_breakdown(&mut r)?;
    let epoch_batches = r.u64()?;
    let records = r.len()?;
    let mut history = RunHistory::default();
    for _ in 0..records {
        history.records.push(EpochRecord {
            epoch: r.len()?,
            step: r.u64()?,
            loss: get_breakdown(&mut r)?,
            val_alignment: r.f64()?,
            val_gap: r.f64()?,
            lr: r.f64()?,
        });
    }
    r.finish()?;
    Ok(Checkpoint {
        spec,
        dataset,
        state: TrainState {
            params,
            optimizer,
            history,
            epoch_sum,
            epoch_batches,
        },
    })
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<String> {
    let bytes = encode_checkpoint(c);
    std::fs::write(path, &bytes).map_err(Error::io(path))?;
    Ok(trailer_hex(&bytes))
}

/// Loads a checkpoint; with `expected` set, a stored config that differs is
/// a version mismatch.
pub fn load_checkpoint(path: &Path, expected: Option<&TrainConfig>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    let what = path.display().to_string();
    let c = decode_checkpoint(&bytes, &what)?;
    if let Some(want) = expected {
        if want != &c.spec.config {
            return Err(Error::VersionMismatch {
                what,
                reason: "checkpoint was written with a different training config".into(),
            });
        }
    }
    Ok(c)
}
