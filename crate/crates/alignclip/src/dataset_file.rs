//! Dataset file (`ACLD`): generator config echo, scenes and split tags,
//! `f32` rasters, padded `u32` token table, `f64` semantic vectors.

use std::path::Path;

use alignclip_core::data::{Dataset, Split, SyntheticScene, SEMANTIC_DIM};

use crate::config::{parse_gen_config, render_gen_config};
use crate::container::{trailer_hex, Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ACLD";
pub const VERSION: u32 = 1;

pub fn encode_dataset(d: &Dataset) -> Vec<u8> {
    let g = &d.config;
    let n = d.len();
    let mut w = Writer::new(MAGIC, VERSION);
    w.str(&render_gen_config(g));
    w.u64(n as u64);
    w.u64(g.image_size as u64);
    w.u64(g.seq_len as u64);
    w.u64(SEMANTIC_DIM as u64);
    for (s, split) in d.scenes.iter().zip(&d.splits) {
        for v in [s.shape, s.size, s.intensity, s.position, split.as_u8()] {
            w.u8(v);
        }
    }
    w.f32s(&d.images);
    for c in &d.captions {
        w.u32(c.len() as u32);
        for k in 0..g.seq_len {
            w.u32(c.get(k).copied().unwrap_or(0));
        }
    }
    w.f64s(&d.semantics);
    w.finish()
}

pub fn decode_dataset(bytes: &[u8], what: &str) -> Result<Dataset> {
    let mut r = Reader::open(bytes, MAGIC, VERSION, what)?;
    let echo = r.str()?;
    let config = parse_gen_config(&echo, what).map_err(|e| r.corrupt(format!("header config: {e}")))?;
    let (n, size, seq_len, dim) = (r.len()?, r.len()?, r.len()?, r.len()?);
    if n != config.n_samples || size != config.image_size || seq_len != config.seq_len || dim != SEMANTIC_DIM {
        return Err(r.corrupt("header counts disagree with the generator config"));
    }
    let mut scenes = Vec::with_capacity(n);
    let mut splits = Vec::with_capacity(n);
    for _ in 0..n {
        let s = SyntheticScene {
            shape: r.u8()?,
            size: r.u8()?,
            intensity: r.u8()?,
            position: r.u8()?,
        };
        s.validate().map_err(|e| r.corrupt(e.to_string()))?;
        scenes.push(s);
        splits.push(Split::from_u8(r.u8()?).ok_or_else(|| r.corrupt("unknown split tag"))?);
    }
    let images = r.f32s(n * size * size)?;
    let vocab = config.vocab.size() as u32;
    let mut captions = Vec::with_capacity(n);
    for row in 0..n {
        let len = r.u32()? as usize;
        let mut table = Vec::with_capacity(seq_len);
        for _ in 0..seq_len {
            table.push(r.u32()?);
        }
        let valid = len >= 1
            && len <= seq_len
            && table[..len].iter().all(|&t| t != 0 && t < vocab)
            && table[len..].iter().all(|&t| t == 0);
        if !valid {
            return Err(r.corrupt(format!("malformed caption in row {row}")));
        }
        table.truncate(len);
        captions.push(table);
    }
    let semantics = r.f64s(n * dim)?;
    if semantics.chunks_exact(dim).any(|row| row.iter().all(|&v| v == 0.0) || row.iter().any(|v| !v.is_finite())) {
        return Err(r.corrupt("zero or non-finite semantic vector"));
    }
    r.finish()?;
    Ok(Dataset {
        config,
        scenes,
        images,
        captions,
        semantics,
        splits,
    })
}

/// Writes the dataset and returns its checksum tag.
pub fn save_dataset(path: &Path, d: &Dataset) -> Result<String> {
    let bytes = encode_dataset(d);
    std::fs::write(path, &bytes).map_err(Error::io(path))?;
    Ok(trailer_hex(&bytes))
}

/// Reads a dataset and its checksum tag.
pub fn load_dataset(path: &Path) -> Result<(Dataset, String)> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    let d = decode_dataset(&bytes, &path.display().to_string())?;
    Ok((d, trailer_hex(&bytes)))
}

/// Checksum tag the dataset would have on disk.
pub fn dataset_checksum(d: &Dataset) -> String {
    trailer_hex(&encode_dataset(d))
}
