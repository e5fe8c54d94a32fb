//! Learnable tensors of the dual encoder and their ownership map.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Sharing, SharedEncoderConfig};
use super::Modality;
use crate::error::{Error, Result};
use crate::math;
use crate::objectives::{Temperature, INIT_LOGIT_SCALE};

/// Standard deviation of every randomly initialized tensor.
pub const INIT_STD: f64 = 0.02;

/// Which encoder path reads a tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Owner {
    Shared,
    Image,
    Text,
}

impl Owner {
    pub fn as_u8(self) -> u8 {
        match self {
            Self::Shared => 0,
            Self::Image => 1,
            Self::Text => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Shared),
            1 => Some(Self::Image),
            2 => Some(Self::Text),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    Normal,
    Zeros,
    Ones,
    LogitScale,
}

/// Name, shape and role of one tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub owner: Owner,
    /// Whether decoupled weight decay applies.
    pub decay: bool,
    init: Init,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tensor ids of one transformer block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct BlockIds {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub w_qkv: usize,
    pub b_qkv: usize,
    pub w_o: usize,
    pub b_o: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w_fc: usize,
    pub b_fc: usize,
    pub w_out: usize,
    pub b_out: usize,
}

/// Tensor ids of a trunk: blocks followed by the final layer norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct TrunkIds {
    pub blocks: Vec<BlockIds>,
    pub lnf_g: usize,
    pub lnf_b: usize,
}

impl TrunkIds {
    fn all(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for b in &self.blocks {
            v.extend_from_slice(&[
                b.ln1_g, b.ln1_b, b.w_qkv, b.b_qkv, b.w_o, b.b_o, b.ln2_g, b.ln2_b, b.w_fc, b.b_fc,
                b.w_out, b.b_out,
            ]);
        }
        v.push(self.lnf_g);
        v.push(self.lnf_b);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub patch_w: usize,
    pub patch_b: usize,
    pub cls: usize,
    pub image_pos: usize,
    pub token_embed: usize,
    pub text_pos: usize,
    pub trunks: Vec<TrunkIds>,
    pub projections: Vec<usize>,
    pub logit_scale: usize,
}

impl Layout {
    /// Index into `trunks` / `projections` used by a modality.
    pub fn branch(&self, m: Modality) -> usize {
        match (m, self.trunks.len()) {
            (_, 1) | (Modality::Image, _) => 0,
            (Modality::Text, _) => 1,
        }
    }

    fn build(cfg: &SharedEncoderConfig) -> (Self, Vec<TensorInfo>) {
        let mut infos = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, owner: Owner, init: Init| {
            let decay = shape.len() >= 2 && init == Init::Normal;
            infos.push(TensorInfo { name, shape, owner, decay, init });
            infos.len() - 1
        };
        let d = cfg.model_dim;
        let patch_w = push("image.patch_embed.weight".into(), vec![cfg.patch_dim(), d], Owner::Image, Init::Normal);
        let patch_b = push("image.patch_embed.bias".into(), vec![d], Owner::Image, Init::Zeros);
        let cls = push("image.class_embedding".into(), vec![d], Owner::Image, Init::Normal);
        let image_pos = push("image.positional_embedding".into(), vec![cfg.image_tokens(), d], Owner::Image, Init::Normal);
        let token_embed = push("text.token_embedding".into(), vec![cfg.vocab_size, d], Owner::Text, Init::Normal);
        let text_pos = push("text.positional_embedding".into(), vec![cfg.max_seq_len, d], Owner::Text, Init::Normal);

        let branches: &[(&str, Owner)] = match cfg.sharing {
            Sharing::Shared => &[("", Owner::Shared)],
            Sharing::Unshared => &[("image.", Owner::Image), ("text.", Owner::Text)],
        };
        let mut trunks = Vec::new();
        let mut projections = Vec::new();
        for &(prefix, owner) in branches {
            let mut blocks = Vec::new();
            for l in 0..cfg.layers {
                let p = format!("{prefix}trunk.block{l}");
                let mut t = |suffix: &str, shape: Vec<usize>, init: Init| push(format!("{p}.{suffix}"), shape, owner, init);
                blocks.push(BlockIds {
                    ln1_g: t("ln1.gain", vec![d], Init::Ones),
                    ln1_b: t("ln1.bias", vec![d], Init::Zeros),
                    w_qkv: t("attn.qkv.weight", vec![d, 3 * d], Init::Normal),
                    b_qkv: t("attn.qkv.bias", vec![3 * d], Init::Zeros),
                    w_o: t("attn.out.weight", vec![d, d], Init::Normal),
                    b_o: t("attn.out.bias", vec![d], Init::Zeros),
                    ln2_g: t("ln2.gain", vec![d], Init::Ones),
                    ln2_b: t("ln2.bias", vec![d], Init::Zeros),
                    w_fc: t("mlp.fc.weight", vec![d, cfg.mlp_dim()], Init::Normal),
                    b_fc: t("mlp.fc.bias", vec![cfg.mlp_dim()], Init::Zeros),
                    w_out: t("mlp.out.weight", vec![cfg.mlp_dim(), d], Init::Normal),
                    b_out: t("mlp.out.bias", vec![d], Init::Zeros),
                });
            }
            let lnf_g = push(format!("{prefix}trunk.ln_final.gain"), vec![d], owner, Init::Ones);
            let lnf_b = push(format!("{prefix}trunk.ln_final.bias"), vec![d], owner, Init::Zeros);
            trunks.push(TrunkIds { blocks, lnf_g, lnf_b });
            projections.push(push(format!("{prefix}projection"), vec![d, cfg.proj_dim], owner, Init::Normal));
        }
        let logit_scale = push("logit_scale".into(), vec![1], Owner::Shared, Init::LogitScale);
        (
            Self {
                patch_w,
                patch_b,
                cls,
                image_pos,
                token_embed,
                text_pos,
                trunks,
                projections,
                logit_scale,
            },
            infos,
        )
    }
}

/// All learnable tensors of the dual encoder, including the log-temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedEncoderParams {
    config: SharedEncoderConfig,
    infos: Vec<TensorInfo>,
    values: Vec<Vec<f64>>,
    pub(crate) layout: Layout,
}

/// Deterministic initialization: normal(0, 0.02) weights and embeddings, zero
/// biases, unit layer-norm gains, log-temperature `ln(1/0.07)`.
pub fn init_params(cfg: &SharedEncoderConfig, seed: u64) -> Result<SharedEncoderParams> {
    cfg.validate()?;
    let (layout, infos) = Layout::build(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    let values = infos
        .iter()
        .map(|info| match info.init {
            Init::Normal => (0..info.len()).map(|_| normal.sample(&mut rng)).collect(),
            Init::Zeros => vec![0.0; info.len()],
            Init::Ones => vec![1.0; info.len()],
            Init::LogitScale => vec![math::ln(INIT_LOGIT_SCALE)],
        })
        .collect();
    Ok(SharedEncoderParams {
        config: *cfg,
        infos,
        values,
        layout,
    })
}

impl SharedEncoderParams {
    /// Rebuilds parameters from stored tensors, checking them against the
    /// layout implied by `cfg`.
    pub fn from_tensors(cfg: &SharedEncoderConfig, tensors: Vec<(String, Owner, Vec<usize>, Vec<f64>)>) -> Result<Self> {
        cfg.validate()?;
        let (layout, infos) = Layout::build(cfg);
        if tensors.len() != infos.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tensors given, config needs {}",
                tensors.len(),
                infos.len()
            )));
        }
        let mut values = Vec::with_capacity(infos.len());
        for (info, (name, owner, shape, data)) in infos.iter().zip(tensors) {
            if info.name != name || info.owner != owner || info.shape != shape || data.len() != info.len() {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {name} ({owner:?}, {shape:?}) does not match expected {} ({:?}, {:?})",
                    info.name, info.owner, info.shape
                )));
            }
            values.push(data);
        }
        Ok(Self {
            config: *cfg,
            infos,
            values,
            layout,
        })
    }

    pub fn config(&self) -> &SharedEncoderConfig {
        &self.config
    }

    pub fn infos(&self) -> &[TensorInfo] {
        &self.infos
    }

    pub fn num_tensors(&self) -> usize {
        self.infos.len()
    }

    pub fn tensor(&self, id: usize) -> &[f64] {
        &self.values[id]
    }

    pub fn tensor_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.values[id]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.infos.iter().position(|i| i.name == name)
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.infos.iter().map(TensorInfo::len).sum()
    }

    /// `(name, owner)` for every tensor, in storage order.
    pub fn ownership_map(&self) -> Vec<(&str, Owner)> {
        self.infos.iter().map(|i| (i.name.as_str(), i.owner)).collect()
    }

    /// Scalar count of one trunk (blocks plus final norm).
    pub fn trunk_size(&self) -> usize {
        self.layout.trunks[0].all().iter().map(|&id| self.infos[id].len()).sum()
    }

    pub fn projection_size(&self) -> usize {
        self.infos[self.layout.projections[0]].len()
    }

    /// Ids of the trunk and projection tensors that `m` reads.
    pub fn trunk_tensor_ids(&self, m: Modality) -> Vec<usize> {
        let branch = self.layout.branch(m);
        let mut ids = self.layout.trunks[branch].all();
        ids.push(self.layout.projections[branch]);
        ids
    }

    pub fn temperature(&self) -> Temperature {
        Temperature::from_log_scale(self.values[self.layout.logit_scale][0])
    }

    pub fn logit_scale_id(&self) -> usize {
        self.layout.logit_scale
    }

    pub fn set_log_scale(&mut self, t: f64) {
        self.values[self.layout.logit_scale][0] = t;
    }

    pub fn zeros_like(&self) -> ParamGrads {
        ParamGrads {
            values: self.infos.iter().map(|i| vec![0.0; i.len()]).collect(),
        }
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&TensorInfo, &mut Vec<f64>)> {
        self.infos.iter().zip(self.values.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}

/// Gradient (or any per-parameter buffer) shaped like [`SharedEncoderParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    values: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn from_values(values: Vec<Vec<f64>>) -> Self {
        Self { values }
    }

    pub fn tensor(&self, id: usize) -> &[f64] {
        &self.values[id]
    }

    pub fn tensor_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.values[id]
    }

    pub fn num_tensors(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.values
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn shapes_match(&self, params: &SharedEncoderParams) -> bool {
        self.values.len() == params.values.len()
            && self.values.iter().zip(&params.values).all(|(a, b)| a.len() == b.len())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}
