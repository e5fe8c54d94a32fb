use alloc::format;

use crate::error::{Error, Result};

/// Whether the transformer trunk and projection are shared between modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sharing {
    Shared,
    Unshared,
}

impl Sharing {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Shared => "shared",
            Self::Unshared => "unshared",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "shared" => Some(Self::Shared),
            "unshared" => Some(Self::Unshared),
            _ => None,
        }
    }
}

/// Shape of the dual encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SharedEncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub proj_dim: usize,
    /// Side length of the square grayscale input.
    pub image_size: usize,
    pub patch_size: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub sharing: Sharing,
}

/// Hidden width of the MLP block relative to `model_dim`.
pub const MLP_RATIO: usize = 4;

impl SharedEncoderConfig {
    /// Two layers, four heads, width 64, 16×16 images with 4×4 patches.
    pub fn toy(sharing: Sharing) -> Self {
        Self {
            layers: 2,
            heads: 4,
            model_dim: 64,
            proj_dim: 32,
            image_size: 16,
            patch_size: 4,
            vocab_size: 64,
            max_seq_len: 16,
            sharing,
        }
    }

    /// ViT-B/16-sized trunk with a 77-token, 49 408-word text input.
    pub fn vit_b16(sharing: Sharing) -> Self {
        Self {
            layers: 12,
            heads: 12,
            model_dim: 768,
            proj_dim: 768,
            image_size: 224,
            patch_size: 16,
            vocab_size: 49_408,
            max_seq_len: 77,
            sharing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.layers == 0 || self.heads == 0 || self.model_dim == 0 || self.proj_dim == 0 {
            return fail(format!("layers, heads, model_dim and proj_dim must be positive: {self:?}"));
        }
        if self.model_dim % self.heads != 0 {
            return fail(format!(
                "model_dim {} is not divisible by heads {}",
                self.model_dim, self.heads
            ));
        }
        if self.patch_size == 0 || self.image_size == 0 || self.image_size % self.patch_size != 0 {
            return fail(format!(
                "image_size {} is not divisible by patch_size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.max_seq_len < 2 {
            return fail(format!("max_seq_len must be >= 2, got {}", self.max_seq_len));
        }
        if self.vocab_size == 0 {
            return fail("vocab_size must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    pub fn mlp_dim(&self) -> usize {
        self.model_dim * MLP_RATIO
    }

    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn num_patches(&self) -> usize {
        self.patches_per_side() * self.patches_per_side()
    }

    /// Pixels per patch.
    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    /// Patch tokens plus the class token.
    pub fn image_tokens(&self) -> usize {
        self.num_patches() + 1
    }
}
