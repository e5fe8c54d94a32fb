//! Named training configurations: the three compared systems and the
//! separation ablations.

use alignclip_core::encoder::{SharedEncoderConfig, Sharing};
use alignclip_core::objectives::{LossConfig, SeparationMode};
use alignclip_core::trainer::TrainConfig;

use crate::error::{Error, Result};

pub const NAMES: [&str; 6] = [
    "clip",
    "sharedclip",
    "alignclip",
    "alignclip-no-rescale",
    "alignclip-tt",
    "alignclip-ii-tt",
];

/// Toy training defaults with the model and loss of the named system.
pub fn preset(name: &str) -> Result<TrainConfig> {
    let base = TrainConfig::default();
    let (sharing, loss) = match name {
        "clip" => (Sharing::Unshared, LossConfig::clip()),
        "sharedclip" => (Sharing::Shared, LossConfig::clip()),
        "alignclip" => (Sharing::Shared, LossConfig::alignclip()),
        "alignclip-no-rescale" => (
            Sharing::Shared,
            LossConfig {
                rescaling_enabled: false,
                ..LossConfig::alignclip()
            },
        ),
        "alignclip-tt" => (
            Sharing::Shared,
            LossConfig {
                separation_mode: SeparationMode::TextOnly,
                ..LossConfig::alignclip()
            },
        ),
        "alignclip-ii-tt" => (
            Sharing::Shared,
            LossConfig {
                separation_mode: SeparationMode::Both,
                ..LossConfig::alignclip()
            },
        ),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(TrainConfig {
        loss,
        model: SharedEncoderConfig::toy(sharing),
        ..base
    })
}
