use std::io;
use std::path::PathBuf;

/// Process exit codes of the command-line driver.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] alignclip_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{what}: corrupt file: {reason}")]
    CorruptFile { what: String, reason: String },
    #[error("{what}: version mismatch: {reason}")]
    VersionMismatch { what: String, reason: String },
    #[error("{origin}: {reason}")]
    Config { origin: String, reason: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("reports come from different datasets: {0}")]
    MixedDatasets(String),
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(origin: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config {
            origin: origin.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        use alignclip_core::Error as C;
        match self {
            Self::Config { .. } | Self::UnknownPreset(_) => exit::CONFIG,
            Self::Core(C::InvalidConfig(_) | C::BatchTooSmall { .. }) => exit::CONFIG,
            Self::Core(C::NumericalAbort { .. } | C::NonFinite(_) | C::ZeroRow { .. }) => exit::NUMERICAL,
            _ => exit::DATA,
        }
    }
}
