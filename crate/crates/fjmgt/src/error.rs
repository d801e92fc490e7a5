use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter violated its domain (kernel order, time sign, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector/tensor dimensions disagree with the basis or with each other.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A sampling grid is too coarse for the requested mode content.
    #[error("resolution too coarse: need at least {needed} points per axis, got {got}")]
    ResolutionTooCoarse { needed: usize, got: usize },

    /// Config validation failed; every violation is listed, not just the first.
    #[error("invalid configuration ({} violation{}):\n{}", .0.len(), if .0.len() == 1 { "" } else { "s" }, .0.join("\n"))]
    InvalidConfig(Vec<String>),

    /// Root bracketing failed (no sign change on the searched interval).
    #[error("bracketing failed: {0}")]
    Bracket(String),

    /// The per-mode implicit solve degenerated. Cannot occur for dt > 0 with
    /// valid parameters (the determinant is 1 + g + h²Q + h³P ≥ 1); kept as a
    /// defensive check.
    #[error("singular step matrix for mode {mode} (det = {det:e})")]
    SingularStep { mode: usize, det: f64 },

    /// A checkpoint does not belong to the configuration trying to resume it.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    /// A checkpoint file is malformed or has an unsupported version.
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("TOML parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("TOML serialize error: {0}")]
    TomlSerialize(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
