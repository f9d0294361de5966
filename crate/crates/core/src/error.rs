use thiserror::Error;

/// Errors raised anywhere in the estimation chain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("undersampling ratios p={p} and q={q} are not coprime (gcd = {gcd})")]
    NotCoprime { p: u32, q: u32, gcd: u32 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate signal: {resolved} of {requested} tones resolvable")]
    DegenerateSignal { requested: usize, resolved: usize },

    #[error("invalid eigenvalue {0}")]
    InvalidEigenvalue(String),

    #[error("residue {base} outside [0, {limit})")]
    InvalidResidue { base: f64, limit: f64 },

    #[error("alias index {r} outside [0, {ratio})")]
    InvalidAlias { r: usize, ratio: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
