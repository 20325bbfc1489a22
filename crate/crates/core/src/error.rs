use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("slip vanishes at sample {index} (q_e = {value})")]
    SlipVanishes { index: usize, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-monotone map: speed {speed} at sample {index}")]
    NonMonotoneMap { index: usize, speed: f64 },

    #[error("parabolicity violated: omega * q_e = {value} <= 0 at sample {index}")]
    Parabolicity { index: usize, value: f64 },

    #[error("wavenumber 0 must go through the zero-mode reconstruction")]
    ZeroWavenumber,

    #[error("Feynman-Lagerstrom compatibility violated: residual {residual:e} exceeds {tol:e}")]
    Compatibility { residual: f64, tol: f64 },

    #[error("stagnant layer: omega^2 q_e^2 + Q = {value:e} at s index {s_index}, psi index {psi_index}")]
    StagnantLayer { s_index: usize, psi_index: usize, value: f64 },

    #[error("negative discriminant in vorticity update: omega0^2 = {0:e}")]
    NegativeDiscriminant(f64),

    #[error("inconsistent vorticity state: {0}")]
    InconsistentState(String),

    #[error("Picard iteration did not converge in {iterations} iterations (last update {last_update:e})")]
    NotConverged { iterations: usize, last_update: f64 },

    #[error("period map did not contract within {iterations} periods (defect {defect:e})")]
    NoContraction { iterations: usize, defect: f64 },

    #[error("no sign change in bracket: r({lo}) = {r_lo:e}, r({hi}) = {r_hi:e}")]
    NoSignChange { lo: f64, hi: f64, r_lo: f64, r_hi: f64 },

    #[error("drift is not monotone in omega: {0}")]
    NonMonotoneDrift(String),

    #[error("collar depth {depth} exceeds tubular radius {delta}")]
    CollarTooWide { depth: f64, delta: f64 },

    #[error("{0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::SlipVanishes { .. } => "slip_vanishes",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonMonotoneMap { .. } => "non_monotone_map",
            Error::Parabolicity { .. } => "parabolicity",
            Error::ZeroWavenumber => "zero_wavenumber",
            Error::Compatibility { .. } => "compatibility",
            Error::StagnantLayer { .. } => "stagnant_layer",
            Error::NegativeDiscriminant(_) => "negative_discriminant",
            Error::InconsistentState(_) => "inconsistent_state",
            Error::NotConverged { .. } => "not_converged",
            Error::NoContraction { .. } => "no_contraction",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::NonMonotoneDrift(_) => "non_monotone_drift",
            Error::CollarTooWide { .. } => "collar_too_wide",
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
