use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates one of its admissibility conditions.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("config: {0}")]
    Config(String),

    /// A GPD moment or CDF requested outside the shape domain where it exists.
    #[error("shape xi = {xi} outside domain: {what}")]
    Domain { what: &'static str, xi: f64 },

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("numerical: {0}")]
    Numerical(String),

    /// The slot loop failed; the partial summary covers the slots completed so far.
    #[error("run aborted at slot {slot}: {source}")]
    RunAborted {
        slot: u64,
        partial: Box<crate::sim::RunSummary>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParam { .. } => "invalid_param",
            Error::Config(_) => "config",
            Error::Domain { .. } => "domain",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::DegenerateSample(_) => "degenerate_sample",
            Error::FitFailed(_) => "fit_failed",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Numerical(_) => "numerical",
            Error::RunAborted { .. } => "run_aborted",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
