use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("local plastic update did not converge after {iters} iterations (residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("Newton iteration stalled (gradient norm {gradient:e})")]
    NewtonStall { gradient: f64 },

    #[error("objective increased during alternation ({before:e} -> {after:e})")]
    ObjectiveIncrease { before: f64, after: f64 },

    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("matrix logarithm undefined: |F - Id| = {0} >= 1")]
    LogOutOfDomain(f64),

    #[error("path optimizer exhausted its budget (best bound {best}, endpoint error {endpoint_error:e})")]
    OptimizerBudgetExceeded { best: f64, endpoint_error: f64 },

    #[error("{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A located configuration problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}: {}", self.line, self.key, self.reason)
        } else {
            write!(f, "{}: {}", self.key, self.reason)
        }
    }
}

fn format_config_errors(errs: &[ConfigError]) -> String {
    errs.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn at_step(self, step: usize, t: f64) -> Self {
        Error::Step {
            step,
            t,
            source: Box::new(self),
        }
    }
}
