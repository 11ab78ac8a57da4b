use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("s = {s} lies outside the tabulated range [{lo}, {hi}]")]
    Extrapolation { s: f64, lo: f64, hi: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearNonConvergence { iterations: usize, residual: f64 },

    #[error("singular matrix: zero pivot in column {0}")]
    SingularMatrix(usize),

    #[error(
        "Picard iteration did not converge at t = {t} (dt = {dt}) after {iterations} iterations, \
         last increment {increment:e}; try a smaller dt"
    )]
    PicardNonConvergence {
        t: f64,
        dt: f64,
        iterations: usize,
        increment: f64,
    },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for the failures the CLI maps to the "solver nonconvergence" exit code.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            Error::LinearNonConvergence { .. } | Error::PicardNonConvergence { .. } | Error::SingularMatrix(_)
        )
    }
}

/// Which hypothesis or rule a configuration violation breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationTag {
    Schema,
    Expr,
    Grid,
    H1,
    H2,
    LemmaRange,
}

impl fmt::Display for ViolationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationTag::Schema => "schema",
            ViolationTag::Expr => "expr",
            ViolationTag::Grid => "grid",
            ViolationTag::H1 => "H1",
            ViolationTag::H2 => "H2",
            ViolationTag::LemmaRange => "lemma-range",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub tag: ViolationTag,
    /// Dotted path into the JSON document, e.g. `estimates.ell`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.tag, self.location, self.message)
    }
}

/// All violations found while validating a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}
