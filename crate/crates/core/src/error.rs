use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A configuration or invocation argument is out of its allowed range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The Poisson mixture could not be truncated within the term cap.
    #[error(
        "poisson truncation exceeded j_cap={j_cap} with tail mass {tail_mass:e} (tol {tail_tol:e})"
    )]
    Truncation {
        j_cap: usize,
        tail_mass: f64,
        tail_tol: f64,
    },

    #[error("k_j has no positive root: k_j(0) = {k0}")]
    NoRoot { k0: f64 },

    #[error("root cross-check failed: closed form {closed}, bisection {bisection}")]
    RootMismatch { closed: f64, bisection: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code: 2 for invalid input or I/O, 1 for a failed
    /// numerical contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. } | Error::Argument(_) | Error::Io(_) => 2,
            Error::Truncation { .. } | Error::NoRoot { .. } | Error::RootMismatch { .. } => 1,
        }
    }

    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}
