use std::path::PathBuf;

/// Which side of a kernel matrix a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Row => f.write_str("row"),
            Axis::Column => f.write_str("column"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "Gibbs kernel underflow: {axis} {index} has max entry {max:e} < {floor:e} \
         (epsilon = {epsilon}); try a larger epsilon"
    )]
    Underflow {
        axis: Axis,
        index: usize,
        max: f64,
        floor: f64,
        epsilon: f64,
    },

    #[error("degenerate kernel: {axis} {index} has zero sum")]
    DegenerateKernel { axis: Axis, index: usize },

    #[error("degenerate class mass: domain {domain} carries no mass on class {class}")]
    DegenerateMass { domain: usize, class: usize },

    #[error("missing class {class} in domain {domain}")]
    MissingClass { domain: usize, class: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Coarse classification used for process exit codes and report error records.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => ErrorKind::Config,
            Error::InvalidInput(_) | Error::MissingClass { .. } | Error::Parse { .. } | Error::Io { .. } => {
                ErrorKind::Data
            }
            Error::Underflow { .. } | Error::DegenerateKernel { .. } | Error::DegenerateMass { .. } => {
                ErrorKind::Numerical
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    /// Process exit status used by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
