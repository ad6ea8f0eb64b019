use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// Malformed arguments to an operation (mismatched lengths, bad times, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("no sign change on bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// The input carries no information for the requested statistic.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("bootstrap failed on {} of {replicates} replicates (streams {failed_streams:?})", failed_streams.len())]
    Bootstrap {
        replicates: usize,
        failed_streams: Vec<u64>,
    },

    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParameterDomain(_)
            | Error::Argument(_)
            | Error::Config { .. }
            | Error::Io { .. }
            | Error::Csv(_) => 2,
            Error::DegenerateInput(_) => 3,
            Error::NoSignChange { .. }
            | Error::Simulation(_)
            | Error::Estimation(_)
            | Error::Bootstrap { .. } => 4,
        }
    }
}
