use std::path::PathBuf;

/// Errors produced by the controller, simulator, and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error{}: {message}", location.as_ref().map(|p| format!(" in {}", p.display())).unwrap_or_default())]
    Format {
        location: Option<PathBuf>,
        message: String,
    },

    /// Adaptation produced a non-finite parameter.
    #[error("controller fault: {0}")]
    ControllerFault(String),

    /// The integrator produced a non-finite state. `dump` holds the offending state.
    #[error("simulation fault at t={time}: {message}\n{dump}")]
    SimulationFault {
        time: f64,
        message: String,
        dump: String,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            location: None,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a file path to a format error that has none yet.
    pub(crate) fn at(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Format {
                location: None,
                message,
            } => Error::Format {
                location: Some(path.into()),
                message,
            },
            other => other,
        }
    }

    /// True for faults that abort a run (as opposed to bad input).
    pub fn is_fault(&self) -> bool {
        matches!(
            self,
            Error::ControllerFault(_) | Error::SimulationFault { .. }
        )
    }
}

pub(crate) fn ensure_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::invalid(format!(
            "{what}: length {got}, expected {expected}"
        )));
    }
    Ok(())
}
