use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) is not strictly inside the domain")]
    NotInside { x: f64, y: f64 },

    #[error("reflection of ({x}, {y}) still lands outside the domain")]
    ReflectionOvershoot { x: f64, y: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("circle table is empty")]
    EmptyTable,

    #[error("walk exceeded {0} sphere steps")]
    StepCapExceeded(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular spectral matrix (condition number estimate {kappa:e})")]
    Singular { kappa: f64 },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("table file: {0}")]
    TableFormat(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
