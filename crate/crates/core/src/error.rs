use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{axis} target {value} deg outside limits [{min}, {max}]")]
    Limit {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("insufficient data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("rank-deficient regression (reciprocal condition {rcond:.3e})")]
    RankDeficient { rcond: f64 },

    #[error("degenerate quadratic coefficient {name} = {value} (magnitude floor {floor})")]
    DegenerateCoefficient {
        name: &'static str,
        value: f64,
        floor: f64,
    },

    #[error("non-finite value in {0}")]
    Numeric(&'static str),

    #[error("pattern infeasible: waypoint ({azimuth}, {elevation}) outside antenna limits")]
    PatternInfeasible { azimuth: f64, elevation: f64 },

    #[error("non-monotonic telemetry time: {t} after {last}")]
    NonMonotonicTime { t: f64, last: f64 },

    #[error("empty window [{t0}, {t1}]")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Errors produced by the estimators (as opposed to configuration or I/O).
    pub fn is_estimation(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData { .. }
                | Error::RankDeficient { .. }
                | Error::DegenerateCoefficient { .. }
                | Error::Numeric(_)
        )
    }
}
