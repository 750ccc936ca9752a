use thiserror::Error;

use crate::immersion::ChartPoint;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("degenerate immersion at {point}: smallest metric eigenvalue {min_eigenvalue:e}")]
    DegenerateImmersion { point: ChartPoint, min_eigenvalue: f64 },

    #[error("derivative oracle cannot supply order {requested} (at most {available})")]
    OracleOrderUnavailable { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a self-shrinker at {point}: |H + x^perp| = {residual:e} exceeds {tolerance:e}")]
    NotAShrinker {
        point: ChartPoint,
        residual: f64,
        tolerance: f64,
    },

    #[error("mean curvature vanishes (|H| = {norm:e}); principal normal undefined")]
    ZeroMeanCurvature { norm: f64 },

    #[error("unweighted integral requested on non-compact immersion {0}")]
    NonCompactUnweighted(String),

    #[error("invalid catalog spec: {0}")]
    InvalidSpec(String),

    #[error("first-integral drift {drift_per_length:e} per unit arclength exceeds 1e-6; reduce the step")]
    StepTooLarge { drift_per_length: f64 },

    #[error("shooting failed: {0}")]
    NoClosure(String),

    #[error("unknown target `{0}`")]
    UnknownTarget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
