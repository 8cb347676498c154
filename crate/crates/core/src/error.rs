use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("sensor pose is below the ground plane (z = {0})")]
    BelowGround(f64),
    #[error("unknown tree node {0}")]
    UnknownNode(usize),
    #[error("node cost {cost:.3} exceeds budget {budget:.3}")]
    BudgetExceeded { cost: f64, budget: f64 },
    #[error("start pose ({x:.1}, {y:.1}) is outside the search bounds")]
    StartOutOfBounds { x: f64, y: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
