use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("malformed JSON: {0}")]
    Json(String),

    #[error("parts overlap in their interiors: {0} and {1}")]
    Overlap(String, String),

    #[error("cannot mix segments and arcs in one union")]
    MixedKinds,

    #[error("degenerate panel of zero length in part {0}")]
    Degenerate(usize),

    #[error("linear system is numerically singular (condition estimate {0:e})")]
    SingularSystem(f64),

    #[error("letter {letter} out of range for level {level} (fan-out {fanout})")]
    Range {
        letter: usize,
        level: usize,
        fanout: usize,
    },

    #[error("depth {requested} exceeds materialized depth {available}")]
    Depth { requested: usize, available: usize },

    #[error("point {0} outside the map's domain")]
    Domain(f64),

    #[error("map is not orientation-preserving: {0}")]
    Orientation(String),

    #[error("budget {budget:e} unreachable at level {level} after {halvings} halvings")]
    BudgetUnreachable {
        level: usize,
        budget: f64,
        halvings: u32,
    },
}
