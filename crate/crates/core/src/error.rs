use thiserror::Error;

use crate::builder::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("fixed leaf `{declared}` is not the rightmost leaf (expected `{rightmost}`)")]
    FixedLeafNotRightmost { declared: String, rightmost: String },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node `{0}` has no alpha/beta annotation")]
    MissingAnnotation(String),

    #[error("annotation violates {} condition(s): {}", .0.len(), join_violations(.0))]
    InvalidAnnotation(Vec<Violation>),

    /// The matrix (or a block it depends on) has zero determinant.
    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eta = {eta} is below eta(U) = {eta_min}")]
    EtaTooSmall { eta: String, eta_min: String },

    #[error("index ({0}, {1}) out of range for a {2}x{2} matrix")]
    IndexOutOfRange(usize, usize, usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
