use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("basis is not closed under the bracket: {0}")]
    NonClosedBasis(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("logarithm at the cut locus (eigenvalue -1, angle gap {gap:.3e})")]
    CutLocus { gap: f64 },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("spec error: {0}")]
    Spec(String),
    #[error("root data violates {relation} (residual {residual:.3e})")]
    RootData { relation: String, residual: f64 },
    #[error("triple fails {relation} (residual {residual:.3e})")]
    SpinTriple { relation: String, residual: f64 },
    #[error("cover incomplete: direction {witness} is not spanned")]
    CoverIncomplete { witness: String },
    #[error("degree too high: normal-matrix condition {condition:.3e} exceeds 1e12; try a bound below {degree}")]
    DegreeTooHigh { degree: usize, condition: f64 },
    #[error("degree insufficient: predicted error {achieved:.3e} exceeds tolerance {tol:.3e}")]
    DegreeInsufficient { achieved: f64, tol: f64 },
    #[error("bracket word depth {depth} exceeds the compile limit {limit}")]
    CompileDepth { depth: usize, limit: usize },
    #[error("compiled schedule would need {pulses} pulses, over the limit {limit}")]
    CompileSize { pulses: usize, limit: usize },
    #[error("system is not controllable ({obstruction})")]
    Uncontrollable { obstruction: String },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
