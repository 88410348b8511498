use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the chart domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("trajectory left the domain near arclength {t}")]
    DomainExit { t: f64 },
    #[error("step size underflow near arclength {t}")]
    StepUnderflow { t: f64 },
    #[error("shooting did not converge: {0}")]
    NoConvergence(String),
    #[error("spray is not simple on this configuration: {0}")]
    NonSimple(String),
    #[error("cot_K has a pole at {0}")]
    Pole(f64),
    #[error("empty set: {0}")]
    Empty(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
    #[error("catalog self-test failed for `{name}`: {detail}")]
    SelfTest { name: String, detail: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

pub type Result<T> = std::result::Result<T, Error>;
