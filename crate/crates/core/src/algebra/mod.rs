//! Exact scalars, contexts, predicates and kernels.

mod context;
mod extrat;
mod kernel;
mod predicate;

pub use context::{int_context, Value, Var, VarContext};
pub use extrat::{parse_rational, ExtRat};
pub use kernel::Kernel;
pub use predicate::{Predicate, SubDist};
pub(crate) use predicate::same_ctx;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("variable `{0}` declared twice")]
    NameClash(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain of `{0}` is empty")]
    EmptyDomain(String),
    #[error("domain of `{0}` lists `{1}` twice")]
    DuplicateValue(String, String),
    #[error("negative value {0}")]
    Negative(String),
    #[error("value exceeds 1: {0}")]
    NotSubunit(String),
    #[error("malformed kernel: {0}")]
    BadKernel(String),
    #[error("bad number `{0}`")]
    BadNumber(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("a loss function needs at least one generator")]
    EmptyLoss,
}
