use thiserror::Error;

use crate::attrs::AttrError;

/// Errors raised by either type checker.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable: {0}")]
    UnboundVariable(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("subsumption target {target} is not below the synthesized effect {inferred}")]
    SubsumptionNotBelow { target: String, inferred: String },
    #[error("ill-formed type: {0}")]
    IllFormedType(String),
    #[error("binder escapes its scope: {0}")]
    ScopeEscape(String),
    #[error("force of a non-thunk: {0}")]
    NotAThunk(String),
    #[error("application of a non-function: {0}")]
    NotAFunction(String),
    #[error("let-binding of a non-returner: {0}")]
    NotAReturner(String),
    #[error("case branches disagree: {0}")]
    BranchTypeMismatch(String),
    #[error(transparent)]
    Attr(#[from] AttrError),
}
