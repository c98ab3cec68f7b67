//! Strictness attributes for a call-by-name calculus and call-by-push-value:
//! checkers, the translation between them, evaluators and a fuzz harness
//! for the metatheory.

pub mod attrs;
pub mod cbn;
pub mod cbpv;
pub mod cli;
pub mod error;
pub mod eval;
pub mod metatheory;
pub mod parse;
pub mod print;
pub mod program;
pub mod report;
pub mod translate;

pub use attrs::{Attr, AttrError, AttrVec, Fresh, Mode, Scope, VarId};
pub use error::TypeError;
