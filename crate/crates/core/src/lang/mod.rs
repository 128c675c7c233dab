//! ModLang: syntax, canonical printing and execution.

pub mod arbitrary;
pub mod ast;
pub mod interp;
mod lexer;
pub mod normalize;
mod parser;
pub mod pretty;
pub mod reference;
pub mod snapshot;
pub mod value;

use thiserror::Error;

pub use ast::SourceUnit;
pub use interp::{
    evaluate_entry, ErrorKind, ExecutionOutcome, Input, Machine, RuntimeError, Status, DEFAULT_STEP_LIMIT,
};
pub use normalize::normalize;
pub use parser::{is_keyword, parse};
pub use pretty::pretty;
pub use snapshot::{snapshot_state, SnapValue, StateSnapshot};
pub use value::{Bag, ObjRef, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("duplicate constant `{0}`")]
    DuplicateGlobal(String),
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("duplicate field `{field}` in class `{class}`")]
    DuplicateField { class: String, field: String },
    #[error("duplicate signature `{signature}` in class `{class}`")]
    DuplicateSignature { class: String, signature: String },
    #[error("method `{class}::{method}` (line {line}) can finish without returning")]
    MissingReturn { class: String, method: String, line: u32 },
    #[error("inheritance cycle through `{0}`")]
    InheritanceCycle(String),
}
