//! The `.cqp` protocol language: one statement per line, straight-line,
//! with post-selection and a built-in correction step.
//!
//! ```text
//! cavity coherent -${alpha}
//! atom A1 levels (f,g) init g
//! rotate A1 R_H
//! dispersive A1 phi=pi
//! ```

pub mod ast;
pub mod interp;
pub mod lexer;
pub mod parser;

pub use ast::{Expr, FidelityTarget, GateSpec, ProtocolScript, Span, Statement};
pub use interp::{execute_script, execute_script_with_state, Event, RunReport, StateSummary};
pub use parser::parse_script;

/// Canonical text of a parsed script.
pub fn print_script(script: &ProtocolScript) -> String {
    script.to_string()
}
