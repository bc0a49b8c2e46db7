//! Lexing, parsing, pretty-printing and name resolution of `.pdvl` sources.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod resolve;
pub mod span;

pub use ast::SourceUnit;
pub use parser::{parse, parse_expr};
pub use pretty::print_unit;
pub use resolve::{resolve, ResolvedUnit, TExpr, TKind};
pub use span::{Diagnostic, DiagnosticKind, Diagnostics, Span};
