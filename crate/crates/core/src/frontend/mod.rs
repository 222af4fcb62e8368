//! MiniScript frontend: lexer, parser, pretty-printer, and export
//! inference.
//!
//! MiniScript is a small dynamically-typed scripting language: top-level
//! function declarations, `var` bindings, `if`/`while`/`for`, `return`,
//! `throw`/`try`/`catch`, 64-bit integers, booleans, `null`, and byte
//! strings with the members `length`, `charAt`, `charCodeAt`, `indexOf`,
//! `substring`, and `concat`. Source files use the `.mjs-mini` extension
//! and mark public functions with a leading `export`.

pub mod ast;
pub mod exports;
mod lexer;
mod parser;
pub mod pretty;

pub use ast::{
    programs_structurally_equal, BinOp, Expr, ExprKind, FunctionDecl, Lit, Param, Program,
    SourceProgram, Stmt, StmtKind, UnOp,
};
pub use exports::{list_exports, member_arity, ExportInfo, ParamType};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

/// Parse a source program into an AST.
pub fn parse(source: &SourceProgram) -> Result<Program, ParseError> {
    parser::parse(source)
}

/// Parse from bare text, for tests and tools that have no file context.
pub fn parse_text(text: &str) -> Result<Program, ParseError> {
    parse(&SourceProgram::new("<memory>", text))
}
