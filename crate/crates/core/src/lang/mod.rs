//! The `.pwhile` language: AST, parser, pretty-printer, compilation of loop
//! bodies and normalization into loop-free blocks and single while loops.

mod ast;
mod compile;
mod lexer;
mod normalize;
mod parser;
mod pretty;

use thiserror::Error;

use crate::dist::DistError;

pub use ast::*;
pub use compile::{isqrt, CompiledBody, CompiledGuard, EvalError};
pub use normalize::{compile_body, guard_dnf, normalize, Component, LoopFreeBlock, NormalizedProgram, SingleWhileLoop};
pub use parser::{parse, parse_guard, parse_value_expr};
pub use pretty::{pretty_print, pretty_stmt};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: expected {expected}, found {found}")]
    Syntax { line: usize, col: usize, expected: String, found: String },
    #[error("undeclared variable `{name}` at {line}:{col}")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("variable `{name}` declared twice at {line}:{col}")]
    DuplicateDeclaration { name: String, line: usize, col: usize },
    #[error("sampling variable `{name}` used in a guard at {line}:{col}")]
    SamplingVarInGuard { name: String, line: usize, col: usize },
    #[error("cannot assign to sampling variable `{name}` at {line}:{col}")]
    AssignToSamplingVariable { name: String, line: usize, col: usize },
    #[error("unsupported term at {line}:{col}: {detail}")]
    UnsupportedTerm { line: usize, col: usize, detail: String },
    #[error("invalid distribution at {line}:{col}: {source}")]
    InvalidDistribution { line: usize, col: usize, source: DistError },
    #[error("integer overflow in constant folding at {line}:{col}")]
    Overflow { line: usize, col: usize },
    #[error("nested loop at {line}:{col}: the analysis cannot be extended to nested probabilistic loops")]
    NestedLoop { line: usize, col: usize },
    #[error("while loop inside a conditional branch at {line}:{col}")]
    LoopInsideBranch { line: usize, col: usize },
}

impl LangError {
    pub fn location(&self) -> Option<(usize, usize)> {
        match self {
            LangError::Syntax { line, col, .. }
            | LangError::UndeclaredVariable { line, col, .. }
            | LangError::DuplicateDeclaration { line, col, .. }
            | LangError::SamplingVarInGuard { line, col, .. }
            | LangError::AssignToSamplingVariable { line, col, .. }
            | LangError::UnsupportedTerm { line, col, .. }
            | LangError::InvalidDistribution { line, col, .. }
            | LangError::Overflow { line, col }
            | LangError::NestedLoop { line, col }
            | LangError::LoopInsideBranch { line, col } => Some((*line, *col)),
        }
    }
}
