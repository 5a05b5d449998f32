//! Network spec compiler.

pub mod autodiff;
pub mod cli;
pub mod codegen;
pub mod compile;
pub mod diag;
pub mod expr;
pub mod interp;
pub mod ir;
pub mod memplan;
pub mod netspec;
pub mod opt;

pub use diag::{DResult, DiagKind, Diagnostic, Span};
