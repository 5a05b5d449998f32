//! Located compile-time diagnostics.

use std::fmt;

/// A position in a spec file (1-based).
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

/// Positions never take part in structural comparison of syntax trees.
impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagKind {
    SyntaxError,
    DuplicateName,
    UnknownLayerKind,
    UnboundName,
    ArityError,
    ShapeMismatch,
    NonPositiveExtent,
    NotDifferentiable,
    InvalidValue,
    /// A compiler invariant failed; never caused by the input alone.
    InternalError,
}

impl DiagKind {
    pub fn name(self) -> &'static str {
        match self {
            DiagKind::SyntaxError => "SyntaxError",
            DiagKind::DuplicateName => "DuplicateName",
            DiagKind::UnknownLayerKind => "UnknownLayerKind",
            DiagKind::UnboundName => "UnboundName",
            DiagKind::ArityError => "ArityError",
            DiagKind::ShapeMismatch => "ShapeMismatch",
            DiagKind::NonPositiveExtent => "NonPositiveExtent",
            DiagKind::NotDifferentiable => "NotDifferentiable",
            DiagKind::InvalidValue => "InvalidValue",
            DiagKind::InternalError => "InternalError",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagKind, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            span,
            message: message.into(),
        }
    }

    /// `file:line:col: Kind: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}: {}", self.span.line, self.span.col, self.kind.name(), self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, self.kind.name(), self.message)
    }
}

impl std::error::Error for Diagnostic {}

pub type DResult<T> = Result<T, Diagnostic>;
