use alloc::string::String;
use core::fmt;

/// A position in the source text. Lines and columns are 1-based and
/// columns count characters, not bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Origin {
    pub line: u32,
    pub column: u32,
}

impl Origin {
    pub const START: Origin = Origin { line: 1, column: 1 };

    pub fn new(line: u32, column: u32) -> Self {
        Origin { line, column }
    }
}

// Source positions carry no meaning for structural equality: two documents
// that differ only in layout compare equal.
impl PartialEq for Origin {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Origin {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

/// A positioned diagnostic produced while parsing, type checking or
/// evaluating a description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub severity: Severity,
}

impl ParseError {
    pub fn error(at: Origin, message: impl Into<String>) -> Self {
        ParseError {
            line: at.line,
            column: at.column,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    pub fn warning(at: Origin, message: impl Into<String>) -> Self {
        ParseError {
            severity: Severity::Warning,
            ..ParseError::error(at, message)
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.line,
            self.column,
            self.severity.as_str(),
            self.message
        )
    }
}

/// True when any diagnostic in the list blocks evaluation.
pub fn has_errors(diagnostics: &[ParseError]) -> bool {
    diagnostics.iter().any(ParseError::is_error)
}
