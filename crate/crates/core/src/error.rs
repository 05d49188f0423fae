use thiserror::Error;

use crate::grid::LineKey;

/// Everything that can go wrong while building, solving or simulating a grid.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid topology: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidTopology(Vec<Violation>),

    #[error("line {0} not found")]
    LineNotFound(LineKey),

    #[error("unknown node {0}")]
    UnknownNode(u32),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("component containing node {node} is unbalanced (net power {imbalance:.6e})")]
    UnbalancedComponent { node: usize, imbalance: f64 },

    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian in equilibrium solve")]
    SingularJacobian,

    #[error("integration diverged at t = {time}")]
    IntegrationDiverged { time: f64 },

    #[error("post-fault network is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("pre-fault equilibrium overloads {0} line(s)")]
    OverloadedBaseCase(usize),

    #[error("parameters are not uniform: {0}")]
    NonUniform(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("power imbalance {0:.6e}; enable normalization or fix node powers")]
    Unbalanced(f64),

    #[error("no generators to normalize against")]
    EmptyGeneratorSet,
}

impl GridError {
    /// Stable, machine-readable category used by the CLI and the C API.
    pub fn category(&self) -> ErrorCategory {
        use GridError::*;
        match self {
            InvalidTopology(_) | UnknownNode(_) | LineNotFound(_) | InvalidParameter(_)
            | DimensionMismatch { .. } | NonUniform(_) | Unbalanced(_) | EmptyGeneratorSet
            | OverloadedBaseCase(_) => ErrorCategory::Validation,
            Syntax { .. } | Format(_) => ErrorCategory::Parse,
            UnbalancedComponent { .. } | NoConvergence { .. } | SingularJacobian
            | Disconnected { .. } => ErrorCategory::Solver,
            IntegrationDiverged { .. } => ErrorCategory::Integration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Parse,
    Validation,
    Solver,
    Integration,
    Io,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Parse => "parse",
            ErrorCategory::Validation => "validation",
            ErrorCategory::Solver => "solver",
            ErrorCategory::Integration => "integration",
            ErrorCategory::Io => "io",
        }
    }

    /// Process exit code for the CLI. 2 is left to the argument parser.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Parse => 3,
            ErrorCategory::Validation => 4,
            ErrorCategory::Solver => 5,
            ErrorCategory::Integration => 6,
            ErrorCategory::Io => 7,
        }
    }
}

/// A single broken topology invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SelfLoop(usize),
    DuplicateLine(usize, usize),
    DanglingNode { line: (usize, usize), node: usize },
    NonPositiveCoupling(usize, usize),
    NonFiniteCoupling(usize, usize),
    GeneratorOutOfRange(usize),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SelfLoop(n) => write!(f, "self-loop at node index {n}"),
            Violation::DuplicateLine(a, b) => write!(f, "duplicate line ({a},{b})"),
            Violation::DanglingNode { line, node } => {
                write!(f, "line ({},{}) references missing node index {node}", line.0, line.1)
            }
            Violation::NonPositiveCoupling(a, b) => write!(f, "nonpositive coupling on ({a},{b})"),
            Violation::NonFiniteCoupling(a, b) => write!(f, "nonfinite coupling on ({a},{b})"),
            Violation::GeneratorOutOfRange(n) => write!(f, "generator index {n} out of range"),
        }
    }
}

pub type Result<T, E = GridError> = std::result::Result<T, E>;
