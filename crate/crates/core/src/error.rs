use std::fmt;

use thiserror::Error;

/// A single failed capacity or parameter check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// Br micro-panel does not fit the local-memory budget.
    BrExceedsLocalBudget,
    /// Ac buffer does not fit the FPGA RAM budget.
    AcExceedsFpgaBudget,
    /// Bc buffer does not fit global memory.
    BcExceedsDdr,
    /// mr·nr exceeds the accumulator lanes. Warning only.
    AccumulatorSpill,
    McNotMultipleOfMr,
    NcNotMultipleOfNr,
    OddKcFor16x4,
    ZeroParameter,
    MicroTileExceedsBlock,
}

impl ViolationKind {
    /// Warnings are reported but do not make a configuration infeasible.
    pub fn is_warning(self) -> bool {
        matches!(self, ViolationKind::AccumulatorSpill)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind.is_warning() {
            write!(f, "warning: {}", self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity violation: {}", join(.0))]
    Capacity(Vec<Violation>),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("no feasible blocking parameters: {0}")]
    Infeasible(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
