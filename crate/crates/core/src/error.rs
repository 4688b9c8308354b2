use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    InvalidShape(String),
    NonFinite(&'static str),
    LayerCountMismatch {
        expected: usize,
        found: usize,
    },
    /// A dataset or batch does not fit the network input/output layout.
    DimensionMismatch(String),
    /// A cardinality budget larger than the tensor it applies to.
    BudgetOutOfRange {
        layer: usize,
        budget: usize,
        len: usize,
    },
    /// Evaluating the augmented Lagrangian at a `Z` outside the feasible set.
    Infeasible {
        layer: usize,
        nonzeros: usize,
        budget: usize,
    },
    InvalidParameter {
        name: &'static str,
        reason: String,
    },
    EmptyDataset,
    /// The tiny-instance dual oracle refuses instances it cannot enumerate.
    TooLarge {
        entries: usize,
        supports: usize,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected:?}, found {found:?}")
            }
            Error::InvalidShape(msg) => write!(f, "invalid shape: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::LayerCountMismatch { expected, found } => {
                write!(f, "layer count mismatch: expected {expected}, found {found}")
            }
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::BudgetOutOfRange { layer, budget, len } => write!(
                f,
                "budget {budget} for layer {layer} exceeds its {len} weights"
            ),
            Error::Infeasible {
                layer,
                nonzeros,
                budget,
            } => write!(
                f,
                "layer {layer} has {nonzeros} nonzeros but budget is {budget}; indicator is infinite"
            ),
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::EmptyDataset => f.write_str("dataset is empty"),
            Error::TooLarge { entries, supports } => write!(
                f,
                "instance too large to enumerate: {entries} entries, {supports} supports"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
