//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subsystem `{subsystem}` has no basis label `{label}`")]
    UnknownLabel { subsystem: String, label: String },

    #[error("layout has no subsystem `{0}`")]
    UnknownSubsystem(String),

    #[error("duplicate subsystem id `{0}`")]
    DuplicateSubsystemId(String),

    #[error("subsystem `{subsystem}` declares duplicate basis label `{label}`")]
    DuplicateLabel { subsystem: String, label: String },

    #[error("subsystem `{0}` has an empty basis")]
    EmptyBasis(String),

    #[error("label tuple has {got} entries, layout expects {expected}")]
    TupleLength { expected: usize, got: usize },

    #[error("state has no components above the pruning threshold")]
    EmptyState,

    #[error("state norm² = {norm_sq} deviates from 1 by more than {tolerance}")]
    NotNormalized { norm_sq: f64, tolerance: f64 },

    #[error("operator targets do not match the state layout: {0}")]
    TargetMismatch(String),

    #[error("operator is not unitary within tolerance (deviation {deviation})")]
    NonUnitary { deviation: f64 },

    #[error("matrix is not a projector within tolerance (deviation {deviation})")]
    NotProjector { deviation: f64 },

    #[error("the subsystem subset must be non-empty")]
    EmptyKeepSet,

    #[error("bipartition is invalid: {0}")]
    InvalidBipartition(String),

    #[error("states do not share a layout")]
    LayoutMismatch,

    #[error("the two labels must be distinct")]
    IdenticalLabels,

    #[error("operator targets overlap the designated subsystem subset")]
    TargetOverlap,

    #[error("operation requires a unitary operator, got {kind}")]
    TargetKindError { kind: String },

    #[error(
        "degenerate Schmidt spectrum could not be aligned (overlap deviation {deviation})"
    )]
    DegenerateSpectrumUnresolved { deviation: f64 },

    #[error("no denominator N ≤ {max_denominator} meets tolerance {tolerance}")]
    NoPlanWithinBound { max_denominator: u64, tolerance: f64 },

    #[error("branch weights do not match the plan: {0}")]
    BranchMismatch(String),

    #[error("branches `{0}` and `{1}` share the environment label `{2}`")]
    EnvNotSeparating(String, String, String),

    #[error("environment label `{0}` is outside the fine-graining map's source domain")]
    UnknownSourceLabel(String),

    #[error("weights are invalid: {0}")]
    InvalidWeights(String),

    #[error("projector family leaves residual probability {residual} unresolved")]
    IncompleteProjectorFamily { residual: f64 },

    #[error("outcome `{0}` has zero projected weight")]
    ZeroWeightOutcome(String),

    #[error("machine has no outcome `{0}`")]
    UnknownOutcome(String),

    #[error("cannot aggregate by `{0}`: not every outcome labels that subsystem")]
    AggregateByMismatch(String),
}

impl Error {
    /// True for errors reporting a numerical tolerance breach rather than a
    /// structural/validation problem. The CLI maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotNormalized { .. }
                | Error::NonUnitary { .. }
                | Error::NotProjector { .. }
                | Error::DegenerateSpectrumUnresolved { .. }
                | Error::NoPlanWithinBound { .. }
                | Error::BranchMismatch(_)
                | Error::IncompleteProjectorFamily { .. }
                | Error::ZeroWeightOutcome(_)
        )
    }
}
