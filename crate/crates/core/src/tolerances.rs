//! Centralized numerical tolerances.
//!
//! Every comparison in the crate goes through one of these knobs so that a
//! single configuration governs normalization checks, operator algebra
//! checks, amplitude pruning, and the branch-counting cutoff.

/// Tolerance configuration shared by states, operators, and machines.
///
/// A [`PureState`](crate::statespace::PureState) captures the tolerances it
/// was built with and passes them along to everything derived from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Allowed deviation of Σ|amplitude|² from 1, and of reduced-density
    /// comparisons (Frobenius) used by envariance and causality verdicts.
    pub normalization: f64,
    /// Allowed deviation in operator identities: M†M = I for unitaries,
    /// M² = M and M† = M for projectors, V†V = I for isometries.
    pub operator_algebra: f64,
    /// Amplitudes with modulus below this are dropped from sparse states.
    pub pruning: f64,
    /// A projected component counts as an existing branch when its squared
    /// norm exceeds this cutoff.
    pub branch_threshold: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        normalization: 1e-9,
        operator_algebra: 1e-10,
        pruning: 1e-12,
        branch_threshold: 1e-9,
    };

    /// Same as `DEFAULT` but with the normalization/comparison tolerance
    /// replaced, which is what the CLI `--tolerance` flag overrides.
    pub fn with_normalization(normalization: f64) -> Self {
        Tolerances {
            normalization,
            ..Self::DEFAULT
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
