//! Multipartite pure states, local operators, partial traces, and Schmidt
//! decompositions.

mod layout;
mod operator;
mod schmidt;
mod state;

pub use layout::{Subsystem, SubsystemLayout};
pub use operator::{LocalOperator, OperatorKind};
pub use schmidt::{schmidt, FactorVector, SchmidtDecomposition};
pub(crate) use state::hermitian_eigenvalues;
pub use state::{DensityMatrix, PureState};
