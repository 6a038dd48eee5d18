//! Envariance machinery over sparse multipartite pure states.
//!
//! The crate models entangled system–pointer–environment states, decides
//! whether a local operation can be undone by a unitary on the environment
//! alone (and constructs that counter-operation), rewrites unequal-weight
//! superpositions as equal-weight ones over a fine-grained environment
//! basis, and runs projector measurement machines under both the Born and
//! branch-counting registration rules. The headline comparison,
//! [`machines::paradox_report`], shows that the machine whose
//! branch-counting statistics reproduce Born's rule is a different physical
//! machine for each initial state.
//!
//! ```
//! use envariance_core::{
//!     machines::{finegrained_machine, outcome_statistics, RegistrationRule},
//!     statespace::{PureState, SubsystemLayout},
//!     Tolerances,
//! };
//! use num_complex::Complex64;
//!
//! let layout = SubsystemLayout::new([
//!     ("S", vec!["S0", "S1"]),
//!     ("P", vec!["P0", "P1"]),
//!     ("E", vec!["E0", "E1"]),
//! ])?;
//! let psi1 = PureState::build(
//!     layout,
//!     [
//!         (vec!["S0", "P0", "E0"], Complex64::new(3f64.sqrt() / 2.0, 0.0)),
//!         (vec!["S1", "P1", "E1"], Complex64::new(0.5, 0.0)),
//!     ],
//!     &Tolerances::DEFAULT,
//! )?;
//! let machine = finegrained_machine(&psi1, "P", "E", 1e-9)?;
//! assert_eq!(machine.outcomes().len(), 4);
//! # Ok::<(), envariance_core::Error>(())
//! ```

pub mod envariance;
pub mod error;
pub mod finegrain;
pub mod machines;
pub mod statespace;
pub mod tolerances;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
