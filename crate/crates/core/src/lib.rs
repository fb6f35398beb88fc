//! Numerical laboratory for the asymptotic stability of one-dimensional NLS
//! ground states.
//!
//! The crate covers the stationary profiles, the linearized (non-self-adjoint)
//! operator and its spectrum, a contour-integral functional calculus for
//! fractional powers, the commutator vector field, the modulation
//! decomposition and a split-step evolution driver.

pub mod commutator;
pub mod error;
pub mod funcalc;
pub mod grid;
pub mod linop;
pub mod modulation;
pub mod nonlinearity;
pub mod par;
pub mod profile;
pub mod simulate;

pub use error::{Error, Result};
pub use grid::{make_grid, ComplexField, GridSpec, NormSuite, SpinorField};
pub use nonlinearity::NonlinearitySpec;
pub use profile::{closed_form_profile, shoot_profile, soliton_field, SolitonProfile};
