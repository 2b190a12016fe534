//! Shape spaces of tangles.
//!
//! A tangle is a C¹ space curve assembled from `n` rigid quarter arcs of the
//! unit circle. Each link is determined by the unit tangents at its two
//! endpoints, so a tangle reduces to a chain of pairwise orthogonal unit
//! vectors `V_0..V_n` plus a base translation.
//!
//! Open tangles live on the flat torus of joint angles ([`torus`]); closed
//! tangles live on the zero set of a quadratic constraint map
//! ([`constraint`]), where geodesics, parallel transport and the Log map are
//! computed by ODE integration ([`geodesy`]). Curve approximation by tangles
//! is in [`approx`].

pub mod approx;
pub mod catalog;
pub mod chain;
pub mod constraint;
pub mod error;
pub mod geodesy;
pub mod io;
pub mod linalg;
pub mod ode;
pub mod registry;
pub mod torus;
pub mod validation;

pub use chain::{ShapeAngles, TangentChain, TangleCurve, Vec3};
pub use constraint::{ClosedState, ConstraintSystem, FirstLink};
pub use error::{Result, TangleError};
pub use validation::ValidationReport;
