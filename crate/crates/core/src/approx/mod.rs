//! Approximating space curves by tangles.
//!
//! A target curve is reduced to its tangent field on the uniform grid
//! `t_j = j·π/(2m)` ([`target`]); a chain is fitted by penalized least squares
//! on that field ([`objective`], [`solver`], [`fit`]) and the resulting
//! tangle is rigidly aligned to the target points ([`procrustes`]).

pub mod fit;
pub mod objective;
pub mod procrustes;
pub mod solver;
pub mod target;

pub use fit::{
    fit_closed, fit_closed_with, fit_open, fit_open_with, fitted_points, FitOptions, FitReport,
    PenaltySchedule,
};
pub use procrustes::{procrustes_align, RigidTransform};
pub use target::{
    generate_closed_test_curve, generate_helix, ingest_closed_curve, ingest_curve, TargetCurve,
};
