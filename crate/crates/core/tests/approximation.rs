use std::sync::Arc;

use tangle_core::approx::{
    fit_closed, fit_open, fit_open_with, fitted_points, generate_closed_test_curve, generate_helix,
    ingest_curve, FitOptions, PenaltySchedule,
};
use tangle_core::registry::inner_solvers;
use tangle_core::validation::validate_chain;
use tangle_core::Vec3;

#[test]
fn helix_fit_is_a_valid_tangle_close_to_the_target() {
    let target = generate_helix(1.0, 0.07, 8, 20).unwrap();
    let report = fit_open(&target, 8, PenaltySchedule::default()).unwrap();
    assert!(report.converged);
    assert!(report.constraint_residual < 1e-6);
    let aligned = report.aligned_curve();
    let r = validate_chain(aligned.chain(), false);
    assert!(r.max_norm_deviation < 1e-6 && r.max_orthogonality_deviation_degrees < 1e-4);
    let pts = fitted_points(&aligned, &target).unwrap();
    let rms = (pts
        .iter()
        .zip(target.points())
        .map(|(a, b)| (a - b).norm_squared())
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    assert!((rms - report.rms_point_error).abs() < 1e-12);
    assert!(rms < 0.05, "rms {rms}");
}

#[test]
fn closed_test_curve_fit_closes_up() {
    let target = generate_closed_test_curve(2.0, 2.0, 1.0, 1.0, 2000, 12, 20).unwrap();
    let report = fit_closed(&target, 12, PenaltySchedule::default()).unwrap();
    assert!(report.converged, "{report:?}");
    let r = validate_chain(&report.chain(), true);
    assert!(r.closure_residual < 1e-5, "{r:?}");
}

#[test]
fn both_inner_solvers_reach_feasibility_on_a_straight_line() {
    let points: Vec<Vec3> = (0..50)
        .map(|k| Vec3::new(1.0, 2.0, -0.5) * k as f64)
        .collect();
    let target = ingest_curve(&points, 6, 10).unwrap();
    let registry = inner_solvers();
    for name in registry.names() {
        let opts = FitOptions {
            solver: Arc::from(registry.create(name).unwrap()),
            ..FitOptions::default()
        };
        let report = fit_open_with(&target, 6, &opts).unwrap();
        assert_eq!(report.solver, name);
        assert!(
            report.constraint_residual < 1e-5,
            "{name}: {}",
            report.constraint_residual
        );
    }
}
