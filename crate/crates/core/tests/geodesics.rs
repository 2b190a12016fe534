use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tangle_core::catalog;
use tangle_core::geodesy::{
    exp_closed, geodesic_to_tangles, log_closed, parallel_transport, Direction,
};
use tangle_core::validation::validate_chain;
use tangle_core::{ClosedState, FirstLink};

fn regular8() -> ClosedState {
    ClosedState::from_chain(&catalog::regular8(), FirstLink::Fixed).unwrap()
}

fn random_tangent(state: &ClosedState, seed: u64, norm: f64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DVector::from_fn(state.coords().len(), |_, _| StandardNormal.sample(&mut rng));
    state
        .system()
        .project_tangent(state.coords(), &g)
        .unwrap()
        .normalize()
        * norm
}

fn endpoint_drift(state: &ClosedState, u: &DVector<f64>, steps: usize) -> f64 {
    let path = exp_closed(state, u, steps).unwrap();
    state.system().residuals(&path.end().v).unwrap().amax()
}

#[test]
fn halving_the_step_reduces_drift_sixteenfold() {
    let s = regular8();
    let u = random_tangent(&s, 1, 1.5);
    let drifts: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&n| endpoint_drift(&s, &u, n))
        .collect();
    for w in drifts.windows(2) {
        let ratio = w[0] / w[1];
        assert!((12.0..20.0).contains(&ratio), "drifts {drifts:?}");
    }
}

#[test]
fn longer_tangents_stay_on_the_manifold() {
    let s = ClosedState::from_chain(&catalog::six_link_a(), FirstLink::Fixed).unwrap();
    for seed in 0..5 {
        let u = random_tangent(&s, seed, 0.5);
        let path = exp_closed(&s, &u, 100).unwrap();
        for curve in geodesic_to_tangles(&path) {
            assert!(validate_chain(curve.chain(), true).within(0.1, 0.01));
        }
    }
}

#[test]
fn transport_preserves_inner_products() {
    let s = regular8();
    let path = exp_closed(&s, &random_tangent(&s, 2, 0.2), 100).unwrap();
    let a = random_tangent(&s, 3, 1.0);
    let b = random_tangent(&s, 4, 1.0);
    let ta = parallel_transport(&a, &path, Direction::Forward)
        .unwrap()
        .vector;
    let tb = parallel_transport(&b, &path, Direction::Forward)
        .unwrap()
        .vector;
    assert!((ta.dot(&tb) - a.dot(&b)).abs() < 1e-4);
    assert!((ta.dot(&ta) - a.dot(&a)).abs() < 1e-4);
}

#[test]
fn log_then_exp_reaches_the_target() {
    let s = regular8();
    for (seed, norm) in [(5, 0.1), (6, 0.3), (7, 0.5)] {
        let u = random_tangent(&s, seed, norm);
        let v1 = exp_closed(&s, &u, 100).unwrap().end_state();
        let report = log_closed(&s, &v1, 1e-3, 200).unwrap();
        assert!(report.converged && !report.diverged);
        assert!(report.final_gap <= 1e-3);
        let reached = exp_closed(&s, &report.estimate_vector(), 100).unwrap();
        assert!((&reached.end().v - v1.coords()).norm() <= 1e-3);
        assert_eq!(report.gaps.len(), report.iterations + 1);
    }
}

#[test]
fn shooting_reports_exhausted_budget() {
    let s = regular8();
    let v1 = exp_closed(&s, &random_tangent(&s, 8, 0.5), 100)
        .unwrap()
        .end_state();
    let report = log_closed(&s, &v1, 1e-14, 1).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 1);
    assert!(report.final_gap > 1e-14);
}
