//! Canonical tangles used throughout tests, demos and bundled fixtures.
//!
//! Every closed chain here starts with the canonical first link
//! `V_0 = (0,1,0)`, `V_1 = (-1,0,0)` and repeats `V_0` as its last entry.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::chain::{angles_to_chain, canonical_v0, canonical_v1, ShapeAngles, TangentChain, Vec3};

fn closed_chain(tail: &[[f64; 3]]) -> TangentChain {
    let mut v = vec![canonical_v0(), canonical_v1()];
    v.extend(tail.iter().map(|c| Vec3::new(c[0], c[1], c[2])));
    v.push(canonical_v0());
    TangentChain::new(v).expect("catalog chains are exact")
}

/// The 4-link circle, the only closed 4-link tangle.
pub fn circle4() -> TangentChain {
    closed_chain(&[[0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
}

/// The 4-link circle traversed twice.
pub fn doubled_circle8() -> TangentChain {
    closed_chain(&[
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
    ])
}

/// 6-link closed tangle whose constraint Jacobian has rank 11.
pub fn six_link_a() -> TangentChain {
    closed_chain(&[
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
}

/// 6-link closed tangle whose constraint Jacobian has full rank 12.
pub fn six_link_b() -> TangentChain {
    closed_chain(&[
        [0.0, 0.0, -1.0],
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
}

/// An 8-link closed tangle at which the constraint Jacobian has full row
/// rank 16, i.e. a regular point with a 2-dimensional tangent space.
pub fn regular8() -> TangentChain {
    closed_chain(&[
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ])
}

/// Random open chain with uniformly distributed joint angles and the
/// canonical first link.
pub fn random_open_chain<R: Rng + ?Sized>(rng: &mut R, links: usize) -> TangentChain {
    let angles = (0..links.saturating_sub(1))
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    angles_to_chain(&ShapeAngles::new(angles), canonical_v0(), canonical_v1())
        .expect("canonical seeds are orthonormal")
}

/// Random chain with a randomly oriented first link.
pub fn random_oriented_chain<R: Rng + ?Sized>(rng: &mut R, links: usize) -> TangentChain {
    let a = random_unit(rng);
    let mut b = random_unit(rng);
    b -= a * a.dot(&b);
    let b = b.normalize();
    let angles = (0..links.saturating_sub(1))
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    angles_to_chain(&ShapeAngles::new(angles), a, b).expect("seeds orthonormalized")
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}
