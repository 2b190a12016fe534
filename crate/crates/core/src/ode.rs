//! Fixed-step explicit integrators.

use nalgebra::DVector;

/// Right-hand side `y' = f(t, y)`.
pub type Rhs<'a> = dyn FnMut(f64, &DVector<f64>) -> DVector<f64> + 'a;

/// One explicit step of a fixed-step scheme.
pub trait Stepper: Send + Sync {
    fn name(&self) -> &'static str;

    /// Order of accuracy.
    fn order(&self) -> u32;

    fn step(&self, f: &mut Rhs<'_>, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Euler;

#[derive(Clone, Copy, Debug, Default)]
pub struct Midpoint;

/// Classical fourth-order Runge–Kutta.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rk4;

impl Stepper for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }

    fn order(&self) -> u32 {
        1
    }

    fn step(&self, f: &mut Rhs<'_>, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64> {
        y + f(t, y) * h
    }
}

impl Stepper for Midpoint {
    fn name(&self) -> &'static str {
        "midpoint"
    }

    fn order(&self) -> u32 {
        2
    }

    fn step(&self, f: &mut Rhs<'_>, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64> {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
        y + k2 * h
    }
}

impl Stepper for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn order(&self) -> u32 {
        4
    }

    fn step(&self, f: &mut Rhs<'_>, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64> {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(y + &k3 * h));
        y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

/// Integrates from `t0` to `t1` in `steps` equal steps, returning every
/// state including the initial one.
pub fn integrate(
    stepper: &dyn Stepper,
    f: &mut Rhs<'_>,
    y0: DVector<f64>,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Vec<DVector<f64>> {
    let h = (t1 - t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0);
    for k in 0..steps {
        let next = stepper.step(f, t0 + k as f64 * h, &out[k], h);
        out.push(next);
    }
    out
}
