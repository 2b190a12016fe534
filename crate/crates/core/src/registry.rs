//! Named strategy lookup.
//!
//! Integrators and inner solvers are chosen by name at run time, e.g. from
//! the command line.

use std::collections::BTreeMap;

use crate::approx::solver::{GradientDescent, InnerSolver, LevenbergMarquardt};
use crate::error::{Result, TangleError};
use crate::ode::{Euler, Midpoint, Rk4, Stepper};

type Factory<T> = fn() -> Box<T>;

/// Maps names to constructors of boxed trait objects.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory<T>) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<T>> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| TangleError::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

pub fn integrators() -> Registry<dyn Stepper> {
    let mut r: Registry<dyn Stepper> = Registry::new("integrator");
    r.register("rk4", || Box::new(Rk4))
        .register("midpoint", || Box::new(Midpoint))
        .register("euler", || Box::new(Euler));
    r
}

pub fn inner_solvers() -> Registry<dyn InnerSolver> {
    let mut r: Registry<dyn InnerSolver> = Registry::new("inner solver");
    r.register("levenberg-marquardt", || {
        Box::new(LevenbergMarquardt::default())
    })
    .register("gradient-descent", || Box::new(GradientDescent::default()));
    r
}
