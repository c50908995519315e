//! Box-constrained local minimization of black-box objectives.
//!
//! Gradients are estimated by finite differences; the network is never
//! differentiated symbolically.

mod lbfgsb;

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::sampler::InputBox;

pub use lbfgsb::minimize;

type ScalarFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

/// A scalar function of a vector together with a count of how often it has
/// been evaluated.
pub struct Objective<'a> {
    f: ScalarFn<'a>,
    evaluations: Cell<u64>,
}

impl<'a> Objective<'a> {
    pub fn new(f: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Objective {
            f: Box::new(f),
            evaluations: Cell::new(0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.evaluations.set(self.evaluations.get() + 1);
        (self.f)(x)
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.get()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the ∞-norm of the projected gradient falls below this.
    pub grad_tolerance: f64,
    /// Stop when `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` falls below this.
    pub f_tolerance: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            memory: 10,
            max_iterations: 200,
            grad_tolerance: 1e-5,
            f_tolerance: 1e-9,
            fd_step: 1e-6,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.memory == 0 {
            return Err("memory must be at least 1".into());
        }
        for (name, v) in [
            ("grad_tolerance", self.grad_tolerance),
            ("f_tolerance", self.f_tolerance),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub iterations: usize,
    pub evaluations: u64,
    pub status: OptStatus,
}

/// Finite-difference gradient that never evaluates outside `bounds`.
///
/// Uses central differences with step `h_rel · max(1, |x_i|)`. Where the
/// stencil would leave the box the second-order one-sided difference towards
/// the interior is used instead; a coordinate with `lo == hi` gets a zero component.
pub fn fd_gradient(f: &Objective, x: &[f64], bounds: &InputBox, h_rel: f64) -> Vec<f64> {
    let mut fx = None;
    gradient_with(f, x, &mut fx, bounds, h_rel)
}

pub(crate) fn gradient_with(f: &Objective, x: &[f64], fx: &mut Option<f64>, bounds: &InputBox, h_rel: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let (lo, hi) = (bounds.lo()[i], bounds.hi()[i]);
        if lo == hi {
            continue;
        }
        let xi = x[i];
        let h = h_rel * xi.abs().max(1.0);
        let room_up = hi - xi;
        let room_down = xi - lo;
        let mut at = |v: f64| {
            probe[i] = v;
            let value = f.eval(&probe);
            probe[i] = xi;
            value
        };
        grad[i] = if room_up >= h && room_down >= h {
            (at(xi + h) - at(xi - h)) / (2.0 * h)
        } else {
            let base = *fx.get_or_insert_with(|| f.eval(x));
            // Second-order one-sided stencil: exact on quadratics, unlike
            // the plain forward difference whose O(h) error is visible at
            // active bounds.
            let (dir, room) = if room_up >= room_down {
                (1.0, room_up)
            } else {
                (-1.0, room_down)
            };
            let step = h.min(0.5 * room);
            let (f1, f2) = (at(xi + dir * step), at(xi + dir * 2.0 * step));
            dir * (4.0 * f1 - 3.0 * base - f2) / (2.0 * step)
        };
    }
    grad
}
