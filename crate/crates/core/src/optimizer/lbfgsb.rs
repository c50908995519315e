//! Limited-memory BFGS with box constraints.
//!
//! Each iteration:
//!
//! 1. Estimate the gradient `g` and stop if the projected gradient
//!    `P(x - g) - x` is small.
//! 2. Compute the Cauchy point `P(x - g/θ)` of the model with Hessian `θI`
//!    (`θ = yᵀy / sᵀy` from the newest curvature pair). Coordinates that the
//!    Cauchy point pins to a bound form the active set and move straight to
//!    that bound.
//! 3. On the free coordinates, the direction is `-H g` from the two-loop
//!    recursion over the stored pairs restricted to those coordinates.
//! 4. Backtrack along the projected path `P(x + α d)` until the Armijo
//!    condition `f(x_α) ≤ f(x) + c₁ gᵀ(x_α - x)` holds. If the quasi-Newton
//!    path fails, the projected steepest-descent path is tried before giving
//!    up.

use std::collections::VecDeque;

use super::{gradient_with, Objective, OptConfig, OptResult, OptStatus};
use crate::sampler::InputBox;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const MAX_EXPANSIONS: usize = 40;
const CURVATURE_EPS: f64 = 1e-10;

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &InputBox) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| ((xi - gi).clamp(bounds.lo()[i], bounds.hi()[i]) - xi).abs())
        .fold(0.0, f64::max)
}

/// `-H g` on the coordinates flagged in `free`, zero elsewhere.
fn two_loop(g: &[f64], free: &[bool], history: &VecDeque<Pair>, theta: f64) -> Vec<f64> {
    let restrict = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&x, &f)| if f { x } else { 0.0 }).collect() };
    let pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = history
        .iter()
        .filter_map(|p| {
            let (s, y) = (restrict(&p.s), restrict(&p.y));
            let sy = dot(&s, &y);
            (sy > CURVATURE_EPS * norm(&s) * norm(&y) && sy > 0.0).then(|| (s, y, 1.0 / sy))
        })
        .collect();

    let mut q = restrict(g);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = match pairs.last() {
        Some((s, y, _)) => dot(s, y) / dot(y, y),
        None => 1.0 / theta,
    };
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

fn project_step(x: &[f64], d: &[f64], alpha: f64, bounds: &InputBox) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
    bounds.clamp(&mut out);
    out
}

struct Step {
    x: Vec<f64>,
    f: f64,
}

/// Projected backtracking along `P(x + α d)`. When `expand` is set and the
/// unit step is accepted, the step is doubled while the objective keeps
/// improving (used before any curvature information exists).
fn line_search(
    f: &Objective,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &[f64],
    bounds: &InputBox,
    expand: bool,
) -> Option<Step> {
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial = project_step(x, d, alpha, bounds);
        if trial.as_slice() == x {
            return None;
        }
        let decrease = dot(g, &trial.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>());
        if decrease >= 0.0 {
            alpha *= 0.5;
            continue;
        }
        let ft = f.eval(&trial);
        if ft.is_finite() && ft <= fx + ARMIJO * decrease {
            let mut best = Step { x: trial, f: ft };
            if expand && alpha == 1.0 {
                for _ in 0..MAX_EXPANSIONS {
                    alpha *= 2.0;
                    let wider = project_step(x, d, alpha, bounds);
                    if wider == best.x {
                        break;
                    }
                    let fw = f.eval(&wider);
                    if !(fw.is_finite() && fw < best.f) {
                        break;
                    }
                    best = Step { x: wider, f: fw };
                }
            }
            return Some(best);
        }
        alpha *= 0.5;
    }
    None
}

/// Minimizes `f` over `bounds` starting from `x0`.
///
/// Every evaluated point lies inside `bounds`, accepted objective values
/// never increase, and `f_best ≤ f(x0)`. Failures are reported through
/// [`OptStatus`]; the best point found so far is always returned.
pub fn minimize(f: &Objective, x0: &[f64], bounds: &InputBox, cfg: &OptConfig) -> OptResult {
    let start_evals = f.evaluations();
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut fx = f.eval(&x);
    let finish = |x: Vec<f64>, fx: f64, iterations: usize, status: OptStatus| OptResult {
        x_best: x,
        f_best: fx,
        iterations,
        evaluations: f.evaluations() - start_evals,
        status,
    };
    if !fx.is_finite() {
        return finish(x, fx, 0, OptStatus::LineSearchFailure);
    }

    let mut cached_fx = Some(fx);
    let mut g = gradient_with(f, &x, &mut cached_fx, bounds, cfg.fd_step);
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut theta = 1.0;

    for iteration in 0..cfg.max_iterations {
        if g.iter().any(|v| !v.is_finite()) {
            return finish(x, fx, iteration, OptStatus::LineSearchFailure);
        }
        if projected_gradient_norm(&x, &g, bounds) <= cfg.grad_tolerance {
            return finish(x, fx, iteration, OptStatus::Converged);
        }

        let cauchy = project_step(&x, &g, -1.0 / theta, bounds);
        let free: Vec<bool> = (0..x.len())
            .map(|i| {
                let (lo, hi) = (bounds.lo()[i], bounds.hi()[i]);
                lo < hi && cauchy[i] > lo && cauchy[i] < hi
            })
            .collect();
        let mut d = two_loop(&g, &free, &history, theta);
        for i in 0..x.len() {
            if !free[i] {
                d[i] = cauchy[i] - x[i];
            }
        }

        let no_curvature = history.is_empty();
        let step = line_search(f, &x, fx, &g, &d, bounds, no_curvature).or_else(|| {
            let steepest: Vec<f64> = cauchy.iter().zip(&x).map(|(c, xi)| c - xi).collect();
            line_search(f, &x, fx, &g, &steepest, bounds, true)
        });
        let Some(step) = step else {
            return finish(x, fx, iteration, OptStatus::LineSearchFailure);
        };

        let mut cached = Some(step.f);
        let g_new = gradient_with(f, &step.x, &mut cached, bounds, cfg.fd_step);
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_EPS * norm(&s) * norm(&y) && y.iter().all(|v| v.is_finite()) {
            theta = dot(&y, &y) / sy;
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y });
        }

        let relative_decrease = (fx - step.f) / fx.abs().max(step.f.abs()).max(1.0);
        x = step.x;
        fx = step.f;
        g = g_new;
        if relative_decrease <= cfg.f_tolerance {
            return finish(x, fx, iteration + 1, OptStatus::Converged);
        }
    }
    finish(x, fx, cfg.max_iterations, OptStatus::MaxIterations)
}
