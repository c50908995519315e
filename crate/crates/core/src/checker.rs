//! Deciding a violation formula against boxes of values.
//!
//! Interval evaluation is three-valued: an atom is `AlwaysTrue` if every
//! assignment in the boxes satisfies it, `AlwaysFalse` if none does, and
//! `Indeterminate` otherwise. `And`/`Or` combine by min/max (Kleene logic).
//! An `AlwaysFalse` formula has no satisfying assignment inside the boxes.
//!
//! Every sum is computed with exact rationals (binary64 endpoints converted
//! without rounding), so the only approximation in a verdict is the one in
//! the estimated output bounds themselves. Point evaluation first tries an
//! f64 sum with a forward error bound and only falls back to rationals when
//! the sum lands inside that bound.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::bounds_engine::OutputBounds;
use crate::onnx_runtime::Network;
use crate::sampler::{InputBox, SampleSet};
use crate::spec_parser::{rational_from_f64, Formula, LinearAtom, Relation, SpecFile, VarKind, Variable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Panics unless `lo ≤ hi` and both are finite.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(
            lo.is_finite() && hi.is_finite() && lo <= hi,
            "invalid interval [{lo}, {hi}]"
        );
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval::new(v, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TruthValue {
    AlwaysFalse,
    Indeterminate,
    AlwaysTrue,
}

/// Interval assignment for the input and output variables.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub inputs: Vec<Interval>,
    pub outputs: Vec<Interval>,
}

impl Env {
    pub fn new(inputs: Vec<Interval>, outputs: Vec<Interval>) -> Self {
        Env { inputs, outputs }
    }

    pub fn get(&self, var: Variable) -> Option<Interval> {
        match var.kind {
            VarKind::Input => self.inputs.get(var.index).copied(),
            VarKind::Output => self.outputs.get(var.index).copied(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("no interval for variable {0}")]
    MissingVariable(Variable),
}

/// Range of `Σ cᵥ·v` over the env, exactly.
fn expression_range(atom: &LinearAtom, env: &Env) -> Result<(BigRational, BigRational), CheckError> {
    let mut lo = BigRational::zero();
    let mut hi = BigRational::zero();
    for (&var, c) in atom.coefficients() {
        let iv = env.get(var).ok_or(CheckError::MissingVariable(var))?;
        let (a, b) = (rational_from_f64(iv.lo), rational_from_f64(iv.hi));
        if c.is_negative() {
            lo += c * &b;
            hi += c * &a;
        } else {
            lo += c * &a;
            hi += c * &b;
        }
    }
    Ok((lo, hi))
}

pub fn eval_atom_interval(atom: &LinearAtom, env: &Env) -> Result<TruthValue, CheckError> {
    let (lo, hi) = expression_range(atom, env)?;
    let k = atom.constant();
    Ok(match atom.relation() {
        Relation::LessEq if &hi <= k => TruthValue::AlwaysTrue,
        Relation::LessEq if &lo > k => TruthValue::AlwaysFalse,
        Relation::GreaterEq if &lo >= k => TruthValue::AlwaysTrue,
        Relation::GreaterEq if &hi < k => TruthValue::AlwaysFalse,
        _ => TruthValue::Indeterminate,
    })
}

pub fn eval_formula_interval(f: &Formula, env: &Env) -> Result<TruthValue, CheckError> {
    match f {
        Formula::Atom(atom) => eval_atom_interval(atom, env),
        Formula::And(children) => children.iter().try_fold(TruthValue::AlwaysTrue, |acc, c| {
            Ok(acc.min(eval_formula_interval(c, env)?))
        }),
        Formula::Or(children) => children.iter().try_fold(TruthValue::AlwaysFalse, |acc, c| {
            Ok(acc.max(eval_formula_interval(c, env)?))
        }),
    }
}

/// Float pre-check of `Σ c·v − k`: `Some(sign)` when the f64 sum is
/// further from zero than its worst-case rounding error, `None` when it is
/// too close to call (or a value is missing or non-finite).
fn rounded_sign(atom: &LinearAtom, x: &[f64], y: &[f64]) -> Option<Ordering> {
    let (terms, k) = atom.rounded()?;
    let mut sum = -k;
    let mut magnitude = k.abs();
    for &(var, c) in terms {
        let v = *match var.kind {
            VarKind::Input => x.get(var.index),
            VarKind::Output => y.get(var.index),
        }?;
        let p = c * v;
        sum += p;
        magnitude += p.abs();
    }
    if !(sum.is_finite() && magnitude.is_finite()) {
        return None;
    }
    // One rounding per coefficient, product and addition; doubled for slack,
    // plus an absolute term covering underflow in the products.
    let n = (terms.len() + 3) as f64;
    let err = 2.0 * n * f64::EPSILON * magnitude + n * f64::MIN_POSITIVE;
    if sum > err {
        Some(Ordering::Greater)
    } else if sum < -err {
        Some(Ordering::Less)
    } else {
        None
    }
}

fn atom_holds_at(atom: &LinearAtom, x: &[f64], y: &[f64]) -> bool {
    if let Some(sign) = rounded_sign(atom, x, y) {
        return match atom.relation() {
            Relation::LessEq => sign == Ordering::Less,
            Relation::GreaterEq => sign == Ordering::Greater,
        };
    }
    let mut sum = BigRational::zero();
    for (&var, c) in atom.coefficients() {
        let value = match var.kind {
            VarKind::Input => x.get(var.index),
            VarKind::Output => y.get(var.index),
        };
        match value {
            Some(v) if v.is_finite() => sum += c * rational_from_f64(*v),
            _ => return false,
        }
    }
    match atom.relation() {
        Relation::LessEq => &sum <= atom.constant(),
        Relation::GreaterEq => &sum >= atom.constant(),
    }
}

/// Two-valued evaluation at a concrete point, with no tolerance. A variable
/// missing from `x`/`y` makes its atom false.
pub fn eval_point(f: &Formula, x: &[f64], y: &[f64]) -> bool {
    match f {
        Formula::Atom(atom) => atom_holds_at(atom, x, y),
        Formula::And(children) => children.iter().all(|c| eval_point(c, x, y)),
        Formula::Or(children) => children.iter().any(|c| eval_point(c, x, y)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    /// An `Or` mixes in input constraints.
    ComplexDisjunction,
    /// Bounds do not refute the formula and no sample violates it.
    Inconclusive,
    /// The model could not be loaded or evaluated.
    UnsupportedModel,
    /// The specification could not be read, or does not fit the model.
    InvalidSpec,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Holds,
    Violated { x: Vec<f64>, y: Vec<f64> },
    Unknown(UnknownReason),
}

impl Verdict {
    /// The token printed on stdout: `holds`, `violated` or `unknown`.
    pub fn token(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated { .. } => "violated",
            Verdict::Unknown(_) => "unknown",
        }
    }
}

/// Holds if the interval evaluation refutes the formula; otherwise the first
/// sample (in generation order) that satisfies it is the counterexample.
///
/// `outputs`, when given, must be the network outputs for `samples` row by
/// row; otherwise each sample is evaluated as it is visited.
pub fn decide(
    spec: &SpecFile,
    net: &Network,
    bounds: &InputBox,
    output_bounds: &OutputBounds,
    samples: &SampleSet,
    outputs: Option<&[Vec<f64>]>,
) -> Verdict {
    if bounds.dim() != spec.input_count || output_bounds.outputs.len() != spec.output_count {
        return Verdict::Unknown(UnknownReason::InvalidSpec);
    }
    let env = Env::new(
        bounds
            .lo()
            .iter()
            .zip(bounds.hi())
            .map(|(&l, &h)| Interval::new(l, h))
            .collect(),
        output_bounds
            .outputs
            .iter()
            .map(|b| Interval::new(b.lo, b.hi))
            .collect(),
    );
    match eval_formula_interval(&spec.assertion, &env) {
        Ok(TruthValue::AlwaysFalse) => return Verdict::Holds,
        Ok(_) => {}
        Err(_) => return Verdict::Unknown(UnknownReason::InvalidSpec),
    }

    for (row, x) in samples.points.iter().enumerate() {
        let y = match outputs {
            Some(ys) => ys[row].clone(),
            None => match net.infer(x) {
                Ok(y) => y,
                Err(_) => continue,
            },
        };
        if eval_point(&spec.assertion, x, &y) {
            return Verdict::Violated { x: x.clone(), y };
        }
    }
    Verdict::Unknown(UnknownReason::Inconclusive)
}
