//! Random violation formulas over X_0, Y_0, Y_1 and a grid oracle for them.

use boxverify::checker::{eval_point, Env, Interval};
use boxverify::spec_parser::{Formula, LinearAtom, Relation, VarKind, Variable};
use num_rational::BigRational;
use rand::Rng;

pub const VARS: [Variable; 3] = [
    Variable {
        kind: VarKind::Input,
        index: 0,
    },
    Variable {
        kind: VarKind::Output,
        index: 0,
    },
    Variable {
        kind: VarKind::Output,
        index: 1,
    },
];

pub fn quarter(v: i64) -> BigRational {
    BigRational::new(v.into(), 4.into())
}

/// Coefficients in [-2, 2] and constant in [-4, 4], both in steps of 1/4.
pub fn atom_from(cs: [i64; 3], le: bool, k: i64) -> Option<Formula> {
    let rel = if le { Relation::LessEq } else { Relation::GreaterEq };
    LinearAtom::new(VARS.iter().copied().zip(cs.map(quarter)), rel, quarter(k)).map(Formula::Atom)
}

pub fn random_atom(rng: &mut impl Rng) -> Formula {
    loop {
        let cs = [(); 3].map(|_| rng.random_range(-8..=8));
        if let Some(f) = atom_from(cs, rng.random(), rng.random_range(-16..=16)) {
            return f;
        }
    }
}

/// And/Or trees up to `depth` levels with 1–3 children per node.
pub fn random_formula(rng: &mut impl Rng, depth: u32) -> Formula {
    if depth == 0 || rng.random_bool(0.4) {
        return random_atom(rng);
    }
    let children = (0..rng.random_range(1..=3))
        .map(|_| random_formula(rng, depth - 1))
        .collect();
    if rng.random() {
        Formula::And(children)
    } else {
        Formula::Or(children)
    }
}

pub fn random_intervals(rng: &mut impl Rng) -> [Interval; 3] {
    [(); 3].map(|_| {
        let lo = rng.random_range(-8..8) as f64 / 4.0;
        Interval::new(lo, lo + rng.random_range(0..8) as f64 / 4.0)
    })
}

pub fn env(iv: &[Interval; 3]) -> Env {
    Env::new(vec![iv[0]], vec![iv[1], iv[2]])
}

fn grid(iv: Interval, per_dim: usize) -> Vec<f64> {
    (0..per_dim)
        .map(|k| {
            if k + 1 == per_dim {
                iv.hi
            } else {
                iv.lo + (iv.hi - iv.lo) * k as f64 / (per_dim - 1) as f64
            }
        })
        .collect()
}

/// True when no point of the `per_dim`³ grid satisfies `f`.
pub fn grid_has_no_model(f: &Formula, iv: &[Interval; 3], per_dim: usize) -> bool {
    let (gx, g0, g1) = (grid(iv[0], per_dim), grid(iv[1], per_dim), grid(iv[2], per_dim));
    gx.iter()
        .all(|&x| g0.iter().all(|&a| g1.iter().all(|&b| !eval_point(f, &[x], &[a, b]))))
}
