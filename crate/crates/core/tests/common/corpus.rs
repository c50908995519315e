//! The hand-written VNNLIB corpus under `tests/data/vnnlib` and what each
//! file must parse (or fail) to.

use std::fs;
use std::path::PathBuf;

use boxverify::spec_parser::{extract_input_box, has_complex_input_disjunction, parse_spec, BoxError, SpecError};

pub enum BoxExpect {
    Ok(&'static [(f64, f64)]),
    Unbounded(usize),
    Infeasible(usize),
}

pub enum Expect {
    Valid {
        inputs: usize,
        outputs: usize,
        has_or: bool,
        complex: bool,
        input_box: BoxExpect,
    },
    Syntax,
    Undeclared(&'static str),
}

const UNIT: &[(f64, f64)] = &[(0.0, 1.0)];

pub const CORPUS: &[(&str, Expect)] = &[
    (
        "bounds_1d",
        Expect::Valid {
            inputs: 1,
            outputs: 1,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Ok(&[(-1.0, 1.0)]),
        },
    ),
    (
        "bounds_5d_threshold",
        Expect::Valid {
            inputs: 5,
            outputs: 5,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Ok(&[(0.6, 0.679857769), (-0.5, 0.5), (-0.5, 0.5), (0.45, 0.5), (-0.5, -0.45)]),
        },
    ),
    (
        "bounds_5d_minimal",
        Expect::Valid {
            inputs: 5,
            outputs: 5,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Ok(&[
                (-0.3035, -0.2986),
                (-0.0095, 0.0095),
                (0.4934, 0.5),
                (0.3, 0.5),
                (0.3, 0.5),
            ]),
        },
    ),
    (
        "output_disjunction",
        Expect::Valid {
            inputs: 1,
            outputs: 1,
            has_or: true,
            complex: false,
            input_box: BoxExpect::Ok(UNIT),
        },
    ),
    (
        "output_disjunction_argmax",
        Expect::Valid {
            inputs: 2,
            outputs: 3,
            has_or: true,
            complex: false,
            input_box: BoxExpect::Ok(&[(0.0, 1.0), (0.0, 1.0)]),
        },
    ),
    (
        "linear_combination",
        Expect::Valid {
            inputs: 1,
            outputs: 3,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Ok(&[(-2.5, 2.5)]),
        },
    ),
    (
        "scientific_numerals",
        Expect::Valid {
            inputs: 2,
            outputs: 1,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Ok(&[(-25.0, 1e-3), (0.1, 3.0)]),
        },
    ),
    (
        "comments_whitespace",
        Expect::Valid {
            inputs: 1,
            outputs: 2,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Ok(&[(0.25, 0.75)]),
        },
    ),
    (
        "input_disjunction",
        Expect::Valid {
            inputs: 1,
            outputs: 1,
            has_or: true,
            complex: true,
            input_box: BoxExpect::Ok(UNIT),
        },
    ),
    (
        "input_disjunction_mixed",
        Expect::Valid {
            inputs: 2,
            outputs: 1,
            has_or: true,
            complex: true,
            input_box: BoxExpect::Ok(&[(0.0, 1.0), (0.0, 1.0)]),
        },
    ),
    (
        "unbounded_input",
        Expect::Valid {
            inputs: 2,
            outputs: 1,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Unbounded(1),
        },
    ),
    (
        "infeasible_bounds",
        Expect::Valid {
            inputs: 1,
            outputs: 1,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Infeasible(0),
        },
    ),
    // (<= (* 2 X_0) 4) is not a unit-coefficient bound, so only [0.5, 1] counts.
    (
        "tightest_bounds",
        Expect::Valid {
            inputs: 1,
            outputs: 1,
            has_or: false,
            complex: false,
            input_box: BoxExpect::Ok(&[(0.5, 1.0)]),
        },
    ),
    ("bad_nonlinear", Expect::Syntax),
    ("bad_undeclared", Expect::Undeclared("X_1")),
    ("bad_unbalanced", Expect::Syntax),
    ("bad_not", Expect::Syntax),
    ("bad_variable_name", Expect::Syntax),
    ("bad_strict_relation", Expect::Syntax),
    ("bad_numeral", Expect::Syntax),
];

pub fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/vnnlib")
        .join(format!("{name}.vnnlib"))
}

/// Checks one corpus entry, including the print/re-parse round trip for
/// valid files. Returns a description of the first mismatch.
pub fn check(name: &str, expect: &Expect) -> Result<(), String> {
    let text = fs::read_to_string(path(name)).map_err(|e| format!("{name}: {e}"))?;
    let parsed = parse_spec(&text);
    match (expect, parsed) {
        (Expect::Syntax, Err(SpecError::Syntax { .. })) => Ok(()),
        (Expect::Undeclared(var), Err(SpecError::UndeclaredVariable { name: got, .. })) if got == *var => Ok(()),
        (
            Expect::Valid {
                inputs,
                outputs,
                has_or,
                complex,
                input_box,
            },
            Ok(spec),
        ) => {
            if (spec.input_count, spec.output_count) != (*inputs, *outputs) {
                return Err(format!("{name}: declared {}/{}", spec.input_count, spec.output_count));
            }
            if spec.assertion.contains_or() != *has_or {
                return Err(format!("{name}: contains_or mismatch"));
            }
            if has_complex_input_disjunction(&spec) != *complex {
                return Err(format!("{name}: complex disjunction mismatch"));
            }
            match (input_box, extract_input_box(&spec)) {
                (BoxExpect::Ok(want), Ok(b)) => {
                    let got: Vec<(f64, f64)> = b.lo().iter().copied().zip(b.hi().iter().copied()).collect();
                    // Bounds are rounded inward from exact decimals, so allow an ulp or so.
                    let close = |a: f64, b: f64| (a - b).abs() <= 1e-15 * a.abs().max(1.0);
                    let same = got.len() == want.len()
                        && got
                            .iter()
                            .zip(want.iter())
                            .all(|(g, w)| close(g.0, w.0) && close(g.1, w.1));
                    if !same {
                        return Err(format!("{name}: box {got:?}, expected {want:?}"));
                    }
                }
                (BoxExpect::Unbounded(i), Err(BoxError::UnboundedInput { index, .. })) if index == *i => {}
                (BoxExpect::Infeasible(i), Err(BoxError::InfeasibleBounds { index, .. })) if index == *i => {}
                (_, got) => return Err(format!("{name}: unexpected box result {got:?}")),
            }
            let printed = spec.to_string();
            match parse_spec(&printed) {
                Ok(again) if again == spec => Ok(()),
                Ok(_) => Err(format!("{name}: round trip changed the AST:\n{printed}")),
                Err(e) => Err(format!("{name}: printed form does not parse: {e}\n{printed}")),
            }
        }
        (_, got) => Err(format!("{name}: unexpected parse result {got:?}")),
    }
}
