use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Formula, LinearAtom, Relation, SpecFile, VarKind};

/// Renders a rational as an exact decimal numeral when its expansion
/// terminates, and as `(/ p q)` otherwise.
pub fn format_rational(r: &BigRational) -> String {
    let denom = r.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let (mut rest, mut twos, mut fives) = (denom, 0usize, 0usize);
    while rest.is_even() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("(/ {} {})", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    if places == 0 {
        return r.numer().to_string();
    }
    let scaled = (r * BigRational::from_integer(num_traits::pow(BigInt::from(10u32), places))).to_integer();
    let digits = scaled.abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let sign = if r.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

impl fmt::Display for LinearAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::LessEq => "<=",
            Relation::GreaterEq => ">=",
        };
        let terms: Vec<String> = self
            .coefficients
            .iter()
            .map(|(var, c)| {
                if c.is_one() {
                    var.to_string()
                } else {
                    format!("(* {} {var})", format_rational(c))
                }
            })
            .collect();
        let lhs = if terms.len() == 1 {
            terms[0].clone()
        } else {
            format!("(+ {})", terms.join(" "))
        };
        write!(f, "({op} {lhs} {})", format_rational(&self.constant))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(atom) => write!(f, "{atom}"),
            Formula::And(children) | Formula::Or(children) => {
                let op = if matches!(self, Formula::And(_)) { "and" } else { "or" };
                write!(f, "({op}")?;
                for child in children {
                    write!(f, " {child}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Prints a spec back as VNNLIB. A top-level `And` becomes one `assert` per
/// conjunct, so parsing the output reproduces the same tree.
impl fmt::Display for SpecFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (kind, count) in [(VarKind::Input, self.input_count), (VarKind::Output, self.output_count)] {
            let prefix = if kind == VarKind::Input { 'X' } else { 'Y' };
            for i in 0..count {
                writeln!(f, "(declare-const {prefix}_{i} Real)")?;
            }
        }
        match &self.assertion {
            Formula::And(children) => {
                for child in children {
                    writeln!(f, "(assert {child})")?;
                }
                Ok(())
            }
            other => writeln!(f, "(assert {other})"),
        }
    }
}
