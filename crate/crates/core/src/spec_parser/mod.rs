//! VNNLIB specification parsing.
//!
//! A VNNLIB file declares input variables `X_i` and output variables `Y_j`
//! and asserts the *violation* condition as a Boolean combination of linear
//! inequalities. This module reads the `and`/`or`/`<=`/`>=` fragment into a
//! [`SpecFile`], normalizing every comparison into a [`LinearAtom`] with exact
//! rational coefficients.
//!
//! ```text
//! (declare-const X_0 Real)
//! (declare-const Y_0 Real)
//! (assert (>= X_0 -1.0))
//! (assert (<= X_0 1.0))
//! (assert (<= Y_0 0.0))
//! ```

mod print;
pub mod sexpr;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::sampler::InputBox;
use sexpr::{Pos, SExpr};

pub use print::format_rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Input,
    Output,
}

/// A VNNLIB variable, `X_<index>` for inputs and `Y_<index>` for outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable {
    pub kind: VarKind,
    pub index: usize,
}

impl Variable {
    pub fn input(index: usize) -> Self {
        Variable {
            kind: VarKind::Input,
            index,
        }
    }

    pub fn output(index: usize) -> Self {
        Variable {
            kind: VarKind::Output,
            index,
        }
    }

    /// Parses `X_<n>` / `Y_<n>`. Leading zeros are rejected so every variable
    /// has exactly one spelling.
    pub fn parse(name: &str) -> Option<Self> {
        let (kind, digits) = match name.strip_prefix("X_") {
            Some(rest) => (VarKind::Input, rest),
            None => (VarKind::Output, name.strip_prefix("Y_")?),
        };
        if digits.is_empty()
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || (digits.len() > 1 && digits.starts_with('0'))
        {
            return None;
        }
        digits.parse().ok().map(|index| Variable { kind, index })
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Input => write!(f, "X_{}", self.index),
            VarKind::Output => write!(f, "Y_{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    LessEq,
    GreaterEq,
}

/// `(Σ coefficient·variable) relation constant`, with no zero coefficients.
#[derive(Debug, Clone)]
pub struct LinearAtom {
    coefficients: BTreeMap<Variable, BigRational>,
    relation: Relation,
    constant: BigRational,
    /// Nearest-f64 copies of the coefficients and constant, present when
    /// every one of them is a normal float (or a zero constant).
    rounded: Option<(Vec<(Variable, f64)>, f64)>,
}

impl PartialEq for LinearAtom {
    fn eq(&self, other: &Self) -> bool {
        self.coefficients == other.coefficients && self.relation == other.relation && self.constant == other.constant
    }
}

impl Eq for LinearAtom {}

fn rounded_copy(map: &BTreeMap<Variable, BigRational>, constant: &BigRational) -> Option<(Vec<(Variable, f64)>, f64)> {
    let normal = |v: f64| v.is_normal() && v.abs() < 1e300;
    let k = constant.to_f64()?;
    if !(k == 0.0 || normal(k)) {
        return None;
    }
    let terms = map
        .iter()
        .map(|(&var, c)| c.to_f64().filter(|v| normal(*v)).map(|v| (var, v)))
        .collect::<Option<Vec<_>>>()?;
    Some((terms, k))
}

impl LinearAtom {
    /// Builds an atom, dropping zero coefficients. Returns `None` when no
    /// variable remains.
    pub fn new(
        coefficients: impl IntoIterator<Item = (Variable, BigRational)>,
        relation: Relation,
        constant: BigRational,
    ) -> Option<Self> {
        let mut map: BTreeMap<Variable, BigRational> = BTreeMap::new();
        for (var, c) in coefficients {
            *map.entry(var).or_insert_with(BigRational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        if map.is_empty() {
            return None;
        }
        let rounded = rounded_copy(&map, &constant);
        Some(LinearAtom {
            coefficients: map,
            relation,
            constant,
            rounded,
        })
    }

    pub fn coefficients(&self) -> &BTreeMap<Variable, BigRational> {
        &self.coefficients
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn constant(&self) -> &BigRational {
        &self.constant
    }

    /// Coefficients and constant rounded to nearest f64, unless one of them
    /// is zero-adjacent, subnormal or huge.
    pub fn rounded(&self) -> Option<(&[(Variable, f64)], f64)> {
        self.rounded.as_ref().map(|(t, k)| (t.as_slice(), *k))
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        self.coefficients.keys().copied()
    }

    /// If the atom bounds a single variable with coefficient ±1, returns that
    /// variable and the bound it implies, as `(var, is_lower_bound, value)`.
    pub fn as_unit_bound(&self) -> Option<(Variable, bool, BigRational)> {
        if self.coefficients.len() != 1 {
            return None;
        }
        let (&var, coeff) = self.coefficients.iter().next()?;
        let positive = if coeff.is_one() {
            true
        } else if (-coeff).is_one() {
            false
        } else {
            return None;
        };
        // c·v <= k with c = -1 reads v >= -k.
        let lower = matches!(
            (self.relation, positive),
            (Relation::GreaterEq, true) | (Relation::LessEq, false)
        );
        let value = if positive {
            self.constant.clone()
        } else {
            -self.constant.clone()
        };
        Some((var, lower, value))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Atom(LinearAtom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    /// Calls `visit` on every atom in the tree, depth first.
    pub fn for_each_atom<'a>(&'a self, visit: &mut impl FnMut(&'a LinearAtom)) {
        match self {
            Formula::Atom(atom) => visit(atom),
            Formula::And(children) | Formula::Or(children) => {
                for child in children {
                    child.for_each_atom(visit);
                }
            }
        }
    }

    pub fn contains_or(&self) -> bool {
        match self {
            Formula::Atom(_) => false,
            Formula::Or(_) => true,
            Formula::And(children) => children.iter().any(Formula::contains_or),
        }
    }

    fn references_input(&self) -> bool {
        let mut found = false;
        self.for_each_atom(&mut |atom| {
            found |= atom.variables().any(|v| v.kind == VarKind::Input);
        });
        found
    }

    /// Atoms reachable from the root through `And` nodes only.
    pub fn top_level_conjuncts(&self) -> Vec<&LinearAtom> {
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a LinearAtom>) {
            match f {
                Formula::Atom(atom) => out.push(atom),
                Formula::And(children) => children.iter().for_each(|c| walk(c, out)),
                Formula::Or(_) => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

/// A parsed VNNLIB file. `assertion` is the conjunction of every `assert`
/// form in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecFile {
    pub input_count: usize,
    pub output_count: usize,
    pub assertion: Formula,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("undeclared variable `{name}` at {pos}")]
    UndeclaredVariable { name: String, pos: Pos },
    #[error("specification contains no assertions")]
    EmptySpec,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BoxError {
    #[error("input X_{index} has no finite {side} bound")]
    UnboundedInput { index: usize, side: &'static str },
    #[error("input X_{index} has empty range [{lo}, {hi}]")]
    InfeasibleBounds { index: usize, lo: String, hi: String },
}

fn syntax(pos: Pos, message: impl Into<String>) -> SpecError {
    SpecError::Syntax {
        pos,
        message: message.into(),
    }
}

/// Parses a decimal numeral (`12`, `-0.5`, `1.5e-3`) into an exact rational.
pub fn parse_numeral(text: &str) -> Option<BigRational> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(at) => {
            let exp: i64 = body[at + 1..].parse().ok()?;
            (&body[..at], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return None;
    }
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(numer);
    let factor = BigRational::from_integer(num_traits::pow(ten, scale.unsigned_abs() as usize));
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Some(if negative { -value } else { value })
}

#[derive(Debug, Clone, Default)]
struct LinExpr {
    coefficients: BTreeMap<Variable, BigRational>,
    constant: BigRational,
}

impl LinExpr {
    fn constant(c: BigRational) -> Self {
        LinExpr {
            coefficients: BTreeMap::new(),
            constant: c,
        }
    }

    fn is_constant(&self) -> bool {
        self.coefficients.values().all(Zero::is_zero)
    }

    fn add(mut self, other: LinExpr, sign: i32) -> Self {
        let s = BigRational::from_integer(sign.into());
        for (var, c) in other.coefficients {
            *self.coefficients.entry(var).or_insert_with(BigRational::zero) += &s * c;
        }
        self.constant += s * other.constant;
        self
    }

    fn scale(mut self, k: &BigRational) -> Self {
        for c in self.coefficients.values_mut() {
            *c *= k;
        }
        self.constant *= k;
        self
    }
}

struct Parser {
    inputs: Vec<bool>,
    outputs: Vec<bool>,
    assertions: Vec<Formula>,
}

impl Parser {
    fn declare(&mut self, items: &[SExpr], pos: Pos) -> Result<(), SpecError> {
        let [_, name, sort] = items else {
            return Err(syntax(pos, "declare-const expects a name and a sort"));
        };
        let name_text = name
            .as_atom()
            .ok_or_else(|| syntax(name.pos(), "expected variable name"))?;
        let var = Variable::parse(name_text).ok_or_else(|| {
            syntax(
                name.pos(),
                format!("variable `{name_text}` does not follow the X_<i>/Y_<j> convention"),
            )
        })?;
        if sort.as_atom() != Some("Real") {
            return Err(syntax(sort.pos(), "only the Real sort is supported"));
        }
        let slots = match var.kind {
            VarKind::Input => &mut self.inputs,
            VarKind::Output => &mut self.outputs,
        };
        if slots.len() <= var.index {
            slots.resize(var.index + 1, false);
        }
        if std::mem::replace(&mut slots[var.index], true) {
            return Err(syntax(name.pos(), format!("`{var}` declared twice")));
        }
        Ok(())
    }

    fn variable(&self, name: &str, pos: Pos) -> Result<Variable, SpecError> {
        let var = Variable::parse(name).ok_or_else(|| syntax(pos, format!("unknown symbol `{name}`")))?;
        let slots = match var.kind {
            VarKind::Input => &self.inputs,
            VarKind::Output => &self.outputs,
        };
        if slots.get(var.index).copied().unwrap_or(false) {
            Ok(var)
        } else {
            Err(SpecError::UndeclaredVariable {
                name: name.to_string(),
                pos,
            })
        }
    }

    fn term(&self, expr: &SExpr) -> Result<LinExpr, SpecError> {
        match expr {
            SExpr::Atom(text, pos) => {
                if let Some(value) = parse_numeral(text) {
                    return Ok(LinExpr::constant(value));
                }
                let var = self.variable(text, *pos)?;
                let mut e = LinExpr::default();
                e.coefficients.insert(var, BigRational::one());
                Ok(e)
            }
            SExpr::List(items, pos) => {
                let (op, args) = split_head(items, *pos)?;
                match op {
                    "+" => {
                        if args.len() < 2 {
                            return Err(syntax(*pos, "`+` needs at least two operands"));
                        }
                        args.iter()
                            .try_fold(LinExpr::default(), |acc, a| Ok(acc.add(self.term(a)?, 1)))
                    }
                    "-" => {
                        let (first, rest) = args.split_first().ok_or_else(|| syntax(*pos, "`-` needs an operand"))?;
                        let first = self.term(first)?;
                        if rest.is_empty() {
                            return Ok(LinExpr::default().add(first, -1));
                        }
                        rest.iter().try_fold(first, |acc, a| Ok(acc.add(self.term(a)?, -1)))
                    }
                    "*" => {
                        if args.len() < 2 {
                            return Err(syntax(*pos, "`*` needs at least two operands"));
                        }
                        let mut factor = BigRational::one();
                        let mut variable_part: Option<LinExpr> = None;
                        for a in args {
                            let t = self.term(a)?;
                            if t.is_constant() {
                                factor *= t.constant;
                            } else if variable_part.is_some() {
                                return Err(syntax(a.pos(), "non-linear term: product of two variable expressions"));
                            } else {
                                variable_part = Some(t);
                            }
                        }
                        Ok(match variable_part {
                            Some(t) => t.scale(&factor),
                            None => LinExpr::constant(factor),
                        })
                    }
                    "/" => {
                        let [num, den] = args else {
                            return Err(syntax(*pos, "`/` expects two operands"));
                        };
                        let den_term = self.term(den)?;
                        if !den_term.is_constant() {
                            return Err(syntax(den.pos(), "non-linear term: division by a variable"));
                        }
                        if den_term.constant.is_zero() {
                            return Err(syntax(den.pos(), "division by zero"));
                        }
                        Ok(self.term(num)?.scale(&den_term.constant.recip()))
                    }
                    other => Err(syntax(*pos, format!("unsupported term operator `{other}`"))),
                }
            }
        }
    }

    fn formula(&self, expr: &SExpr) -> Result<Formula, SpecError> {
        let SExpr::List(items, pos) = expr else {
            return Err(syntax(expr.pos(), "expected a Boolean formula"));
        };
        let (op, args) = split_head(items, *pos)?;
        match op {
            "and" | "or" => {
                if args.is_empty() {
                    return Err(syntax(*pos, format!("`{op}` needs at least one operand")));
                }
                let children = args.iter().map(|a| self.formula(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(if op == "and" {
                    Formula::And(children)
                } else {
                    Formula::Or(children)
                })
            }
            "<=" | ">=" => {
                let [lhs, rhs] = args else {
                    return Err(syntax(*pos, format!("`{op}` expects two operands")));
                };
                let diff = self.term(lhs)?.add(self.term(rhs)?, -1);
                let relation = if op == "<=" {
                    Relation::LessEq
                } else {
                    Relation::GreaterEq
                };
                LinearAtom::new(diff.coefficients, relation, -diff.constant)
                    .map(Formula::Atom)
                    .ok_or_else(|| syntax(*pos, "comparison does not mention any variable"))
            }
            other => Err(syntax(*pos, format!("unsupported operator `{other}`"))),
        }
    }
}

fn split_head(items: &[SExpr], pos: Pos) -> Result<(&str, &[SExpr]), SpecError> {
    let (head, args) = items.split_first().ok_or_else(|| syntax(pos, "empty list"))?;
    let op = head
        .as_atom()
        .ok_or_else(|| syntax(head.pos(), "expected an operator"))?;
    Ok((op, args))
}

fn contiguous_count(slots: &[bool], prefix: &str) -> Result<usize, SpecError> {
    if let Some(gap) = slots.iter().position(|declared| !declared) {
        return Err(syntax(
            Pos { line: 1, column: 1 },
            format!("{prefix}_{gap} is not declared but higher indices are"),
        ));
    }
    Ok(slots.len())
}

/// Parses VNNLIB text.
pub fn parse_spec(text: &str) -> Result<SpecFile, SpecError> {
    let forms = sexpr::read_all(text).map_err(|e| syntax(e.pos, e.message))?;
    let mut parser = Parser {
        inputs: Vec::new(),
        outputs: Vec::new(),
        assertions: Vec::new(),
    };

    for form in &forms {
        let SExpr::List(items, pos) = form else {
            return Err(syntax(form.pos(), "expected a command list"));
        };
        let (command, args) = split_head(items, *pos)?;
        match command {
            "declare-const" => parser.declare(items, *pos)?,
            "assert" => {
                let [body] = args else {
                    return Err(syntax(*pos, "assert expects exactly one formula"));
                };
                let f = parser.formula(body)?;
                parser.assertions.push(f);
            }
            other => return Err(syntax(*pos, format!("unsupported command `{other}`"))),
        }
    }

    if parser.assertions.is_empty() {
        return Err(SpecError::EmptySpec);
    }
    let input_count = contiguous_count(&parser.inputs, "X")?;
    let output_count = contiguous_count(&parser.outputs, "Y")?;
    if input_count == 0 {
        return Err(syntax(Pos { line: 1, column: 1 }, "no input variables declared"));
    }
    if output_count == 0 {
        return Err(syntax(Pos { line: 1, column: 1 }, "no output variables declared"));
    }
    Ok(SpecFile {
        input_count,
        output_count,
        assertion: Formula::And(parser.assertions),
    })
}

/// Rounds `value` to a binary64 that does not lie outside `value` in the given
/// direction (`up` rounds towards +∞).
fn round_directed(value: &BigRational, up: bool) -> f64 {
    let nearest = value.to_f64().unwrap_or(f64::NAN);
    if !nearest.is_finite() {
        return nearest;
    }
    let exact = BigRational::from_float(nearest).expect("finite float");
    match (up, exact.cmp(value)) {
        (true, std::cmp::Ordering::Less) => nearest.next_up(),
        (false, std::cmp::Ordering::Greater) => nearest.next_down(),
        _ => nearest,
    }
}

/// Collects the input box from the single-input, unit-coefficient atoms among
/// the top-level conjuncts.
///
/// Bounds are rounded inwards to binary64, so every point of the returned box
/// satisfies the original rational bounds. If inward rounding would empty a
/// non-empty rational interval, nearest rounding is used instead.
pub fn extract_input_box(spec: &SpecFile) -> Result<InputBox, BoxError> {
    let mut lower: Vec<Option<BigRational>> = vec![None; spec.input_count];
    let mut upper: Vec<Option<BigRational>> = vec![None; spec.input_count];

    for atom in spec.assertion.top_level_conjuncts() {
        let Some((var, is_lower, value)) = atom.as_unit_bound() else {
            continue;
        };
        if var.kind != VarKind::Input || var.index >= spec.input_count {
            continue;
        }
        let slot = if is_lower {
            &mut lower[var.index]
        } else {
            &mut upper[var.index]
        };
        *slot = Some(match slot.take() {
            None => value,
            Some(old) if is_lower => old.max(value),
            Some(old) => old.min(value),
        });
    }

    let mut lo = Vec::with_capacity(spec.input_count);
    let mut hi = Vec::with_capacity(spec.input_count);
    for index in 0..spec.input_count {
        let l = lower[index]
            .as_ref()
            .ok_or(BoxError::UnboundedInput { index, side: "lower" })?;
        let u = upper[index]
            .as_ref()
            .ok_or(BoxError::UnboundedInput { index, side: "upper" })?;
        if l > u {
            return Err(BoxError::InfeasibleBounds {
                index,
                lo: format_rational(l),
                hi: format_rational(u),
            });
        }
        let (mut lf, mut uf) = (round_directed(l, true), round_directed(u, false));
        if lf > uf {
            lf = l.to_f64().unwrap_or(f64::NAN);
            uf = u.to_f64().unwrap_or(f64::NAN);
        }
        if !lf.is_finite() {
            return Err(BoxError::UnboundedInput { index, side: "lower" });
        }
        if !uf.is_finite() {
            return Err(BoxError::UnboundedInput { index, side: "upper" });
        }
        lo.push(lf);
        hi.push(uf);
    }
    Ok(InputBox::new(lo, hi).expect("bounds checked finite and ordered"))
}

/// True iff some `Or` node has an input-variable atom anywhere beneath it.
pub fn has_complex_input_disjunction(spec: &SpecFile) -> bool {
    fn walk(f: &Formula) -> bool {
        match f {
            Formula::Atom(_) => false,
            Formula::Or(_) if f.references_input() => true,
            Formula::And(children) | Formula::Or(children) => children.iter().any(walk),
        }
    }
    walk(&spec.assertion)
}

/// Exact `f64 → rational` conversion used by the checker.
pub(crate) fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}
