//! Property checking by intersection emptiness.
//!
//! A property is a premise over states (closed intervals on physical values
//! plus comparisons between same-unit dimensions) and a set of acceptable
//! advisories. It holds on a diagram iff `premise ∧ ¬expected` is `FALSE`;
//! otherwise any satisfying assignment is a counterexample state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdd::{BddError, Manager, NodeRef};
use crate::codec::{
    value_bounds_to_index_set, Advisory, BitLayout, CodecError, Dimension, QuantizationGrid,
    StateIndex,
};
use crate::compress::{classify_unchecked, CompressError, GlobalRoot};
use crate::table::{AdvisoryTable, Odometer};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("property `{name}` does not apply to tables with previous advisory {a_prev}")]
    NotApplicable { name: String, a_prev: Advisory },
    #[error("property `{name}`: {reason}")]
    InvalidProperty { name: String, reason: String },
    #[error("property file: {0}")]
    Parse(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparator {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Comparator {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Comparator::Le => a <= b,
            Comparator::Lt => a < b,
            Comparator::Eq => a == b,
            Comparator::Ge => a >= b,
            Comparator::Gt => a > b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Relation {
    pub lhs: Dimension,
    pub cmp: Comparator,
    pub rhs: Dimension,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.cmp.symbol(), self.rhs)
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // Longest operators first so `<=` is not read as `<`.
        for (token, cmp) in [
            ("<=", Comparator::Le),
            (">=", Comparator::Ge),
            ("==", Comparator::Eq),
            ("<", Comparator::Lt),
            (">", Comparator::Gt),
            ("=", Comparator::Eq),
        ] {
            if let Some((l, r)) = s.split_once(token) {
                let lhs = l.parse::<Dimension>().map_err(|e| e.to_string())?;
                let rhs = r.parse::<Dimension>().map_err(|e| e.to_string())?;
                return Ok(Relation { lhs, cmp, rhs });
            }
        }
        Err(format!("relation `{s}` has no comparator (expected one of <=, <, =, >=, >)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertySpec {
    pub name: String,
    /// Previous advisories the property applies to; empty means all.
    pub a_prev: Vec<Advisory>,
    pub intervals: Vec<(Dimension, f64, f64)>,
    pub relations: Vec<Relation>,
    pub expected: BTreeSet<Advisory>,
}

impl PropertySpec {
    pub fn new(name: impl Into<String>, expected: impl IntoIterator<Item = Advisory>) -> Self {
        PropertySpec {
            name: name.into(),
            a_prev: Vec::new(),
            intervals: Vec::new(),
            relations: Vec::new(),
            expected: expected.into_iter().collect(),
        }
    }

    pub fn interval(mut self, d: Dimension, lo: f64, hi: f64) -> Self {
        self.intervals.push((d, lo, hi));
        self
    }

    pub fn relation(mut self, lhs: Dimension, cmp: Comparator, rhs: Dimension) -> Self {
        self.relations.push(Relation { lhs, cmp, rhs });
        self
    }

    pub fn for_previous(mut self, a_prev: impl IntoIterator<Item = Advisory>) -> Self {
        self.a_prev = a_prev.into_iter().collect();
        self
    }

    /// Slower intruder approaching from behind: `v_int <= v_own`,
    /// `8500 <= rho <= 62000`, `-3.1416 <= theta <= -3.1316`,
    /// `-0.06 <= psi <= 0.06`; expected advisory COC.
    pub fn property_11() -> Self {
        PropertySpec::new("P11", [Advisory::Coc])
            .relation(Dimension::VInt, Comparator::Le, Dimension::VOwn)
            .interval(Dimension::Rho, 8500.0, 62000.0)
            .interval(Dimension::Theta, -3.1416, -3.1416 + 0.01)
            .interval(Dimension::Psi, -0.06, 0.06)
    }

    pub fn applies_to(&self, a_prev: Advisory) -> bool {
        self.a_prev.is_empty() || self.a_prev.contains(&a_prev)
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        let invalid = |reason: String| VerifyError::InvalidProperty { name: self.name.clone(), reason };
        if self.expected.is_empty() {
            return Err(invalid("expected advisory set is empty".into()));
        }
        if self.expected.len() == Advisory::ALL.len() {
            return Err(invalid("expected advisory set admits every advisory".into()));
        }
        for r in &self.relations {
            if r.lhs.unit() != r.rhs.unit() {
                return Err(invalid(format!("relation `{r}` compares {} with {}", r.lhs.unit(), r.rhs.unit())));
            }
        }
        for &(d, lo, hi) in &self.intervals {
            if !(lo <= hi) {
                return Err(invalid(format!("interval on {d} has lower bound {lo} above {hi}")));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyFile {
    #[serde(rename = "property", default)]
    properties: Vec<RawProperty>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    name: String,
    #[serde(default)]
    a_prev: Vec<String>,
    #[serde(default)]
    intervals: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    relations: Vec<String>,
    expected: Vec<String>,
}

/// Parses a property file (TOML, one `[[property]]` table per property).
pub fn parse_properties(text: &str) -> Result<Vec<PropertySpec>, VerifyError> {
    let file: PropertyFile = toml::from_str(text).map_err(|e| VerifyError::Parse(e.to_string()))?;
    let mut out = Vec::with_capacity(file.properties.len());
    for raw in file.properties {
        let parse_advisories = |list: &[String]| -> Result<Vec<Advisory>, VerifyError> {
            list.iter().map(|s| Ok(s.parse::<Advisory>()?)).collect()
        };
        let mut intervals = Vec::new();
        for (dim, [lo, hi]) in &raw.intervals {
            intervals.push((dim.parse::<Dimension>()?, *lo, *hi));
        }
        intervals.sort_by_key(|&(d, _, _)| d);
        let relations = raw
            .relations
            .iter()
            .map(|r| r.parse::<Relation>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| VerifyError::InvalidProperty { name: raw.name.clone(), reason: e })?;
        let spec = PropertySpec {
            a_prev: parse_advisories(&raw.a_prev)?,
            expected: parse_advisories(&raw.expected)?.into_iter().collect(),
            intervals,
            relations,
            name: raw.name,
        };
        spec.validate()?;
        out.push(spec);
    }
    Ok(out)
}

pub fn load_properties(path: &Path) -> Result<Vec<PropertySpec>, VerifyError> {
    parse_properties(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug)]
pub struct CompiledProperty {
    pub bdd: NodeRef,
    pub warnings: Vec<String>,
}

fn vacuous(what: impl fmt::Display) -> String {
    format!("vacuous constraint: {what} selects no grid point")
}

/// Pairs `(i, j)` with `lhs[i] cmp rhs[j]`, as a function of both dimensions' bits.
pub fn compile_relation(
    m: &mut Manager,
    grid: &QuantizationGrid,
    r: &Relation,
) -> Result<NodeRef, VerifyError> {
    let layout = BitLayout::standard();
    let (lv, rv) = (grid.values(r.lhs), grid.values(r.rhs));
    if r.lhs == r.rhs {
        let indices = (0..lv.len() as u32).filter(|&i| r.cmp.holds(lv[i as usize], lv[i as usize]));
        return Ok(layout.index_set(m, r.lhs, indices)?);
    }
    let mut vars = layout.dim_vars(r.lhs);
    vars.extend(layout.dim_vars(r.rhs));
    let lhs_width = layout.width(r.lhs);
    let local = |d: Dimension, i: usize| layout.dim_bits(d, i as u32) >> layout.var(d, 0).0;
    let mut patterns = Vec::new();
    for (i, &a) in lv.iter().enumerate() {
        for (j, &b) in rv.iter().enumerate() {
            if r.cmp.holds(a, b) {
                patterns.push(local(r.lhs, i) | (local(r.rhs, j) << lhs_width));
            }
        }
    }
    Ok(m.cube_union(&vars, &mut patterns)?)
}

/// Premise of `p` as a function over the state bits, restricted to valid codes.
pub fn compile_property(
    m: &mut Manager,
    grid: &QuantizationGrid,
    p: &PropertySpec,
) -> Result<CompiledProperty, VerifyError> {
    p.validate()?;
    let layout = BitLayout::standard();
    let mut warnings = Vec::new();
    let mut acc = layout.domain(m, grid)?;
    for &(d, lo, hi) in &p.intervals {
        let indices = value_bounds_to_index_set(grid, d, lo, hi)?;
        if indices.is_empty() {
            warnings.push(vacuous(format_args!("{lo} <= {d} <= {hi}")));
        }
        let set = layout.index_set(m, d, indices)?;
        acc = m.and(acc, set);
    }
    for r in &p.relations {
        let rel = compile_relation(m, grid, r)?;
        if rel.is_false() {
            warnings.push(vacuous(r));
        }
        acc = m.and(acc, rel);
    }
    Ok(CompiledProperty { bdd: acc, warnings })
}

/// Union of the regions of the advisories in `expected`.
pub fn compile_expected(
    m: &mut Manager,
    g: &GlobalRoot,
    expected: &BTreeSet<Advisory>,
) -> Result<NodeRef, VerifyError> {
    let mut acc = NodeRef::FALSE;
    for &a in expected {
        let region = g.advisory_region(m, a)?;
        acc = m.or(acc, region);
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Valid,
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub state: StateIndex,
    pub physical: [f64; 6],
    pub actual: Advisory,
    pub expected: Vec<Advisory>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub property: String,
    pub status: Status,
    pub counterexample: Option<Counterexample>,
    pub warnings: Vec<String>,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}", self.property, self.status)?;
        for w in &self.warnings {
            write!(f, "\n  warning: {w}")?;
        }
        if let Some(c) = &self.counterexample {
            let expected: Vec<&str> = c.expected.iter().map(|a| a.name()).collect();
            write!(f, "\n  counterexample {}", c.state)?;
            write!(f, "\n    values:")?;
            for (d, v) in Dimension::ALL.iter().zip(c.physical) {
                write!(f, " {d}={v} {}", d.unit())?;
            }
            write!(f, "\n    issued {} but expected one of {{{}}}", c.actual, expected.join(", "))?;
        }
        Ok(())
    }
}

/// Decides `p` on the diagram by checking `premise ∧ ¬expected` for emptiness.
pub fn check(m: &mut Manager, g: &GlobalRoot, p: &PropertySpec) -> Result<Verdict, VerifyError> {
    if !p.applies_to(g.a_prev) {
        return Err(VerifyError::NotApplicable { name: p.name.clone(), a_prev: g.a_prev });
    }
    let premise = compile_property(m, &g.grid, p)?;
    let expected = compile_expected(m, g, &p.expected)?;
    let violations = m.diff(premise.bdd, expected);
    let counterexample = m.pick_sat(violations).map(|assignment| {
        let state = BitLayout::standard().decode_assignment(&assignment);
        Counterexample {
            state,
            physical: g.grid.physical(&state),
            actual: classify_unchecked(m, g, &state),
            expected: p.expected.iter().copied().collect(),
        }
    });
    Ok(Verdict {
        property: p.name.clone(),
        status: if counterexample.is_some() { Status::Invalid } else { Status::Valid },
        counterexample,
        warnings: premise.warnings,
    })
}

/// Scans every state of the table directly. Reports the row-major first
/// violating state. Applicability to the table's previous advisory is not
/// checked.
pub fn brute_force_check(t: &AdvisoryTable, p: &PropertySpec) -> Verdict {
    let grid = t.grid();
    let mut warnings = Vec::new();
    let masks: [Vec<bool>; 6] = std::array::from_fn(|d| {
        let dim = Dimension::ALL[d];
        grid.values(dim)
            .iter()
            .map(|&v| {
                p.intervals
                    .iter()
                    .filter(|&&(id, _, _)| id == dim)
                    .all(|&(_, lo, hi)| lo <= v && v <= hi)
            })
            .collect()
    });
    for &(d, lo, hi) in &p.intervals {
        if !grid.values(d).iter().any(|&v| lo <= v && v <= hi) {
            warnings.push(vacuous(format_args!("{lo} <= {d} <= {hi}")));
        }
    }
    for r in &p.relations {
        let any = grid.values(r.lhs).iter().any(|&a| {
            grid.values(r.rhs).iter().enumerate().any(|(j, &b)| {
                if r.lhs == r.rhs { r.cmp.holds(a, a) && j == 0 } else { r.cmp.holds(a, b) }
            })
        });
        if !any {
            warnings.push(vacuous(r));
        }
    }

    let mut odometer = Odometer::new(grid.cardinalities());
    let mut counterexample = None;
    for &actual in t.entries() {
        let s = odometer.state;
        let in_premise = Dimension::ALL.iter().all(|&d| masks[d.index()][s[d] as usize])
            && p.relations
                .iter()
                .all(|r| r.cmp.holds(grid.value(r.lhs, s[r.lhs]), grid.value(r.rhs, s[r.rhs])));
        if in_premise && !p.expected.contains(&actual) {
            counterexample = Some(Counterexample {
                state: s,
                physical: grid.physical(&s),
                actual,
                expected: p.expected.iter().copied().collect(),
            });
            break;
        }
        odometer.advance();
    }
    Verdict {
        property: p.name.clone(),
        status: if counterexample.is_some() { Status::Invalid } else { Status::Valid },
        counterexample,
        warnings,
    }
}

/// Whether state `s` satisfies every constraint of `p` on raw grid values.
pub fn in_premise(grid: &QuantizationGrid, p: &PropertySpec, s: &StateIndex) -> bool {
    p.intervals.iter().all(|&(d, lo, hi)| {
        let v = grid.value(d, s[d]);
        lo <= v && v <= hi
    }) && p
        .relations
        .iter()
        .all(|r| r.cmp.holds(grid.value(r.lhs, s[r.lhs]), grid.value(r.rhs, s[r.rhs])))
}

/// Whether a counterexample lies in the premise of `p` and the table's
/// entry there falls outside the expected set.
pub fn revalidate(t: &AdvisoryTable, p: &PropertySpec, c: &Counterexample) -> bool {
    let grid = t.grid();
    grid.validate(&c.state).is_ok() && in_premise(grid, p, &c.state) && !p.expected.contains(&t.get(&c.state))
}

/// Copy of `base` on which `p` holds by construction: every premise state
/// issues the first expected advisory. With `violate`, the middle premise
/// state (row-major) instead issues the first advisory outside the expected
/// set, and that state is returned.
pub fn fixture(base: &AdvisoryTable, p: &PropertySpec, violate: bool) -> (AdvisoryTable, Option<StateIndex>) {
    let grid = base.grid();
    let good = *p.expected.iter().next().expect("validated property has an expected advisory");
    let bad = Advisory::ALL.into_iter().find(|a| !p.expected.contains(a));
    let premise: Vec<StateIndex> = grid.states().filter(|s| in_premise(grid, p, s)).collect();
    let mut t = base.clone();
    for s in &premise {
        t.set(s, good);
    }
    let violated = match (violate, bad) {
        (true, Some(bad)) if !premise.is_empty() => {
            let s = premise[premise.len() / 2];
            t.set(&s, bad);
            Some(s)
        }
        _ => None,
    };
    (t, violated)
}

/// Random property over `grid` for differential testing: up to three
/// intervals with endpoints near grid values, an optional speed relation,
/// and a random nonempty strict subset of advisories as the expected set.
pub fn random_property(grid: &QuantizationGrid, seed: u64) -> PropertySpec {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut dims = Dimension::ALL.to_vec();
    dims.shuffle(&mut rng);
    let mut p = PropertySpec::new(format!("random-{seed}"), []);
    for &d in dims.iter().take(rng.random_range(0..=3)) {
        let values = grid.values(d);
        let span = values[values.len() - 1] - values[0];
        let jitter = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(-0.02..0.02) * span.max(1.0);
        let i = rng.random_range(0..values.len());
        let j = rng.random_range(i..values.len());
        let lo = values[i] + jitter(&mut rng);
        let hi = (values[j] + jitter(&mut rng)).max(lo);
        p = p.interval(d, lo, hi);
    }
    if rng.random_bool(0.5) {
        let cmp = [Comparator::Le, Comparator::Lt, Comparator::Eq, Comparator::Ge, Comparator::Gt]
            [rng.random_range(0..5)];
        p = p.relation(Dimension::VInt, cmp, Dimension::VOwn);
    }
    let size = rng.random_range(1..Advisory::ALL.len());
    let mut advisories = Advisory::ALL.to_vec();
    advisories.shuffle(&mut rng);
    p.expected = advisories[..size].iter().copied().collect();
    p
}

#[cfg(test)]
mod tests;
