//! Discrete encounter state space and its Boolean embedding.
//!
//! Six quantized dimensions are each mapped to a fixed-width reflected
//! binary Gray code. Together with the two selector bits this gives the 32
//! Boolean variables every manager in this crate is built on:
//!
//! | vars   | meaning                      |
//! |--------|------------------------------|
//! | 0, 1   | selectors `bdd1`, `bdd0`     |
//! | 2..6   | `tau`, 4 bits, MSB first     |
//! | 6..12  | `rho`, 6 bits                |
//! | 12..18 | `theta`, 6 bits              |
//! | 18..24 | `psi`, 6 bits                |
//! | 24..28 | `v_own`, 4 bits              |
//! | 28..32 | `v_int`, 4 bits              |
//!
//! The initial variable order is the variable id order above.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bdd::{BddError, Manager, NodeRef, VarId};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("index {index} does not fit in {width} bits")]
    IndexOutOfRange { index: u64, width: usize },
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("unknown advisory `{0}`")]
    UnknownAdvisory(String),
    #[error("state index {index} out of range for {dim} (cardinality {cardinality})")]
    InvalidState { dim: Dimension, index: u32, cardinality: usize },
    #[error("lower bound {lo} exceeds upper bound {hi}")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("grid for {dim}: {reason}")]
    InvalidGrid { dim: Dimension, reason: String },
    #[error("grid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Bdd(#[from] BddError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Tau,
    Rho,
    Theta,
    Psi,
    VOwn,
    VInt,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Tau,
        Dimension::Rho,
        Dimension::Theta,
        Dimension::Psi,
        Dimension::VOwn,
        Dimension::VInt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Tau => "tau",
            Dimension::Rho => "rho",
            Dimension::Theta => "theta",
            Dimension::Psi => "psi",
            Dimension::VOwn => "v_own",
            Dimension::VInt => "v_int",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Dimension::Tau => "s",
            Dimension::Rho => "ft",
            Dimension::Theta | Dimension::Psi => "rad",
            Dimension::VOwn | Dimension::VInt => "ft/s",
        }
    }

    /// Cardinality of the full-size grid along this dimension.
    pub fn acas_cardinality(self) -> usize {
        ACAS_CARDINALITIES[self.index()]
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tau" => Ok(Dimension::Tau),
            "rho" => Ok(Dimension::Rho),
            "theta" => Ok(Dimension::Theta),
            "psi" => Ok(Dimension::Psi),
            "v_own" | "vown" => Ok(Dimension::VOwn),
            "v_int" | "vint" => Ok(Dimension::VInt),
            other => Err(CodecError::UnknownDimension(other.to_string())),
        }
    }
}

/// Horizontal advisory issued by the decision logic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Advisory {
    #[serde(rename = "COC")]
    Coc = 0,
    #[serde(rename = "WL")]
    Wl = 1,
    #[serde(rename = "WR")]
    Wr = 2,
    #[serde(rename = "SL")]
    Sl = 3,
    #[serde(rename = "SR")]
    Sr = 4,
}

impl Advisory {
    pub const ALL: [Advisory; 5] = [
        Advisory::Coc,
        Advisory::Wl,
        Advisory::Wr,
        Advisory::Sl,
        Advisory::Sr,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Advisory> {
        Advisory::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Advisory::Coc => "COC",
            Advisory::Wl => "WL",
            Advisory::Wr => "WR",
            Advisory::Sl => "SL",
            Advisory::Sr => "SR",
        }
    }
}

impl fmt::Display for Advisory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Advisory {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Advisory::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CodecError::UnknownAdvisory(s.to_string()))
    }
}

pub const ACAS_CARDINALITIES: [usize; 6] = [10, 41, 39, 39, 12, 12];

/// Reflected binary Gray code of `i` as `width` bits, most significant first.
pub fn gray_encode(i: u64, width: usize) -> Result<Vec<bool>, CodecError> {
    if width < 64 && i >> width != 0 {
        return Err(CodecError::IndexOutOfRange { index: i, width });
    }
    let g = to_gray(i);
    Ok((0..width).rev().map(|b| (g >> b) & 1 == 1).collect())
}

/// Inverse of [`gray_encode`]; bits are read most significant first.
pub fn gray_decode(bits: &[bool]) -> u64 {
    let g = bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
    from_gray(g)
}

#[inline]
pub fn to_gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

#[inline]
pub fn from_gray(mut g: u64) -> u64 {
    let mut shift = 1;
    while shift < 64 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

/// Index tuple `(tau, rho, theta, psi, v_own, v_int)` into a grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StateIndex(pub [u32; 6]);

impl StateIndex {
    pub fn new(tau: u32, rho: u32, theta: u32, psi: u32, v_own: u32, v_int: u32) -> Self {
        StateIndex([tau, rho, theta, psi, v_own, v_int])
    }

    /// Row-major offset, `v_int` varying fastest.
    pub fn offset(&self, grid: &QuantizationGrid) -> usize {
        let cards = grid.cardinalities();
        self.0
            .iter()
            .zip(cards.iter())
            .fold(0usize, |acc, (&i, &c)| acc * c + i as usize)
    }

    pub fn from_offset(grid: &QuantizationGrid, mut offset: usize) -> Self {
        let cards = grid.cardinalities();
        let mut idx = [0u32; 6];
        for d in (0..6).rev() {
            idx[d] = (offset % cards[d]) as u32;
            offset /= cards[d];
        }
        StateIndex(idx)
    }
}

impl Index<Dimension> for StateIndex {
    type Output = u32;

    fn index(&self, d: Dimension) -> &u32 {
        &self.0[d.index()]
    }
}

impl IndexMut<Dimension> for StateIndex {
    fn index_mut(&mut self, d: Dimension) -> &mut u32 {
        &mut self.0[d.index()]
    }
}

impl fmt::Display for StateIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e, g] = self.0;
        write!(f, "(tau={a}, rho={b}, theta={c}, psi={d}, v_own={e}, v_int={g})")
    }
}

/// Per-dimension breakpoint values in physical units.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizationGrid {
    axes: [Vec<f64>; 6],
}

/// Physical ranges used by the shipped synthetic grids.
pub const DEFAULT_RANGES: [(f64, f64); 6] = [
    (0.0, 100.0),
    (0.0, 62000.0),
    (-std::f64::consts::PI, std::f64::consts::PI),
    (-std::f64::consts::PI, std::f64::consts::PI),
    (60.0, 1200.0),
    (60.0, 1200.0),
];

pub fn linear_axis(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    (0..count)
        .map(|k| min + (max - min) * k as f64 / (count - 1) as f64)
        .collect()
}

impl QuantizationGrid {
    /// Synthetic full-size grid: linear breakpoints over [`DEFAULT_RANGES`]
    /// with cardinalities (10, 41, 39, 39, 12, 12).
    pub fn acas() -> Self {
        Self::linear(ACAS_CARDINALITIES).expect("default grid is valid")
    }

    /// Linear grid over [`DEFAULT_RANGES`] with arbitrary cardinalities.
    pub fn linear(counts: [usize; 6]) -> Result<Self, CodecError> {
        let axes = std::array::from_fn(|d| {
            let (lo, hi) = DEFAULT_RANGES[d];
            linear_axis(lo, hi, counts[d])
        });
        Self::from_axes(axes, true)
    }

    /// Builds a grid, checking that breakpoints are strictly increasing and
    /// fit the layout's bit widths. Unless `relaxed`, the cardinalities must
    /// be exactly the full-size ones.
    pub fn from_axes(axes: [Vec<f64>; 6], relaxed: bool) -> Result<Self, CodecError> {
        for d in Dimension::ALL {
            let axis = &axes[d.index()];
            let invalid = |reason: String| CodecError::InvalidGrid { dim: d, reason };
            if axis.is_empty() {
                return Err(invalid("no breakpoints".into()));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(invalid("non-finite breakpoint".into()));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("breakpoints are not strictly increasing".into()));
            }
            let width = BitLayout::WIDTHS[d.index()];
            if axis.len() > 1 << width {
                return Err(invalid(format!(
                    "{} breakpoints do not fit in {width} bits",
                    axis.len()
                )));
            }
            if !relaxed && axis.len() != d.acas_cardinality() {
                return Err(invalid(format!(
                    "expected {} breakpoints, found {} (use a relaxed grid for test grids)",
                    d.acas_cardinality(),
                    axis.len()
                )));
            }
        }
        Ok(QuantizationGrid { axes })
    }

    pub fn cardinalities(&self) -> [usize; 6] {
        std::array::from_fn(|d| self.axes[d].len())
    }

    pub fn cardinality(&self, d: Dimension) -> usize {
        self.axes[d.index()].len()
    }

    /// Number of valid states.
    pub fn len(&self) -> usize {
        self.cardinalities().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self, d: Dimension) -> &[f64] {
        &self.axes[d.index()]
    }

    pub fn value(&self, d: Dimension, i: u32) -> f64 {
        self.axes[d.index()][i as usize]
    }

    pub fn physical(&self, s: &StateIndex) -> [f64; 6] {
        std::array::from_fn(|d| self.axes[d][s.0[d] as usize])
    }

    pub fn validate(&self, s: &StateIndex) -> Result<(), CodecError> {
        for d in Dimension::ALL {
            let cardinality = self.cardinality(d);
            if s[d] as usize >= cardinality {
                return Err(CodecError::InvalidState { dim: d, index: s[d], cardinality });
            }
        }
        Ok(())
    }

    /// Short stable hash of the breakpoint values.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for axis in &self.axes {
            hasher.update((axis.len() as u64).to_le_bytes());
            for v in axis {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn states(&self) -> impl Iterator<Item = StateIndex> + '_ {
        (0..self.len()).map(move |o| StateIndex::from_offset(self, o))
    }

    /// Parses a grid configuration (TOML, one table per dimension holding
    /// either `values = [...]` or `min`/`max`/`count`).
    pub fn from_config_str(text: &str, relaxed: bool) -> Result<Self, CodecError> {
        let config: GridConfig =
            toml::from_str(text).map_err(|e| CodecError::Config(e.to_string()))?;
        let axes = [
            config.tau.into_values(),
            config.rho.into_values(),
            config.theta.into_values(),
            config.psi.into_values(),
            config.v_own.into_values(),
            config.v_int.into_values(),
        ];
        Self::from_axes(axes, relaxed)
    }

    pub fn load(path: &Path, relaxed: bool) -> Result<Self, CodecError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text, relaxed)
    }

    /// Explicit-values configuration text that parses back to this grid.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for d in Dimension::ALL {
            out.push_str(&format!("[{}]\nvalues = [", d.name()));
            let values: Vec<String> = self.values(d).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&values.join(", "));
            out.push_str("]\n\n");
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    tau: AxisSpec,
    rho: AxisSpec,
    theta: AxisSpec,
    psi: AxisSpec,
    v_own: AxisSpec,
    v_int: AxisSpec,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AxisSpec {
    Values { values: Vec<f64> },
    Linear { min: f64, max: f64, count: usize },
}

impl AxisSpec {
    fn into_values(self) -> Vec<f64> {
        match self {
            AxisSpec::Values { values } => values,
            AxisSpec::Linear { min, max, count } => linear_axis(min, max, count),
        }
    }
}

/// All indices of `d` whose breakpoint lies in the closed interval `[lo, hi]`.
pub fn value_bounds_to_index_set(
    grid: &QuantizationGrid,
    d: Dimension,
    lo: f64,
    hi: f64,
) -> Result<Vec<u32>, CodecError> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(CodecError::InvalidBounds { lo, hi });
    }
    Ok(grid
        .values(d)
        .iter()
        .enumerate()
        .filter(|&(_, &v)| lo <= v && v <= hi)
        .map(|(i, _)| i as u32)
        .collect())
}

/// The fixed variable layout: two selectors, then 30 Gray-coded state bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BitLayout;

impl BitLayout {
    pub const WIDTHS: [usize; 6] = [4, 6, 6, 6, 4, 4];
    pub const STATE_BITS: usize = 30;
    pub const SELECTOR_BITS: usize = 2;
    pub const NUM_VARS: usize = 32;
    const OFFSETS: [u32; 6] = [2, 6, 12, 18, 24, 28];

    pub fn standard() -> Self {
        BitLayout
    }

    pub fn width(self, d: Dimension) -> usize {
        Self::WIDTHS[d.index()]
    }

    /// Variable holding bit `bit` (0 = most significant) of dimension `d`.
    pub fn var(self, d: Dimension, bit: usize) -> VarId {
        assert!(bit < self.width(d));
        VarId(Self::OFFSETS[d.index()] + bit as u32)
    }

    pub fn bdd1(self) -> VarId {
        VarId(0)
    }

    pub fn bdd0(self) -> VarId {
        VarId(1)
    }

    pub fn selector_vars(self) -> [VarId; 2] {
        [self.bdd1(), self.bdd0()]
    }

    pub fn dim_vars(self, d: Dimension) -> Vec<VarId> {
        (0..self.width(d)).map(|b| self.var(d, b)).collect()
    }

    pub fn state_vars(self) -> Vec<VarId> {
        (2..Self::NUM_VARS as u32).map(VarId).collect()
    }

    pub fn var_names(self) -> Vec<String> {
        let mut names = vec!["bdd1".to_string(), "bdd0".to_string()];
        for d in Dimension::ALL {
            let short = d.name().replace('_', "");
            names.extend((0..self.width(d)).map(|b| format!("{short}{b}")));
        }
        names
    }

    /// A manager over the layout's 32 variables in the initial order, with
    /// the selectors frozen at the top.
    pub fn new_manager(self) -> Manager {
        let mut m = Manager::with_names(self.var_names()).expect("32 variables fit");
        m.freeze(&self.selector_vars()).expect("selectors sit at the top");
        m
    }

    /// Code bits of index `i` of `d`, placed at the dimension's variable
    /// positions (bit `v` of the result is variable `v`).
    #[inline]
    pub fn dim_bits(self, d: Dimension, i: u32) -> u64 {
        let width = self.width(d) as u32;
        let g = to_gray(i as u64);
        // MSB (bit 0 of the dimension) lives at the lowest variable id.
        let mut out = 0u64;
        for b in 0..width {
            let value = (g >> (width - 1 - b)) & 1;
            out |= value << (Self::OFFSETS[d.index()] + b);
        }
        out
    }

    /// Assignment bits for a state (selectors cleared).
    pub fn state_bits(self, s: &StateIndex) -> u64 {
        Dimension::ALL
            .iter()
            .fold(0u64, |acc, &d| acc | self.dim_bits(d, s[d]))
    }

    /// Assignment bits for the selector pattern `(bdd1, bdd0)`.
    pub fn selector_bits(self, pattern: (bool, bool)) -> u64 {
        (pattern.0 as u64) | ((pattern.1 as u64) << 1)
    }

    /// Gray-decodes each dimension of an assignment. The decoded indices may
    /// lie outside a grid when the assignment uses unused codes.
    pub fn decode_bits(self, bits: u64) -> StateIndex {
        let mut idx = [0u32; 6];
        for d in Dimension::ALL {
            let code: Vec<bool> = (0..self.width(d))
                .map(|b| (bits >> self.var(d, b).0) & 1 == 1)
                .collect();
            idx[d.index()] = gray_decode(&code) as u32;
        }
        StateIndex(idx)
    }

    pub fn decode_assignment(self, assignment: &[bool]) -> StateIndex {
        self.decode_bits(assignment_to_bits(assignment))
    }

    /// Set of indices of `d` as a function of the dimension's bits.
    pub fn index_set(
        self,
        m: &mut Manager,
        d: Dimension,
        indices: impl IntoIterator<Item = u32>,
    ) -> Result<NodeRef, CodecError> {
        let offset = Self::OFFSETS[d.index()];
        let mut patterns: Vec<u64> = indices
            .into_iter()
            .map(|i| self.dim_bits(d, i) >> offset)
            .collect();
        Ok(m.cube_union(&self.dim_vars(d), &mut patterns)?)
    }

    /// Assignments whose every dimension holds the code of a valid grid index.
    pub fn domain(self, m: &mut Manager, grid: &QuantizationGrid) -> Result<NodeRef, CodecError> {
        let mut acc = NodeRef::TRUE;
        // Bottom dimension first keeps every conjunction a cheap stack.
        for d in Dimension::ALL.into_iter().rev() {
            let set = self.index_set(m, d, 0..grid.cardinality(d) as u32)?;
            acc = m.and(set, acc);
        }
        Ok(acc)
    }
}

pub fn assignment_to_bits(assignment: &[bool]) -> u64 {
    assignment
        .iter()
        .take(64)
        .enumerate()
        .fold(0u64, |acc, (v, &b)| acc | ((b as u64) << v))
}

/// The conjunction of the 30 state literals of `s`.
pub fn state_to_cube(
    m: &mut Manager,
    layout: BitLayout,
    grid: &QuantizationGrid,
    s: &StateIndex,
) -> Result<NodeRef, CodecError> {
    grid.validate(s)?;
    let bits = layout.state_bits(s);
    let literals: Vec<(VarId, bool)> = layout
        .state_vars()
        .into_iter()
        .map(|v| (v, (bits >> v.0) & 1 == 1))
        .collect();
    Ok(m.cube(&literals)?)
}
