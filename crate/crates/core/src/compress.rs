//! Table to diagram: per-advisory roots, partition proof, elimination of the
//! largest root, and the selector-guarded single-root diagram.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::bdd::{BddError, Manager, NodeRef};
use crate::codec::{Advisory, BitLayout, CodecError, Dimension, QuantizationGrid, StateIndex};
use crate::reorder::{sift, ReorderPolicy, ReorderReport};
use crate::table::{AdvisoryTable, Odometer, DEFAULT_CHUNK_SIZE};

#[derive(Debug, Error)]
pub enum CompressError {
    #[error("manager has {0} variables; the state layout needs {n}", n = BitLayout::NUM_VARS)]
    LayoutMismatch(usize),
    #[error("table grid does not match the diagram grid")]
    GridMismatch,
    #[error("advisory roots do not form a partition:\n{0}")]
    PartitionFailed(Box<PartitionReport>),
    #[error("selector map: {0}")]
    SelectorMap(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Bdd(#[from] BddError),
}

/// One root per advisory plus the valid-code domain, all registered with
/// the manager that built them.
#[derive(Clone, Debug)]
pub struct AdvisoryRoots {
    pub roots: [NodeRef; 5],
    pub domain: NodeRef,
    pub a_prev: Advisory,
    pub grid: QuantizationGrid,
    pub chunks_processed: usize,
    pub reorder_reports: Vec<ReorderReport>,
}

impl AdvisoryRoots {
    pub fn root(&self, a: Advisory) -> NodeRef {
        self.roots[a.code() as usize]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub chunk_size: usize,
    pub policy: ReorderPolicy,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { chunk_size: DEFAULT_CHUNK_SIZE, policy: ReorderPolicy::default() }
    }
}

fn check_layout(m: &Manager) -> Result<(), CompressError> {
    if m.num_vars() != BitLayout::NUM_VARS {
        return Err(CompressError::LayoutMismatch(m.num_vars()));
    }
    Ok(())
}

/// Builds the five advisory roots chunk by chunk: the cubes of each chunk are
/// merged into one temporary diagram per advisory, which is then OR-ed into
/// that advisory's root.
pub fn build_roots(
    m: &mut Manager,
    table: &AdvisoryTable,
    options: BuildOptions,
) -> Result<AdvisoryRoots, CompressError> {
    check_layout(m)?;
    let layout = BitLayout::standard();
    let grid = table.grid();
    let state_vars = layout.state_vars();

    let domain = layout.domain(m, grid)?;
    m.register_root(domain);
    let mut roots = [NodeRef::FALSE; 5];

    // Pattern bit k is state variable k + 2.
    let codes: [Vec<u64>; 6] = std::array::from_fn(|d| {
        let dim = Dimension::ALL[d];
        (0..grid.cardinality(dim) as u32).map(|i| layout.dim_bits(dim, i) >> 2).collect()
    });

    let mut buckets: [Vec<u64>; 5] = Default::default();
    let mut reports = Vec::new();
    let mut last_sift_live = 0usize;
    let mut chunks = 0;
    for chunk in table.stream_chunks(options.chunk_size.max(1)) {
        let mut odometer = Odometer::starting_at(grid, chunk.start_offset);
        for &a in chunk.entries {
            let s = &odometer.state.0;
            let pattern = codes[0][s[0] as usize]
                | codes[1][s[1] as usize]
                | codes[2][s[2] as usize]
                | codes[3][s[3] as usize]
                | codes[4][s[4] as usize]
                | codes[5][s[5] as usize];
            buckets[a.code() as usize].push(pattern);
            odometer.advance();
        }
        for (k, bucket) in buckets.iter_mut().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let temp = m.cube_union(&state_vars, bucket)?;
            bucket.clear();
            let merged = m.or(roots[k], temp);
            m.replace_root(roots[k], merged);
            roots[k] = merged;
        }
        chunks += 1;

        m.collect();
        if let ReorderPolicy::Periodic { growth, min_nodes } = options.policy {
            let live = m.live_nodes();
            if live >= min_nodes && live as f64 > growth * last_sift_live as f64 {
                let report = sift(m, &[]);
                last_sift_live = report.nodes_after;
                reports.push(report);
            }
        }
    }
    if options.policy != ReorderPolicy::Never {
        reports.push(sift(m, &[]));
    }

    Ok(AdvisoryRoots {
        roots,
        domain,
        a_prev: table.a_prev(),
        grid: grid.clone(),
        chunks_processed: chunks,
        reorder_reports: reports,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMode {
    /// Coverage over assignments whose codes are valid grid indices.
    #[default]
    Valid,
    /// Coverage over all 2^30 state bit patterns.
    All,
}

impl std::str::FromStr for CoverageMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "valid" => Ok(CoverageMode::Valid),
            "all" => Ok(CoverageMode::All),
            other => Err(format!("unknown coverage mode `{other}` (expected valid|all)")),
        }
    }
}

/// A satisfying assignment of a failed check, with its decoded state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub bits: u64,
    /// Gray-decoded indices; may lie outside the grid.
    pub state: StateIndex,
    pub in_grid: bool,
}

impl Witness {
    pub fn from_assignment(assignment: &[bool], grid: &QuantizationGrid) -> Self {
        let layout = BitLayout::standard();
        let state = layout.decode_assignment(assignment);
        Witness {
            bits: crate::codec::assignment_to_bits(assignment),
            state,
            in_grid: grid.validate(&state).is_ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairCheck {
    pub a: Advisory,
    pub b: Advisory,
    pub disjoint: bool,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionReport {
    pub mode: CoverageMode,
    pub pairs: Vec<PairCheck>,
    pub coverage: bool,
    pub coverage_witness: Option<Witness>,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.coverage && self.pairs.iter().all(|p| p.disjoint)
    }
}

impl fmt::Display for PartitionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.pairs {
            write!(f, "  {} ∧ {}: ", p.a, p.b)?;
            match &p.witness {
                None => writeln!(f, "FALSE (disjoint)")?,
                Some(w) => writeln!(f, "overlap at {}", w.state)?,
            }
        }
        write!(f, "  coverage ({:?}): ", self.mode)?;
        match &self.coverage_witness {
            None => writeln!(f, "complete"),
            Some(w) if w.in_grid => writeln!(f, "missing state {}", w.state),
            Some(w) => writeln!(f, "missing unused code {}", w.state),
        }
    }
}

/// Checks the ten pairwise conjunctions and the coverage of the five roots.
pub fn check_partition(m: &mut Manager, r: &AdvisoryRoots, mode: CoverageMode) -> PartitionReport {
    let mut pairs = Vec::with_capacity(10);
    for i in 0..5 {
        for j in i + 1..5 {
            let both = m.and(r.roots[i], r.roots[j]);
            let witness = m.pick_sat(both).map(|a| Witness::from_assignment(&a, &r.grid));
            pairs.push(PairCheck {
                a: Advisory::ALL[i],
                b: Advisory::ALL[j],
                disjoint: witness.is_none(),
                witness,
            });
        }
    }
    let union = m.or_all(r.roots);
    let uncovered = match mode {
        CoverageMode::Valid => m.diff(r.domain, union),
        CoverageMode::All => m.not(union),
    };
    let coverage_witness = m.pick_sat(uncovered).map(|a| Witness::from_assignment(&a, &r.grid));
    PartitionReport { mode, pairs, coverage: coverage_witness.is_none(), coverage_witness }
}

/// The four explicit roots and the advisory represented by complement.
#[derive(Clone, Debug)]
pub struct Elimination {
    /// Kept roots in advisory enum order.
    pub kept: Vec<(Advisory, NodeRef)>,
    pub eliminated: Advisory,
    pub eliminated_root: NodeRef,
    pub node_counts: [usize; 5],
}

/// Drops the root with the most nodes (first in enum order on ties).
pub fn eliminate_largest(
    m: &mut Manager,
    r: &AdvisoryRoots,
    partition: &PartitionReport,
) -> Result<Elimination, CompressError> {
    if !partition.passed() {
        return Err(CompressError::PartitionFailed(Box::new(partition.clone())));
    }
    let node_counts: [usize; 5] = std::array::from_fn(|k| m.node_count(r.roots[k]));
    let mut largest = 0;
    for k in 1..5 {
        if node_counts[k] > node_counts[largest] {
            largest = k;
        }
    }
    let kept = (0..5)
        .filter(|&k| k != largest)
        .map(|k| (Advisory::ALL[k], r.roots[k]))
        .collect();
    Ok(Elimination {
        kept,
        eliminated: Advisory::ALL[largest],
        eliminated_root: r.roots[largest],
        node_counts,
    })
}

/// `domain ∧ ¬(k1 ∨ k2 ∨ k3 ∨ k4)`: the eliminated advisory's region,
/// recovered from the kept roots.
pub fn reconstruct_eliminated(m: &mut Manager, kept: &[NodeRef], domain: NodeRef) -> NodeRef {
    let union = m.or_all(kept.iter().copied());
    m.diff(domain, union)
}

/// Assignment of the four selector patterns `(bdd1, bdd0)` to advisories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelectorMap {
    entries: Vec<(Advisory, (bool, bool))>,
}

/// Patterns in assignment order.
pub const SELECTOR_PATTERNS: [(bool, bool); 4] =
    [(true, true), (false, true), (true, false), (false, false)];

impl SelectorMap {
    pub fn new(entries: Vec<(Advisory, (bool, bool))>) -> Result<Self, CompressError> {
        if entries.len() != 4 {
            return Err(CompressError::SelectorMap(format!(
                "expected 4 advisories, found {}",
                entries.len()
            )));
        }
        for (i, (a, p)) in entries.iter().enumerate() {
            for (b, q) in &entries[..i] {
                if p == q {
                    return Err(CompressError::SelectorMap(format!(
                        "{a} and {b} share pattern {}",
                        pattern_str(*p)
                    )));
                }
                if a == b {
                    return Err(CompressError::SelectorMap(format!("{a} listed twice")));
                }
            }
        }
        Ok(SelectorMap { entries })
    }

    /// The map used for a table: for a previous advisory of SR with COC, SL,
    /// WR and SR kept, the reference convention `COC=11, SL=01, WR=10,
    /// SR=00`; otherwise the kept advisories in enum order take the patterns
    /// 11, 01, 10, 00.
    pub fn default_for(a_prev: Advisory, kept: &[Advisory]) -> Result<Self, CompressError> {
        let mut sorted = kept.to_vec();
        sorted.sort();
        let sr_convention = [Advisory::Coc, Advisory::Wr, Advisory::Sl, Advisory::Sr];
        let order: Vec<Advisory> = if a_prev == Advisory::Sr && sorted == sr_convention {
            vec![Advisory::Coc, Advisory::Sl, Advisory::Wr, Advisory::Sr]
        } else {
            sorted
        };
        Self::new(order.into_iter().zip(SELECTOR_PATTERNS).collect())
    }

    pub fn entries(&self) -> &[(Advisory, (bool, bool))] {
        &self.entries
    }

    pub fn pattern(&self, a: Advisory) -> Option<(bool, bool)> {
        self.entries.iter().find(|(b, _)| *b == a).map(|&(_, p)| p)
    }

    pub fn advisories(&self) -> Vec<Advisory> {
        self.entries.iter().map(|&(a, _)| a).collect()
    }
}

pub fn pattern_str(p: (bool, bool)) -> String {
    format!("{}{}", p.0 as u8, p.1 as u8)
}

impl fmt::Display for SelectorMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.entries.iter().map(|(a, p)| format!("{a}:{}", pattern_str(*p))).collect();
        f.write_str(&parts.join(" "))
    }
}

/// The deployable single-root diagram.
#[derive(Clone, Debug)]
pub struct GlobalRoot {
    pub root: NodeRef,
    pub selector_map: SelectorMap,
    pub eliminated: Advisory,
    pub a_prev: Advisory,
    /// Valid-code domain over the grid below; registered with the manager.
    pub domain: NodeRef,
    pub grid: QuantizationGrid,
}

/// `∨ (sel_a ∧ root_a)` over the kept advisories. The result and the
/// domain are registered as roots.
pub fn assemble_global(
    m: &mut Manager,
    elimination: &Elimination,
    selector_map: SelectorMap,
    roots: &AdvisoryRoots,
) -> Result<GlobalRoot, CompressError> {
    check_layout(m)?;
    let layout = BitLayout::standard();
    let mut kept_sorted: Vec<Advisory> = elimination.kept.iter().map(|&(a, _)| a).collect();
    let mut mapped = selector_map.advisories();
    kept_sorted.sort();
    mapped.sort();
    if kept_sorted != mapped {
        return Err(CompressError::SelectorMap(
            "selector map does not cover exactly the kept advisories".into(),
        ));
    }
    let mut global = NodeRef::FALSE;
    for &(a, (b1, b0)) in selector_map.entries() {
        let root = elimination.kept.iter().find(|(k, _)| *k == a).unwrap().1;
        let sel = m.cube(&[(layout.bdd1(), b1), (layout.bdd0(), b0)])?;
        let guarded = m.and(sel, root);
        global = m.or(global, guarded);
    }
    m.register_root(global);
    m.register_root(roots.domain);
    Ok(GlobalRoot {
        root: global,
        selector_map,
        eliminated: elimination.eliminated,
        a_prev: roots.a_prev,
        domain: roots.domain,
        grid: roots.grid.clone(),
    })
}

impl GlobalRoot {
    /// Region of states issued `a`: a selector cofactor for kept advisories,
    /// the complement of their union within the domain otherwise.
    pub fn advisory_region(&self, m: &mut Manager, a: Advisory) -> Result<NodeRef, CompressError> {
        match self.selector_map.pattern(a) {
            Some(p) => self.kept_region(m, p),
            None => {
                let mut kept = Vec::with_capacity(4);
                for &(_, p) in self.selector_map.entries() {
                    kept.push(self.kept_region(m, p)?);
                }
                Ok(reconstruct_eliminated(m, &kept, self.domain))
            }
        }
    }

    fn kept_region(&self, m: &mut Manager, p: (bool, bool)) -> Result<NodeRef, CompressError> {
        let layout = BitLayout::standard();
        Ok(m.restrict_many(self.root, &[(layout.bdd1(), p.0), (layout.bdd0(), p.1)])?)
    }

    pub fn node_count(&self, m: &Manager) -> usize {
        m.node_count(self.root)
    }
}

/// Advisory issued in state `s`: the first kept advisory whose selector
/// setting evaluates to true, else the eliminated one.
pub fn classify(m: &Manager, g: &GlobalRoot, s: &StateIndex) -> Result<Advisory, CompressError> {
    g.grid.validate(s)?;
    Ok(classify_unchecked(m, g, s))
}

#[inline]
pub fn classify_unchecked(m: &Manager, g: &GlobalRoot, s: &StateIndex) -> Advisory {
    let layout = BitLayout::standard();
    let bits = layout.state_bits(s);
    for &(a, p) in g.selector_map.entries() {
        if m.eval_bits(g.root, bits | layout.selector_bits(p)) {
            return a;
        }
    }
    g.eliminated
}

/// [`classify`] probing the kept advisories in a caller-chosen order.
pub fn classify_with_order(
    m: &Manager,
    g: &GlobalRoot,
    kept_order: &[Advisory],
    s: &StateIndex,
) -> Result<Advisory, CompressError> {
    g.grid.validate(s)?;
    let layout = BitLayout::standard();
    let bits = layout.state_bits(s);
    for &a in kept_order {
        if let Some(p) = g.selector_map.pattern(a) {
            if m.eval_bits(g.root, bits | layout.selector_bits(p)) {
                return Ok(a);
            }
        }
    }
    Ok(g.eliminated)
}

#[derive(Clone, Copy, Debug)]
pub struct CompressOptions {
    pub build: BuildOptions,
    pub coverage: CoverageMode,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions { build: BuildOptions::default(), coverage: CoverageMode::Valid }
    }
}

/// Everything the compression pipeline reports. Contains no timings, so it
/// is identical across runs.
#[derive(Clone, Debug, Serialize)]
pub struct BuildReport {
    pub a_prev: Advisory,
    pub cardinalities: [usize; 6],
    pub grid_fingerprint: String,
    pub chunk_size: usize,
    pub chunks_processed: usize,
    pub root_nodes: [usize; 5],
    pub partition: PartitionReport,
    pub eliminated: Advisory,
    pub selector_map: SelectorMap,
    pub build_reorders: Vec<ReorderReport>,
    pub global_reorder: Option<ReorderReport>,
    pub global_nodes: usize,
    pub final_order: Vec<String>,
}

impl BuildReport {
    /// Node count under the initial order, as first measured, and after the
    /// last reordering.
    pub fn overall_reduction(&self) -> Option<(usize, usize)> {
        let first = self.build_reorders.first()?;
        let last = self.global_reorder.as_ref().unwrap_or_else(|| self.build_reorders.last().unwrap());
        Some((first.nodes_before, last.nodes_after))
    }
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cards: Vec<String> = self.cardinalities.iter().map(|c| c.to_string()).collect();
        writeln!(f, "table: a_prev={} grid=({}) fingerprint={}", self.a_prev, cards.join(","), self.grid_fingerprint)?;
        writeln!(f, "chunks: {} x {} entries", self.chunks_processed, self.chunk_size)?;
        write!(f, "root nodes:")?;
        for (a, n) in Advisory::ALL.iter().zip(self.root_nodes) {
            write!(f, " {a}={n}")?;
        }
        writeln!(f)?;
        writeln!(f, "partition: {}", if self.partition.passed() { "ok" } else { "FAILED" })?;
        write!(f, "{}", self.partition)?;
        writeln!(f, "eliminated: {}", self.eliminated)?;
        writeln!(f, "selectors: {}", self.selector_map)?;
        for (k, r) in self.build_reorders.iter().enumerate() {
            writeln!(f, "build reorder {}: {} -> {} nodes ({} swaps)", k + 1, r.nodes_before, r.nodes_after, r.swaps_performed)?;
        }
        if let Some(r) = &self.global_reorder {
            writeln!(f, "global reorder: {} -> {} nodes ({} swaps)", r.nodes_before, r.nodes_after, r.swaps_performed)?;
        }
        writeln!(f, "global nodes: {}", self.global_nodes)?;
        writeln!(f, "final order: {}", self.final_order.join(" "))
    }
}

/// A compressed table: the manager owning the diagram and its global root.
#[derive(Debug)]
pub struct Compressed {
    pub manager: Manager,
    pub global: GlobalRoot,
    pub report: BuildReport,
}

/// Full pipeline: build roots, prove the partition, eliminate the largest
/// root, assemble the single-root diagram and sift it.
pub fn compress(table: &AdvisoryTable, options: CompressOptions) -> Result<Compressed, CompressError> {
    let mut m = BitLayout::standard().new_manager();
    let roots = build_roots(&mut m, table, options.build)?;
    let partition = check_partition(&mut m, &roots, options.coverage);
    let elimination = eliminate_largest(&mut m, &roots, &partition)?;
    let kept: Vec<Advisory> = elimination.kept.iter().map(|&(a, _)| a).collect();
    let selector_map = SelectorMap::default_for(table.a_prev(), &kept)?;
    let global = assemble_global(&mut m, &elimination, selector_map, &roots)?;
    for &r in &roots.roots {
        m.unregister_root(r);
    }
    m.unregister_root(roots.domain);
    m.collect();
    let global_reorder = match options.build.policy {
        ReorderPolicy::Never => None,
        _ => Some(sift(&mut m, &[])),
    };
    let report = BuildReport {
        a_prev: table.a_prev(),
        cardinalities: table.grid().cardinalities(),
        grid_fingerprint: table.grid().fingerprint(),
        chunk_size: options.build.chunk_size,
        chunks_processed: roots.chunks_processed,
        root_nodes: elimination.node_counts,
        partition,
        eliminated: elimination.eliminated,
        selector_map: global.selector_map.clone(),
        build_reorders: roots.reorder_reports.clone(),
        global_reorder,
        global_nodes: m.node_count(global.root),
        final_order: m.order_names(),
    };
    Ok(Compressed { manager: m, global, report })
}

impl Compressed {
    pub fn classify(&self, s: &StateIndex) -> Result<Advisory, CompressError> {
        classify(&self.manager, &self.global, s)
    }
}

#[cfg(test)]
mod tests;
