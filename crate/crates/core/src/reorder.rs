//! Dynamic variable reordering: adjacent-level swaps and classic sifting.
//!
//! Swaps rewrite nodes in place, so every registered root keeps its id and
//! its function. Reference counts are rebuilt by a collection before the
//! first swap and maintained exactly while reordering; nodes whose count
//! drops to zero are freed immediately, which keeps the live node count
//! available in O(1) for sifting decisions.

use serde::Serialize;

use crate::bdd::{BddError, Manager, Node, NodeRef, VarId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReorderReport {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub order_before: Vec<String>,
    pub order_after: Vec<String>,
    pub swaps_performed: usize,
}

impl ReorderReport {
    /// Relative reduction in node count, in `[0, 1]`.
    pub fn reduction(&self) -> f64 {
        if self.nodes_before == 0 {
            0.0
        } else {
            1.0 - self.nodes_after as f64 / self.nodes_before as f64
        }
    }
}

/// When to sift while building advisory roots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ReorderPolicy {
    /// Never reorder.
    Never,
    /// Sift once after construction.
    Final,
    /// Sift whenever the live node count exceeds `growth` times the count
    /// at the previous sift (and at least `min_nodes`), plus once at the end.
    Periodic { growth: f64, min_nodes: usize },
}

impl Default for ReorderPolicy {
    fn default() -> Self {
        ReorderPolicy::Periodic { growth: 2.0, min_nodes: 4096 }
    }
}

impl Manager {
    fn ensure_refs(&mut self) {
        if !self.refs_valid {
            self.collect();
        }
    }

    /// Live node count as maintained by reordering.
    pub fn live_nodes(&mut self) -> usize {
        self.ensure_refs();
        self.live
    }

    #[inline]
    fn inc_ref(&mut self, id: u32) {
        self.refs[id as usize] += 1;
    }

    fn dec_ref(&mut self, id: u32) {
        if id < 2 {
            return;
        }
        let r = &mut self.refs[id as usize];
        debug_assert!(*r > 0, "reference count underflow on #{id}");
        *r -= 1;
        if *r == 0 {
            let n = self.nodes[id as usize];
            self.unique[n.var as usize].remove(&(n.hi, n.lo));
            self.release(id);
            self.live -= 1;
            self.dec_ref(n.hi);
            self.dec_ref(n.lo);
        }
    }

    /// `mk` that keeps reference counts exact; the returned node carries one
    /// new reference owned by the caller.
    fn mk_counted(&mut self, var: u32, hi: u32, lo: u32) -> u32 {
        if hi == lo {
            self.inc_ref(hi);
            return hi;
        }
        if let Some(&id) = self.unique[var as usize].get(&(hi, lo)) {
            self.inc_ref(id);
            return id;
        }
        let id = self.alloc(Node { var, hi, lo });
        self.unique[var as usize].insert((hi, lo), id);
        self.inc_ref(hi);
        self.inc_ref(lo);
        self.refs[id as usize] = 1;
        self.live += 1;
        id
    }

    /// Exchanges the variables at `level` and `level + 1`.
    pub fn swap_adjacent(&mut self, level: usize) -> Result<(), BddError> {
        let n = self.num_vars();
        if level + 1 >= n {
            return Err(BddError::LevelOutOfRange(level + 1));
        }
        if level < self.frozen {
            return Err(BddError::FrozenLevel(level));
        }
        self.ensure_refs();
        self.clear_cache();
        self.swap_in_place(level);
        Ok(())
    }

    fn swap_in_place(&mut self, level: usize) {
        let x = self.level2var[level];
        let y = self.level2var[level + 1];
        let upper = std::mem::take(&mut self.unique[x as usize]);
        let mut interacting = Vec::new();
        let mut table = rustc_hash::FxHashMap::default();
        table.reserve(upper.len());
        for (key, id) in upper {
            let (hi, lo) = key;
            if self.var_of(hi) == y || self.var_of(lo) == y {
                interacting.push(id);
            } else {
                table.insert(key, id);
            }
        }
        self.unique[x as usize] = table;

        for id in interacting {
            let Node { hi: f1, lo: f0, .. } = self.nodes[id as usize];
            let (f11, f10) = self.split_on(f1, y);
            let (f01, f00) = self.split_on(f0, y);
            let new_hi = self.mk_counted(x, f11, f01);
            let new_lo = self.mk_counted(x, f10, f00);
            self.dec_ref(f1);
            self.dec_ref(f0);
            self.nodes[id as usize] = Node { var: y, hi: new_hi, lo: new_lo };
            let previous = self.unique[y as usize].insert((new_hi, new_lo), id);
            debug_assert!(previous.is_none(), "swap produced a duplicate node");
        }

        self.level2var.swap(level, level + 1);
        self.var2level[x as usize] = (level + 1) as u32;
        self.var2level[y as usize] = level as u32;
    }

    #[inline]
    fn var_of(&self, id: u32) -> u32 {
        if id < 2 {
            u32::MAX
        } else {
            self.nodes[id as usize].var
        }
    }

    #[inline]
    fn split_on(&self, id: u32, var: u32) -> (u32, u32) {
        if self.var_of(id) == var {
            let n = self.nodes[id as usize];
            (n.hi, n.lo)
        } else {
            (id, id)
        }
    }

    /// Pins `vars` at the top of the order. Together with any variables
    /// already frozen they must occupy levels `0..k` exactly; their relative
    /// order is kept as it is.
    pub fn freeze(&mut self, vars: &[VarId]) -> Result<(), BddError> {
        for &v in vars {
            if v.index() >= self.num_vars() {
                return Err(BddError::UndeclaredVariable(v.0));
            }
        }
        let mut levels: Vec<usize> = vars.iter().map(|&v| self.level_of(v)).collect();
        levels.extend(0..self.frozen);
        levels.sort_unstable();
        levels.dedup();
        for (expected, &level) in levels.iter().enumerate() {
            if level != expected {
                let v = self.var_at_level(level);
                return Err(BddError::NotTopContiguous(v.0, level));
            }
        }
        self.frozen = levels.len();
        Ok(())
    }

    /// Moves the variable at `from` to level `to` by adjacent swaps.
    fn move_level(&mut self, from: usize, to: usize, swaps: &mut usize) {
        let mut at = from;
        while at < to {
            self.swap_in_place(at);
            at += 1;
            *swaps += 1;
        }
        while at > to {
            self.swap_in_place(at - 1);
            at -= 1;
            *swaps += 1;
        }
    }
}

/// Classic single-variable sifting over every unfrozen variable.
///
/// Variables are processed in decreasing order of their level population
/// (ties by variable id). Each one visits every unfrozen level, nearer end
/// first, and is parked at the level giving the smallest live node count,
/// the topmost such level on ties. `roots` are protected for the duration
/// of the call in addition to the manager's registered roots.
pub fn sift(m: &mut Manager, roots: &[NodeRef]) -> ReorderReport {
    for &r in roots {
        m.register_root(r);
    }
    m.collect();
    let order_before = m.order_names();
    let nodes_before = m.live;
    let mut swaps = 0;

    let lo_bound = m.frozen;
    let n = m.num_vars();
    if n > lo_bound + 1 {
        let hi_bound = n - 1;
        let mut vars: Vec<u32> = (lo_bound..n).map(|l| m.level2var[l]).collect();
        vars.sort_by(|&a, &b| {
            m.unique[b as usize]
                .len()
                .cmp(&m.unique[a as usize].len())
                .then(a.cmp(&b))
        });
        for var in vars {
            let start = m.var2level[var as usize] as usize;
            let mut best = (m.live, start);
            let consider = |m: &Manager, level: usize, best: &mut (usize, usize)| {
                if m.live < best.0 || (m.live == best.0 && level < best.1) {
                    *best = (m.live, level);
                }
            };
            let (first, second) = if start - lo_bound <= hi_bound - start {
                (lo_bound, hi_bound)
            } else {
                (hi_bound, lo_bound)
            };
            let mut at = start;
            for target in [first, second] {
                while at != target {
                    let next = if target > at { at + 1 } else { at - 1 };
                    m.swap_in_place(at.min(next));
                    swaps += 1;
                    at = next;
                    consider(m, at, &mut best);
                }
            }
            m.move_level(at, best.1, &mut swaps);
            debug_assert_eq!(m.live, best.0);
        }
    }

    let report = ReorderReport {
        nodes_before,
        nodes_after: m.live,
        order_before,
        order_after: m.order_names(),
        swaps_performed: swaps,
    };
    m.clear_cache();
    for &r in roots {
        m.unregister_root(r);
    }
    // Unregistering may leave the protected roots without references; the
    // counts are rebuilt on the next reordering.
    m.refs_valid = false;
    report
}
