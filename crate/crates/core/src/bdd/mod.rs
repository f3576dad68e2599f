//! Canonical reduced ordered binary decision diagrams.
//!
//! A [`Manager`] owns a shared node store. Nodes are hash-consed through one
//! unique table per variable, so within a manager two [`NodeRef`]s are equal
//! exactly when they denote the same Boolean function. There are no
//! complement edges: `FALSE` and `TRUE` are explicit terminals.
//!
//! Node ids are stable across variable reordering (swaps rewrite nodes in
//! place), but only nodes reachable from registered roots survive a
//! [`Manager::collect`] or a reordering pass.

mod ops;
mod sat;

use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};

use rustc_hash::FxHashMap;
use thiserror::Error;

pub(crate) const FALSE_ID: u32 = 0;
pub(crate) const TRUE_ID: u32 = 1;
const TERMINAL_VAR: u32 = u32::MAX;
const FREE_VAR: u32 = u32::MAX - 1;

/// Maximum number of variables a manager can hold (assignments are packed
/// into a `u64` on the fast evaluation path).
pub const MAX_VARS: usize = 64;

static NEXT_TAG: AtomicU32 = AtomicU32::new(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BddError {
    #[error("variable {0} is not declared in this manager")]
    UndeclaredVariable(u32),
    #[error("no assignment given for variable {0}")]
    MissingAssignment(u32),
    #[error("manager capacity {0} exceeds the supported maximum of {MAX_VARS} variables")]
    Capacity(usize),
    #[error("variable order is not a permutation of the declared variables")]
    InvalidOrder,
    #[error("level {0} is frozen and cannot be moved")]
    FrozenLevel(usize),
    #[error("level {0} is out of range")]
    LevelOutOfRange(usize),
    #[error("variables to freeze must occupy the topmost levels, but {0} sits at level {1}")]
    NotTopContiguous(u32, usize),
}

/// A variable identifier, fixed for the lifetime of the manager. Its level
/// (position in the order) may change under reordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for VarId {
    fn from(v: u32) -> Self {
        VarId(v)
    }
}

/// Handle to a node owned by a [`Manager`].
///
/// The two constants are shared by all managers; every other handle carries
/// the tag of the manager that produced it, and using it with another
/// manager panics.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    tag: u32,
    id: u32,
}

impl NodeRef {
    pub const FALSE: NodeRef = NodeRef { tag: 0, id: FALSE_ID };
    pub const TRUE: NodeRef = NodeRef { tag: 0, id: TRUE_ID };

    pub fn id(self) -> u32 {
        self.id
    }

    pub fn is_const(self) -> bool {
        self.id < 2
    }

    pub fn is_false(self) -> bool {
        self.id == FALSE_ID
    }

    pub fn is_true(self) -> bool {
        self.id == TRUE_ID
    }
}

impl fmt::Debug for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            FALSE_ID => write!(f, "FALSE"),
            TRUE_ID => write!(f, "TRUE"),
            id => write!(f, "#{id}"),
        }
    }
}

/// A decision node as seen from outside the manager.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BddNode {
    pub var: VarId,
    pub level: usize,
    pub then_child: NodeRef,
    pub else_child: NodeRef,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node {
    pub(crate) var: u32,
    pub(crate) hi: u32,
    pub(crate) lo: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Op {
    And,
    Or,
    Xor,
    Not,
    Ite,
    Restrict,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub nodes_created: u64,
    pub collections: u64,
}

pub struct Manager {
    tag: u32,
    pub(crate) nodes: Vec<Node>,
    free: Vec<u32>,
    pub(crate) unique: Vec<FxHashMap<(u32, u32), u32>>,
    cache: FxHashMap<(Op, u32, u32, u32), u32>,
    cache_enabled: bool,
    pub(crate) var2level: Vec<u32>,
    pub(crate) level2var: Vec<u32>,
    names: Vec<String>,
    pub(crate) frozen: usize,
    roots: FxHashMap<u32, u32>,
    // Reference counts are only exact between a `collect` and the next
    // allocation outside of reordering.
    pub(crate) refs: Vec<u32>,
    pub(crate) refs_valid: bool,
    pub(crate) live: usize,
    stats: Stats,
}

impl fmt::Debug for Manager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manager")
            .field("vars", &self.num_vars())
            .field("allocated", &self.allocated())
            .field("frozen", &self.frozen)
            .finish()
    }
}

impl Manager {
    /// Creates a manager with `num_vars` variables named `x0..`, in identity order.
    pub fn new(num_vars: usize) -> Result<Self, BddError> {
        let names = (0..num_vars).map(|i| format!("x{i}")).collect();
        Self::with_names(names)
    }

    pub fn with_names(names: Vec<String>) -> Result<Self, BddError> {
        let n = names.len();
        if n > MAX_VARS {
            return Err(BddError::Capacity(n));
        }
        let order: Vec<VarId> = (0..n as u32).map(VarId).collect();
        Self::with_order(names, &order)
    }

    /// Creates a manager whose initial order lists variable ids from the top
    /// level down.
    pub fn with_order(names: Vec<String>, order: &[VarId]) -> Result<Self, BddError> {
        let n = names.len();
        if n > MAX_VARS {
            return Err(BddError::Capacity(n));
        }
        if order.len() != n {
            return Err(BddError::InvalidOrder);
        }
        let mut var2level = vec![u32::MAX; n];
        for (level, v) in order.iter().enumerate() {
            if v.index() >= n || var2level[v.index()] != u32::MAX {
                return Err(BddError::InvalidOrder);
            }
            var2level[v.index()] = level as u32;
        }
        let terminal = Node { var: TERMINAL_VAR, hi: 0, lo: 0 };
        Ok(Manager {
            tag: NEXT_TAG.fetch_add(1, Ordering::Relaxed),
            nodes: vec![terminal, terminal],
            free: Vec::new(),
            unique: vec![FxHashMap::default(); n],
            cache: FxHashMap::default(),
            cache_enabled: true,
            level2var: order.iter().map(|v| v.0).collect(),
            var2level,
            names,
            frozen: 0,
            roots: FxHashMap::default(),
            refs: vec![0, 0],
            refs_valid: false,
            live: 0,
            stats: Stats::default(),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.names[v.index()]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(|i| VarId(i as u32))
    }

    pub fn level_of(&self, v: VarId) -> usize {
        self.var2level[v.index()] as usize
    }

    pub fn var_at_level(&self, level: usize) -> VarId {
        VarId(self.level2var[level])
    }

    /// Current variable order, topmost level first.
    pub fn order(&self) -> Vec<VarId> {
        self.level2var.iter().map(|&v| VarId(v)).collect()
    }

    pub fn order_names(&self) -> Vec<String> {
        self.level2var.iter().map(|&v| self.names[v as usize].clone()).collect()
    }

    /// Number of frozen levels at the top of the order.
    pub fn frozen_levels(&self) -> usize {
        self.frozen
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Number of allocated internal nodes, dead or alive.
    pub fn allocated(&self) -> usize {
        self.nodes.len() - 2 - self.free.len()
    }

    pub fn set_cache_enabled(&mut self, enabled: bool) {
        self.cache_enabled = enabled;
        if !enabled {
            self.cache.clear();
        }
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    #[inline]
    pub(crate) fn wrap(&self, id: u32) -> NodeRef {
        if id < 2 {
            NodeRef { tag: 0, id }
        } else {
            NodeRef { tag: self.tag, id }
        }
    }

    #[inline]
    pub(crate) fn unwrap(&self, f: NodeRef) -> u32 {
        assert!(
            f.tag == 0 || f.tag == self.tag,
            "node {f:?} belongs to a different manager"
        );
        debug_assert!((f.id as usize) < self.nodes.len());
        f.id
    }

    /// Whether `f` was produced by this manager (constants belong to all).
    pub fn owns(&self, f: NodeRef) -> bool {
        f.tag == 0 || f.tag == self.tag
    }

    #[inline]
    pub(crate) fn level_id(&self, id: u32) -> u32 {
        if id < 2 {
            self.num_vars() as u32
        } else {
            self.var2level[self.nodes[id as usize].var as usize]
        }
    }

    /// Level of the variable tested by `f`; constants sit below every variable.
    pub fn level(&self, f: NodeRef) -> usize {
        self.level_id(self.unwrap(f)) as usize
    }

    pub fn node(&self, f: NodeRef) -> Option<BddNode> {
        let id = self.unwrap(f);
        if id < 2 {
            return None;
        }
        let n = self.nodes[id as usize];
        Some(BddNode {
            var: VarId(n.var),
            level: self.var2level[n.var as usize] as usize,
            then_child: self.wrap(n.hi),
            else_child: self.wrap(n.lo),
        })
    }

    fn check_var(&self, v: VarId) -> Result<(), BddError> {
        if v.index() < self.num_vars() {
            Ok(())
        } else {
            Err(BddError::UndeclaredVariable(v.0))
        }
    }

    /// Returns the unique node `(var ? hi : lo)`, applying the reduction rule.
    #[inline]
    pub(crate) fn mk(&mut self, var: u32, hi: u32, lo: u32) -> u32 {
        if hi == lo {
            return hi;
        }
        if let Some(&id) = self.unique[var as usize].get(&(hi, lo)) {
            return id;
        }
        self.refs_valid = false;
        let id = self.alloc(Node { var, hi, lo });
        self.unique[var as usize].insert((hi, lo), id);
        id
    }

    pub(crate) fn alloc(&mut self, node: Node) -> u32 {
        self.stats.nodes_created += 1;
        if let Some(id) = self.free.pop() {
            self.nodes[id as usize] = node;
            self.refs[id as usize] = 0;
            id
        } else {
            let id = u32::try_from(self.nodes.len()).expect("node store exhausted");
            self.nodes.push(node);
            self.refs.push(0);
            id
        }
    }

    pub(crate) fn release(&mut self, id: u32) {
        self.nodes[id as usize].var = FREE_VAR;
        self.free.push(id);
    }

    pub fn mk_var(&mut self, v: VarId) -> Result<NodeRef, BddError> {
        self.check_var(v)?;
        let id = self.mk(v.0, TRUE_ID, FALSE_ID);
        Ok(self.wrap(id))
    }

    pub fn mk_nvar(&mut self, v: VarId) -> Result<NodeRef, BddError> {
        self.check_var(v)?;
        let id = self.mk(v.0, FALSE_ID, TRUE_ID);
        Ok(self.wrap(id))
    }

    /// Literal `v` when `value`, `¬v` otherwise.
    pub fn literal(&mut self, v: VarId, value: bool) -> Result<NodeRef, BddError> {
        if value {
            self.mk_var(v)
        } else {
            self.mk_nvar(v)
        }
    }

    #[inline]
    pub(crate) fn cache_get(&mut self, key: (Op, u32, u32, u32)) -> Option<u32> {
        if !self.cache_enabled {
            return None;
        }
        match self.cache.get(&key) {
            Some(&r) => {
                self.stats.cache_hits += 1;
                Some(r)
            }
            None => {
                self.stats.cache_misses += 1;
                None
            }
        }
    }

    #[inline]
    pub(crate) fn cache_put(&mut self, key: (Op, u32, u32, u32), r: u32) {
        if self.cache_enabled {
            self.cache.insert(key, r);
        }
    }

    /// Registers `f` as a root that survives [`collect`](Self::collect) and
    /// reordering. Registrations are counted.
    pub fn register_root(&mut self, f: NodeRef) {
        let id = self.unwrap(f);
        if id >= 2 {
            *self.roots.entry(id).or_insert(0) += 1;
            self.refs_valid = false;
        }
    }

    pub fn unregister_root(&mut self, f: NodeRef) {
        let id = self.unwrap(f);
        if let Some(c) = self.roots.get_mut(&id) {
            *c -= 1;
            if *c == 0 {
                self.roots.remove(&id);
            }
            self.refs_valid = false;
        }
    }

    /// Replaces one registration of `old` by one of `new`.
    pub fn replace_root(&mut self, old: NodeRef, new: NodeRef) {
        self.register_root(new);
        self.unregister_root(old);
    }

    pub fn registered_roots(&self) -> Vec<NodeRef> {
        let mut ids: Vec<u32> = self.roots.keys().copied().collect();
        ids.sort_unstable();
        ids.into_iter().map(|id| self.wrap(id)).collect()
    }

    /// Reclaims every node not reachable from a registered root and clears
    /// the operation cache. Returns the number of nodes freed.
    ///
    /// Unregistered handles are invalidated.
    pub fn collect(&mut self) -> usize {
        self.stats.collections += 1;
        self.cache.clear();
        let n = self.nodes.len();
        let mut marked = vec![false; n];
        marked[0] = true;
        marked[1] = true;
        let mut stack: Vec<u32> = self.roots.keys().copied().collect();
        while let Some(id) = stack.pop() {
            if marked[id as usize] {
                continue;
            }
            marked[id as usize] = true;
            let node = self.nodes[id as usize];
            stack.push(node.hi);
            stack.push(node.lo);
        }
        let mut freed = 0;
        for id in 2..n {
            let var = self.nodes[id].var;
            if var == FREE_VAR || marked[id] {
                continue;
            }
            self.nodes[id].var = FREE_VAR;
            self.free.push(id as u32);
            freed += 1;
        }
        for table in &mut self.unique {
            table.retain(|_, id| marked[*id as usize]);
        }
        // Hand out low ids first after a collection.
        self.free.sort_unstable_by(|a, b| b.cmp(a));

        self.refs.iter_mut().for_each(|r| *r = 0);
        let mut live = 0;
        for id in 2..n {
            let node = self.nodes[id];
            if node.var == FREE_VAR {
                continue;
            }
            live += 1;
            self.refs[node.hi as usize] += 1;
            self.refs[node.lo as usize] += 1;
        }
        for (&id, &count) in &self.roots {
            self.refs[id as usize] += count;
        }
        self.live = live;
        self.refs_valid = true;
        freed
    }

    /// Evaluates `f` under `assignment`, indexed by variable id.
    pub fn eval(&self, f: NodeRef, assignment: &[bool]) -> Result<bool, BddError> {
        let mut id = self.unwrap(f);
        while id >= 2 {
            let node = &self.nodes[id as usize];
            let value = *assignment
                .get(node.var as usize)
                .ok_or(BddError::MissingAssignment(node.var))?;
            id = if value { node.hi } else { node.lo };
        }
        Ok(id == TRUE_ID)
    }

    /// Evaluates `f` with variable `v` taking bit `v` of `bits`.
    #[inline]
    pub fn eval_bits(&self, f: NodeRef, bits: u64) -> bool {
        let mut id = self.unwrap(f);
        while id >= 2 {
            let node = &self.nodes[id as usize];
            id = if (bits >> node.var) & 1 == 1 { node.hi } else { node.lo };
        }
        id == TRUE_ID
    }

    /// Number of distinct internal nodes reachable from `f`.
    pub fn node_count(&self, f: NodeRef) -> usize {
        self.shared_node_count(&[f])
    }

    /// Number of distinct internal nodes reachable from any of `roots`.
    pub fn shared_node_count(&self, roots: &[NodeRef]) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<u32> = roots.iter().map(|&r| self.unwrap(r)).collect();
        let mut count = 0;
        while let Some(id) = stack.pop() {
            if id < 2 || seen[id as usize] {
                continue;
            }
            seen[id as usize] = true;
            count += 1;
            let node = self.nodes[id as usize];
            stack.push(node.hi);
            stack.push(node.lo);
        }
        count
    }

    /// Variables tested anywhere in `f`, sorted by id.
    pub fn support(&self, f: NodeRef) -> Vec<VarId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut vars = vec![false; self.num_vars()];
        let mut stack = vec![self.unwrap(f)];
        while let Some(id) = stack.pop() {
            if id < 2 || seen[id as usize] {
                continue;
            }
            seen[id as usize] = true;
            let node = self.nodes[id as usize];
            vars[node.var as usize] = true;
            stack.push(node.hi);
            stack.push(node.lo);
        }
        (0..vars.len() as u32).filter(|&v| vars[v as usize]).map(VarId).collect()
    }

    /// Visits the internal nodes reachable from `f` children-first. The
    /// traversal is deterministic (then-branch before else-branch).
    pub fn postorder(&self, f: NodeRef) -> Vec<NodeRef> {
        let root = self.unwrap(f);
        let mut out = Vec::new();
        if root < 2 {
            return out;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(self.wrap(id));
                continue;
            }
            if id < 2 || seen[id as usize] {
                continue;
            }
            seen[id as usize] = true;
            let node = self.nodes[id as usize];
            stack.push((id, true));
            stack.push((node.lo, false));
            stack.push((node.hi, false));
        }
        out
    }

    /// Checks the structural invariants of every live node reachable from the
    /// registered roots and `extra`: reduced, ordered, uniquely stored.
    pub fn check_invariants(&self, extra: &[NodeRef]) -> Result<(), String> {
        let mut roots = self.registered_roots();
        roots.extend_from_slice(extra);
        for r in roots {
            for f in self.postorder(r) {
                let node = self.nodes[f.id as usize];
                if node.hi == node.lo {
                    return Err(format!("{f:?} has identical children"));
                }
                let level = self.level_id(f.id);
                if self.level_id(node.hi) <= level || self.level_id(node.lo) <= level {
                    return Err(format!("{f:?} violates the variable order"));
                }
                if self.unique[node.var as usize].get(&(node.hi, node.lo)) != Some(&f.id) {
                    return Err(format!("{f:?} is not the unique node for its key"));
                }
            }
        }
        Ok(())
    }
}
