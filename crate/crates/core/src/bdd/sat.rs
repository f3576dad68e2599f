use rustc_hash::FxHashMap;

use super::{Manager, NodeRef, FALSE_ID, TRUE_ID};

impl Manager {
    /// Number of satisfying assignments of `f` over exactly `n_vars`
    /// variables. The support of `f` must fit in `n_vars` variables; the
    /// count is exact as long as it fits in a `u128`.
    pub fn sat_count(&self, f: NodeRef, n_vars: usize) -> u128 {
        let root = self.unwrap(f);
        let total_levels = self.num_vars() as u32;
        let mut memo: FxHashMap<u32, u128> = FxHashMap::default();
        let below = self.count_rec(root, &mut memo);
        // `below` counts over the levels at and under `root`'s level.
        let over_all = below << self.level_id(root).min(total_levels);
        let n = n_vars as u32;
        if n >= total_levels {
            over_all << (n - total_levels)
        } else {
            over_all >> (total_levels - n)
        }
    }

    fn count_rec(&self, id: u32, memo: &mut FxHashMap<u32, u128>) -> u128 {
        match id {
            FALSE_ID => return 0,
            TRUE_ID => return 1,
            _ => {}
        }
        if let Some(&c) = memo.get(&id) {
            return c;
        }
        let n = self.nodes[id as usize];
        let level = self.level_id(id);
        let hi = self.count_rec(n.hi, memo) << (self.level_id(n.hi) - level - 1);
        let lo = self.count_rec(n.lo, memo) << (self.level_id(n.lo) - level - 1);
        let c = hi + lo;
        memo.insert(id, c);
        c
    }

    /// One satisfying assignment of `f`, indexed by variable id, or `None`
    /// when `f` is unsatisfiable. The then-branch is taken whenever it is
    /// not `FALSE`; variables not on the chosen path are set to `false`.
    pub fn pick_sat(&self, f: NodeRef) -> Option<Vec<bool>> {
        let mut id = self.unwrap(f);
        if id == FALSE_ID {
            return None;
        }
        let mut assignment = vec![false; self.num_vars()];
        while id >= 2 {
            let n = self.nodes[id as usize];
            if n.hi != FALSE_ID {
                assignment[n.var as usize] = true;
                id = n.hi;
            } else {
                id = n.lo;
            }
        }
        debug_assert_eq!(id, TRUE_ID);
        Some(assignment)
    }
}
