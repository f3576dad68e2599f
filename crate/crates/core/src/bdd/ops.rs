use super::{BddError, Manager, NodeRef, Op, VarId, FALSE_ID, TRUE_ID};

impl Manager {
    pub fn and(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        let (f, g) = (self.unwrap(f), self.unwrap(g));
        let r = self.apply_rec(Op::And, f, g);
        self.wrap(r)
    }

    pub fn or(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        let (f, g) = (self.unwrap(f), self.unwrap(g));
        let r = self.apply_rec(Op::Or, f, g);
        self.wrap(r)
    }

    pub fn xor(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        let (f, g) = (self.unwrap(f), self.unwrap(g));
        let r = self.apply_rec(Op::Xor, f, g);
        self.wrap(r)
    }

    pub fn not(&mut self, f: NodeRef) -> NodeRef {
        let f = self.unwrap(f);
        let r = self.not_rec(f);
        self.wrap(r)
    }

    /// `f ∧ ¬g`
    pub fn diff(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        let ng = self.not(g);
        self.and(f, ng)
    }

    /// If-then-else: `(f ∧ g) ∨ (¬f ∧ h)`.
    pub fn ite(&mut self, f: NodeRef, g: NodeRef, h: NodeRef) -> NodeRef {
        let (f, g, h) = (self.unwrap(f), self.unwrap(g), self.unwrap(h));
        let r = self.ite_rec(f, g, h);
        self.wrap(r)
    }

    pub fn and_all<I: IntoIterator<Item = NodeRef>>(&mut self, items: I) -> NodeRef {
        items.into_iter().fold(NodeRef::TRUE, |acc, f| self.and(acc, f))
    }

    pub fn or_all<I: IntoIterator<Item = NodeRef>>(&mut self, items: I) -> NodeRef {
        items.into_iter().fold(NodeRef::FALSE, |acc, f| self.or(acc, f))
    }

    /// Cofactor `f|v=value`.
    pub fn restrict(&mut self, f: NodeRef, v: VarId, value: bool) -> Result<NodeRef, BddError> {
        self.check_var(v)?;
        let f = self.unwrap(f);
        let r = self.restrict_rec(f, v.0, value);
        Ok(self.wrap(r))
    }

    /// Cofactor with respect to several literals at once.
    pub fn restrict_many(
        &mut self,
        f: NodeRef,
        literals: &[(VarId, bool)],
    ) -> Result<NodeRef, BddError> {
        literals.iter().try_fold(f, |acc, &(v, b)| self.restrict(acc, v, b))
    }

    /// Conjunction of literals.
    pub fn cube(&mut self, literals: &[(VarId, bool)]) -> Result<NodeRef, BddError> {
        let mut sorted = literals.to_vec();
        for &(v, _) in &sorted {
            self.check_var(v)?;
        }
        // Build bottom-up so each step is a single `mk`.
        sorted.sort_by_key(|&(v, _)| std::cmp::Reverse(self.level_of(v)));
        let mut acc = NodeRef::TRUE;
        for (v, b) in sorted {
            let lit = self.literal(v, b)?;
            acc = self.and(lit, acc);
        }
        Ok(acc)
    }

    /// Disjunction of full cubes over `vars`. Bit `k` of each pattern gives
    /// the value of `vars[k]`. The patterns are consumed (sorted in place
    /// after remapping to level order).
    ///
    /// This is the batch form of OR-ing one cube per pattern into an
    /// accumulator; the result is the same canonical node.
    pub fn cube_union(
        &mut self,
        vars: &[VarId],
        patterns: &mut Vec<u64>,
    ) -> Result<NodeRef, BddError> {
        let k = vars.len();
        assert!(k <= 64, "at most 64 variables per pattern");
        for &v in vars {
            self.check_var(v)?;
        }
        if patterns.is_empty() {
            return Ok(NodeRef::FALSE);
        }
        let mut by_level: Vec<usize> = (0..k).collect();
        by_level.sort_by_key(|&i| self.level_of(vars[i]));
        let identity = by_level.iter().enumerate().all(|(j, &i)| i == k - 1 - j);
        if !identity {
            for p in patterns.iter_mut() {
                let mut key = 0u64;
                for (j, &i) in by_level.iter().enumerate() {
                    key |= ((*p >> i) & 1) << (k - 1 - j);
                }
                *p = key;
            }
        }
        patterns.sort_unstable();
        patterns.dedup();
        let level_vars: Vec<u32> = by_level.iter().map(|&i| vars[i].0).collect();
        let r = self.cube_union_rec(&level_vars, patterns, 0);
        Ok(self.wrap(r))
    }

    fn cube_union_rec(&mut self, vars: &[u32], keys: &[u64], depth: usize) -> u32 {
        if keys.is_empty() {
            return FALSE_ID;
        }
        let remaining = vars.len() - depth;
        if remaining < 64 && keys.len() as u64 == 1u64 << remaining {
            return TRUE_ID;
        }
        let bit = remaining - 1;
        let split = keys.partition_point(|&x| (x >> bit) & 1 == 0);
        let lo = self.cube_union_rec(vars, &keys[..split], depth + 1);
        let hi = self.cube_union_rec(vars, &keys[split..], depth + 1);
        self.mk(vars[depth], hi, lo)
    }

    #[inline]
    fn cofactors(&self, id: u32, level: u32) -> (u32, u32) {
        if self.level_id(id) == level {
            let n = self.nodes[id as usize];
            (n.hi, n.lo)
        } else {
            (id, id)
        }
    }

    pub(crate) fn apply_rec(&mut self, op: Op, f: u32, g: u32) -> u32 {
        match op {
            Op::And => {
                if f == FALSE_ID || g == FALSE_ID {
                    return FALSE_ID;
                }
                if f == TRUE_ID || f == g {
                    return g;
                }
                if g == TRUE_ID {
                    return f;
                }
            }
            Op::Or => {
                if f == TRUE_ID || g == TRUE_ID {
                    return TRUE_ID;
                }
                if f == FALSE_ID || f == g {
                    return g;
                }
                if g == FALSE_ID {
                    return f;
                }
            }
            Op::Xor => {
                if f == g {
                    return FALSE_ID;
                }
                if f == FALSE_ID {
                    return g;
                }
                if g == FALSE_ID {
                    return f;
                }
                if f == TRUE_ID {
                    return self.not_rec(g);
                }
                if g == TRUE_ID {
                    return self.not_rec(f);
                }
            }
            _ => unreachable!("not a binary operator"),
        }
        // All three operators are commutative.
        let (f, g) = if f < g { (f, g) } else { (g, f) };
        let key = (op, f, g, 0);
        if let Some(r) = self.cache_get(key) {
            return r;
        }
        let level = self.level_id(f).min(self.level_id(g));
        let var = self.level2var[level as usize];
        let (f1, f0) = self.cofactors(f, level);
        let (g1, g0) = self.cofactors(g, level);
        let hi = self.apply_rec(op, f1, g1);
        let lo = self.apply_rec(op, f0, g0);
        let r = self.mk(var, hi, lo);
        self.cache_put(key, r);
        r
    }

    pub(crate) fn not_rec(&mut self, f: u32) -> u32 {
        if f < 2 {
            return f ^ 1;
        }
        let key = (Op::Not, f, 0, 0);
        if let Some(r) = self.cache_get(key) {
            return r;
        }
        let n = self.nodes[f as usize];
        let hi = self.not_rec(n.hi);
        let lo = self.not_rec(n.lo);
        let r = self.mk(n.var, hi, lo);
        self.cache_put(key, r);
        r
    }

    pub(crate) fn ite_rec(&mut self, f: u32, g: u32, h: u32) -> u32 {
        if f == TRUE_ID || g == h {
            return g;
        }
        if f == FALSE_ID {
            return h;
        }
        if g == TRUE_ID && h == FALSE_ID {
            return f;
        }
        if g == FALSE_ID && h == TRUE_ID {
            return self.not_rec(f);
        }
        if g == TRUE_ID || f == g {
            return self.apply_rec(Op::Or, f, h);
        }
        if h == FALSE_ID || f == h {
            return self.apply_rec(Op::And, f, g);
        }
        let key = (Op::Ite, f, g, h);
        if let Some(r) = self.cache_get(key) {
            return r;
        }
        let level = self.level_id(f).min(self.level_id(g)).min(self.level_id(h));
        let var = self.level2var[level as usize];
        let (f1, f0) = self.cofactors(f, level);
        let (g1, g0) = self.cofactors(g, level);
        let (h1, h0) = self.cofactors(h, level);
        let hi = self.ite_rec(f1, g1, h1);
        let lo = self.ite_rec(f0, g0, h0);
        let r = self.mk(var, hi, lo);
        self.cache_put(key, r);
        r
    }

    fn restrict_rec(&mut self, f: u32, var: u32, value: bool) -> u32 {
        if f < 2 {
            return f;
        }
        let target = self.var2level[var as usize];
        let level = self.level_id(f);
        if level > target {
            return f;
        }
        let n = self.nodes[f as usize];
        if n.var == var {
            return if value { n.hi } else { n.lo };
        }
        let key = (Op::Restrict, f, var, value as u32);
        if let Some(r) = self.cache_get(key) {
            return r;
        }
        let hi = self.restrict_rec(n.hi, var, value);
        let lo = self.restrict_rec(n.lo, var, value);
        let r = self.mk(n.var, hi, lo);
        self.cache_put(key, r);
        r
    }
}
