//! Shared fixtures for the criterion benchmarks.

use tablebdd::bench::query_stream;
use tablebdd::compress::{compress, CompressOptions, Compressed};
use tablebdd::{generate_synthetic, Advisory, AdvisoryTable, Manager, NodeRef, QuantizationGrid, StateIndex, VarId};

pub const REDUCED: [usize; 6] = [4, 8, 8, 8, 4, 4];

pub fn reduced_table(seed: u64) -> AdvisoryTable {
    generate_synthetic(&QuantizationGrid::linear(REDUCED).expect("valid grid"), Advisory::Sr, seed)
}

pub fn reduced_compressed(seed: u64) -> (AdvisoryTable, Compressed) {
    let t = reduced_table(seed);
    let c = compress(&t, CompressOptions::default()).expect("synthetic tables partition");
    (t, c)
}

pub fn queries(grid: &QuantizationGrid, n: usize) -> Vec<StateIndex> {
    query_stream(grid, n, 7).collect()
}

/// `(a0 <-> b0) & ... & (a{n-1} <-> b{n-1})` with all `a` above all `b`,
/// exponential in `n` under the identity order.
pub fn pairwise_equalities(n: u32) -> (Manager, NodeRef) {
    let mut m = Manager::new(2 * n as usize).expect("variable count fits");
    let mut f = NodeRef::TRUE;
    for k in 0..n {
        let a = m.mk_var(VarId(k)).expect("declared");
        let b = m.mk_var(VarId(k + n)).expect("declared");
        let x = m.xor(a, b);
        let eq = m.not(x);
        f = m.and(f, eq);
    }
    (m, f)
}
