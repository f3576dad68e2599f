//! Per-query latency measurement over a seeded stream of random states.
//!
//! The stream is split into fixed blocks; block `b` draws from a ChaCha8
//! generator seeded with the run seed on stream `b`. The sequence of
//! queries is therefore the same for every backend and thread count.

use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::codec::{Advisory, QuantizationGrid, StateIndex};

pub const DEFAULT_QUERIES: usize = 10_000_000;
pub const BLOCK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    BddEval,
    TableLookup,
    EmittedEvaluator,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::BddEval => "bdd-eval",
            Backend::TableLookup => "table-lookup",
            Backend::EmittedEvaluator => "emitted-evaluator",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bdd-eval" => Ok(Backend::BddEval),
            "table-lookup" => Ok(Backend::TableLookup),
            "emitted-evaluator" => Ok(Backend::EmittedEvaluator),
            _ => Err(format!("unknown backend `{s}` (expected bdd-eval, table-lookup or emitted-evaluator)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub backend: Backend,
    pub queries: usize,
    pub seed: u64,
    pub threads: usize,
    pub t_min_us: f64,
    pub t_max_us: f64,
    pub t_mean_us: f64,
    /// Count of each advisory issued, in advisory code order.
    pub histogram: [u64; 5],
    /// Digest of the advisory sequence, equal across agreeing backends.
    pub digest: String,
    pub platform: String,
}

impl BenchReport {
    pub fn is_consistent(&self) -> bool {
        self.queries > 0 && self.t_min_us <= self.t_mean_us && self.t_mean_us <= self.t_max_us
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "backend: {}", self.backend)?;
        writeln!(f, "queries: {} (seed {}, {} thread(s))", self.queries, self.seed, self.threads)?;
        writeln!(f, "t_min: {:.3} us", self.t_min_us)?;
        writeln!(f, "t_max: {:.3} us", self.t_max_us)?;
        writeln!(f, "t_mean: {:.3} us", self.t_mean_us)?;
        let hist: Vec<String> =
            Advisory::ALL.iter().zip(self.histogram).map(|(a, n)| format!("{a}={n}")).collect();
        writeln!(f, "advisories: {}", hist.join(" "))?;
        writeln!(f, "digest: {}", self.digest)?;
        writeln!(f, "platform: {}", self.platform)
    }
}

pub fn platform_note(threads: usize) -> String {
    format!(
        "{}-{}, {} hardware thread(s) available, {} used",
        std::env::consts::OS,
        std::env::consts::ARCH,
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        threads
    )
}

/// Queries of block `b` (the last block may be short).
pub fn block_queries(grid: &QuantizationGrid, seed: u64, b: usize, len: usize) -> Vec<StateIndex> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    let cards = grid.cardinalities();
    (0..len)
        .map(|_| StateIndex(std::array::from_fn(|d| rng.random_range(0..cards[d] as u32))))
        .collect()
}

/// The whole query stream, lazily, block by block.
pub fn query_stream(grid: &QuantizationGrid, n: usize, seed: u64) -> impl Iterator<Item = StateIndex> + '_ {
    let blocks = n.div_ceil(BLOCK);
    (0..blocks).flat_map(move |b| {
        let len = BLOCK.min(n - b * BLOCK);
        block_queries(grid, seed, b, len)
    })
}

/// Accumulates timings and the advisory sequence of one block.
#[derive(Clone, Debug)]
pub struct BlockStats {
    pub t_min: f64,
    pub t_max: f64,
    pub t_sum: f64,
    pub count: usize,
    pub histogram: [u64; 5],
    pub codes: Vec<u8>,
}

impl BlockStats {
    pub fn new(capacity: usize) -> Self {
        BlockStats {
            t_min: f64::INFINITY,
            t_max: 0.0,
            t_sum: 0.0,
            count: 0,
            histogram: [0; 5],
            codes: Vec::with_capacity(capacity),
        }
    }

    pub fn record(&mut self, a: Advisory, micros: f64) {
        self.t_min = self.t_min.min(micros);
        self.t_max = self.t_max.max(micros);
        self.t_sum += micros;
        self.count += 1;
        self.histogram[a.code() as usize] += 1;
        self.codes.push(a.code());
    }
}

/// Merges per-block stats given in block order into a report.
pub fn merge_blocks(
    backend: Backend,
    seed: u64,
    threads: usize,
    blocks: impl IntoIterator<Item = BlockStats>,
) -> BenchReport {
    let mut hasher = Sha256::new();
    let (mut t_min, mut t_max, mut t_sum, mut count) = (f64::INFINITY, 0.0f64, 0.0, 0usize);
    let mut histogram = [0u64; 5];
    for b in blocks {
        hasher.update(&b.codes);
        t_min = t_min.min(b.t_min);
        t_max = t_max.max(b.t_max);
        t_sum += b.t_sum;
        count += b.count;
        for (h, x) in histogram.iter_mut().zip(b.histogram) {
            *h += x;
        }
    }
    let digest = hasher.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect();
    let mean = if count == 0 { 0.0 } else { t_sum / count as f64 };
    BenchReport {
        backend,
        queries: count,
        seed,
        threads,
        // Rounding can push the mean a hair outside the extremes.
        t_min_us: t_min.min(mean),
        t_max_us: t_max.max(mean),
        t_mean_us: mean,
        histogram,
        digest,
        platform: platform_note(threads),
    }
}

/// Times `query` on each of `n` states with a monotonic clock.
///
/// With `threads > 1` the blocks are dealt round-robin to scoped threads,
/// each evaluating through its own `query` instance from `make_query`.
pub fn run<F, Q>(
    backend: Backend,
    grid: &QuantizationGrid,
    n: usize,
    seed: u64,
    threads: usize,
    make_query: F,
) -> BenchReport
where
    F: Fn() -> Q + Sync,
    Q: FnMut(&StateIndex) -> Advisory,
{
    let threads = threads.max(1);
    let blocks = n.div_ceil(BLOCK);
    let time_block = |query: &mut Q, b: usize| {
        let len = BLOCK.min(n - b * BLOCK);
        let states = block_queries(grid, seed, b, len);
        let mut stats = BlockStats::new(len);
        for s in &states {
            let t0 = Instant::now();
            let a = black_box(query(black_box(s)));
            let dt = t0.elapsed();
            stats.record(a, dt.as_secs_f64() * 1e6);
        }
        stats
    };
    let mut results: Vec<Option<BlockStats>> = vec![None; blocks];
    if threads == 1 {
        let mut query = make_query();
        for (b, slot) in results.iter_mut().enumerate() {
            *slot = Some(time_block(&mut query, b));
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let make_query = &make_query;
                    let time_block = &time_block;
                    scope.spawn(move || {
                        let mut query = make_query();
                        (t..blocks)
                            .step_by(threads)
                            .map(|b| (b, time_block(&mut query, b)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (b, stats) in h.join().expect("bench thread") {
                    results[b] = Some(stats);
                }
            }
        });
    }
    merge_blocks(backend, seed, threads, results.into_iter().map(|r| r.expect("every block ran")))
}

/// Report from advisory codes and timings measured elsewhere, such as by a
/// compiled evaluator driver.
pub fn report_from_external(
    backend: Backend,
    seed: u64,
    codes: &[u8],
    t_min_us: f64,
    t_max_us: f64,
    t_mean_us: f64,
) -> BenchReport {
    let mut stats = BlockStats::new(0);
    for &c in codes {
        stats.histogram[c as usize % 5] += 1;
    }
    stats.codes = codes.to_vec();
    stats.count = codes.len();
    stats.t_min = t_min_us;
    stats.t_max = t_max_us;
    stats.t_sum = t_mean_us * codes.len() as f64;
    merge_blocks(backend, seed, 1, [stats])
}
