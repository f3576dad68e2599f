//! Dense advisory tables: synthetic generation, binary file format, chunking.
//!
//! # File format (version 1, little endian)
//!
//! | bytes            | content                                            |
//! |------------------|----------------------------------------------------|
//! | 0..8             | magic `TBDDLUT\0`                                   |
//! | 8..12            | format version, `u32`                               |
//! | 12..16           | reserved, zero                                      |
//! | 16..40           | six `u32` cardinalities (tau, rho, theta, psi, v_own, v_int) |
//! | 40               | previous advisory code                              |
//! | 41..             | breakpoints, `f64` per grid point, dimension by dimension |
//! | ..               | one byte per state, row-major, `v_int` fastest      |
//!
//! Advisory codes: COC=0, WL=1, WR=2, SL=3, SR=4.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{Advisory, CodecError, Dimension, QuantizationGrid, StateIndex};

pub const MAGIC: [u8; 8] = *b"TBDDLUT\0";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_CHUNK_SIZE: usize = 1 << 20;
const FIXED_HEADER: usize = 41;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("bad magic: not an advisory table file")]
    BadMagic,
    #[error("unsupported table format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{0} unexpected trailing bytes after the payload")]
    TrailingData(usize),
    #[error("entry {offset} holds byte {byte}, which is not an advisory code")]
    InvalidEntry { offset: usize, byte: u8 },
    #[error("header holds previous-advisory byte {0}, which is not an advisory code")]
    InvalidPrevious(u8),
    #[error("table has {found} entries but the grid has {expected} states")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Grid(#[from] CodecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Total mapping from every grid state to one advisory, for one previous
/// advisory.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvisoryTable {
    grid: QuantizationGrid,
    a_prev: Advisory,
    entries: Vec<Advisory>,
}

impl AdvisoryTable {
    pub fn new(
        grid: QuantizationGrid,
        a_prev: Advisory,
        entries: Vec<Advisory>,
    ) -> Result<Self, TableError> {
        if entries.len() != grid.len() {
            return Err(TableError::LengthMismatch { expected: grid.len(), found: entries.len() });
        }
        Ok(AdvisoryTable { grid, a_prev, entries })
    }

    pub fn constant(grid: QuantizationGrid, a_prev: Advisory, value: Advisory) -> Self {
        let entries = vec![value; grid.len()];
        AdvisoryTable { grid, a_prev, entries }
    }

    pub fn from_fn(
        grid: QuantizationGrid,
        a_prev: Advisory,
        mut f: impl FnMut(&StateIndex) -> Advisory,
    ) -> Self {
        let entries = grid.states().map(|s| f(&s)).collect();
        AdvisoryTable { grid, a_prev, entries }
    }

    pub fn grid(&self) -> &QuantizationGrid {
        &self.grid
    }

    pub fn a_prev(&self) -> Advisory {
        self.a_prev
    }

    pub fn entries(&self) -> &[Advisory] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, s: &StateIndex) -> Advisory {
        self.entries[s.offset(&self.grid)]
    }

    pub fn set(&mut self, s: &StateIndex, value: Advisory) {
        let offset = s.offset(&self.grid);
        self.entries[offset] = value;
    }

    /// Entry count per advisory, in enum order.
    pub fn histogram(&self) -> [usize; 5] {
        let mut counts = [0usize; 5];
        for a in &self.entries {
            counts[a.code() as usize] += 1;
        }
        counts
    }

    /// Chunks of at most `chunk_size` entries tiling the table in order.
    pub fn stream_chunks(&self, chunk_size: usize) -> impl Iterator<Item = TableChunk<'_>> {
        assert!(chunk_size >= 1, "chunk size must be at least 1");
        self.entries
            .chunks(chunk_size)
            .enumerate()
            .map(move |(k, entries)| TableChunk { start_offset: k * chunk_size, entries })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), TableError> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[0u8; 4])?;
        for c in self.grid.cardinalities() {
            w.write_all(&(c as u32).to_le_bytes())?;
        }
        w.write_all(&[self.a_prev.code()])?;
        for d in Dimension::ALL {
            for v in self.grid.values(d) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        // `Advisory` is `repr(u8)`, but go through codes to stay layout-agnostic.
        let bytes: Vec<u8> = self.entries.iter().map(|a| a.code()).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), TableError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TableError> {
        let truncated = |expected: usize| TableError::TruncatedPayload { expected, found: bytes.len() };
        if bytes.len() < 8 {
            return Err(if MAGIC.starts_with(bytes) { truncated(16) } else { TableError::BadMagic });
        }
        if bytes[..8] != MAGIC {
            return Err(TableError::BadMagic);
        }
        if bytes.len() < FIXED_HEADER {
            return Err(truncated(FIXED_HEADER));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(TableError::VersionMismatch { found: version });
        }
        let cards: [usize; 6] = std::array::from_fn(|d| u32_at(16 + 4 * d) as usize);
        let a_prev = Advisory::from_code(bytes[40])
            .ok_or(TableError::InvalidPrevious(bytes[40]))?;
        let grid_bytes = 8 * cards.iter().sum::<usize>();
        let states: usize = cards.iter().product();
        let expected = FIXED_HEADER + grid_bytes + states;
        if bytes.len() < expected {
            return Err(truncated(expected));
        }
        if bytes.len() > expected {
            return Err(TableError::TrailingData(bytes.len() - expected));
        }
        let mut at = FIXED_HEADER;
        let axes: [Vec<f64>; 6] = std::array::from_fn(|d| {
            (0..cards[d])
                .map(|_| {
                    let v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
                    at += 8;
                    v
                })
                .collect()
        });
        let grid = QuantizationGrid::from_axes(axes, true)?;
        let entries = bytes[at..]
            .iter()
            .enumerate()
            .map(|(offset, &byte)| {
                Advisory::from_code(byte).ok_or(TableError::InvalidEntry { offset, byte })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AdvisoryTable { grid, a_prev, entries })
    }

    pub fn read(path: &Path) -> Result<Self, TableError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Contiguous run of table entries starting at a row-major offset.
#[derive(Clone, Copy, Debug)]
pub struct TableChunk<'a> {
    pub start_offset: usize,
    pub entries: &'a [Advisory],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticParams {
    /// Fraction of entries flipped to a different advisory after the
    /// geometric rule is applied.
    pub perturbation: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams { perturbation: 0.001 }
    }
}

pub fn generate_synthetic(grid: &QuantizationGrid, a_prev: Advisory, seed: u64) -> AdvisoryTable {
    generate_synthetic_with(grid, a_prev, seed, SyntheticParams::default())
}

/// Deterministic stand-in for a real advisory table.
///
/// The geometric rule: a pseudo-range score grows with range, bearing
/// offset, heading offset and time to loss of separation, and shrinks with
/// closing speed. States scoring above a threshold are clear of conflict;
/// the rest turn away from the intruder's side of the bearing center, hard
/// when the range index is in the near band. A previous turn biases the side
/// near the center. The seed jitters the center and threshold, then flips
/// a fraction of entries to random other advisories.
pub fn generate_synthetic_with(
    grid: &QuantizationGrid,
    a_prev: Advisory,
    seed: u64,
    params: SyntheticParams,
) -> AdvisoryTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((a_prev.code() as u64) << 56));
    let cards = grid.cardinalities();
    let theta_shift: f64 = rng.random_range(-0.5..0.5);
    let threshold: f64 = 0.9 + rng.random_range(-0.08..0.08);
    let near_band: f64 = 0.3 + rng.random_range(-0.05..0.05);

    let span = |d: Dimension| (cards[d.index()].max(2) - 1) as f64;
    let center_theta = span(Dimension::Theta) / 2.0 + theta_shift;
    let center_psi = span(Dimension::Psi) / 2.0;
    let prev_left = matches!(a_prev, Advisory::Wl | Advisory::Sl);
    let prev_right = matches!(a_prev, Advisory::Wr | Advisory::Sr);
    let prev_bias = if a_prev == Advisory::Coc { 0.0 } else { -0.05 };

    let rule = |s: &StateIndex| -> Advisory {
        let unit = |d: Dimension| s[d] as f64 / span(d);
        let theta_off = (s[Dimension::Theta] as f64 - center_theta) / (span(Dimension::Theta) / 2.0);
        let psi_off = (s[Dimension::Psi] as f64 - center_psi) / (span(Dimension::Psi) / 2.0);
        let closing = unit(Dimension::VInt) - unit(Dimension::VOwn);
        let rho = unit(Dimension::Rho);
        let score = 1.2 * rho + 0.8 * theta_off.abs() + 0.3 * psi_off.abs() - 0.35 * closing
            + 0.15 * unit(Dimension::Tau);
        if score > threshold + prev_bias {
            return Advisory::Coc;
        }
        let left = if theta_off.abs() < 0.15 && (prev_left || prev_right) {
            prev_left
        } else {
            theta_off < 0.0
        };
        let strong = rho < near_band + 0.2 * closing.max(0.0);
        match (left, strong) {
            (true, true) => Advisory::Sl,
            (true, false) => Advisory::Wl,
            (false, true) => Advisory::Sr,
            (false, false) => Advisory::Wr,
        }
    };

    let mut entries: Vec<Advisory> = Vec::with_capacity(grid.len());
    let mut odometer = Odometer::new(cards);
    for _ in 0..grid.len() {
        entries.push(rule(&odometer.state));
        odometer.advance();
    }

    let flips = (params.perturbation.clamp(0.0, 1.0) * entries.len() as f64).round() as usize;
    if flips > 0 {
        let picked = index::sample(&mut rng, entries.len(), flips);
        for offset in picked.iter() {
            let current = entries[offset].code();
            let step: u8 = rng.random_range(1..5);
            entries[offset] = Advisory::from_code((current + step) % 5).unwrap();
        }
    }
    AdvisoryTable { grid: grid.clone(), a_prev, entries }
}

/// Row-major state counter.
#[derive(Clone, Debug)]
pub struct Odometer {
    cards: [usize; 6],
    pub state: StateIndex,
}

impl Odometer {
    pub fn new(cards: [usize; 6]) -> Self {
        Odometer { cards, state: StateIndex::default() }
    }

    pub fn starting_at(grid: &QuantizationGrid, offset: usize) -> Self {
        Odometer { cards: grid.cardinalities(), state: StateIndex::from_offset(grid, offset) }
    }

    /// Steps to the next state; returns the lowest dimension that changed.
    #[inline]
    pub fn advance(&mut self) -> usize {
        for d in (0..6).rev() {
            self.state.0[d] += 1;
            if (self.state.0[d] as usize) < self.cards[d] {
                return d;
            }
            self.state.0[d] = 0;
        }
        0
    }
}

#[cfg(test)]
mod tests;
