use super::*;
use proptest::prelude::*;

fn small_grid() -> QuantizationGrid {
    QuantizationGrid::linear([2, 3, 2, 2, 2, 2]).unwrap()
}

fn bytes_of(t: &AdvisoryTable) -> Vec<u8> {
    let mut out = Vec::new();
    t.write_to(&mut out).unwrap();
    out
}

#[test]
fn round_trip_through_bytes_and_files() {
    let grid = QuantizationGrid::linear([4, 8, 8, 8, 4, 4]).unwrap();
    let t = generate_synthetic(&grid, Advisory::Sr, 7);
    let back = AdvisoryTable::from_bytes(&bytes_of(&t)).unwrap();
    assert_eq!(back, t);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.lut");
    t.write(&path).unwrap();
    assert_eq!(AdvisoryTable::read(&path).unwrap(), t);
}

#[test]
fn header_layout() {
    let t = AdvisoryTable::constant(small_grid(), Advisory::Wl, Advisory::Coc);
    let bytes = bytes_of(&t);
    assert_eq!(&bytes[..8], b"TBDDLUT\0");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 3);
    assert_eq!(bytes[40], Advisory::Wl.code());
    let breakpoints = 8 * (2 + 3 + 2 + 2 + 2 + 2);
    assert_eq!(bytes.len(), 41 + breakpoints + t.len());
}

#[test]
fn truncated_payload_is_reported() {
    let t = AdvisoryTable::constant(small_grid(), Advisory::Coc, Advisory::Sl);
    let bytes = bytes_of(&t);
    let cut = &bytes[..bytes.len() - 1];
    assert!(matches!(
        AdvisoryTable::from_bytes(cut),
        Err(TableError::TruncatedPayload { expected, found }) if expected == bytes.len() && found == bytes.len() - 1
    ));
    assert!(matches!(AdvisoryTable::from_bytes(&bytes[..30]), Err(TableError::TruncatedPayload { .. })));
    assert!(matches!(AdvisoryTable::from_bytes(&bytes[..4]), Err(TableError::TruncatedPayload { .. })));
}

#[test]
fn malformed_headers_are_rejected() {
    let t = AdvisoryTable::constant(small_grid(), Advisory::Coc, Advisory::Sl);
    let good = bytes_of(&t);

    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(AdvisoryTable::from_bytes(&bad), Err(TableError::BadMagic)));

    let mut bad = good.clone();
    bad[8] = 2;
    assert!(matches!(AdvisoryTable::from_bytes(&bad), Err(TableError::VersionMismatch { found: 2 })));

    let mut bad = good.clone();
    bad[40] = 9;
    assert!(matches!(AdvisoryTable::from_bytes(&bad), Err(TableError::InvalidPrevious(9))));

    let mut bad = good.clone();
    *bad.last_mut().unwrap() = 5;
    assert!(matches!(AdvisoryTable::from_bytes(&bad), Err(TableError::InvalidEntry { byte: 5, .. })));

    let mut bad = good;
    bad.push(0);
    assert!(matches!(AdvisoryTable::from_bytes(&bad), Err(TableError::TrailingData(1))));
}

#[test]
fn length_mismatch() {
    let err = AdvisoryTable::new(small_grid(), Advisory::Coc, vec![Advisory::Coc; 3]);
    assert!(matches!(err, Err(TableError::LengthMismatch { expected: 96, found: 3 })));
}

#[test]
fn chunks_of_ten_entries_by_three() {
    let grid = QuantizationGrid::linear([1, 1, 1, 1, 1, 10]).unwrap();
    let t = AdvisoryTable::constant(grid, Advisory::Coc, Advisory::Coc);
    let sizes: Vec<usize> = t.stream_chunks(3).map(|c| c.entries.len()).collect();
    assert_eq!(sizes, vec![3, 3, 3, 1]);
    let starts: Vec<usize> = t.stream_chunks(3).map(|c| c.start_offset).collect();
    assert_eq!(starts, vec![0, 3, 6, 9]);
}

#[test]
fn one_chunk_when_the_chunk_is_larger_than_the_table() {
    let t = AdvisoryTable::constant(small_grid(), Advisory::Coc, Advisory::Coc);
    assert_eq!(t.stream_chunks(DEFAULT_CHUNK_SIZE).count(), 1);
}

#[test]
fn generation_is_deterministic() {
    let grid = QuantizationGrid::linear([4, 8, 8, 8, 4, 4]).unwrap();
    let a = generate_synthetic(&grid, Advisory::Coc, 42);
    let b = generate_synthetic(&grid, Advisory::Coc, 42);
    assert_eq!(bytes_of(&a), bytes_of(&b));
    let c = generate_synthetic(&grid, Advisory::Coc, 43);
    assert_ne!(a.entries(), c.entries());
    let d = generate_synthetic(&grid, Advisory::Sr, 42);
    assert_ne!(a.entries(), d.entries());
}

#[test]
fn every_advisory_occurs_on_the_reduced_grid() {
    let grid = QuantizationGrid::linear([4, 8, 8, 8, 4, 4]).unwrap();
    for seed in 0..5 {
        let t = generate_synthetic(&grid, Advisory::Sr, seed);
        assert!(t.histogram().iter().all(|&n| n > 0), "seed {seed}: {:?}", t.histogram());
    }
}

#[test]
fn perturbation_flips_the_requested_fraction() {
    let grid = QuantizationGrid::linear([4, 8, 8, 8, 4, 4]).unwrap();
    let clean = generate_synthetic_with(&grid, Advisory::Coc, 1, SyntheticParams { perturbation: 0.0 });
    let noisy = generate_synthetic_with(&grid, Advisory::Coc, 1, SyntheticParams { perturbation: 0.01 });
    let flipped = clean.entries().iter().zip(noisy.entries()).filter(|(a, b)| a != b).count();
    assert_eq!(flipped, (0.01 * grid.len() as f64).round() as usize);
}

#[test]
fn unperturbed_tables_have_contiguous_clear_regions() {
    // Without flips, along the range axis a state clear of conflict stays
    // clear at every larger range.
    let grid = QuantizationGrid::linear([4, 8, 8, 8, 4, 4]).unwrap();
    let t = generate_synthetic_with(&grid, Advisory::Coc, 3, SyntheticParams { perturbation: 0.0 });
    for s in grid.states() {
        if t.get(&s) == Advisory::Coc && (s[Dimension::Rho] as usize) + 1 < grid.cardinality(Dimension::Rho) {
            let mut next = s;
            next[Dimension::Rho] += 1;
            assert_eq!(t.get(&next), Advisory::Coc, "{s}");
        }
    }
}

#[test]
fn odometer_matches_offsets() {
    let grid = QuantizationGrid::linear([2, 3, 2, 1, 2, 3]).unwrap();
    let mut o = Odometer::new(grid.cardinalities());
    for offset in 0..grid.len() {
        assert_eq!(o.state, StateIndex::from_offset(&grid, offset));
        o.advance();
    }
    let o = Odometer::starting_at(&grid, 17);
    assert_eq!(o.state.offset(&grid), 17);
}

#[test]
fn set_and_get() {
    let mut t = AdvisoryTable::constant(small_grid(), Advisory::Coc, Advisory::Coc);
    let s = StateIndex::new(1, 2, 0, 1, 0, 1);
    t.set(&s, Advisory::Wr);
    assert_eq!(t.get(&s), Advisory::Wr);
    assert_eq!(t.histogram(), [95, 0, 1, 0, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_tables_round_trip(codes in proptest::collection::vec(0u8..5, 96), prev in 0u8..5) {
        let entries: Vec<Advisory> = codes.iter().map(|&c| Advisory::from_code(c).unwrap()).collect();
        let t = AdvisoryTable::new(small_grid(), Advisory::from_code(prev).unwrap(), entries).unwrap();
        prop_assert_eq!(AdvisoryTable::from_bytes(&bytes_of(&t)).unwrap(), t);
    }

    #[test]
    fn chunks_tile_the_table(chunk in 1usize..200) {
        let t = generate_synthetic(&small_grid(), Advisory::Coc, 0);
        let mut expected_start = 0;
        for c in t.stream_chunks(chunk) {
            prop_assert_eq!(c.start_offset, expected_start);
            prop_assert!(!c.entries.is_empty() && c.entries.len() <= chunk);
            prop_assert_eq!(c.entries, &t.entries()[c.start_offset..c.start_offset + c.entries.len()]);
            expected_start += c.entries.len();
        }
        prop_assert_eq!(expected_start, t.len());
    }
}
