use super::*;
use crate::table::generate_synthetic;
use proptest::prelude::*;

fn tiny() -> QuantizationGrid {
    QuantizationGrid::linear([2, 2, 2, 2, 2, 2]).unwrap()
}

fn small() -> QuantizationGrid {
    QuantizationGrid::linear([3, 4, 3, 3, 2, 3]).unwrap()
}

fn never() -> BuildOptions {
    BuildOptions { chunk_size: DEFAULT_CHUNK_SIZE, policy: ReorderPolicy::Never }
}

fn assert_exact(c: &Compressed, t: &AdvisoryTable) {
    for s in t.grid().states() {
        assert_eq!(c.classify(&s).unwrap(), t.get(&s), "state {s}");
    }
}

#[test]
fn tiny_grid_round_trips_exactly() {
    for a_prev in Advisory::ALL {
        for seed in 0..4 {
            let t = generate_synthetic(&tiny(), a_prev, seed);
            let c = compress(&t, CompressOptions::default()).unwrap();
            assert_exact(&c, &t);
            assert!(c.report.partition.passed());
        }
    }
}

#[test]
fn small_grid_round_trips_for_every_policy() {
    let t = generate_synthetic(&small(), Advisory::Sr, 5);
    for policy in [
        ReorderPolicy::Never,
        ReorderPolicy::Final,
        ReorderPolicy::Periodic { growth: 1.5, min_nodes: 16 },
    ] {
        for chunk_size in [7, 64, DEFAULT_CHUNK_SIZE] {
            let opts = CompressOptions { build: BuildOptions { chunk_size, policy }, coverage: CoverageMode::Valid };
            let c = compress(&t, opts).unwrap();
            assert_exact(&c, &t);
            let expected_chunks = t.len().div_ceil(chunk_size);
            assert_eq!(c.report.chunks_processed, expected_chunks);
        }
    }
}

#[test]
fn chunk_size_does_not_change_the_diagram() {
    let t = generate_synthetic(&small(), Advisory::Wl, 2);
    let whole = compress(&t, CompressOptions { build: never(), ..Default::default() }).unwrap();
    let opts = CompressOptions {
        build: BuildOptions { chunk_size: 5, policy: ReorderPolicy::Never },
        ..Default::default()
    };
    let pieces = compress(&t, opts).unwrap();
    assert_eq!(whole.report.root_nodes, pieces.report.root_nodes);
    assert_eq!(whole.report.global_nodes, pieces.report.global_nodes);
}

#[test]
fn constant_table_eliminates_clear_of_conflict() {
    let t = AdvisoryTable::constant(small(), Advisory::Sr, Advisory::Coc);
    let c = compress(&t, CompressOptions::default()).unwrap();
    assert_eq!(c.global.eliminated, Advisory::Coc);
    assert!(c.global.root.is_false());
    assert_eq!(c.report.root_nodes[1..], [0, 0, 0, 0]);
    assert_exact(&c, &t);
}

#[test]
fn constant_other_advisory() {
    let t = AdvisoryTable::constant(small(), Advisory::Coc, Advisory::Sl);
    let c = compress(&t, CompressOptions::default()).unwrap();
    assert_eq!(c.global.eliminated, Advisory::Sl);
    assert_exact(&c, &t);
}

/// Five states, one per advisory, so every root is a 30-literal cube.
fn one_state_each() -> AdvisoryTable {
    let grid = QuantizationGrid::linear([1, 1, 1, 1, 1, 5]).unwrap();
    AdvisoryTable::from_fn(grid, Advisory::Coc, |s| Advisory::from_code(s[Dimension::VInt] as u8).unwrap())
}

#[test]
fn ties_eliminate_the_first_advisory() {
    let t = one_state_each();
    let mut m = BitLayout::standard().new_manager();
    let roots = build_roots(&mut m, &t, never()).unwrap();
    let counts: Vec<usize> = roots.roots.iter().map(|&r| m.node_count(r)).collect();
    assert_eq!(counts, vec![30; 5]);
    let p = check_partition(&mut m, &roots, CoverageMode::Valid);
    let e = eliminate_largest(&mut m, &roots, &p).unwrap();
    assert_eq!(e.eliminated, Advisory::Coc);
}

#[test]
fn reconstruction_is_id_identical() {
    for seed in 0..6 {
        let t = generate_synthetic(&small(), Advisory::ALL[seed as usize % 5], seed);
        let mut m = BitLayout::standard().new_manager();
        let roots = build_roots(&mut m, &t, BuildOptions::default()).unwrap();
        let p = check_partition(&mut m, &roots, CoverageMode::Valid);
        let e = eliminate_largest(&mut m, &roots, &p).unwrap();
        let kept: Vec<NodeRef> = e.kept.iter().map(|&(_, r)| r).collect();
        assert_eq!(reconstruct_eliminated(&mut m, &kept, roots.domain), e.eliminated_root);
    }
}

#[test]
fn eliminated_region_needs_the_domain_mask() {
    // Without the mask the complement also covers unused codes.
    let t = generate_synthetic(&small(), Advisory::Coc, 1);
    let mut m = BitLayout::standard().new_manager();
    let roots = build_roots(&mut m, &t, never()).unwrap();
    let p = check_partition(&mut m, &roots, CoverageMode::Valid);
    let e = eliminate_largest(&mut m, &roots, &p).unwrap();
    let union = m.or_all(e.kept.iter().map(|&(_, r)| r));
    let unmasked = m.not(union);
    assert_ne!(unmasked, e.eliminated_root);
}

#[test]
fn partition_passes_on_generated_tables() {
    for seed in 0..5 {
        let t = generate_synthetic(&small(), Advisory::Wr, seed);
        let mut m = BitLayout::standard().new_manager();
        let roots = build_roots(&mut m, &t, never()).unwrap();
        let p = check_partition(&mut m, &roots, CoverageMode::Valid);
        assert!(p.passed(), "{p}");
        assert_eq!(p.pairs.len(), 10);
    }
}

#[test]
fn overlapping_roots_fail_with_a_decodable_witness() {
    let t = generate_synthetic(&small(), Advisory::Coc, 4);
    let mut m = BitLayout::standard().new_manager();
    let mut roots = build_roots(&mut m, &t, never()).unwrap();
    let (wl, sl) = (Advisory::Wl.code() as usize, Advisory::Sl.code() as usize);
    roots.roots[wl] = m.or(roots.roots[wl], roots.roots[sl]);
    let p = check_partition(&mut m, &roots, CoverageMode::Valid);
    assert!(!p.passed());
    let bad: Vec<&PairCheck> = p.pairs.iter().filter(|c| !c.disjoint).collect();
    assert_eq!(bad.len(), 1);
    assert_eq!((bad[0].a, bad[0].b), (Advisory::Wl, Advisory::Sl));
    let w = bad[0].witness.as_ref().unwrap();
    assert!(w.in_grid);
    assert_eq!(t.get(&w.state), Advisory::Sl);
    assert!(matches!(eliminate_largest(&mut m, &roots, &p), Err(CompressError::PartitionFailed(_))));
}

#[test]
fn missing_root_fails_coverage_with_a_table_state() {
    let t = generate_synthetic(&small(), Advisory::Coc, 4);
    let mut m = BitLayout::standard().new_manager();
    let mut roots = build_roots(&mut m, &t, never()).unwrap();
    let missing = Advisory::ALL.into_iter().rev().find(|a| t.histogram()[a.code() as usize] > 0).unwrap();
    roots.roots[missing.code() as usize] = NodeRef::FALSE;
    let p = check_partition(&mut m, &roots, CoverageMode::Valid);
    assert!(!p.coverage);
    let w = p.coverage_witness.as_ref().unwrap();
    assert!(w.in_grid);
    assert_eq!(t.get(&w.state), missing);
}

#[test]
fn all_codes_coverage_fails_on_sparse_grids() {
    let t = generate_synthetic(&small(), Advisory::Coc, 0);
    let mut m = BitLayout::standard().new_manager();
    let roots = build_roots(&mut m, &t, never()).unwrap();
    let p = check_partition(&mut m, &roots, CoverageMode::All);
    assert!(!p.coverage);
    assert!(!p.coverage_witness.unwrap().in_grid);
    let c = compress(&t, CompressOptions { build: never(), coverage: CoverageMode::All });
    assert!(matches!(c, Err(CompressError::PartitionFailed(_))));
}

#[test]
fn selector_cofactors_are_the_kept_roots() {
    let t = generate_synthetic(&small(), Advisory::Sr, 8);
    let mut m = BitLayout::standard().new_manager();
    let roots = build_roots(&mut m, &t, BuildOptions::default()).unwrap();
    let p = check_partition(&mut m, &roots, CoverageMode::Valid);
    let e = eliminate_largest(&mut m, &roots, &p).unwrap();
    let kept: Vec<Advisory> = e.kept.iter().map(|&(a, _)| a).collect();
    let map = SelectorMap::default_for(t.a_prev(), &kept).unwrap();
    let g = assemble_global(&mut m, &e, map, &roots).unwrap();
    for &(a, root) in &e.kept {
        assert_eq!(g.advisory_region(&mut m, a).unwrap(), root, "{a}");
    }
    assert_eq!(g.advisory_region(&mut m, e.eliminated).unwrap(), e.eliminated_root);

    // After sifting the cofactors are still the same functions.
    let truth: Vec<(Advisory, Vec<bool>)> = e
        .kept
        .iter()
        .map(|&(a, r)| (a, t.grid().states().map(|s| m.eval_bits(r, BitLayout::standard().state_bits(&s))).collect()))
        .collect();
    for &(_, r) in &e.kept {
        m.register_root(r);
    }
    sift(&mut m, &[]);
    for (a, expected) in truth {
        let region = g.advisory_region(&mut m, a).unwrap();
        let got: Vec<bool> = t.grid().states().map(|s| m.eval_bits(region, BitLayout::standard().state_bits(&s))).collect();
        assert_eq!(got, expected, "{a}");
        assert_eq!(region, e.kept.iter().find(|k| k.0 == a).unwrap().1);
    }
}

#[test]
fn all_false_kept_roots_give_a_false_global() {
    let t = AdvisoryTable::constant(tiny(), Advisory::Coc, Advisory::Wl);
    let c = compress(&t, CompressOptions::default()).unwrap();
    assert!(c.global.root.is_false());
    assert_eq!(c.global.node_count(&c.manager), 0);
}

#[test]
fn sr_tables_use_the_reference_selector_convention() {
    let kept = [Advisory::Sr, Advisory::Coc, Advisory::Wr, Advisory::Sl];
    let map = SelectorMap::default_for(Advisory::Sr, &kept).unwrap();
    assert_eq!(map.pattern(Advisory::Coc), Some((true, true)));
    assert_eq!(map.pattern(Advisory::Sl), Some((false, true)));
    assert_eq!(map.pattern(Advisory::Wr), Some((true, false)));
    assert_eq!(map.pattern(Advisory::Sr), Some((false, false)));
    assert_eq!(map.to_string(), "COC:11 SL:01 WR:10 SR:00");
}

#[test]
fn other_tables_assign_patterns_in_enum_order() {
    let kept = [Advisory::Sr, Advisory::Wl, Advisory::Wr, Advisory::Sl];
    let map = SelectorMap::default_for(Advisory::Coc, &kept).unwrap();
    assert_eq!(map.to_string(), "WL:11 WR:01 SL:10 SR:00");
}

#[test]
fn selector_maps_reject_duplicates() {
    let dup_pattern = vec![
        (Advisory::Coc, (true, true)),
        (Advisory::Wl, (true, true)),
        (Advisory::Wr, (true, false)),
        (Advisory::Sl, (false, false)),
    ];
    assert!(matches!(SelectorMap::new(dup_pattern), Err(CompressError::SelectorMap(_))));
    let dup_advisory = vec![
        (Advisory::Coc, (true, true)),
        (Advisory::Coc, (false, true)),
        (Advisory::Wr, (true, false)),
        (Advisory::Sl, (false, false)),
    ];
    assert!(SelectorMap::new(dup_advisory).is_err());
    assert!(SelectorMap::new(vec![(Advisory::Coc, (true, true))]).is_err());
}

#[test]
fn classification_order_is_irrelevant() {
    let t = generate_synthetic(&small(), Advisory::Sl, 3);
    let c = compress(&t, CompressOptions::default()).unwrap();
    let mut order = c.global.selector_map.advisories();
    for s in t.grid().states() {
        let expected = c.classify(&s).unwrap();
        order.rotate_left(1);
        assert_eq!(classify_with_order(&c.manager, &c.global, &order, &s).unwrap(), expected);
    }
}

#[test]
fn invalid_states_are_rejected() {
    let t = generate_synthetic(&tiny(), Advisory::Coc, 0);
    let c = compress(&t, CompressOptions::default()).unwrap();
    assert!(matches!(c.classify(&StateIndex::new(2, 0, 0, 0, 0, 0)), Err(CompressError::Codec(_))));
}

#[test]
fn wrong_layout_is_rejected() {
    let t = generate_synthetic(&tiny(), Advisory::Coc, 0);
    let mut m = Manager::new(8).unwrap();
    assert!(matches!(build_roots(&mut m, &t, never()), Err(CompressError::LayoutMismatch(8))));
}

#[test]
fn report_is_deterministic_and_sifting_helps() {
    let grid = QuantizationGrid::linear([4, 8, 8, 8, 4, 4]).unwrap();
    let t = generate_synthetic(&grid, Advisory::Sr, 42);
    let a = compress(&t, CompressOptions::default()).unwrap();
    let b = compress(&t, CompressOptions::default()).unwrap();
    assert_eq!(a.report.to_string(), b.report.to_string());
    let (before, after) = a.report.overall_reduction().unwrap();
    assert!(after <= before);
    let g = a.report.global_reorder.as_ref().unwrap();
    assert!(g.nodes_after <= g.nodes_before);
    assert_eq!(a.report.final_order[..2], ["bdd1", "bdd0"]);
}

#[test]
fn reordering_does_not_change_classification() {
    let t = generate_synthetic(&small(), Advisory::Wl, 9);
    let plain = compress(&t, CompressOptions { build: never(), ..Default::default() }).unwrap();
    let sifted = compress(&t, CompressOptions::default()).unwrap();
    for s in t.grid().states() {
        assert_eq!(plain.classify(&s).unwrap(), sifted.classify(&s).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_tables_are_reproduced(codes in proptest::collection::vec(0u8..5, 216), prev in 0u8..5) {
        let grid = QuantizationGrid::linear([3, 2, 3, 2, 3, 2]).unwrap();
        let entries = codes.iter().map(|&c| Advisory::from_code(c).unwrap()).collect();
        let t = AdvisoryTable::new(grid, Advisory::from_code(prev).unwrap(), entries).unwrap();
        let opts = CompressOptions {
            build: BuildOptions { chunk_size: 50, policy: ReorderPolicy::Final },
            coverage: CoverageMode::Valid,
        };
        let c = compress(&t, opts).unwrap();
        for s in t.grid().states() {
            prop_assert_eq!(c.classify(&s).unwrap(), t.get(&s));
        }
    }
}
