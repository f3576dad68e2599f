use super::*;
use crate::compress::{compress, CompressOptions, Compressed};
use crate::table::generate_synthetic;

/// Reduced grid with an odd heading count so `psi = 0` is a breakpoint.
fn fixture_grid() -> QuantizationGrid {
    QuantizationGrid::linear([4, 8, 8, 9, 4, 4]).unwrap()
}

fn in_premise(grid: &QuantizationGrid, p: &PropertySpec, s: &StateIndex) -> bool {
    p.intervals.iter().all(|&(d, lo, hi)| {
        let v = grid.value(d, s[d]);
        lo <= v && v <= hi
    }) && p
        .relations
        .iter()
        .all(|r| r.cmp.holds(grid.value(r.lhs, s[r.lhs]), grid.value(r.rhs, s[r.rhs])))
}

/// Synthetic table with every state in the premise of `p` set to COC.
fn valid_fixture(p: &PropertySpec) -> AdvisoryTable {
    let grid = fixture_grid();
    let base = generate_synthetic(&grid, Advisory::Sr, 11);
    AdvisoryTable::from_fn(grid.clone(), Advisory::Sr, |s| {
        if in_premise(&grid, p, s) {
            Advisory::Coc
        } else {
            base.get(s)
        }
    })
}

fn compressed(t: &AdvisoryTable) -> Compressed {
    compress(t, CompressOptions::default()).unwrap()
}

#[test]
fn property_eleven_selects_the_expected_region() {
    let grid = fixture_grid();
    let p = PropertySpec::property_11();
    let mut m = BitLayout::standard().new_manager();
    let compiled = compile_property(&mut m, &grid, &p).unwrap();
    assert!(compiled.warnings.is_empty());
    let expected = grid.states().filter(|s| in_premise(&grid, &p, s)).count();
    assert!(expected > 0);
    assert_eq!(m.sat_count(compiled.bdd, 30), expected as u128);
}

#[test]
fn property_eleven_constructed_valid_instance() {
    let p = PropertySpec::property_11();
    let t = valid_fixture(&p);
    let mut c = compressed(&t);
    let verdict = check(&mut c.manager, &c.global, &p).unwrap();
    assert_eq!(verdict.status, Status::Valid, "{verdict}");
    assert_eq!(brute_force_check(&t, &p).status, Status::Valid);
}

#[test]
fn property_eleven_constructed_invalid_instance() {
    let p = PropertySpec::property_11();
    let mut t = valid_fixture(&p);
    let grid = t.grid().clone();
    let target = grid.states().filter(|s| in_premise(&grid, &p, s)).nth(5).unwrap();
    t.set(&target, Advisory::Wl);
    let mut c = compressed(&t);
    let verdict = check(&mut c.manager, &c.global, &p).unwrap();
    assert_eq!(verdict.status, Status::Invalid);
    let cex = verdict.counterexample.as_ref().unwrap();
    assert_eq!(cex.state, target);
    assert_eq!(cex.actual, Advisory::Wl);
    assert_eq!(cex.physical, grid.physical(&target));
    assert!(revalidate(&t, &p, cex));
    let oracle = brute_force_check(&t, &p);
    assert_eq!(oracle.counterexample.unwrap().state, target);
}

#[test]
fn unconstrained_property_is_the_domain() {
    let grid = fixture_grid();
    let mut m = BitLayout::standard().new_manager();
    let p = PropertySpec::new("any", [Advisory::Coc]);
    let compiled = compile_property(&mut m, &grid, &p).unwrap();
    let domain = BitLayout::standard().domain(&mut m, &grid).unwrap();
    assert_eq!(compiled.bdd, domain);
}

#[test]
fn single_point_interval_counts_the_rest_of_the_grid() {
    let grid = fixture_grid();
    let mut m = BitLayout::standard().new_manager();
    let v = grid.value(Dimension::Rho, 3);
    let p = PropertySpec::new("point", [Advisory::Coc]).interval(Dimension::Rho, v, v);
    let compiled = compile_property(&mut m, &grid, &p).unwrap();
    let rest = grid.len() / grid.cardinality(Dimension::Rho);
    assert_eq!(m.sat_count(compiled.bdd, 30), rest as u128);
}

#[test]
fn speed_relation_on_twelve_identical_speeds() {
    let grid = QuantizationGrid::acas();
    let mut m = BitLayout::standard().new_manager();
    let r = Relation { lhs: Dimension::VInt, cmp: Comparator::Le, rhs: Dimension::VOwn };
    let rel = compile_relation(&mut m, &grid, &r).unwrap();
    // Over the eight speed bits: pairs (i, j) with i <= j among 12 values.
    let pairs = (0..12).flat_map(|j| (0..=j).map(move |i| (i, j))).count();
    assert_eq!(pairs, 78);
    assert_eq!(m.sat_count(rel, 32) >> 24, pairs as u128);
}

#[test]
fn comparators() {
    let grid = QuantizationGrid::acas();
    let count = |cmp| {
        let mut m = BitLayout::standard().new_manager();
        let r = Relation { lhs: Dimension::VInt, cmp, rhs: Dimension::VOwn };
        let rel = compile_relation(&mut m, &grid, &r).unwrap();
        m.sat_count(rel, 32) >> 24
    };
    assert_eq!(count(Comparator::Lt), 66);
    assert_eq!(count(Comparator::Eq), 12);
    assert_eq!(count(Comparator::Ge), 78);
    assert_eq!(count(Comparator::Gt), 66);
}

#[test]
fn expected_sets() {
    let t = generate_synthetic(&fixture_grid(), Advisory::Coc, 2);
    let mut c = compressed(&t);
    let all: BTreeSet<Advisory> = Advisory::ALL.into_iter().collect();
    let union = compile_expected(&mut c.manager, &c.global, &all).unwrap();
    assert_eq!(union, c.global.domain);
    let only = compile_expected(&mut c.manager, &c.global, &[c.global.eliminated].into()).unwrap();
    let kept: Vec<NodeRef> = c
        .global
        .selector_map
        .advisories()
        .into_iter()
        .map(|a| c.global.advisory_region(&mut c.manager, a).unwrap())
        .collect();
    let union = c.manager.or_all(kept);
    let expected = c.manager.diff(c.global.domain, union);
    assert_eq!(only, expected);
}

#[test]
fn expected_clear_on_a_constant_table_is_the_domain() {
    let t = AdvisoryTable::constant(fixture_grid(), Advisory::Coc, Advisory::Coc);
    let mut c = compressed(&t);
    let r = compile_expected(&mut c.manager, &c.global, &[Advisory::Coc].into()).unwrap();
    assert_eq!(r, c.global.domain);
}

#[test]
fn vacuous_intervals_warn_and_hold() {
    let t = generate_synthetic(&fixture_grid(), Advisory::Coc, 2);
    let mut c = compressed(&t);
    let p = PropertySpec::new("empty", [Advisory::Sr]).interval(Dimension::Tau, 1e6, 2e6);
    let verdict = check(&mut c.manager, &c.global, &p).unwrap();
    assert!(verdict.is_valid());
    assert_eq!(verdict.warnings.len(), 1);
    assert!(verdict.warnings[0].contains("vacuous"));
    assert_eq!(brute_force_check(&t, &p).warnings, verdict.warnings);
}

#[test]
fn inapplicable_properties_are_reported() {
    let t = generate_synthetic(&fixture_grid(), Advisory::Sr, 2);
    let mut c = compressed(&t);
    let p = PropertySpec::property_11().for_previous([Advisory::Wl]);
    assert!(matches!(
        check(&mut c.manager, &c.global, &p),
        Err(VerifyError::NotApplicable { a_prev: Advisory::Sr, .. })
    ));
}

#[test]
fn constant_tables() {
    let t = AdvisoryTable::constant(fixture_grid(), Advisory::Coc, Advisory::Wr);
    let holds = PropertySpec::new("wr", [Advisory::Wr, Advisory::Sl]);
    assert!(brute_force_check(&t, &holds).is_valid());
    let fails = PropertySpec::new("not wr", [Advisory::Coc])
        .interval(Dimension::Rho, 20000.0, 70000.0);
    let v = brute_force_check(&t, &fails);
    assert_eq!(v.status, Status::Invalid);
    // Row-major first state inside the premise.
    let first_rho = value_bounds_to_index_set(t.grid(), Dimension::Rho, 20000.0, 70000.0).unwrap()[0];
    assert_eq!(v.counterexample.unwrap().state, StateIndex::new(0, first_rho, 0, 0, 0, 0));
}

#[test]
fn invalid_properties_are_rejected() {
    let empty = PropertySpec::new("e", []);
    assert!(empty.validate().is_err());
    let full = PropertySpec::new("f", Advisory::ALL);
    assert!(full.validate().is_err());
    let units = PropertySpec::new("u", [Advisory::Coc]).relation(Dimension::Rho, Comparator::Le, Dimension::Tau);
    assert!(matches!(units.validate(), Err(VerifyError::InvalidProperty { .. })));
    let bounds = PropertySpec::new("b", [Advisory::Coc]).interval(Dimension::Rho, 5.0, 1.0);
    assert!(bounds.validate().is_err());
}

#[test]
fn property_files() {
    let text = r#"
        [[property]]
        name = "P11"
        expected = ["COC"]
        relations = ["v_int <= v_own"]
        [property.intervals]
        rho = [8500.0, 62000.0]
        theta = [-3.1416, -3.1316]
        psi = [-0.06, 0.06]

        [[property]]
        name = "left only"
        a_prev = ["WL"]
        expected = ["WL", "SL"]
    "#;
    let props = parse_properties(text).unwrap();
    assert_eq!(props.len(), 2);
    assert_eq!(props[0].relations, PropertySpec::property_11().relations);
    let mut reference = PropertySpec::property_11().intervals;
    reference.sort_by_key(|&(d, _, _)| d);
    assert_eq!(props[0].intervals, reference);
    assert_eq!(props[1].a_prev, vec![Advisory::Wl]);
    assert!(!props[1].applies_to(Advisory::Sr));

    assert!(matches!(parse_properties("[[property]]\nname = 1"), Err(VerifyError::Parse(_))));
    let bad_relation = "[[property]]\nname = \"x\"\nexpected = [\"COC\"]\nrelations = [\"v_int ~ v_own\"]";
    assert!(matches!(parse_properties(bad_relation), Err(VerifyError::InvalidProperty { .. })));
    let bad_units = "[[property]]\nname = \"x\"\nexpected = [\"COC\"]\nrelations = [\"rho < v_own\"]";
    assert!(parse_properties(bad_units).is_err());
}

#[test]
fn relation_parsing() {
    let r: Relation = "v_int<=v_own".parse().unwrap();
    assert_eq!(r.cmp, Comparator::Le);
    let r: Relation = " v_own > v_int ".parse().unwrap();
    assert_eq!((r.lhs, r.cmp, r.rhs), (Dimension::VOwn, Comparator::Gt, Dimension::VInt));
    let r: Relation = "v_own == v_int".parse().unwrap();
    assert_eq!(r.cmp, Comparator::Eq);
    assert_eq!(r.to_string(), "v_own = v_int");
}

#[test]
fn symbolic_and_brute_force_checks_agree() {
    let grid = fixture_grid();
    for k in 0..24u64 {
        let t = generate_synthetic(&grid, Advisory::ALL[(k % 5) as usize], k);
        let mut c = compressed(&t);
        for j in 0..4 {
            let p = random_property(&grid, k * 100 + j);
            let symbolic = check(&mut c.manager, &c.global, &p).unwrap();
            let oracle = brute_force_check(&t, &p);
            assert_eq!(symbolic.status, oracle.status, "table {k}, property {p:?}");
            assert_eq!(symbolic.warnings, oracle.warnings);
            if let Some(cex) = &symbolic.counterexample {
                assert!(revalidate(&t, &p, cex), "{symbolic}");
                assert_eq!(cex.actual, t.get(&cex.state));
            }
            if let Some(cex) = &oracle.counterexample {
                assert!(revalidate(&t, &p, cex));
            }
        }
    }
}

#[test]
fn adding_a_constraint_never_breaks_validity() {
    let grid = fixture_grid();
    for k in 0..40u64 {
        let t = generate_synthetic(&grid, Advisory::Coc, k % 3);
        let p = random_property(&grid, 7000 + k);
        let q = random_property(&grid, 9000 + k);
        let mut tighter = p.clone();
        tighter.intervals.extend(q.intervals);
        tighter.relations.extend(q.relations);
        if brute_force_check(&t, &p).is_valid() {
            assert!(brute_force_check(&t, &tighter).is_valid());
        }
    }
}

#[test]
fn verdict_display_names_the_counterexample() {
    let p = PropertySpec::property_11();
    let mut t = valid_fixture(&p);
    let grid = t.grid().clone();
    let target = grid.states().find(|s| in_premise(&grid, &p, s)).unwrap();
    t.set(&target, Advisory::Sr);
    let text = brute_force_check(&t, &p).to_string();
    assert!(text.contains("Invalid"));
    assert!(text.contains("issued SR"));
    assert!(text.contains(&target.to_string()));
}

#[test]
fn fixtures_are_valid_or_violated_at_the_returned_state() {
    let p = PropertySpec::property_11();
    let base = generate_synthetic(&fixture_grid(), Advisory::Sr, 3);
    let (valid, none) = fixture(&base, &p, false);
    assert!(none.is_none());
    assert!(brute_force_check(&valid, &p).is_valid());
    let (invalid, target) = fixture(&base, &p, true);
    let target = target.unwrap();
    let differing: Vec<_> = valid.grid().states().filter(|s| valid.get(s) != invalid.get(s)).collect();
    assert_eq!(differing, vec![target]);
    let mut c = compressed(&invalid);
    let verdict = check(&mut c.manager, &c.global, &p).unwrap();
    assert_eq!(verdict.counterexample.unwrap().state, target);
}
