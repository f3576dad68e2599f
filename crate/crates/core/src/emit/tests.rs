use super::*;
use crate::compress::{classify, compress, CompressOptions, Compressed};
use crate::codec::StateIndex;
use crate::table::{generate_synthetic, AdvisoryTable};

fn xy_or_yz() -> (Manager, NodeRef) {
    let names = vec!["x".to_string(), "y".to_string(), "z".to_string()];
    let mut m = Manager::with_order(names, &[VarId(1), VarId(0), VarId(2)]).unwrap();
    let x = m.mk_var(VarId(0)).unwrap();
    let y = m.mk_var(VarId(1)).unwrap();
    let z = m.mk_var(VarId(2)).unwrap();
    let xy = m.and(x, y);
    let yz = m.and(y, z);
    let f = m.or(xy, yz);
    (m, f)
}

fn small_compressed(seed: u64) -> (AdvisoryTable, Compressed) {
    let grid = QuantizationGrid::linear([3, 4, 3, 3, 2, 3]).unwrap();
    let t = generate_synthetic(&grid, Advisory::Sr, seed);
    let c = compress(&t, CompressOptions::default()).unwrap();
    (t, c)
}

#[test]
fn false_dumps_to_constants_only() {
    let m = Manager::new(2).unwrap();
    let text = dump_roots(&m, &[("f", NodeRef::FALSE)]);
    let body: Vec<&str> = text.lines().skip_while(|l| !l.starts_with(".nodes")).collect();
    assert_eq!(body, vec![".nodes 2", "0 FALSE", "1 TRUE", ".root f 0", ".end"]);
    let (_, roots) = DiagramFile::parse(&text).unwrap().build().unwrap();
    assert_eq!(roots[0].1, NodeRef::FALSE);
}

#[test]
fn xy_or_yz_round_trip_keeps_three_nodes() {
    let (m, f) = xy_or_yz();
    let text = dump_roots(&m, &[("f", f)]);
    let file = DiagramFile::parse(&text).unwrap();
    assert_eq!(file.records.len(), 3);
    assert_eq!(file.order, vec!["y", "x", "z"]);
    let (m2, roots) = file.build().unwrap();
    let g = roots[0].1;
    assert_eq!(m2.node_count(g), 3);
    for bits in 0..8 {
        assert_eq!(m2.eval_bits(g, bits), m.eval_bits(f, bits));
    }
    // Serializing the rebuilt diagram reproduces the file.
    assert_eq!(dump_roots(&m2, &[("f", g)]), text);
}

#[test]
fn records_are_children_first() {
    let (_, c) = small_compressed(1);
    let text = dump_global(&c.manager, &c.global);
    let file = DiagramFile::parse(&text).unwrap();
    for (k, &(id, _, t, e)) in file.records.iter().enumerate() {
        assert_eq!(id, k as u64 + 2);
        assert!(t < id && e < id);
    }
}

#[test]
fn global_round_trip_classifies_identically() {
    let (t, c) = small_compressed(2);
    let text = dump_global(&c.manager, &c.global);
    let loaded = load_global_str(&text, Some(t.grid()), false).unwrap();
    assert!(loaded.warnings.is_empty());
    assert_eq!(loaded.global.selector_map, c.global.selector_map);
    assert_eq!(loaded.global.eliminated, c.global.eliminated);
    assert_eq!(loaded.global.a_prev, Advisory::Sr);
    assert_eq!(loaded.global.grid, *t.grid());
    assert_eq!(loaded.manager.order_names(), c.manager.order_names());
    assert_eq!(loaded.manager.frozen_levels(), 2);
    for s in t.grid().states() {
        assert_eq!(classify(&loaded.manager, &loaded.global, &s).unwrap(), t.get(&s));
    }
    assert_eq!(dump_global(&loaded.manager, &loaded.global), text);
}

#[test]
fn save_and_load_files() {
    let (t, c) = small_compressed(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bdd");
    save(&c.manager, &c.global, &path).unwrap();
    let loaded = load(&path, None, false).unwrap();
    for s in t.grid().states() {
        assert_eq!(classify(&loaded.manager, &loaded.global, &s).unwrap(), t.get(&s));
    }
}

#[test]
fn serialization_is_deterministic() {
    let (_, a) = small_compressed(4);
    let (_, b) = small_compressed(4);
    assert_eq!(dump_global(&a.manager, &a.global), dump_global(&b.manager, &b.global));
}

#[test]
fn per_root_dumps() {
    let (m, f) = xy_or_yz();
    let dir = tempfile::tempdir().unwrap();
    let paths = save_root_dumps(&m, &[(Advisory::Coc, f)], dir.path(), "t").unwrap();
    assert!(paths[0].ends_with("t.COC.bdd"));
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    assert!(text.contains(".root COC "));
}

#[test]
fn malformed_files_raise_named_errors() {
    let (m, f) = xy_or_yz();
    let good = dump_roots(&m, &[("f", f)]);

    let bad_version = good.replacen(".tablebdd-diagram 1", ".tablebdd-diagram 7", 1);
    assert!(matches!(DiagramFile::parse(&bad_version), Err(EmitError::VersionMismatch { .. })));

    let truncated: String = good.lines().take(8).map(|l| format!("{l}\n")).collect();
    assert!(matches!(DiagramFile::parse(&truncated), Err(EmitError::Truncated(_))));

    // Point the top node's then-edge at a record that does not exist.
    let file = DiagramFile::parse(&good).unwrap();
    let (top, var, _, e) = file.records.last().unwrap().clone();
    let dangling = good.replace(&format!("{top} {var} "), &format!("{top} {var} 99 {e}\n#"));
    assert!(matches!(
        DiagramFile::parse(&dangling).unwrap().build(),
        Err(EmitError::DanglingReference { target: 99, .. })
    ));

    // A record referring to itself.
    let (first, var, _, e) = file.records[0].clone();
    let cyclic = good.replacen(&format!("{first} {var} "), &format!("{first} {var} {first} {e}\n#"), 1);
    assert!(matches!(
        DiagramFile::parse(&cyclic).unwrap().build(),
        Err(EmitError::CyclicReference { .. })
    ));

    assert!(matches!(DiagramFile::parse("hello\n"), Err(EmitError::NotADiagram)));
    let bad_record = good.replace("1 TRUE", "1 TRUE extra");
    assert!(matches!(DiagramFile::parse(&bad_record), Err(EmitError::Malformed { .. })));
}

#[test]
fn grid_mismatch_is_fatal_unless_forced() {
    let (_, c) = small_compressed(5);
    let text = dump_global(&c.manager, &c.global);
    let other = QuantizationGrid::linear([2, 2, 2, 2, 2, 2]).unwrap();
    assert!(matches!(load_global_str(&text, Some(&other), false), Err(EmitError::GridMismatch { .. })));
    let forced = load_global_str(&text, Some(&other), true).unwrap();
    assert_eq!(forced.warnings.len(), 1);
}

#[test]
fn missing_global_metadata_is_reported() {
    let (m, f) = xy_or_yz();
    let text = dump_roots(&m, &[("f", f)]);
    assert!(load_global_str(&text, None, false).is_err());
}

#[test]
fn threaded_xy_or_yz_has_three_branches_and_two_returns() {
    let (m, f) = xy_or_yz();
    let out = emit_function(&m, f, &EmitOptions::default()).unwrap();
    let src = &out.source;
    assert_eq!(src.matches(": if (x & ").count(), 3);
    assert_eq!(src.matches("return 1;").count(), 1);
    assert_eq!(src.matches("return 0;").count(), 1);
    assert_eq!(out.node_count, 3);
    assert!(src.contains(" * nodes: 3"));
}

#[test]
fn constant_true_emits_a_single_return() {
    let m = Manager::new(3).unwrap();
    let out = emit_function(&m, NodeRef::TRUE, &EmitOptions::default()).unwrap();
    assert!(out.source.contains("goto t1;"));
    assert!(!out.source.contains("return 0;"));
}

#[test]
fn emission_cap_is_enforced() {
    let (m, f) = xy_or_yz();
    let opts = EmitOptions { cap: 2, ..Default::default() };
    assert!(matches!(emit_function(&m, f, &opts), Err(EmitError::TooManyNodes { nodes: 3, cap: 2 })));
}

#[test]
fn emission_is_byte_identical_across_runs() {
    let (_, a) = small_compressed(6);
    let (_, b) = small_compressed(6);
    for style in [EmitStyle::Threaded, EmitStyle::Table] {
        let opts = EmitOptions { style, ..Default::default() };
        let x = emit_evaluator(&a.manager, &a.global, &opts).unwrap();
        let y = emit_evaluator(&b.manager, &b.global, &opts).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn styles_parse() {
    assert_eq!("table".parse::<EmitStyle>().unwrap(), EmitStyle::Table);
    assert_eq!("threaded".parse::<EmitStyle>().unwrap(), EmitStyle::Threaded);
    assert!("goto".parse::<EmitStyle>().is_err());
}

fn compile(dir: &Path, name: &str, sources: &[(&str, &str)]) -> Option<PathBuf> {
    let cc = find_c_compiler()?;
    let mut paths = Vec::new();
    for (file, text) in sources {
        let p = dir.join(file);
        std::fs::write(&p, text).unwrap();
        paths.push(p);
    }
    let refs: Vec<&Path> = paths.iter().map(|p| p.as_path()).collect();
    let exe = dir.join(name);
    compile_c(&cc, &refs, &exe, "-O1").unwrap();
    Some(exe)
}

#[test]
fn compiled_xy_or_yz_matches_eval_on_all_inputs() {
    let (m, f) = xy_or_yz();
    let dir = tempfile::tempdir().unwrap();
    for style in [EmitStyle::Threaded, EmitStyle::Table] {
        let out = emit_function(&m, f, &EmitOptions { style, ..Default::default() }).unwrap();
        let Some(exe) =
            compile(dir.path(), "xy_or_yz", &[("f.c", &out.source), ("main.c", &emit_bits_driver("tbdd"))])
        else {
            eprintln!("no C compiler; skipping");
            return;
        };
        let input: String = (0..8).map(|b| format!("{b:x}\n")).collect();
        let got = run_driver(&exe, input.as_bytes()).unwrap();
        let expected: String = (0..8).map(|b| if m.eval_bits(f, b) { '1' } else { '0' }).collect();
        assert_eq!(got.trim(), expected);
    }
}

#[test]
fn compiled_evaluator_matches_the_table() {
    let (t, c) = small_compressed(7);
    let dir = tempfile::tempdir().unwrap();
    for style in [EmitStyle::Threaded, EmitStyle::Table] {
        let out = emit_evaluator(&c.manager, &c.global, &EmitOptions { style, ..Default::default() }).unwrap();
        let Some(exe) =
            compile(dir.path(), "eval", &[("e.c", &out.source), ("main.c", &emit_driver("tbdd"))])
        else {
            eprintln!("no C compiler; skipping");
            return;
        };
        let states: Vec<StateIndex> = t.grid().states().collect();
        let input: String = states
            .iter()
            .map(|s| {
                let [a, b, c, d, e, f] = s.0;
                format!("s {a} {b} {c} {d} {e} {f}\n")
            })
            .collect();
        let got = run_driver(&exe, input.as_bytes()).unwrap();
        let expected: String = states.iter().map(|s| (b'0' + t.get(s).code()) as char).collect();
        assert_eq!(got.trim(), expected);
    }
}
