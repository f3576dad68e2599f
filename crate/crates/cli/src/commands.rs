//! The five verbs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use tablebdd::bench::{self, query_stream, report_from_external, Backend, BenchReport};
use tablebdd::codec::ACAS_CARDINALITIES;
use tablebdd::compress::{classify_unchecked, compress, BuildOptions, BuildReport, CompressOptions, GlobalRoot};
use tablebdd::emit::{self, compile_c, emit_driver, emit_evaluator, find_c_compiler, run_driver, EmitOptions, EmitStyle};
use tablebdd::table::{generate_synthetic_with, AdvisoryTable, SyntheticParams};
use tablebdd::verify::{brute_force_check, check, fixture, load_properties, revalidate, Counterexample, PropertySpec, Status};
use tablebdd::{Advisory, Manager, QuantizationGrid};

use crate::report::write_reports;
use crate::{
    BenchArgs, Cli, CliError, Command, CompressArgs, EmitArgs, GenerateArgs, GlobalArgs, Outcome, VerifyArgs,
    EXIT_INVALID, EXIT_OK,
};

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Generate(args) => generate(g, args),
        Command::Compress(args) => compress_table(g, args),
        Command::Verify(args) => verify_diagram(g, args),
        Command::Emit(args) => emit_source(g, args),
        Command::Bench(args) => bench_backends(g, args),
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.to_path_buf();
    move |source| CliError::Io { path, source }
}

/// Grid named by `--grid`, if given.
pub fn resolve_grid(g: &GlobalArgs) -> Result<Option<QuantizationGrid>, CliError> {
    let Some(name) = g.grid.as_deref() else {
        return Ok(None);
    };
    let grid = match name {
        "default" => QuantizationGrid::acas(),
        "reduced" => QuantizationGrid::linear([4, 8, 8, 8, 4, 4])?,
        path => {
            let path = Path::new(path);
            if !path.exists() {
                return Err(CliError::Io {
                    path: path.to_path_buf(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "grid configuration not found"),
                });
            }
            QuantizationGrid::load(path, g.relaxed_grid)?
        }
    };
    admit(&grid, g.relaxed_grid)?;
    Ok(Some(grid))
}

/// Rejects test-size grids unless `--relaxed-grid` is set.
fn admit(grid: &QuantizationGrid, relaxed: bool) -> Result<(), CliError> {
    if relaxed || grid.cardinalities() == ACAS_CARDINALITIES {
        return Ok(());
    }
    Err(CliError::Usage(format!(
        "grid cardinalities {:?} differ from the full-size grid {:?}; pass --relaxed-grid for test grids",
        grid.cardinalities(),
        ACAS_CARDINALITIES
    )))
}

/// Compares a table's grid with the one named by `--grid`.
fn expect_grid(
    g: &GlobalArgs,
    actual: &QuantizationGrid,
    warnings: &mut Vec<String>,
) -> Result<(), CliError> {
    admit(actual, g.relaxed_grid)?;
    if let Some(expected) = resolve_grid(g)? {
        if expected.fingerprint() != actual.fingerprint() {
            let message = format!(
                "grid fingerprint mismatch: table built for {}, expected {}",
                actual.fingerprint(),
                expected.fingerprint()
            );
            if !g.force {
                return Err(CliError::Usage(format!("{message} (use --force to continue)")));
            }
            warnings.push(message);
        }
    }
    Ok(())
}

fn read_table(g: &GlobalArgs, path: &Path, warnings: &mut Vec<String>) -> Result<AdvisoryTable, CliError> {
    if !path.exists() {
        return Err(io_error(path)(std::io::Error::new(std::io::ErrorKind::NotFound, "table not found")));
    }
    let t = AdvisoryTable::read(path)?;
    expect_grid(g, t.grid(), warnings)?;
    Ok(t)
}

fn load_diagram(g: &GlobalArgs, path: &Path, warnings: &mut Vec<String>) -> Result<(Manager, GlobalRoot), CliError> {
    let expected = resolve_grid(g)?;
    let loaded = emit::load(path, expected.as_ref(), g.force).map_err(|e| match e {
        emit::EmitError::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        e => e.into(),
    })?;
    admit(&loaded.global.grid, g.relaxed_grid)?;
    warnings.extend(loaded.warnings);
    Ok((loaded.manager, loaded.global))
}

fn finish(name: &str, mut text: String, json: &impl Serialize, exit_code: i32) -> Result<Outcome, CliError> {
    for path in write_reports(name, &text, json)? {
        let _ = writeln!(text, "report: {}", path.display());
    }
    Ok(Outcome { text, exit_code })
}

fn warning_lines(text: &mut String, warnings: &[String]) {
    for w in warnings {
        let _ = writeln!(text, "warning: {w}");
    }
}

#[derive(Serialize)]
struct GenerateReport<'a> {
    table: &'a Path,
    a_prev: Advisory,
    seed: u64,
    perturbation: f64,
    cardinalities: [usize; 6],
    states: usize,
    histogram: [usize; 5],
    fixture: Vec<String>,
}

fn generate(g: &GlobalArgs, args: &GenerateArgs) -> Result<Outcome, CliError> {
    let grid = resolve_grid(g)?.unwrap_or_else(QuantizationGrid::acas);
    let params = SyntheticParams {
        perturbation: args.perturbation.unwrap_or(SyntheticParams::default().perturbation),
    };
    if !(0.0..=1.0).contains(&params.perturbation) {
        return Err(CliError::Usage(format!("perturbation {} is not in [0, 1]", params.perturbation)));
    }
    let mut table = generate_synthetic_with(&grid, args.a_prev, g.seed, params);
    let mut notes = Vec::new();
    if let Some(path) = &args.fixture {
        let properties = load_properties(path)?;
        let applicable: Vec<&PropertySpec> = properties.iter().filter(|p| p.applies_to(args.a_prev)).collect();
        for p in &applicable {
            table = fixture(&table, p, false).0;
            notes.push(format!("{} holds by construction", p.name));
        }
        if args.inject_violation {
            let p = applicable
                .first()
                .ok_or_else(|| CliError::Usage(format!("no property in {} applies to {}", path.display(), args.a_prev)))?;
            let (t, state) = fixture(&table, p, true);
            let state = state.ok_or_else(|| {
                CliError::Usage(format!("property {} selects no state of this grid to violate", p.name))
            })?;
            table = t;
            notes.push(format!("{} violated at {} (issues {})", p.name, state, table.get(&state)));
        }
    }
    table.write(&args.out)?;

    let report = GenerateReport {
        table: &args.out,
        a_prev: args.a_prev,
        seed: g.seed,
        perturbation: params.perturbation,
        cardinalities: grid.cardinalities(),
        states: table.len(),
        histogram: table.histogram(),
        fixture: notes,
    };
    let mut text = String::new();
    let _ = writeln!(text, "table: {}", args.out.display());
    let _ = writeln!(text, "a_prev: {} seed: {} perturbation: {}", args.a_prev, g.seed, params.perturbation);
    let _ = writeln!(text, "grid: {:?} ({} states)", report.cardinalities, report.states);
    let hist: Vec<String> =
        Advisory::ALL.iter().zip(report.histogram).map(|(a, n)| format!("{a}={n}")).collect();
    let _ = writeln!(text, "advisories: {}", hist.join(" "));
    for note in &report.fixture {
        let _ = writeln!(text, "fixture: {note}");
    }
    finish("generate", text, &report, EXIT_OK)
}

#[derive(Serialize)]
struct CompressReport<'a> {
    diagram: &'a Path,
    root_dumps: Vec<PathBuf>,
    warnings: Vec<String>,
    #[serde(flatten)]
    build: &'a BuildReport,
}

fn compress_table(g: &GlobalArgs, args: &CompressArgs) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let table = read_table(g, &args.table, &mut warnings)?;
    if g.chunk_size == 0 {
        return Err(CliError::Usage("chunk size must be positive".into()));
    }
    let opts = CompressOptions {
        build: BuildOptions { chunk_size: g.chunk_size, policy: args.reorder.into() },
        coverage: g.coverage.into(),
    };
    let mut c = compress(&table, opts)?;
    emit::save(&c.manager, &c.global, &args.out).map_err(|e| match e {
        emit::EmitError::Io(source) => CliError::Io { path: args.out.clone(), source },
        e => e.into(),
    })?;
    let mut root_dumps = Vec::new();
    if let Some(dir) = &args.dump_roots {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        let mut regions = Vec::new();
        for a in Advisory::ALL {
            regions.push((a, c.global.advisory_region(&mut c.manager, a)?));
        }
        let stem = args.out.file_stem().and_then(|s| s.to_str()).unwrap_or("diagram");
        root_dumps = emit::save_root_dumps(&c.manager, &regions, dir, stem)?;
    }

    let mut text = String::new();
    warning_lines(&mut text, &warnings);
    let _ = write!(text, "{}", c.report);
    if let Some((before, after)) = c.report.overall_reduction() {
        let _ = writeln!(
            text,
            "reordering: {before} -> {after} nodes ({:.1}% smaller)",
            100.0 * (1.0 - after as f64 / before.max(1) as f64)
        );
    }
    let _ = writeln!(text, "diagram: {}", args.out.display());
    for p in &root_dumps {
        let _ = writeln!(text, "root dump: {}", p.display());
    }
    let report = CompressReport { diagram: &args.out, root_dumps, warnings, build: &c.report };
    finish("compress", text, &report, EXIT_OK)
}

#[derive(Serialize)]
struct PropertyResult {
    property: String,
    status: &'static str,
    counterexample: Option<Counterexample>,
    warnings: Vec<String>,
    cross_checked: bool,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    diagram: &'a Path,
    a_prev: Advisory,
    table: Option<&'a Path>,
    warnings: Vec<String>,
    results: Vec<PropertyResult>,
}

fn verify_diagram(g: &GlobalArgs, args: &VerifyArgs) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let (mut m, global) = load_diagram(g, &args.diagram, &mut warnings)?;
    let properties = match &args.properties {
        Some(path) => {
            if !path.exists() {
                return Err(io_error(path)(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "property file not found",
                )));
            }
            load_properties(path)?
        }
        None => vec![PropertySpec::property_11()],
    };
    let table = match &args.table {
        Some(path) => {
            let t = read_table(g, path, &mut warnings)?;
            if t.grid().fingerprint() != global.grid.fingerprint() {
                return Err(CliError::Usage("table and diagram were built on different grids".into()));
            }
            if t.a_prev() != global.a_prev {
                return Err(CliError::Usage(format!(
                    "table is for previous advisory {} but the diagram is for {}",
                    t.a_prev(),
                    global.a_prev
                )));
            }
            Some(t)
        }
        None => None,
    };

    let mut results = Vec::new();
    let mut text = String::new();
    warning_lines(&mut text, &warnings);
    for p in &properties {
        if !p.applies_to(global.a_prev) {
            let listed: Vec<&str> = p.a_prev.iter().map(|a| a.name()).collect();
            let _ = writeln!(
                text,
                "{}: N/A (applies to a_prev {}; diagram is for {})",
                p.name,
                listed.join(", "),
                global.a_prev
            );
            results.push(PropertyResult {
                property: p.name.clone(),
                status: "N/A",
                counterexample: None,
                warnings: Vec::new(),
                cross_checked: false,
            });
            continue;
        }
        let verdict = check(&mut m, &global, p)?;
        if let Some(t) = &table {
            let oracle = brute_force_check(t, p);
            if oracle.status != verdict.status {
                return Err(CliError::Disagreement(format!(
                    "{}: diagram says {:?} but the table scan says {:?}",
                    p.name, verdict.status, oracle.status
                )));
            }
            if let Some(c) = &verdict.counterexample {
                if !revalidate(t, p, c) {
                    return Err(CliError::Disagreement(format!(
                        "{}: counterexample {} does not violate the property in the table",
                        p.name, c.state
                    )));
                }
            }
        }
        let _ = writeln!(text, "{verdict}");
        results.push(PropertyResult {
            property: verdict.property,
            status: match verdict.status {
                Status::Valid => "Valid",
                Status::Invalid => "Invalid",
            },
            counterexample: verdict.counterexample,
            warnings: verdict.warnings,
            cross_checked: table.is_some(),
        });
    }
    let invalid = results.iter().filter(|r| r.status == "Invalid").count();
    let valid = results.iter().filter(|r| r.status == "Valid").count();
    let _ = writeln!(
        text,
        "summary: {valid} valid, {invalid} invalid, {} not applicable",
        results.len() - valid - invalid
    );
    if table.is_some() {
        let _ = writeln!(text, "every verdict matches a direct scan of the table");
    }
    let report = VerifyReport {
        diagram: &args.diagram,
        a_prev: global.a_prev,
        table: args.table.as_deref(),
        warnings,
        results,
    };
    finish("verify", text, &report, if invalid > 0 { EXIT_INVALID } else { EXIT_OK })
}

#[derive(Serialize)]
struct EmitReport<'a> {
    source: &'a Path,
    style: EmitStyle,
    prefix: &'a str,
    node_count: usize,
    diagram_hash: &'a str,
    lines: usize,
    warnings: Vec<String>,
}

fn emit_source(g: &GlobalArgs, args: &EmitArgs) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let (m, global) = load_diagram(g, &args.diagram, &mut warnings)?;
    let opts = EmitOptions { style: args.style, prefix: args.prefix.clone(), cap: args.cap };
    let out = emit_evaluator(&m, &global, &opts)?;
    std::fs::write(&args.out, &out.source).map_err(io_error(&args.out))?;
    let report = EmitReport {
        source: &args.out,
        style: args.style,
        prefix: &args.prefix,
        node_count: out.node_count,
        diagram_hash: &out.diagram_hash,
        lines: out.source.lines().count(),
        warnings,
    };
    let mut text = String::new();
    warning_lines(&mut text, &report.warnings);
    let _ = writeln!(text, "source: {}", args.out.display());
    let _ = writeln!(text, "style: {:?}, prefix: {}", args.style, args.prefix);
    let _ = writeln!(text, "nodes: {}, lines: {}, diagram hash: {}", report.node_count, report.lines, report.diagram_hash);
    finish("emit", text, &report, EXIT_OK)
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    reports: &'a [BenchReport],
    agreement: bool,
    warnings: Vec<String>,
}

fn bench_backends(g: &GlobalArgs, args: &BenchArgs) -> Result<Outcome, CliError> {
    if args.queries == 0 {
        return Err(CliError::Usage("query count must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    let needs_diagram = args.backends.iter().any(|b| *b != Backend::TableLookup);
    let needs_table = args.backends.contains(&Backend::TableLookup);
    let missing = |what: &str, flag: &str| CliError::Usage(format!("backend needs a {what} (pass {flag})"));
    let diagram = match (&args.diagram, needs_diagram) {
        (Some(path), true) => Some(load_diagram(g, path, &mut warnings)?),
        (None, true) => return Err(missing("diagram", "--diagram")),
        _ => None,
    };
    let table = match (&args.table, needs_table) {
        (Some(path), true) => Some(read_table(g, path, &mut warnings)?),
        (None, true) => return Err(missing("table", "--table")),
        _ => None,
    };
    let grid = match (&diagram, &table) {
        (Some((_, d)), Some(t)) if d.grid.fingerprint() != t.grid().fingerprint() => {
            return Err(CliError::Usage("table and diagram were built on different grids".into()));
        }
        (Some((_, d)), _) => d.grid.clone(),
        (None, Some(t)) => t.grid().clone(),
        (None, None) => unreachable!("at least one backend is required"),
    };

    let mut reports = Vec::new();
    for &backend in &args.backends {
        let report = match backend {
            Backend::BddEval => {
                let (m, d) = diagram.as_ref().expect("loaded above");
                bench::run(backend, &grid, args.queries, g.seed, args.threads, || {
                    |s: &tablebdd::StateIndex| classify_unchecked(m, d, s)
                })
            }
            Backend::TableLookup => {
                let t = table.as_ref().expect("loaded above");
                bench::run(backend, &grid, args.queries, g.seed, args.threads, || {
                    |s: &tablebdd::StateIndex| t.get(s)
                })
            }
            Backend::EmittedEvaluator => {
                let (m, d) = diagram.as_ref().expect("loaded above");
                if args.threads > 1 {
                    warnings.push("the emitted evaluator runs in a single driver process".into());
                }
                bench_emitted(m, d, &grid, args.queries, g.seed, args.emit_style)?
            }
        };
        reports.push(report);
    }
    let agreement = reports.windows(2).all(|w| w[0].digest == w[1].digest);

    let mut text = String::new();
    warning_lines(&mut text, &warnings);
    for r in &reports {
        let _ = writeln!(text, "{r}");
    }
    if reports.len() > 1 {
        let _ = writeln!(
            text,
            "cross-backend agreement: {}",
            if agreement { "identical advisories on every query" } else { "MISMATCH" }
        );
    }
    let summary = BenchSummary { reports: &reports, agreement, warnings };
    let outcome = finish("bench", text, &summary, EXIT_OK)?;
    if !agreement {
        return Err(CliError::Disagreement(format!("{}backends issued different advisories", outcome.text)));
    }
    Ok(outcome)
}

/// Compiles the emitted evaluator with a timing driver and feeds it the
/// query stream.
pub fn bench_emitted(
    m: &Manager,
    global: &GlobalRoot,
    grid: &QuantizationGrid,
    queries: usize,
    seed: u64,
    style: EmitStyle,
) -> Result<BenchReport, CliError> {
    let cc = find_c_compiler()
        .ok_or_else(|| CliError::Usage("no working C compiler found (set CC)".into()))?;
    let prefix = "tbdd";
    let source = emit_evaluator(m, global, &EmitOptions { style, prefix: prefix.into(), ..Default::default() })?;
    let dir = tempfile::tempdir().map_err(io_error(&std::env::temp_dir()))?;
    let eval_c = dir.path().join("eval.c");
    let main_c = dir.path().join("main.c");
    let exe = dir.path().join("bench");
    std::fs::write(&eval_c, &source.source).map_err(io_error(&eval_c))?;
    std::fs::write(&main_c, emit_driver(prefix)).map_err(io_error(&main_c))?;
    compile_c(&cc, &[&eval_c, &main_c], &exe, "-O2")?;

    let mut input = String::with_capacity(queries * 24);
    for s in query_stream(grid, queries, seed) {
        let [a, b, c, d, e, f] = s.0;
        let _ = writeln!(input, "t {a} {b} {c} {d} {e} {f}");
    }
    let output = run_driver(&exe, input.as_bytes())?;
    let mut lines = output.lines();
    let codes: Vec<u8> = lines.next().unwrap_or("").bytes().map(|b| b.wrapping_sub(b'0')).collect();
    if codes.len() != queries || codes.iter().any(|&c| Advisory::from_code(c).is_none()) {
        return Err(CliError::Disagreement(format!(
            "evaluator driver answered {} of {queries} queries",
            codes.len()
        )));
    }
    let timing: Vec<f64> = lines
        .next()
        .and_then(|l| l.strip_prefix("time "))
        .map(|l| l.split_whitespace().filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_default();
    let [t_min, t_max, t_mean, _count] = timing[..] else {
        return Err(CliError::Disagreement("evaluator driver reported no timing line".into()));
    };
    Ok(report_from_external(Backend::EmittedEvaluator, seed, &codes, t_min, t_max, t_mean))
}
