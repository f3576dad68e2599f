//! Diagram serialization and standalone C evaluator generation.
//!
//! # Diagram file format
//!
//! A line-oriented text file, version 1:
//!
//! ```text
//! .tablebdd-diagram 1
//! .vars 32 bdd1 bdd0 tau0 ...        variable names by variable id
//! .order bdd1 bdd0 rho0 ...          variable names by level, top first
//! .frozen 2                          length of the frozen order prefix
//! .a_prev SR                         optional metadata (global diagrams)
//! .eliminated WL
//! .selectors COC:11 SL:01 WR:10 SR:00
//! .grid 1f0e3c5a9b7d2e41             grid fingerprint
//! .axis tau 0 11.11 ...              grid breakpoints, one line per dimension
//! .nodes 5                           record count, constants included
//! 0 FALSE
//! 1 TRUE
//! 2 y 1 0                            id, variable, then-id, else-id
//! ...
//! .root global 4                     one line per named root
//! .root domain 1
//! .end
//! ```
//!
//! Records are numbered consecutively in a children-first traversal of the
//! roots in the order they are listed, so every child id is smaller than its
//! parent's. Identical diagrams produce identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bdd::{BddError, Manager, NodeRef, VarId};
use crate::codec::{Advisory, BitLayout, CodecError, Dimension, QuantizationGrid};
use crate::compress::{CompressError, GlobalRoot, SelectorMap};

pub const DIAGRAM_VERSION: u32 = 1;
pub const DEFAULT_EMISSION_CAP: usize = 5_000_000;
const MAGIC: &str = ".tablebdd-diagram";

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("not a diagram file (missing `{MAGIC}` header)")]
    NotADiagram,
    #[error("diagram format version {found} is not supported (expected {DIAGRAM_VERSION})")]
    VersionMismatch { found: String },
    #[error("record {record} refers to node {target}, which is never defined")]
    DanglingReference { record: u64, target: u64 },
    #[error("record {record} refers to node {target}, which is not defined before it")]
    CyclicReference { record: u64, target: u64 },
    #[error("diagram file is truncated: {0}")]
    Truncated(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("diagram has no root named `{0}`")]
    MissingRoot(String),
    #[error("grid fingerprint mismatch: diagram built for {found}, expected {expected} (use --force to load anyway)")]
    GridMismatch { expected: String, found: String },
    #[error("diagram has {nodes} nodes, above the emission cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },
    #[error("C compiler failed: {0}")]
    Compiler(String),
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Internal nodes reachable from `roots`, children first, each once.
fn postorder_all(m: &Manager, roots: &[NodeRef]) -> Vec<NodeRef> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &r in roots {
        for f in m.postorder(r) {
            if seen.insert(f.id()) {
                out.push(f);
            }
        }
    }
    out
}

fn renumber(m: &Manager, roots: &[NodeRef]) -> (Vec<NodeRef>, BTreeMap<u32, u64>) {
    let nodes = postorder_all(m, roots);
    let mut ids = BTreeMap::new();
    ids.insert(0, 0);
    ids.insert(1, 1);
    for (k, f) in nodes.iter().enumerate() {
        ids.insert(f.id(), k as u64 + 2);
    }
    (nodes, ids)
}

fn write_header(out: &mut String, m: &Manager) {
    writeln!(out, "{MAGIC} {DIAGRAM_VERSION}").unwrap();
    let names: Vec<&str> = (0..m.num_vars() as u32).map(|v| m.var_name(VarId(v))).collect();
    writeln!(out, ".vars {} {}", names.len(), names.join(" ")).unwrap();
    writeln!(out, ".order {}", m.order_names().join(" ")).unwrap();
    writeln!(out, ".frozen {}", m.frozen_levels()).unwrap();
}

fn write_body(out: &mut String, m: &Manager, roots: &[(&str, NodeRef)]) {
    let handles: Vec<NodeRef> = roots.iter().map(|&(_, r)| r).collect();
    let (nodes, ids) = renumber(m, &handles);
    writeln!(out, ".nodes {}", nodes.len() + 2).unwrap();
    out.push_str("0 FALSE\n1 TRUE\n");
    for f in &nodes {
        let n = m.node(*f).expect("internal node");
        writeln!(
            out,
            "{} {} {} {}",
            ids[&f.id()],
            m.var_name(n.var),
            ids[&n.then_child.id()],
            ids[&n.else_child.id()]
        )
        .unwrap();
    }
    for &(name, r) in roots {
        writeln!(out, ".root {name} {}", ids[&r.id()]).unwrap();
    }
    out.push_str(".end\n");
}

/// Dump of arbitrary named roots (no advisory metadata).
pub fn dump_roots(m: &Manager, roots: &[(&str, NodeRef)]) -> String {
    let mut out = String::new();
    write_header(&mut out, m);
    write_body(&mut out, m, roots);
    out
}

/// Serialized form of a global diagram, its domain and its metadata.
pub fn dump_global(m: &Manager, g: &GlobalRoot) -> String {
    let mut out = String::new();
    write_header(&mut out, m);
    writeln!(out, ".a_prev {}", g.a_prev).unwrap();
    writeln!(out, ".eliminated {}", g.eliminated).unwrap();
    writeln!(out, ".selectors {}", g.selector_map).unwrap();
    writeln!(out, ".grid {}", g.grid.fingerprint()).unwrap();
    for d in Dimension::ALL {
        let values: Vec<String> = g.grid.values(d).iter().map(|v| v.to_string()).collect();
        writeln!(out, ".axis {d} {}", values.join(" ")).unwrap();
    }
    write_body(&mut out, m, &[("global", g.root), ("domain", g.domain)]);
    out
}

pub fn save(m: &Manager, g: &GlobalRoot, path: &Path) -> Result<(), EmitError> {
    std::fs::write(path, dump_global(m, g))?;
    Ok(())
}

/// One file per advisory root, named `<stem>.<ADVISORY>.bdd` in `dir`.
pub fn save_root_dumps(
    m: &Manager,
    roots: &[(Advisory, NodeRef)],
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, EmitError> {
    let mut paths = Vec::new();
    for &(a, r) in roots {
        let path = dir.join(format!("{stem}.{a}.bdd"));
        std::fs::write(&path, dump_roots(m, &[(a.name(), r)]))?;
        paths.push(path);
    }
    Ok(paths)
}

/// A parsed but not yet rebuilt diagram file.
#[derive(Clone, Debug, Default)]
pub struct DiagramFile {
    pub vars: Vec<String>,
    pub order: Vec<String>,
    pub frozen: usize,
    pub meta: BTreeMap<String, String>,
    pub axes: BTreeMap<String, Vec<f64>>,
    /// `(id, variable, then, else)` for internal nodes.
    pub records: Vec<(u64, String, u64, u64)>,
    pub roots: Vec<(String, u64)>,
}

impl DiagramFile {
    pub fn parse(text: &str) -> Result<Self, EmitError> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
        let malformed = |line: usize, message: String| EmitError::Malformed { line, message };

        let (_, first) = lines.next().ok_or(EmitError::NotADiagram)?;
        let version = first.strip_prefix(MAGIC).ok_or(EmitError::NotADiagram)?.trim();
        if version != DIAGRAM_VERSION.to_string() {
            return Err(EmitError::VersionMismatch { found: version.to_string() });
        }

        let mut file = DiagramFile::default();
        let mut expected_records = None;
        let mut constants = 0;
        let mut ended = false;
        for (line, text) in lines {
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            if ended {
                return Err(malformed(line, "content after `.end`".into()));
            }
            let mut words = text.split_whitespace();
            let key = words.next().unwrap();
            let rest: Vec<&str> = words.collect();
            let number = |s: Option<&&str>| -> Result<u64, EmitError> {
                s.and_then(|s| s.parse().ok())
                    .ok_or_else(|| malformed(line, format!("expected a number in `{text}`")))
            };
            match key {
                ".vars" => {
                    let count = number(rest.first())? as usize;
                    file.vars = rest[1..].iter().map(|s| s.to_string()).collect();
                    if file.vars.len() != count {
                        return Err(malformed(line, format!("declares {count} variables but names {}", file.vars.len())));
                    }
                }
                ".order" => file.order = rest.iter().map(|s| s.to_string()).collect(),
                ".frozen" => file.frozen = number(rest.first())? as usize,
                ".axis" => {
                    let (name, values) = rest
                        .split_first()
                        .ok_or_else(|| malformed(line, "axis without a dimension".into()))?;
                    let values = values
                        .iter()
                        .map(|v| v.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| malformed(line, e.to_string()))?;
                    file.axes.insert(name.to_string(), values);
                }
                ".nodes" => expected_records = Some(number(rest.first())?),
                ".root" => {
                    if rest.len() != 2 {
                        return Err(malformed(line, "expected `.root <name> <id>`".into()));
                    }
                    file.roots.push((rest[0].to_string(), number(rest.get(1))?));
                }
                ".end" => ended = true,
                k if k.starts_with('.') => {
                    file.meta.insert(k[1..].to_string(), rest.join(" "));
                }
                _ => {
                    let id = number(Some(&key))?;
                    match (id, rest.as_slice()) {
                        (0, ["FALSE"]) | (1, ["TRUE"]) => constants += 1,
                        (id, [var, t, e]) if id >= 2 => {
                            file.records.push((id, var.to_string(), number(Some(t))?, number(Some(e))?));
                        }
                        _ => return Err(malformed(line, format!("bad node record `{text}`"))),
                    }
                }
            }
        }
        if !ended {
            return Err(EmitError::Truncated("missing `.end`".into()));
        }
        let found = file.records.len() as u64 + constants;
        match expected_records {
            None => return Err(EmitError::Truncated("missing `.nodes` section".into())),
            Some(n) if n != found => {
                return Err(EmitError::Truncated(format!("`.nodes` announces {n} records, found {found}")))
            }
            _ => {}
        }
        if constants != 2 {
            return Err(EmitError::Truncated("constant records missing".into()));
        }
        Ok(file)
    }

    /// Checks that every reference points to an earlier record.
    pub fn check_references(&self) -> Result<(), EmitError> {
        let defined: std::collections::HashSet<u64> =
            self.records.iter().map(|r| r.0).chain([0, 1]).collect();
        let mut seen: std::collections::HashSet<u64> = [0, 1].into_iter().collect();
        for &(id, _, t, e) in &self.records {
            for target in [t, e] {
                if !defined.contains(&target) {
                    return Err(EmitError::DanglingReference { record: id, target });
                }
                if !seen.contains(&target) {
                    return Err(EmitError::CyclicReference { record: id, target });
                }
            }
            if !seen.insert(id) {
                return Err(EmitError::Malformed { line: 0, message: format!("node {id} defined twice") });
            }
        }
        for (name, target) in &self.roots {
            if !defined.contains(target) {
                return Err(EmitError::Malformed {
                    line: 0,
                    message: format!("root `{name}` refers to undefined node {target}"),
                });
            }
        }
        Ok(())
    }

    /// Rebuilds the nodes in a fresh manager with the file's order. Returns
    /// the manager and the named roots (not registered).
    pub fn build(&self) -> Result<(Manager, Vec<(String, NodeRef)>), EmitError> {
        self.check_references()?;
        let var_ids: BTreeMap<&str, VarId> =
            self.vars.iter().enumerate().map(|(k, n)| (n.as_str(), VarId(k as u32))).collect();
        let lookup = |name: &str| {
            var_ids.get(name).copied().ok_or_else(|| EmitError::Malformed {
                line: 0,
                message: format!("unknown variable `{name}`"),
            })
        };
        let order = self.order.iter().map(|n| lookup(n)).collect::<Result<Vec<_>, _>>()?;
        let mut m = Manager::with_order(self.vars.clone(), &order)?;
        if self.frozen > 0 {
            m.freeze(&order[..self.frozen])?;
        }
        let mut nodes: BTreeMap<u64, NodeRef> = [(0, NodeRef::FALSE), (1, NodeRef::TRUE)].into();
        for (id, var, t, e) in &self.records {
            let v = m.mk_var(lookup(var)?)?;
            let f = m.ite(v, nodes[t], nodes[e]);
            nodes.insert(*id, f);
        }
        let roots = self.roots.iter().map(|(n, id)| (n.clone(), nodes[id])).collect();
        Ok((m, roots))
    }

    fn root(&self, roots: &[(String, NodeRef)], name: &str) -> Result<NodeRef, EmitError> {
        roots
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, r)| r)
            .ok_or_else(|| EmitError::MissingRoot(name.to_string()))
    }

    fn meta(&self, key: &str) -> Result<&str, EmitError> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| EmitError::Truncated(format!("missing `.{key}` header")))
    }

    fn grid(&self) -> Result<QuantizationGrid, EmitError> {
        let mut axes: [Vec<f64>; 6] = Default::default();
        for d in Dimension::ALL {
            axes[d.index()] = self
                .axes
                .get(d.name())
                .cloned()
                .ok_or_else(|| EmitError::Truncated(format!("missing `.axis {d}`")))?;
        }
        Ok(QuantizationGrid::from_axes(axes, true)?)
    }
}

/// A loaded global diagram.
#[derive(Debug)]
pub struct LoadedDiagram {
    pub manager: Manager,
    pub global: GlobalRoot,
    pub warnings: Vec<String>,
}

/// Parses and rebuilds a global diagram. When `expected_grid` is given its
/// fingerprint must match the file's, unless `force` turns the mismatch into
/// a warning.
pub fn load_global_str(
    text: &str,
    expected_grid: Option<&QuantizationGrid>,
    force: bool,
) -> Result<LoadedDiagram, EmitError> {
    let file = DiagramFile::parse(text)?;
    let grid = file.grid()?;
    let recorded = file.meta("grid")?.to_string();
    let mut warnings = Vec::new();
    if recorded != grid.fingerprint() {
        return Err(EmitError::Malformed {
            line: 0,
            message: "grid fingerprint does not match the recorded axes".into(),
        });
    }
    if let Some(expected) = expected_grid {
        if expected.fingerprint() != recorded {
            let err = EmitError::GridMismatch { expected: expected.fingerprint(), found: recorded };
            if !force {
                return Err(err);
            }
            warnings.push(err.to_string());
        }
    }
    let parse_advisory = |key: &str| -> Result<Advisory, EmitError> {
        Ok(file.meta(key)?.parse::<Advisory>()?)
    };
    let a_prev = parse_advisory("a_prev")?;
    let eliminated = parse_advisory("eliminated")?;
    let mut entries = Vec::new();
    for item in file.meta("selectors")?.split_whitespace() {
        let bad = || EmitError::Malformed { line: 0, message: format!("bad selector entry `{item}`") };
        let (a, p) = item.split_once(':').ok_or_else(bad)?;
        let pattern = match p {
            "11" => (true, true),
            "10" => (true, false),
            "01" => (false, true),
            "00" => (false, false),
            _ => return Err(bad()),
        };
        entries.push((a.parse::<Advisory>()?, pattern));
    }
    let selector_map = SelectorMap::new(entries)?;

    if file.vars != BitLayout::standard().var_names() {
        return Err(EmitError::Malformed {
            line: 0,
            message: "variables do not match the standard state layout".into(),
        });
    }
    let (mut m, roots) = file.build()?;
    let root = file.root(&roots, "global")?;
    let domain = file.root(&roots, "domain")?;
    m.register_root(root);
    m.register_root(domain);
    Ok(LoadedDiagram {
        manager: m,
        global: GlobalRoot { root, selector_map, eliminated, a_prev, domain, grid },
        warnings,
    })
}

pub fn load(
    path: &Path,
    expected_grid: Option<&QuantizationGrid>,
    force: bool,
) -> Result<LoadedDiagram, EmitError> {
    load_global_str(&std::fs::read_to_string(path)?, expected_grid, force)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub enum EmitStyle {
    /// One labeled branch per node.
    #[default]
    Threaded,
    /// Constant node arrays and a small interpreter loop.
    Table,
}

impl std::str::FromStr for EmitStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "threaded" => Ok(EmitStyle::Threaded),
            "table" => Ok(EmitStyle::Table),
            _ => Err(format!("unknown emission style `{s}` (expected threaded or table)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmitOptions {
    pub style: EmitStyle,
    /// Prefix of every emitted C identifier.
    pub prefix: String,
    pub cap: usize,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { style: EmitStyle::Threaded, prefix: "tbdd".into(), cap: DEFAULT_EMISSION_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmittedEvaluator {
    pub source: String,
    pub node_count: usize,
    /// Hex digest of the diagram the source was generated from.
    pub diagram_hash: String,
}

fn short_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// C source for `int <prefix>_eval(unsigned long bits)`, where bit `v` of
/// `bits` is variable `v` of `m`.
pub fn emit_function(m: &Manager, f: NodeRef, opts: &EmitOptions) -> Result<EmittedEvaluator, EmitError> {
    let dump = dump_roots(m, &[("f", f)]);
    emit_core(m, f, opts, &short_hash(&dump), &[])
}

/// C source evaluating a global diagram, with a state-level wrapper that
/// Gray-encodes indices inline and an advisory function probing the four
/// selector settings.
pub fn emit_evaluator(m: &Manager, g: &GlobalRoot, opts: &EmitOptions) -> Result<EmittedEvaluator, EmitError> {
    let hash = short_hash(&dump_global(m, g));
    let meta = [
        format!("previous advisory: {}", g.a_prev),
        format!("selectors: {}", g.selector_map),
        format!("eliminated: {}", g.eliminated),
        format!("grid: {}", g.grid.fingerprint()),
    ];
    let mut out = emit_core(m, g.root, opts, &hash, &meta)?;
    out.source.push_str(&state_wrappers(g, &opts.prefix));
    Ok(out)
}

fn emit_core(
    m: &Manager,
    f: NodeRef,
    opts: &EmitOptions,
    hash: &str,
    meta: &[String],
) -> Result<EmittedEvaluator, EmitError> {
    let (nodes, ids) = renumber(m, &[f]);
    if nodes.len() > opts.cap {
        return Err(EmitError::TooManyNodes { nodes: nodes.len(), cap: opts.cap });
    }
    let p = &opts.prefix;
    let mut s = String::with_capacity(64 * nodes.len() + 4096);
    s.push_str("/*\n * Generated decision diagram evaluator. Do not edit.\n");
    writeln!(s, " * diagram: {hash}").unwrap();
    writeln!(s, " * nodes: {}", nodes.len()).unwrap();
    writeln!(s, " * style: {}", match opts.style { EmitStyle::Threaded => "threaded", EmitStyle::Table => "table" }).unwrap();
    for line in meta {
        writeln!(s, " * {line}").unwrap();
    }
    s.push_str(" * input: bit v of the argument is variable v\n */\n\n");

    writeln!(s, "#define {}_NUM_VARS {}", p.to_uppercase(), m.num_vars()).unwrap();
    writeln!(s, "#define {}_NUM_NODES {}UL\n", p.to_uppercase(), nodes.len()).unwrap();
    writeln!(s, "/* variable order, top level first */").unwrap();
    writeln!(s, "static const unsigned char {p}_order[{}] = {{", m.num_vars().max(1)).unwrap();
    let order: Vec<String> = m.order().iter().map(|v| v.0.to_string()).collect();
    for chunk in order.chunks(16) {
        writeln!(s, "    {},", chunk.join(", ")).unwrap();
    }
    s.push_str("};\n");
    writeln!(s, "static const char *const {p}_var_names[{}] = {{", m.num_vars().max(1)).unwrap();
    for v in 0..m.num_vars() as u32 {
        writeln!(s, "    \"{}\",", m.var_name(VarId(v))).unwrap();
    }
    s.push_str("};\n\n");
    writeln!(s, "const unsigned char *{p}_variable_order(void) {{ return {p}_order; }}").unwrap();
    writeln!(s, "const char *{p}_variable_name(int v) {{ return {p}_var_names[v]; }}\n").unwrap();

    match opts.style {
        EmitStyle::Threaded => {
            writeln!(s, "int {p}_eval(unsigned long x)\n{{").unwrap();
            let label = |id: u64| match id {
                0 => "t0".to_string(),
                1 => "t1".to_string(),
                id => format!("n{id}"),
            };
            writeln!(s, "    goto {};", label(ids[&f.id()])).unwrap();
            let mut reach_false = f.is_false();
            let mut reach_true = f.is_true();
            // Root first, so the common path falls through downwards.
            for g in nodes.iter().rev() {
                let n = m.node(*g).unwrap();
                let (t, e) = (ids[&n.then_child.id()], ids[&n.else_child.id()]);
                reach_false |= t == 0 || e == 0;
                reach_true |= t == 1 || e == 1;
                writeln!(
                    s,
                    "{}: if (x & 0x{:x}UL) goto {}; else goto {}; /* {} */",
                    label(ids[&g.id()]),
                    1u64 << n.var.0,
                    label(t),
                    label(e),
                    m.var_name(n.var)
                )
                .unwrap();
            }
            if reach_true {
                s.push_str("t1: return 1;\n");
            }
            if reach_false {
                s.push_str("t0: return 0;\n");
            }
            s.push_str("}\n");
        }
        EmitStyle::Table => {
            let len = nodes.len() + 2;
            let mut vars = vec![0u32; len];
            let mut hi = vec![0u64; len];
            let mut lo = vec![0u64; len];
            for g in &nodes {
                let n = m.node(*g).unwrap();
                let k = ids[&g.id()] as usize;
                vars[k] = n.var.0;
                hi[k] = ids[&n.then_child.id()];
                lo[k] = ids[&n.else_child.id()];
            }
            write_array(&mut s, "unsigned char", &format!("{p}_var"), &vars);
            write_array(&mut s, "unsigned long", &format!("{p}_hi"), &hi);
            write_array(&mut s, "unsigned long", &format!("{p}_lo"), &lo);
            writeln!(s, "int {p}_eval(unsigned long x)\n{{").unwrap();
            writeln!(s, "    unsigned long n = {}UL;", ids[&f.id()]).unwrap();
            s.push_str("    while (n > 1UL) {\n");
            writeln!(s, "        if ((x >> {p}_var[n]) & 1UL)").unwrap();
            writeln!(s, "            n = {p}_hi[n];").unwrap();
            s.push_str("        else\n");
            writeln!(s, "            n = {p}_lo[n];").unwrap();
            s.push_str("    }\n    return (int) n;\n}\n");
        }
    }
    Ok(EmittedEvaluator { source: s, node_count: nodes.len(), diagram_hash: hash.to_string() })
}

fn write_array<T: std::fmt::Display>(s: &mut String, ty: &str, name: &str, values: &[T]) {
    writeln!(s, "static const {ty} {name}[{}] = {{", values.len()).unwrap();
    for chunk in values.chunks(16) {
        let items: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        writeln!(s, "    {},", items.join(", ")).unwrap();
    }
    s.push_str("};\n\n");
}

fn state_wrappers(g: &GlobalRoot, p: &str) -> String {
    let layout = BitLayout::standard();
    let mut s = String::new();
    s.push_str("\n/* advisory codes */\n");
    for a in Advisory::ALL {
        writeln!(s, "#define {}_{} {}", p.to_uppercase(), a, a.code()).unwrap();
    }
    writeln!(
        s,
        "\nstatic unsigned long {p}_gray_bits(unsigned int i, int width, int offset)\n{{\n    \
         unsigned long code = (unsigned long) (i ^ (i >> 1));\n    unsigned long out = 0UL;\n    \
         int b;\n    for (b = 0; b < width; b++)\n        \
         out |= ((code >> (width - 1 - b)) & 1UL) << (offset + b);\n    return out;\n}}\n"
    )
    .unwrap();
    let params = "unsigned int tau, unsigned int rho, unsigned int theta, unsigned int psi, unsigned int v_own, unsigned int v_int";
    writeln!(s, "int {p}_eval_state(int bdd1, int bdd0, {params})\n{{").unwrap();
    writeln!(
        s,
        "    unsigned long x = (bdd1 ? 1UL << {} : 0UL) | (bdd0 ? 1UL << {} : 0UL);",
        layout.bdd1().0,
        layout.bdd0().0
    )
    .unwrap();
    let args = ["tau", "rho", "theta", "psi", "v_own", "v_int"];
    for (d, arg) in Dimension::ALL.iter().zip(args) {
        writeln!(s, "    x |= {p}_gray_bits({arg}, {}, {});", layout.width(*d), layout.var(*d, 0).0).unwrap();
    }
    writeln!(s, "    return {p}_eval(x);\n}}\n").unwrap();
    writeln!(s, "/* advisory issued in a state; probes the kept advisories in turn */").unwrap();
    writeln!(s, "int {p}_advisory({params})\n{{").unwrap();
    for &(a, (b1, b0)) in g.selector_map.entries() {
        writeln!(
            s,
            "    if ({p}_eval_state({}, {}, tau, rho, theta, psi, v_own, v_int))\n        return {}_{};",
            b1 as u8,
            b0 as u8,
            p.to_uppercase(),
            a
        )
        .unwrap();
    }
    writeln!(s, "    return {}_{};\n}}", p.to_uppercase(), g.eliminated).unwrap();
    s
}

/// Test and benchmark driver for an emitted evaluator with prefix `prefix`.
///
/// Reads commands from stdin, one per line:
/// `b <hex bits>` prints `<prefix>_eval` as `0`/`1`;
/// `s <six indices>` prints the advisory code;
/// `t <six indices>` does the same and times the call.
/// Timed runs end with a line `time <min> <max> <mean> <count>` in
/// microseconds once stdin is exhausted.
pub fn emit_driver(prefix: &str) -> String {
    let p = prefix;
    format!(
        r#"#define _POSIX_C_SOURCE 199309L
#include <stdio.h>
#include <time.h>

int {p}_eval(unsigned long x);
int {p}_advisory(unsigned int tau, unsigned int rho, unsigned int theta, unsigned int psi, unsigned int v_own, unsigned int v_int);

static double now_us(void)
{{
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return ts.tv_sec * 1e6 + ts.tv_nsec / 1e3;
}}

int main(void)
{{
    char cmd[2];
    unsigned long bits;
    unsigned int s[6];
    double t_min = 1e300, t_max = 0.0, t_sum = 0.0;
    unsigned long timed = 0;
    while (scanf("%1s", cmd) == 1) {{
        if (cmd[0] == 'b') {{
            if (scanf("%lx", &bits) != 1) return 2;
            putchar('0' + {p}_eval(bits));
        }} else if (cmd[0] == 's' || cmd[0] == 't') {{
            double t0, dt;
            int a;
            if (scanf("%u %u %u %u %u %u", &s[0], &s[1], &s[2], &s[3], &s[4], &s[5]) != 6) return 2;
            t0 = now_us();
            a = {p}_advisory(s[0], s[1], s[2], s[3], s[4], s[5]);
            dt = now_us() - t0;
            putchar('0' + a);
            if (cmd[0] == 't') {{
                if (dt < t_min) t_min = dt;
                if (dt > t_max) t_max = dt;
                t_sum += dt;
                timed++;
            }}
        }} else {{
            return 2;
        }}
    }}
    putchar('\n');
    if (timed > 0)
        printf("time %.6f %.6f %.6f %lu\n", t_min, t_max, t_sum / timed, timed);
    return 0;
}}
"#
    )
}

/// Driver for [`emit_function`] sources (bits mode only).
pub fn emit_bits_driver(prefix: &str) -> String {
    format!(
        r#"#include <stdio.h>

int {prefix}_eval(unsigned long x);

int main(void)
{{
    unsigned long bits;
    while (scanf("%lx", &bits) == 1)
        putchar('0' + {prefix}_eval(bits));
    putchar('\n');
    return 0;
}}
"#
    )
}

/// The C compiler named by `CC`, or `cc`, if it runs.
pub fn find_c_compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let ok = Command::new(&cc)
        .arg("--version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    ok.then_some(cc)
}

/// Compiles C sources into an executable at `out`.
pub fn compile_c(cc: &str, sources: &[&Path], out: &Path, opt_level: &str) -> Result<(), EmitError> {
    let output = Command::new(cc)
        .arg(opt_level)
        .args(sources)
        .arg("-o")
        .arg(out)
        .output()?;
    if !output.status.success() {
        return Err(EmitError::Compiler(String::from_utf8_lossy(&output.stderr).into_owned()));
    }
    Ok(())
}

/// Runs `exe` with `input` on stdin and returns its stdout.
pub fn run_driver(exe: &Path, input: &[u8]) -> Result<String, EmitError> {
    let mut child = Command::new(exe)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut stdin = child.stdin.take().unwrap();
    let data = input.to_vec();
    let writer = std::thread::spawn(move || stdin.write_all(&data));
    let output = child.wait_with_output()?;
    writer.join().expect("stdin writer")?;
    if !output.status.success() {
        return Err(EmitError::Compiler(format!(
            "driver exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr)
        )));
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

#[cfg(test)]
mod tests;
