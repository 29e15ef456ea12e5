//! Verification suites for the local models, run in batch.
//!
//! A suite is a list of parts. Every check a part records carries the
//! acceptance criterion it belongs to (if any), so the same code serves
//! `verify <suite>` and the acceptance test.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

mod suites;

pub const SCHEMA: &str = "nslab-verify-manifest";
pub const SCHEMA_VERSION: u32 = 1;

pub const SUITES: [&str; 7] = ["forms", "local-model", "holo", "sections", "estimates", "pencil", "monodromy"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the per-suite epsilon sweeps when non-empty.
    pub epsilon: Vec<f64>,
    /// Grid sizes by name; "default" scales every grid that has no own entry.
    pub grid: BTreeMap<String, usize>,
    /// Tolerance overrides by check name.
    pub tol: BTreeMap<String, f64>,
    pub suite: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: vec![],
            grid: BTreeMap::new(),
            tol: BTreeMap::new(),
            suite: None,
            out: PathBuf::from("verify-out"),
            seed: 20240521,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        for &e in &self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                bail!("epsilon {e} outside (0, 1)");
            }
        }
        for (k, &n) in &self.grid {
            if n < 8 {
                bail!("grid '{k}' = {n}, must be at least 8");
            }
        }
        for (k, &t) in &self.tol {
            if !(t > 0.0) {
                bail!("tolerance '{k}' = {t} must be positive");
            }
        }
        Ok(())
    }

    pub fn eps_or(&self, defaults: &[f64]) -> Vec<f64> {
        if self.epsilon.is_empty() {
            defaults.to_vec()
        } else {
            self.epsilon.clone()
        }
    }

    pub fn grid(&self, name: &str, default: usize) -> usize {
        self.grid.get(name).or_else(|| self.grid.get("default")).copied().unwrap_or(default)
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tol.get(name).copied().unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub criterion: Option<u8>,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    /// Floats with 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub scan: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, f64>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        SuiteReport { suite: suite.to_string(), ..Default::default() }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push(&mut self, name: &str, criterion: Option<u8>, value: f64, bound: f64, pass: bool) {
        self.checks.push(Check { name: name.to_string(), criterion, value, bound, pass });
    }

    /// value < bound; NaN fails.
    pub fn below(&mut self, name: &str, criterion: Option<u8>, value: f64, bound: f64) {
        self.push(name, criterion, value, bound, value < bound);
    }

    pub fn flag(&mut self, name: &str, criterion: Option<u8>, ok: bool) {
        self.push(name, criterion, if ok { 1.0 } else { 0.0 }, 1.0, ok);
    }

    pub fn constant(&mut self, name: &str, v: f64) {
        self.constants.insert(name.to_string(), v);
    }

    pub fn table(&mut self, scan: &str, columns: &[&str], rows: Vec<Vec<Cell>>) {
        self.tables.push(Table {
            scan: scan.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
        });
    }

    fn merge(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
        self.constants.extend(other.constants);
        self.tables.extend(other.tables);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

pub(crate) type PartFn = fn(&RunConfig, &mut SuiteReport) -> Result<()>;

pub(crate) struct Part {
    pub criteria: &'static [u8],
    pub run: PartFn,
}

pub fn is_suite(name: &str) -> bool {
    name == "all" || SUITES.contains(&name)
}

fn parts(name: &str) -> &'static [Part] {
    match name {
        "forms" => suites::forms::PARTS,
        "local-model" => suites::local::PARTS,
        "holo" => suites::holo::PARTS,
        "sections" => suites::sections::PARTS,
        "estimates" => suites::estimates::PARTS,
        "pencil" => suites::pencil::PARTS,
        "monodromy" => suites::monodromy::PARTS,
        _ => &[],
    }
}

/// Runs one named suite (not "all").
pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteReport> {
    if !SUITES.contains(&name) {
        bail!("unknown suite '{name}'");
    }
    cfg.validate()?;
    let mut rep = SuiteReport::new(name);
    for p in parts(name) {
        (p.run)(cfg, &mut rep)?;
    }
    Ok(rep)
}

/// Runs every part that contributes to acceptance criterion n and keeps only its checks.
pub fn run_criterion(n: u8, cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let mut out = SuiteReport::new(&format!("criterion-{n}"));
    for s in SUITES {
        for p in parts(s).iter().filter(|p| p.criteria.contains(&n)) {
            let mut rep = SuiteReport::new(s);
            (p.run)(cfg, &mut rep)?;
            rep.checks.retain(|c| c.criterion == Some(n));
            out.merge(rep);
        }
    }
    if out.checks.is_empty() {
        bail!("no checks for criterion {n}");
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, f64>,
    pub csv: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub pass: bool,
    pub suites: Vec<SuiteEntry>,
}

pub fn write_table(dir: &Path, suite: &str, t: &Table) -> Result<String> {
    let file = format!("{}_{}.csv", suite, t.scan);
    let mut w = csv::Writer::from_path(dir.join(&file)).with_context(|| format!("writing {file}"))?;
    w.write_record(&t.columns)?;
    for row in &t.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(file)
}

/// Runs `name` ("all" for every suite), writes manifest.json and the CSV scans into cfg.out.
pub fn run_and_write(name: &str, cfg: &RunConfig) -> Result<Manifest> {
    if !is_suite(name) {
        bail!("unknown suite '{name}'");
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let names: Vec<&str> = if name == "all" { SUITES.to_vec() } else { vec![name] };
    let mut suites = Vec::new();
    for s in names {
        let rep = run_suite(s, cfg)?;
        let csv = rep.tables.iter().map(|t| write_table(&cfg.out, s, t)).collect::<Result<Vec<_>>>()?;
        suites.push(SuiteEntry { suite: s.to_string(), pass: rep.pass(), checks: rep.checks, constants: rep.constants, csv });
    }
    let m = Manifest {
        schema: SCHEMA.to_string(),
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        pass: suites.iter().all(|s| s.pass),
        suites,
    };
    let path = cfg.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(m)
}
