//! Grid benchmark: fat-tree substrates against Erdős–Rényi requests.
//!
//! Each grid cell expands to every combination of its `f`, `r`, `p` and
//! `seeds` values, in that nesting order. Instance `(f, r, p, seed)` pairs
//! `fat_tree(f, seed)` with `er_request(r, p, seed)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer};
use thiserror::Error;

use crate::dp::{solve, SolveError, SolveOptions, Storage};
use crate::format::instance_to_json;
use crate::generators::{er_request, fat_tree, GenError, DEFAULT_MAX_RESAMPLE};
use crate::model::{Instance, Outcome};

/// First line of every results file.
pub const CSV_VERSION_LINE: &str = "# treevne-bench-csv v1";

pub const CSV_COLUMNS: [&str; 9] = [
    "f",
    "r",
    "p",
    "seed",
    "status",
    "cost",
    "solve_ms",
    "table_entries",
    "inner_iterations",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Gen(#[from] GenError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

// Untagged enums lose number precision info under arbitrary_precision.
impl<'de, T: DeserializeOwned> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        let out = if value.is_array() {
            serde_json::from_value(value).map(OneOrMany::Many)
        } else {
            serde_json::from_value(value).map(OneOrMany::One)
        };
        out.map_err(serde::de::Error::custom)
    }
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub f: OneOrMany<usize>,
    pub r: OneOrMany<usize>,
    pub p: OneOrMany<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub grid: Vec<GridCell>,
    /// Per-instance budget; none means unlimited.
    #[serde(default)]
    pub timeout_ms: Option<u64>,
    #[serde(default = "one")]
    pub parallelism: usize,
}

fn one() -> usize {
    1
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<BenchConfig, BenchError> {
        let config: BenchConfig =
            serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        if config.parallelism == 0 {
            return Err(BenchError::Config("parallelism must be at least 1".into()));
        }
        Ok(config)
    }

    pub fn cases(&self) -> Vec<BenchCase> {
        let mut out = Vec::new();
        for cell in &self.grid {
            for f in cell.f.values() {
                for r in cell.r.values() {
                    for p in cell.p.values() {
                        for &seed in &cell.seeds {
                            out.push(BenchCase { f, r, p, seed });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchCase {
    pub f: usize,
    pub r: usize,
    pub p: f64,
    pub seed: u64,
}

impl BenchCase {
    pub fn instance(&self) -> Result<Instance, GenError> {
        let substrate = fat_tree(self.f, self.seed)?;
        let request = er_request(self.r, self.p, self.seed, DEFAULT_MAX_RESAMPLE)?;
        Ok(Instance::new(substrate, request)?)
    }

    pub fn file_name(&self) -> String {
        format!("f{}_r{}_p{}_s{}.json", self.f, self.r, self.p, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchStatus {
    Optimal,
    Infeasible,
    Timeout,
    Error,
}

impl BenchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchStatus::Optimal => "optimal",
            BenchStatus::Infeasible => "infeasible",
            BenchStatus::Timeout => "timeout",
            BenchStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub case: BenchCase,
    pub status: BenchStatus,
    pub cost: Option<String>,
    pub elapsed: Duration,
    pub table_entries: u64,
    pub inner_iterations: u64,
}

impl BenchRow {
    fn record(&self) -> [String; 9] {
        [
            self.case.f.to_string(),
            self.case.r.to_string(),
            self.case.p.to_string(),
            self.case.seed.to_string(),
            self.status.as_str().to_string(),
            self.cost.clone().unwrap_or_default(),
            format!("{:.3}", self.elapsed.as_secs_f64() * 1e3),
            self.table_entries.to_string(),
            self.inner_iterations.to_string(),
        ]
    }
}

/// Generates and solves one case; failures become rows, not errors.
pub fn run_case(case: BenchCase, timeout: Option<Duration>, storage: Storage) -> BenchRow {
    let mut row = BenchRow {
        case,
        status: BenchStatus::Error,
        cost: None,
        elapsed: Duration::ZERO,
        table_entries: 0,
        inner_iterations: 0,
    };
    let Ok(inst) = case.instance() else {
        return row;
    };
    let start = Instant::now();
    let options = SolveOptions {
        deadline: timeout.map(|t| start + t),
        storage,
        ..SolveOptions::default()
    };
    match solve(&inst.substrate, &inst.request, &options) {
        Ok(res) => {
            row.elapsed = res.stats.elapsed;
            row.table_entries = res.stats.table_entries;
            row.inner_iterations = res.stats.inner_iterations;
            match res.outcome {
                Outcome::Optimal { cost, .. } => {
                    row.status = BenchStatus::Optimal;
                    row.cost = Some(cost.to_string());
                }
                Outcome::Infeasible => row.status = BenchStatus::Infeasible,
            }
        }
        Err(SolveError::Timeout) => {
            row.status = BenchStatus::Timeout;
            row.elapsed = start.elapsed();
        }
        Err(_) => row.elapsed = start.elapsed(),
    }
    row
}

/// Runs every case of `config`, writing CSV rows to `out` in case order as
/// soon as each prefix of the grid is complete.
pub fn run_bench<W: Write>(
    config: &BenchConfig,
    storage: Storage,
    out: W,
) -> Result<Vec<BenchRow>, BenchError> {
    let cases = config.cases();
    let timeout = config.timeout_ms.map(Duration::from_millis);
    let mut header = out;
    writeln!(header, "{CSV_VERSION_LINE}")?;
    let mut csv = csv::Writer::from_writer(header);
    csv.write_record(CSV_COLUMNS)?;
    csv.flush()?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, BenchRow)>();
    let mut rows = Vec::with_capacity(cases.len());
    std::thread::scope(|scope| -> Result<(), BenchError> {
        for _ in 0..config.parallelism.min(cases.len().max(1)) {
            let tx = tx.clone();
            let (next, cases) = (&next, &cases);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&case) = cases.get(i) else { break };
                if tx.send((i, run_case(case, timeout, storage))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&rows.len()) {
                csv.write_record(row.record())?;
                csv.flush()?;
                rows.push(row);
            }
        }
        Ok(())
    })?;
    Ok(rows)
}

/// Writes one instance document per case into `dir`.
pub fn materialize(config: &BenchConfig, dir: &Path) -> Result<usize, BenchError> {
    std::fs::create_dir_all(dir)?;
    let cases = config.cases();
    for case in &cases {
        std::fs::write(
            dir.join(case.file_name()),
            instance_to_json(&case.instance()?),
        )?;
    }
    Ok(cases.len())
}
