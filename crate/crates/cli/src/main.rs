mod error;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use treevne_core::bench::{materialize, run_bench, BenchConfig};
use treevne_core::format::{
    instance_to_json, mapping_to_json, parse_instance, parse_mapping, pretty, TraceDocument,
    TraceStage,
};
use treevne_core::generators::{
    er_request, fat_tree, partition_gadget, random_instance, RandomParams, DEFAULT_MAX_RESAMPLE,
};
use treevne_core::lp::export_lp;
use treevne_core::oracle::{brute_force_with_budget, DEFAULT_BUDGET};
use treevne_core::transform::{LeafPolicy, Pipeline};
use treevne_core::validation::check_valid;
use treevne_core::{
    check_feasible, mapping_cost, solve, Instance, Request, SolveOptions, SolveResult, Storage,
    Substrate,
};

use error::Failure;

/// Exact minimum-cost embedding of virtual networks into tree substrates.
#[derive(Debug, Parser)]
#[command(name = "treevne", version)]
struct Cli {
    /// Suppress status output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Report errors as one JSON object per line.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate instances.
    #[command(subcommand)]
    Gen(Gen),
    /// Solve exactly with the tree dynamic program.
    Solve(SolveArgs),
    /// Solve by exhaustive search (small instances only).
    Oracle(OracleArgs),
    /// Check a mapping against an instance.
    Validate(ValidateArgs),
    /// Apply the substrate rewrites and write the result with its trace.
    Transform(TransformArgs),
    /// Write the integer program in LP format.
    ExportLp(ExportArgs),
    /// Run a benchmark grid and write CSV rows.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
enum Gen {
    /// Fat-tree substrate (empty request).
    FatTree {
        #[arg(long)]
        ports: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Erdős–Rényi request (empty substrate).
    Request {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        prob: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_RESAMPLE)]
        max_resample: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fat-tree substrate with an Erdős–Rényi request, both from one seed.
    Instance {
        #[arg(long)]
        ports: usize,
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        prob: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_RESAMPLE)]
        max_resample: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Small random tree with a random request.
    Random {
        #[arg(long)]
        substrate_nodes: usize,
        #[arg(long)]
        request_nodes: usize,
        #[arg(long, default_value_t = 0.5)]
        prob: f64,
        #[arg(long, default_value_t = 1)]
        tau: usize,
        #[arg(long, default_value_t = 0.0)]
        one_way_prob: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-host gadget that is feasible iff the items split evenly.
    Partition {
        #[arg(long, value_delimiter = ',', required = true)]
        set: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write every instance of a benchmark grid into a directory.
    BenchSuite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Mapping document, written only when a solution exists.
    #[arg(long)]
    out: PathBuf,
    /// Substrate node id to root the tree at.
    #[arg(long)]
    root: Option<String>,
    /// Keep only finite table entries.
    #[arg(long)]
    sparse: bool,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Append a statistics row to this CSV file.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Largest product of per-node candidate counts to search.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    mapping: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    root: Option<String>,
    /// Give every inner node a leaf, not only those with capacity.
    #[arg(long)]
    all_internal: bool,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sparse: bool,
}

const STATS_HEADER: [&str; 9] = [
    "instance",
    "r",
    "s",
    "transformed_s",
    "table_entries",
    "inner_iterations",
    "solve_ms",
    "status",
    "cost",
];

const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::from(e).in_file(path))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::from(e).in_file(path))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    parse_instance(&read(path)?).map_err(|e| Failure::from(e).in_file(path))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write(path, text),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn storage(sparse: bool) -> Storage {
    if sparse {
        Storage::Sparse
    } else {
        Storage::Dense
    }
}

fn find_root(substrate: &Substrate, id: Option<&str>) -> Result<Option<usize>, Failure> {
    id.map(|id| substrate.require_node(id).map_err(Failure::from))
        .transpose()
}

fn append_stats(
    path: &Path,
    instance: &Path,
    inst: &Instance,
    res: &SolveResult,
) -> Result<(), Failure> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Failure::from(e).in_file(path))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(STATS_HEADER)?;
    }
    let name = instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    w.write_record([
        name,
        inst.request.node_count().to_string(),
        inst.substrate.node_count().to_string(),
        res.stats.transformed_nodes.to_string(),
        res.stats.table_entries.to_string(),
        res.stats.inner_iterations.to_string(),
        format!("{:.3}", res.stats.elapsed.as_secs_f64() * 1e3),
        res.status().as_str().to_string(),
        res.cost().map(|c| c.to_string()).unwrap_or_default(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Writes the mapping (if any), the stats row, and a status line.
fn finish_solve(
    cli: &Cli,
    instance: &Path,
    inst: &Instance,
    res: &SolveResult,
    out: &Path,
    stats: Option<&Path>,
) -> Result<u8, Failure> {
    if let (Some(m), Some(cost)) = (res.mapping(), res.cost()) {
        write(
            out,
            &mapping_to_json(&inst.substrate, &inst.request, m, cost),
        )?;
    }
    if let Some(path) = stats {
        append_stats(path, instance, inst, res)?;
    }
    if !cli.quiet {
        match res.cost() {
            Some(cost) => println!("optimal {cost}"),
            None => println!("infeasible"),
        }
    }
    Ok(0)
}

fn run_gen(cli: &Cli, cmd: &Gen) -> Result<u8, Failure> {
    match cmd {
        Gen::FatTree { ports, seed, out } => {
            let inst = Instance::new(fat_tree(*ports, *seed)?, Request::new(1))?;
            emit(out.as_deref(), &instance_to_json(&inst))?;
        }
        Gen::Request {
            nodes,
            prob,
            seed,
            max_resample,
            out,
        } => {
            let inst = Instance::new(
                Substrate::new(1),
                er_request(*nodes, *prob, *seed, *max_resample)?,
            )?;
            emit(out.as_deref(), &instance_to_json(&inst))?;
        }
        Gen::Instance {
            ports,
            nodes,
            prob,
            seed,
            max_resample,
            out,
        } => {
            let inst = Instance::new(
                fat_tree(*ports, *seed)?,
                er_request(*nodes, *prob, *seed, *max_resample)?,
            )?;
            emit(out.as_deref(), &instance_to_json(&inst))?;
        }
        Gen::Random {
            substrate_nodes,
            request_nodes,
            prob,
            tau,
            one_way_prob,
            seed,
            out,
        } => {
            let params = RandomParams {
                substrate_nodes: *substrate_nodes,
                request_nodes: *request_nodes,
                edge_prob: *prob,
                tau: *tau,
                one_way_prob: *one_way_prob,
            };
            emit(
                out.as_deref(),
                &instance_to_json(&random_instance(&params, *seed)?),
            )?;
        }
        Gen::Partition { set, out } => {
            emit(out.as_deref(), &instance_to_json(&partition_gadget(set)?))?;
        }
        Gen::BenchSuite { config, out_dir } => {
            let config =
                BenchConfig::parse(&read(config)?).map_err(|e| Failure::from(e).in_file(config))?;
            let n = materialize(&config, out_dir)?;
            if !cli.quiet {
                println!("wrote {n} instances to {}", out_dir.display());
            }
        }
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Gen(g) => run_gen(cli, g),
        Command::Solve(a) => {
            let inst = load_instance(&a.instance)?;
            let options = SolveOptions {
                root: find_root(&inst.substrate, a.root.as_deref())?,
                storage: storage(a.sparse),
                deadline: a
                    .timeout_ms
                    .map(|ms| Instant::now() + Duration::from_millis(ms)),
                ..SolveOptions::default()
            };
            let res = solve(&inst.substrate, &inst.request, &options)?;
            finish_solve(cli, &a.instance, &inst, &res, &a.out, a.stats.as_deref())
        }
        Command::Oracle(a) => {
            let inst = load_instance(&a.instance)?;
            let res = brute_force_with_budget(&inst.substrate, &inst.request, a.budget)?;
            finish_solve(cli, &a.instance, &inst, &res, &a.out, a.stats.as_deref())
        }
        Command::Validate(a) => validate(cli, a),
        Command::Transform(a) => {
            let inst = load_instance(&a.instance)?;
            let root = find_root(&inst.substrate, a.root.as_deref())?.unwrap_or(0);
            let policy = if a.all_internal {
                LeafPolicy::AllInternal
            } else {
                LeafPolicy::NonzeroCapacity
            };
            let p = Pipeline::run(&inst.substrate, root, policy)?;
            let names = ["bidirectionalize", "leafify", "binarize", "pad_full_binary"];
            let doc = TraceDocument {
                root: inst.substrate.node_id(root).to_string(),
                stages: names
                    .iter()
                    .zip(p.traces)
                    .map(|(name, trace)| TraceStage {
                        name: name.to_string(),
                        trace,
                    })
                    .collect(),
            };
            write(
                &a.out,
                &instance_to_json(&Instance::new(p.substrate, inst.request)?),
            )?;
            write(&a.trace, &pretty(&doc))?;
            Ok(0)
        }
        Command::ExportLp(a) => {
            let inst = load_instance(&a.instance)?;
            let lp = export_lp(&inst.substrate, &inst.request)?;
            write(&a.out, &lp.text)?;
            if !cli.quiet {
                println!("{} variables", lp.variables);
            }
            Ok(0)
        }
        Command::Bench(a) => {
            let config = BenchConfig::parse(&read(&a.config)?)
                .map_err(|e| Failure::from(e).in_file(&a.config))?;
            let rows = match &a.out {
                Some(path) => {
                    let file = File::create(path).map_err(|e| Failure::from(e).in_file(path))?;
                    run_bench(&config, storage(a.sparse), file)?
                }
                None => run_bench(&config, storage(a.sparse), std::io::stdout().lock())?,
            };
            if !cli.quiet && a.out.is_some() {
                println!("{} rows", rows.len());
            }
            Ok(0)
        }
    }
}

fn validate(cli: &Cli, a: &ValidateArgs) -> Result<u8, Failure> {
    let inst = load_instance(&a.instance)?;
    let (s, r) = (&inst.substrate, &inst.request);
    let doc = parse_mapping(&read(&a.mapping)?, s, r)
        .map_err(|e| Failure::from(e).in_file(&a.mapping))?;
    let valid = check_valid(s, r, &doc.mapping)?;
    let (status, report, code) = if !valid.ok() {
        ("invalid", valid, EXIT_INVALID)
    } else {
        let feasible = check_feasible(s, r, &doc.mapping)?;
        if feasible.ok() {
            ("feasible", feasible, 0)
        } else {
            ("infeasible", feasible, EXIT_INFEASIBLE)
        }
    };
    let cost = (status != "invalid").then(|| mapping_cost(s, r, &doc.mapping));
    let cost_matches = match (cost, doc.cost) {
        (Some(c), Some(claimed)) => Some(c == claimed),
        _ => None,
    };
    if a.json {
        let value = json!({
            "status": status,
            "ok": report.ok(),
            "cost": cost.map(|c| c.to_string()),
            "claimed_cost": doc.cost.map(|c| c.to_string()),
            "cost_matches": cost_matches,
            "violations": report.violations,
        });
        println!("{value}");
    } else if !cli.quiet {
        println!("{status}");
        if let Some(c) = cost {
            println!("cost {c}");
        }
        if cost_matches == Some(false) {
            println!("claimed cost {} differs", doc.cost.expect("compared above"));
        }
        for v in &report.violations {
            println!("  {v}");
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", Failure::new("usage", first).render(json_errors));
            return ExitCode::FAILURE;
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", f.render(cli.json_errors));
            ExitCode::FAILURE
        }
    }
}
