//! Command implementations behind the `wtardy` binary.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use wtardy::io::{self as wio, InstanceFile, Normalized, ScheduleFile, StartEntry};
use wtardy::model::{self, Counters};
use wtardy::reductions::{self, BinPackingInstance, RandomSpec};
use wtardy::{milp, prd, pwd, Algorithm, Instance, Schedule};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Solver(#[from] wtardy::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Rejected(String),

    #[error("algorithms disagree: {0}")]
    Disagreement(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(e) => e.exit_code(),
            CliError::Io { .. } | CliError::Usage(_) | CliError::Rejected(_) => 2,
            CliError::Disagreement(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "wtardy", version, about = "Exact solvers for 1|r_j|Σ w_j U_j")]
pub struct Cli {
    /// Worker threads for `compare` (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance and print the optimal weight of early jobs.
    Solve(SolveArgs),
    /// Check a schedule against an instance.
    Validate { instance: PathBuf, schedule: PathBuf },
    /// Print n and the number of distinct values per field.
    Stats { instance: PathBuf },
    /// Swap release and due dates; `-` reads standard input.
    Reverse { instance: PathBuf },
    /// Generate an instance as JSON.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Write a formulation in CPLEX LP format.
    ExportLp(ExportArgs),
    /// Run several algorithms on every `*.json` instance in a directory.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, default_value = "oracle", value_parser = parse_algorithm)]
    pub algo: Algorithm,
    /// Emit the run report as JSON.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub schedule_out: Option<PathBuf>,
    pub instance: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    Binpacking {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long)]
        bins: u64,
        #[arg(long)]
        capacity: u64,
    },
    Knapsack {
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long)]
        capacity: u64,
    },
    Partition {
        #[arg(long, value_delimiter = ',', required = true)]
        numbers: Vec<u64>,
    },
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        distinct_p: usize,
        #[arg(long, default_value_t = 2)]
        distinct_w: usize,
        #[arg(long, default_value_t = 2)]
        distinct_r: usize,
        #[arg(long, default_value_t = 2)]
        distinct_d: usize,
        #[arg(long, default_value_t = 5)]
        max_p: u64,
        #[arg(long, default_value_t = 20)]
        horizon: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Formulation {
    Prd,
    Pwd,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_enum)]
    pub formulation: Formulation,
    /// Which structure and start-bracket candidate to export, in solve order.
    #[arg(long, default_value_t = 0)]
    pub structure_index: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    pub instance: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_value = "oracle,dp", value_parser = parse_algorithm)]
    pub algos: Vec<Algorithm>,
    #[arg(long)]
    pub json: bool,
    pub dir: PathBuf,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: wtardy::Error| e.to_string())
}

/// What `solve --json` prints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    /// SHA-256 of the instance in compact JSON.
    pub instance_sha256: String,
    pub best_weight: u64,
    pub wall_seconds: f64,
    pub counters: Counters,
    pub schedule: ScheduleFile,
}

fn read_text(path: &Path) -> CliResult<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text).map_err(|source| CliError::Io { path: path.into(), source })?;
        return Ok(text);
    }
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

fn load(path: &Path) -> CliResult<InstanceFile> {
    let text = read_text(path)?;
    wio::parse_instance(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_positive(path: &Path) -> CliResult<Instance> {
    let normalized = wio::normalize(&load(path)?)?;
    match normalized.instance {
        Some(inst) if normalized.zero_length.is_empty() => Ok(inst),
        _ => Err(CliError::Usage(format!("{}: this command needs every job to have p > 0", path.display()))),
    }
}

pub fn digest(file: &InstanceFile) -> String {
    let compact = serde_json::to_string(file).expect("instances always serialize");
    hex::encode(Sha256::digest(compact.as_bytes()))
}

/// Solves a file instance. Zero-length jobs are taken out first and put
/// back at their release dates.
pub fn solve_file(file: &InstanceFile, algo: Algorithm) -> CliResult<RunReport> {
    let started = Instant::now();
    let normalized: Normalized = wio::normalize(file)?;
    let (weight, schedule, counters) = match &normalized.instance {
        Some(inst) => {
            let res = algo.solve(inst)?;
            (res.best_weight, normalized.lift_schedule(&res.schedule), res.counters)
        }
        None => (0, normalized.lift_schedule(&Schedule::new()), Counters::default()),
    };
    let best_weight = weight + normalized.offset;
    let starts = schedule.iter().map(|(job, start)| StartEntry { job, start }).collect();
    Ok(RunReport {
        algorithm: algo.name().to_string(),
        instance_sha256: digest(file),
        best_weight,
        wall_seconds: started.elapsed().as_secs_f64(),
        counters,
        schedule: ScheduleFile { starts },
    })
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let threads = cli.threads;
    let io_err = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    match cli.command {
        Command::Solve(args) => {
            let file = load(&args.instance)?;
            let report = solve_file(&file, args.algo)?;
            if let Some(path) = &args.schedule_out {
                let text = serde_json::to_string_pretty(&report.schedule).expect("schedules always serialize");
                write_text(path, &text)?;
            }
            if args.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("reports serialize"))
                    .map_err(io_err)?;
            } else {
                let c = &report.counters;
                writeln!(out, "W={}", report.best_weight).map_err(io_err)?;
                writeln!(
                    out,
                    "algorithm={} milp_nodes={} lp_pivots={} dp_cells={} profiles={} structures={} subsets={} wall={:.3}s",
                    report.algorithm,
                    c.milp_nodes,
                    c.lp_pivots,
                    c.dp_cells,
                    c.profiles,
                    c.structures,
                    c.subsets,
                    report.wall_seconds
                )
                .map_err(io_err)?;
            }
        }
        Command::Validate { instance, schedule } => {
            let file = load(&instance)?;
            let sched = wio::parse_schedule(&read_text(&schedule)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", schedule.display())))?;
            let weight = validate_file(&file, &sched)?;
            writeln!(out, "valid W={weight}").map_err(io_err)?;
        }
        Command::Stats { instance } => {
            let inst = load_positive(&instance)?;
            let s = model::stats(&inst);
            writeln!(out, "n={} p#={} w#={} r#={} d#={}", inst.n(), s.p_count, s.w_count, s.r_count, s.d_count)
                .map_err(io_err)?;
        }
        Command::Reverse { instance } => {
            let inst = load_positive(&instance)?;
            writeln!(out, "{}", wio::instance_to_json(&model::reverse_instance(&inst)?)).map_err(io_err)?;
        }
        Command::Gen(cmd) => {
            let inst = generate(cmd)?;
            writeln!(out, "{}", wio::instance_to_json(&inst)).map_err(io_err)?;
        }
        Command::ExportLp(args) => {
            let inst = load_positive(&args.instance)?;
            let text = export_lp(&inst, args.formulation, args.structure_index)?;
            match &args.output {
                Some(path) => write_text(path, &text)?,
                None => out.write_all(text.as_bytes()).map_err(io_err)?,
            }
        }
        Command::Compare(args) => {
            let rows = compare(&args.dir, &args.algos, threads)?;
            if args.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("rows serialize")).map_err(io_err)?;
            } else {
                write_table(out, &args.algos, &rows).map_err(io_err)?;
            }
            if let Some(row) = rows.iter().find(|r| !r.agree) {
                return Err(CliError::Disagreement(format!("{}: {:?}", row.instance, row.weights)));
            }
        }
    }
    Ok(())
}

/// Weight of a valid schedule; zero-length jobs are judged on their own.
pub fn validate_file(file: &InstanceFile, sched: &Schedule) -> CliResult<u64> {
    if let Ok(inst) = Instance::new(file.jobs.clone()) {
        let report = model::validate(&inst, sched);
        if !report.is_valid() {
            let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(CliError::Rejected(format!("invalid schedule:\n  {}", lines.join("\n  "))));
        }
        return Ok(model::objective(&inst, sched)?);
    }
    Err(CliError::Usage("validate needs every job to have p > 0".into()))
}

pub fn generate(cmd: GenCommand) -> CliResult<Instance> {
    Ok(match cmd {
        GenCommand::Binpacking { sizes, bins, capacity } => {
            reductions::from_bin_packing(&BinPackingInstance::new(sizes, bins, capacity)?)?
        }
        GenCommand::Knapsack { values, sizes, capacity } => reductions::from_knapsack(&values, &sizes, capacity)?,
        GenCommand::Partition { numbers } => reductions::from_partition(&numbers)?,
        GenCommand::Random { seed, n, distinct_p, distinct_w, distinct_r, distinct_d, max_p, horizon } => {
            let spec = RandomSpec { n, distinct_p, distinct_w, distinct_r, distinct_d, max_p, horizon };
            reductions::random_instance(seed, &spec)?
        }
    })
}

pub fn export_lp(inst: &Instance, formulation: Formulation, index: usize) -> CliResult<String> {
    let model = match formulation {
        Formulation::Prd => prd::build_prd_model(inst)?.0,
        Formulation::Pwd => {
            let candidates = pwd::candidates(inst, pwd::STRUCTURE_BUDGET)?;
            let count = candidates.len();
            let c = candidates
                .into_iter()
                .nth(index)
                .ok_or_else(|| CliError::Usage(format!("structure index {index} out of range; there are {count}")))?;
            pwd::build_pwd_model(&c.reduced, &c.brackets)?.0
        }
    };
    Ok(milp::lp_format::to_lp_string(&model))
}

/// One instance across several algorithms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareRow {
    pub instance: String,
    /// Per algorithm: the weight, or `None` when a size guard skipped it.
    pub weights: Vec<Option<u64>>,
    pub agree: bool,
}

pub fn compare(dir: &Path, algos: &[Algorithm], threads: usize) -> CliResult<Vec<CompareRow>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| files.par_iter().map(|path| compare_one(path, algos)).collect())
}

fn compare_one(path: &Path, algos: &[Algorithm]) -> CliResult<CompareRow> {
    let file = load(path)?;
    let mut weights = Vec::with_capacity(algos.len());
    for &algo in algos {
        match solve_file(&file, algo) {
            Ok(report) => weights.push(Some(report.best_weight)),
            Err(CliError::Solver(wtardy::Error::TooLarge { .. })) => weights.push(None),
            Err(e) => return Err(e),
        }
    }
    let mut seen = weights.iter().flatten();
    let first = seen.next();
    let agree = seen.all(|w| Some(w) == first);
    let instance = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(CompareRow { instance, weights, agree })
}

fn write_table(out: &mut dyn Write, algos: &[Algorithm], rows: &[CompareRow]) -> io::Result<()> {
    let width = rows.iter().map(|r| r.instance.len()).max().unwrap_or(0).max("instance".len());
    write!(out, "{:width$}", "instance")?;
    for a in algos {
        write!(out, " {:>9}", a.name())?;
    }
    writeln!(out, "  agree")?;
    for row in rows {
        write!(out, "{:width$}", row.instance)?;
        for w in &row.weights {
            match w {
                Some(w) => write!(out, " {w:>9}")?,
                None => write!(out, " {:>9}", "skip")?,
            }
        }
        writeln!(out, "  {}", if row.agree { "yes" } else { "NO" })?;
    }
    Ok(())
}
