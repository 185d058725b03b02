//! Batches of independent runs on a worker pool.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use crate::cli::Overrides;
use crate::config::{Phase, RunConfig};
use crate::error::CliError;
use crate::experiments;
use crate::output::{resolve_out_dir, Cell, RunSummary, Table};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Config files, each run once (combined with every grid point).
    pub configs: Vec<PathBuf>,
    /// Parameter grid as `key=v1,v2,...`; repeat for a Cartesian product.
    /// Keys: phi, phi_extra, delta, g, separation, gamma, kappa, beta, t_final, measure_time.
    #[arg(long = "vary", value_name = "KEY=VALUES")]
    pub vary: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output root; each run writes into its own subdirectory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

const KEYS: [&str; 10] = ["phi", "phi_extra", "delta", "g", "separation", "gamma", "kappa", "beta", "t_final", "measure_time"];

pub fn parse_axis(spec: &str) -> Result<Axis, CliError> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--vary expects KEY=VALUES, got {spec:?}")))?;
    if !KEYS.contains(&key) {
        return Err(CliError::Config(format!("cannot vary {key:?}; known keys: {}", KEYS.join(", "))));
    }
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(CliError::Config(format!("--vary {key} has no values")));
    }
    // check every value now, before any run starts
    for v in &values {
        overrides_for(key, v)?;
    }
    Ok(Axis { key: key.into(), values })
}

fn overrides_for(key: &str, value: &str) -> Result<Overrides, CliError> {
    let bad = |e: String| CliError::Config(format!("{key}={value}: {e}"));
    let num = || value.parse::<f64>().map_err(|e| bad(e.to_string()));
    let phase = || value.parse::<Phase>().map_err(bad);
    let mut o = Overrides::default();
    match key {
        "phi" => o.phi = Some(phase()?),
        "phi_extra" => o.phi_extra = Some(phase()?),
        "delta" => o.delta = Some(num()?),
        "g" => o.g = Some(num()?),
        "separation" => o.separation = Some(value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
        "gamma" => o.gamma = Some(num()?),
        "kappa" => o.kappa = Some(num()?),
        "beta" => o.beta = Some(num()?),
        "t_final" => o.t_final = Some(num()?),
        "measure_time" => o.measure_time = Some(num()?),
        _ => return Err(CliError::Config(format!("cannot vary {key:?}"))),
    }
    Ok(o)
}

/// One planned run: name, resolved config, and the grid values that produced it.
#[derive(Clone, Debug)]
pub struct Job {
    pub name: String,
    pub config: RunConfig,
    pub point: Vec<String>,
}

/// Expands configs times the Cartesian product of the axes, in a fixed order.
pub fn plan(bases: &[(String, RunConfig)], axes: &[Axis]) -> Result<Vec<Job>, CliError> {
    let mut points: Vec<Vec<usize>> = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| (0..axis.values.len()).map(move |i| [p.as_slice(), &[i]].concat()))
            .collect();
    }
    let mut jobs = Vec::new();
    for (stem, base) in bases {
        for (n, p) in points.iter().enumerate() {
            let mut config = base.clone();
            let mut point = Vec::new();
            for (axis, &i) in axes.iter().zip(p) {
                overrides_for(&axis.key, &axis.values[i])?.apply(&mut config);
                point.push(axis.values[i].clone());
            }
            config.validate()?;
            let name = if axes.is_empty() { stem.clone() } else { format!("{stem}-{n:03}") };
            jobs.push(Job { name, config, point });
        }
    }
    Ok(jobs)
}

/// Runs all jobs on `jobs` threads. Results come back in plan order.
pub fn execute(plan: &[Job], root: &Path, jobs: usize) -> Result<Vec<Result<RunSummary, CliError>>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(|| plan.par_iter().map(|job| experiments::run(&job.config, &root.join(&job.name))).collect()))
}

/// Wide table: one row per run, one column per grid key and per scalar.
pub fn summary_table(plan: &[Job], axes: &[Axis], results: &[Result<RunSummary, CliError>]) -> Table {
    let scalars: BTreeSet<&String> = results.iter().flatten().flat_map(|s| s.scalars.keys()).collect();
    let header = ["run".to_string(), "exit_code".to_string()]
        .into_iter()
        .chain(axes.iter().map(|a| a.key.clone()))
        .chain(scalars.iter().map(|s| s.to_string()));
    let mut table = Table::new(header);
    for (job, result) in plan.iter().zip(results) {
        let code = match result {
            Ok(_) => 0,
            Err(e) => e.exit_code(),
        };
        let mut row: Vec<Cell> = vec![Cell::Text(job.name.clone()), Cell::Int(code as i64)];
        for v in &job.point {
            row.push(Cell::Float(v.parse::<Phase>().map(|p| p.0).unwrap_or(f64::NAN)));
        }
        for key in &scalars {
            let value = result.as_ref().ok().and_then(|s| s.scalars.get(*key)).copied().unwrap_or(f64::NAN);
            row.push(Cell::Float(value));
        }
        table.push(row);
    }
    table
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let axes: Vec<Axis> = args.vary.iter().map(|s| parse_axis(s)).collect::<Result<_, _>>()?;
    if args.configs.is_empty() {
        return Err(CliError::Config("sweep needs at least one config file".into()));
    }
    let mut bases = Vec::new();
    for path in &args.configs {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        if bases.iter().any(|(s, _)| *s == stem) {
            return Err(CliError::Config(format!("two configs share the name {stem:?}")));
        }
        bases.push((stem, RunConfig::load(path)?));
    }
    let root = resolve_out_dir(args.out.as_deref(), &bases[0].1);
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }

    let plan = plan(&bases, &axes)?;
    let results = execute(&plan, &root, jobs)?;
    std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    let path = root.join("sweep.csv");
    summary_table(&plan, &axes, &results).write(&path)?;
    println!("{}", path.display());

    let mut worst: Option<CliError> = None;
    for (job, result) in plan.iter().zip(results) {
        if let Err(e) = result {
            eprintln!("error: {}: {e}", job.name);
            if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                worst = Some(e);
            }
        }
    }
    worst.map_or(Ok(()), Err)
}
