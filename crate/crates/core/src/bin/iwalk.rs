use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use iwalk::experiments::{self, ExperimentConfig};
use iwalk::generate::{generate_instance, GenParams};
use iwalk::instance::{write_document, Instance};
use iwalk::oracle::{exact_bounds, DEFAULT_BUDGET, DEFAULT_EDGE_CAP};
use iwalk::search::{multistart, MultistartReport, OptimizationProblem, Sense, SweepStrategy, VALUE_CLUSTER_TOL};
use iwalk::{EdgeSelection, IntervalBounds};

/// Bounds on n-step expectations of random walks with interval edge weights.
#[derive(Parser)]
#[command(name = "iwalk", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against the model constraints.
    Validate { path: PathBuf },
    /// Lower and/or upper bound by multistart local search.
    Bounds {
        path: PathBuf,
        #[arg(long, default_value_t = 300)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "left-to-right")]
        strategy: SweepStrategy,
        #[arg(long, default_value = "both", value_parser = ["min", "max", "both"])]
        sense: String,
        /// Write the machine-readable result record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact bounds by enumerating every extremal schedule.
    Oracle {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EDGE_CAP)]
        edge_cap: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random instance file.
    Gen {
        #[arg(long)]
        vertices: usize,
        #[arg(long, default_value_t = 2)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        disconnect_fraction: f64,
        #[arg(long, default_value_t = 0.8)]
        lower_mean: f64,
        #[arg(long, default_value_t = 1.0)]
        width_mean: f64,
        #[arg(long, default_value_t = 1.5)]
        qf_mean: f64,
        #[arg(long, default_value_t = 0.1)]
        marginal_slack: f64,
    },
    /// Unique local extrema per instance over a vertices x steps grid.
    ExpCount(ExpArgs),
    /// Left-to-right versus right-to-left sweeps from identical starts.
    ExpSweep(ExpArgs),
    /// Start value versus optimised value for every start.
    ExpScatter(ExpArgs),
    /// Relative deviation from the best value versus sample size.
    ExpDev(ExpArgs),
}

#[derive(Args)]
struct ExpArgs {
    /// JSON document overriding the experiment's default configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    vertices: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
}

impl ExpArgs {
    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path, base).map_err(Failure::input)?,
            None => base,
        };
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.instances {
            c.instances = v;
        }
        if let Some(v) = self.starts {
            c.starts = v;
        }
        if let Some(v) = &self.vertices {
            c.vertices = v.clone();
        }
        if let Some(v) = &self.steps {
            c.steps = v.clone();
        }
        c.check().map_err(Failure::input)?;
        Ok(c)
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    /// Unreadable or malformed input.
    fn input(e: impl std::fmt::Display) -> Self {
        Self { code: 2, message: e.to_string() }
    }

    fn run(e: impl std::fmt::Display) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Bounds {
            path,
            starts,
            seed,
            strategy,
            sense,
            out,
        } => bounds(&path, starts, seed, strategy, &sense, out.as_deref()),
        Command::Oracle {
            path,
            edge_cap,
            budget,
            out,
        } => oracle(&path, edge_cap, budget, out.as_deref()),
        Command::Gen {
            vertices,
            steps,
            seed,
            out,
            disconnect_fraction,
            lower_mean,
            width_mean,
            qf_mean,
            marginal_slack,
        } => generate(
            &GenParams {
                vertices,
                steps,
                disconnect_fraction,
                lower_mean,
                width_mean,
                qf_mean,
                marginal_slack,
                seed,
            },
            &out,
        ),
        Command::ExpCount(args) => experiment(&args, ExperimentConfig::extrema_count(), |c| {
            let r = experiments::run_extrema_count(c)?;
            for cell in &r.cells {
                println!(
                    "vertices {:>2} steps {:>2}: mean unique minima {:>8.2} maxima {:>8.2}{}",
                    cell.vertices,
                    cell.steps,
                    cell.mean_unique_local_minima,
                    cell.mean_unique_local_maxima,
                    cell.reference_mean.map(|v| format!("  (reference {v})")).unwrap_or_default()
                );
            }
            r.write(c)
        }),
        Command::ExpSweep(args) => experiment(&args, ExperimentConfig::sweep_comparison(), |c| {
            let r = experiments::run_sweep_comparison(c)?;
            let n = r.agreement.len() as f64;
            let mean = r.agreement.iter().map(|a| a.disagreement_fraction).sum::<f64>() / n;
            println!("mean fraction of starts where the two orders disagree: {mean:.4}");
            r.write(c)
        }),
        Command::ExpScatter(args) => experiment(&args, ExperimentConfig::initial_vs_optimized(), |c| {
            let r = experiments::run_initial_vs_optimized(c)?;
            for corr in &r.correlations {
                println!(
                    "vertices {} steps {} instance {} {}: correlation {:.4}",
                    corr.vertices, corr.steps, corr.instance_id, corr.sense, corr.correlation
                );
            }
            r.write(c)
        }),
        Command::ExpDev(args) => experiment(&args, ExperimentConfig::deviation(), |c| {
            let r = experiments::run_deviation_curves(c)?;
            for curve in &r.curves {
                for row in curve.rows.iter().filter(|r| r.sample_size.is_power_of_two() || r.sample_size == c.starts) {
                    println!(
                        "{} n={:>5}: avg dev optimized {:>9.4}%  random {:>9.4}%  max optimized {:>9.4}%  random {:>9.4}%",
                        curve.sense,
                        row.sample_size,
                        row.avg_rel_dev_optimized,
                        row.avg_rel_dev_random,
                        row.max_rel_dev_optimized,
                        row.max_rel_dev_random
                    );
                }
            }
            r.write(c)
        }),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    Instance::load(path).map_err(Failure::input)
}

fn validate(path: &Path) -> Result<ExitCode, Failure> {
    let inst = load(path)?;
    let report = inst.bounds.validate();
    print!("{report}");
    if inst.steps == 0 {
        println!("note: steps = 0, every bound equals <q, f>");
    }
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn load_valid(path: &Path) -> Result<Instance, Failure> {
    let inst = load(path)?;
    let report = inst.bounds.validate();
    if !report.is_valid() {
        return Err(Failure::run(format!("invalid instance:\n{report}")));
    }
    Ok(inst)
}

fn edge_names(b: &IntervalBounds) -> Vec<String> {
    let st = b.states();
    b.edges()
        .iter()
        .map(|e| format!("{}-{}", st.label(e.a), st.label(e.b)))
        .collect()
}

fn schedule(sels: &[EdgeSelection]) -> Vec<String> {
    sels.iter().map(|s| s.to_string()).collect()
}

fn report_value(r: &MultistartReport) -> Value {
    let extrema: Vec<Value> = r
        .unique_extrema
        .iter()
        .map(|e| json!({ "value": e.value, "hits": e.hits, "schedule": schedule(&e.selections) }))
        .collect();
    json!({
        "value": r.best.value,
        "schedule": schedule(&r.best.selections),
        "unique_extrema": r.unique_extrema.len(),
        "distinct_values": r.distinct_values(VALUE_CLUSTER_TOL),
        "extrema": extrema,
    })
}

fn print_report(label: &str, r: &MultistartReport) {
    const SHOWN: usize = 20;
    println!("{label} bound: {}", r.best.value);
    println!("  schedule: {}", schedule(&r.best.selections).join(" | "));
    println!(
        "  unique local {}: {} ({} distinct values)",
        if r.sense == Sense::Min { "minima" } else { "maxima" },
        r.unique_extrema.len(),
        r.distinct_values(VALUE_CLUSTER_TOL).len()
    );
    let mut order: Vec<usize> = (0..r.unique_extrema.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&r.unique_extrema[a], &r.unique_extrema[b]);
        let by_value = match r.sense {
            Sense::Min => ea.value.total_cmp(&eb.value),
            Sense::Max => eb.value.total_cmp(&ea.value),
        };
        by_value.then(ea.first_start.cmp(&eb.first_start))
    });
    println!("  {:>24}  {:>6}", "value", "hits");
    for &i in order.iter().take(SHOWN) {
        let e = &r.unique_extrema[i];
        println!("  {:>24}  {:>6}", e.value, e.hits);
    }
    if order.len() > SHOWN {
        println!("  ... {} more", order.len() - SHOWN);
    }
}

fn bounds(
    path: &Path,
    starts: usize,
    seed: u64,
    strategy: SweepStrategy,
    sense: &str,
    out: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let inst = load_valid(path)?;
    let senses: &[Sense] = match sense {
        "min" => &[Sense::Min],
        "max" => &[Sense::Max],
        _ => &[Sense::Min, Sense::Max],
    };
    println!(
        "states {}  non-degenerate edges {}  steps {}  starts {}  seed {}  {}",
        inst.bounds.num_states(),
        inst.bounds.num_edges(),
        inst.steps,
        starts,
        seed,
        strategy
    );
    println!("edge order: {}", edge_names(&inst.bounds).join(" "));
    let mut record = json!({
        "instance": path.display().to_string(),
        "steps": inst.steps,
        "starts": starts,
        "seed": seed,
        "strategy": strategy,
        "edges": edge_names(&inst.bounds),
    });
    for &sense in senses {
        let problem = OptimizationProblem::new(inst.bounds.clone(), inst.q.clone(), inst.f.clone(), inst.steps, sense)
            .map_err(Failure::run)?;
        let r = multistart(&problem, starts, seed, strategy).map_err(Failure::run)?;
        let (label, key) = match sense {
            Sense::Min => ("lower", "lower"),
            Sense::Max => ("upper", "upper"),
        };
        print_report(label, &r);
        record[key] = report_value(&r);
    }
    if let Some(out) = out {
        write_record(out, &record)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(path: &Path, edge_cap: usize, budget: u128, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let inst = load_valid(path)?;
    let r = exact_bounds(&inst.bounds, &inst.q, &inst.f, inst.steps, edge_cap, budget).map_err(Failure::run)?;
    println!("evaluated {} extremal schedules", r.evaluated);
    println!("min: {}  ({} argmin schedules)", r.min, r.argmin_count);
    println!("max: {}  ({} argmax schedules)", r.max, r.argmax_count);
    if let Some(first) = r.argmin.first() {
        println!("first argmin: {}", schedule(first).join(" | "));
    }
    if let Some(out) = out {
        let record = json!({
            "instance": path.display().to_string(),
            "steps": inst.steps,
            "edges": edge_names(&inst.bounds),
            "min": r.min,
            "max": r.max,
            "argmin_count": r.argmin_count,
            "argmax_count": r.argmax_count,
            "argmin": r.argmin.iter().map(|s| schedule(s)).collect::<Vec<_>>(),
            "argmax": r.argmax.iter().map(|s| schedule(s)).collect::<Vec<_>>(),
        });
        write_record(out, &record)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn write_record(path: &Path, record: &Value) -> Result<(), Failure> {
    let text = write_document(record).map_err(Failure::run)?;
    std::fs::write(path, text).map_err(|e| Failure::run(format!("cannot write {}: {e}", path.display())))
}

fn generate(params: &GenParams, out: &Path) -> Result<ExitCode, Failure> {
    let inst = generate_instance(params).map_err(Failure::input)?;
    inst.save(out).map_err(Failure::run)?;
    let b = &inst.bounds;
    let s = b.num_states();
    let pairs = s * (s - 1) / 2;
    let present = (0..s)
        .flat_map(|a| (a + 1..s).map(move |c| (a, c)))
        .filter(|&(a, c)| b.lower(a, c) > 0.0)
        .count();
    let mean_lower = (0..s)
        .flat_map(|a| (a + 1..s).map(move |c| (a, c)))
        .filter(|&(a, c)| b.lower(a, c) > 0.0)
        .map(|(a, c)| b.lower(a, c))
        .sum::<f64>()
        / present as f64;
    println!(
        "wrote {}: {} states, {} of {} pairs connected ({:.3} absent), mean lower weight {:.4}",
        out.display(),
        s,
        present,
        pairs,
        1.0 - present as f64 / pairs as f64,
        mean_lower
    );
    Ok(ExitCode::SUCCESS)
}

fn experiment<F>(args: &ExpArgs, base: ExperimentConfig, run: F) -> Result<ExitCode, Failure>
where
    F: FnOnce(&ExperimentConfig) -> Result<Vec<PathBuf>, experiments::ExperimentError>,
{
    let config = args.resolve(base)?;
    let started = Instant::now();
    let paths = run(&config).map_err(Failure::run)?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    eprintln!("finished in {:.1}s", started.elapsed().as_secs_f64());
    Ok(ExitCode::SUCCESS)
}
