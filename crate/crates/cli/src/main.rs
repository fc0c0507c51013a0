use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use hierfair::harness::bench::{self, Algorithm};
use hierfair::harness::{audit, generate, io, BenchConfig, CriteriaMode, Family, GeneratorConfig, PrefMode, TreeShape};
use hierfair::mgys::{run_mgys, RunOptions};
use hierfair::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "hierfair", version, about = "Fair allocation of indivisible items over a hierarchy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Balanced,
    Comb,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pref {
    Indep,
    Corr,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Sma,
    Mgys,
    GysLeaves,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Generate {
        #[arg(long, value_enum)]
        tree: Shape,
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value = "indep")]
        pref: Pref,
        #[arg(long, default_value_t = 0.8)]
        rho: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated valuation families.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "binary_additive,capped_binary_additive,uniform_cap,binary_assignment"
        )]
        families: Vec<String>,
        /// Fixed criterion tag for every internal node, or "random".
        #[arg(long, default_value = "lorenz")]
        criteria: String,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Compute an allocation.
    Solve {
        #[arg(long, value_enum)]
        algorithm: Algo,
        #[arg(long)]
        instance: PathBuf,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// Write MGYS events to stderr as JSON lines.
        #[arg(long)]
        trace: bool,
    },
    /// Report fairness errors of an allocation.
    Audit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        allocation: PathBuf,
        /// Compare against exhaustive enumeration instead of GYS.
        #[arg(long)]
        oracle: bool,
    },
    /// Run a benchmark grid and write per-run rows as CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the config's per-run timeout.
        #[arg(long)]
        timeout: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::BudgetExceeded { .. } | Error::Timeout) => 3,
        Some(err) if err.is_invalid_input() => 2,
        Some(Error::Io(_)) => 2,
        _ => 1,
    }
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => std::fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => match writeln!(std::io::stdout(), "{text}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => Ok(r?),
        },
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { tree, nodes, items, p, pref, rho, seed, families, criteria, output } => {
            let shape = match tree {
                Shape::Balanced => TreeShape::Balanced,
                Shape::Comb => TreeShape::Comb,
            };
            let mut config = GeneratorConfig::new(shape, nodes, items, p);
            config.pref = match pref {
                Pref::Indep => PrefMode::Indep,
                Pref::Corr => PrefMode::Corr,
            };
            config.rho = rho;
            config.seed = seed;
            config.families = families.iter().map(|f| f.parse::<Family>()).collect::<Result<_, _>>()?;
            config.criteria = match criteria.as_str() {
                "random" => CriteriaMode::Random,
                tag => CriteriaMode::Fixed(tag.to_string()),
            };
            config.validate()?;
            let instance = generate(&config)?;
            emit(output.as_deref(), &io::instance_to_json(&instance)?)
        }
        Command::Solve { algorithm, instance, output, trace } => {
            let inst = io::instance_from_json(&read_text(&instance)?)?;
            let (alloc, iterations, name) = match algorithm {
                Algo::Mgys => {
                    let out = run_mgys(&inst, &RunOptions { trace, ..RunOptions::default() })?;
                    for event in &out.trace {
                        eprintln!("{}", serde_json::to_string(event)?);
                    }
                    (out.allocation, Some(out.iterations), "mgys")
                }
                Algo::Sma => (Algorithm::Sma.solve(&inst, None)?.0, None, "sma"),
                Algo::GysLeaves => (Algorithm::GysLeaves.solve(&inst, None)?.0, None, "gys-leaves"),
            };
            emit(output.as_deref(), &io::allocation_to_json(&inst, &alloc, Some(name), iterations)?)
        }
        Command::Audit { instance, allocation, oracle } => {
            let inst = io::instance_from_json(&read_text(&instance)?)?;
            let alloc = io::allocation_from_json(&inst, &read_text(&allocation)?)?;
            let report = audit(&inst, &alloc, oracle)?;
            let nodes: Vec<_> = report
                .nodes
                .iter()
                .map(|n| {
                    json!({
                        "node": n.node,
                        "criterion": n.criterion.to_string(),
                        "actual": n.actual.values,
                        "reference": n.reference.values,
                        "fair": n.fair,
                        "deviation": n.deviation,
                    })
                })
                .collect();
            let out = json!({
                "err1": report.err1,
                "err2": report.err2,
                "discarded": report.discarded,
                "reference": if oracle { "oracle" } else { "gys" },
                "nodes": nodes,
            });
            emit(None, &serde_json::to_string_pretty(&out)?)
        }
        Command::Bench { config, output, jobs, timeout } => {
            let mut cfg = BenchConfig::from_json(&read_text(&config)?)?;
            if let Some(t) = timeout {
                cfg.timeout_secs = t;
            }
            let rows = bench::run_bench(&cfg, jobs)?;
            let file = std::fs::File::create(&output)
                .map_err(Error::from)
                .with_context(|| format!("creating {}", output.display()))?;
            bench::write_csv(&rows, file)?;
            bench::write_csv(&bench::summarize(&rows), std::io::stdout())?;
            Ok(())
        }
    }
}
