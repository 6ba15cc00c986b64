//! Experiment runner for the CICQ switch simulator.
//!
//! Subcommands: `simulate` runs one configured experiment, `sweep` expands
//! the config's lists into a batch of runs over a worker pool, and `verify`
//! executes the named analytic checks. Reports land in CSV with a fixed
//! column order; identical configs and seeds reproduce identical bytes.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error.

mod config;

use clap::{Parser, Subcommand};
use disquo_core::experiment::{run_experiment, ExperimentSpec};
use disquo_core::metrics::ExperimentReport;
use disquo_core::verify::{run_verification, VerifyLevel};
use std::collections::VecDeque;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

#[derive(Parser)]
#[command(
    name = "disquo",
    about = "CICQ switch scheduling simulator and verifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Simulate {
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point in the config's sweep lists.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the analytic verification suite.
    Verify {
        #[arg(long, default_value = "fast")]
        level: String,
    },
}

const CSV_HEADER: &str = "scheduler,pattern,N,load,omega,bursty,seed,slots,mean_delay,delay_ci95,throughput,max_qnorm,stable_flag,divergences,weight_ratio_frac";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "na".to_string(),
    }
}

fn csv_row(r: &ExperimentReport) -> String {
    format!(
        "{},{},{},{:.6},{:.6},{},{},{},{},{},{:.6},{:.6},{},{},{}",
        r.scheduler,
        r.pattern,
        r.n_ports,
        r.load,
        r.omega,
        r.bursty,
        r.seed,
        r.slots,
        fmt_opt(r.mean_delay),
        fmt_opt(r.delay_ci95),
        r.throughput,
        r.max_qnorm,
        r.stable,
        r.divergences,
        fmt_opt(r.weight_ratio_frac),
    )
}

fn write_csv(path: Option<&PathBuf>, rows: &[String]) -> Result<(), String> {
    let mut body = String::with_capacity(rows.len() * 96 + CSV_HEADER.len() + 1);
    body.push_str(CSV_HEADER);
    body.push('\n');
    for row in rows {
        body.push_str(row);
        body.push('\n');
    }
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| format!("writing {}: {e}", p.display())),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| format!("writing stdout: {e}")),
    }
}

fn load_config(path: &PathBuf) -> Result<config::ConfigFile, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    config::parse(&text)
}

fn run_pool(specs: Vec<ExperimentSpec>, jobs: usize) -> Vec<Result<ExperimentReport, String>> {
    let queue: Mutex<VecDeque<(usize, ExperimentSpec)>> =
        Mutex::new(specs.into_iter().enumerate().collect());
    let results: Mutex<Vec<Option<Result<ExperimentReport, String>>>> = {
        let len = queue.lock().unwrap().len();
        Mutex::new(vec![None; len])
    };

    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1) {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop_front();
                let Some((idx, spec)) = job else { break };
                let outcome = run_experiment(&spec).map_err(|e| e.to_string());
                results.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });

    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn real_main() -> Result<ExitCode, (u8, String)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let cfg = load_config(&config).map_err(|e| (2, e))?;
            let spec = config::single_spec(&cfg, seed).map_err(|e| (2, e))?;
            let report = run_experiment(&spec).map_err(|e| (2, e.to_string()))?;
            let out = out.or_else(|| cfg.output.path.clone().map(PathBuf::from));
            write_csv(out.as_ref(), &[csv_row(&report)]).map_err(|e| (2, e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            seed,
            out,
            jobs,
        } => {
            let cfg = load_config(&config).map_err(|e| (2, e))?;
            let specs = config::sweep_specs(&cfg, seed).map_err(|e| (2, e))?;
            let jobs = jobs.unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            });
            let outcomes = run_pool(specs, jobs);
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            for (idx, outcome) in outcomes.into_iter().enumerate() {
                match outcome {
                    Ok(report) => rows.push(csv_row(&report)),
                    Err(e) => failures.push(format!("point {idx}: {e}")),
                }
            }
            let out = out.or_else(|| cfg.output.path.clone().map(PathBuf::from));
            write_csv(out.as_ref(), &rows).map_err(|e| (2, e))?;
            if failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Err((2, failures.join("\n")))
            }
        }
        Command::Verify { level } => {
            let level: VerifyLevel = level.parse().map_err(|e| (2, format!("{e}")))?;
            let results = run_verification(level);
            let mut failed = 0;
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} - {}", r.name, r.detail);
                if !r.passed {
                    failed += 1;
                }
            }
            println!("{} checks, {} failed", results.len(), failed);
            if failed == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
