//! Command-line interface.
//!
//! Subcommands: `run` (full experiment), `allocate` (one-shot solver),
//! `compare` (Wilcoxon on an existing metrics CSV). Exit codes: 0 success,
//! 1 usage or configuration error, 2 runtime error. The root seed resolves
//! as `--seed` > `ALLOC_ARENA_SEED` > config file > default.

use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::coverage::{greedy_optimal_allocation, Tau};
use crate::error::{ArenaError, Result};
use crate::harness;
use crate::lagrangian::{solve_allocation, LagrangianConfig};
use crate::stats::ZeroHandling;
use crate::strategy::PolicyKind;

/// Environment variable overriding the root seed.
pub const SEED_ENV_VAR: &str = "ALLOC_ARENA_SEED";

#[derive(Parser)]
#[command(
    name = "alloc-arena",
    version,
    about = "Budgeted test-unit allocation across drifting configuration types: \
             simulation harness and one-shot solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and write metrics, metadata and plots.
    Run {
        /// Flat key = value config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one allocation from a file of per-type detection probabilities
    /// (one per line) and print the unit counts.
    Allocate {
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        budget: u32,
        #[arg(long)]
        tau: u8,
        #[arg(long, value_enum)]
        method: SolveMethod,
    },
    /// Wilcoxon signed-rank comparison of two strategies in a metrics CSV.
    Compare {
        #[arg(long)]
        csv: PathBuf,
        /// First strategy (the x series).
        #[arg(long)]
        a: String,
        /// Second strategy (the y series).
        #[arg(long)]
        b: String,
        /// Only pool steps strictly beyond this burn-in.
        #[arg(long)]
        burn_in: Option<usize>,
        /// Keep zero differences in the ranking (Pratt).
        #[arg(long)]
        pratt: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Lagrangian,
    Greedy,
}

/// Errors classified by exit code.
enum CliError {
    /// Bad usage, unreadable or invalid configuration: exit 1.
    Usage(ArenaError),
    /// Failure while running: exit 2.
    Runtime(ArenaError),
}

/// Entry point used by the binary; returns the process exit code.
pub fn cli_entry(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(cli: Cli) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed, out } => run_cmd(config, seed, out),
        Command::Allocate {
            probs,
            budget,
            tau,
            method,
        } => allocate_cmd(probs, budget, tau, method).map_err(CliError::Usage),
        Command::Compare {
            csv,
            a,
            b,
            burn_in,
            pratt,
        } => compare_cmd(csv, &a, &b, burn_in, pratt),
    }
}

fn run_cmd(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> std::result::Result<(), CliError> {
    let mut cfg = match config {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(ArenaError::io(&path, e)))?;
            ExperimentConfig::from_flat_text(&text).map_err(CliError::Usage)?
        }
        None => ExperimentConfig::default(),
    };
    if let Ok(value) = std::env::var(SEED_ENV_VAR) {
        let parsed = value.parse::<u64>().map_err(|_| {
            CliError::Usage(ArenaError::Parse(format!(
                "{SEED_ENV_VAR} must be an unsigned 64-bit integer, got '{value}'"
            )))
        })?;
        cfg.env.seed = parsed;
    }
    if let Some(s) = seed {
        cfg.env.seed = s;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    cfg.validate().map_err(CliError::Usage)?;

    let output = harness::run_experiment(&cfg).map_err(CliError::Runtime)?;
    let written = harness::write_outputs(&cfg, &output).map_err(CliError::Runtime)?;

    println!(
        "{} strategies x {} replications x {} steps (seed {})",
        cfg.strategies.len(),
        cfg.n_sims,
        cfg.env.horizon,
        cfg.env.seed
    );
    println!("mean post-burn-in metrics (t > {}):", cfg.burn_in);
    for s in &output.summaries {
        println!(
            "  {:<18} coverage {:>7.4}   mse {:>10.6}",
            s.strategy.name(),
            s.mean_coverage,
            s.mean_mse
        );
    }
    if let Some(w) = &output.wilcoxon {
        println!(
            "wilcoxon rolling_lagrangian vs rl: W = {:.1}, n = {}, z = {:.3}, p = {:.4}",
            w.w, w.n_effective, w.z, w.p_value
        );
    }
    if let Some(w) = &output.wilcoxon_pratt {
        println!(
            "wilcoxon (pratt zeros):            W = {:.1}, n = {}, z = {:.3}, p = {:.4}",
            w.w, w.n_effective, w.z, w.p_value
        );
    }
    for f in written {
        println!("wrote {f}");
    }
    Ok(())
}

fn allocate_cmd(probs: PathBuf, budget: u32, tau: u8, method: SolveMethod) -> Result<()> {
    let text = fs::read_to_string(&probs).map_err(|e| ArenaError::io(&probs, e))?;
    let p: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| ArenaError::Parse(format!("bad probability line '{l}'")))
        })
        .collect::<Result<_>>()?;
    if p.is_empty() {
        return Err(ArenaError::EmptyInput(format!(
            "{} contains no probabilities",
            probs.display()
        )));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ArenaError::Input(format!(
            "probability {bad} is outside [0, 1]"
        )));
    }
    let tau = Tau::from_value(tau)?;
    let alloc = match method {
        SolveMethod::Greedy => greedy_optimal_allocation(&p, budget)?,
        SolveMethod::Lagrangian => {
            let q: Vec<f64> = p
                .iter()
                .map(|&pi| (1.0 - pi).clamp(1e-6, 1.0 - 1e-6))
                .collect();
            solve_allocation(&q, budget, tau, &LagrangianConfig::for_types(q.len()))?
        }
    };
    let counts: Vec<String> = alloc.counts().iter().map(|n| n.to_string()).collect();
    println!("{}", counts.join(" "));
    Ok(())
}

fn compare_cmd(
    csv: PathBuf,
    a: &str,
    b: &str,
    burn_in: Option<usize>,
    pratt: bool,
) -> std::result::Result<(), CliError> {
    let a: PolicyKind = a.parse().map_err(CliError::Usage)?;
    let b: PolicyKind = b.parse().map_err(CliError::Usage)?;
    let records = harness::read_csv(&csv).map_err(CliError::Usage)?;
    let (x, y) = harness::paired_series(&records, a, b, burn_in).ok_or_else(|| {
        CliError::Usage(ArenaError::Input(format!(
            "no paired rows for '{a}' and '{b}'"
        )))
    })?;
    let zeros = if pratt {
        ZeroHandling::Pratt
    } else {
        ZeroHandling::Discard
    };
    let result =
        crate::stats::wilcoxon_signed_rank_with(&x, &y, zeros).map_err(CliError::Runtime)?;
    println!("pairs: {}", x.len());
    println!("W = {:.1}", result.w);
    println!("n_effective = {}", result.n_effective);
    println!("z = {:.4}", result.z);
    println!("p_value = {:.6}", result.p_value);
    Ok(())
}
