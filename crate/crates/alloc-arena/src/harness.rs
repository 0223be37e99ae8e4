//! Experiment orchestration: replicated simulations across strategies under
//! common random numbers, CSV/metadata persistence, summary statistics, and
//! the Wilcoxon comparison.
//!
//! Within one replication every strategy faces the identical environment:
//! the drift trajectory is replayed from the same derived seed, and signal
//! draws are keyed by `(step, type, units)` so equal allocations observe
//! equal outcomes. Replications run in a worker pool; results merge in
//! `sim_id` order, so the artifact is a pure function of the configuration.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::env::Environment;
use crate::error::{ArenaError, Result};
use crate::plot;
use crate::rng::{self, tag};
use crate::stats::{self, WilcoxonResult, ZeroHandling};
use crate::strategy::{Policy, PolicyConfig, PolicyKind};

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub sim_id: usize,
    pub t: usize,
    pub strategy: PolicyKind,
    pub coverage: u32,
    pub mse: f64,
}

/// Per-strategy aggregate over the post-burn-in steps.
#[derive(Debug, Clone)]
pub struct StrategySummary {
    pub strategy: PolicyKind,
    pub mean_coverage: f64,
    pub mean_mse: f64,
}

/// Everything a run produces in memory.
pub struct ExperimentOutput {
    pub records: Vec<StepRecord>,
    pub summaries: Vec<StrategySummary>,
    /// Wilcoxon on pooled post-burn-in coverage pairs, rolling Lagrangian
    /// vs RL, when both strategies ran.
    pub wilcoxon: Option<WilcoxonResult>,
    /// The same comparison under Pratt zero handling, when requested.
    pub wilcoxon_pratt: Option<WilcoxonResult>,
    /// True detection probabilities per step for replication 0, for the
    /// probabilities plot.
    pub truth_sim0: Vec<Vec<f64>>,
    /// Q-table snapshot rows from replication 0's agent, when requested.
    pub qtable_rows: Option<Vec<String>>,
}

struct SimResult {
    records: Vec<StepRecord>,
    truth: Option<Vec<Vec<f64>>>,
    qtable_rows: Option<Vec<String>>,
}

/// Runs the full experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let sim_ids: Vec<usize> = (0..cfg.n_sims).collect();
    let run_all = || -> Result<Vec<SimResult>> {
        sim_ids
            .par_iter()
            .map(|&sim| run_single_sim(cfg, sim))
            .collect()
    };
    let results = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| ArenaError::Config(format!("worker pool: {e}")))?
            .install(run_all)?
    } else {
        run_all()?
    };

    let mut records = Vec::with_capacity(cfg.n_sims * cfg.env.horizon * cfg.strategies.len());
    let mut truth_sim0 = Vec::new();
    let mut qtable_rows = None;
    for r in results {
        records.extend(r.records);
        if let Some(t) = r.truth {
            truth_sim0 = t;
        }
        if r.qtable_rows.is_some() {
            qtable_rows = r.qtable_rows;
        }
    }

    let summaries = summarize(&records, &cfg.strategies, cfg.burn_in);
    let wilcoxon = paired_comparison(
        &records,
        PolicyKind::RollingLagrangian,
        PolicyKind::Rl,
        Some(cfg.burn_in),
        ZeroHandling::Discard,
    );
    let wilcoxon_pratt = if cfg.wilcoxon_pratt {
        paired_comparison(
            &records,
            PolicyKind::RollingLagrangian,
            PolicyKind::Rl,
            Some(cfg.burn_in),
            ZeroHandling::Pratt,
        )
    } else {
        None
    };

    Ok(ExperimentOutput {
        records,
        summaries,
        wilcoxon,
        wilcoxon_pratt,
        truth_sim0,
        qtable_rows,
    })
}

fn run_single_sim(cfg: &ExperimentConfig, sim: usize) -> Result<SimResult> {
    let env_seed = rng::derive_seed(cfg.env.seed, tag::REPLICATION, &[sim as u64]);
    let mut records = Vec::with_capacity(cfg.env.horizon * cfg.strategies.len());
    let mut truth: Option<Vec<Vec<f64>>> = None;
    let mut qtable_rows: Option<Vec<String>> = None;

    for (si, &kind) in cfg.strategies.iter().enumerate() {
        // Each strategy replays the identical environment trajectory.
        let mut env = Environment::new(crate::env::EnvConfig {
            seed: env_seed,
            ..cfg.env.clone()
        })?;
        let policy_seed = rng::derive_seed(cfg.env.seed, tag::EXPLORE, &[sim as u64, si as u64]);
        let mut policy = Policy::new(
            PolicyConfig {
                kind,
                n_types: cfg.env.n_types,
                n_units: cfg.env.n_units,
                burn_in: cfg.burn_in,
                tau: cfg.tau,
                eps_clip: cfg.eps_clip,
                lagrangian: cfg.lagrangian.clone(),
                agent: cfg.agent.clone(),
                oracle_method: cfg.oracle_method,
            },
            policy_seed,
        )?;

        let capture_truth = sim == 0 && si == 0;
        let mut truth_rows = Vec::new();
        for t in 0..cfg.env.horizon {
            let p_true = env.state().p();
            if capture_truth {
                truth_rows.push(p_true.clone());
            }
            let truth_arg = (kind == PolicyKind::Oracle).then_some(p_true.as_slice());
            let alloc = policy.decide(t, truth_arg)?;
            let outcome = env.sample_signals(&alloc)?;
            policy.observe(&alloc, &outcome)?;
            records.push(StepRecord {
                sim_id: sim,
                t,
                strategy: kind,
                coverage: stats::coverage_count(&outcome, cfg.tau),
                mse: stats::estimation_mse(policy.p_hat(), &p_true)?,
            });
            if t + 1 < cfg.env.horizon {
                env.advance()?;
            }
        }
        if capture_truth {
            truth = Some(truth_rows);
        }
        if sim == 0 && kind == PolicyKind::Rl && cfg.emit_qtable {
            qtable_rows = policy.q_table().map(snapshot_qtable);
        }
    }
    Ok(SimResult {
        records,
        truth,
        qtable_rows,
    })
}

/// Q-table snapshot rows: `state,src,dst,delta,value` with `0,0,0` encoding
/// the no-op (a real transfer always has `src != dst`).
fn snapshot_qtable(q: &crate::agent::QTable) -> Vec<String> {
    let mut rows: Vec<String> = q
        .iter()
        .map(|(s, a, v)| {
            let (src, dst, delta) = match a {
                crate::agent::Action::Transfer { from, to, amount } => (from, to, amount),
                crate::agent::Action::Noop => (0, 0, 0),
            };
            format!("{},{},{},{},{}", s.digits(), src, dst, delta, fmt_sig(v, 10))
        })
        .collect();
    rows.sort();
    rows
}

fn summarize(
    records: &[StepRecord],
    strategies: &[PolicyKind],
    burn_in: usize,
) -> Vec<StrategySummary> {
    strategies
        .iter()
        .map(|&strategy| {
            let mut cov = 0.0;
            let mut mse = 0.0;
            let mut count = 0usize;
            for r in records {
                if r.strategy == strategy && r.t > burn_in {
                    cov += r.coverage as f64;
                    mse += r.mse;
                    count += 1;
                }
            }
            let denom = count.max(1) as f64;
            StrategySummary {
                strategy,
                mean_coverage: cov / denom,
                mean_mse: mse / denom,
            }
        })
        .collect()
}

/// Pairs coverage by `(sim, t)` for `t > burn_in` (all steps when `None`)
/// and runs the signed-rank test `x = first strategy, y = second`. `None`
/// when either strategy is missing or the test degenerates.
pub fn paired_comparison(
    records: &[StepRecord],
    a: PolicyKind,
    b: PolicyKind,
    burn_in: Option<usize>,
    zeros: ZeroHandling,
) -> Option<WilcoxonResult> {
    let (x, y) = paired_series(records, a, b, burn_in)?;
    stats::wilcoxon_signed_rank_with(&x, &y, zeros).ok()
}

/// Pooled paired coverage series for two strategies over `t > burn_in`
/// (all steps when `None`).
pub fn paired_series(
    records: &[StepRecord],
    a: PolicyKind,
    b: PolicyKind,
    burn_in: Option<usize>,
) -> Option<(Vec<f64>, Vec<f64>)> {
    use std::collections::HashMap;
    let mut xs: HashMap<(usize, usize), f64> = HashMap::new();
    let mut ys: HashMap<(usize, usize), f64> = HashMap::new();
    for r in records {
        if matches!(burn_in, Some(l) if r.t <= l) {
            continue;
        }
        if r.strategy == a {
            xs.insert((r.sim_id, r.t), r.coverage as f64);
        } else if r.strategy == b {
            ys.insert((r.sim_id, r.t), r.coverage as f64);
        }
    }
    if xs.is_empty() || ys.is_empty() {
        return None;
    }
    let mut keys: Vec<(usize, usize)> = xs.keys().filter(|k| ys.contains_key(k)).copied().collect();
    keys.sort();
    let x: Vec<f64> = keys.iter().map(|k| xs[k]).collect();
    let y: Vec<f64> = keys.iter().map(|k| ys[k]).collect();
    Some((x, y))
}

/// Formats a real with up to `sig` significant digits, trimming trailing
/// zeros (`0.0025` stays `0.0025`, not scientific notation).
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes the metrics table: header `sim_id,t,strategy,coverage,mse`, rows
/// in `(sim_id, strategy, t)` order, reals at 10 significant digits, final
/// row newline-terminated.
pub fn write_csv(records: &[StepRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(ArenaError::EmptyInput(
            "no records to write; run the experiment first".into(),
        ));
    }
    let mut sorted: Vec<&StepRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.sim_id, r.strategy, r.t));
    let mut out = String::with_capacity(sorted.len() * 32 + 32);
    out.push_str("sim_id,t,strategy,coverage,mse\n");
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sim_id,
            r.t,
            r.strategy,
            r.coverage,
            fmt_sig(r.mse, 10)
        ));
    }
    fs::write(path, out).map_err(|e| ArenaError::io(path, e))
}

/// Parses a metrics CSV produced by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let text = fs::read_to_string(path).map_err(|e| ArenaError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("sim_id,t,strategy,coverage,mse") => {}
        Some(other) => {
            return Err(ArenaError::Parse(format!(
                "unexpected CSV header '{other}'"
            )))
        }
        None => return Err(ArenaError::EmptyInput(format!("{} is empty", path.display()))),
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(ArenaError::Parse(format!(
                "line {}: expected 5 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        records.push(StepRecord {
            sim_id: fields[0]
                .parse()
                .map_err(|_| ArenaError::Parse(format!("line {}: bad sim_id", lineno + 2)))?,
            t: fields[1]
                .parse()
                .map_err(|_| ArenaError::Parse(format!("line {}: bad t", lineno + 2)))?,
            strategy: fields[2].parse()?,
            coverage: fields[3]
                .parse()
                .map_err(|_| ArenaError::Parse(format!("line {}: bad coverage", lineno + 2)))?,
            mse: fields[4]
                .parse()
                .map_err(|_| ArenaError::Parse(format!("line {}: bad mse", lineno + 2)))?,
        });
    }
    Ok(records)
}

/// Persists a run: `metrics.csv`, `run_metadata.txt`, optional SVG plots
/// and Q-table snapshot. Returns the list of files written.
pub fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<Vec<String>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| ArenaError::io(dir, e))?;
    let mut written = Vec::new();

    let csv_path = dir.join("metrics.csv");
    write_csv(&output.records, &csv_path)?;
    written.push(csv_path.display().to_string());

    let meta_path = dir.join("run_metadata.txt");
    let mut meta = fs::File::create(&meta_path).map_err(|e| ArenaError::io(&meta_path, e))?;
    meta.write_all(cfg.to_flat_text().as_bytes())
        .map_err(|e| ArenaError::io(&meta_path, e))?;
    written.push(meta_path.display().to_string());

    if cfg.emit_plots {
        let shift_steps: Vec<usize> = cfg.env.shifts.iter().map(|s| s.at_step).collect();
        let cov_path = dir.join("coverage_vs_time.svg");
        let series = mean_series(&output.records, &cfg.strategies, cfg.env.horizon, |r| {
            r.coverage as f64
        });
        plot::line_chart_to_file(
            &cov_path,
            "Mean coverage per step",
            "step",
            "coverage",
            &series,
            &shift_steps,
        )?;
        written.push(cov_path.display().to_string());

        let mse_path = dir.join("mse_vs_time.svg");
        let series = mean_series(&output.records, &cfg.strategies, cfg.env.horizon, |r| r.mse);
        plot::line_chart_to_file(
            &mse_path,
            "Mean estimation MSE per step",
            "step",
            "mse",
            &series,
            &shift_steps,
        )?;
        written.push(mse_path.display().to_string());

        if !output.truth_sim0.is_empty() {
            let prob_path = dir.join("probabilities.svg");
            let n_types = output.truth_sim0[0].len();
            let series: Vec<(String, Vec<(f64, f64)>)> = (0..n_types)
                .map(|i| {
                    let pts = output
                        .truth_sim0
                        .iter()
                        .enumerate()
                        .map(|(t, row)| (t as f64, row[i]))
                        .collect();
                    (format!("type {i}"), pts)
                })
                .collect();
            plot::line_chart_to_file(
                &prob_path,
                "True detection probabilities (replication 0)",
                "step",
                "p",
                &series,
                &shift_steps,
            )?;
            written.push(prob_path.display().to_string());
        }
    }

    if let Some(rows) = &output.qtable_rows {
        let q_path = dir.join("qtable.csv");
        let mut text = String::from("state,src,dst,delta,value\n");
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(&q_path, text).map_err(|e| ArenaError::io(&q_path, e))?;
        written.push(q_path.display().to_string());
    }

    Ok(written)
}

/// Mean metric per step per strategy, as plot series.
fn mean_series(
    records: &[StepRecord],
    strategies: &[PolicyKind],
    horizon: usize,
    metric: impl Fn(&StepRecord) -> f64,
) -> Vec<(String, Vec<(f64, f64)>)> {
    strategies
        .iter()
        .map(|&strategy| {
            let mut sums = vec![0.0f64; horizon];
            let mut counts = vec![0usize; horizon];
            for r in records {
                if r.strategy == strategy {
                    sums[r.t] += metric(r);
                    counts[r.t] += 1;
                }
            }
            let pts = sums
                .iter()
                .zip(&counts)
                .enumerate()
                .filter(|(_, (_, &c))| c > 0)
                .map(|(t, (&s, &c))| (t as f64, s / c as f64))
                .collect();
            (strategy.name().to_string(), pts)
        })
        .collect()
}
