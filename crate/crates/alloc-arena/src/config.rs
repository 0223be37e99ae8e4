//! Experiment configuration and the flat `key = value` config format.
//!
//! The format: one `key = value` per line, `#` starts a comment, list
//! values are comma-separated. Every key mirrors a resolved configuration
//! field, unknown keys are hard errors, and [`ExperimentConfig::to_flat_text`]
//! renders the complete resolved state so a metadata echo of a run doubles
//! as a rerunnable config file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::agent::AgentConfig;
use crate::coverage::Tau;
use crate::env::{default_shift_schedule, EnvConfig, RegimeShift};
use crate::error::{ArenaError, Result};
use crate::estimation::DEFAULT_EPS_CLIP;
use crate::lagrangian::LagrangianConfig;
use crate::strategy::{OracleMethod, PolicyKind};

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub strategies: Vec<PolicyKind>,
    /// Burn-in length L: steps of uniform allocation seeding the estimates,
    /// and the rolling-window length.
    pub burn_in: usize,
    pub n_sims: usize,
    pub tau: Tau,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    pub emit_qtable: bool,
    /// Replication worker-pool width; 0 means available parallelism.
    pub workers: usize,
    pub eps_clip: f64,
    pub agent: AgentConfig,
    pub lagrangian: LagrangianConfig,
    pub oracle_method: OracleMethod,
    /// Report the Wilcoxon comparison with Pratt zero handling as well.
    pub wilcoxon_pratt: bool,
}

impl Default for ExperimentConfig {
    /// The reference experiment: all four strategies, 50 replications at
    /// N=300, C=10, T=100, L=10, with the default shift schedule.
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig::default(),
            strategies: PolicyKind::ALL.to_vec(),
            burn_in: 10,
            n_sims: 50,
            tau: Tau::One,
            output_dir: PathBuf::from("out"),
            emit_plots: true,
            emit_qtable: false,
            workers: 0,
            eps_clip: DEFAULT_EPS_CLIP,
            agent: AgentConfig::default(),
            lagrangian: LagrangianConfig::for_types(10),
            oracle_method: OracleMethod::Greedy,
            wilcoxon_pratt: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.lagrangian.validate()?;
        if self.strategies.is_empty() {
            return Err(ArenaError::Config("no strategies selected".into()));
        }
        let mut seen = Vec::new();
        for s in &self.strategies {
            if seen.contains(s) {
                return Err(ArenaError::Config(format!("duplicate strategy '{s}'")));
            }
            seen.push(*s);
        }
        if self.n_sims == 0 {
            return Err(ArenaError::Config("n_sims must be at least 1".into()));
        }
        if self.burn_in == 0 || self.burn_in >= self.env.horizon {
            return Err(ArenaError::Config(format!(
                "burn_in {} must lie in [1, horizon)",
                self.burn_in
            )));
        }
        if !(0.0..0.5).contains(&self.eps_clip) || self.eps_clip <= 0.0 {
            return Err(ArenaError::Config(format!(
                "eps_clip {} must lie in (0, 0.5)",
                self.eps_clip
            )));
        }
        Ok(())
    }

    /// Parses the flat config text over the defaults. Unknown keys are hard
    /// errors; later duplicates override earlier ones.
    pub fn from_flat_text(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ArenaError::Parse(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }

        let mut cfg = ExperimentConfig::default();
        // Structural key first: the per-type Lagrangian defaults depend on
        // the number of types.
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in pairs {
            map.insert(k, v);
        }
        if let Some(v) = map.remove("n_types") {
            cfg.env.n_types = parse_num(&v, "n_types")?;
            cfg.lagrangian = LagrangianConfig::for_types(cfg.env.n_types);
        }
        for (key, value) in map {
            cfg.apply_kv(&key, &value)?;
        }
        Ok(cfg)
    }

    fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_types" => {
                self.env.n_types = parse_num(value, key)?;
                self.lagrangian = LagrangianConfig::for_types(self.env.n_types);
            }
            "n_units" => self.env.n_units = parse_num(value, key)?,
            "horizon" => self.env.horizon = parse_num(value, key)?,
            "drift_sigma" => self.env.drift_sigma = parse_num(value, key)?,
            "beta_a" => self.env.beta_a = parse_num(value, key)?,
            "beta_b" => self.env.beta_b = parse_num(value, key)?,
            "shifts" => self.env.shifts = parse_shifts(value)?,
            "seed" => self.env.seed = parse_num(value, key)?,
            "strategies" => {
                self.strategies = split_list(value)
                    .map(|s| s.parse::<PolicyKind>())
                    .collect::<Result<Vec<_>>>()?;
            }
            "burn_in" => self.burn_in = parse_num(value, key)?,
            "n_sims" => self.n_sims = parse_num(value, key)?,
            "tau" => self.tau = Tau::from_value(parse_num::<u8>(value, key)?)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "emit_plots" => self.emit_plots = parse_bool(value, key)?,
            "emit_qtable" => self.emit_qtable = parse_bool(value, key)?,
            "workers" => self.workers = parse_num(value, key)?,
            "eps_clip" => self.eps_clip = parse_num(value, key)?,
            "oracle_method" => self.oracle_method = value.parse()?,
            "wilcoxon_pratt" => self.wilcoxon_pratt = parse_bool(value, key)?,
            "rl_alpha0" => self.agent.alpha0 = parse_num(value, key)?,
            "rl_alpha_decay" => self.agent.alpha_decay = parse_num(value, key)?,
            "rl_alpha_min" => self.agent.alpha_min = parse_num(value, key)?,
            "rl_gamma" => self.agent.gamma = parse_num(value, key)?,
            "rl_eps0" => self.agent.eps0 = parse_num(value, key)?,
            "rl_eps_decay" => self.agent.eps_decay = parse_num(value, key)?,
            "rl_eps_min" => self.agent.eps_min = parse_num(value, key)?,
            "rl_eps_boost" => self.agent.eps_boost = parse_num(value, key)?,
            "rl_gap_threshold" => self.agent.gap_threshold = parse_num(value, key)?,
            "rl_gap_count" => self.agent.gap_count = parse_num(value, key)?,
            "rl_w1" => self.agent.w1 = parse_num(value, key)?,
            "rl_w2" => self.agent.w2 = parse_num(value, key)?,
            "rl_delta_menu" => {
                self.agent.delta_menu = split_list(value)
                    .map(|s| parse_num::<u32>(s, key))
                    .collect::<Result<Vec<_>>>()?;
            }
            "rl_offline_episodes" => self.agent.offline_episodes = parse_num(value, key)?,
            "rl_belief_bins" => self.agent.belief_bins = parse_num(value, key)?,
            "rl_alloc_quantum" => self.agent.alloc_quantum = parse_num(value, key)?,
            "rl_reward_smooth_window" => {
                self.agent.reward_smooth_window = parse_num(value, key)?
            }
            "rl_q_clip" => self.agent.q_clip = parse_num(value, key)?,
            "lagrangian_lambda_min" => self.lagrangian.lambda_min = parse_num(value, key)?,
            "lagrangian_lambda_max" => self.lagrangian.lambda_max = parse_num(value, key)?,
            "lagrangian_grid_points" => self.lagrangian.grid_points = parse_num(value, key)?,
            "lagrangian_bisect_tol" => self.lagrangian.bisect_tol = parse_num(value, key)?,
            "lagrangian_max_iters" => self.lagrangian.max_iters = parse_num(value, key)?,
            "lagrangian_budget_tol" => self.lagrangian.budget_tol = parse_num(value, key)?,
            other => {
                return Err(ArenaError::Parse(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Renders every resolved field. Parsing the result reproduces `self`.
    pub fn to_flat_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("n_types", self.env.n_types.to_string());
        kv("n_units", self.env.n_units.to_string());
        kv("horizon", self.env.horizon.to_string());
        kv("drift_sigma", fmt_f64(self.env.drift_sigma));
        kv("beta_a", fmt_f64(self.env.beta_a));
        kv("beta_b", fmt_f64(self.env.beta_b));
        kv("shifts", render_shifts(&self.env.shifts));
        kv("seed", self.env.seed.to_string());
        kv(
            "strategies",
            self.strategies
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("burn_in", self.burn_in.to_string());
        kv("n_sims", self.n_sims.to_string());
        kv("tau", self.tau.value().to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("emit_plots", self.emit_plots.to_string());
        kv("emit_qtable", self.emit_qtable.to_string());
        kv("workers", self.workers.to_string());
        kv("eps_clip", fmt_f64(self.eps_clip));
        kv("oracle_method", self.oracle_method.name().to_string());
        kv("wilcoxon_pratt", self.wilcoxon_pratt.to_string());
        kv("rl_alpha0", fmt_f64(self.agent.alpha0));
        kv("rl_alpha_decay", fmt_f64(self.agent.alpha_decay));
        kv("rl_alpha_min", fmt_f64(self.agent.alpha_min));
        kv("rl_gamma", fmt_f64(self.agent.gamma));
        kv("rl_eps0", fmt_f64(self.agent.eps0));
        kv("rl_eps_decay", fmt_f64(self.agent.eps_decay));
        kv("rl_eps_min", fmt_f64(self.agent.eps_min));
        kv("rl_eps_boost", fmt_f64(self.agent.eps_boost));
        kv("rl_gap_threshold", fmt_f64(self.agent.gap_threshold));
        kv("rl_gap_count", self.agent.gap_count.to_string());
        kv("rl_w1", fmt_f64(self.agent.w1));
        kv("rl_w2", fmt_f64(self.agent.w2));
        kv(
            "rl_delta_menu",
            self.agent
                .delta_menu
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            "rl_offline_episodes",
            self.agent.offline_episodes.to_string(),
        );
        kv("rl_belief_bins", self.agent.belief_bins.to_string());
        kv("rl_alloc_quantum", self.agent.alloc_quantum.to_string());
        kv(
            "rl_reward_smooth_window",
            self.agent.reward_smooth_window.to_string(),
        );
        kv("rl_q_clip", fmt_f64(self.agent.q_clip));
        kv("lagrangian_lambda_min", fmt_f64(self.lagrangian.lambda_min));
        kv("lagrangian_lambda_max", fmt_f64(self.lagrangian.lambda_max));
        kv(
            "lagrangian_grid_points",
            self.lagrangian.grid_points.to_string(),
        );
        kv("lagrangian_bisect_tol", fmt_f64(self.lagrangian.bisect_tol));
        kv("lagrangian_max_iters", self.lagrangian.max_iters.to_string());
        kv("lagrangian_budget_tol", fmt_f64(self.lagrangian.budget_tol));
        out
    }
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v}")
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(|s| s.trim()).filter(|s| !s.is_empty())
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| ArenaError::Parse(format!("key '{key}': cannot parse '{value}'")))
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ArenaError::Parse(format!(
            "key '{key}': expected a boolean, got '{other}'"
        ))),
    }
}

/// Shift syntax: `type:at_step:new_q` entries, comma-separated; `none` for
/// an empty schedule, `default` for the reference schedule.
fn parse_shifts(value: &str) -> Result<Vec<RegimeShift>> {
    match value {
        "none" => return Ok(vec![]),
        "default" => return Ok(default_shift_schedule()),
        _ => {}
    }
    split_list(value)
        .map(|entry| {
            let parts: Vec<&str> = entry.split(':').collect();
            if parts.len() != 3 {
                return Err(ArenaError::Parse(format!(
                    "shift '{entry}' must be type:at_step:new_q"
                )));
            }
            Ok(RegimeShift {
                type_index: parse_num(parts[0], "shifts.type")?,
                at_step: parse_num(parts[1], "shifts.at_step")?,
                new_q: parse_num(parts[2], "shifts.new_q")?,
            })
        })
        .collect()
}

fn render_shifts(shifts: &[RegimeShift]) -> String {
    if shifts.is_empty() {
        return "none".into();
    }
    shifts
        .iter()
        .map(|s| format!("{}:{}:{}", s.type_index, s.at_step, fmt_f64(s.new_q)))
        .collect::<Vec<_>>()
        .join(",")
}
