//! Non-stationary environment: per-type complement probabilities that drift
//! under Gaussian noise, undergo scheduled regime shifts, and produce
//! binomially distributed signal counts when sampled under an allocation.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Normal};
use rand_chacha::ChaCha8Rng;

use crate::coverage::Allocation;
use crate::error::{ArenaError, Result};
use crate::rng::{self, tag};

/// Environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Number of configuration types C.
    pub n_types: usize,
    /// Budget of test units N per step.
    pub n_units: u32,
    /// Horizon T in steps.
    pub horizon: usize,
    /// Std-dev of the per-step Gaussian drift on q.
    pub drift_sigma: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub shifts: Vec<RegimeShift>,
    pub seed: u64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_types == 0 {
            return Err(ArenaError::Config("n_types must be at least 1".into()));
        }
        if (self.n_units as usize) < self.n_types {
            return Err(ArenaError::Config(format!(
                "n_units {} must cover one unit per type (n_types {})",
                self.n_units, self.n_types
            )));
        }
        if self.horizon == 0 {
            return Err(ArenaError::Config("horizon must be at least 1".into()));
        }
        if self.drift_sigma < 0.0 || !self.drift_sigma.is_finite() {
            return Err(ArenaError::Config(format!(
                "drift_sigma {} must be finite and non-negative",
                self.drift_sigma
            )));
        }
        if self.beta_a <= 0.0 || self.beta_b <= 0.0 {
            return Err(ArenaError::Config(format!(
                "Beta parameters ({}, {}) must be positive",
                self.beta_a, self.beta_b
            )));
        }
        for (k, s) in self.shifts.iter().enumerate() {
            if s.type_index >= self.n_types {
                return Err(ArenaError::Config(format!(
                    "shift {k} targets type {} but only {} types exist",
                    s.type_index, self.n_types
                )));
            }
            if s.at_step >= self.horizon {
                return Err(ArenaError::Config(format!(
                    "shift {k} at step {} is outside the horizon {}",
                    s.at_step, self.horizon
                )));
            }
            if !(0.0..=1.0).contains(&s.new_q) {
                return Err(ArenaError::Config(format!(
                    "shift {k} target q {} is outside [0, 1]",
                    s.new_q
                )));
            }
        }
        Ok(())
    }
}

impl Default for EnvConfig {
    /// The reference scenario: 300 units, 10 types, 100 steps, σ = 0.01,
    /// Beta(6, 1) initialization and the default shift schedule.
    fn default() -> Self {
        EnvConfig {
            n_types: 10,
            n_units: 300,
            horizon: 100,
            drift_sigma: 0.01,
            beta_a: 6.0,
            beta_b: 1.0,
            shifts: default_shift_schedule(),
            seed: 42,
        }
    }
}

/// An abrupt exogenous change: type `type_index` jumps to `new_q` exactly at
/// step `at_step`, after which drift resumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeShift {
    pub type_index: usize,
    pub at_step: usize,
    pub new_q: f64,
}

/// The default schedule: type 0 drops to q = 0.7 at t = 30, types 1 and 2
/// jump to q = 0.95 at t = 40 and t = 50.
pub fn default_shift_schedule() -> Vec<RegimeShift> {
    vec![
        RegimeShift {
            type_index: 0,
            at_step: 30,
            new_q: 0.7,
        },
        RegimeShift {
            type_index: 1,
            at_step: 40,
            new_q: 0.95,
        },
        RegimeShift {
            type_index: 2,
            at_step: 50,
            new_q: 0.95,
        },
    ]
}

/// Current step and complement probabilities `q_i(t) = 1 − p_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub t: usize,
    pub q: Vec<f64>,
}

impl EnvState {
    /// Detection probabilities `p_i(t) = 1 − q_i(t)`.
    pub fn p(&self) -> Vec<f64> {
        self.q.iter().map(|&qi| 1.0 - qi).collect()
    }
}

/// Per-type signal counts observed at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalOutcome {
    pub x: Vec<u64>,
}

/// The evolving environment. Drift noise comes from a dedicated stream
/// seeded by the config, so two environments built from the same config
/// produce bit-identical trajectories. Signal draws are keyed by
/// `(t, type, units)` and are therefore a pure function of the allocation
/// actually deployed — strategies sharing an allocation observe identical
/// outcomes.
pub struct Environment {
    cfg: EnvConfig,
    state: EnvState,
    drift_rng: ChaCha8Rng,
    signal_seed: u64,
}

impl Environment {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let mut drift_rng = rng::stream(cfg.seed, tag::ENV, &[]);
        let beta = Beta::new(cfg.beta_a, cfg.beta_b)
            .map_err(|e| ArenaError::Config(format!("Beta({}, {}): {e}", cfg.beta_a, cfg.beta_b)))?;
        let mut q: Vec<f64> = (0..cfg.n_types)
            .map(|_| beta.sample(&mut drift_rng))
            .collect();
        apply_shifts(&cfg.shifts, 0, &mut q);
        let signal_seed = rng::derive_seed(cfg.seed, tag::SIGNAL, &[]);
        Ok(Environment {
            state: EnvState { t: 0, q },
            cfg,
            drift_rng,
            signal_seed,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Pins the true complements, bypassing drift. Test scaffolding for
    /// scenarios that need exact ground truth.
    #[cfg(test)]
    pub(crate) fn set_truth(&mut self, q: Vec<f64>) {
        debug_assert_eq!(q.len(), self.cfg.n_types);
        debug_assert!(q.iter().all(|&v| (0.0..=1.0).contains(&v)));
        self.state.q = q;
    }

    /// Advances one step: Gaussian drift on every `q_i`, clipped to [0, 1],
    /// then any scheduled shift for the new step overwrites its target.
    pub fn advance(&mut self) -> Result<()> {
        if self.state.t >= self.cfg.horizon {
            return Err(ArenaError::Sequence(format!(
                "cannot advance past the horizon ({} steps)",
                self.cfg.horizon
            )));
        }
        let noise = Normal::new(0.0, self.cfg.drift_sigma)
            .map_err(|e| ArenaError::Config(format!("drift noise: {e}")))?;
        for qi in &mut self.state.q {
            *qi = (*qi + noise.sample(&mut self.drift_rng)).clamp(0.0, 1.0);
        }
        self.state.t += 1;
        apply_shifts(&self.cfg.shifts, self.state.t, &mut self.state.q);
        Ok(())
    }

    /// Draws `X_i ~ Binomial(n_i, p_i)` for the given allocation.
    pub fn sample_signals(&self, alloc: &Allocation) -> Result<SignalOutcome> {
        if alloc.n_types() != self.cfg.n_types {
            return Err(ArenaError::Allocation(format!(
                "allocation covers {} types but the environment has {}",
                alloc.n_types(),
                self.cfg.n_types
            )));
        }
        if alloc.total() != self.cfg.n_units {
            return Err(ArenaError::Allocation(format!(
                "allocation totals {} units but the budget is {}",
                alloc.total(),
                self.cfg.n_units
            )));
        }
        let t = self.state.t as u64;
        let x = alloc
            .counts()
            .iter()
            .enumerate()
            .map(|(i, &ni)| {
                let p = 1.0 - self.state.q[i];
                let mut rng = rng::stream(self.signal_seed, tag::SIGNAL, &[t, i as u64, ni as u64]);
                sample_binomial(&mut rng, ni as u64, p)
            })
            .collect();
        Ok(SignalOutcome { x })
    }
}

fn apply_shifts(shifts: &[RegimeShift], t: usize, q: &mut [f64]) {
    for s in shifts {
        if s.at_step == t {
            q[s.type_index] = s.new_q;
        }
    }
}

fn sample_binomial(rng: &mut impl Rng, n: u64, p: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("p validated to lie in (0, 1)")
        .sample(rng)
}
