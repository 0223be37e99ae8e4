//! The four allocation strategies behind one decide/observe interface:
//! a one-shot static baseline, a rolling Lagrangian re-optimizer, the
//! Q-learning agent, and an oracle with access to the true probabilities.
//!
//! Information hygiene: ground truth may only reach the oracle. Passing
//! `true_p` to any other kind (or withholding it from the oracle) is a
//! contract violation, so coverage differences between strategies are
//! attributable to policy rather than leaked information.

use std::fmt;
use std::str::FromStr;

use crate::agent::{AgentConfig, QLearningAgent, QTable};
use crate::coverage::{self, Allocation, Tau};
use crate::env::SignalOutcome;
use crate::error::{ArenaError, Result};
use crate::estimation::BeliefState;
use crate::lagrangian::{self, LagrangianConfig};

/// Strategy identifiers; the `Display` names are the CSV vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Static,
    RollingLagrangian,
    Rl,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Static,
        PolicyKind::RollingLagrangian,
        PolicyKind::Rl,
        PolicyKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Static => "static",
            PolicyKind::RollingLagrangian => "rolling_lagrangian",
            PolicyKind::Rl => "rl",
            PolicyKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = ArenaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(PolicyKind::Static),
            "rolling_lagrangian" => Ok(PolicyKind::RollingLagrangian),
            "rl" => Ok(PolicyKind::Rl),
            "oracle" => Ok(PolicyKind::Oracle),
            other => Err(ArenaError::Parse(format!(
                "unknown strategy '{other}' (expected static, rolling_lagrangian, rl, oracle)"
            ))),
        }
    }
}

/// Which optimizer the oracle runs on the true probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMethod {
    /// Exact greedy maximizer of expected coverage.
    #[default]
    Greedy,
    /// The same Lagrangian solver the estimating strategies use.
    Lagrangian,
}

impl OracleMethod {
    pub fn name(self) -> &'static str {
        match self {
            OracleMethod::Greedy => "greedy",
            OracleMethod::Lagrangian => "lagrangian",
        }
    }
}

impl FromStr for OracleMethod {
    type Err = ArenaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(OracleMethod::Greedy),
            "lagrangian" => Ok(OracleMethod::Lagrangian),
            other => Err(ArenaError::Parse(format!(
                "unknown oracle method '{other}' (expected greedy or lagrangian)"
            ))),
        }
    }
}

/// Everything needed to build one strategy instance.
#[derive(Debug, Clone)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub n_types: usize,
    pub n_units: u32,
    pub burn_in: usize,
    pub tau: Tau,
    pub eps_clip: f64,
    pub lagrangian: LagrangianConfig,
    pub agent: AgentConfig,
    pub oracle_method: OracleMethod,
}

/// A live strategy instance: belief state plus kind-specific machinery.
pub struct Policy {
    kind: PolicyKind,
    n_units: u32,
    burn_in: usize,
    tau: Tau,
    belief: BeliefState,
    lagrangian: LagrangianConfig,
    oracle_method: OracleMethod,
    agent: Option<QLearningAgent>,
    static_alloc: Option<Allocation>,
    current: Allocation,
    step: usize,
}

impl Policy {
    pub fn new(cfg: PolicyConfig, seed: u64) -> Result<Self> {
        cfg.lagrangian.validate()?;
        let belief = BeliefState::new(cfg.n_types, cfg.burn_in.max(1), cfg.eps_clip)?;
        let agent = match cfg.kind {
            PolicyKind::Rl => {
                let mut agent_cfg = cfg.agent.clone();
                agent_cfg.tau = cfg.tau;
                Some(QLearningAgent::new(agent_cfg, seed)?)
            }
            _ => None,
        };
        Ok(Policy {
            kind: cfg.kind,
            n_units: cfg.n_units,
            burn_in: cfg.burn_in,
            tau: cfg.tau,
            belief,
            lagrangian: cfg.lagrangian,
            oracle_method: cfg.oracle_method,
            agent,
            static_alloc: None,
            current: Allocation::uniform(cfg.n_types, cfg.n_units)?,
            step: 0,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn p_hat(&self) -> &[f64] {
        self.belief.p_hat()
    }

    pub fn q_table(&self) -> Option<&QTable> {
        self.agent.as_ref().map(|a| a.q_table())
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.agent.as_ref().map(|a| a.epsilon())
    }

    /// Chooses the allocation for step `t`. Ground truth must be present
    /// exactly when the policy is the oracle.
    pub fn decide(&mut self, t: usize, true_p: Option<&[f64]>) -> Result<Allocation> {
        match (self.kind, true_p.is_some()) {
            (PolicyKind::Oracle, false) => {
                return Err(ArenaError::Contract(
                    "oracle requires the true probabilities".into(),
                ))
            }
            (PolicyKind::Oracle, true) => {}
            (kind, true) => {
                return Err(ArenaError::Contract(format!(
                    "ground truth leaked to non-oracle strategy '{kind}'"
                )))
            }
            (_, false) => {}
        }
        self.step = t;
        // Every strategy holds the uniform allocation through burn-in.
        if t < self.burn_in {
            let uniform = Allocation::uniform(self.belief.n_types(), self.n_units)?;
            self.current = uniform.clone();
            return Ok(uniform);
        }
        let alloc = match self.kind {
            PolicyKind::Static => {
                if self.static_alloc.is_none() {
                    self.static_alloc = Some(self.solve_from_belief()?);
                }
                self.static_alloc.clone().expect("just set")
            }
            PolicyKind::RollingLagrangian => self.solve_from_belief()?,
            PolicyKind::Rl => {
                let agent = self.agent.as_mut().expect("rl policy owns an agent");
                agent.decide(&self.current, self.belief.p_hat())?
            }
            PolicyKind::Oracle => {
                let p = true_p.expect("checked above");
                match self.oracle_method {
                    OracleMethod::Greedy => coverage::greedy_optimal_allocation(p, self.n_units)?,
                    OracleMethod::Lagrangian => {
                        let q: Vec<f64> = p
                            .iter()
                            .map(|&pi| (1.0 - pi).clamp(1e-6, 1.0 - 1e-6))
                            .collect();
                        lagrangian::solve_allocation(&q, self.n_units, self.tau, &self.lagrangian)?
                    }
                }
            }
        };
        self.current = alloc.clone();
        Ok(alloc)
    }

    /// Feeds back the signals generated by the allocation this step's
    /// `decide` returned. Every strategy updates its belief (for estimation
    /// error logging); the agent additionally learns.
    pub fn observe(&mut self, alloc: &Allocation, outcome: &SignalOutcome) -> Result<()> {
        if self.kind == PolicyKind::Rl && self.step >= self.burn_in {
            let p_before = self.belief.p_hat().to_vec();
            let gaps = self.belief.gap(alloc, outcome)?;
            self.belief.update(alloc, outcome)?;
            let agent = self.agent.as_mut().expect("rl policy owns an agent");
            agent.observe(alloc, outcome, &p_before, self.belief.p_hat(), &gaps)?;
        } else {
            self.belief.update(alloc, outcome)?;
        }
        Ok(())
    }

    fn solve_from_belief(&self) -> Result<Allocation> {
        lagrangian::solve_allocation(
            &self.belief.q_hat(),
            self.n_units,
            self.tau,
            &self.lagrangian,
        )
    }
}
