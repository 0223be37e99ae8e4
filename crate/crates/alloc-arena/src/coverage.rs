//! Exact coverage objective, the binomial tail function `g`, its derivative
//! in the allocation size, and a provably optimal greedy integer allocator.
//!
//! The objective being maximized is the expected number of covered types,
//! `E[D] = Σ_i 1 − (1 − p_i)^{n_i}`. Each term is concave in `n_i`, so the
//! objective is separable concave and greedy unit-by-unit assignment on the
//! marginal gains is exact.

use crate::error::{ArenaError, Result};

/// Integer allocation of test units across configuration types.
///
/// Invariants: non-empty, every entry ≥ 1. Feasibility against a specific
/// budget is checked where the budget is known (the sum of the entries is
/// the budget the allocation was built for).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Allocation {
    n: Vec<u32>,
}

impl Allocation {
    pub fn new(n: Vec<u32>) -> Result<Self> {
        if n.is_empty() {
            return Err(ArenaError::Allocation("allocation has no types".into()));
        }
        if let Some(i) = n.iter().position(|&v| v == 0) {
            return Err(ArenaError::Allocation(format!(
                "type {i} received 0 units; every type requires at least 1"
            )));
        }
        Ok(Allocation { n })
    }

    /// The uniform feasible allocation: `N div C` to every type, remainder
    /// one unit each to the lowest indices. Used during burn-in.
    pub fn uniform(n_types: usize, n_units: u32) -> Result<Self> {
        if n_types == 0 {
            return Err(ArenaError::Allocation("allocation has no types".into()));
        }
        if (n_units as usize) < n_types {
            return Err(ArenaError::Allocation(format!(
                "budget {n_units} cannot give {n_types} types one unit each"
            )));
        }
        let base = n_units / n_types as u32;
        let rem = (n_units % n_types as u32) as usize;
        let n = (0..n_types)
            .map(|i| if i < rem { base + 1 } else { base })
            .collect();
        Ok(Allocation { n })
    }

    pub fn counts(&self) -> &[u32] {
        &self.n
    }

    pub fn n_types(&self) -> usize {
        self.n.len()
    }

    pub fn total(&self) -> u32 {
        self.n.iter().sum()
    }

    pub fn into_counts(self) -> Vec<u32> {
        self.n
    }
}

/// Detection threshold τ. The binomial tail `g` has a closed polynomial form
/// only for τ ∈ {1, 2, 3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tau {
    One,
    Two,
    Three,
}

impl Tau {
    pub fn value(self) -> u8 {
        match self {
            Tau::One => 1,
            Tau::Two => 2,
            Tau::Three => 3,
        }
    }

    pub fn from_value(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Tau::One),
            2 => Ok(Tau::Two),
            3 => Ok(Tau::Three),
            other => Err(ArenaError::UnsupportedThreshold(other)),
        }
    }
}

impl std::fmt::Display for Tau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Expected coverage `Σ_i 1 − (1 − p_i)^{n_i}`.
pub fn expected_coverage(p: &[f64], alloc: &Allocation) -> Result<f64> {
    if p.len() != alloc.n_types() {
        return Err(ArenaError::Input(format!(
            "probability vector has {} entries but allocation has {} types",
            p.len(),
            alloc.n_types()
        )));
    }
    validate_probs(p)?;
    Ok(p.iter()
        .zip(alloc.counts())
        .map(|(&pi, &ni)| 1.0 - (1.0 - pi).powi(ni as i32))
        .sum())
}

/// Marginal gain in expected coverage from giving one more unit to a type
/// with detection probability `p` currently holding `n` units:
/// `(1−p)^n − (1−p)^{n+1} = p (1−p)^n`.
pub fn marginal_gain(p: f64, n: u32) -> f64 {
    p * (1.0 - p).powi(n as i32)
}

/// Binomial miss tail `g(n, q) = P(J < τ)` for `J ~ Binomial(n, 1−q)`,
/// extended continuously to real-valued `n` via its polynomial-in-`n` form:
///
/// * τ=1: `q^n`
/// * τ=2: `q^n + n q^{n−1} (1−q)`
/// * τ=3: the above plus `n(n−1)/2 · q^{n−2} (1−q)^2`
///
/// The boundaries are taken exactly: `q = 1` always misses (`g = 1`) and
/// `q = 0` always detects `n` signals (`g = 1` iff `n < τ`).
pub fn g_tail(n: f64, q: f64, tau: Tau) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q), "q must lie in [0, 1]");
    debug_assert!(n > 0.0, "allocation size must be positive");
    if q >= 1.0 {
        return 1.0;
    }
    if q <= 0.0 {
        return if n < tau.value() as f64 { 1.0 } else { 0.0 };
    }
    let qn = q.powf(n);
    let r = (1.0 - q) / q;
    match tau {
        Tau::One => qn,
        Tau::Two => qn * (1.0 + n * r),
        Tau::Three => qn * (1.0 + n * r + 0.5 * n * (n - 1.0) * r * r),
    }
}

/// Stationarity function `f(n, q, λ) = ∂g/∂n − λ` for the Lagrangian solver.
///
/// For τ=1 this is `q^n ln(q) − λ`; for τ=2 and τ=3 the analytic derivative
/// of the polynomial form of `g` in `n`. Requires `q ∈ (0, 1)` strictly.
pub fn f_derivative(n: f64, q: f64, lambda: f64, tau: Tau) -> Result<f64> {
    if q <= 0.0 || q >= 1.0 {
        return Err(ArenaError::Singular(format!(
            "f(n, q, lambda) requires q strictly inside (0, 1), got q = {q}"
        )));
    }
    let ln_q = q.ln();
    let qn = q.powf(n);
    let r = (1.0 - q) / q;
    let dg = match tau {
        Tau::One => qn * ln_q,
        Tau::Two => qn * (ln_q * (1.0 + n * r) + r),
        Tau::Three => {
            qn * (ln_q * (1.0 + n * r + 0.5 * n * (n - 1.0) * r * r)
                + (r + 0.5 * r * r * (2.0 * n - 1.0)))
        }
    };
    Ok(dg - lambda)
}

/// Exact maximizer of [`expected_coverage`] over integer allocations.
///
/// Starts from one unit per type and repeatedly assigns a unit to the type
/// with maximal marginal gain, ties broken by the lowest index.
pub fn greedy_optimal_allocation(p: &[f64], n_units: u32) -> Result<Allocation> {
    if p.is_empty() {
        return Err(ArenaError::Input("probability vector is empty".into()));
    }
    validate_probs(p)?;
    let c = p.len();
    if (n_units as usize) < c {
        return Err(ArenaError::Allocation(format!(
            "budget {n_units} is below the {c} types requiring one unit each"
        )));
    }
    let mut n = vec![1u32; c];
    for _ in 0..(n_units as usize - c) {
        let mut best = 0usize;
        let mut best_gain = marginal_gain(p[0], n[0]);
        for i in 1..c {
            let gain = marginal_gain(p[i], n[i]);
            if gain > best_gain {
                best = i;
                best_gain = gain;
            }
        }
        n[best] += 1;
    }
    Allocation::new(n)
}

pub(crate) fn validate_probs(p: &[f64]) -> Result<()> {
    if let Some(i) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(ArenaError::Input(format!(
            "probability {} at index {i} is outside [0, 1]",
            p[i]
        )));
    }
    Ok(())
}
