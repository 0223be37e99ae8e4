//! Rolling weighted estimation of detection probabilities from observed
//! signal counts.
//!
//! The estimate for type `i` is a `1/k`-weighted average of the per-step
//! empirical rates `X_i(t−k) / n_i(t−k)` over the last `L` observations
//! (`k = 1` most recent), with weights renormalized over the entries
//! actually present, then clipped into `[ε, 1−ε]` so downstream solvers
//! never see degenerate probabilities.

use std::collections::VecDeque;

use crate::coverage::Allocation;
use crate::env::SignalOutcome;
use crate::error::{ArenaError, Result};

/// Default clipping constant ε.
pub const DEFAULT_EPS_CLIP: f64 = 1e-6;

#[derive(Debug, Clone)]
struct WindowEntry {
    n: Vec<u32>,
    x: Vec<u64>,
}

/// Rolling window of observations plus the current estimates.
#[derive(Debug, Clone)]
pub struct BeliefState {
    window: VecDeque<WindowEntry>,
    p_hat: Vec<f64>,
    window_len: usize,
    eps_clip: f64,
}

impl BeliefState {
    pub fn new(n_types: usize, window_len: usize, eps_clip: f64) -> Result<Self> {
        if n_types == 0 {
            return Err(ArenaError::Config("n_types must be at least 1".into()));
        }
        if window_len == 0 {
            return Err(ArenaError::Config("window length must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&eps_clip) {
            return Err(ArenaError::Config(format!(
                "eps_clip {eps_clip} must lie in [0, 0.5)"
            )));
        }
        Ok(BeliefState {
            window: VecDeque::with_capacity(window_len + 1),
            // Uninformative prior until the first observation arrives.
            p_hat: vec![0.5; n_types],
            window_len,
            eps_clip,
        })
    }

    pub fn n_types(&self) -> usize {
        self.p_hat.len()
    }

    /// Number of observations currently in the window.
    pub fn observations(&self) -> usize {
        self.window.len()
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    /// Complement estimates `1 − p̂`, inheriting the clipping bounds.
    pub fn q_hat(&self) -> Vec<f64> {
        self.p_hat.iter().map(|&p| 1.0 - p).collect()
    }

    /// Appends `(alloc, outcome)` to the window (evicting the oldest entry
    /// beyond `L`) and recomputes the weighted estimates.
    pub fn update(&mut self, alloc: &Allocation, outcome: &SignalOutcome) -> Result<()> {
        let c = self.n_types();
        if alloc.n_types() != c || outcome.x.len() != c {
            return Err(ArenaError::Input(format!(
                "belief has {c} types but allocation has {} and outcome has {}",
                alloc.n_types(),
                outcome.x.len()
            )));
        }
        for (i, (&ni, &xi)) in alloc.counts().iter().zip(&outcome.x).enumerate() {
            if xi > ni as u64 {
                return Err(ArenaError::Input(format!(
                    "type {i}: {xi} signals exceed the {ni} allocated units"
                )));
            }
        }
        self.window.push_back(WindowEntry {
            n: alloc.counts().to_vec(),
            x: outcome.x.clone(),
        });
        if self.window.len() > self.window_len {
            self.window.pop_front();
        }
        self.recompute();
        Ok(())
    }

    /// Per-type absolute gap `|X_i / n_i − p̂_i|` between the observed rate
    /// and the current expectation. Drift trigger signal for the agent.
    pub fn gap(&self, alloc: &Allocation, outcome: &SignalOutcome) -> Result<Vec<f64>> {
        let c = self.n_types();
        if alloc.n_types() != c || outcome.x.len() != c {
            return Err(ArenaError::Input(format!(
                "belief has {c} types but allocation has {} and outcome has {}",
                alloc.n_types(),
                outcome.x.len()
            )));
        }
        Ok(alloc
            .counts()
            .iter()
            .zip(&outcome.x)
            .zip(&self.p_hat)
            .map(|((&ni, &xi), &pi)| (xi as f64 / ni as f64 - pi).abs())
            .collect())
    }

    fn recompute(&mut self) {
        let len = self.window.len();
        // Weight 1/k for the k-th most recent entry, normalized to sum to 1.
        let norm: f64 = (1..=len).map(|k| 1.0 / k as f64).sum();
        let c = self.p_hat.len();
        let mut acc = vec![0.0f64; c];
        for (age, entry) in self.window.iter().rev().enumerate() {
            let w = 1.0 / (age + 1) as f64 / norm;
            for i in 0..c {
                acc[i] += w * entry.x[i] as f64 / entry.n[i] as f64;
            }
        }
        let lo = self.eps_clip;
        let hi = 1.0 - self.eps_clip;
        for (p, a) in self.p_hat.iter_mut().zip(acc) {
            *p = a.clamp(lo, hi);
        }
    }
}
