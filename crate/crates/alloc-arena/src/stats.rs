//! Coverage and estimation-error metrics, plus the Wilcoxon signed-rank
//! test used to compare strategies on paired coverage series.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::coverage::Tau;
use crate::env::SignalOutcome;
use crate::error::{ArenaError, Result};

/// Number of types whose signal count reached the detection threshold.
pub fn coverage_count(outcome: &SignalOutcome, tau: Tau) -> u32 {
    let t = tau.value() as u64;
    outcome.x.iter().filter(|&&xi| xi >= t).count() as u32
}

/// Mean squared deviation between estimated and true probabilities.
pub fn estimation_mse(p_hat: &[f64], p_true: &[f64]) -> Result<f64> {
    if p_hat.len() != p_true.len() {
        return Err(ArenaError::Input(format!(
            "estimate vector has {} entries but truth has {}",
            p_hat.len(),
            p_true.len()
        )));
    }
    if p_hat.is_empty() {
        return Err(ArenaError::Input("probability vectors are empty".into()));
    }
    Ok(p_hat
        .iter()
        .zip(p_true)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / p_hat.len() as f64)
}

/// How zero differences enter the signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroHandling {
    /// Classical Wilcoxon: zero differences are discarded before ranking.
    #[default]
    Discard,
    /// Pratt's method: zeros participate in ranking, then drop out of the
    /// statistic, with the variance reduced accordingly.
    Pratt,
}

/// Signed-rank test outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Signed rank sum `W = Σ rank(|d|) · sign(d)`.
    pub w: f64,
    /// Number of non-zero differences.
    pub n_effective: usize,
    /// Normal-approximation statistic with tie and continuity corrections.
    pub z: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Classical two-sided Wilcoxon signed-rank test on paired series.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(x, y, ZeroHandling::Discard)
}

/// Signed-rank test with an explicit zero-difference policy.
pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    zeros: ZeroHandling,
) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(ArenaError::Input(format!(
            "paired series differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(ArenaError::EmptyInput("paired series are empty".into()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let nonzero = diffs.iter().filter(|d| **d != 0.0).count();
    if nonzero == 0 {
        return Err(ArenaError::DegenerateSample(
            "every paired difference is zero".into(),
        ));
    }

    let (w, var) = match zeros {
        ZeroHandling::Discard => {
            let d: Vec<f64> = diffs.into_iter().filter(|v| *v != 0.0).collect();
            let (ranks, tie_sum) = average_ranks(&d);
            let w = d
                .iter()
                .zip(&ranks)
                .map(|(&di, &r)| r * di.signum())
                .sum::<f64>();
            let n = d.len() as f64;
            let var = n * (n + 1.0) * (2.0 * n + 1.0) / 6.0 - tie_sum / 12.0;
            (w, var)
        }
        ZeroHandling::Pratt => {
            // Zeros keep their (lowest) ranks but contribute sign 0; the
            // variance drops by the zero block and the nonzero tie groups.
            let (ranks, tie_sum) = average_ranks(&diffs);
            let w = diffs
                .iter()
                .zip(&ranks)
                .map(|(&di, &r)| if di == 0.0 { 0.0 } else { r * di.signum() })
                .sum::<f64>();
            let n = diffs.len() as f64;
            let n0 = (diffs.len() - nonzero) as f64;
            let var = (n * (n + 1.0) * (2.0 * n + 1.0)
                - n0 * (n0 + 1.0) * (2.0 * n0 + 1.0))
                / 6.0
                - tie_sum / 12.0;
            (w, var)
        }
    };

    let sigma = var.max(0.0).sqrt();
    let z = if sigma == 0.0 {
        0.0
    } else {
        // Continuity correction of 0.5 on the positive-rank-sum scale;
        // W = 2T⁺ − n(n+1)/2, so it is 1.0 on the signed-rank-sum scale.
        (w - w.signum()) / sigma
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0);
    Ok(WilcoxonResult {
        w,
        n_effective: nonzero,
        z,
        p_value,
    })
}

/// Ascending ranks of `|values|` with average ranks for ties. Returns the
/// ranks (aligned with the input) and the tie correction `Σ (t³ − t)` over
/// tie groups of the nonzero magnitudes.
fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .abs()
            .partial_cmp(&values[b].abs())
            .expect("NaN in paired differences")
    });
    let mut ranks = vec![0.0; n];
    let mut tie_sum = 0.0;
    let mut start = 0;
    while start < n {
        let magnitude = values[order[start]].abs();
        let mut end = start + 1;
        while end < n && values[order[end]].abs() == magnitude {
            end += 1;
        }
        let count = (end - start) as f64;
        // Average of ranks start+1 ..= end.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        if count > 1.0 && magnitude != 0.0 {
            tie_sum += count * count * count - count;
        }
        start = end;
    }
    (ranks, tie_sum)
}
