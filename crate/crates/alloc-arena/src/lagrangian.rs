//! Lagrangian-threshold allocation: grid search over the multiplier λ with
//! per-type stationarity solves (closed form for τ=1, bisection otherwise),
//! minimizing the total miss tail `Σ_i g(n_i, q_i)` subject to the budget.

use crate::coverage::{self, Allocation, Tau};
use crate::error::{ArenaError, Result};

/// Number of subintervals scanned over `[1, n_max]` to locate a
/// sign-changing bracket before bisecting.
const BRACKET_SCAN: usize = 16;

/// Solver parameters for the λ grid search and the per-type bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianConfig {
    /// Lower grid bound (most negative λ).
    pub lambda_min: f64,
    /// Upper grid bound (closest to zero, still negative for τ=1).
    pub lambda_max: f64,
    pub grid_points: usize,
    /// Bisection stops once `|f(n)| < bisect_tol`.
    pub bisect_tol: f64,
    pub max_iters: usize,
    /// A λ qualifies when `|Σ n_i − N| < budget_tol`.
    pub budget_tol: f64,
}

impl LagrangianConfig {
    /// Defaults sized for `c` configuration types: λ ∈ [−0.5, −1e−6] on a
    /// 2,000-point log-spaced grid, budget tolerance 0.5·c. The λ range
    /// covers `q^n ln q` for q ∈ [0.05, 0.999] and n ∈ [1, N].
    ///
    /// `bisect_tol` bounds `|f|` at the returned point, not the root error;
    /// 1e-14 keeps the root within ~1e-7 even where `f` is flat (`|∂f/∂n| =
    /// |λ ln q|` can drop to ~1e-7 on the valid grid).
    pub fn for_types(c: usize) -> Self {
        LagrangianConfig {
            lambda_min: -0.5,
            lambda_max: -1e-6,
            grid_points: 2000,
            bisect_tol: 1e-14,
            max_iters: 200,
            budget_tol: 0.5 * c.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min < self.lambda_max) {
            return Err(ArenaError::Config(format!(
                "lambda_min {} must be below lambda_max {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.lambda_max >= 0.0 {
            return Err(ArenaError::Config(
                "lambda grid must be negative (lambda = q^n ln q < 0)".into(),
            ));
        }
        if self.grid_points < 2 {
            return Err(ArenaError::Config("grid_points must be at least 2".into()));
        }
        if self.bisect_tol <= 0.0 || self.budget_tol <= 0.0 {
            return Err(ArenaError::Config("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(ArenaError::Config("max_iters must be positive".into()));
        }
        Ok(())
    }

    /// Log-spaced grid from `lambda_min` up to `lambda_max` (magnitudes
    /// descending).
    fn lambda_grid(&self) -> Vec<f64> {
        let lo = self.lambda_max.abs().ln();
        let hi = self.lambda_min.abs().ln();
        let k = self.grid_points;
        (0..k)
            .map(|i| {
                let frac = i as f64 / (k - 1) as f64;
                -(hi + frac * (lo - hi)).exp()
            })
            .collect()
    }
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig::for_types(10)
    }
}

/// Closed-form stationary point for τ=1: `n = log(λ / ln q) / ln q`.
///
/// Defined only for `q ∈ (0, 1)` and `λ / ln q > 0`, i.e. λ < 0.
pub fn closed_form_n(q: f64, lambda: f64) -> Result<f64> {
    if q <= 0.0 || q >= 1.0 {
        return Err(ArenaError::Singular(format!(
            "closed form requires q strictly inside (0, 1), got {q}"
        )));
    }
    let ln_q = q.ln();
    let ratio = lambda / ln_q;
    if ratio <= 0.0 {
        return Err(ArenaError::Domain(format!(
            "lambda / ln(q) = {ratio} must be positive (lambda = {lambda}, q = {q})"
        )));
    }
    Ok(ratio.ln() / ln_q)
}

/// Solves `f(n, q, λ) = 0` for `n ∈ [1, n_max]` by midpoint bisection.
///
/// Scans 16 subintervals for a sign change first; errors with a bracket
/// error when none exists (the caller skips that `(q, λ)` pair) and a
/// convergence error when the iteration cap is exhausted.
pub fn bisect_n(
    q: f64,
    lambda: f64,
    tau: Tau,
    n_max: f64,
    cfg: &LagrangianConfig,
) -> Result<f64> {
    let f = |n: f64| coverage::f_derivative(n, q, lambda, tau);
    let mut lo = 1.0f64;
    let mut f_lo = f(lo)?;
    if f_lo.abs() < cfg.bisect_tol {
        return Ok(lo);
    }
    let mut hi = lo;
    let mut found = false;
    for k in 1..=BRACKET_SCAN {
        let x = 1.0 + (n_max - 1.0) * k as f64 / BRACKET_SCAN as f64;
        let fx = f(x)?;
        if fx.abs() < cfg.bisect_tol {
            return Ok(x);
        }
        if f_lo.signum() != fx.signum() {
            hi = x;
            found = true;
            break;
        }
        lo = x;
        f_lo = fx;
    }
    if !found {
        return Err(ArenaError::Bracket(format!(
            "f(n, q={q}, lambda={lambda}, tau={tau}) has no sign change on [1, {n_max}]"
        )));
    }
    for _ in 0..cfg.max_iters {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.abs() < cfg.bisect_tol {
            return Ok(mid);
        }
        if f_lo.signum() != f_mid.signum() {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Err(ArenaError::Convergence(format!(
        "bisection for (q={q}, lambda={lambda}, tau={tau}) did not reach |f| < {} within {} iterations",
        cfg.bisect_tol, cfg.max_iters
    )))
}

/// Continuous per-type sizes for one λ, or `None` when this λ admits no
/// solution (closed form out of domain).
///
/// When `f` has no sign change on `[1, n_max]` the stationarity equation
/// has no interior root there, so the type's optimum at this multiplier
/// sits on a boundary: `f > 0` throughout means the unit price λ exceeds
/// the type's marginal value everywhere (take 1), `f < 0` means the type
/// is worth more units than the range allows (take `n_max`).
fn sizes_for_lambda(
    q: &[f64],
    lambda: f64,
    tau: Tau,
    n_max: f64,
    cfg: &LagrangianConfig,
) -> Result<Option<Vec<f64>>> {
    let mut ns = Vec::with_capacity(q.len());
    for &qi in q {
        let n = match tau {
            Tau::One => match closed_form_n(qi, lambda) {
                Ok(v) => v.clamp(1.0, n_max),
                Err(ArenaError::Domain(_)) => return Ok(None),
                Err(e) => return Err(e),
            },
            _ => match bisect_n(qi, lambda, tau, n_max, cfg) {
                Ok(v) => v,
                Err(ArenaError::Bracket(_)) => {
                    if coverage::f_derivative(1.0, qi, lambda, tau)? > 0.0 {
                        1.0
                    } else {
                        n_max
                    }
                }
                Err(e) => return Err(e),
            },
        };
        ns.push(n);
    }
    Ok(Some(ns))
}

/// Rounds continuous sizes to a feasible integer allocation: floor, clamp to
/// ≥ 1, move single units by greedy marginal gain until the budget is met
/// exactly, then exchange single units between types while any move still
/// improves expected coverage. The objective is separable concave, so a
/// single-unit-exchange local optimum is a global integer optimum.
fn round_to_feasible(cont: &[f64], q: &[f64], n_units: u32) -> Result<Allocation> {
    let c = cont.len();
    let p: Vec<f64> = q.iter().map(|&qi| 1.0 - qi).collect();
    let mut n: Vec<u32> = cont
        .iter()
        .map(|&x| (x.floor().max(1.0) as u32).min(n_units))
        .collect();
    let mut total: i64 = n.iter().map(|&v| v as i64).sum();
    while total > n_units as i64 {
        // Drop the unit whose removal loses the least coverage.
        let mut best: Option<(usize, f64)> = None;
        for i in 0..c {
            if n[i] > 1 {
                let loss = coverage::marginal_gain(p[i], n[i] - 1);
                if best.map_or(true, |(_, l)| loss < l) {
                    best = Some((i, loss));
                }
            }
        }
        let (i, _) = best.ok_or_else(|| {
            ArenaError::Allocation(format!(
                "cannot trim allocation to budget {n_units} with {c} types"
            ))
        })?;
        n[i] -= 1;
        total -= 1;
    }
    while total < n_units as i64 {
        let mut best = 0usize;
        let mut best_gain = coverage::marginal_gain(p[0], n[0]);
        for i in 1..c {
            let gain = coverage::marginal_gain(p[i], n[i]);
            if gain > best_gain {
                best = i;
                best_gain = gain;
            }
        }
        n[best] += 1;
        total += 1;
    }
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in 0..c {
            if n[j] <= 1 {
                continue;
            }
            let loss = coverage::marginal_gain(p[j], n[j] - 1);
            for i in 0..c {
                if i == j {
                    continue;
                }
                let delta = coverage::marginal_gain(p[i], n[i]) - loss;
                if delta > 1e-12 && best.map_or(true, |(_, _, d)| delta > d) {
                    best = Some((i, j, delta));
                }
            }
        }
        match best {
            Some((i, j, _)) => {
                n[i] += 1;
                n[j] -= 1;
            }
            None => break,
        }
    }
    Allocation::new(n)
}

/// Grid search over λ (Lagrangian-threshold optimization).
///
/// For each λ on the grid the continuous stationary sizes are computed per
/// type; among λ whose size total lands within `budget_tol` of `N`, the one
/// minimizing `Σ g(n_i, q_i)` wins. When no λ meets the tolerance the
/// closest total is used as a fallback. The winner is rounded to a feasible
/// integer allocation.
pub fn solve_allocation(
    q: &[f64],
    n_units: u32,
    tau: Tau,
    cfg: &LagrangianConfig,
) -> Result<Allocation> {
    cfg.validate()?;
    if q.is_empty() {
        return Err(ArenaError::Input("complement vector is empty".into()));
    }
    if let Some(i) = q.iter().position(|&v| v <= 0.0 || v >= 1.0 || v.is_nan()) {
        return Err(ArenaError::Singular(format!(
            "q[{i}] = {} must lie strictly inside (0, 1); clip estimates first",
            q[i]
        )));
    }
    if (n_units as usize) < q.len() {
        return Err(ArenaError::Allocation(format!(
            "budget {n_units} is below the {} types requiring one unit each",
            q.len()
        )));
    }
    let n_max = n_units as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut fallback: Option<(f64, Vec<f64>)> = None;
    for lambda in cfg.lambda_grid() {
        let Some(ns) = sizes_for_lambda(q, lambda, tau, n_max, cfg)? else {
            continue;
        };
        let total: f64 = ns.iter().sum();
        let gap = (total - n_units as f64).abs();
        if fallback.as_ref().map_or(true, |(g, _)| gap < *g) {
            fallback = Some((gap, ns.clone()));
        }
        if gap < cfg.budget_tol {
            let objective: f64 = ns
                .iter()
                .zip(q)
                .map(|(&ni, &qi)| coverage::g_tail(ni, qi, tau))
                .sum();
            if best.as_ref().map_or(true, |(o, _)| objective < *o) {
                best = Some((objective, ns));
            }
        }
    }
    let cont = match (best, fallback) {
        (Some((_, ns)), _) => ns,
        // No grid point met the budget tolerance; fall back to the closest.
        (None, Some((_, ns))) => ns,
        (None, None) => {
            return Err(ArenaError::Bracket(
                "no lambda on the grid produced a solution for any type".into(),
            ))
        }
    };
    round_to_feasible(&cont, q, n_units)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{expected_coverage, greedy_optimal_allocation};

    #[test]
    fn closed_form_examples() {
        // Inverting lambda = q^n ln q at n = 4.
        let n = closed_form_n(0.5, -0.0433217).unwrap();
        assert!((n - 4.0).abs() < 1e-3, "n = {n}");

        // lambda = q^1 ln q gives n = 1.
        let n = closed_form_n(0.5, 0.5 * 0.5f64.ln()).unwrap();
        assert!((n - 1.0).abs() < 1e-12);

        // The result satisfies the stationarity condition f = 0.
        let lambda = -0.02;
        let n = closed_form_n(0.7, lambda).unwrap();
        let f = coverage::f_derivative(n, 0.7, lambda, Tau::One).unwrap();
        assert!(f.abs() < 1e-9, "f = {f}");
    }

    #[test]
    fn closed_form_domain_errors() {
        assert!(matches!(
            closed_form_n(0.5, 0.1),
            Err(ArenaError::Domain(_))
        ));
        assert!(matches!(
            closed_form_n(0.0, -0.1),
            Err(ArenaError::Singular(_))
        ));
        assert!(matches!(
            closed_form_n(1.0, -0.1),
            Err(ArenaError::Singular(_))
        ));
    }

    #[test]
    fn bisection_agrees_with_closed_form_for_tau_one() {
        // Targets keep lambda = q^n ln q inside the default grid range
        // [-0.5, -1e-6].
        let cfg = LagrangianConfig::for_types(2);
        for &q in &[0.3f64, 0.5, 0.8] {
            for target_n in [1.5, 3.0, 6.0, 10.0] {
                let lambda = q.powf(target_n) * q.ln();
                assert!(lambda <= -1e-6, "lambda {lambda} fell off the grid");
                let exact = closed_form_n(q, lambda).unwrap();
                let bis = bisect_n(q, lambda, Tau::One, 300.0, &cfg).unwrap();
                assert!(
                    (exact - bis).abs() < 1e-6,
                    "q={q} lambda={lambda}: closed {exact} vs bisect {bis}"
                );
            }
        }
    }

    #[test]
    fn bisection_root_is_stationary_for_tau_three() {
        let cfg = LagrangianConfig::for_types(2);
        let q = 0.8;
        // The tau = 3 derivative is non-monotone in n; pick lambda on a
        // sloped section (the derivative value at n = 5) so a sign change
        // exists within the scan granularity.
        let lambda = coverage::f_derivative(5.0, q, 0.0, Tau::Three).unwrap();
        let n = bisect_n(q, lambda, Tau::Three, 40.0, &cfg).unwrap();
        // Finite-difference slope of g at the root should equal lambda.
        let h = 1e-5;
        let slope =
            (coverage::g_tail(n + h, q, Tau::Three) - coverage::g_tail(n - h, q, Tau::Three))
                / (2.0 * h);
        assert!((slope - lambda).abs() < 1e-4, "slope {slope} vs {lambda}");
    }

    #[test]
    fn bisection_reports_missing_bracket() {
        let cfg = LagrangianConfig::for_types(2);
        // Far below every derivative value: f > 0 everywhere.
        let err = bisect_n(0.5, -10.0, Tau::One, 300.0, &cfg).unwrap_err();
        assert!(matches!(err, ArenaError::Bracket(_)));
    }

    #[test]
    fn solve_uniform_under_symmetry() {
        let cfg = LagrangianConfig::for_types(5);
        let alloc = solve_allocation(&[0.8; 5], 20, Tau::One, &cfg).unwrap();
        assert_eq!(alloc.counts(), &[4, 4, 4, 4, 4]);
    }

    #[test]
    fn solve_two_types_matches_brute_force() {
        let q = [0.5, 0.9];
        let p = [0.5, 0.1];
        let cfg = LagrangianConfig::for_types(2);
        let alloc = solve_allocation(&q, 10, Tau::One, &cfg).unwrap();
        let got = expected_coverage(&p, &alloc).unwrap();
        // Brute force over the 9 feasible splits.
        let best = (1..10u32)
            .map(|n0| {
                let a = Allocation::new(vec![n0, 10 - n0]).unwrap();
                expected_coverage(&p, &a).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (got - best).abs() < 1e-9,
            "lagrangian {got} vs brute force {best}"
        );
    }

    #[test]
    fn solve_three_types_near_greedy() {
        let q = [0.7, 0.8, 0.9];
        let p: Vec<f64> = q.iter().map(|&v| 1.0 - v).collect();
        let cfg = LagrangianConfig::for_types(3);
        let alloc = solve_allocation(&q, 30, Tau::One, &cfg).unwrap();
        let got = expected_coverage(&p, &alloc).unwrap();
        let opt = expected_coverage(&p, &greedy_optimal_allocation(&p, 30).unwrap()).unwrap();
        assert!(got >= 0.999 * opt, "lagrangian {got} vs greedy {opt}");
    }

    #[test]
    fn solve_keeps_budget_and_positivity() {
        let q = [0.3, 0.65, 0.9, 0.99, 0.55];
        let cfg = LagrangianConfig::for_types(5);
        for tau in [Tau::One, Tau::Two, Tau::Three] {
            let alloc = solve_allocation(&q, 40, tau, &cfg).unwrap();
            assert_eq!(alloc.total(), 40, "tau {}", tau.value());
            assert!(alloc.counts().iter().all(|&n| n >= 1));
        }
    }

    #[test]
    fn solve_rejects_unclipped_inputs() {
        let cfg = LagrangianConfig::for_types(2);
        assert!(matches!(
            solve_allocation(&[0.5, 1.0], 10, Tau::One, &cfg),
            Err(ArenaError::Singular(_))
        ));
        assert!(matches!(
            solve_allocation(&[0.0, 0.5], 10, Tau::One, &cfg),
            Err(ArenaError::Singular(_))
        ));
    }

    #[test]
    fn equalized_marginals_for_tau_one() {
        // Continuous stationary sizes satisfy q^n ln q = lambda for all
        // types.
        let q = [0.6, 0.8, 0.9, 0.95];
        let lambda = -0.005;
        let ns: Vec<f64> = q
            .iter()
            .map(|&qi| closed_form_n(qi, lambda).unwrap())
            .collect();
        for (&qi, &ni) in q.iter().zip(&ns) {
            let marg = qi.powf(ni) * qi.ln();
            assert!((marg - lambda).abs() < 1e-6, "marginal {marg} vs {lambda}");
        }
    }

    #[test]
    fn budget_total_is_monotone_in_lambda() {
        // For tau = 1, sum of closed-form sizes grows as lambda approaches 0.
        let q = [0.6, 0.8, 0.9];
        let cfg = LagrangianConfig::for_types(3);
        let mut prev = f64::NEG_INFINITY;
        for lambda in cfg.lambda_grid() {
            let total: f64 = q
                .iter()
                .map(|&qi| closed_form_n(qi, lambda).map(|n| n.clamp(1.0, 300.0)))
                .collect::<Result<Vec<_>>>()
                .map(|ns| ns.iter().sum())
                .unwrap_or(f64::NAN);
            if total.is_nan() {
                continue;
            }
            assert!(
                total >= prev - 1e-9,
                "total {total} dropped below {prev} at lambda {lambda}"
            );
            prev = total;
        }
    }
}
