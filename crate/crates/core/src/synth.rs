//! Behavior-policy synthesis.
//!
//! Per `(t, s)`, the behavior row minimizes the variance load
//! `sum_a pi(a)^2 r_tilde(a) / mu(a)` over the probability simplex, subject
//! to the expected-cost budget `sum_a mu(a) q_cost(a) <= delta`. The solver
//! works directly on the KKT system: stationarity pins every positive-weight
//! action at `mu_a = sqrt(w_a / (nu + lambda k_a))`, an inner bisection on
//! `nu` enforces the simplex, and an outer bisection on `lambda >= 0` drives
//! the cost to the budget. Zero-weight actions carry no objective and enter
//! only as cost sinks, in the regime where the dual says their reduced cost
//! `nu + lambda k_a` turns negative.
//!
//! The full policy is assembled backward in time: the extended reward at
//! step `t` depends on the already-synthesized rows at `t + 1`, and so do the
//! cost values entering the budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmdp::{Cmdp, TabularPolicy, ZERO_TOL};
use crate::dp::{self, StateActionTable, StateTable};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Safety tolerance: the behavior policy's expected remaining cost may exceed
/// the target policy's by at most a factor `1 + epsilon`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SafetyConfig {
    pub epsilon: f64,
}

impl SafetyConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidArgument("epsilon must be finite and >= 0".into()));
        }
        Ok(Self { epsilon })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative optimality tolerance certified through KKT residuals.
    pub dual_tolerance: f64,
    /// Iteration cap for each bisection level.
    pub max_bisection_iters: u32,
    /// Accepted slack when validating the cost constraint.
    pub constraint_slack_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { dual_tolerance: 1e-10, max_bisection_iters: 200, constraint_slack_tolerance: 1e-9 }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.dual_tolerance <= 0.0
            || self.constraint_slack_tolerance <= 0.0
            || self.max_bisection_iters == 0
        {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Which future policy the cost values in the budget are computed under.
/// The synthesized behavior's own future is the variant the safety guarantee
/// is proved for; the target-policy variant is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostFuture {
    SynthesizedBehavior,
    TargetPolicy,
}

/// Per-`(t, s)` cost budget: `(1 + epsilon)` times the target policy's
/// expected remaining cost.
pub fn safety_threshold(v_cost_pi: &StateTable, config: &SafetyConfig) -> StateTable {
    let mut out = StateTable::zeros(v_cost_pi.horizon(), v_cost_pi.num_states());
    for t in 0..v_cost_pi.horizon() {
        for s in 0..v_cost_pi.num_states() {
            out.set(t, s, (1.0 + config.epsilon) * v_cost_pi.get(t, s));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// StateProblem
// ---------------------------------------------------------------------------

/// One per-state constrained program: minimize `sum_a w_a / mu_a` over the
/// simplex subject to `sum_a mu_a k_a <= threshold`, with `mu_a > 0` forced
/// wherever the target-weighted action value is nonzero.
#[derive(Debug, Clone)]
pub struct StateProblem {
    weights: Vec<f64>,
    action_costs: Vec<f64>,
    threshold: f64,
    must_support: Vec<bool>,
    /// Feasibility witness: the target policy's row. Also the fallback
    /// solution when every weight vanishes.
    target_row: Vec<f64>,
}

impl StateProblem {
    /// Build from target-policy quantities: weights are
    /// `pi(a)^2 * r_tilde(a)`, and an action must stay supported when
    /// `pi(a) * q_pi(a)` is nonzero.
    pub fn new(
        target_row: &[f64],
        r_tilde_row: &[f64],
        q_pi_row: &[f64],
        action_costs: &[f64],
        threshold: f64,
    ) -> Result<Self> {
        let n = target_row.len();
        if r_tilde_row.len() != n || q_pi_row.len() != n || action_costs.len() != n {
            return Err(Error::ShapeMismatch("state problem rows differ in length".into()));
        }
        let weights: Vec<f64> =
            target_row.iter().zip(r_tilde_row).map(|(p, rt)| p * p * rt.max(0.0)).collect();
        let must_support: Vec<bool> =
            target_row.iter().zip(q_pi_row).map(|(p, q)| (p * q).abs() > ZERO_TOL).collect();
        Self::from_parts(weights, action_costs.to_vec(), threshold, must_support, target_row.to_vec())
    }

    /// Build from raw parts; `target_row` must witness feasibility.
    pub fn from_parts(
        mut weights: Vec<f64>,
        mut action_costs: Vec<f64>,
        threshold: f64,
        must_support: Vec<bool>,
        target_row: Vec<f64>,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidArgument("state problem needs at least one action".into()));
        }
        if action_costs.len() != n || must_support.len() != n || target_row.len() != n {
            return Err(Error::ShapeMismatch("state problem rows differ in length".into()));
        }
        for w in weights.iter_mut() {
            if *w < -1e-9 || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("negative weight {w}")));
            }
            *w = w.max(0.0);
        }
        for k in action_costs.iter_mut() {
            if *k < -1e-9 || !k.is_finite() {
                return Err(Error::InvalidArgument(format!("negative action cost {k}")));
            }
            *k = k.max(0.0);
        }
        if threshold < -1e-9 || !threshold.is_finite() {
            return Err(Error::InvalidArgument(format!("negative threshold {threshold}")));
        }
        let threshold = threshold.max(0.0);
        let row_sum: f64 = target_row.iter().sum();
        if (row_sum - 1.0).abs() > 1e-9 || target_row.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidPolicy("witness row is not a distribution".into()));
        }
        for a in 0..n {
            if must_support[a] && weights[a] <= 0.0 {
                return Err(Error::Infeasible(format!(
                    "action {a} must stay supported but has zero weight; \
                     inconsistent problem data"
                )));
            }
            if must_support[a] && target_row[a] <= 0.0 {
                return Err(Error::Infeasible(format!(
                    "action {a} must stay supported but the witness row drops it"
                )));
            }
        }
        let witness_cost: f64 = target_row.iter().zip(&action_costs).map(|(p, k)| p * k).sum();
        if witness_cost > threshold + 1e-9 * threshold.abs().max(1.0) {
            return Err(Error::Infeasible(format!(
                "witness row violates the budget: cost {witness_cost} > threshold {threshold}"
            )));
        }
        Ok(Self { weights, action_costs, threshold, must_support, target_row })
    }

    pub fn num_actions(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn action_costs(&self) -> &[f64] {
        &self.action_costs
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn must_support(&self) -> &[bool] {
        &self.must_support
    }

    pub fn target_row(&self) -> &[f64] {
        &self.target_row
    }

    /// Objective `sum_{a: mu_a > 0} w_a / mu_a`; infinite if any positive
    /// weight gets zero mass.
    pub fn objective(&self, mu: &[f64]) -> f64 {
        let mut total = 0.0;
        for (w, m) in self.weights.iter().zip(mu) {
            if *w > 0.0 {
                if *m > 0.0 {
                    total += w / m;
                } else {
                    return f64::INFINITY;
                }
            }
        }
        total
    }

    pub fn expected_cost(&self, mu: &[f64]) -> f64 {
        self.action_costs.iter().zip(mu).map(|(k, m)| k * m).sum()
    }
}

/// Solution of a per-state program with its KKT certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSolution {
    pub mu: Vec<f64>,
    /// Multiplier of the cost constraint.
    pub lambda: f64,
    /// Multiplier of the simplex equality.
    pub nu: f64,
    pub iterations: u32,
    pub objective: f64,
    pub expected_cost: f64,
    /// Zero-weight action carrying mass as a cost sink, if any.
    pub sink: Option<usize>,
    /// Set on measure-zero boundary cases where the budget pins the solution
    /// to the cheapest actions and the dual pair degenerates.
    pub degenerate: bool,
}

// ---------------------------------------------------------------------------
// KKT bisection solver
// ---------------------------------------------------------------------------

/// Positive-weight view of a problem: weights, costs shifted by the minimum
/// positive-support cost, for cancellation-free duals.
struct PositiveSupport {
    idx: Vec<usize>,
    w: Vec<f64>,
    k: Vec<f64>,
    min_cost: f64,
}

impl PositiveSupport {
    fn build(problem: &StateProblem) -> Option<Self> {
        let idx: Vec<usize> =
            (0..problem.num_actions()).filter(|&a| problem.weights[a] > 0.0).collect();
        if idx.is_empty() {
            return None;
        }
        let w: Vec<f64> = idx.iter().map(|&a| problem.weights[a]).collect();
        let k: Vec<f64> = idx.iter().map(|&a| problem.action_costs[a]).collect();
        let min_cost = k.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(Self { idx, w, k, min_cost })
    }

    /// Solve `sum_a sqrt(w_a / (sigma + lambda (k_a - min_cost))) = 1` for
    /// `sigma > 0`. The left side decreases from infinity, so the root is
    /// unique; `sigma <= (sum sqrt(w))^2` always brackets it.
    fn solve_sigma(&self, lambda: f64, max_iters: u32) -> f64 {
        let z: f64 = self.w.iter().map(|w| w.sqrt()).sum();
        let mut lo = 0.0_f64;
        let mut hi = z * z;
        let sum_at = |sigma: f64| -> f64 {
            self.w
                .iter()
                .zip(&self.k)
                .map(|(w, k)| (w / (sigma + lambda * (k - self.min_cost))).sqrt())
                .sum()
        };
        for _ in 0..max_iters.max(64) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sum_at(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Stationary row at the given duals, over the positive support only.
    fn mu_at(&self, lambda: f64, sigma: f64) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.k)
            .map(|(w, k)| (w / (sigma + lambda * (k - self.min_cost))).sqrt())
            .collect()
    }

    fn cost_of(&self, mu: &[f64]) -> f64 {
        mu.iter().zip(&self.k).map(|(m, k)| m * k).sum::<f64>() / mu.iter().sum::<f64>()
    }
}

fn scatter(n: usize, idx: &[usize], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, &a) in idx.iter().enumerate() {
        out[a] = values[i];
    }
    out
}

fn normalize(mu: &mut [f64]) {
    let sum: f64 = mu.iter().sum();
    if sum > 0.0 {
        for m in mu.iter_mut() {
            *m /= sum;
        }
    }
}

/// Cheapest zero-weight action, ties broken toward the lowest index.
fn cheapest_sink(problem: &StateProblem) -> Option<usize> {
    let mut best: Option<usize> = None;
    for a in 0..problem.num_actions() {
        if problem.weights[a] == 0.0 {
            match best {
                Some(b) if problem.action_costs[a] >= problem.action_costs[b] => {}
                _ => best = Some(a),
            }
        }
    }
    best
}

pub fn solve_state_problem(problem: &StateProblem, config: &SolverConfig) -> Result<StateSolution> {
    config.validate()?;
    let n = problem.num_actions();
    let delta = problem.threshold;

    let Some(support) = PositiveSupport::build(problem) else {
        // Every weight vanishes: any feasible row has objective zero, so the
        // witness row is optimal.
        let mu = problem.target_row.clone();
        let expected_cost = problem.expected_cost(&mu);
        return Ok(StateSolution {
            mu,
            lambda: 0.0,
            nu: 0.0,
            iterations: 0,
            objective: 0.0,
            expected_cost,
            sink: None,
            degenerate: false,
        });
    };

    // Unconstrained optimum: mass proportional to sqrt(w).
    let z: f64 = support.w.iter().map(|w| w.sqrt()).sum();
    let mut mu_pos: Vec<f64> = support.w.iter().map(|w| w.sqrt() / z).collect();
    if support.cost_of(&mu_pos) <= delta {
        let mut mu = scatter(n, &support.idx, &mu_pos);
        normalize(&mut mu);
        return Ok(finish(problem, mu, 0.0, z * z, 0, None, false, config));
    }

    let sink = cheapest_sink(problem);
    let scale = delta.abs().max(1.0);

    if support.min_cost < delta - 1e-13 * scale {
        // Regime with all mass on the positive support: bisect lambda until
        // the cost meets the budget, keeping the feasible side.
        let mut iterations = 0u32;
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut grow = 0;
        while {
            let sigma = support.solve_sigma(hi, config.max_bisection_iters);
            support.cost_of(&support.mu_at(hi, sigma)) > delta
        } {
            lo = hi;
            hi *= 4.0;
            grow += 1;
            if grow > 600 {
                return Err(Error::Solver {
                    t: 0,
                    state: 0,
                    message: "cost bisection failed to bracket the budget".into(),
                });
            }
        }
        for _ in 0..config.max_bisection_iters {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let sigma = support.solve_sigma(mid, config.max_bisection_iters);
            if support.cost_of(&support.mu_at(mid, sigma)) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = hi;
        let sigma = support.solve_sigma(lambda, config.max_bisection_iters);
        let nu = sigma - lambda * support.min_cost;

        // A strictly cheaper zero-weight action with negative reduced cost
        // takes mass as a sink; the duals then satisfy nu = -lambda * k_sink.
        if let Some(zidx) = sink {
            let k_sink = problem.action_costs[zidx];
            if nu + lambda * k_sink < -1e-12 * sigma.abs().max(1.0) && delta > k_sink {
                if let Some(sol) = solve_with_sink(problem, &support, zidx, iterations, config) {
                    return Ok(sol);
                }
            }
        }

        mu_pos = support.mu_at(lambda, sigma);
        let mut mu = scatter(n, &support.idx, &mu_pos);
        normalize(&mut mu);
        return Ok(finish(problem, mu, lambda, nu, iterations, None, false, config));
    }

    // The positive support alone cannot meet the budget.
    if let Some(zidx) = sink {
        let k_sink = problem.action_costs[zidx];
        if delta - k_sink > 1e-12 * scale {
            if let Some(sol) = solve_with_sink(problem, &support, zidx, 0, config) {
                return Ok(sol);
            }
        }
        if k_sink <= delta + 1e-12 * scale {
            // Budget equals the sink cost: everything the budget admits sits
            // on the sink. Legal only when nothing must stay supported.
            if problem.must_support.iter().any(|&m| m) {
                return Err(Error::Infeasible(
                    "budget admits only the zero-weight sink, but some actions must stay supported"
                        .into(),
                ));
            }
            let mut mu = vec![0.0; n];
            mu[zidx] = 1.0;
            return Ok(finish(problem, mu, 0.0, 0.0, 0, Some(zidx), true, config));
        }
    }
    if (support.min_cost - delta).abs() <= 1e-12 * scale {
        // Budget pins the row to the cheapest positive-weight actions.
        let cheap: Vec<usize> = support
            .idx
            .iter()
            .cloned()
            .filter(|&a| problem.action_costs[a] <= support.min_cost + 1e-12 * scale)
            .collect();
        for a in 0..n {
            if problem.must_support[a] && !cheap.contains(&a) {
                return Err(Error::Infeasible(format!(
                    "budget pins mass to the cheapest actions, dropping supported action {a}"
                )));
            }
        }
        let mut mu = vec![0.0; n];
        for &a in &cheap {
            mu[a] = problem.weights[a].sqrt();
        }
        normalize(&mut mu);
        return Ok(finish(problem, mu, 0.0, 0.0, 0, None, true, config));
    }
    Err(Error::Infeasible(format!(
        "budget {delta} below the cheapest achievable cost; the witness invariant was violated"
    )))
}

/// Closed-form solve in the sink regime: `nu = -lambda * k_sink`, the cost
/// constraint binds, and the budget above the sink cost is spent on the
/// positive support.
fn solve_with_sink(
    problem: &StateProblem,
    support: &PositiveSupport,
    zidx: usize,
    iterations: u32,
    config: &SolverConfig,
) -> Option<StateSolution> {
    let k_sink = problem.action_costs[zidx];
    let delta = problem.threshold;
    let d: f64 = support
        .w
        .iter()
        .zip(&support.k)
        .map(|(w, k)| (w * (k - k_sink)).sqrt())
        .sum();
    if !(delta > k_sink) || d <= 0.0 {
        return None;
    }
    let lambda = (d / (delta - k_sink)).powi(2);
    let mu_pos: Vec<f64> = support
        .w
        .iter()
        .zip(&support.k)
        .map(|(w, k)| (w / (lambda * (k - k_sink))).sqrt())
        .collect();
    let mass: f64 = mu_pos.iter().sum();
    if mass > 1.0 + 1e-9 {
        // The dual trigger was marginal; the positive support absorbs all
        // mass and the plain regime applies.
        return None;
    }
    let mut mu = scatter(problem.num_actions(), &support.idx, &mu_pos);
    mu[zidx] = (1.0 - mass).max(0.0);
    normalize(&mut mu);
    Some(finish(problem, mu, lambda, -lambda * k_sink, iterations, Some(zidx), false, config))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &StateProblem,
    mu: Vec<f64>,
    lambda: f64,
    nu: f64,
    iterations: u32,
    sink: Option<usize>,
    degenerate: bool,
    _config: &SolverConfig,
) -> StateSolution {
    let objective = problem.objective(&mu);
    let expected_cost = problem.expected_cost(&mu);
    StateSolution { mu, lambda, nu, iterations, objective, expected_cost, sink, degenerate }
}

// ---------------------------------------------------------------------------
// Backward synthesis driver
// ---------------------------------------------------------------------------

/// Where the per-cell quantities feeding synthesis come from: exact model
/// tensors or offline estimates.
pub(crate) trait SynthesisBackend: Sync {
    fn dims(&self) -> (usize, usize, usize);
    fn target(&self) -> &TabularPolicy;
    fn q_pi(&self, t: usize, s: usize, a: usize) -> f64;
    fn terminal_r_tilde(&self, s: usize, a: usize) -> f64;
    /// Backup for earlier steps; `pullback[s']` is the importance-weighted
    /// next-step extended reward already summed over actions.
    fn r_tilde_backup(&self, t: usize, s: usize, a: usize, pullback: &[f64]) -> f64;
    fn terminal_cost(&self, s: usize, a: usize) -> f64;
    fn cost_backup(&self, t: usize, s: usize, a: usize, v_cost_next: &[f64]) -> f64;
    fn threshold(&self, t: usize, s: usize) -> f64;
    fn cost_future(&self) -> CostFuture;
    fn state_covered(&self, _t: usize, _s: usize) -> bool {
        true
    }
    fn must_support(&self, t: usize, s: usize, a: usize, weight: f64) -> bool;
}

pub(crate) enum SynthMode {
    Odi,
    Scope(SolverConfig),
}

/// Per-state diagnostics of a synthesis run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub t: usize,
    pub s: usize,
    pub lambda: f64,
    pub nu: f64,
    pub iterations: u32,
    pub objective: f64,
    pub expected_cost: f64,
    pub threshold: f64,
    pub slack: f64,
    pub sink: Option<usize>,
    pub degenerate: bool,
    pub covered: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SynthReport {
    pub states: Vec<StateDiagnostics>,
}

impl SynthReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// A synthesized behavior policy with its solver diagnostics.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub policy: TabularPolicy,
    pub report: SynthReport,
}

pub(crate) fn synthesize_backward(
    backend: &dyn SynthesisBackend,
    mode: &SynthMode,
) -> Result<(TabularPolicy, SynthReport)> {
    let (horizon, s_n, a_n) = backend.dims();
    let target = backend.target();
    let mut mu_probs = vec![0.0; horizon * s_n * a_n];
    let mut r_tilde = StateActionTable::zeros(horizon, s_n, a_n);
    let mut q_cost = StateActionTable::zeros(horizon, s_n, a_n);
    let mut report = SynthReport::default();
    let with_cost = matches!(mode, SynthMode::Scope(_));

    for t in (0..horizon).rev() {
        if t + 1 == horizon {
            for s in 0..s_n {
                for a in 0..a_n {
                    r_tilde.set(t, s, a, backend.terminal_r_tilde(s, a));
                    if with_cost {
                        q_cost.set(t, s, a, backend.terminal_cost(s, a));
                    }
                }
            }
        } else {
            // Importance-weighted pullback of the next step's extended
            // reward, using the rows synthesized at t + 1.
            let mu_next_base = (t + 1) * s_n * a_n;
            let mut pullback = vec![0.0; s_n];
            for (s_next, value) in pullback.iter_mut().enumerate() {
                let mu_row = &mu_probs[mu_next_base + s_next * a_n..mu_next_base + (s_next + 1) * a_n];
                let q_row: Vec<f64> = (0..a_n).map(|a| backend.q_pi(t + 1, s_next, a)).collect();
                *value = dp::importance_weighted_row_sum(
                    t + 1,
                    s_next,
                    target.row(t + 1, s_next),
                    mu_row,
                    r_tilde.row(t + 1, s_next),
                    &q_row,
                )?;
            }
            for s in 0..s_n {
                for a in 0..a_n {
                    r_tilde.set(t, s, a, backend.r_tilde_backup(t, s, a, &pullback));
                }
            }
            if with_cost {
                let mut v_cost_next = vec![0.0; s_n];
                for (s_next, value) in v_cost_next.iter_mut().enumerate() {
                    let acting: &[f64] = match backend.cost_future() {
                        CostFuture::SynthesizedBehavior => {
                            &mu_probs[mu_next_base + s_next * a_n..mu_next_base + (s_next + 1) * a_n]
                        }
                        CostFuture::TargetPolicy => target.row(t + 1, s_next),
                    };
                    *value = acting
                        .iter()
                        .enumerate()
                        .map(|(a, p)| p * q_cost.get(t + 1, s_next, a))
                        .sum();
                }
                for s in 0..s_n {
                    for a in 0..a_n {
                        q_cost.set(t, s, a, backend.cost_backup(t, s, a, &v_cost_next));
                    }
                }
            }
        }

        // Per-state solves within the step are independent.
        let rows: Vec<Result<(Vec<f64>, Option<StateDiagnostics>)>> = (0..s_n)
            .into_par_iter()
            .map(|s| solve_row(backend, mode, t, s, &r_tilde, &q_cost))
            .collect();
        for (s, row) in rows.into_iter().enumerate() {
            let (row, diag) = row?;
            let base = (t * s_n + s) * a_n;
            mu_probs[base..base + a_n].copy_from_slice(&row);
            if let Some(diag) = diag {
                report.states.push(diag);
            }
        }
    }

    let policy = TabularPolicy::new(horizon, s_n, a_n, mu_probs)?;
    Ok((policy, report))
}

fn solve_row(
    backend: &dyn SynthesisBackend,
    mode: &SynthMode,
    t: usize,
    s: usize,
    r_tilde: &StateActionTable,
    q_cost: &StateActionTable,
) -> Result<(Vec<f64>, Option<StateDiagnostics>)> {
    let (_, _, a_n) = backend.dims();
    let target = backend.target();
    let pi_row = target.row(t, s);

    if !backend.state_covered(t, s) {
        let diag = StateDiagnostics {
            t,
            s,
            lambda: 0.0,
            nu: 0.0,
            iterations: 0,
            objective: 0.0,
            expected_cost: 0.0,
            threshold: 0.0,
            slack: 0.0,
            sink: None,
            degenerate: false,
            covered: false,
        };
        return Ok((pi_row.to_vec(), Some(diag)));
    }

    let weights: Vec<f64> =
        (0..a_n).map(|a| pi_row[a] * pi_row[a] * r_tilde.get(t, s, a).max(0.0)).collect();

    match mode {
        SynthMode::Odi => {
            if weights.iter().all(|&w| w == 0.0) {
                return Ok((pi_row.to_vec(), None));
            }
            let mut row: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
            normalize(&mut row);
            Ok((row, None))
        }
        SynthMode::Scope(solver) => {
            let must_support: Vec<bool> =
                (0..a_n).map(|a| backend.must_support(t, s, a, weights[a])).collect();
            let costs: Vec<f64> = (0..a_n).map(|a| q_cost.get(t, s, a).max(0.0)).collect();
            let threshold = backend.threshold(t, s);
            let problem =
                StateProblem::from_parts(weights, costs, threshold, must_support, pi_row.to_vec())
                    .map_err(|e| Error::Solver { t, state: s, message: e.to_string() })?;
            let sol = solve_state_problem(&problem, solver)
                .map_err(|e| Error::Solver { t, state: s, message: e.to_string() })?;
            let slack = sol.expected_cost - threshold;
            if slack > solver.constraint_slack_tolerance * threshold.abs().max(1.0) {
                return Err(Error::Solver {
                    t,
                    state: s,
                    message: format!("constraint violated by {slack}"),
                });
            }
            let diag = StateDiagnostics {
                t,
                s,
                lambda: sol.lambda,
                nu: sol.nu,
                iterations: sol.iterations,
                objective: sol.objective,
                expected_cost: sol.expected_cost,
                threshold,
                slack,
                sink: sol.sink,
                degenerate: sol.degenerate,
                covered: true,
            };
            Ok((sol.mu, Some(diag)))
        }
    }
}

// ---------------------------------------------------------------------------
// Exact-model backend
// ---------------------------------------------------------------------------

struct ExactBackend<'a> {
    model: &'a Cmdp,
    target: &'a TabularPolicy,
    q_pi: StateActionTable,
    thresholds: StateTable,
    cost_future: CostFuture,
}

impl<'a> ExactBackend<'a> {
    fn build(
        model: &'a Cmdp,
        target: &'a TabularPolicy,
        safety: &SafetyConfig,
        cost_future: CostFuture,
    ) -> Result<Self> {
        let (q_pi, _v) = dp::reward_values(model, target)?;
        let (_qc, v_cost_pi) = dp::cost_values(model, target)?;
        let thresholds = safety_threshold(&v_cost_pi, safety);
        Ok(Self { model, target, q_pi, thresholds, cost_future })
    }
}

impl SynthesisBackend for ExactBackend<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        (self.model.horizon(), self.model.num_states(), self.model.num_actions())
    }

    fn target(&self) -> &TabularPolicy {
        self.target
    }

    fn q_pi(&self, t: usize, s: usize, a: usize) -> f64 {
        self.q_pi.get(t, s, a)
    }

    fn terminal_r_tilde(&self, s: usize, a: usize) -> f64 {
        let r = self.model.reward(s, a);
        r * r
    }

    fn r_tilde_backup(&self, t: usize, s: usize, a: usize, pullback: &[f64]) -> f64 {
        let r = self.model.reward(s, a);
        let expect: f64 =
            self.model.transition_row(s, a).iter().zip(pullback).map(|(p, g)| p * g).sum();
        2.0 * self.q_pi.get(t, s, a) * r - r * r + expect
    }

    fn terminal_cost(&self, s: usize, a: usize) -> f64 {
        self.model.cost(s, a)
    }

    fn cost_backup(&self, _t: usize, s: usize, a: usize, v_cost_next: &[f64]) -> f64 {
        self.model.cost(s, a)
            + self
                .model
                .transition_row(s, a)
                .iter()
                .zip(v_cost_next)
                .map(|(p, v)| p * v)
                .sum::<f64>()
    }

    fn threshold(&self, t: usize, s: usize) -> f64 {
        self.thresholds.get(t, s)
    }

    fn cost_future(&self) -> CostFuture {
        self.cost_future
    }

    fn must_support(&self, t: usize, s: usize, a: usize, _weight: f64) -> bool {
        (self.target.prob(t, s, a) * self.q_pi.get(t, s, a)).abs() > ZERO_TOL
    }
}

/// Synthesize the safety-constrained variance-minimizing behavior policy
/// from exact model quantities, backward in time.
pub fn synthesize_scope(
    model: &Cmdp,
    target: &TabularPolicy,
    safety: &SafetyConfig,
    solver: &SolverConfig,
) -> Result<SynthOutput> {
    synthesize_scope_with(model, target, safety, solver, CostFuture::SynthesizedBehavior)
}

pub fn synthesize_scope_with(
    model: &Cmdp,
    target: &TabularPolicy,
    safety: &SafetyConfig,
    solver: &SolverConfig,
    cost_future: CostFuture,
) -> Result<SynthOutput> {
    target.check_shape(model)?;
    solver.validate()?;
    let backend = ExactBackend::build(model, target, safety, cost_future)?;
    let (policy, report) = synthesize_backward(&backend, &SynthMode::Scope(*solver))?;
    Ok(SynthOutput { policy, report })
}

/// Unconstrained variance-optimal behavior policy: per state, mass
/// proportional to `pi(a) * sqrt(r_tilde(a))`, with the target row as the
/// all-zero-weight fallback.
pub fn synthesize_odi(model: &Cmdp, target: &TabularPolicy) -> Result<TabularPolicy> {
    target.check_shape(model)?;
    let safety = SafetyConfig { epsilon: 0.0 };
    let backend = ExactBackend::build(model, target, &safety, CostFuture::SynthesizedBehavior)?;
    let (policy, _report) = synthesize_backward(&backend, &SynthMode::Odi)?;
    Ok(policy)
}

// ---------------------------------------------------------------------------
// Reference solver (test-time cross-validation)
// ---------------------------------------------------------------------------

pub mod reference {
    //! Projected-gradient reference for the per-state program. Slow and
    //! simple on purpose: a safeguarded gradient step followed by exact
    //! projection onto the simplex intersected with the budget halfspace.

    use super::StateProblem;

    /// Euclidean projection onto the probability simplex (sorting method).
    pub fn project_simplex(v: &[f64]) -> Vec<f64> {
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cumulative = 0.0;
        let mut tau = 0.0;
        for (j, &u) in sorted.iter().enumerate() {
            cumulative += u;
            let candidate = (cumulative - 1.0) / (j + 1) as f64;
            if u - candidate > 0.0 {
                tau = candidate;
            }
        }
        v.iter().map(|&x| (x - tau).max(0.0)).collect()
    }

    /// Projection onto `simplex ∩ {k . x <= delta}` by bisecting the
    /// halfspace multiplier; `k . P(v - theta k)` is non-increasing in theta.
    pub fn project_feasible(v: &[f64], costs: &[f64], delta: f64) -> Vec<f64> {
        let x = project_simplex(v);
        let cost: f64 = x.iter().zip(costs).map(|(a, b)| a * b).sum();
        if cost <= delta {
            return x;
        }
        let shifted = |theta: f64| -> Vec<f64> {
            let moved: Vec<f64> = v.iter().zip(costs).map(|(a, k)| a - theta * k).collect();
            project_simplex(&moved)
        };
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut grow = 0;
        while shifted(hi).iter().zip(costs).map(|(a, b)| a * b).sum::<f64>() > delta {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 200 {
                break;
            }
        }
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let c: f64 = shifted(mid).iter().zip(costs).map(|(a, b)| a * b).sum();
            if c > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        shifted(hi)
    }

    /// Projected gradient with backtracking, started from the feasibility
    /// witness. Returns the final iterate.
    pub fn projected_gradient(problem: &StateProblem, iterations: usize) -> Vec<f64> {
        let n = problem.num_actions();
        let w = problem.weights();
        let costs = problem.action_costs();
        let delta = problem.threshold();
        let mut x = problem.target_row().to_vec();
        let mut fx = problem.objective(&x);
        let mut step = 1.0;
        for _ in 0..iterations {
            let grad: Vec<f64> = (0..n)
                .map(|a| if w[a] > 0.0 { -w[a] / (x[a] * x[a]) } else { 0.0 })
                .collect();
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = (0..n).map(|a| x[a] - step * grad[a]).collect();
                let y = project_feasible(&trial, costs, delta);
                let fy = problem.objective(&y);
                // Sufficient decrease against the quadratic upper model.
                let linear: f64 = grad.iter().zip(y.iter().zip(&x)).map(|(g, (yi, xi))| g * (yi - xi)).sum();
                let dist2: f64 = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if fy.is_finite() && fy <= fx + linear + dist2 / (2.0 * step) + 1e-15 {
                    x = y;
                    fx = fy;
                    accepted = true;
                    break;
                }
                step *= 0.5;
                if step < 1e-18 {
                    break;
                }
            }
            if !accepted {
                break;
            }
            step = (step * 1.5).min(1e6);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_random_cmdp;
    use crate::oracle;
    use crate::rng::Rng;

    fn grid_search_objective(problem: &StateProblem, resolution: usize) -> f64 {
        // Fine grid over the 2- or 3-action simplex; test-only brute force.
        let n = problem.num_actions();
        let mut best = f64::INFINITY;
        match n {
            2 => {
                for i in 0..=resolution {
                    let p = i as f64 / resolution as f64;
                    let mu = vec![p, 1.0 - p];
                    if problem.expected_cost(&mu) <= problem.threshold() + 1e-12 {
                        best = best.min(problem.objective(&mu));
                    }
                }
            }
            3 => {
                for i in 0..=resolution {
                    for j in 0..=(resolution - i) {
                        let p = i as f64 / resolution as f64;
                        let q = j as f64 / resolution as f64;
                        let mu = vec![p, q, 1.0 - p - q];
                        if problem.expected_cost(&mu) <= problem.threshold() + 1e-12 {
                            best = best.min(problem.objective(&mu));
                        }
                    }
                }
            }
            _ => panic!("grid search supports 2 or 3 actions"),
        }
        best
    }

    #[test]
    fn threshold_scales_cost_values() {
        let mut v = StateTable::zeros(2, 2);
        v.set(0, 0, 3.0);
        v.set(1, 1, 1.5);
        let zero = safety_threshold(&v, &SafetyConfig { epsilon: 0.0 });
        assert_eq!(zero.data(), v.data());
        let one = safety_threshold(&v, &SafetyConfig { epsilon: 1.0 });
        assert_eq!(one.get(0, 0), 6.0);
        assert_eq!(one.get(1, 1), 3.0);
    }

    #[test]
    fn single_action_returns_point_mass() {
        let p = StateProblem::from_parts(vec![0.5], vec![0.3], 0.4, vec![true], vec![1.0]).unwrap();
        let sol = solve_state_problem(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.mu, vec![1.0]);
    }

    #[test]
    fn constant_extended_reward_returns_target() {
        // w = pi^2 * k: sqrt-weights proportional to pi itself.
        let pi = vec![0.2, 0.3, 0.5];
        let r_tilde = vec![2.0, 2.0, 2.0];
        let q = vec![1.0, 1.0, 1.0];
        let costs = vec![0.4, 0.4, 0.4];
        let p = StateProblem::new(&pi, &r_tilde, &q, &costs, 0.4).unwrap();
        let sol = solve_state_problem(&p, &SolverConfig::default()).unwrap();
        for (a, &m) in sol.mu.iter().enumerate() {
            assert!((m - pi[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn unconstrained_optimum_is_sqrt_weighted() {
        // pi = (1/2, 1/2), r_tilde = (1, 4): optimal mass (1/3, 2/3).
        let p = StateProblem::new(&[0.5, 0.5], &[1.0, 4.0], &[1.0, 2.0], &[0.5, 0.5], 1.0).unwrap();
        let sol = solve_state_problem(&p, &SolverConfig::default()).unwrap();
        assert!((sol.mu[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.mu[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(sol.lambda, 0.0);
    }

    #[test]
    fn binding_constraint_example() {
        // Unconstrained optimum (1/3, 2/3) costs 2/3 > 1/2; the constrained
        // optimum sits on the budget at (1/2, 1/2) with objective 2.5.
        let p = StateProblem::new(&[0.5, 0.5], &[1.0, 4.0], &[1.0, 2.0], &[0.0, 1.0], 0.5).unwrap();
        let sol = solve_state_problem(&p, &SolverConfig::default()).unwrap();
        assert!((sol.mu[0] - 0.5).abs() < 1e-9, "mu = {:?}", sol.mu);
        assert!((sol.mu[1] - 0.5).abs() < 1e-9);
        assert!((sol.objective - 2.5).abs() < 1e-9);
        assert!(sol.lambda > 0.0);
        let grid = grid_search_objective(&p, 2000);
        assert!(sol.objective <= grid + 1e-6);
    }

    #[test]
    fn zero_weight_sink_takes_mass_when_dual_demands() {
        // Two costly positive-weight actions plus a free zero-weight action:
        // diverting mass to the sink loosens the budget enough to win.
        let p = StateProblem::from_parts(
            vec![1.0, 1.0, 0.0],
            vec![5.0, 3.0, 0.0],
            3.5,
            vec![true, true, false],
            vec![0.3, 0.4, 0.3],
        )
        .unwrap();
        let sol = solve_state_problem(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.sink, Some(2));
        assert!(sol.mu[2] > 0.05, "sink mass {:?}", sol.mu);
        assert!((sol.expected_cost - 3.5).abs() < 1e-9);
        // Hand-derived optimum: objective about 4.499, beating the best
        // sink-free row (5.333).
        assert!((sol.objective - 4.4989).abs() < 1e-3);
        let grid = grid_search_objective(&p, 2000);
        assert!((sol.objective - grid).abs() < 2e-3);
    }

    #[test]
    fn must_support_with_zero_weight_is_rejected() {
        let err = StateProblem::from_parts(
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            1.0,
            vec![true, true],
            vec![0.5, 0.5],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn infeasible_witness_is_rejected() {
        let err =
            StateProblem::from_parts(vec![1.0], vec![2.0], 1.0, vec![true], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    fn random_problem(rng: &mut Rng, n: usize) -> StateProblem {
        // Random target row, action values with occasional exact zeros, and
        // extended rewards at least q^2 (as in the exact recursion).
        let mut pi: Vec<f64> = (0..n).map(|_| -(1.0 - rng.next_f64()).ln()).collect();
        let sum: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= sum);
        let q: Vec<f64> = (0..n)
            .map(|_| if rng.next_f64() < 0.25 { 0.0 } else { rng.uniform(-1.0, 1.0) })
            .collect();
        let r_tilde: Vec<f64> = q
            .iter()
            .map(|&qa| {
                if qa == 0.0 && rng.next_f64() < 0.5 {
                    0.0
                } else {
                    qa * qa + rng.next_f64()
                }
            })
            .collect();
        let costs: Vec<f64> =
            (0..n).map(|_| if rng.next_f64() < 0.15 { 0.0 } else { rng.next_f64() }).collect();
        let witness_cost: f64 = pi.iter().zip(&costs).map(|(p, k)| p * k).sum();
        let threshold = witness_cost * (1.0 + rng.next_f64());
        StateProblem::new(&pi, &r_tilde, &q, &costs, threshold).unwrap()
    }

    #[test]
    fn kkt_conditions_hold_on_random_problems() {
        let mut rng = Rng::new(77);
        let cfg = SolverConfig::default();
        for i in 0..400 {
            let n = 2 + (rng.next_u64() % 5) as usize;
            let p = random_problem(&mut rng, n);
            let sol = solve_state_problem(&p, &cfg).unwrap();
            let total: f64 = sol.mu.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "case {i}: mass {total}");
            assert!(
                sol.expected_cost <= p.threshold() + 1e-9 * p.threshold().max(1.0),
                "case {i}: cost {} > {}",
                sol.expected_cost,
                p.threshold()
            );
            assert!(sol.lambda >= 0.0);
            if sol.degenerate {
                continue;
            }
            // Stationarity on the positive support.
            for a in 0..n {
                if p.weights()[a] > 0.0 {
                    let expect = (p.weights()[a] / (sol.nu + sol.lambda * p.action_costs()[a])).sqrt();
                    assert!(
                        (sol.mu[a] - expect).abs() < 1e-7 * expect.max(1.0),
                        "case {i}: stationarity off at {a}: {} vs {}",
                        sol.mu[a],
                        expect
                    );
                }
            }
            // Complementary slackness.
            let residual = sol.lambda * (sol.expected_cost - p.threshold());
            assert!(residual.abs() < 1e-8, "case {i}: slackness {residual}");
        }
    }

    #[test]
    fn objective_matches_projected_gradient_reference() {
        let mut rng = Rng::new(123);
        let cfg = SolverConfig::default();
        for _ in 0..60 {
            let n = 2 + (rng.next_u64() % 4) as usize;
            let p = random_problem(&mut rng, n);
            let sol = solve_state_problem(&p, &cfg).unwrap();
            let pg = reference::projected_gradient(&p, 4000);
            let pg_obj = p.objective(&pg);
            let scale = pg_obj.abs().max(1.0);
            assert!(
                sol.objective <= pg_obj + 1e-6 * scale,
                "bisection {} worse than reference {}",
                sol.objective,
                pg_obj
            );
            assert!(
                pg_obj <= sol.objective + 1e-5 * scale,
                "reference {} noticeably beats bisection {}",
                pg_obj,
                sol.objective
            );
        }
    }

    #[test]
    fn objective_is_monotone_in_epsilon() {
        let m = make_random_cmdp(3, 3, 3, 5).unwrap();
        let pi = TabularPolicy::uniform(3, 3, 3);
        let cfg = SolverConfig::default();
        let mut previous = f64::INFINITY;
        for eps in [0.0, 0.1, 0.5, 1.0, 4.0] {
            let out =
                synthesize_scope(&m, &pi, &SafetyConfig { epsilon: eps }, &cfg).unwrap();
            let total: f64 = out.report.states.iter().map(|d| d.objective).sum();
            assert!(total <= previous + 1e-9, "eps {eps}: {total} > {previous}");
            previous = total;
        }
    }

    #[test]
    fn zero_cost_makes_scope_equal_odi() {
        let m = {
            let mut data = make_random_cmdp(3, 2, 3, 9).unwrap().data().clone();
            data.cost.iter_mut().for_each(|c| *c = 0.0);
            Cmdp::from_data(data).unwrap()
        };
        let pi = TabularPolicy::uniform(3, 3, 2);
        let scope =
            synthesize_scope(&m, &pi, &SafetyConfig { epsilon: 0.0 }, &SolverConfig::default())
                .unwrap();
        let odi = synthesize_odi(&m, &pi).unwrap();
        for t in 0..3 {
            for s in 0..3 {
                for a in 0..2 {
                    assert!((scope.policy.prob(t, s, a) - odi.prob(t, s, a)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn huge_epsilon_matches_odi() {
        let m = make_random_cmdp(3, 2, 3, 21).unwrap();
        let pi = TabularPolicy::uniform(3, 3, 2);
        let scope =
            synthesize_scope(&m, &pi, &SafetyConfig { epsilon: 1e9 }, &SolverConfig::default())
                .unwrap();
        let odi = synthesize_odi(&m, &pi).unwrap();
        for t in 0..3 {
            for s in 0..3 {
                for a in 0..2 {
                    assert!((scope.policy.prob(t, s, a) - odi.prob(t, s, a)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn horizon_one_reduces_to_bandit_program() {
        let m = make_random_cmdp(2, 3, 1, 13).unwrap();
        let pi = TabularPolicy::uniform(1, 2, 3);
        let eps = SafetyConfig { epsilon: 0.0 };
        let out = synthesize_scope(&m, &pi, &eps, &SolverConfig::default()).unwrap();
        for s in 0..2 {
            // Direct bandit construction: weights pi^2 r^2, costs c, budget
            // the target's expected cost.
            let pi_row = pi.row(0, s);
            let r_tilde: Vec<f64> = (0..3).map(|a| m.reward(s, a).powi(2)).collect();
            let q: Vec<f64> = (0..3).map(|a| m.reward(s, a)).collect();
            let costs: Vec<f64> = (0..3).map(|a| m.cost(s, a)).collect();
            let delta: f64 = pi_row.iter().zip(&costs).map(|(p, k)| p * k).sum();
            let problem = StateProblem::new(pi_row, &r_tilde, &q, &costs, delta).unwrap();
            let sol = solve_state_problem(&problem, &SolverConfig::default()).unwrap();
            for a in 0..3 {
                assert!((out.policy.prob(0, s, a) - sol.mu[a]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scope_is_safe_and_reduces_variance_on_random_models() {
        for seed in [1u64, 2, 3, 4, 5] {
            let m = make_random_cmdp(3, 2, 3, seed).unwrap();
            let policies = crate::envs::make_target_policies(&m, 1, seed).unwrap();
            let pi = &policies[0];
            let out =
                synthesize_scope(&m, pi, &SafetyConfig { epsilon: 0.0 }, &SolverConfig::default())
                    .unwrap();
            let mu = &out.policy;

            let (q, _v) = dp::reward_values(&m, pi).unwrap();
            assert!(crate::cmdp::in_enlarged_space(&m, pi, mu, &q));

            let on = oracle::exact_moments(&m, pi, pi).unwrap();
            let off = oracle::exact_moments(&m, pi, mu).unwrap();
            assert!(
                off.expected_cost <= on.expected_cost + 1e-9,
                "seed {seed}: cost {} vs {}",
                off.expected_cost,
                on.expected_cost
            );
            assert!(
                off.variance <= on.variance + 1e-9,
                "seed {seed}: variance {} vs {}",
                off.variance,
                on.variance
            );
        }
    }

    #[test]
    fn per_state_variance_chain_odi_scope_target() {
        for seed in [11u64, 12, 13] {
            let m = make_random_cmdp(3, 2, 3, seed).unwrap();
            let pi = crate::envs::make_target_policies(&m, 1, seed).unwrap().remove(0);
            let scope =
                synthesize_scope(&m, &pi, &SafetyConfig { epsilon: 0.0 }, &SolverConfig::default())
                    .unwrap()
                    .policy;
            let odi = synthesize_odi(&m, &pi).unwrap();
            let v_pi = dp::pdis_variance_closed_form(&m, &pi, &pi).unwrap();
            let v_scope = dp::pdis_variance_closed_form(&m, &pi, &scope).unwrap();
            let v_odi = dp::pdis_variance_closed_form(&m, &pi, &odi).unwrap();
            for t in 0..3 {
                for s in 0..3 {
                    assert!(v_odi.get(t, s) <= v_scope.get(t, s) + 1e-9);
                    assert!(v_scope.get(t, s) <= v_pi.get(t, s) + 1e-9);
                }
            }
        }
    }
}
