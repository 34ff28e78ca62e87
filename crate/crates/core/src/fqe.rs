//! Behavior-policy-agnostic offline learning: logged `(t, s, a, r, c, s')`
//! tuples, tabular fitted Q-evaluation, and behavior-policy synthesis driven
//! entirely by dataset estimates through the same backward pipeline as the
//! exact path.
//!
//! Uncovered `(t, s, a)` cells fall back to zero estimates, and states with
//! no coverage at all keep the target policy's row.

use serde::{Deserialize, Serialize};

use crate::cmdp::{Cmdp, TabularPolicy};
use crate::dp::{self, StateActionTable, StateTable};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::synth::{
    safety_threshold, synthesize_backward, CostFuture, SafetyConfig, SolverConfig, SynthMode,
    SynthOutput, SynthesisBackend,
};

/// One logged transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfflineTuple {
    pub t: usize,
    pub s: usize,
    pub a: usize,
    pub reward: f64,
    pub cost: f64,
    pub next_state: usize,
}

/// A bag of logged tuples with per-cell coverage counts. Trajectory
/// structure is deliberately absent.
#[derive(Debug, Clone)]
pub struct OfflineDataset {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    tuples: Vec<OfflineTuple>,
    counts: Vec<u32>,
}

impl OfflineDataset {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            tuples: Vec::new(),
            counts: vec![0; horizon * num_states * num_actions],
        }
    }

    pub fn from_tuples(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        tuples: Vec<OfflineTuple>,
    ) -> Result<Self> {
        let mut out = Self::new(horizon, num_states, num_actions);
        for tuple in tuples {
            out.push(tuple)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, tuple: OfflineTuple) -> Result<()> {
        if tuple.t >= self.horizon
            || tuple.s >= self.num_states
            || tuple.a >= self.num_actions
            || tuple.next_state >= self.num_states
        {
            return Err(Error::InvalidArgument(format!(
                "tuple out of range: t={} s={} a={} s'={}",
                tuple.t, tuple.s, tuple.a, tuple.next_state
            )));
        }
        if tuple.cost < 0.0 || !tuple.cost.is_finite() || !tuple.reward.is_finite() {
            return Err(Error::InvalidArgument("tuple has invalid reward or cost".into()));
        }
        self.counts[(tuple.t * self.num_states + tuple.s) * self.num_actions + tuple.a] += 1;
        self.tuples.push(tuple);
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[OfflineTuple] {
        &self.tuples
    }

    pub fn coverage_count(&self, t: usize, s: usize, a: usize) -> u32 {
        self.counts[(t * self.num_states + s) * self.num_actions + a]
    }

    pub fn state_covered(&self, t: usize, s: usize) -> bool {
        (0..self.num_actions).any(|a| self.coverage_count(t, s, a) > 0)
    }

    /// CSV with header `t,s,a,reward,cost,next_state`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,a,reward,cost,next_state\n");
        for tuple in &self.tuples {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                tuple.t, tuple.s, tuple.a, tuple.reward, tuple.cost, tuple.next_state
            ));
        }
        out
    }

    pub fn from_csv(text: &str, horizon: usize, num_states: usize, num_actions: usize) -> Result<Self> {
        let mut out = Self::new(horizon, num_states, num_actions);
        for (line_no, line) in text.lines().enumerate() {
            if line_no == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Serialization(format!(
                    "line {}: expected 6 fields, got {}",
                    line_no + 1,
                    fields.len()
                )));
            }
            let parse_idx = |x: &str| -> Result<usize> {
                x.trim().parse().map_err(|_| Error::Serialization(format!("bad index '{x}'")))
            };
            let parse_val = |x: &str| -> Result<f64> {
                x.trim().parse().map_err(|_| Error::Serialization(format!("bad value '{x}'")))
            };
            out.push(OfflineTuple {
                t: parse_idx(fields[0])?,
                s: parse_idx(fields[1])?,
                a: parse_idx(fields[2])?,
                reward: parse_val(fields[3])?,
                cost: parse_val(fields[4])?,
                next_state: parse_idx(fields[5])?,
            })?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DatasetWire {
            horizon: self.horizon,
            num_states: self.num_states,
            num_actions: self.num_actions,
            tuples: self.tuples.clone(),
        })
        .expect("dataset serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: DatasetWire = serde_json::from_str(text)?;
        Self::from_tuples(wire.horizon, wire.num_states, wire.num_actions, wire.tuples)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetWire {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    tuples: Vec<OfflineTuple>,
}

/// Roll out each policy and flatten every step into tuples. The final
/// next state of each episode is sampled too, so last-step tuples are
/// complete.
pub fn generate_offline_dataset(
    model: &Cmdp,
    policies: &[TabularPolicy],
    episodes_per_policy: usize,
    rng: &Rng,
) -> Result<OfflineDataset> {
    let horizon = model.horizon();
    let mut out = OfflineDataset::new(horizon, model.num_states(), model.num_actions());
    for (policy_idx, policy) in policies.iter().enumerate() {
        policy.check_shape(model)?;
        let mut policy_rng = rng.split(policy_idx as u64);
        for _ in 0..episodes_per_policy {
            let mut state = policy_rng.sample_index(model.initial_dist());
            for t in 0..horizon {
                let action = policy_rng.sample_index(policy.row(t, state));
                let next_state = policy_rng.sample_index(model.transition_row(state, action));
                out.push(OfflineTuple {
                    t,
                    s: state,
                    a: action,
                    reward: model.reward(state, action),
                    cost: model.cost(state, action),
                    next_state,
                })?;
                state = next_state;
            }
        }
    }
    Ok(out)
}

/// Keep each tuple independently with probability `keep_fraction`; simulates
/// incomplete logs.
pub fn subsample(dataset: &OfflineDataset, keep_fraction: f64, rng: &mut Rng) -> Result<OfflineDataset> {
    if !(0.0..=1.0).contains(&keep_fraction) {
        return Err(Error::InvalidArgument("keep_fraction must be in [0, 1]".into()));
    }
    let kept: Vec<OfflineTuple> = dataset
        .tuples
        .iter()
        .filter(|_| rng.next_f64() < keep_fraction)
        .cloned()
        .collect();
    OfflineDataset::from_tuples(dataset.horizon, dataset.num_states, dataset.num_actions, kept)
}

// ---------------------------------------------------------------------------
// Cell aggregates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
struct CellStats {
    count: f64,
    sum_reward: f64,
    sum_reward_sq: f64,
    sum_cost: f64,
    /// Next-state visit counts, sparse.
    next: Vec<(usize, f64)>,
}

fn aggregate(dataset: &OfflineDataset) -> Vec<CellStats> {
    let n = dataset.horizon * dataset.num_states * dataset.num_actions;
    let mut cells = vec![CellStats::default(); n];
    for tuple in &dataset.tuples {
        let cell =
            &mut cells[(tuple.t * dataset.num_states + tuple.s) * dataset.num_actions + tuple.a];
        cell.count += 1.0;
        cell.sum_reward += tuple.reward;
        cell.sum_reward_sq += tuple.reward * tuple.reward;
        cell.sum_cost += tuple.cost;
        match cell.next.iter_mut().find(|(s, _)| *s == tuple.next_state) {
            Some((_, c)) => *c += 1.0,
            None => cell.next.push((tuple.next_state, 1.0)),
        }
    }
    cells
}

impl CellStats {
    fn mean_next(&self, values: &[f64]) -> f64 {
        self.next.iter().map(|(s, c)| c * values[*s]).sum::<f64>() / self.count
    }
}

/// Which per-step signal fitted Q-evaluation regresses on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Reward,
    Cost,
}

/// Tabular fitted Q-evaluation of the target policy from logged tuples:
/// per cell, the empirical mean of `signal + E_{a'~pi}[q_{t+1}(s', a')]`,
/// swept backward. Uncovered cells stay at zero.
pub fn fqe_values(
    dataset: &OfflineDataset,
    target: &TabularPolicy,
    signal: Signal,
) -> Result<(StateActionTable, StateTable)> {
    check_dims(dataset, target)?;
    let (horizon, s_n, a_n) = (dataset.horizon, dataset.num_states, dataset.num_actions);
    let cells = aggregate(dataset);
    let mut q = StateActionTable::zeros(horizon, s_n, a_n);
    let mut v = StateTable::zeros(horizon, s_n);
    for t in (0..horizon).rev() {
        for s in 0..s_n {
            let mut v_s = 0.0;
            for a in 0..a_n {
                let cell = &cells[(t * s_n + s) * a_n + a];
                let mut q_sa = 0.0;
                if cell.count > 0.0 {
                    q_sa = match signal {
                        Signal::Reward => cell.sum_reward,
                        Signal::Cost => cell.sum_cost,
                    } / cell.count;
                    if t + 1 < horizon {
                        q_sa += cell.mean_next(v.time_slice(t + 1));
                    }
                }
                q.set(t, s, a, q_sa);
                v_s += target.prob(t, s, a) * q_sa;
            }
            v.set(t, s, v_s);
        }
    }
    Ok((q, v))
}

/// Extended-reward estimate from tuples, swept backward against the given
/// future behavior; estimates are clamped at zero from below.
pub fn fqe_extended_reward(
    dataset: &OfflineDataset,
    target: &TabularPolicy,
    future_behavior: &TabularPolicy,
    q_hat: &StateActionTable,
) -> Result<StateActionTable> {
    check_dims(dataset, target)?;
    check_dims(dataset, future_behavior)?;
    let (horizon, s_n, a_n) = (dataset.horizon, dataset.num_states, dataset.num_actions);
    let cells = aggregate(dataset);
    let mut r_tilde = StateActionTable::zeros(horizon, s_n, a_n);
    for t in (0..horizon).rev() {
        let pullback: Option<Vec<f64>> = if t + 1 < horizon {
            let mut values = vec![0.0; s_n];
            for (s_next, value) in values.iter_mut().enumerate() {
                *value = dp::importance_weighted_row_sum(
                    t + 1,
                    s_next,
                    target.row(t + 1, s_next),
                    future_behavior.row(t + 1, s_next),
                    r_tilde.row(t + 1, s_next),
                    q_hat.row(t + 1, s_next),
                )?;
            }
            Some(values)
        } else {
            None
        };
        for s in 0..s_n {
            for a in 0..a_n {
                let cell = &cells[(t * s_n + s) * a_n + a];
                if cell.count == 0.0 {
                    continue;
                }
                let value = match &pullback {
                    None => cell.sum_reward_sq / cell.count,
                    Some(values) => {
                        (2.0 * q_hat.get(t, s, a) * cell.sum_reward - cell.sum_reward_sq)
                            / cell.count
                            + cell.mean_next(values)
                    }
                };
                r_tilde.set(t, s, a, value.max(0.0));
            }
        }
    }
    Ok(r_tilde)
}

fn check_dims(dataset: &OfflineDataset, policy: &TabularPolicy) -> Result<()> {
    if policy.horizon() != dataset.horizon
        || policy.num_states() != dataset.num_states
        || policy.num_actions() != dataset.num_actions
    {
        return Err(Error::ShapeMismatch(format!(
            "policy is ({}, {}, {}), dataset needs ({}, {}, {})",
            policy.horizon(),
            policy.num_states(),
            policy.num_actions(),
            dataset.horizon,
            dataset.num_states,
            dataset.num_actions
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Offline synthesis backend
// ---------------------------------------------------------------------------

struct OfflineBackend<'a> {
    dataset: &'a OfflineDataset,
    target: &'a TabularPolicy,
    cells: Vec<CellStats>,
    q_pi: StateActionTable,
    thresholds: StateTable,
}

impl<'a> OfflineBackend<'a> {
    fn build(dataset: &'a OfflineDataset, target: &'a TabularPolicy, safety: &SafetyConfig) -> Result<Self> {
        check_dims(dataset, target)?;
        let (q_pi, _v) = fqe_values(dataset, target, Signal::Reward)?;
        let (_qc, v_cost_pi) = fqe_values(dataset, target, Signal::Cost)?;
        let thresholds = safety_threshold(&v_cost_pi, safety);
        Ok(Self { dataset, target, cells: aggregate(dataset), q_pi, thresholds })
    }

    fn cell(&self, t: usize, s: usize, a: usize) -> &CellStats {
        &self.cells[(t * self.dataset.num_states + s) * self.dataset.num_actions + a]
    }
}

impl SynthesisBackend for OfflineBackend<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        (self.dataset.horizon, self.dataset.num_states, self.dataset.num_actions)
    }

    fn target(&self) -> &TabularPolicy {
        self.target
    }

    fn q_pi(&self, t: usize, s: usize, a: usize) -> f64 {
        self.q_pi.get(t, s, a)
    }

    fn terminal_r_tilde(&self, s: usize, a: usize) -> f64 {
        let cell = self.cell(self.dataset.horizon - 1, s, a);
        if cell.count > 0.0 {
            cell.sum_reward_sq / cell.count
        } else {
            0.0
        }
    }

    fn r_tilde_backup(&self, t: usize, s: usize, a: usize, pullback: &[f64]) -> f64 {
        let cell = self.cell(t, s, a);
        if cell.count == 0.0 {
            return 0.0;
        }
        let local = (2.0 * self.q_pi.get(t, s, a) * cell.sum_reward - cell.sum_reward_sq)
            / cell.count;
        (local + cell.mean_next(pullback)).max(0.0)
    }

    fn terminal_cost(&self, s: usize, a: usize) -> f64 {
        let cell = self.cell(self.dataset.horizon - 1, s, a);
        if cell.count > 0.0 {
            cell.sum_cost / cell.count
        } else {
            0.0
        }
    }

    fn cost_backup(&self, t: usize, s: usize, a: usize, v_cost_next: &[f64]) -> f64 {
        let cell = self.cell(t, s, a);
        if cell.count == 0.0 {
            return 0.0;
        }
        cell.sum_cost / cell.count + cell.mean_next(v_cost_next)
    }

    fn threshold(&self, t: usize, s: usize) -> f64 {
        self.thresholds.get(t, s)
    }

    fn cost_future(&self) -> CostFuture {
        CostFuture::SynthesizedBehavior
    }

    fn state_covered(&self, t: usize, s: usize) -> bool {
        self.dataset.state_covered(t, s)
    }

    fn must_support(&self, _t: usize, _s: usize, _a: usize, weight: f64) -> bool {
        // Offline, support is pinned by the estimated weights themselves:
        // noisy estimates may drive r_tilde to zero where the exact values
        // would not, and a support rule tied to q-hat alone would then
        // reject its own solution.
        weight > 0.0
    }
}

/// Safety-constrained synthesis from offline estimates alone. States with no
/// coverage keep the target policy's row.
pub fn synthesize_scope_offline(
    dataset: &OfflineDataset,
    target: &TabularPolicy,
    safety: &SafetyConfig,
    solver: &SolverConfig,
) -> Result<SynthOutput> {
    let backend = OfflineBackend::build(dataset, target, safety)?;
    let (policy, report) = synthesize_backward(&backend, &SynthMode::Scope(*solver))?;
    Ok(SynthOutput { policy, report })
}

/// Unconstrained variance-optimal policy from offline estimates.
pub fn synthesize_odi_offline(dataset: &OfflineDataset, target: &TabularPolicy) -> Result<TabularPolicy> {
    let backend =
        OfflineBackend::build(dataset, target, &SafetyConfig { epsilon: 0.0 })?;
    let (policy, _report) = synthesize_backward(&backend, &SynthMode::Odi)?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_random_cmdp, make_target_policies};
    use crate::synth::synthesize_scope;

    /// Model with eighth-rational transition rows so an exact-frequency
    /// dataset is constructible.
    fn rational_model(horizon: usize) -> Cmdp {
        Cmdp::new(
            2,
            2,
            horizon,
            vec![
                0.25, 0.75, // s0 a0
                0.5, 0.5, // s0 a1
                0.875, 0.125, // s1 a0
                1.0, 0.0, // s1 a1
            ],
            vec![0.3, -0.2, 1.0, 0.6],
            vec![0.1, 0.9, 0.4, 0.2],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    /// One tuple per eighth of transition probability at every cell: the
    /// empirical frequencies equal the model exactly.
    fn exhaustive_dataset(model: &Cmdp) -> OfflineDataset {
        let mut dataset =
            OfflineDataset::new(model.horizon(), model.num_states(), model.num_actions());
        for t in 0..model.horizon() {
            for s in 0..model.num_states() {
                for a in 0..model.num_actions() {
                    for s_next in 0..model.num_states() {
                        let copies = (model.transition(s, a, s_next) * 8.0).round() as usize;
                        for _ in 0..copies {
                            dataset
                                .push(OfflineTuple {
                                    t,
                                    s,
                                    a,
                                    reward: model.reward(s, a),
                                    cost: model.cost(s, a),
                                    next_state: s_next,
                                })
                                .unwrap();
                        }
                    }
                }
            }
        }
        dataset
    }

    #[test]
    fn one_episode_yields_horizon_tuples() {
        let m = make_random_cmdp(3, 2, 3, 0).unwrap();
        let pi = TabularPolicy::uniform(3, 3, 2);
        let d = generate_offline_dataset(&m, &[pi], 1, &Rng::new(4)).unwrap();
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn empty_policy_list_yields_empty_dataset() {
        let m = make_random_cmdp(3, 2, 3, 0).unwrap();
        let d = generate_offline_dataset(&m, &[], 100, &Rng::new(4)).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn coverage_matches_reachability() {
        let m = rational_model(3);
        let policies = make_target_policies(&m, 5, 3).unwrap();
        let d = generate_offline_dataset(&m, &policies, 400, &Rng::new(8)).unwrap();
        // Forward-reachable states under the soft mixture: every state with
        // positive visit probability. Soft policies make every action of a
        // reached state samplable.
        let mut reach = vec![vec![false; 2]; 3];
        for s in 0..2 {
            if m.initial_prob(s) > 0.0 {
                reach[0][s] = true;
            }
        }
        for t in 0..2 {
            for s in 0..2 {
                if !reach[t][s] {
                    continue;
                }
                for a in 0..2 {
                    for s_next in 0..2 {
                        if m.transition(s, a, s_next) > 0.0 {
                            reach[t + 1][s_next] = true;
                        }
                    }
                }
            }
        }
        for t in 0..3 {
            for s in 0..2 {
                for a in 0..2 {
                    let covered = d.coverage_count(t, s, a) > 0;
                    if covered {
                        assert!(reach[t][s], "covered unreachable cell (t={t}, s={s})");
                    }
                    if reach[t][s] {
                        assert!(covered, "reachable cell uncovered (t={t}, s={s}, a={a})");
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_dataset_reproduces_exact_values() {
        let m = rational_model(3);
        let pi = TabularPolicy::from_rows(3, 2, 2, |_t, s| vec![0.6 + 0.1 * s as f64, 0.4 - 0.1 * s as f64])
            .unwrap();
        let d = exhaustive_dataset(&m);
        let (q_hat, v_hat) = fqe_values(&d, &pi, Signal::Reward).unwrap();
        let (q, v) = dp::reward_values(&m, &pi).unwrap();
        for t in 0..3 {
            for s in 0..2 {
                assert!((v_hat.get(t, s) - v.get(t, s)).abs() < 1e-10);
                for a in 0..2 {
                    assert!((q_hat.get(t, s, a) - q.get(t, s, a)).abs() < 1e-10);
                }
            }
        }
        let rt_hat = fqe_extended_reward(&d, &pi, &pi, &q_hat).unwrap();
        let rt = dp::extended_reward(&m, &pi, &pi, &q).unwrap();
        for t in 0..3 {
            for s in 0..2 {
                for a in 0..2 {
                    assert!(
                        (rt_hat.get(t, s, a) - rt.get(t, s, a).max(0.0)).abs() < 1e-10,
                        "t={t} s={s} a={a}"
                    );
                }
            }
        }
    }

    #[test]
    fn single_deterministic_trajectory_recovers_exact_values_along_it() {
        let m = Cmdp::new(
            2,
            2,
            3,
            vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.5, 2.0, 0.25],
            vec![0.0; 4],
            vec![1.0, 0.0],
        )
        .unwrap();
        let pi = TabularPolicy::new(3, 2, 2, vec![1.0, 0.0].repeat(6)).unwrap();
        let d = generate_offline_dataset(&m, &[pi.clone()], 1, &Rng::new(0)).unwrap();
        let (q_hat, _v) = fqe_values(&d, &pi, Signal::Reward).unwrap();
        let (q, _v) = dp::reward_values(&m, &pi).unwrap();
        // The single trajectory visits s0 (a0), then s1 (a0), then s0 (a0).
        assert!((q_hat.get(0, 0, 0) - q.get(0, 0, 0)).abs() < 1e-12);
        assert!((q_hat.get(1, 1, 0) - q.get(1, 1, 0)).abs() < 1e-12);
        assert!((q_hat.get(2, 0, 0) - q.get(2, 0, 0)).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_dataset_gives_zero_extended_reward() {
        let m = {
            let mut data = rational_model(3).data().clone();
            data.reward.iter_mut().for_each(|r| *r = 0.0);
            Cmdp::from_data(data).unwrap()
        };
        let pi = TabularPolicy::uniform(3, 2, 2);
        let d = generate_offline_dataset(&m, &[pi.clone()], 50, &Rng::new(1)).unwrap();
        let (q_hat, _v) = fqe_values(&d, &pi, Signal::Reward).unwrap();
        let rt = fqe_extended_reward(&d, &pi, &pi, &q_hat).unwrap();
        assert!(rt.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn extended_reward_estimates_never_go_negative() {
        let m = make_random_cmdp(3, 2, 4, 12).unwrap();
        let policies = make_target_policies(&m, 3, 2).unwrap();
        let d = generate_offline_dataset(&m, &policies, 30, &Rng::new(2)).unwrap();
        let pi = &policies[1];
        let (q_hat, _v) = fqe_values(&d, pi, Signal::Reward).unwrap();
        let rt = fqe_extended_reward(&d, pi, pi, &q_hat).unwrap();
        assert!(rt.min() >= 0.0);
    }

    #[test]
    fn offline_synthesis_matches_exact_on_exhaustive_data() {
        let m = rational_model(3);
        let pi = TabularPolicy::from_rows(3, 2, 2, |_t, s| vec![0.6 + 0.1 * s as f64, 0.4 - 0.1 * s as f64])
            .unwrap();
        let d = exhaustive_dataset(&m);
        let safety = SafetyConfig { epsilon: 0.0 };
        let solver = SolverConfig::default();
        let offline = synthesize_scope_offline(&d, &pi, &safety, &solver).unwrap();
        let exact = synthesize_scope(&m, &pi, &safety, &solver).unwrap();
        for t in 0..3 {
            for s in 0..2 {
                for a in 0..2 {
                    assert!(
                        (offline.policy.prob(t, s, a) - exact.policy.prob(t, s, a)).abs() < 1e-8,
                        "(t={t}, s={s}, a={a}): offline {} vs exact {}",
                        offline.policy.prob(t, s, a),
                        exact.policy.prob(t, s, a)
                    );
                }
            }
        }
    }

    #[test]
    fn uncovered_states_fall_back_to_target_row() {
        let m = rational_model(3);
        let pi = TabularPolicy::from_rows(3, 2, 2, |_t, _s| vec![0.7, 0.3]).unwrap();
        // Coverage only at t = 2: earlier states must keep pi's rows.
        let mut d = OfflineDataset::new(3, 2, 2);
        for s in 0..2 {
            for a in 0..2 {
                d.push(OfflineTuple { t: 2, s, a, reward: 1.0, cost: 0.1, next_state: 0 }).unwrap();
            }
        }
        let out = synthesize_scope_offline(&d, &pi, &SafetyConfig { epsilon: 0.0 }, &SolverConfig::default())
            .unwrap();
        for t in 0..2 {
            for s in 0..2 {
                assert_eq!(out.policy.row(t, s), pi.row(t, s), "t={t} s={s}");
            }
        }
        let uncovered: Vec<_> =
            out.report.states.iter().filter(|d| !d.covered).map(|d| (d.t, d.s)).collect();
        assert_eq!(uncovered.len(), 4);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let m = make_random_cmdp(3, 2, 2, 3).unwrap();
        let pi = TabularPolicy::uniform(2, 3, 2);
        let d = generate_offline_dataset(&m, &[pi], 5, &Rng::new(6)).unwrap();
        let csv = d.to_csv();
        let back = OfflineDataset::from_csv(&csv, 2, 3, 2).unwrap();
        assert_eq!(d.tuples(), back.tuples());
        let json_back = OfflineDataset::from_json(&d.to_json()).unwrap();
        assert_eq!(d.tuples(), json_back.tuples());
    }

    #[test]
    fn loader_rejects_out_of_range_tuples() {
        let text = "t,s,a,reward,cost,next_state\n0,5,0,1.0,0.0,0\n";
        assert!(OfflineDataset::from_csv(text, 2, 3, 2).is_err());
    }

    #[test]
    fn subsample_keeps_a_fraction() {
        let m = make_random_cmdp(2, 2, 3, 5).unwrap();
        let pi = TabularPolicy::uniform(3, 2, 2);
        let d = generate_offline_dataset(&m, &[pi], 200, &Rng::new(7)).unwrap();
        let half = subsample(&d, 0.5, &mut Rng::new(8)).unwrap();
        let fraction = half.len() as f64 / d.len() as f64;
        assert!((fraction - 0.5).abs() < 0.1, "kept {fraction}");
    }
}
