//! Exact backward dynamic programming for every value-like quantity:
//! reward and cost action values, next-state value variance, the extended
//! reward driving behavior-policy synthesis, and the closed-form per-state
//! variance of the per-decision importance sampling (PDIS) estimator.
//!
//! All operations are pure functions on immutable inputs; the only data
//! dependency is backward across time steps.

use serde::{Deserialize, Serialize};

use crate::cmdp::{Cmdp, TabularPolicy, ZERO_TOL};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Dense tables
// ---------------------------------------------------------------------------

/// Dense `(t, s, a)`-indexed table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionTable {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    data: Vec<f64>,
}

impl StateActionTable {
    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self { horizon, num_states, num_actions, data: vec![0.0; horizon * num_states * num_actions] }
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

    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.data[(t * self.num_states + s) * self.num_actions + a]
    }

    #[inline]
    pub fn set(&mut self, t: usize, s: usize, a: usize, value: f64) {
        self.data[(t * self.num_states + s) * self.num_actions + a] = value;
    }

    #[inline]
    pub fn row(&self, t: usize, s: usize) -> &[f64] {
        let base = (t * self.num_states + s) * self.num_actions;
        &self.data[base..base + self.num_actions]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.horizon)
            .map(|t| (0..self.num_states).map(|s| self.row(t, s).to_vec()).collect())
            .collect()
    }

    fn from_nested(nested: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let horizon = nested.len();
        let num_states = nested.first().map_or(0, |x| x.len());
        let num_actions = nested.first().and_then(|x| x.first()).map_or(0, |x| x.len());
        let data: Vec<f64> = nested.into_iter().flatten().flatten().collect();
        if horizon * num_states * num_actions != data.len() {
            return Err(Error::Serialization("ragged (t, s, a) tensor".into()));
        }
        Ok(Self { horizon, num_states, num_actions, data })
    }
}

/// Dense `(t, s)`-indexed table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    horizon: usize,
    num_states: usize,
    data: Vec<f64>,
}

impl StateTable {
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        Self { horizon, num_states, data: vec![0.0; horizon * num_states] }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.data[t * self.num_states + s]
    }

    #[inline]
    pub fn set(&mut self, t: usize, s: usize, value: f64) {
        self.data[t * self.num_states + s] = value;
    }

    #[inline]
    pub fn time_slice(&self, t: usize) -> &[f64] {
        &self.data[t * self.num_states..(t + 1) * self.num_states]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.horizon).map(|t| self.time_slice(t).to_vec()).collect()
    }

    fn from_nested(nested: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = nested.len();
        let num_states = nested.first().map_or(0, |x| x.len());
        let data: Vec<f64> = nested.into_iter().flatten().collect();
        if horizon * num_states != data.len() {
            return Err(Error::Serialization("ragged (t, s) tensor".into()));
        }
        Ok(Self { horizon, num_states, data })
    }
}

// ---------------------------------------------------------------------------
// Value recursions
// ---------------------------------------------------------------------------

fn backward_values(
    model: &Cmdp,
    acting: &TabularPolicy,
    signal: impl Fn(usize, usize) -> f64,
) -> (StateActionTable, StateTable) {
    let (horizon, s_n, a_n) = (model.horizon(), model.num_states(), model.num_actions());
    let mut q = StateActionTable::zeros(horizon, s_n, a_n);
    let mut v = StateTable::zeros(horizon, s_n);
    for t in (0..horizon).rev() {
        for s in 0..s_n {
            let mut v_s = 0.0;
            for a in 0..a_n {
                let mut q_sa = signal(s, a);
                if t + 1 < horizon {
                    let row = model.transition_row(s, a);
                    let next = v.time_slice(t + 1);
                    q_sa += row.iter().zip(next).map(|(p, vn)| p * vn).sum::<f64>();
                }
                q.set(t, s, a, q_sa);
                v_s += acting.prob(t, s, a) * q_sa;
            }
            v.set(t, s, v_s);
        }
    }
    (q, v)
}

/// Action- and state-value functions of the target policy for the reward:
/// `q_t(s,a) = r(s,a) + E_{s'}[v_{t+1}(s')]`, `v_t(s) = E_{a~pi}[q_t(s,a)]`.
pub fn reward_values(model: &Cmdp, target: &TabularPolicy) -> Result<(StateActionTable, StateTable)> {
    target.check_shape(model)?;
    Ok(backward_values(model, target, |s, a| model.reward(s, a)))
}

/// Same recursion for the cost signal, under the supplied acting policy
/// (the target, or a synthesized behavior).
pub fn cost_values(model: &Cmdp, policy: &TabularPolicy) -> Result<(StateActionTable, StateTable)> {
    policy.check_shape(model)?;
    Ok(backward_values(model, policy, |s, a| model.cost(s, a)))
}

/// Expected performance `sum_s p0(s) v_0(s)` for a state-value table.
pub fn initial_value(model: &Cmdp, v: &StateTable) -> f64 {
    model
        .initial_dist()
        .iter()
        .zip(v.time_slice(0))
        .map(|(p, val)| p * val)
        .sum()
}

/// Variance of the next state's value given the current state-action pair:
/// zero at the final step, otherwise `V_{s'~p(.|s,a)}(v_{t+1}(s'))`.
pub fn next_state_value_variance(model: &Cmdp, v: &StateTable) -> Result<StateActionTable> {
    let (horizon, s_n, a_n) = (model.horizon(), model.num_states(), model.num_actions());
    if v.horizon() != horizon || v.num_states() != s_n {
        return Err(Error::ShapeMismatch("state-value table does not match model".into()));
    }
    let mut nu = StateActionTable::zeros(horizon, s_n, a_n);
    for t in 0..horizon.saturating_sub(1) {
        let next = v.time_slice(t + 1);
        for s in 0..s_n {
            for a in 0..a_n {
                let row = model.transition_row(s, a);
                let mut mean = 0.0;
                let mut second = 0.0;
                for (p, vn) in row.iter().zip(next) {
                    mean += p * vn;
                    second += p * vn * vn;
                }
                // Clamp tiny negatives from cancellation.
                nu.set(t, s, a, (second - mean * mean).max(0.0));
            }
        }
    }
    Ok(nu)
}

/// Importance-weighted row sum `sum_a pi(a)^2 / mu(a) * r_tilde(a)` with the
/// support conventions of the enlarged space:
///
/// * `mu(a) = 0` with `pi(a) * r_tilde(a) = 0` contributes nothing;
/// * `mu(a) = 0` with `pi(a) * q(a) = 0` is a legal drop (the action is never
///   reached under `mu`, and unbiasedness does not need it), contributing
///   nothing even if `r_tilde(a) > 0`;
/// * `mu(a) = 0` anywhere else means `mu` has left the enlarged space.
pub(crate) fn importance_weighted_row_sum(
    t: usize,
    s: usize,
    pi_row: &[f64],
    mu_row: &[f64],
    r_tilde_row: &[f64],
    q_row: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for a in 0..pi_row.len() {
        let pi = pi_row[a];
        let mu = mu_row[a];
        if mu > 0.0 {
            total += pi * pi * r_tilde_row[a] / mu;
        } else if (pi * r_tilde_row[a]).abs() > ZERO_TOL && (pi * q_row[a]).abs() > ZERO_TOL {
            return Err(Error::OutsideEnlargedSpace { t, state: s, action: a });
        }
    }
    Ok(total)
}

/// Extended reward by backward recursion: `r(s,a)^2` at the final step, and
///
/// ```text
/// r_tilde_t(s,a) = 2 q_t(s,a) r(s,a) - r(s,a)^2
///                + E_{s'}[ sum_a' pi_{t+1}(a'|s')^2 / mu_{t+1}(a'|s') * r_tilde_{t+1}(s',a') ]
/// ```
///
/// for earlier steps, where `mu` is the behavior policy acting from `t+1`
/// onward. This avoids ever touching the trajectory variance directly.
/// `q` must hold the target policy's reward action values.
pub fn extended_reward(
    model: &Cmdp,
    target: &TabularPolicy,
    future_behavior: &TabularPolicy,
    q: &StateActionTable,
) -> Result<StateActionTable> {
    target.check_shape(model)?;
    future_behavior.check_shape(model)?;
    let (horizon, s_n, a_n) = (model.horizon(), model.num_states(), model.num_actions());
    let mut r_tilde = StateActionTable::zeros(horizon, s_n, a_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let r = model.reward(s, a);
            r_tilde.set(horizon - 1, s, a, r * r);
        }
    }
    for t in (0..horizon.saturating_sub(1)).rev() {
        // Per-successor pullback of the next step's weighted extended reward.
        let mut pullback = vec![0.0; s_n];
        for (s_next, value) in pullback.iter_mut().enumerate() {
            *value = importance_weighted_row_sum(
                t + 1,
                s_next,
                target.row(t + 1, s_next),
                future_behavior.row(t + 1, s_next),
                r_tilde.row(t + 1, s_next),
                q.row(t + 1, s_next),
            )?;
        }
        for s in 0..s_n {
            for a in 0..a_n {
                let r = model.reward(s, a);
                let expect: f64 = model
                    .transition_row(s, a)
                    .iter()
                    .zip(&pullback)
                    .map(|(p, g)| p * g)
                    .sum();
                r_tilde.set(t, s, a, 2.0 * q.get(t, s, a) * r - r * r + expect);
            }
        }
    }
    Ok(r_tilde)
}

/// Closed-form per-`(t, s)` variance of the PDIS estimator under `behavior`:
/// `V_t(s) = sum_a pi^2/mu * r_tilde_t(s,a) - v_t(s)^2`, with the extended
/// reward computed under the same behavior's future.
pub fn pdis_variance_closed_form(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
) -> Result<StateTable> {
    let (q, v) = reward_values(model, target)?;
    behavior.check_shape(model)?;
    let r_tilde = extended_reward(model, target, behavior, &q)?;
    let (horizon, s_n) = (model.horizon(), model.num_states());
    let mut var = StateTable::zeros(horizon, s_n);
    for t in 0..horizon {
        for s in 0..s_n {
            let weighted = importance_weighted_row_sum(
                t,
                s,
                target.row(t, s),
                behavior.row(t, s),
                r_tilde.row(t, s),
                q.row(t, s),
            )?;
            let v_ts = v.get(t, s);
            var.set(t, s, weighted - v_ts * v_ts);
        }
    }
    Ok(var)
}

// ---------------------------------------------------------------------------
// ValueTables bundle
// ---------------------------------------------------------------------------

/// The full set of target-policy tables: reward values `q`/`v`, cost values
/// `q_cost`/`v_cost`, next-state value variance `nu`, and the on-policy
/// extended reward `r_tilde` (future behavior = target).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub q: StateActionTable,
    pub v: StateTable,
    pub q_cost: StateActionTable,
    pub v_cost: StateTable,
    pub nu: StateActionTable,
    pub r_tilde: StateActionTable,
}

impl ValueTables {
    pub fn for_target(model: &Cmdp, target: &TabularPolicy) -> Result<Self> {
        let (q, v) = reward_values(model, target)?;
        let (q_cost, v_cost) = cost_values(model, target)?;
        let nu = next_state_value_variance(model, &v)?;
        let r_tilde = extended_reward(model, target, target, &q)?;
        Ok(Self { q, v, q_cost, v_cost, nu, r_tilde })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ValueTablesWire::from(self)).expect("value tables serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: ValueTablesWire = serde_json::from_str(text)?;
        Ok(Self {
            q: StateActionTable::from_nested(wire.q)?,
            v: StateTable::from_nested(wire.v)?,
            q_cost: StateActionTable::from_nested(wire.q_cost)?,
            v_cost: StateTable::from_nested(wire.v_cost)?,
            nu: StateActionTable::from_nested(wire.nu)?,
            r_tilde: StateActionTable::from_nested(wire.r_tilde)?,
        })
    }
}

/// JSON schema for [`ValueTables`]: each tensor as nested row-major arrays.
#[derive(Serialize, Deserialize)]
struct ValueTablesWire {
    q: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<f64>>,
    q_cost: Vec<Vec<Vec<f64>>>,
    v_cost: Vec<Vec<f64>>,
    nu: Vec<Vec<Vec<f64>>>,
    r_tilde: Vec<Vec<Vec<f64>>>,
}

impl From<&ValueTables> for ValueTablesWire {
    fn from(v: &ValueTables) -> Self {
        ValueTablesWire {
            q: v.q.to_nested(),
            v: v.v.to_nested(),
            q_cost: v.q_cost.to_nested(),
            v_cost: v.v_cost.to_nested(),
            nu: v.nu.to_nested(),
            r_tilde: v.r_tilde.to_nested(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::Cmdp;
    use crate::envs::make_random_cmdp;
    use crate::oracle;

    fn uniform_policy(model: &Cmdp) -> TabularPolicy {
        TabularPolicy::uniform(model.horizon(), model.num_states(), model.num_actions())
    }

    #[test]
    fn zero_reward_gives_zero_values() {
        let m = Cmdp::new(
            2,
            2,
            3,
            vec![0.8, 0.2, 0.3, 0.7, 0.5, 0.5, 0.1, 0.9],
            vec![0.0; 4],
            vec![0.0; 4],
            vec![0.5, 0.5],
        )
        .unwrap();
        let pi = uniform_policy(&m);
        let (q, v) = reward_values(&m, &pi).unwrap();
        assert!(q.data().iter().all(|&x| x == 0.0));
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn horizon_one_q_equals_reward() {
        let m = make_random_cmdp(3, 2, 1, 11).unwrap();
        let pi = uniform_policy(&m);
        let (q, _) = reward_values(&m, &pi).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert_eq!(q.get(0, s, a), m.reward(s, a));
            }
        }
    }

    #[test]
    fn reward_values_match_enumeration() {
        let m = make_random_cmdp(2, 2, 3, 42).unwrap();
        let pi = uniform_policy(&m);
        let (q, v) = reward_values(&m, &pi).unwrap();
        for t in 0..3 {
            for s in 0..2 {
                let mom = oracle::exact_state_moments(&m, &pi, &pi, t, s).unwrap();
                assert!((mom.mean - v.get(t, s)).abs() < 1e-10);
                for a in 0..2 {
                    let mom_a = oracle::exact_state_action_moments(&m, &pi, &pi, t, s, a).unwrap();
                    assert!((mom_a.mean - q.get(t, s, a)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn unit_cost_gives_remaining_horizon() {
        let horizon = 4;
        let m = Cmdp::new(
            2,
            2,
            horizon,
            vec![0.8, 0.2, 0.3, 0.7, 0.5, 0.5, 0.1, 0.9],
            vec![0.0; 4],
            vec![1.0; 4],
            vec![0.5, 0.5],
        )
        .unwrap();
        let pi = uniform_policy(&m);
        let (_qc, vc) = cost_values(&m, &pi).unwrap();
        for t in 0..horizon {
            for s in 0..2 {
                assert!((vc.get(t, s) - (horizon - t) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cost_values_match_enumeration() {
        let m = make_random_cmdp(3, 2, 3, 7).unwrap();
        let pi = uniform_policy(&m);
        let (_qc, vc) = cost_values(&m, &pi).unwrap();
        let moments = oracle::exact_moments(&m, &pi, &pi).unwrap();
        let j_cost = initial_value(&m, &vc);
        assert!((moments.expected_cost - j_cost).abs() < 1e-10);
    }

    #[test]
    fn nu_zero_for_deterministic_transitions_and_final_step() {
        let m = Cmdp::new(
            2,
            2,
            3,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0; 4],
            vec![1.0, 0.0],
        )
        .unwrap();
        let pi = uniform_policy(&m);
        let (_q, v) = reward_values(&m, &pi).unwrap();
        let nu = next_state_value_variance(&m, &v).unwrap();
        assert!(nu.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn nu_of_even_split_between_values_zero_and_two_is_one() {
        // v_1(s0) = 0 and v_1(s1) = 2 by terminal rewards; transition from
        // (s0, a0) splits evenly, so nu = E[v^2] - E[v]^2 = 2 - 1 = 1.
        let m = Cmdp::new(
            2,
            2,
            2,
            vec![0.5, 0.5, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 2.0, 2.0],
            vec![0.0; 4],
            vec![1.0, 0.0],
        )
        .unwrap();
        let pi = uniform_policy(&m);
        let (_q, v) = reward_values(&m, &pi).unwrap();
        assert_eq!(v.get(1, 0), 0.0);
        assert_eq!(v.get(1, 1), 2.0);
        let nu = next_state_value_variance(&m, &v).unwrap();
        assert!((nu.get(0, 0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extended_reward_final_step_is_reward_squared() {
        let m = make_random_cmdp(3, 2, 3, 5).unwrap();
        let pi = uniform_policy(&m);
        let (q, _v) = reward_values(&m, &pi).unwrap();
        let rt = extended_reward(&m, &pi, &pi, &q).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                let r = m.reward(s, a);
                assert!((rt.get(2, s, a) - r * r).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn extended_reward_zero_when_rewards_zero() {
        let m = Cmdp::new(
            2,
            2,
            3,
            vec![0.8, 0.2, 0.3, 0.7, 0.5, 0.5, 0.1, 0.9],
            vec![0.0; 4],
            vec![0.1; 4],
            vec![0.5, 0.5],
        )
        .unwrap();
        let pi = uniform_policy(&m);
        let (q, _v) = reward_values(&m, &pi).unwrap();
        let rt = extended_reward(&m, &pi, &pi, &q).unwrap();
        assert!(rt.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn extended_reward_matches_direct_definition_via_enumeration() {
        // Direct form: r_tilde = nu + q^2 + E_{s'}[Var(G_PDIS from t+1 | s')].
        let m = make_random_cmdp(3, 2, 3, 99).unwrap();
        let pi = uniform_policy(&m);
        let (q, v) = reward_values(&m, &pi).unwrap();
        let nu = next_state_value_variance(&m, &v).unwrap();
        let rt = extended_reward(&m, &pi, &pi, &q).unwrap();
        for t in 0..2 {
            for s in 0..3 {
                for a in 0..2 {
                    let mut future_var = 0.0;
                    for s_next in 0..3 {
                        let p = m.transition(s, a, s_next);
                        if p > 0.0 {
                            let mom =
                                oracle::exact_state_moments(&m, &pi, &pi, t + 1, s_next).unwrap();
                            future_var += p * mom.variance;
                        }
                    }
                    let q_sa = q.get(t, s, a);
                    let direct = nu.get(t, s, a) + q_sa * q_sa + future_var;
                    assert!(
                        (direct - rt.get(t, s, a)).abs() < 1e-9,
                        "t={t} s={s} a={a}: direct {direct} vs recursive {}",
                        rt.get(t, s, a)
                    );
                }
            }
        }
    }

    #[test]
    fn extended_reward_is_nonnegative() {
        for seed in 0..20 {
            let m = make_random_cmdp(3, 3, 4, seed).unwrap();
            let pi = uniform_policy(&m);
            let (q, _v) = reward_values(&m, &pi).unwrap();
            let rt = extended_reward(&m, &pi, &pi, &q).unwrap();
            assert!(rt.min() >= -1e-12, "seed {seed}: min {}", rt.min());
        }
    }

    #[test]
    fn bandit_variance_is_on_policy_reward_variance() {
        let m = make_random_cmdp(2, 3, 1, 17).unwrap();
        let pi = uniform_policy(&m);
        let var = pdis_variance_closed_form(&m, &pi, &pi).unwrap();
        for s in 0..2 {
            let mean: f64 = (0..3).map(|a| m.reward(s, a) / 3.0).sum();
            let second: f64 = (0..3).map(|a| m.reward(s, a).powi(2) / 3.0).sum();
            assert!((var.get(0, s) - (second - mean * mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_model_has_zero_variance() {
        let m = Cmdp::new(
            2,
            2,
            3,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0; 4],
            vec![1.0, 0.0],
        )
        .unwrap();
        // Deterministic policy: constant return, zero variance.
        let pi = TabularPolicy::new(3, 2, 2, vec![1.0, 0.0].repeat(6)).unwrap();
        let var = pdis_variance_closed_form(&m, &pi, &pi).unwrap();
        for t in 0..3 {
            assert!(var.get(t, 0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_variance_matches_enumeration() {
        let m = make_random_cmdp(3, 2, 3, 123).unwrap();
        let pi = uniform_policy(&m);
        let var = pdis_variance_closed_form(&m, &pi, &pi).unwrap();
        for t in 0..3 {
            for s in 0..3 {
                let mom = oracle::exact_state_moments(&m, &pi, &pi, t, s).unwrap();
                let scale = mom.variance.abs().max(1.0);
                assert!(
                    (mom.variance - var.get(t, s)).abs() / scale < 1e-8,
                    "t={t} s={s}: oracle {} vs closed form {}",
                    mom.variance,
                    var.get(t, s)
                );
            }
        }
    }

    #[test]
    fn behavior_outside_enlarged_space_is_rejected() {
        let m = make_random_cmdp(2, 2, 2, 3).unwrap();
        let pi = uniform_policy(&m);
        let mu = TabularPolicy::new(2, 2, 2, vec![1.0, 0.0].repeat(4)).unwrap();
        let err = pdis_variance_closed_form(&m, &pi, &mu).unwrap_err();
        assert!(matches!(err, Error::OutsideEnlargedSpace { .. }));
    }

    #[test]
    fn value_tables_bundle_is_consistent() {
        let m = make_random_cmdp(3, 2, 4, 8).unwrap();
        let pi = uniform_policy(&m);
        let tables = ValueTables::for_target(&m, &pi).unwrap();
        for t in 0..4 {
            for s in 0..3 {
                let vq: f64 = (0..2).map(|a| pi.prob(t, s, a) * tables.q.get(t, s, a)).sum();
                assert!((vq - tables.v.get(t, s)).abs() < 1e-10);
            }
        }
        assert!(tables.nu.min() >= -1e-12);
        assert!(tables.r_tilde.min() >= -1e-12);
        let back = ValueTables::from_json(&tables.to_json()).unwrap();
        assert_eq!(tables, back);
    }
}
