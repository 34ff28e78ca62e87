//! Finite-horizon constrained MDP model, tabular policies, and trajectory
//! sampling.
//!
//! States and actions are dense 0-based indices. All tensors are stored flat
//! in row-major order. Models and policies are immutable after construction
//! and safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::dp::StateActionTable;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tolerance for "equals zero" tests on probabilities and target-weighted
/// values; absorbs double-precision row-normalization noise.
pub const ZERO_TOL: f64 = 1e-12;

/// Tolerance for probability rows summing to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A single invariant violation found in a model description.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BadDimension { what: &'static str },
    BadShape { field: &'static str, expected: usize, got: usize },
    NonFinite { field: &'static str, index: usize },
    TransitionRowSum { state: usize, action: usize, sum: f64 },
    NegativeTransition { state: usize, action: usize, next_state: usize, value: f64 },
    InitialDistSum { sum: f64 },
    NegativeInitialProb { state: usize, value: f64 },
    NegativeCost { state: usize, action: usize, value: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::BadDimension { what } => write!(f, "{what} must be at least 1"),
            Violation::BadShape { field, expected, got } => {
                write!(f, "{field} has {got} entries, expected {expected}")
            }
            Violation::NonFinite { field, index } => {
                write!(f, "{field}[{index}] is not finite")
            }
            Violation::TransitionRowSum { state, action, sum } => {
                write!(f, "transition row (s={state}, a={action}) sums to {sum}, expected 1")
            }
            Violation::NegativeTransition { state, action, next_state, value } => {
                write!(
                    f,
                    "transition (s={state}, a={action}, s'={next_state}) is negative: {value}"
                )
            }
            Violation::InitialDistSum { sum } => {
                write!(f, "initial distribution sums to {sum}, expected 1")
            }
            Violation::NegativeInitialProb { state, value } => {
                write!(f, "initial probability of state {state} is negative: {value}")
            }
            Violation::NegativeCost { state, action, value } => {
                write!(f, "cost (s={state}, a={action}) is negative: {value}")
            }
        }
    }
}

/// Raw CMDP description with public fields, used to build a validated [`Cmdp`]
/// and to diagnose invalid inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdpData {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Transition probabilities, flat `(s, a, s')` row-major.
    pub transition: Vec<f64>,
    /// Rewards, flat `(s, a)` row-major.
    pub reward: Vec<f64>,
    /// Costs, flat `(s, a)` row-major; must be nonnegative.
    pub cost: Vec<f64>,
    /// Initial state distribution, length `num_states`.
    pub initial_dist: Vec<f64>,
}

/// Check every model invariant; empty result means the description is valid.
pub fn validate_cmdp(data: &CmdpData) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = data.num_states;
    let a = data.num_actions;
    if s == 0 {
        out.push(Violation::BadDimension { what: "num_states" });
    }
    if a == 0 {
        out.push(Violation::BadDimension { what: "num_actions" });
    }
    if data.horizon == 0 {
        out.push(Violation::BadDimension { what: "horizon" });
    }
    if s == 0 || a == 0 {
        return out;
    }
    if data.transition.len() != s * a * s {
        out.push(Violation::BadShape {
            field: "transition",
            expected: s * a * s,
            got: data.transition.len(),
        });
    }
    if data.reward.len() != s * a {
        out.push(Violation::BadShape { field: "reward", expected: s * a, got: data.reward.len() });
    }
    if data.cost.len() != s * a {
        out.push(Violation::BadShape { field: "cost", expected: s * a, got: data.cost.len() });
    }
    if data.initial_dist.len() != s {
        out.push(Violation::BadShape {
            field: "initial_dist",
            expected: s,
            got: data.initial_dist.len(),
        });
    }
    if !out.is_empty() {
        return out;
    }
    for (i, &x) in data.transition.iter().enumerate() {
        if !x.is_finite() {
            out.push(Violation::NonFinite { field: "transition", index: i });
        }
    }
    for (i, &x) in data.reward.iter().enumerate() {
        if !x.is_finite() {
            out.push(Violation::NonFinite { field: "reward", index: i });
        }
    }
    for (i, &x) in data.cost.iter().enumerate() {
        if !x.is_finite() {
            out.push(Violation::NonFinite { field: "cost", index: i });
        }
    }
    for (i, &x) in data.initial_dist.iter().enumerate() {
        if !x.is_finite() {
            out.push(Violation::NonFinite { field: "initial_dist", index: i });
        }
    }
    if !out.is_empty() {
        return out;
    }
    for state in 0..s {
        for action in 0..a {
            let row = &data.transition[(state * a + action) * s..(state * a + action + 1) * s];
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                out.push(Violation::TransitionRowSum { state, action, sum });
            }
            for (next_state, &p) in row.iter().enumerate() {
                if p < 0.0 {
                    out.push(Violation::NegativeTransition { state, action, next_state, value: p });
                }
            }
            let c = data.cost[state * a + action];
            if c < 0.0 {
                out.push(Violation::NegativeCost { state, action, value: c });
            }
        }
    }
    let p0_sum: f64 = data.initial_dist.iter().sum();
    if (p0_sum - 1.0).abs() > ROW_SUM_TOL {
        out.push(Violation::InitialDistSum { sum: p0_sum });
    }
    for (state, &p) in data.initial_dist.iter().enumerate() {
        if p < 0.0 {
            out.push(Violation::NegativeInitialProb { state, value: p });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Cmdp
// ---------------------------------------------------------------------------

/// A validated finite-horizon constrained MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmdp {
    data: CmdpData,
}

impl Cmdp {
    /// Validate and wrap a raw description.
    pub fn from_data(data: CmdpData) -> Result<Self> {
        let violations = validate_cmdp(&data);
        if violations.is_empty() {
            Ok(Self { data })
        } else {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidModel(msgs.join("; ")))
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        cost: Vec<f64>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        Self::from_data(CmdpData {
            num_states,
            num_actions,
            horizon,
            transition,
            reward,
            cost,
            initial_dist,
        })
    }

    pub fn num_states(&self) -> usize {
        self.data.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.data.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.data.horizon
    }

    pub fn data(&self) -> &CmdpData {
        &self.data
    }

    #[inline]
    pub fn transition(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.data.transition[(s * self.data.num_actions + a) * self.data.num_states + s_next]
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.data.num_states;
        let base = (s * self.data.num_actions + a) * n;
        &self.data.transition[base..base + n]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.data.reward[s * self.data.num_actions + a]
    }

    #[inline]
    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.data.cost[s * self.data.num_actions + a]
    }

    #[inline]
    pub fn initial_prob(&self, s: usize) -> f64 {
        self.data.initial_dist[s]
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.data.initial_dist
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CmdpWire::from(self)).expect("cmdp serialization")
    }

    /// Parse and re-validate a model from its JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: CmdpWire = serde_json::from_str(text)?;
        Self::from_data(wire.into_data())
    }
}

/// JSON schema for [`Cmdp`]: tensors as nested arrays, row-major
/// (`transition[s][a][s']`, `reward[s][a]`, `cost[s][a]`).
#[derive(Serialize, Deserialize)]
struct CmdpWire {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
    initial_dist: Vec<f64>,
}

impl From<&Cmdp> for CmdpWire {
    fn from(m: &Cmdp) -> Self {
        let (s, a) = (m.num_states(), m.num_actions());
        CmdpWire {
            num_states: s,
            num_actions: a,
            horizon: m.horizon(),
            transition: (0..s)
                .map(|i| (0..a).map(|j| m.transition_row(i, j).to_vec()).collect())
                .collect(),
            reward: (0..s).map(|i| (0..a).map(|j| m.reward(i, j)).collect()).collect(),
            cost: (0..s).map(|i| (0..a).map(|j| m.cost(i, j)).collect()).collect(),
            initial_dist: m.initial_dist().to_vec(),
        }
    }
}

impl CmdpWire {
    fn into_data(self) -> CmdpData {
        CmdpData {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            transition: self.transition.into_iter().flatten().flatten().collect(),
            reward: self.reward.into_iter().flatten().collect(),
            cost: self.cost.into_iter().flatten().collect(),
            initial_dist: self.initial_dist,
        }
    }
}

// ---------------------------------------------------------------------------
// TabularPolicy
// ---------------------------------------------------------------------------

/// Time-indexed action distributions per state: `probs[(t, s, a)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if horizon == 0 || num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidPolicy("all dimensions must be at least 1".into()));
        }
        if probs.len() != horizon * num_states * num_actions {
            return Err(Error::InvalidPolicy(format!(
                "probs has {} entries, expected {}",
                probs.len(),
                horizon * num_states * num_actions
            )));
        }
        let policy = Self { horizon, num_states, num_actions, probs };
        policy.check_rows()?;
        Ok(policy)
    }

    fn check_rows(&self) -> Result<()> {
        for t in 0..self.horizon {
            for s in 0..self.num_states {
                let row = self.row(t, s);
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidPolicy(format!(
                        "row (t={t}, s={s}) sums to {sum}, expected 1"
                    )));
                }
                if let Some(a) = row.iter().position(|&p| p < 0.0 || !p.is_finite()) {
                    return Err(Error::InvalidPolicy(format!(
                        "probability (t={t}, s={s}, a={a}) is invalid: {}",
                        row[a]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Uniform policy over actions at every `(t, s)`.
    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            horizon,
            num_states,
            num_actions,
            probs: vec![p; horizon * num_states * num_actions],
        }
    }

    /// Build from per-row values normalized internally; rows must have
    /// positive mass.
    pub fn from_rows<F>(horizon: usize, num_states: usize, num_actions: usize, mut row_fn: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut probs = vec![0.0; horizon * num_states * num_actions];
        for t in 0..horizon {
            for s in 0..num_states {
                let mut row = row_fn(t, s);
                if row.len() != num_actions {
                    return Err(Error::InvalidPolicy(format!(
                        "row (t={t}, s={s}) has {} entries, expected {num_actions}",
                        row.len()
                    )));
                }
                let sum: f64 = row.iter().sum();
                if !(sum > 0.0) {
                    return Err(Error::InvalidPolicy(format!(
                        "row (t={t}, s={s}) has no positive mass"
                    )));
                }
                for p in row.iter_mut() {
                    *p /= sum;
                }
                let base = (t * num_states + s) * num_actions;
                probs[base..base + num_actions].copy_from_slice(&row);
            }
        }
        Self::new(horizon, num_states, num_actions, probs)
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
    pub fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.probs[(t * self.num_states + s) * self.num_actions + a]
    }

    #[inline]
    pub fn row(&self, t: usize, s: usize) -> &[f64] {
        let base = (t * self.num_states + s) * self.num_actions;
        &self.probs[base..base + self.num_actions]
    }

    /// Check the policy is shaped for the given model.
    pub fn check_shape(&self, model: &Cmdp) -> Result<()> {
        if self.horizon != model.horizon()
            || self.num_states != model.num_states()
            || self.num_actions != model.num_actions()
        {
            return Err(Error::ShapeMismatch(format!(
                "policy is ({}, {}, {}), model needs ({}, {}, {})",
                self.horizon,
                self.num_states,
                self.num_actions,
                model.horizon(),
                model.num_states(),
                model.num_actions()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PolicyWire::from(self)).expect("policy serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: PolicyWire = serde_json::from_str(text)?;
        Self::new(
            wire.horizon,
            wire.num_states,
            wire.num_actions,
            wire.probs.into_iter().flatten().flatten().collect(),
        )
    }
}

/// JSON schema for [`TabularPolicy`]: `probs[t][s][a]`, rows on the simplex.
#[derive(Serialize, Deserialize)]
struct PolicyWire {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    probs: Vec<Vec<Vec<f64>>>,
}

impl From<&TabularPolicy> for PolicyWire {
    fn from(p: &TabularPolicy) -> Self {
        PolicyWire {
            horizon: p.horizon,
            num_states: p.num_states,
            num_actions: p.num_actions,
            probs: (0..p.horizon)
                .map(|t| (0..p.num_states).map(|s| p.row(t, s).to_vec()).collect())
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

/// One step of a rollout: the visited state, the action taken, and the
/// emitted reward and cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub cost: f64,
}

/// A complete rollout of length `horizon`, tagged with the id of the policy
/// that sampled it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub policy_id: usize,
}

impl Trajectory {
    /// Undiscounted sum of rewards.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Undiscounted sum of costs, as actually incurred by the sampler.
    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }
}

/// Roll out one trajectory: `S_0 ~ p0`, `A_t ~ policy_t(.|S_t)`,
/// `S_{t+1} ~ p(.|S_t, A_t)`. The final transition is not sampled because no
/// recorded quantity depends on it.
pub fn sample_trajectory(model: &Cmdp, policy: &TabularPolicy, rng: &mut Rng) -> Result<Trajectory> {
    policy.check_shape(model)?;
    let horizon = model.horizon();
    let mut steps = Vec::with_capacity(horizon);
    let mut state = rng.sample_index(model.initial_dist());
    for t in 0..horizon {
        let action = rng.sample_index(policy.row(t, state));
        steps.push(Step {
            state,
            action,
            reward: model.reward(state, action),
            cost: model.cost(state, action),
        });
        if t + 1 < horizon {
            state = rng.sample_index(model.transition_row(state, action));
        }
    }
    Ok(Trajectory { steps, policy_id: 0 })
}

/// Membership test for the enlarged behavior-policy search space: the
/// behavior may drop an action only where the target-weighted action value
/// `pi_t(a|s) * q_pi_t(s,a)` vanishes (within [`ZERO_TOL`]).
pub fn in_enlarged_space(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
    q_pi: &StateActionTable,
) -> bool {
    let (horizon, s_n, a_n) = (model.horizon(), model.num_states(), model.num_actions());
    for t in 0..horizon {
        for s in 0..s_n {
            for a in 0..a_n {
                if behavior.prob(t, s, a) == 0.0
                    && (target.prob(t, s, a) * q_pi.get(t, s, a)).abs() > ZERO_TOL
                {
                    return false;
                }
            }
        }
    }
    true
}
