//! Seeded construction of benchmark models: the gridworld family used by the
//! experiment harness, small random CMDPs for oracle-scale testing, and
//! softmax target-policy generation.

use serde::{Deserialize, Serialize};

use crate::cmdp::{Cmdp, TabularPolicy};
use crate::dp::{StateActionTable, StateTable};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// An `n x n` grid with horizon `n`: four move actions, sticky boundaries,
/// and seeded uniform `[0, 1]` rewards and costs.
///
/// `reward_cost_coupling` sets the probability that a cell-action's cost is
/// the same draw as its reward (a control-cost-style coupling: actions that
/// pay more also tend to cost more). Marginally, costs stay uniform on
/// `[0, 1]` for any coupling value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridworldSpec {
    pub n: usize,
    pub seed: u64,
    pub intended_move_prob: f64,
    pub reward_cost_coupling: f64,
}

impl GridworldSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed, intended_move_prob: 0.9, reward_cost_coupling: 0.5 }
    }

    /// Positions times horizon, the `n^3` size this family is usually
    /// quoted by.
    pub fn size(&self) -> usize {
        self.n * self.n * self.n
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument("gridworld needs n >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.intended_move_prob) {
            return Err(Error::InvalidArgument("intended_move_prob must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.reward_cost_coupling) {
            return Err(Error::InvalidArgument("reward_cost_coupling must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Actions: 0 = up, 1 = down, 2 = left, 3 = right.
const GRID_ACTIONS: usize = 4;

fn grid_destination(n: usize, cell: usize, direction: usize) -> usize {
    let (row, col) = (cell / n, cell % n);
    let (new_row, new_col) = match direction {
        0 => (row.saturating_sub(1), col),
        1 => ((row + 1).min(n - 1), col),
        2 => (row, col.saturating_sub(1)),
        _ => (row, (col + 1).min(n - 1)),
    };
    new_row * n + new_col
}

/// Build the gridworld CMDP. The agent moves in the intended direction with
/// probability `intended_move_prob` and uniformly over all four directions
/// (including the intended one) otherwise; running into a boundary keeps the
/// current position. The start state is the top-left cell.
pub fn make_gridworld(spec: &GridworldSpec) -> Result<Cmdp> {
    spec.validate()?;
    let n = spec.n;
    let states = n * n;
    let mut rng = Rng::new(spec.seed);

    let mut transition = vec![0.0; states * GRID_ACTIONS * states];
    let stray = (1.0 - spec.intended_move_prob) / GRID_ACTIONS as f64;
    for cell in 0..states {
        for action in 0..GRID_ACTIONS {
            let base = (cell * GRID_ACTIONS + action) * states;
            transition[base + grid_destination(n, cell, action)] += spec.intended_move_prob;
            for direction in 0..GRID_ACTIONS {
                transition[base + grid_destination(n, cell, direction)] += stray;
            }
        }
    }

    let mut reward = vec![0.0; states * GRID_ACTIONS];
    let mut cost = vec![0.0; states * GRID_ACTIONS];
    for i in 0..states * GRID_ACTIONS {
        let r = rng.next_f64();
        let independent_cost = rng.next_f64();
        let gate = rng.next_f64();
        reward[i] = r;
        cost[i] = if gate < spec.reward_cost_coupling { r } else { independent_cost };
    }

    let mut initial_dist = vec![0.0; states];
    initial_dist[0] = 1.0;

    Cmdp::new(states, GRID_ACTIONS, n, transition, reward, cost, initial_dist)
}

/// Random CMDP with Dirichlet-uniform transition rows, rewards uniform on
/// `[-1, 1]`, costs uniform on `[0, 1]`, and a uniform initial distribution.
pub fn make_random_cmdp(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
) -> Result<Cmdp> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("all dimensions must be at least 1".into()));
    }
    let mut rng = Rng::new(seed);
    let mut transition = vec![0.0; num_states * num_actions * num_states];
    for row in transition.chunks_mut(num_states) {
        let mut sum = 0.0;
        for x in row.iter_mut() {
            // Exp(1) draws normalized along the row: flat Dirichlet.
            *x = -(1.0 - rng.next_f64()).ln();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    let reward: Vec<f64> = (0..num_states * num_actions).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let cost: Vec<f64> = (0..num_states * num_actions).map(|_| rng.next_f64()).collect();
    let initial_dist = vec![1.0 / num_states as f64; num_states];
    Cmdp::new(num_states, num_actions, horizon, transition, reward, cost, initial_dist)
}

/// Action values of the greedy-optimal policy, by backward induction with a
/// max over actions.
pub fn optimal_action_values(model: &Cmdp) -> StateActionTable {
    let (horizon, s_n, a_n) = (model.horizon(), model.num_states(), model.num_actions());
    let mut q = StateActionTable::zeros(horizon, s_n, a_n);
    let mut v = StateTable::zeros(horizon, s_n);
    for t in (0..horizon).rev() {
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..a_n {
                let mut q_sa = model.reward(s, a);
                if t + 1 < horizon {
                    q_sa += model
                        .transition_row(s, a)
                        .iter()
                        .zip(v.time_slice(t + 1))
                        .map(|(p, vn)| p * vn)
                        .sum::<f64>();
                }
                q.set(t, s, a, q_sa);
                best = best.max(q_sa);
            }
            v.set(t, s, best);
        }
    }
    q
}

/// Softmax policy over an action-value table at the given temperature.
/// Rows are strictly positive for any finite temperature.
pub fn softmax_policy(q: &StateActionTable, temperature: f64) -> TabularPolicy {
    TabularPolicy::from_rows(q.horizon(), q.num_states(), q.num_actions(), |t, s| {
        let row = q.row(t, s);
        let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.iter().map(|&x| ((x - top) / temperature).exp()).collect()
    })
    .expect("softmax rows have positive mass")
}

/// Target policies spanning a performance range: softmax over the
/// greedy-optimal action values at temperatures log-spaced from near-uniform
/// to near-greedy. All rows are strictly positive.
pub fn make_target_policies(model: &Cmdp, count: usize, seed: u64) -> Result<Vec<TabularPolicy>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let q_star = optimal_action_values(model);

    // Scale temperatures by the typical within-state action-value spread so
    // the same grid works across reward magnitudes.
    let (horizon, s_n) = (model.horizon(), model.num_states());
    let mut spread = 0.0;
    for t in 0..horizon {
        for s in 0..s_n {
            let row = q_star.row(t, s);
            let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            spread += hi - lo;
        }
    }
    spread /= (horizon * s_n) as f64;
    if spread <= 0.0 {
        spread = 1.0;
    }

    // Small seeded jitter on each temperature keeps distinct seeds from
    // producing identical policy sets.
    let mut rng = Rng::new(seed);
    let (hi, lo) = (10.0_f64, 0.05_f64);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let frac = if count == 1 { 0.5 } else { i as f64 / (count - 1) as f64 };
        let factor = (hi.ln() + frac * (lo.ln() - hi.ln())).exp();
        let jitter = (rng.uniform(-0.05, 0.05)).exp();
        out.push(softmax_policy(&q_star, spread * factor * jitter));
    }
    Ok(out)
}
