//! Brute-force trajectory enumeration: exact means, variances, and costs of
//! the PDIS estimator under any sampling policy on small models.
//!
//! This module is the ground-truth engine for every identity check, so it
//! stays deliberately independent of the dynamic-programming recursions: each
//! enumerated trajectory is weighted by its exact probability and scored with
//! the direct product-form PDIS definition, never the backward recursion.
//! Branches are pruned only at exactly zero probability.

use crate::cmdp::{Cmdp, Step, TabularPolicy, Trajectory};
use crate::error::{Error, Result};

/// Default cap on enumerated branches, `(|S| * |A|)^T`.
pub const DEFAULT_LEAF_CAP: f64 = 1e7;

/// A trajectory together with its exact sampling probability.
#[derive(Debug, Clone)]
pub struct WeightedTrajectory {
    pub trajectory: Trajectory,
    pub probability: f64,
}

/// Exact conditional moments of the PDIS return of a trajectory segment.
#[derive(Debug, Clone, Copy)]
pub struct SegmentMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// Expected raw cost incurred by the sampling policy over the segment.
    pub expected_cost: f64,
}

/// Exact full-trajectory moments under the initial-state distribution.
#[derive(Debug, Clone, Copy)]
pub struct ExactMoments {
    pub mean: f64,
    pub variance: f64,
    pub expected_cost: f64,
}

fn check_cap(model: &Cmdp, steps: usize, cap: f64) -> Result<()> {
    let leaves = ((model.num_states() * model.num_actions()) as f64).powi(steps as i32);
    if leaves > cap {
        return Err(Error::EnumerationCapExceeded { leaves, cap });
    }
    Ok(())
}

/// Depth-first walk over every positive-probability segment from `(t, state)`
/// to the end of the horizon. `fixed_action` pins the first action (for
/// action-conditional moments). The visitor receives each complete segment
/// and its exact probability.
fn visit_segments<F>(
    model: &Cmdp,
    sampler: &TabularPolicy,
    t: usize,
    state: usize,
    fixed_action: Option<usize>,
    visitor: &mut F,
) where
    F: FnMut(&[Step], f64),
{
    fn recurse<F>(
        model: &Cmdp,
        sampler: &TabularPolicy,
        t: usize,
        state: usize,
        fixed_action: Option<usize>,
        prefix: &mut Vec<Step>,
        prob: f64,
        visitor: &mut F,
    ) where
        F: FnMut(&[Step], f64),
    {
        let horizon = model.horizon();
        for action in 0..model.num_actions() {
            let p_action = match fixed_action {
                // A pinned first action is taken with probability one.
                Some(fixed) if prefix.is_empty() => {
                    if action == fixed {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => sampler.prob(t, state, action),
            };
            if p_action == 0.0 {
                continue;
            }
            prefix.push(Step {
                state,
                action,
                reward: model.reward(state, action),
                cost: model.cost(state, action),
            });
            let branch_prob = prob * p_action;
            if t + 1 == horizon {
                visitor(prefix, branch_prob);
            } else {
                for s_next in 0..model.num_states() {
                    let p_next = model.transition(state, action, s_next);
                    if p_next == 0.0 {
                        continue;
                    }
                    recurse(model, sampler, t + 1, s_next, None, prefix, branch_prob * p_next, visitor);
                }
            }
            prefix.pop();
        }
    }

    let mut prefix = Vec::with_capacity(model.horizon() - t);
    recurse(model, sampler, t, state, fixed_action, &mut prefix, 1.0, visitor);
}

/// PDIS return of a segment starting at time `t0`, by the direct definition:
/// the sum over steps of the importance-ratio product up to that step times
/// its reward.
fn pdis_direct(steps: &[Step], t0: usize, target: &TabularPolicy, behavior: &TabularPolicy) -> f64 {
    let mut ratio = 1.0;
    let mut total = 0.0;
    for (offset, step) in steps.iter().enumerate() {
        let t = t0 + offset;
        ratio *= target.prob(t, step.state, step.action) / behavior.prob(t, step.state, step.action);
        total += ratio * step.reward;
    }
    total
}

/// Enumerate every positive-probability trajectory of the model under the
/// sampling policy, each exactly once with its exact probability.
pub fn enumerate(model: &Cmdp, policy: &TabularPolicy) -> Result<Vec<WeightedTrajectory>> {
    enumerate_with_cap(model, policy, DEFAULT_LEAF_CAP)
}

pub fn enumerate_with_cap(
    model: &Cmdp,
    policy: &TabularPolicy,
    cap: f64,
) -> Result<Vec<WeightedTrajectory>> {
    policy.check_shape(model)?;
    check_cap(model, model.horizon(), cap)?;
    let mut out = Vec::new();
    for s0 in 0..model.num_states() {
        let p0 = model.initial_prob(s0);
        if p0 == 0.0 {
            continue;
        }
        visit_segments(model, policy, 0, s0, None, &mut |steps, prob| {
            out.push(WeightedTrajectory {
                trajectory: Trajectory { steps: steps.to_vec(), policy_id: 0 },
                probability: p0 * prob,
            });
        });
    }
    Ok(out)
}

fn segment_moments(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
    t: usize,
    state: usize,
    fixed_action: Option<usize>,
    cap: f64,
) -> Result<SegmentMoments> {
    target.check_shape(model)?;
    behavior.check_shape(model)?;
    check_cap(model, model.horizon() - t, cap)?;
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut cost = 0.0;
    let mut mass = 0.0;
    visit_segments(model, behavior, t, state, fixed_action, &mut |steps, prob| {
        let g = pdis_direct(steps, t, target, behavior);
        mean += prob * g;
        second += prob * g * g;
        cost += prob * steps.iter().map(|s| s.cost).sum::<f64>();
        mass += prob;
    });
    debug_assert!((mass - 1.0).abs() < 1e-9, "segment mass {mass}");
    Ok(SegmentMoments { mean, second_moment: second, variance: second - mean * mean, expected_cost: cost })
}

/// Exact mean and variance of the PDIS return from `(t, s)` onward, plus the
/// expected cost the behavior policy incurs over that segment.
pub fn exact_state_moments(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
    t: usize,
    state: usize,
) -> Result<SegmentMoments> {
    segment_moments(model, target, behavior, t, state, None, DEFAULT_LEAF_CAP)
}

/// As [`exact_state_moments`] with the first action pinned.
pub fn exact_state_action_moments(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
    t: usize,
    state: usize,
    action: usize,
) -> Result<SegmentMoments> {
    segment_moments(model, target, behavior, t, state, Some(action), DEFAULT_LEAF_CAP)
}

/// Exact full-trajectory moments of the PDIS estimator under `behavior`,
/// composed over the initial distribution by the total-variance identity,
/// plus the exact expected trajectory cost of executing `behavior`.
pub fn exact_moments(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
) -> Result<ExactMoments> {
    let mut mean = 0.0;
    let mut mean_of_squares = 0.0;
    let mut within = 0.0;
    let mut cost = 0.0;
    for s0 in 0..model.num_states() {
        let p0 = model.initial_prob(s0);
        if p0 == 0.0 {
            continue;
        }
        let m = exact_state_moments(model, target, behavior, 0, s0)?;
        mean += p0 * m.mean;
        mean_of_squares += p0 * m.mean * m.mean;
        within += p0 * m.variance;
        cost += p0 * m.expected_cost;
    }
    let variance = within + (mean_of_squares - mean * mean);
    Ok(ExactMoments { mean, variance, expected_cost: cost })
}
