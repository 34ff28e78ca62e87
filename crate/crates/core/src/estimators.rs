//! PDIS and on-policy Monte Carlo estimation with streaming statistics and
//! raw cost accounting.

use rayon::prelude::*;

use crate::cmdp::{sample_trajectory, Cmdp, TabularPolicy, Trajectory};
use crate::dp;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Streaming mean/variance accumulator (Welford's recurrence).
#[derive(Debug, Clone, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }
}

/// Aggregate of an evaluation run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalResult {
    pub mean_return: f64,
    pub sample_variance: f64,
    pub std_error: f64,
    /// Mean raw trajectory cost as incurred by executing the behavior policy
    /// (costs are never importance-weighted).
    pub mean_trajectory_cost: f64,
    pub num_episodes: usize,
}

/// PDIS return of a trajectory by the backward recursion
/// `G_t = rho_t (R_{t+1} + G_{t+1})`.
pub fn pdis_return(trajectory: &Trajectory, target: &TabularPolicy, behavior: &TabularPolicy) -> Result<f64> {
    let mut g = 0.0;
    for (t, step) in trajectory.steps.iter().enumerate().rev() {
        let mu = behavior.prob(t, step.state, step.action);
        if mu == 0.0 {
            return Err(Error::ZeroBehaviorProbability { t, state: step.state, action: step.action });
        }
        let rho = target.prob(t, step.state, step.action) / mu;
        g = rho * (step.reward + g);
    }
    Ok(g)
}

/// PDIS return with the ratio product accumulated in log space; useful for
/// long horizons where the plain product could leave the representable range.
pub fn pdis_return_logspace(
    trajectory: &Trajectory,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
) -> Result<f64> {
    let mut log_ratio = 0.0_f64;
    let mut zero_ratio_from: Option<usize> = None;
    let mut total = 0.0;
    for (t, step) in trajectory.steps.iter().enumerate() {
        let mu = behavior.prob(t, step.state, step.action);
        if mu == 0.0 {
            return Err(Error::ZeroBehaviorProbability { t, state: step.state, action: step.action });
        }
        let pi = target.prob(t, step.state, step.action);
        if pi == 0.0 {
            zero_ratio_from = zero_ratio_from.or(Some(t));
        } else {
            log_ratio += (pi / mu).ln();
        }
        if zero_ratio_from.is_none() {
            total += log_ratio.exp() * step.reward;
        }
    }
    Ok(total)
}

/// Evaluate the target policy from `episodes` rollouts of `behavior`,
/// streaming PDIS returns through a single-pass variance recurrence.
pub fn evaluate(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
    episodes: usize,
    rng: &mut Rng,
) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be positive".into()));
    }
    target.check_shape(model)?;
    let mut returns = Welford::new();
    let mut costs = Welford::new();
    for _ in 0..episodes {
        let tau = sample_trajectory(model, behavior, rng)?;
        returns.push(pdis_return(&tau, target, behavior)?);
        costs.push(tau.total_cost());
    }
    Ok(EvalResult {
        mean_return: returns.mean(),
        sample_variance: returns.variance(),
        std_error: (returns.variance() / episodes as f64).sqrt(),
        mean_trajectory_cost: costs.mean(),
        num_episodes: episodes,
    })
}

/// Raw per-episode series of one evaluation run.
#[derive(Debug, Clone)]
pub struct RunSeries {
    /// PDIS return of each episode.
    pub returns: Vec<f64>,
    /// Raw cost of each episode.
    pub episode_costs: Vec<f64>,
    /// `|running mean - ground truth|` after each episode.
    pub abs_error: Vec<f64>,
    /// Cumulative executed cost after each episode.
    pub cum_cost: Vec<f64>,
}

/// Run `runs` independent evaluations of `episodes` episodes each, recording
/// the absolute-error trajectory of the running mean against the exact value
/// of the target policy, both per episode and reindexable by cumulative cost.
/// Runs execute in parallel on split RNG streams and are returned in run
/// order.
pub fn error_curve(
    model: &Cmdp,
    target: &TabularPolicy,
    behavior: &TabularPolicy,
    episodes: usize,
    runs: usize,
    rng: &Rng,
) -> Result<Vec<RunSeries>> {
    if episodes == 0 || runs == 0 {
        return Err(Error::InvalidArgument("episodes and runs must be positive".into()));
    }
    let (_q, v) = dp::reward_values(model, target)?;
    let ground_truth = dp::initial_value(model, &v);
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut run_rng = rng.split(run as u64);
            let mut mean = Welford::new();
            let mut series = RunSeries {
                returns: Vec::with_capacity(episodes),
                episode_costs: Vec::with_capacity(episodes),
                abs_error: Vec::with_capacity(episodes),
                cum_cost: Vec::with_capacity(episodes),
            };
            let mut cost_so_far = 0.0;
            for _ in 0..episodes {
                let tau = sample_trajectory(model, behavior, &mut run_rng)?;
                let g = pdis_return(&tau, target, behavior)?;
                mean.push(g);
                cost_so_far += tau.total_cost();
                series.returns.push(g);
                series.episode_costs.push(tau.total_cost());
                series.abs_error.push((mean.mean() - ground_truth).abs());
                series.cum_cost.push(cost_so_far);
            }
            Ok(series)
        })
        .collect()
}
