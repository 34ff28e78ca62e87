//! Tabular finite-horizon CMDP toolkit for variance-reduced, safety-aware
//! off-policy evaluation.
//!
//! The pieces, bottom up:
//!
//! - [`cmdp`]: models, tabular policies, trajectories, seeded sampling, and
//!   the enlarged behavior-policy search space.
//! - [`dp`]: exact backward recursions for reward/cost values, the extended
//!   reward, and the closed-form per-state PDIS variance.
//! - [`synth`]: the per-state constrained convex program and the backward
//!   assembly of the safety-constrained optimal behavior policy, plus the
//!   unconstrained square-root-weighted baseline.
//! - [`estimators`]: PDIS Monte Carlo evaluation with streaming statistics
//!   and raw cost accounting.
//! - [`fqe`]: offline tuple datasets and tabular fitted Q-evaluation feeding
//!   the same synthesis pipeline.
//! - [`envs`]: seeded gridworlds, random models, and target-policy families.
//! - [`oracle`]: brute-force trajectory enumeration, the ground truth every
//!   identity is tested against.

pub mod cmdp;
pub mod dp;
pub mod envs;
pub mod error;
pub mod estimators;
pub mod fqe;
pub mod oracle;
pub mod rng;
pub mod synth;

pub use cmdp::{
    in_enlarged_space, sample_trajectory, validate_cmdp, Cmdp, CmdpData, Step, TabularPolicy,
    Trajectory, Violation, ZERO_TOL,
};
pub use dp::{
    cost_values, extended_reward, initial_value, next_state_value_variance,
    pdis_variance_closed_form, reward_values, StateActionTable, StateTable, ValueTables,
};
pub use envs::{make_gridworld, make_random_cmdp, make_target_policies, GridworldSpec};
pub use error::{Error, Result};
pub use estimators::{error_curve, evaluate, pdis_return, EvalResult, RunSeries, Welford};
pub use fqe::{
    fqe_extended_reward, fqe_values, generate_offline_dataset, synthesize_odi_offline,
    synthesize_scope_offline, OfflineDataset, OfflineTuple, Signal,
};
pub use oracle::{enumerate, exact_moments, exact_state_moments, ExactMoments, WeightedTrajectory};
pub use rng::Rng;
pub use synth::{
    safety_threshold, solve_state_problem, synthesize_odi, synthesize_scope,
    synthesize_scope_with, CostFuture, SafetyConfig, SolverConfig, StateProblem, StateSolution,
    SynthOutput, SynthReport,
};
