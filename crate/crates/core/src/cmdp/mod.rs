//! Queue-aware constrained MDP and its occupation-measure LP.
//!
//! States are sender-buffer lengths on a granularity grid, actions are
//! (block length, weight vector) pairs. The long-run average problem becomes
//! an LP over the occupation measure `x[q, g, w]`; an optimal vertex yields a
//! threshold policy that randomizes in at most one state per binding
//! side constraint.

mod lp;
mod markov;
mod model;
pub mod simplex;

pub use lp::{
    assemble_lp, build_constraint_matrix, extract_policy, metrics_from_measure, policy_metrics, solve_lp, solve_policy,
    tradeoff_curve, write_tradeoff_csv, CmdpInstance, LpProblem, LpRow, LpSolution, PolicyMetrics, SolvedPolicy,
    StateSummary, ThresholdSummary, TradeoffPoint, SUPPORT_TOL,
};
pub use markov::{
    occupation_measure, recurrent_classes, stationary_distribution, stationary_residual, transition_kernel, Policy,
};
pub use model::{
    feasible_actions, queue_step, Action, ActionCatalog, ArrivalSpec, QueueModel, WeightGrid, DEFAULT_GRANULARITY,
};
