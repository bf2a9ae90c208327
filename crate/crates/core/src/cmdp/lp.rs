use serde::{Deserialize, Serialize};

use super::markov::{action_successors, occupation_measure, stationary_distribution, transition_kernel, Policy};
use super::model::{ActionCatalog, ArrivalSpec};
use super::simplex::{self, Constraint, LinearProgram, Outcome, Scalar, Sense};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::reliability::{lp_reliability, reliability_ceiling, ReliabilityParams, SessionProfile};

/// Below this a stationary mass or occupation entry is treated as zero.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Everything the LP needs: arrivals, the action catalog and per-action
/// reliability and bandwidth coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdpInstance {
    pub arrivals: ArrivalSpec,
    pub catalog: ActionCatalog,
    /// Reliability coefficient of each action.
    pub reliability: Vec<f64>,
    /// `bandwidth[j][a]`: bits per second action `a` occupies on session `j`.
    pub bandwidth: Vec<Vec<f64>>,
    /// No reliability target above this is attainable.
    pub reliability_cap: f64,
}

impl CmdpInstance {
    /// Coefficients from the reliability model: `F(g, w)` at the slot
    /// deadline and `W_j = w_j g phi / T`.
    pub fn new(arrivals: ArrivalSpec, catalog: ActionCatalog, profiles: &[SessionProfile], params: &ReliabilityParams) -> Result<Self> {
        if catalog.sessions() != profiles.len() {
            return Err(Error::DimensionMismatch(format!(
                "catalog has {} sessions, {} profiles given",
                catalog.sessions(),
                profiles.len()
            )));
        }
        let mut cache: std::collections::HashMap<(usize, usize), f64> = Default::default();
        let mut reliability = Vec::with_capacity(catalog.len());
        for a in &catalog.actions {
            let f = match cache.get(&(a.g, a.weights)) {
                Some(&f) => f,
                None => {
                    let f = lp_reliability(a.g, &catalog.weights[a.weights], profiles, params)?;
                    cache.insert((a.g, a.weights), f);
                    f
                }
            };
            reliability.push(f);
        }
        let bandwidth = (0..profiles.len())
            .map(|j| {
                catalog
                    .actions
                    .iter()
                    .map(|a| catalog.weights[a.weights].as_slice()[j] * a.g as f64 * params.packet_bits / params.deadline)
                    .collect()
            })
            .collect();
        Self::with_coefficients(arrivals, catalog, reliability, bandwidth, reliability_ceiling(profiles))
    }

    pub fn with_coefficients(
        arrivals: ArrivalSpec,
        catalog: ActionCatalog,
        reliability: Vec<f64>,
        bandwidth: Vec<Vec<f64>>,
        reliability_cap: f64,
    ) -> Result<Self> {
        if reliability.len() != catalog.len() || bandwidth.iter().any(|b| b.len() != catalog.len()) {
            return Err(Error::DimensionMismatch("coefficient tables must have one entry per action".into()));
        }
        // surfaces granularity / arrival-cap mismatches early
        action_successors(&catalog, &arrivals)?;
        Ok(CmdpInstance {
            arrivals,
            catalog,
            reliability,
            bandwidth,
            reliability_cap,
        })
    }

    pub fn sessions(&self) -> usize {
        self.bandwidth.len()
    }
}

/// Balance matrix `H = H_in - H_out`: row `s'` holds, for every action, the
/// probability of moving to `s'` minus the indicator that the action is taken
/// in `s'`. A stationary occupation measure satisfies `H x = 0`.
pub fn build_constraint_matrix(catalog: &ActionCatalog, arrivals: &ArrivalSpec) -> Result<Vec<Vec<f64>>> {
    let succ = action_successors(catalog, arrivals)?;
    let n = catalog.state_count();
    let mut h = vec![vec![0.0; catalog.len()]; n];
    for (a, next) in succ.iter().enumerate() {
        for &(s, p) in next {
            h[s][a] += p;
        }
        h[catalog.model.state_of(catalog.actions[a].q)][a] -= 1.0;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Occupation-measure LP over the catalog's actions. Actions outside the
/// feasible set never enter the catalog, which is how their structural zeros
/// are imposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    /// Minimised: `(1 / mean arrival) * sum q x`.
    pub objective: Vec<f64>,
    /// Balance rows, then the mass row.
    pub equalities: Vec<LpRow>,
    /// Reliability row, then one normalised row per capped session.
    pub inequalities: Vec<LpRow>,
    pub r_th: f64,
    pub bandwidth_limits: Vec<Option<f64>>,
}

impl LpProblem {
    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn to_linear_program<T: Scalar>(&self) -> LinearProgram<T> {
        let conv = |r: &LpRow| Constraint {
            coeffs: r.coeffs.iter().map(|&v| T::from_f64(v)).collect(),
            sense: r.sense,
            rhs: T::from_f64(r.rhs),
        };
        LinearProgram {
            objective: self.objective.iter().map(|&v| T::from_f64(v)).collect(),
            constraints: self.equalities.iter().chain(&self.inequalities).map(conv).collect(),
        }
    }
}

pub fn assemble_lp(instance: &CmdpInstance, r_th: f64, bandwidth_limits: &[Option<f64>]) -> Result<LpProblem> {
    let cat = &instance.catalog;
    let rate = instance.arrivals.mean();
    if rate <= 0.0 {
        return Err(Error::ZeroArrivalRate);
    }
    if !r_th.is_finite() {
        return Err(Error::params("reliability threshold must be finite"));
    }
    if r_th > instance.reliability_cap + 1e-12 {
        return Err(Error::Infeasible(format!(
            "reliability threshold {r_th} exceeds the attainable ceiling {}",
            instance.reliability_cap
        )));
    }
    if bandwidth_limits.len() != instance.sessions() {
        return Err(Error::DimensionMismatch(format!(
            "{} bandwidth limits for {} sessions",
            bandwidth_limits.len(),
            instance.sessions()
        )));
    }
    let objective = cat.actions.iter().map(|a| a.q as f64 / rate).collect();
    let mut equalities: Vec<LpRow> = build_constraint_matrix(cat, &instance.arrivals)?
        .into_iter()
        .map(|coeffs| LpRow {
            coeffs,
            sense: Sense::Eq,
            rhs: 0.0,
        })
        .collect();
    equalities.push(LpRow {
        coeffs: vec![1.0; cat.len()],
        sense: Sense::Eq,
        rhs: 1.0,
    });
    let mut inequalities = vec![LpRow {
        coeffs: instance.reliability.clone(),
        sense: Sense::Ge,
        rhs: r_th,
    }];
    for (j, lim) in bandwidth_limits.iter().enumerate() {
        if let Some(lim) = lim {
            if *lim <= 0.0 {
                return Err(Error::params(format!("bandwidth limit of session {j} must be positive")));
            }
            inequalities.push(LpRow {
                coeffs: instance.bandwidth[j].iter().map(|w| w / lim).collect(),
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }
    Ok(LpProblem {
        objective,
        equalities,
        inequalities,
        r_th,
        bandwidth_limits: bandwidth_limits.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest constraint violation of `x`.
    pub residual: f64,
}

/// Solves the LP in `f64`. Infeasibility carries the Farkas multipliers in
/// the error message.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    let lp = problem.to_linear_program::<f64>();
    match simplex::solve(&lp) {
        Outcome::Optimal { x, .. } => {
            let x: Vec<f64> = x.into_iter().map(|v| if v.abs() < 1e-13 { 0.0 } else { v }).collect();
            let objective = x.iter().zip(&problem.objective).map(|(a, b)| a * b).sum();
            let residual = lp.violation(&x);
            Ok(LpSolution { x, objective, residual })
        }
        Outcome::Infeasible(cert) => {
            let y: Vec<String> = cert.multipliers.iter().map(|v| format!("{v:.6e}")).collect();
            Err(Error::Infeasible(format!(
                "no occupation measure meets r_th = {} (Farkas multipliers over balance, mass, reliability and bandwidth rows: [{}])",
                problem.r_th,
                y.join(", ")
            )))
        }
        Outcome::Unbounded => Err(Error::Unbounded),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub q: usize,
    pub reachable: bool,
    /// Distinct block lengths in the support, ascending.
    pub block_lengths: Vec<usize>,
    /// Number of distinct actions in the support.
    pub actions: usize,
    pub g_min: usize,
    pub g_max: usize,
    /// Probability of `g_max`.
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub states: Vec<StateSummary>,
    /// Reachable queue lengths where the policy randomizes.
    pub randomized: Vec<usize>,
    /// Smallest randomized queue length.
    pub threshold: Option<usize>,
    /// Probability of the larger block at the threshold.
    pub mix_probability: Option<f64>,
    /// Every supported transmitting weight vector is Pareto-maximal in the
    /// catalog.
    pub saturated: bool,
}

impl ThresholdSummary {
    /// At most one randomized state and at most two block lengths in every
    /// state.
    pub fn is_threshold_structured(&self) -> bool {
        self.randomized.len() <= 1 && self.states.iter().all(|s| s.block_lengths.len() <= 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub mean_queue: f64,
    pub mean_delay: f64,
    /// Mean occupied bandwidth per session, bits per second.
    pub bandwidth: Vec<f64>,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedPolicy {
    pub r_th: f64,
    pub x: Vec<f64>,
    pub pi: Vec<f64>,
    pub policy: Policy,
    pub objective: f64,
    pub threshold: ThresholdSummary,
    pub metrics: PolicyMetrics,
}

fn dominated(w: &[f64], by: &[f64]) -> bool {
    w != by && w.iter().zip(by).all(|(a, b)| a <= b)
}

/// Policy and summaries from an optimal occupation measure: `f = x / pi`
/// where `pi > 0`, and the largest block where a state is never visited.
pub fn extract_policy(instance: &CmdpInstance, r_th: f64, x: &[f64]) -> Result<SolvedPolicy> {
    let cat = &instance.catalog;
    if x.len() != cat.len() {
        return Err(Error::DimensionMismatch(format!("{} values for {} actions", x.len(), cat.len())));
    }
    let x: Vec<f64> = x.iter().map(|&v| if v > SUPPORT_TOL { v } else { 0.0 }).collect();
    let pi: Vec<f64> = (0..cat.state_count()).map(|s| x[cat.state_range(s)].iter().sum()).collect();
    let mut probs = vec![0.0; cat.len()];
    let mut states = Vec::with_capacity(pi.len());
    for (s, &p) in pi.iter().enumerate() {
        let range = cat.state_range(s);
        let reachable = p > SUPPORT_TOL;
        if reachable {
            for a in range.clone() {
                probs[a] = x[a] / p;
            }
        } else {
            probs[cat.max_action(s)] = 1.0;
        }
        let support: Vec<usize> = range.filter(|&a| probs[a] > 0.0).collect();
        let mut gs: Vec<usize> = support.iter().map(|&a| cat.actions[a].g).collect();
        gs.dedup();
        let g_max = *gs.last().expect("every state has support");
        states.push(StateSummary {
            q: cat.model.queue_len(s),
            reachable,
            actions: support.len(),
            g_min: gs[0],
            g_max,
            p_max: support.iter().filter(|&&a| cat.actions[a].g == g_max).map(|&a| probs[a]).sum(),
            block_lengths: gs,
        });
    }
    let randomized: Vec<usize> = states.iter().filter(|s| s.reachable && s.actions > 1).map(|s| s.q).collect();
    let threshold = randomized.first().copied();
    let mix_probability = threshold.map(|q| states[cat.model.state_of(q)].p_max);
    let transmit: Vec<&[f64]> = cat.weights[1..].iter().map(|w| w.as_slice()).collect();
    let saturated = (0..cat.len()).filter(|&a| x[a] > 0.0 && cat.actions[a].g > 0).all(|a| {
        let w = cat.weight(a).as_slice();
        !transmit.iter().any(|o| dominated(w, o))
    });
    let policy = Policy::new(cat.clone(), probs)?;
    let metrics = metrics_from_measure(instance, &x)?;
    Ok(SolvedPolicy {
        r_th,
        objective: metrics.mean_delay,
        x,
        pi,
        policy,
        threshold: ThresholdSummary {
            states,
            randomized,
            threshold,
            mix_probability,
            saturated,
        },
        metrics,
    })
}

/// Assemble, solve and extract in one step.
pub fn solve_policy(instance: &CmdpInstance, r_th: f64, bandwidth_limits: &[Option<f64>]) -> Result<SolvedPolicy> {
    let problem = assemble_lp(instance, r_th, bandwidth_limits)?;
    let sol = solve_lp(&problem)?;
    extract_policy(instance, r_th, &sol.x)
}

/// Long-run metrics of an occupation measure.
pub fn metrics_from_measure(instance: &CmdpInstance, x: &[f64]) -> Result<PolicyMetrics> {
    let rate = instance.arrivals.mean();
    if rate <= 0.0 {
        return Err(Error::ZeroArrivalRate);
    }
    let cat = &instance.catalog;
    let mean_queue: f64 = cat.actions.iter().zip(x).map(|(a, v)| a.q as f64 * v).sum();
    Ok(PolicyMetrics {
        mean_queue,
        mean_delay: mean_queue / rate,
        bandwidth: instance.bandwidth.iter().map(|b| b.iter().zip(x).map(|(w, v)| w * v).sum()).collect(),
        reliability: instance.reliability.iter().zip(x).map(|(f, v)| f * v).sum(),
    })
}

/// Metrics of an arbitrary policy via its stationary distribution.
pub fn policy_metrics(instance: &CmdpInstance, policy: &Policy) -> Result<PolicyMetrics> {
    if instance.arrivals.mean() <= 0.0 {
        return Err(Error::ZeroArrivalRate);
    }
    if policy.catalog != instance.catalog {
        return Err(Error::DimensionMismatch("policy was built for a different catalog".into()));
    }
    let k = transition_kernel(policy, &instance.arrivals)?;
    let pi = stationary_distribution(&k)?;
    metrics_from_measure(instance, &occupation_measure(policy, &pi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub r_th: f64,
    pub feasible: bool,
    pub mean_delay: Option<f64>,
    pub bandwidth: Vec<f64>,
    pub reliability: Option<f64>,
}

/// LP optimum for every reliability target; infeasible targets stay in the
/// output with `feasible = false`.
pub fn tradeoff_curve(instance: &CmdpInstance, r_values: &[f64], bandwidth_limits: &[Option<f64>], exec: Execution) -> Result<Vec<TradeoffPoint>> {
    if r_values.is_empty() {
        return Err(Error::params("reliability sweep is empty"));
    }
    exec.map(r_values.len(), |i| {
        let r_th = r_values[i];
        match assemble_lp(instance, r_th, bandwidth_limits).and_then(|p| solve_lp(&p)) {
            Ok(sol) => {
                let m = metrics_from_measure(instance, &sol.x)?;
                Ok(TradeoffPoint {
                    r_th,
                    feasible: true,
                    mean_delay: Some(m.mean_delay),
                    bandwidth: m.bandwidth,
                    reliability: Some(m.reliability),
                })
            }
            Err(Error::Infeasible(_)) => Ok(TradeoffPoint {
                r_th,
                feasible: false,
                mean_delay: None,
                bandwidth: Vec::new(),
                reliability: None,
            }),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect()
}

pub fn write_tradeoff_csv<W: std::io::Write>(mut w: W, sessions: usize, points: &[TradeoffPoint]) -> std::io::Result<()> {
    let bw: Vec<String> = (1..=sessions).map(|j| format!("bandwidth_{j}")).collect();
    writeln!(w, "r_th,mean_delay,{},feasible", bw.join(","))?;
    for p in points {
        let delay = p.mean_delay.map(|d| d.to_string()).unwrap_or_default();
        let bws: Vec<String> = (0..sessions)
            .map(|j| p.bandwidth.get(j).map(|b| b.to_string()).unwrap_or_default())
            .collect();
        writeln!(w, "{},{},{},{}", p.r_th, delay, bws.join(","), p.feasible)?;
    }
    Ok(())
}
