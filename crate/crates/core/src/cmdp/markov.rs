use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::model::{ActionCatalog, ArrivalSpec};
use crate::error::{Error, Result};

/// Randomized stationary policy: `probs[a]` is the probability of catalog
/// action `a` in its own state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub catalog: ActionCatalog,
    pub probs: Vec<f64>,
}

const ROW_TOL: f64 = 1e-9;

impl Policy {
    pub fn new(catalog: ActionCatalog, probs: Vec<f64>) -> Result<Self> {
        let p = Policy { catalog, probs };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.len() != self.catalog.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} policy entries for {} catalog actions",
                self.probs.len(),
                self.catalog.len()
            )));
        }
        for s in 0..self.catalog.state_count() {
            let row = &self.probs[self.catalog.state_range(s)];
            if row.iter().any(|p| !(p.is_finite() && *p >= -ROW_TOL)) {
                return Err(Error::NotStochastic {
                    row: s,
                    sum: row.iter().sum(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::NotStochastic { row: s, sum });
            }
        }
        Ok(())
    }

    /// Picks `choose(s)` (a catalog index inside state `s`) with certainty.
    pub fn deterministic(catalog: ActionCatalog, choose: impl Fn(usize) -> usize) -> Result<Self> {
        let mut probs = vec![0.0; catalog.len()];
        for s in 0..catalog.state_count() {
            let a = choose(s);
            if !catalog.state_range(s).contains(&a) {
                return Err(Error::params(format!("action {a} does not belong to state {s}")));
            }
            probs[a] = 1.0;
        }
        Self::new(catalog, probs)
    }

    /// Every feasible action of a state equally likely.
    pub fn uniform(catalog: ActionCatalog) -> Self {
        let mut probs = vec![0.0; catalog.len()];
        for s in 0..catalog.state_count() {
            let r = catalog.state_range(s);
            let n = r.len() as f64;
            for i in r {
                probs[i] = 1.0 / n;
            }
        }
        Policy { catalog, probs }
    }

    /// `(action index, probability)` pairs of state `s` with positive mass.
    pub fn support(&self, s: usize) -> Vec<(usize, f64)> {
        self.catalog
            .state_range(s)
            .filter(|&i| self.probs[i] > 0.0)
            .map(|i| (i, self.probs[i]))
            .collect()
    }
}

fn check_arrivals(catalog: &ActionCatalog, arrivals: &ArrivalSpec) -> Result<()> {
    let m = &catalog.model;
    if arrivals.granularity() != m.granularity {
        return Err(Error::DimensionMismatch(format!(
            "arrival granularity {} differs from model granularity {}",
            arrivals.granularity(),
            m.granularity
        )));
    }
    if arrivals.max_arrival() > m.max_arrival {
        return Err(Error::DimensionMismatch(format!(
            "arrivals reach {} packets but the model allows {}",
            arrivals.max_arrival(),
            m.max_arrival
        )));
    }
    Ok(())
}

/// Next-state law of every catalog action: `(state, probability)` pairs.
pub(crate) fn action_successors(catalog: &ActionCatalog, arrivals: &ArrivalSpec) -> Result<Vec<Vec<(usize, f64)>>> {
    check_arrivals(catalog, arrivals)?;
    let m = &catalog.model;
    let last = m.state_count() - 1;
    Ok(catalog
        .actions
        .iter()
        .map(|a| {
            let base = (a.q - a.g) / m.granularity;
            let mut out: Vec<(usize, f64)> = Vec::new();
            for (n, &p) in arrivals.probabilities().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let s = (base + n).min(last);
                match out.last_mut() {
                    Some((t, acc)) if *t == s => *acc += p,
                    _ => out.push((s, p)),
                }
            }
            out
        })
        .collect())
}

/// Row-stochastic kernel `K[s][s']` of the queue under `policy`.
pub fn transition_kernel(policy: &Policy, arrivals: &ArrivalSpec) -> Result<DMatrix<f64>> {
    policy.validate()?;
    let cat = &policy.catalog;
    let succ = action_successors(cat, arrivals)?;
    let n = cat.state_count();
    let mut k = DMatrix::zeros(n, n);
    for s in 0..n {
        for a in cat.state_range(s) {
            let f = policy.probs[a];
            if f == 0.0 {
                continue;
            }
            for &(t, p) in &succ[a] {
                k[(s, t)] += f * p;
            }
        }
    }
    Ok(k)
}

/// Closed communicating classes of a kernel (sorted state lists).
pub fn recurrent_classes(kernel: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = kernel.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * 4);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if kernel[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .filter(|c| {
            c.iter()
                .all(|&i| (0..n).all(|j| kernel[(i, j)] <= 0.0 || c.binary_search(&j).is_ok()))
        })
        .collect();
    classes.sort();
    classes
}

/// Stationary distribution `pi` with `pi K = pi` (row vector times the
/// row-stochastic kernel), `sum pi = 1`.
///
/// Requires exactly one closed class; transient states get zero mass.
pub fn stationary_distribution(kernel: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = kernel.nrows();
    if n == 0 || kernel.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "kernel must be square and nonempty, got {}x{}",
            n,
            kernel.ncols()
        )));
    }
    for i in 0..n {
        let sum: f64 = kernel.row(i).sum();
        if (sum - 1.0).abs() > ROW_TOL || kernel.row(i).iter().any(|&p| p < 0.0) {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }
    let classes = recurrent_classes(kernel);
    if classes.len() != 1 {
        return Err(Error::MultipleRecurrentClasses { classes });
    }
    // (K^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = kernel.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Infeasible("stationary system is singular".into()))?;
    let mut pi: Vec<f64> = sol.iter().map(|&v| if v.abs() < 1e-15 { 0.0 } else { v }).collect();
    if pi.iter().any(|&v| v < -1e-10) {
        return Err(Error::Infeasible("stationary solve returned negative mass".into()));
    }
    for v in &mut pi {
        *v = v.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    Ok(pi)
}

/// `max_s |(pi K)_s - pi_s|`.
pub fn stationary_residual(kernel: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let row = DVector::from_column_slice(pi).transpose() * kernel;
    row.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `x[a] = pi[state(a)] * f[a]`.
pub fn occupation_measure(policy: &Policy, pi: &[f64]) -> Vec<f64> {
    let cat = &policy.catalog;
    let mut x = vec![0.0; cat.len()];
    for (s, &p) in pi.iter().enumerate() {
        for a in cat.state_range(s) {
            x[a] = p * policy.probs[a];
        }
    }
    x
}
