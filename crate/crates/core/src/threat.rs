//! Intrusion and leakage probabilities over disjoint multi-session
//! topologies, and what a passive single-session eavesdropper can recover.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::codec::{recoverable_count, CodedBlock};
use crate::error::{Error, Result};

/// Per-node compromise probabilities, one list per session. Node sets of
/// different sessions are disjoint by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr", into = "TopologyRepr")]
pub struct Topology {
    sessions: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TopologyRepr {
    sessions: Vec<Vec<f64>>,
}

impl TryFrom<TopologyRepr> for Topology {
    type Error = Error;
    fn try_from(r: TopologyRepr) -> Result<Self> {
        Topology::new(r.sessions)
    }
}

impl From<Topology> for TopologyRepr {
    fn from(t: Topology) -> Self {
        TopologyRepr { sessions: t.sessions }
    }
}

impl Topology {
    pub fn new(sessions: Vec<Vec<f64>>) -> Result<Self> {
        if sessions.is_empty() {
            return Err(Error::params("topology needs at least one session"));
        }
        for (j, s) in sessions.iter().enumerate() {
            if let Some(p) = s.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::params(format!("session {j}: node probability {p} outside [0, 1]")));
            }
        }
        Ok(Topology { sessions })
    }

    /// `sizes[j]` nodes in session `j`, each compromised with `probs[j]`.
    pub fn uniform(sizes: &[usize], probs: &[f64]) -> Result<Self> {
        if sizes.len() != probs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} session sizes but {} probabilities",
                sizes.len(),
                probs.len()
            )));
        }
        Self::new(sizes.iter().zip(probs).map(|(&n, &p)| vec![p; n]).collect())
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn session(&self, j: usize) -> &[f64] {
        &self.sessions[j]
    }

    pub fn sessions(&self) -> &[Vec<f64>] {
        &self.sessions
    }

    pub fn node_count(&self) -> usize {
        self.sessions.iter().map(Vec::len).sum()
    }
}

/// Probability that every session has at least one compromised node.
pub fn intrusion_probability(topology: &Topology) -> f64 {
    topology
        .sessions
        .iter()
        .map(|s| 1.0 - s.iter().map(|p| 1.0 - p).product::<f64>())
        .product()
}

/// Distribution of the number of successes among independent Bernoulli
/// trials with the given probabilities.
pub fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut dist = vec![1.0];
    for &p in probs {
        dist = convolve(&dist, &[1.0 - p, p]);
    }
    dist
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `P[M]` for `M = 0..=node_count`: the law of the total number of
/// compromised nodes.
pub fn attacked_count_distribution(topology: &Topology) -> Vec<f64> {
    topology
        .sessions
        .iter()
        .map(|s| poisson_binomial(s))
        .fold(vec![1.0], |acc, d| convolve(&acc, &d))
}

fn check_subset(topology: &Topology, subset: &[usize]) -> Result<BTreeSet<usize>> {
    if subset.is_empty() {
        return Err(Error::params("session subset must be nonempty"));
    }
    let set: BTreeSet<usize> = subset.iter().copied().collect();
    if let Some(&j) = set.iter().find(|&&j| j >= topology.session_count()) {
        return Err(Error::params(format!(
            "session {j} does not exist in a {}-session topology",
            topology.session_count()
        )));
    }
    Ok(set)
}

/// Joint probability that exactly `m` nodes are compromised, all inside the
/// sessions of `subset`, and none elsewhere. `m` beyond the subset's node
/// count has probability zero.
pub fn subset_attack_probability(topology: &Topology, subset: &[usize], m: usize) -> Result<f64> {
    let set = check_subset(topology, subset)?;
    let inside: Vec<f64> = set.iter().flat_map(|&j| topology.sessions[j].iter().copied()).collect();
    let clean_outside: f64 = (0..topology.session_count())
        .filter(|j| !set.contains(j))
        .flat_map(|j| topology.sessions[j].iter())
        .map(|p| 1.0 - p)
        .product();
    Ok(poisson_binomial(&inside).get(m).copied().unwrap_or(0.0) * clean_outside)
}

/// `P[subset | M = m]`; undefined when `P[M = m] = 0`.
pub fn conditional_subset_probability(topology: &Topology, subset: &[usize], m: usize) -> Result<f64> {
    let joint = subset_attack_probability(topology, subset, m)?;
    let marginal = attacked_count_distribution(topology).get(m).copied().unwrap_or(0.0);
    if marginal <= 0.0 {
        return Err(Error::UndefinedConditional { m });
    }
    Ok(joint / marginal)
}

/// Nodes held by one eavesdropper, as `(session, node)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerSet {
    pub nodes: BTreeSet<(usize, usize)>,
}

impl AttackerSet {
    pub fn new(nodes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        AttackerSet {
            nodes: nodes.into_iter().collect(),
        }
    }

    /// All nodes of session `j` in a topology where it has `n` nodes.
    pub fn whole_session(j: usize, n: usize) -> Self {
        Self::new((0..n).map(|i| (j, i)))
    }

    /// The single session the attacker sits in, if any.
    pub fn session(&self) -> Option<usize> {
        let first = self.nodes.first()?.0;
        self.nodes.iter().all(|&(j, _)| j == first).then_some(first)
    }
}

/// True iff the attacker is nonempty, names only existing nodes, and all of
/// them lie in one session. Cooperating attackers across sessions are out of
/// the model.
pub fn validate_attacker(attacker: &AttackerSet, topology: &Topology) -> bool {
    attacker.session().is_some()
        && attacker
            .nodes
            .iter()
            .all(|&(j, i)| j < topology.session_count() && i < topology.sessions[j].len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakReport {
    pub block_id: u64,
    pub session: usize,
    /// Coded packets seen on the attacked session.
    pub intercepted: usize,
    /// Source packets recoverable from them.
    pub recovered: usize,
    pub block_size: usize,
    pub ratio: f64,
    pub cap: f64,
    pub secure: bool,
}

/// What `attacker` learns from `coded` when packet `i` travels on session
/// `assignment[i]`.
pub fn measure_leak(
    coded: &CodedBlock,
    assignment: &[usize],
    attacker: &AttackerSet,
    topology: &Topology,
    cap: f64,
) -> Result<LeakReport> {
    if !validate_attacker(attacker, topology) {
        return Err(Error::InvalidAttacker(format!(
            "attacker nodes {:?} must be nonempty and inside a single session",
            attacker.nodes
        )));
    }
    if assignment.len() != coded.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coded packets but {} session assignments",
            coded.len(),
            assignment.len()
        )));
    }
    let session = attacker.session().expect("validated above");
    let seen: Vec<usize> = (0..coded.len()).filter(|&i| assignment[i] == session).collect();
    let g = coded.g();
    let recovered = recoverable_count(&coded.generator_rows.select_rows(&seen), g)?;
    let ratio = recovered as f64 / g as f64;
    Ok(LeakReport {
        block_id: coded.block_id,
        session,
        intercepted: seen.len(),
        recovered,
        block_size: g,
        ratio,
        cap,
        secure: ratio <= cap,
    })
}
