use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reliability::WeightVector;

/// Per-slot arrival law on `{0, gran, 2 gran, ..., N}` packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArrivalRepr", into = "ArrivalRepr")]
pub struct ArrivalSpec {
    granularity: usize,
    probs: Vec<f64>,
    mean: f64,
    variance: f64,
}

#[derive(Serialize, Deserialize)]
struct ArrivalRepr {
    granularity: usize,
    probabilities: Vec<f64>,
    #[serde(default, skip_deserializing)]
    mean: f64,
    #[serde(default, skip_deserializing)]
    variance: f64,
}

impl TryFrom<ArrivalRepr> for ArrivalSpec {
    type Error = Error;
    fn try_from(r: ArrivalRepr) -> Result<Self> {
        ArrivalSpec::new(r.granularity, r.probabilities)
    }
}

impl From<ArrivalSpec> for ArrivalRepr {
    fn from(a: ArrivalSpec) -> Self {
        ArrivalRepr {
            granularity: a.granularity,
            probabilities: a.probs,
            mean: a.mean,
            variance: a.variance,
        }
    }
}

pub const DEFAULT_GRANULARITY: usize = 25;

impl ArrivalSpec {
    /// `probs[k]` is the probability of `k * granularity` arrivals.
    pub fn new(granularity: usize, probs: Vec<f64>) -> Result<Self> {
        if granularity == 0 {
            return Err(Error::params("arrival granularity must be positive"));
        }
        if probs.is_empty() {
            return Err(Error::params("arrival law is empty"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::params(format!("arrival probability {p} is negative or not finite")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::params(format!("arrival probabilities sum to {total}, not 1")));
        }
        let m1: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let m2: f64 = probs.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        Ok(ArrivalSpec {
            granularity,
            mean: m1 * granularity as f64,
            variance: m2 - m1 * m1,
            probs,
        })
    }

    /// Builds the law from the probabilities of `1..=N` granules; the
    /// remaining mass goes to zero arrivals.
    pub fn from_table(granularity: usize, row: &[f64]) -> Result<Self> {
        let total: f64 = row.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::params(format!("arrival row sums to {total} > 1")));
        }
        let mut probs = Vec::with_capacity(row.len() + 1);
        probs.push((1.0 - total).max(0.0));
        probs.extend_from_slice(row);
        Self::new(granularity, probs)
    }

    /// Point mass at `packets` (a multiple of the granularity).
    pub fn constant(granularity: usize, packets: usize) -> Result<Self> {
        if granularity == 0 || !packets.is_multiple_of(granularity) {
            return Err(Error::params("constant arrival must be a multiple of the granularity"));
        }
        let k = packets / granularity;
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self::new(granularity, probs)
    }

    pub fn granularity(&self) -> usize {
        self.granularity
    }

    /// Probability of `k` granules.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Mean arrivals per slot, packets.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Variance in granule-squared units.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Largest arrival with positive probability, packets.
    pub fn max_arrival(&self) -> usize {
        (self.probs.len() - 1) * self.granularity
    }
}

/// Sender buffer: capacity `Z`, block cap `B`, arrival cap `N`, all in
/// packets and multiples of `granularity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueModel {
    pub capacity: usize,
    pub max_block: usize,
    pub max_arrival: usize,
    pub granularity: usize,
}

impl QueueModel {
    pub fn new(capacity: usize, max_block: usize, max_arrival: usize, granularity: usize) -> Result<Self> {
        let m = QueueModel {
            capacity,
            max_block,
            max_arrival,
            granularity,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let gran = self.granularity;
        if gran == 0 {
            return Err(Error::params("granularity must be positive"));
        }
        for (name, v) in [("capacity", self.capacity), ("max_block", self.max_block), ("max_arrival", self.max_arrival)] {
            if v % gran != 0 {
                return Err(Error::params(format!("{name} = {v} is not a multiple of granularity {gran}")));
            }
        }
        if self.capacity < self.max_arrival {
            return Err(Error::params(format!(
                "capacity {} is below the largest arrival {}",
                self.capacity, self.max_arrival
            )));
        }
        if self.max_block > self.capacity {
            return Err(Error::params(format!(
                "block cap {} exceeds capacity {}",
                self.max_block, self.capacity
            )));
        }
        if self.max_block == 0 {
            return Err(Error::params("block cap must be positive"));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.capacity / self.granularity + 1
    }

    /// Queue length of state `s`, packets.
    pub fn queue_len(&self, s: usize) -> usize {
        s * self.granularity
    }

    pub fn state_of(&self, q: usize) -> usize {
        q / self.granularity
    }

    /// Smallest block that keeps room for the largest arrival.
    pub fn min_block(&self, q: usize) -> usize {
        q.saturating_sub(self.capacity - self.max_arrival)
    }

    /// Largest block available at queue length `q`.
    pub fn max_block_at(&self, q: usize) -> usize {
        q.min(self.max_block)
    }

    /// Every state can avoid overflow only if `Z - B <= Z - N`, i.e. `B >= N`.
    pub fn check_structure(&self) -> Result<()> {
        if self.max_block < self.max_arrival {
            return Err(Error::Infeasible(format!(
                "block cap {} is below the largest arrival {}: a full buffer must overflow",
                self.max_block, self.max_arrival
            )));
        }
        Ok(())
    }
}

/// `min((q - g)^+ + arrivals, Z)`.
pub fn queue_step(q: usize, g: usize, arrivals: usize, capacity: usize) -> usize {
    (q.saturating_sub(g) + arrivals).min(capacity)
}

/// One decision: serve `g` packets at queue length `q` with weight vector
/// `weights` (an index into [`ActionCatalog::weights`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub q: usize,
    pub g: usize,
    pub weights: usize,
}

/// Weight vectors used by transmitting actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid {
    pub step: f64,
    pub cap: f64,
    pub sessions: usize,
    pub full: bool,
}

impl WeightGrid {
    pub fn new(step: f64, cap: f64, sessions: usize, full: bool) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::params("weight step must lie in (0, 1]"));
        }
        if sessions == 0 {
            return Err(Error::params("at least one session is needed"));
        }
        let grid = WeightGrid {
            step,
            cap,
            sessions,
            full,
        };
        if grid.vectors().is_empty() {
            return Err(Error::params(format!(
                "no weight vector on step {step} with every weight <= {cap} has total in [1, {sessions})"
            )));
        }
        Ok(grid)
    }

    fn levels(&self) -> usize {
        ((self.cap.min(1.0) + 1e-9) / self.step).floor() as usize
    }

    /// Admissible vectors: every weight a positive multiple of `step` no
    /// larger than `cap`, total in `[1, sessions)`. The reduced set keeps
    /// only the Pareto-maximal ones.
    pub fn vectors(&self) -> Vec<WeightVector> {
        let levels = self.levels();
        if levels == 0 {
            return Vec::new();
        }
        let n = self.sessions;
        let admissible = |ks: &[usize]| {
            let v: Vec<f64> = ks.iter().map(|&k| k as f64 * self.step).collect();
            let w = WeightVector::new(v).ok()?;
            w.is_admissible(self.step).then_some(w)
        };
        if !self.full {
            // largest multiple of the step for every session; when that
            // reaches N_L the total bound is violated and we shave the last
            // session down until it fits
            let mut ks = vec![levels; n];
            loop {
                if let Some(w) = admissible(&ks) {
                    return vec![w];
                }
                match ks.iter().rposition(|&k| k > 1) {
                    Some(i) => ks[i] -= 1,
                    None => return Vec::new(),
                }
            }
        }
        let mut out = Vec::new();
        let mut ks = vec![1usize; n];
        loop {
            if let Some(w) = admissible(&ks) {
                out.push(w);
            }
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                if ks[i] < levels {
                    ks[i] += 1;
                    break;
                }
                ks[i] = 1;
                i += 1;
            }
        }
    }
}

/// Feasible `(q, g, weights)` triples grouped by state, plus the weight
/// vectors they refer to. Weight index 0 is the null vector used by idle
/// actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCatalog {
    pub model: QueueModel,
    pub weights: Vec<WeightVector>,
    pub actions: Vec<Action>,
    /// `actions[state_start[s]..state_start[s + 1]]` belong to state `s`.
    state_start: Vec<usize>,
}

impl ActionCatalog {
    pub fn new(model: QueueModel, transmit: Vec<WeightVector>) -> Result<Self> {
        model.validate()?;
        model.check_structure()?;
        if transmit.is_empty() {
            return Err(Error::params("catalog needs at least one transmitting weight vector"));
        }
        let sessions = transmit[0].len();
        if transmit.iter().any(|w| w.len() != sessions) {
            return Err(Error::DimensionMismatch("weight vectors have different lengths".into()));
        }
        let mut weights = vec![WeightVector::null(sessions)];
        weights.extend(transmit);
        let mut actions = Vec::new();
        let mut state_start = Vec::with_capacity(model.state_count() + 1);
        for s in 0..model.state_count() {
            state_start.push(actions.len());
            let q = model.queue_len(s);
            actions.extend(feasible_actions(q, &model, weights.len() - 1));
        }
        state_start.push(actions.len());
        Ok(ActionCatalog {
            model,
            weights,
            actions,
            state_start,
        })
    }

    pub fn from_grid(model: QueueModel, grid: &WeightGrid) -> Result<Self> {
        Self::new(model, grid.vectors())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn state_count(&self) -> usize {
        self.model.state_count()
    }

    pub fn sessions(&self) -> usize {
        self.weights[0].len()
    }

    pub fn state_range(&self, s: usize) -> std::ops::Range<usize> {
        self.state_start[s]..self.state_start[s + 1]
    }

    pub fn weight(&self, a: usize) -> &WeightVector {
        &self.weights[self.actions[a].weights]
    }

    pub fn index_of(&self, action: Action) -> Option<usize> {
        let s = self.model.state_of(action.q);
        if s >= self.state_count() {
            return None;
        }
        self.state_range(s).find(|&i| self.actions[i] == action)
    }

    /// The action Eq.-style "serve the most" fallback picks at state `s`:
    /// largest block, and among its weight vectors the one with the largest
    /// total (lowest index on ties).
    pub fn max_action(&self, s: usize) -> usize {
        let r = self.state_range(s);
        let mut best = r.start;
        for i in r {
            let (a, b) = (self.actions[i], self.actions[best]);
            let better = a.g > b.g
                || (a.g == b.g && self.weights[a.weights].total() > self.weights[b.weights].total() + 1e-12);
            if better {
                best = i;
            }
        }
        best
    }
}

/// Actions available at queue length `q` when `transmit_vectors` weight
/// vectors (indices `1..=transmit_vectors`) exist: `g` ranges over multiples
/// of the granularity with `0 <= q - g <= Z - N`, `g <= B`; `g = 0` pairs
/// only with the null vector.
pub fn feasible_actions(q: usize, model: &QueueModel, transmit_vectors: usize) -> Vec<Action> {
    let gran = model.granularity;
    let lo = model.min_block(q).div_ceil(gran) * gran;
    let hi = model.max_block_at(q);
    let mut out = Vec::new();
    let mut g = lo;
    while g <= hi {
        if g == 0 {
            out.push(Action { q, g, weights: 0 });
        } else {
            out.extend((1..=transmit_vectors).map(|w| Action { q, g, weights: w }));
        }
        g += gran;
    }
    out
}
