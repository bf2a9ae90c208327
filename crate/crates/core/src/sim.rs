//! Slot-level Monte Carlo of the sender buffer under a fixed policy.
//!
//! Each slot the policy picks `(g, w)` for the current queue length, the
//! generation is either decoded or lost, and the queue moves by
//! [`queue_step`]. Lost generations are not retransmitted: their packets
//! leave the buffer and only the reliability counters notice.
//!
//! In [`CodecMode::Analytic`] a generation decodes with probability equal
//! to its reliability coefficient. In [`CodecMode::FullCodec`] the
//! generation is Raptor encoded into `ceil(sum(w) * redundancy * g)`
//! packets, session `j` carries `floor(w_j * redundancy * g)` of them (the
//! rounding remainder goes to the fastest transmitting session), a session
//! misses the deadline with probability `1 - F_j`, each packet of an
//! on-time session is erased with probability `eps_j`, and the receiver
//! decodes the pooled survivors by rank.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmdp::{queue_step, CmdpInstance, Policy};
use crate::codec::{encode_with, ml_decode, CodecParams, RaptorGenerator, SourceBlock};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::reliability::{session_probabilities, ReliabilityParams, SessionProfile};
use crate::rng;
use crate::scenario::{CodecMode, ScenarioConfig};
use crate::threat::{measure_leak, validate_attacker, AttackerSet, LeakReport, Topology};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub policy: Policy,
    pub slots: u64,
    pub seed: u64,
    pub mode: CodecMode,
    pub attacker: Option<AttackerSet>,
    /// Record the queue every this many slots; 0 records nothing.
    pub sample_every: u64,
}

impl SimConfig {
    /// Slot count, mode, sampling and seed taken from the scenario.
    pub fn new(scenario: ScenarioConfig, policy: Policy) -> Self {
        SimConfig {
            slots: scenario.sim.slots,
            seed: scenario.seed,
            mode: scenario.sim.mode,
            sample_every: scenario.sim.sample_every,
            attacker: None,
            scenario,
            policy,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_slots(mut self, slots: u64) -> Self {
        self.slots = slots;
        self
    }

    pub fn with_mode(mut self, mode: CodecMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_attacker(mut self, attacker: AttackerSet) -> Self {
        self.attacker = Some(attacker);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounters {
    /// Coded packets put on the session.
    pub sent: u64,
    /// Packets lost to the erasure channel.
    pub erased: u64,
    /// Generations in which the session missed the deadline.
    pub late: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSample {
    pub slot: u64,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub slots: u64,
    pub granularity: usize,
    /// Mean arrivals per slot of the arrival law, packets.
    pub mean_arrival: f64,
    pub mean_queue: f64,
    /// `mean_queue / mean_arrival`, in slots.
    pub mean_delay: f64,
    /// Generations attempted (slots with `g > 0`).
    pub generations: u64,
    pub decoded: u64,
    pub idle_slots: u64,
    /// `decoded / generations`; 1 when nothing was attempted.
    pub empirical_reliability: f64,
    /// Fraction of slots that were idle or decoded, the quantity the LP
    /// reliability row constrains.
    pub slot_reliability: f64,
    pub delay_deadline: f64,
    pub violation_prob: f64,
    pub sessions: Vec<SessionCounters>,
    pub leaks: Vec<LeakReport>,
    pub max_leak_ratio: Option<f64>,
    /// `histogram[s]` counts slots that began with `s * granularity` queued
    /// packets.
    pub histogram: Vec<u64>,
    pub series: Vec<QueueSample>,
}

impl SimStats {
    /// Empirical queue-length law.
    pub fn queue_distribution(&self) -> Vec<f64> {
        self.histogram.iter().map(|&c| c as f64 / self.slots as f64).collect()
    }

    /// Pools independent runs of the same scenario. The result does not
    /// depend on the order of `runs`, except for the concatenated leak
    /// reports and time series.
    pub fn merge(runs: &[SimStats]) -> Result<SimStats> {
        let first = runs.first().ok_or_else(|| Error::params("no runs to merge"))?;
        let mut out = first.clone();
        for r in &runs[1..] {
            if r.histogram.len() != out.histogram.len() || r.sessions.len() != out.sessions.len() || r.granularity != out.granularity {
                return Err(Error::DimensionMismatch("runs come from different scenarios".into()));
            }
            out.slots += r.slots;
            out.generations += r.generations;
            out.decoded += r.decoded;
            out.idle_slots += r.idle_slots;
            for (a, b) in out.histogram.iter_mut().zip(&r.histogram) {
                *a += b;
            }
            for (a, b) in out.sessions.iter_mut().zip(&r.sessions) {
                a.sent += b.sent;
                a.erased += b.erased;
                a.late += b.late;
            }
            out.leaks.extend(r.leaks.iter().cloned());
            out.series.extend(r.series.iter().copied());
        }
        out.finish();
        Ok(out)
    }

    fn finish(&mut self) {
        let queue_sum: u64 = self
            .histogram
            .iter()
            .enumerate()
            .map(|(s, &c)| (s * self.granularity) as u64 * c)
            .sum();
        self.mean_queue = queue_sum as f64 / self.slots as f64;
        self.mean_delay = if self.mean_arrival > 0.0 { self.mean_queue / self.mean_arrival } else { 0.0 };
        self.empirical_reliability = if self.generations == 0 { 1.0 } else { self.decoded as f64 / self.generations as f64 };
        self.slot_reliability = (self.idle_slots + self.decoded) as f64 / self.slots as f64;
        self.violation_prob = violation_probability(self, self.delay_deadline).unwrap_or(0.0);
        self.max_leak_ratio = self.leaks.iter().map(|l| l.ratio).reduce(f64::max);
    }
}

/// Fraction of slots with `q / mean_arrival >= d_th`.
pub fn violation_probability(stats: &SimStats, d_th: f64) -> Result<f64> {
    if !(stats.mean_arrival > 0.0) {
        return Err(Error::ZeroArrivalRate);
    }
    if d_th.is_nan() {
        return Err(Error::params("delay threshold is NaN"));
    }
    let hits: u64 = stats
        .histogram
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s * stats.granularity) as f64 / stats.mean_arrival >= d_th)
        .map(|(_, &c)| c)
        .sum();
    Ok(hits as f64 / stats.slots as f64)
}

/// Per-action data the slot loop needs.
struct Prepared {
    inst: CmdpInstance,
    profiles: Vec<SessionProfile>,
    params: ReliabilityParams,
    /// `split[a][j]`: packets of action `a` carried by session `j`.
    split: Vec<Vec<usize>>,
    /// `on_time[a][j]`: probability session `j` meets the deadline.
    on_time: Vec<Vec<f64>>,
    topology: Option<Topology>,
}

/// Coded packets per session for one generation.
pub fn packet_split(weights: &[f64], redundancy: f64, g: usize, bandwidth: &[f64]) -> Vec<usize> {
    const SNAP: f64 = 1e-9;
    let mut split: Vec<usize> = weights
        .iter()
        .map(|w| (w * redundancy * g as f64 + SNAP).floor() as usize)
        .collect();
    let total = (weights.iter().sum::<f64>() * redundancy * g as f64 - SNAP).ceil().max(0.0) as usize;
    let assigned: usize = split.iter().sum();
    if total > assigned {
        let fastest = (0..weights.len())
            .filter(|&j| weights[j] > 0.0)
            .max_by(|&a, &b| bandwidth[a].total_cmp(&bandwidth[b]).then(b.cmp(&a)));
        if let Some(j) = fastest {
            split[j] += total - assigned;
        }
    }
    split
}

fn prepare(cfg: &SimConfig) -> Result<Prepared> {
    if cfg.slots == 0 {
        return Err(Error::params("simulation needs at least one slot"));
    }
    cfg.policy.validate()?;
    let inst = cfg.scenario.instance()?;
    let catalog = &cfg.policy.catalog;
    if catalog.model != inst.catalog.model || catalog.actions != inst.catalog.actions || catalog.weights != inst.catalog.weights {
        return Err(Error::DimensionMismatch(format!(
            "policy covers {} actions over {} states but the scenario has {} actions over {} states",
            catalog.len(),
            catalog.state_count(),
            inst.catalog.len(),
            inst.catalog.state_count()
        )));
    }
    let profiles = cfg.scenario.profiles()?;
    let params = cfg.scenario.reliability_params()?;
    let bandwidth: Vec<f64> = profiles.iter().map(|p| p.bandwidth).collect();
    let mut split = Vec::with_capacity(catalog.len());
    let mut on_time = Vec::with_capacity(catalog.len());
    for (a, action) in catalog.actions.iter().enumerate() {
        let w = catalog.weight(a);
        if action.g == 0 {
            split.push(vec![0; profiles.len()]);
            on_time.push(vec![1.0; profiles.len()]);
        } else {
            split.push(packet_split(w.as_slice(), params.redundancy, action.g, &bandwidth));
            on_time.push(session_probabilities(params.deadline, w, action.g, &profiles, &params));
        }
    }
    let topology = match &cfg.attacker {
        None => None,
        Some(attacker) => {
            if cfg.mode != CodecMode::FullCodec {
                return Err(Error::params("a leak audit needs full-codec mode"));
            }
            let top = cfg
                .scenario
                .topology
                .clone()
                .ok_or_else(|| Error::InvalidAttacker("an attacker needs a topology in the scenario".into()))?;
            if top.session_count() != profiles.len() {
                return Err(Error::DimensionMismatch(format!(
                    "topology has {} sessions, scenario has {}",
                    top.session_count(),
                    profiles.len()
                )));
            }
            if !validate_attacker(attacker, &top) {
                return Err(Error::InvalidAttacker(format!(
                    "attacker nodes {:?} must be nonempty and inside a single session",
                    attacker.nodes
                )));
            }
            Some(top)
        }
    };
    Ok(Prepared {
        inst,
        profiles,
        params,
        split,
        on_time,
        topology,
    })
}

fn draw_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u = rng::uniform_f64(rng);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the total mass; take the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Outcome of one full-codec generation.
struct Generation {
    decoded: bool,
    leak: Option<LeakReport>,
}

struct CodecBench<'a> {
    cfg: &'a SimConfig,
    prep: &'a Prepared,
    base: HashMap<usize, CodecParams>,
}

impl CodecBench<'_> {
    fn run(&mut self, slot: u64, a: usize, rng: &mut ChaCha8Rng, counters: &mut [SessionCounters]) -> Result<Generation> {
        let g = self.prep.inst.catalog.actions[a].g;
        if !self.base.contains_key(&g) {
            self.base.insert(g, self.cfg.scenario.codec_params(g, 0)?);
        }
        let gen_seed = rng::derive_seed(self.cfg.seed, slot);
        let gen = RaptorGenerator::new(self.base[&g].clone().with_seed(gen_seed))?;
        let block = SourceBlock::random(g, self.cfg.scenario.sim.payload_bits, gen_seed)?;
        let split = &self.prep.split[a];
        let n: usize = split.iter().sum();
        let coded = encode_with(&gen, &block, slot, n).coded;

        let mut assignment = Vec::with_capacity(n);
        let mut kept = Vec::with_capacity(n);
        for (j, &count) in split.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let first = assignment.len();
            assignment.extend(std::iter::repeat_n(j, count));
            counters[j].sent += count as u64;
            let on_time = rng::bernoulli(rng, self.prep.on_time[a][j]);
            if !on_time {
                counters[j].late += 1;
            }
            let eps = self.prep.profiles[j].erasure;
            for i in first..first + count {
                if rng::bernoulli(rng, eps) {
                    counters[j].erased += 1;
                } else if on_time {
                    kept.push(i);
                }
            }
        }
        let decoded = ml_decode(&coded.select(&kept), g)?.is_full();
        let leak = match (&self.cfg.attacker, &self.prep.topology) {
            (Some(attacker), Some(top)) => Some(measure_leak(&coded, &assignment, attacker, top, self.prep.params.security_cap)?),
            _ => None,
        };
        Ok(Generation { decoded, leak })
    }
}

/// Simulates `cfg.slots` slots from an empty buffer.
pub fn run(cfg: &SimConfig) -> Result<SimStats> {
    let prep = prepare(cfg)?;
    let catalog = &prep.inst.catalog;
    let model = catalog.model;
    let arrivals = &prep.inst.arrivals;
    let gran = arrivals.granularity();
    let mut rng = rng::stream(cfg.seed, 0);
    let mut bench = CodecBench {
        cfg,
        prep: &prep,
        base: HashMap::new(),
    };

    let mut stats = SimStats {
        slots: cfg.slots,
        granularity: gran,
        mean_arrival: arrivals.mean(),
        mean_queue: 0.0,
        mean_delay: 0.0,
        generations: 0,
        decoded: 0,
        idle_slots: 0,
        empirical_reliability: 1.0,
        slot_reliability: 1.0,
        delay_deadline: cfg.scenario.thresholds.delay_deadline_slots,
        violation_prob: 0.0,
        sessions: vec![SessionCounters::default(); prep.profiles.len()],
        leaks: Vec::new(),
        max_leak_ratio: None,
        histogram: vec![0; catalog.state_count()],
        series: Vec::new(),
    };
    let mut q = 0usize;
    for slot in 0..cfg.slots {
        let s = model.state_of(q);
        stats.histogram[s] += 1;
        if cfg.sample_every > 0 && slot % cfg.sample_every == 0 {
            stats.series.push(QueueSample { slot, q });
        }
        let range = catalog.state_range(s);
        let a = range.start + draw_index(&mut rng, &cfg.policy.probs[range]);
        let g = catalog.actions[a].g;
        if g == 0 {
            stats.idle_slots += 1;
        } else {
            stats.generations += 1;
            let decoded = match cfg.mode {
                CodecMode::Analytic => rng::bernoulli(&mut rng, prep.inst.reliability[a]),
                CodecMode::FullCodec => {
                    let out = bench.run(slot, a, &mut rng, &mut stats.sessions)?;
                    stats.leaks.extend(out.leak);
                    out.decoded
                }
            };
            if decoded {
                stats.decoded += 1;
            }
        }
        let k = draw_index(&mut rng, arrivals.probabilities());
        q = queue_step(q, g, k * gran, model.capacity);
    }
    stats.finish();
    Ok(stats)
}

/// `replicas` independent runs with seeds derived from `cfg.seed`.
pub fn run_replicas(cfg: &SimConfig, replicas: usize, exec: Execution) -> Result<Vec<SimStats>> {
    exec.map(replicas, |i| run(&cfg.clone().with_seed(rng::derive_seed(cfg.seed, i as u64))))
        .into_iter()
        .collect()
}

/// Per-generation leak reports of a full-codec run; empty without an
/// attacker.
pub fn leak_audit(cfg: &SimConfig) -> Result<Vec<LeakReport>> {
    if cfg.attacker.is_none() {
        return Ok(Vec::new());
    }
    Ok(run(cfg)?.leaks)
}

/// Histogram as `q,count` rows.
pub fn write_histogram_csv<W: std::io::Write>(mut w: W, stats: &SimStats) -> std::io::Result<()> {
    writeln!(w, "q,count")?;
    for (s, c) in stats.histogram.iter().enumerate() {
        writeln!(w, "{},{}", s * stats.granularity, c)?;
    }
    Ok(())
}
