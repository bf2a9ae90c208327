//! Scenario files and the named parameter presets.
//!
//! A scenario is a TOML document with user-facing units (milliseconds,
//! Mbit/s, bytes). Every section has defaults, so an empty file describes
//! the `e45` scenario.

use serde::{Deserialize, Serialize};

use crate::cmdp::{ActionCatalog, ArrivalSpec, CmdpInstance, QueueModel, WeightGrid, DEFAULT_GRANULARITY};
use crate::codec::{CodecParams, DegreeDistribution, DEFAULT_EXPANSION, DEFAULT_SOLITON_C, DEFAULT_SOLITON_DELTA};
use crate::error::{Error, Result};
use crate::reliability::{reliability_ceiling, ReliabilityParams, SessionProfile, DEFAULT_SIGMA};
use crate::threat::Topology;

pub const PRESETS: [&str; 9] = ["e25", "e45", "e60", "var078", "var116", "var138", "eps-a", "eps-b", "eps-c"];

const ROW_E25: [f64; 4] = [0.24, 0.10, 0.12, 0.05];
const ROW_E45: [f64; 4] = [0.34, 0.27, 0.16, 0.11];
const ROW_E60: [f64; 4] = [0.16, 0.30, 0.20, 0.26];
const ROW_VAR078: [f64; 4] = [0.39, 0.42, 0.11, 0.06];
const ROW_VAR116: [f64; 4] = [0.39, 0.31, 0.13, 0.10];

/// Erasure percentages per session.
pub const EPS_A: [f64; 3] = [22.0, 25.0, 25.0];
pub const EPS_B: [f64; 3] = [9.0, 22.0, 10.0];
pub const EPS_C: [f64; 3] = [6.0, 14.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrivalConfig {
    pub granularity: usize,
    /// Probabilities of `1..=N` granules; zero arrivals take the rest.
    pub table: Option<Vec<f64>>,
    /// Full law over `0..=N` granules; overrides `table`.
    pub probabilities: Option<Vec<f64>>,
}

impl Default for ArrivalConfig {
    fn default() -> Self {
        ArrivalConfig {
            granularity: DEFAULT_GRANULARITY,
            table: Some(ROW_E45.to_vec()),
            probabilities: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueConfig {
    pub capacity: usize,
    pub max_block: usize,
    /// Defaults to the largest arrival of the arrival law.
    pub max_arrival: Option<usize>,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            capacity: 300,
            max_block: 100,
            max_arrival: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub t_p_ms: f64,
    pub bandwidth_mbps: f64,
    pub ceiling: f64,
    #[serde(default = "default_sigma_ms")]
    pub sigma_ms: f64,
    /// Erasure probability in percent.
    #[serde(default)]
    pub erasure_pct: f64,
}

fn default_sigma_ms() -> f64 {
    DEFAULT_SIGMA * 1e3
}

fn default_sessions() -> Vec<SessionConfig> {
    measured_sessions(EPS_C)
}

fn measured_sessions(eps: [f64; 3]) -> Vec<SessionConfig> {
    SessionProfile::measured([0.0; 3])
        .into_iter()
        .zip(eps)
        .map(|(p, e)| SessionConfig {
            t_p_ms: p.t_p * 1e3,
            bandwidth_mbps: p.bandwidth / 1e6,
            ceiling: p.ceiling,
            sigma_ms: p.sigma * 1e3,
            erasure_pct: e,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilityConfig {
    pub decode_threshold: f64,
    pub security_cap: f64,
    pub redundancy: f64,
    pub packet_bytes: f64,
    /// Slot deadline used for the per-action reliability coefficients.
    pub deadline_ms: f64,
    /// Grid step of the scheduling weights.
    pub weight_step: f64,
    /// Use every admissible weight vector instead of the saturated one.
    pub full_grid: bool,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        let p = ReliabilityParams::default();
        ReliabilityConfig {
            decode_threshold: p.decode_threshold,
            security_cap: p.security_cap,
            redundancy: p.redundancy,
            packet_bytes: p.packet_bits / 8.0,
            deadline_ms: p.deadline * 1e3,
            weight_step: 0.05,
            full_grid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    /// Reliability target for `policy` and `simulate`.
    pub r_th: f64,
    /// Targets swept by `tradeoff`.
    pub r_sweep: Vec<f64>,
    /// Per-session bandwidth limits in Mbit/s; `inf` means unlimited.
    pub bandwidth_limit_mbps: Option<Vec<f64>>,
    /// Delay deadline in slots for the violation probability.
    pub delay_deadline_slots: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            r_th: 0.999,
            r_sweep: vec![0.99, 0.993, 0.995, 0.997, 0.998, 0.999, 0.9993, 0.9995, 0.9996],
            bandwidth_limit_mbps: None,
            delay_deadline_slots: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodecMode {
    #[default]
    Analytic,
    FullCodec,
}

impl std::str::FromStr for CodecMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(CodecMode::Analytic),
            "full-codec" => Ok(CodecMode::FullCodec),
            other => Err(Error::params(format!("unknown mode {other:?} (analytic | full-codec)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfigFile {
    pub slots: u64,
    pub mode: CodecMode,
    /// Record every k-th slot in a time series; 0 disables it.
    pub sample_every: u64,
    /// Payload bits per packet in full-codec mode (payload content does not
    /// affect decodability, so this is kept small).
    pub payload_bits: usize,
}

impl Default for SimConfigFile {
    fn default() -> Self {
        SimConfigFile {
            slots: 100_000,
            mode: CodecMode::Analytic,
            sample_every: 0,
            payload_bits: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecConfig {
    /// Intermediate symbols per source symbol.
    pub expansion: usize,
    pub soliton_c: f64,
    pub soliton_delta: f64,
    /// Explicit degree law `[P(d=1), P(d=2), ...]`; overrides the soliton.
    pub distribution: Option<Vec<f64>>,
    pub feedback_window: u32,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            expansion: DEFAULT_EXPANSION,
            soliton_c: DEFAULT_SOLITON_C,
            soliton_delta: DEFAULT_SOLITON_DELTA,
            distribution: None,
            feedback_window: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub arrivals: ArrivalConfig,
    pub queue: QueueConfig,
    #[serde(default = "default_sessions")]
    pub sessions: Vec<SessionConfig>,
    pub reliability: ReliabilityConfig,
    pub thresholds: ThresholdConfig,
    pub topology: Option<Topology>,
    pub sim: SimConfigFile,
    pub codec: CodecConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "e45".into(),
            seed: 1,
            arrivals: ArrivalConfig::default(),
            queue: QueueConfig::default(),
            sessions: default_sessions(),
            reliability: ReliabilityConfig::default(),
            thresholds: ThresholdConfig::default(),
            topology: None,
            sim: SimConfigFile::default(),
            codec: CodecConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (row, eps) = match name {
            "e25" => (ROW_E25, EPS_C),
            "e45" | "var138" => (ROW_E45, EPS_C),
            "e60" => (ROW_E60, EPS_C),
            "var078" => (ROW_VAR078, EPS_C),
            "var116" => (ROW_VAR116, EPS_C),
            "eps-a" => (ROW_E45, EPS_A),
            "eps-b" => (ROW_E45, EPS_B),
            "eps-c" => (ROW_E45, EPS_C),
            other => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", ")),
                ))
            }
        };
        Ok(ScenarioConfig {
            name: name.into(),
            arrivals: ArrivalConfig {
                table: Some(row.to_vec()),
                ..Default::default()
            },
            sessions: measured_sessions(eps),
            ..Default::default()
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::config("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn arrival_spec(&self) -> Result<ArrivalSpec> {
        let a = &self.arrivals;
        let spec = match (&a.probabilities, &a.table) {
            (Some(p), _) => ArrivalSpec::new(a.granularity, p.clone()),
            (None, Some(t)) => ArrivalSpec::from_table(a.granularity, t),
            (None, None) => return Err(Error::config("arrivals", "either `table` or `probabilities` is required")),
        };
        spec.map_err(|e| Error::config("arrivals", e.to_string()))
    }

    pub fn queue_model(&self) -> Result<QueueModel> {
        let arrivals = self.arrival_spec()?;
        let q = &self.queue;
        QueueModel::new(
            q.capacity,
            q.max_block,
            q.max_arrival.unwrap_or(arrivals.max_arrival()),
            self.arrivals.granularity,
        )
        .map_err(|e| Error::config("queue", e.to_string()))
    }

    pub fn profiles(&self) -> Result<Vec<SessionProfile>> {
        self.sessions
            .iter()
            .enumerate()
            .map(|(j, s)| {
                SessionProfile::new(
                    s.t_p_ms * 1e-3,
                    s.bandwidth_mbps * 1e6,
                    s.ceiling,
                    s.sigma_ms * 1e-3,
                    s.erasure_pct / 100.0,
                )
                .map_err(|e| Error::config(format!("sessions[{j}]"), e.to_string()))
            })
            .collect()
    }

    pub fn reliability_params(&self) -> Result<ReliabilityParams> {
        let r = &self.reliability;
        let p = ReliabilityParams {
            decode_threshold: r.decode_threshold,
            security_cap: r.security_cap,
            redundancy: r.redundancy,
            packet_bits: r.packet_bytes * 8.0,
            deadline: r.deadline_ms * 1e-3,
        };
        p.validate(self.sessions.len()).map_err(|e| Error::config("reliability", e.to_string()))?;
        Ok(p)
    }

    pub fn weight_grid(&self) -> Result<WeightGrid> {
        let r = &self.reliability;
        WeightGrid::new(r.weight_step, r.security_cap, self.sessions.len(), r.full_grid)
            .map_err(|e| Error::config("reliability.weight_step", e.to_string()))
    }

    pub fn bandwidth_limits(&self) -> Result<Vec<Option<f64>>> {
        match &self.thresholds.bandwidth_limit_mbps {
            None => Ok(vec![None; self.sessions.len()]),
            Some(v) if v.len() != self.sessions.len() => Err(Error::config(
                "thresholds.bandwidth_limit_mbps",
                format!("{} limits for {} sessions", v.len(), self.sessions.len()),
            )),
            Some(v) => v
                .iter()
                .enumerate()
                .map(|(j, &l)| match l {
                    l if l.is_infinite() && l > 0.0 => Ok(None),
                    l if l > 0.0 => Ok(Some(l * 1e6)),
                    _ => Err(Error::config(format!("thresholds.bandwidth_limit_mbps[{j}]"), "must be positive")),
                })
                .collect(),
        }
    }

    pub fn reliability_ceiling(&self) -> Result<f64> {
        Ok(reliability_ceiling(&self.profiles()?))
    }

    /// The LP instance of this scenario.
    pub fn instance(&self) -> Result<CmdpInstance> {
        let catalog = ActionCatalog::from_grid(self.queue_model()?, &self.weight_grid()?).map_err(|e| match e {
            Error::Infeasible(m) => Error::Infeasible(m),
            e => Error::config("queue", e.to_string()),
        })?;
        CmdpInstance::new(self.arrival_spec()?, catalog, &self.profiles()?, &self.reliability_params()?)
    }

    pub fn degree_distribution(&self, intermediates: usize) -> Result<DegreeDistribution> {
        let c = &self.codec;
        match &c.distribution {
            Some(p) => DegreeDistribution::new(p.clone()).map_err(|e| Error::config("codec.distribution", e.to_string())),
            None => DegreeDistribution::robust_soliton(intermediates, c.soliton_c, c.soliton_delta)
                .map_err(|e| Error::config("codec", e.to_string())),
        }
    }

    /// Codec parameters for a generation of `g` packets.
    pub fn codec_params(&self, g: usize, seed: u64) -> Result<CodecParams> {
        let m = g * self.codec.expansion;
        let p = CodecParams::new(g, m, self.degree_distribution(m)?, seed).map_err(|e| Error::config("codec", e.to_string()))?;
        Ok(p.with_feedback_window(self.codec.feedback_window))
    }

    /// Cross-field checks, reported with the offending field path.
    pub fn validate(&self) -> Result<()> {
        if self.sessions.is_empty() {
            return Err(Error::config("sessions", "at least one session is required"));
        }
        let arrivals = self.arrival_spec()?;
        let model = self.queue_model()?;
        if arrivals.max_arrival() > model.max_arrival {
            return Err(Error::config(
                "queue.max_arrival",
                format!("arrivals reach {} packets but max_arrival is {}", arrivals.max_arrival(), model.max_arrival),
            ));
        }
        self.profiles()?;
        self.reliability_params()?;
        self.weight_grid()?;
        self.bandwidth_limits()?;
        let t = &self.thresholds;
        if !(0.0..=1.0).contains(&t.r_th) {
            return Err(Error::config("thresholds.r_th", "must lie in [0, 1]"));
        }
        if let Some((i, r)) = t.r_sweep.iter().enumerate().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
            return Err(Error::config(format!("thresholds.r_sweep[{i}]"), format!("{r} outside [0, 1]")));
        }
        if t.delay_deadline_slots < 0.0 {
            return Err(Error::config("thresholds.delay_deadline_slots", "must be nonnegative"));
        }
        if self.sim.slots == 0 {
            return Err(Error::config("sim.slots", "must be at least 1"));
        }
        if self.codec.expansion == 0 {
            return Err(Error::config("codec.expansion", "must be at least 1"));
        }
        if let Some(top) = &self.topology {
            if top.session_count() != self.sessions.len() {
                return Err(Error::config(
                    "topology.sessions",
                    format!("{} topology sessions for {} PDU sessions", top.session_count(), self.sessions.len()),
                ));
            }
        }
        Ok(())
    }
}

/// Reads a topology file: a TOML document with a `sessions` array holding
/// one array of node compromise probabilities per session.
pub fn load_topology(path: &std::path::Path) -> Result<Topology> {
    let where_ = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(&where_, e.to_string()))?;
    toml::from_str(&text).map_err(|e| Error::config(&where_, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            let cfg = ScenarioConfig::preset(p).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.name, p);
        }
        assert!(ScenarioConfig::preset("e99").is_err());
    }

    #[test]
    fn empty_file_is_e45() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(cfg, ScenarioConfig::preset("e45").unwrap());
        assert!((cfg.arrival_spec().unwrap().mean() - 45.0).abs() < 1e-12);
        assert!((cfg.reliability_ceiling().unwrap() - 0.9996).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::preset("eps-a").unwrap();
        cfg.topology = Some(Topology::uniform(&[2, 1, 3], &[0.1, 0.2, 0.3]).unwrap());
        cfg.thresholds.bandwidth_limit_mbps = Some(vec![f64::INFINITY, 50.0, 80.0]);
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.bandwidth_limits().unwrap(), vec![None, Some(50e6), Some(80e6)]);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = "[[sessions]]\nt_p_ms = 1\nbandwidth_mbps = 10\nceiling = 1.5\n";
        match ScenarioConfig::from_toml(bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "sessions[0]"),
            other => panic!("{other:?}"),
        }
        match ScenarioConfig::from_toml("[queue]\ncapacity = 50\n") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "queue"),
            other => panic!("{other:?}"),
        }
        match ScenarioConfig::from_toml("[thresholds]\nr_sweep = [0.9, 1.2]\n") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "thresholds.r_sweep[1]"),
            other => panic!("{other:?}"),
        }
        match ScenarioConfig::from_toml("[queue]\ncolour = 3\n") {
            Err(Error::Config { message, .. }) => assert!(message.contains("colour")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preset_instance_builds() {
        let inst = ScenarioConfig::preset("e45").unwrap().instance().unwrap();
        assert_eq!(inst.catalog.state_count(), 13);
        assert_eq!(inst.catalog.weights.len(), 2);
        assert!(inst.reliability.iter().all(|&f| (0.0..=1.0).contains(&f)));
    }

    #[test]
    fn topology_file_round_trips() {
        let dir = std::env::temp_dir().join(format!("cmt-topology-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.toml");
        std::fs::write(&good, "sessions = [[0.1, 0.2], [0.3]]\n").unwrap();
        let t = load_topology(&good).unwrap();
        assert_eq!(t.node_count(), 3);
        let bad = dir.join("bad.toml");
        std::fs::write(&bad, "sessions = [[1.5]]\n").unwrap();
        assert!(matches!(load_topology(&bad), Err(Error::Config { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
