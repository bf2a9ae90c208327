//! `cmtlab`: runs the delay-reliability tradeoff, policy, simulation, codec
//! and threat analyses from a scenario file or preset.

mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use cmt_core::cmdp::{solve_policy, tradeoff_curve, write_tradeoff_csv, Policy, SolvedPolicy};
use cmt_core::codec::{decode_curve, write_curve_csv};
use cmt_core::scenario::{load_topology, CodecMode, ScenarioConfig, PRESETS};
use cmt_core::sim::{self, SimConfig};
use cmt_core::threat::{attacked_count_distribution, conditional_subset_probability, intrusion_probability, subset_attack_probability, AttackerSet};
use cmt_core::Execution;

use output::Artifacts;

#[derive(Parser, Debug)]
#[command(name = "cmtlab", version, about = "Delay-reliability analysis of fountain-coded multipath transfer")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario TOML file.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named scenario preset.
    #[arg(long, global = true, value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Overrides the scenario seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Directory for CSV/JSON artifacts; nothing is written without it.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use every weight vector on the grid instead of the saturated ones.
    #[arg(long, global = true)]
    full_grid: bool,
    /// Simulation codec mode.
    #[arg(long, global = true, value_name = "analytic|full-codec")]
    mode: Option<CodecMode>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal mean delay over a sweep of reliability targets.
    Tradeoff {
        /// Comma-separated targets; defaults to `thresholds.r_sweep`.
        #[arg(long = "r-th", value_delimiter = ',', num_args = 0..)]
        r_th: Option<Vec<f64>>,
    },
    /// Solves one target and reports the policy and its threshold structure.
    Policy {
        #[arg(long = "r-th")]
        r_th: Option<f64>,
    },
    /// Replays a policy in the slot simulator.
    Simulate {
        /// Output of `cmtlab policy`; without it the LP is solved at `thresholds.r_th`.
        #[arg(long, value_name = "PATH")]
        policy: Option<PathBuf>,
        #[arg(long = "r-th", conflicts_with = "policy")]
        r_th: Option<f64>,
        #[arg(long)]
        slots: Option<u64>,
        /// Put an eavesdropper on every node of this session (full-codec mode).
        #[arg(long, value_name = "SESSION")]
        attack_session: Option<usize>,
    },
    /// Decode probability and recovered fraction versus packets received.
    CodecCurve {
        #[arg(long, default_value_t = 100)]
        g: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Largest received count; defaults to `2 g`.
        #[arg(long)]
        max_received: Option<usize>,
    },
    /// Intrusion and attacked-count probabilities of a topology.
    Threat {
        /// Topology TOML file; defaults to the scenario's `topology`.
        #[arg(long, value_name = "PATH")]
        topology: Option<PathBuf>,
        /// Sessions for a subset query, comma-separated.
        #[arg(long, value_delimiter = ',', requires = "attacked")]
        subset: Option<Vec<usize>>,
        /// Number of compromised nodes for the subset query.
        #[arg(long, requires = "subset")]
        attacked: Option<usize>,
    },
}

/// Ends the run with exit code 2 after the artifacts were written.
#[derive(Debug)]
struct Infeasible(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Infeasible>().is_some() {
        return 2;
    }
    match e.downcast_ref::<cmt_core::Error>() {
        Some(cmt_core::Error::Infeasible(_) | cmt_core::Error::Unbounded) => 2,
        _ => 1,
    }
}

fn resolve(common: &Common) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(name)) => ScenarioConfig::preset(name)?,
        (None, None) => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.full_grid {
        cfg.reliability.full_grid = true;
    }
    if let Some(mode) = common.mode {
        cfg.sim.mode = mode;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve(&cli.common)?;
    let out = Artifacts::new(cli.common.out.clone(), &cfg)?;
    match cli.command {
        Command::Tradeoff { r_th } => tradeoff(&cfg, &out, r_th),
        Command::Policy { r_th } => policy(&cfg, &out, r_th.unwrap_or(cfg.thresholds.r_th)),
        Command::Simulate {
            policy,
            r_th,
            slots,
            attack_session,
        } => simulate(&cfg, &out, policy, r_th, slots, attack_session),
        Command::CodecCurve { g, trials, max_received } => codec_curve(&cfg, &out, g, trials, max_received),
        Command::Threat { topology, subset, attacked } => threat(&cfg, &out, topology, subset, attacked),
    }
}

fn tradeoff(cfg: &ScenarioConfig, out: &Artifacts, r_th: Option<Vec<f64>>) -> anyhow::Result<()> {
    let sweep = r_th.unwrap_or_else(|| cfg.thresholds.r_sweep.clone());
    if sweep.is_empty() {
        bail!("the reliability sweep is empty");
    }
    if let Some(r) = sweep.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        bail!("reliability target {r} outside [0, 1]");
    }
    let inst = cfg.instance()?;
    let points = tradeoff_curve(&inst, &sweep, &cfg.bandwidth_limits()?, Execution::Parallel)?;
    out.csv("tradeoff.csv", |w| write_tradeoff_csv(w, inst.sessions(), &points))?;

    println!("scenario {} (mean arrival {} packets/slot)", cfg.name, inst.arrivals.mean());
    println!("{:>10} {:>12} {:>12}", "r_th", "mean_delay", "reliability");
    for p in &points {
        match (p.mean_delay, p.reliability) {
            (Some(d), Some(r)) => println!("{:>10} {:>12.6} {:>12.6}", p.r_th, d, r),
            _ => println!("{:>10} {:>12} {:>12}", p.r_th, "infeasible", "-"),
        }
    }
    let infeasible = points.iter().filter(|p| !p.feasible).count();
    if infeasible > 0 {
        return Err(Infeasible(format!("{infeasible} of {} sweep points are infeasible", points.len())).into());
    }
    Ok(())
}

fn policy(cfg: &ScenarioConfig, out: &Artifacts, r_th: f64) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&r_th) {
        bail!("reliability target {r_th} outside [0, 1]");
    }
    let inst = cfg.instance()?;
    let solved = solve_policy(&inst, r_th, &cfg.bandwidth_limits()?)?;
    out.json("policy.json", &output::PolicyFile { solved: &solved })?;

    let t = &solved.threshold;
    println!("r_th {r_th}: mean delay {:.6} slots, reliability {:.6}", solved.objective, solved.metrics.reliability);
    match (t.threshold, t.mix_probability) {
        (Some(q), Some(p)) => println!("threshold at q = {q}, P(g_max) = {p:.4}"),
        _ => println!("deterministic policy"),
    }
    println!(
        "randomized states: {:?}; threshold structured: {}",
        t.randomized,
        t.is_threshold_structured()
    );
    for s in t.states.iter().filter(|s| s.reachable) {
        println!("  q = {:>4}: g in {:?}", s.q, s.block_lengths);
    }
    Ok(())
}

#[derive(Deserialize)]
struct PolicyInput {
    solved: SolvedPolicy,
}

fn simulate(
    cfg: &ScenarioConfig,
    out: &Artifacts,
    policy_path: Option<PathBuf>,
    r_th: Option<f64>,
    slots: Option<u64>,
    attack_session: Option<usize>,
) -> anyhow::Result<()> {
    let inst = cfg.instance()?;
    let solved = match policy_path {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let input: PolicyInput = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if input.solved.policy.catalog != inst.catalog {
                return Err(cmt_core::Error::DimensionMismatch(format!(
                    "{} holds a policy over {} actions; the scenario has {}",
                    path.display(),
                    input.solved.policy.catalog.len(),
                    inst.catalog.len()
                ))
                .into());
            }
            input.solved
        }
        None => solve_policy(&inst, r_th.unwrap_or(cfg.thresholds.r_th), &cfg.bandwidth_limits()?)?,
    };
    let policy = Policy::new(inst.catalog.clone(), solved.policy.probs.clone())?;
    let mut sim_cfg = SimConfig::new(cfg.clone(), policy);
    if let Some(n) = slots {
        sim_cfg = sim_cfg.with_slots(n);
    }
    if let Some(j) = attack_session {
        let top = cfg.topology.as_ref().context("--attack-session needs a `topology` section in the scenario")?;
        if j >= top.session_count() {
            bail!("session {j} does not exist; the topology has {}", top.session_count());
        }
        sim_cfg = sim_cfg.with_attacker(AttackerSet::whole_session(j, top.session(j).len()));
    }
    let stats = sim::run(&sim_cfg)?;
    out.json(
        "simulate.json",
        &output::SimulateFile {
            slots: sim_cfg.slots,
            r_th: solved.r_th,
            lp_mean_delay: solved.objective,
            stats: &stats,
        },
    )?;
    out.csv("histogram.csv", |w| sim::write_histogram_csv(w, &stats))?;
    if !stats.series.is_empty() {
        out.csv("series.csv", |w| {
            writeln!(w, "slot,q")?;
            stats.series.iter().try_for_each(|s| writeln!(w, "{},{}", s.slot, s.q))
        })?;
    }

    let rel = (stats.mean_delay - solved.objective).abs() / solved.objective;
    println!("{} slots, mode {:?}, seed {}", stats.slots, sim_cfg.mode, sim_cfg.seed);
    println!("mean delay {:.6} slots (LP {:.6}, relative gap {:.4})", stats.mean_delay, solved.objective, rel);
    println!("mean queue {:.3} packets", stats.mean_queue);
    println!(
        "generations {}, decoded {} ({:.6}); slot reliability {:.6} (LP {:.6})",
        stats.generations, stats.decoded, stats.empirical_reliability, stats.slot_reliability, solved.metrics.reliability
    );
    println!("P(q / mean arrival >= {}) = {:.6}", stats.delay_deadline, stats.violation_prob);
    if let Some(m) = stats.max_leak_ratio {
        let breaches = stats.leaks.iter().filter(|l| !l.secure).count();
        println!("leak audit: max ratio {m:.4}, {breaches} of {} generations above the cap", stats.leaks.len());
    }
    Ok(())
}

fn codec_curve(cfg: &ScenarioConfig, out: &Artifacts, g: usize, trials: usize, max_received: Option<usize>) -> anyhow::Result<()> {
    if g == 0 || trials == 0 {
        bail!("--g and --trials must be positive");
    }
    let params = cfg.codec_params(g, cfg.seed)?;
    let max = max_received.unwrap_or(2 * g);
    let curve = decode_curve(&params, max, trials, Execution::Parallel)?;
    out.csv("codec_curve.csv", |w| write_curve_csv(w, &curve))?;

    let first = |p: f64| curve.iter().find(|c| c.decode_prob >= p).map(|c| c.received);
    println!("g = {g}, {} intermediate symbols, {trials} trials", params.m);
    for p in [0.5, 0.9, 0.99] {
        match first(p) {
            Some(k) => println!("decode probability >= {p} from {k} packets ({:+.1}% overhead)", 100.0 * (k as f64 / g as f64 - 1.0)),
            None => println!("decode probability never reaches {p} within {max} packets"),
        }
    }
    Ok(())
}

fn threat(cfg: &ScenarioConfig, out: &Artifacts, path: Option<PathBuf>, subset: Option<Vec<usize>>, attacked: Option<usize>) -> anyhow::Result<()> {
    let topology = match path {
        Some(p) => load_topology(&p)?,
        None => cfg
            .topology
            .clone()
            .context("no topology: pass --topology or add a `topology` section to the scenario")?,
    };
    let intrusion = intrusion_probability(&topology);
    let counts = attacked_count_distribution(&topology);
    let query = match (subset, attacked) {
        (Some(subset), Some(m)) => Some(output::SubsetQuery {
            probability: subset_attack_probability(&topology, &subset, m)?,
            conditional: conditional_subset_probability(&topology, &subset, m)?,
            subset,
            attacked: m,
        }),
        _ => None,
    };
    out.json(
        "threat.json",
        &output::ThreatFile {
            topology: &topology,
            intrusion_probability: intrusion,
            attacked_count_distribution: &counts,
            subset_query: query.as_ref(),
        },
    )?;

    println!("{} sessions, {} nodes", topology.session_count(), topology.node_count());
    println!("P(every session intruded) = {intrusion:.6e}");
    for (m, p) in counts.iter().enumerate() {
        println!("  P({m} nodes compromised) = {p:.6e}");
    }
    if let Some(q) = &query {
        println!(
            "P({} nodes compromised, all in sessions {:?}) = {:.6e}; conditional on {} compromised: {:.6e}",
            q.attacked, q.subset, q.probability, q.attacked, q.conditional
        );
    }
    Ok(())
}
