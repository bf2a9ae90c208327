//! Artifact files. Every CSV starts with `# config:` comment lines holding
//! the resolved scenario as TOML, and every JSON document carries the
//! resolved scenario and seed next to its result.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;

use cmt_core::cmdp::SolvedPolicy;
use cmt_core::scenario::ScenarioConfig;
use cmt_core::sim::SimStats;
use cmt_core::threat::Topology;

pub struct Artifacts {
    dir: Option<PathBuf>,
    config: ScenarioConfig,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    seed: u64,
    config: &'a ScenarioConfig,
    #[serde(flatten)]
    body: &'a T,
}

impl Artifacts {
    pub fn new(dir: Option<PathBuf>, config: &ScenarioConfig) -> anyhow::Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Artifacts {
            dir,
            config: config.clone(),
        })
    }

    fn create(&self, name: &str) -> anyhow::Result<Option<(PathBuf, BufWriter<File>)>> {
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Some((path, BufWriter::new(file))))
    }

    pub fn csv(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> anyhow::Result<()> {
        let Some((path, mut w)) = self.create(name)? else { return Ok(()) };
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "# config: seed = {}", self.config.seed)?;
            for line in self.config.to_toml().lines() {
                writeln!(w, "# config: {line}")?;
            }
            body(w)?;
            w.flush()
        };
        write(&mut w).with_context(|| format!("writing {}", path.display()))
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> anyhow::Result<()> {
        let Some((path, mut w)) = self.create(name)? else { return Ok(()) };
        let doc = Envelope {
            seed: self.config.seed,
            config: &self.config,
            body,
        };
        serde_json::to_writer_pretty(&mut w, &doc)
            .map_err(anyhow::Error::from)
            .and_then(|()| Ok(w.flush()?))
            .with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Serialize)]
pub struct PolicyFile<'a> {
    pub solved: &'a SolvedPolicy,
}

#[derive(Serialize)]
pub struct SimulateFile<'a> {
    pub slots: u64,
    pub r_th: f64,
    pub lp_mean_delay: f64,
    pub stats: &'a SimStats,
}

#[derive(Serialize)]
pub struct SubsetQuery {
    pub subset: Vec<usize>,
    pub attacked: usize,
    pub probability: f64,
    pub conditional: f64,
}

#[derive(Serialize)]
pub struct ThreatFile<'a> {
    pub topology: &'a Topology,
    pub intrusion_probability: f64,
    pub attacked_count_distribution: &'a [f64],
    pub subset_query: Option<&'a SubsetQuery>,
}
