use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeRecord};
use super::reference::sample_start;
use super::{AgentSpec, EpisodeConfig, Regime};
use crate::agents::EpisodeContext;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::world::{generate_world, GenParams, GridWorld};

/// Disjoint generator-seed ranges for the three world splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn id(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn world_count(self) -> usize {
        match self {
            Split::Train => 61,
            Split::Val => 11,
            Split::Test => 18,
        }
    }

    fn seed_base(self) -> u64 {
        match self {
            Split::Train => 10_000,
            Split::Val => 20_000,
            Split::Test => 30_000,
        }
    }

    pub fn world_seeds(self) -> Vec<u64> {
        (0..self.world_count() as u64)
            .map(|i| self.seed_base() + i)
            .collect()
    }

    pub fn default_starts(self) -> usize {
        match self {
            Split::Train => 1,
            Split::Val => 3,
            Split::Test => 4,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .find(|x| x.id() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "split",
                value: s.to_string(),
            })
    }
}

/// Generated worlds keyed by seed.
#[derive(Clone, Debug, Default)]
pub struct WorldCache {
    worlds: BTreeMap<u64, Arc<GridWorld>>,
}

impl WorldCache {
    pub fn build(seeds: &[u64], params: &GenParams, exec: Execution) -> Result<Self> {
        let built = exec.map(seeds, |&s| {
            generate_world(s, params).map(|w| (s, Arc::new(w)))
        });
        Ok(Self {
            worlds: built.into_iter().collect::<Result<_>>()?,
        })
    }

    pub fn get(&self, seed: u64) -> Result<Arc<GridWorld>> {
        self.worlds
            .get(&seed)
            .cloned()
            .ok_or_else(|| Error::UnknownId {
                kind: "world",
                value: seed.to_string(),
            })
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.worlds.keys().copied().collect()
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkOptions {
    pub split: Split,
    pub starts_per_world: usize,
    /// Use only the first `n` worlds of the split.
    pub world_limit: Option<usize>,
    pub regime: Regime,
    pub exec: Execution,
    pub configure: fn(&mut EpisodeConfig),
}

impl BenchmarkOptions {
    pub fn new(split: Split, regime: Regime) -> Self {
        Self {
            split,
            starts_per_world: split.default_starts(),
            world_limit: None,
            regime,
            exec: Execution::default(),
            configure: |_| {},
        }
    }

    pub fn world_seeds(&self) -> Vec<u64> {
        let mut seeds = self.split.world_seeds();
        if let Some(n) = self.world_limit {
            seeds.truncate(n);
        }
        seeds
    }

    /// Every (world, start) pair, in a fixed order.
    pub fn episodes(&self) -> Vec<(u64, u64)> {
        self.world_seeds()
            .into_iter()
            .flat_map(|w| (0..self.starts_per_world as u64).map(move |s| (w, s)))
            .collect()
    }
}

/// Starts per validation world used to pick the best policy checkpoint.
pub const VALIDATION_STARTS: usize = 4;

/// Validation episodes for policy training: every validation world with
/// [`VALIDATION_STARTS`] starts.
pub fn validation_episodes(regime: Regime) -> BenchmarkOptions {
    BenchmarkOptions {
        starts_per_world: VALIDATION_STARTS,
        ..BenchmarkOptions::new(Split::Val, regime)
    }
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub world_seed: u64,
    pub start_seed: u64,
    pub miou: f64,
    pub acc: f64,
    pub n_ann: usize,
    pub n_coll: usize,
    pub n_steps: usize,
}

impl ResultRow {
    pub fn from_record(r: &EpisodeRecord) -> Self {
        Self {
            method: r.method.clone(),
            world_seed: r.config.world_seed,
            start_seed: r.config.start_seed,
            miou: r.final_miou,
            acc: r.final_accuracy,
            n_ann: r.n_annotate,
            n_coll: r.n_collect,
            n_steps: r.n_steps,
        }
    }
}

/// Runs every agent on every (world, start) pair of the split. All agents
/// see identical starts and reference views.
pub fn benchmark(
    specs: &[AgentSpec],
    opts: &BenchmarkOptions,
    worlds: &WorldCache,
) -> Result<Vec<EpisodeRecord>> {
    let jobs: Vec<(usize, u64, u64)> = (0..specs.len())
        .flat_map(|a| opts.episodes().into_iter().map(move |(w, s)| (a, w, s)))
        .collect();
    let results = opts.exec.map(&jobs, |&(a, w, s)| -> Result<EpisodeRecord> {
        let world = worlds.get(w)?;
        let mut cfg = EpisodeConfig::new(w, s, opts.regime);
        (opts.configure)(&mut cfg);
        let ctx = EpisodeContext {
            world: &world,
            start: sample_start(&world, s),
            radius: cfg.radius,
        };
        let spec = &specs[a];
        let mut agent = spec.build(&ctx)?;
        let record = run_episode(&world, &cfg, &spec.name(), agent.as_mut(), None)?;
        log::info!(
            "{} world {w} start {s}: miou {:.3} ann {} coll {}",
            record.method,
            record.final_miou,
            record.n_annotate,
            record.n_collect
        );
        Ok(record)
    });
    results.into_iter().collect()
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Per-method means, in order of first appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub episodes: usize,
    pub miou: f64,
    pub acc: f64,
    pub n_ann: f64,
    pub n_coll: f64,
    pub n_steps: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<MethodSummary> {
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
    }
    order
        .into_iter()
        .map(|m| {
            let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.method == m).collect();
            let n = sel.len() as f64;
            let mean = |f: &dyn Fn(&ResultRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
            MethodSummary {
                episodes: sel.len(),
                miou: mean(&|r| r.miou),
                acc: mean(&|r| r.acc),
                n_ann: mean(&|r| r.n_ann as f64),
                n_coll: mean(&|r| r.n_coll as f64),
                n_steps: mean(&|r| r.n_steps as f64),
                method: m,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_are_disjoint_and_sized() {
        let all: Vec<u64> = [Split::Train, Split::Val, Split::Test]
            .iter()
            .flat_map(|s| s.world_seeds())
            .collect();
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), all.len());
        assert_eq!(all.len(), 61 + 11 + 18);
        assert_eq!(
            BenchmarkOptions::new(Split::Test, Regime::Steps(256))
                .episodes()
                .len(),
            72
        );
        assert_eq!("val".parse::<Split>().unwrap(), Split::Val);
    }

    #[test]
    fn csv_round_trip_and_summary() {
        let rows = vec![
            ResultRow {
                method: "a".into(),
                world_seed: 1,
                start_seed: 0,
                miou: 0.5,
                acc: 0.7,
                n_ann: 3,
                n_coll: 1,
                n_steps: 256,
            },
            ResultRow {
                method: "b".into(),
                world_seed: 1,
                start_seed: 0,
                miou: 0.25,
                acc: 0.5,
                n_ann: 1,
                n_coll: 0,
                n_steps: 256,
            },
            ResultRow {
                method: "a".into(),
                world_seed: 2,
                start_seed: 0,
                miou: 0.25,
                acc: 0.5,
                n_ann: 5,
                n_coll: 2,
                n_steps: 256,
            },
        ];
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,world_seed,start_seed,miou,acc,n_ann,n_coll,n_steps\n"));
        assert_eq!(read_results_csv(&buf[..]).unwrap(), rows);
        let s = summarize(&rows);
        assert_eq!(s[0].method, "a");
        assert_eq!(s[0].episodes, 2);
        assert!((s[0].miou - 0.375).abs() < 1e-12);
        assert!((s[0].n_ann - 4.0).abs() < 1e-12);
    }
}
