use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use embal_core::agents::{EpisodeContext, ExplorerKind, PerceptionKind};
use embal_core::harness::{
    ablation_suite, benchmark, paired_t_test, parse_flags, pretrain_experiment, run_episode,
    sample_start, summarize, validation_episodes, write_results_csv, AgentSpec, BenchmarkOptions,
    EpisodeConfig, EpisodeRecord, MethodSummary, PretrainOptions, Regime, ResultRow, Split,
    WorldCache,
};
use embal_core::par::Execution;
use embal_core::rl::ppo::{ppo_train, write_train_log, TrainOptions};
use embal_core::rl::{read_policy, write_policy, ActionSet, PolicyModel};
use embal_core::world::{generate_world, read_world, write_world, GenParams, GridWorld};

mod plot;

#[derive(Parser)]
#[command(
    name = "embal",
    version,
    about = "Embodied visual active learning testbed"
)]
struct Cli {
    /// Run every batch of episodes on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world and write it as text.
    GenWorld {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one episode and write its record as JSON.
    Run {
        /// Explorer id, `explorer+perception`, or `rl` / `rl+explorer` (needs --policy).
        #[arg(long)]
        agent: String,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// World seed, or a path written by gen-world.
        #[arg(long)]
        world: String,
        #[arg(long, default_value_t = 0)]
        start_seed: u64,
        #[arg(long, default_value = "steps:256")]
        regime: Regime,
        #[arg(long)]
        record: PathBuf,
    },
    /// Run agents on every episode of a split.
    Benchmark {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "random,rotate,bounce,frontier,spacefill"
        )]
        agents: Vec<String>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value = "steps:256")]
        regime: Regime,
        /// Use only the first N worlds of the split.
        #[arg(long)]
        worlds: Option<usize>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-episode JSON records.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Train a policy with PPO on the training split.
    Train {
        #[arg(long, default_value_t = 12_000)]
        episodes: usize,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "full")]
        actions: ActionSet,
        /// Base explorer for the perception-only action set.
        #[arg(long)]
        base: Option<ExplorerKind>,
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train and benchmark ablated policies.
    Ablate {
        /// One comma separated flag set per use; `full` is the unablated model.
        #[arg(long = "flags", required = true)]
        flags: Vec<String>,
        #[arg(long, default_value_t = 12_000)]
        episodes: usize,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offline pre-training versus per-episode active learning.
    Pretrain {
        #[arg(long, default_value_t = 2000)]
        views: usize,
        #[arg(long, default_value_t = 20_000)]
        iterations: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "spacefill")]
        agent: String,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        worlds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot mean mIoU curves from a directory of episode records.
    Plot {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Horizontal axis: steps or annotations.
        #[arg(long, default_value = "steps")]
        x: plot::Axis,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::GenWorld { seed, out } => {
            let world = generate_world(seed, &GenParams::default())?;
            write_world(&world, BufWriter::new(create(&out)?))?;
            println!(
                "world {seed}: {} free cells, {} classes",
                world.free_count(),
                world.class_count
            );
        }
        Command::Run {
            agent,
            policy,
            world,
            start_seed,
            regime,
            record,
        } => {
            let world = load_world(&world)?;
            let spec = agent_spec(&agent, policy.as_deref())?;
            let cfg = EpisodeConfig::new(world.seed, start_seed, regime);
            let ctx = EpisodeContext {
                world: &world,
                start: sample_start(&world, start_seed),
                radius: cfg.radius,
            };
            let mut a = spec.build(&ctx)?;
            let rec = run_episode(&world, &cfg, &spec.name(), a.as_mut(), None)?;
            create(&record)?.write_all(rec.to_json()?.as_bytes())?;
            println!(
                "{}: miou {:.4} acc {:.4} annotate {} collect {} steps {}",
                rec.method,
                rec.final_miou,
                rec.final_accuracy,
                rec.n_annotate,
                rec.n_collect,
                rec.n_steps
            );
        }
        Command::Benchmark {
            agents,
            policy,
            split,
            regime,
            worlds,
            starts,
            out,
            records,
        } => {
            let specs = agents
                .iter()
                .map(|a| agent_spec(a, policy.as_deref()))
                .collect::<Result<Vec<_>>>()?;
            let mut opts = BenchmarkOptions::new(split, regime);
            opts.world_limit = worlds;
            opts.exec = exec;
            if let Some(s) = starts {
                opts.starts_per_world = s;
            }
            let cache = WorldCache::build(&opts.world_seeds(), &GenParams::default(), exec)?;
            let recs = benchmark(&specs, &opts, &cache)?;
            if let Some(dir) = records {
                write_records(&dir, &recs)?;
            }
            let rows: Vec<ResultRow> = recs.iter().map(ResultRow::from_record).collect();
            write_results_csv(&rows, create(&out)?)?;
            print_summary(&rows);
        }
        Command::Train {
            episodes,
            workers,
            seed,
            actions,
            base,
            out,
            log,
        } => {
            let mut opts = TrainOptions::new(episodes, seed);
            opts.workers = workers;
            opts.action_set = actions;
            opts.base = base;
            opts.exec = exec;
            let (train, val) = train_val_worlds(&mut opts)?;
            let outcome = ppo_train(&opts, &train, &val)?;
            write_policy(&outcome.best, BufWriter::new(create(&out)?))?;
            if let Some(path) = log {
                write_train_log(&outcome.log, create(&path)?)?;
            }
            match outcome.best_val_miou {
                Some(v) => println!("best validation mIoU {v:.4}"),
                None => println!("no validation episodes"),
            }
        }
        Command::Ablate {
            flags,
            episodes,
            workers,
            seed,
            out,
        } => {
            let variants = flags
                .iter()
                .map(|f| parse_flags(f))
                .collect::<embal_core::Result<Vec<_>>>()?;
            let mut opts = TrainOptions::new(episodes, seed);
            opts.workers = workers;
            opts.exec = exec;
            let (train, val) = train_val_worlds(&mut opts)?;
            let mut eval = BenchmarkOptions::new(Split::Test, Regime::Steps(256));
            eval.exec = exec;
            let test = WorldCache::build(&eval.world_seeds(), &GenParams::default(), exec)?;
            let results = ablation_suite(&variants, &opts, &eval, &train, &val, &test)?;
            let rows: Vec<ResultRow> = results
                .iter()
                .flat_map(|r| r.records.iter().map(ResultRow::from_record))
                .collect();
            write_results_csv(&rows, create(&out)?)?;
            print_summary(&rows);
        }
        Command::Pretrain {
            views,
            iterations,
            seed,
            agent,
            policy,
            worlds,
            out,
        } => {
            let mut eval = BenchmarkOptions::new(Split::Test, Regime::Steps(256));
            eval.world_limit = worlds;
            eval.exec = exec;
            let opts = PretrainOptions {
                n_views: views,
                iterations,
                seed,
                eval,
                agent: agent_spec(&agent, policy.as_deref())?,
            };
            let train =
                WorldCache::build(&Split::Train.world_seeds(), &GenParams::default(), exec)?;
            let test = WorldCache::build(&opts.eval.world_seeds(), &GenParams::default(), exec)?;
            let report = pretrain_experiment(&opts, &train, &test)?;
            println!("{:<20} {:>7}", "setting", "mIoU");
            println!(
                "{:<20} {:>7.4}",
                "frozen (train views)", report.frozen_train_miou
            );
            println!("{:<20} {:>7.4}", "frozen", report.frozen_miou);
            println!(
                "{:<20} {:>7.4}",
                "scratch + active", report.scratch_active_miou
            );
            println!(
                "{:<20} {:>7.4}",
                "pretrain + active", report.pretrained_active_miou
            );
            if let Some(path) = out {
                write_results_csv(&report.rows, create(&path)?)?;
            }
        }
        Command::Plot { curves, out, x } => {
            let records = read_records(&curves)?;
            if records.is_empty() {
                bail!("no episode records in {}", curves.display());
            }
            plot::plot_curves(&records, x, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn load_world(arg: &str) -> Result<GridWorld> {
    if let Ok(seed) = arg.parse::<u64>() {
        return Ok(generate_world(seed, &GenParams::default())?);
    }
    let f = File::open(arg).with_context(|| format!("opening world {arg}"))?;
    Ok(read_world(BufReader::new(f))?)
}

fn load_policy(path: &Path) -> Result<PolicyModel> {
    let f = File::open(path).with_context(|| format!("opening policy {}", path.display()))?;
    Ok(read_policy(BufReader::new(f))?)
}

fn agent_spec(id: &str, policy: Option<&Path>) -> Result<AgentSpec> {
    if id == "rl" || id.starts_with("rl+") {
        let Some(path) = policy else {
            bail!("agent `rl` needs --policy")
        };
        let model = load_policy(path)?;
        // perception-only policies follow a base explorer, spacefill unless named
        let base = match id.strip_prefix("rl+") {
            Some(e) => Some(e.parse()?),
            None if model.action_set == ActionSet::PerceptionOnly => {
                Some(ExplorerKind::SpaceFiller)
            }
            None => None,
        };
        return Ok(AgentSpec::Learnt {
            name: id.into(),
            policy: Arc::new(model),
            base,
        });
    }
    Ok(match id.split_once('+') {
        Some((e, p)) => AgentSpec::Baseline {
            explorer: e.parse()?,
            perception: p.parse::<PerceptionKind>()?,
        },
        None => AgentSpec::baseline(id.parse()?),
    })
}

fn train_val_worlds(opts: &mut TrainOptions) -> Result<(WorldCache, WorldCache)> {
    let params = GenParams::default();
    let train = WorldCache::build(&Split::Train.world_seeds(), &params, opts.exec)?;
    let val_opts = validation_episodes(Regime::Steps(opts.steps));
    let val = WorldCache::build(&val_opts.world_seeds(), &params, opts.exec)?;
    opts.val_episodes = val_opts.episodes();
    Ok((train, val))
}

fn write_records(dir: &Path, records: &[EpisodeRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in records {
        let name = format!(
            "{}-w{}-s{}.json",
            r.method.replace('+', "_"),
            r.config.world_seed,
            r.config.start_seed
        );
        fs::write(dir.join(name), r.to_json()?)?;
    }
    Ok(())
}

fn read_records(dir: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            EpisodeRecord::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

fn print_summary(rows: &[ResultRow]) {
    let summary = summarize(rows);
    println!(
        "{:<24} {:>5} {:>7} {:>7} {:>7} {:>7}",
        "method", "n", "mIoU", "acc", "#ann", "#coll"
    );
    for MethodSummary {
        method,
        episodes,
        miou,
        acc,
        n_ann,
        n_coll,
        ..
    } in &summary
    {
        println!("{method:<24} {episodes:>5} {miou:>7.4} {acc:>7.4} {n_ann:>7.1} {n_coll:>7.1}");
    }
    // Paired comparison of neighbouring methods, in table order.
    for pair in summary.windows(2) {
        let per = |m: &str| {
            rows.iter()
                .filter(|r| r.method == m)
                .map(|r| r.miou)
                .collect::<Vec<_>>()
        };
        let (a, b) = (per(&pair[1].method), per(&pair[0].method));
        if a.len() == b.len() && a.len() > 1 {
            if let Some(t) = paired_t_test(&a, &b) {
                println!(
                    "{} > {}: mean diff {:+.4}, one-sided p {:.4}",
                    pair[1].method, pair[0].method, t.mean_diff, t.p_value
                );
            }
        }
    }
}
