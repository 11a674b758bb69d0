use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use ojrs_core::bench;
use ojrs_core::config::ExperimentConfig;
use ojrs_core::drl::write_epochs;
use ojrs_core::neural::Network;
use ojrs_core::sae::{Sae, SaeCheckpoint};

#[derive(Parser)]
#[command(
    name = "ojrs",
    version,
    about = "Online joint offloading and resource scheduling for multi-server edge computing"
)]
struct Cli {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the scenario and write it back as a config with explicit positions.
    GenScenario,
    /// Offline SAE stage only.
    TrainSae,
    /// Full training run; writes epochs.csv, policy.json and sae.json.
    Train {
        /// Also write policy_<epoch>.json every this many epochs.
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Fill the decision_ms and asa_ms columns.
        #[arg(long)]
        timing: bool,
        /// Overrides drl.t_drl.
        #[arg(long)]
        epochs: Option<u64>,
    },
    /// Compare the trained policy with ASA-only, Greedy and Random.
    Bench {
        /// Trained policy checkpoint; each replication trains its own when omitted.
        #[arg(long, requires = "sae")]
        policy: Option<PathBuf>,
        /// SAE checkpoint paired with --policy.
        #[arg(long)]
        sae: Option<PathBuf>,
        /// Skip wall-time measurement for a reproducible report.
        #[arg(long)]
        no_timing: bool,
    },
    /// Weight-shift experiment over several server counts.
    Dynamic,
    /// Print the structure of a policy or SAE checkpoint.
    InspectCheckpoint { path: PathBuf },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.bench.replications = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::GenScenario => {
            let scenario = cfg.scenario.build(cfg.seed)?;
            cfg.scenario = cfg.scenario.pinned(&scenario);
            let path = out_file(out, "scenario.toml")?;
            fs::write(&path, cfg.to_toml()?)?;
            println!(
                "{} UEs, {} servers -> {}",
                scenario.n_ues(),
                scenario.n_mecs(),
                path.display()
            );
        }
        Command::TrainSae => {
            let scenario = cfg.scenario.build(cfg.seed)?;
            let sae = bench::pretrain_sae(&cfg, &scenario, cfg.seed)?;
            let test =
                bench::sae_test_channels(&scenario, cfg.seed, cfg.bench.sae_test_channels.max(1));
            let path = out_file(out, "sae.json")?;
            sae.to_checkpoint().save(&path)?;
            println!(
                "accuracy {:.4}  compression ratio {:.2}  memory {} -> {}",
                sae.accuracy(&test)?,
                sae.compression_ratio(),
                sae.memory.len(),
                path.display()
            );
        }
        Command::Train {
            checkpoint_every,
            timing,
            epochs,
        } => {
            cfg.drl.record_timing |= *timing;
            if let Some(t) = epochs {
                cfg.drl.t_drl = *t;
            }
            fs::create_dir_all(out)?;
            let mut agent = bench::build_agent(&cfg, cfg.seed)?;
            let every = checkpoint_every.unwrap_or(0);
            let logs = agent.run(|agent, o| {
                if every > 0 && o.log.epoch % every == 0 {
                    agent
                        .policy
                        .save(&out.join(format!("policy_{}.json", o.log.epoch)))?;
                }
                if o.log.epoch % 500 == 0 {
                    info!(
                        "epoch {} reward {:.5} t_sa {}",
                        o.log.epoch, o.log.reward, o.log.t_sa
                    );
                }
                Ok(())
            })?;
            write_epochs(&out.join("epochs.csv"), &logs)?;
            agent.policy.save(&out.join("policy.json"))?;
            agent.sae.to_checkpoint().save(&out.join("sae.json"))?;
            let tail = &logs[logs.len().saturating_sub(500)..];
            if !tail.is_empty() {
                let mean = tail.iter().map(|l| l.reward).sum::<f64>() / tail.len() as f64;
                println!(
                    "{} epochs, mean reward over the last {} = {mean:.5}",
                    logs.len(),
                    tail.len()
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Bench {
            policy,
            sae,
            no_timing,
        } => {
            if *no_timing {
                cfg.bench.timing = false;
            }
            let trained = match (policy, sae) {
                (Some(p), Some(s)) => Some((
                    Sae::from_checkpoint(SaeCheckpoint::load(s)?)?,
                    Network::load(p)?,
                )),
                (None, None) => None,
                _ => bail!("--policy and --sae must be given together"),
            };
            let report = bench::run_benchmark(&cfg, trained)?;
            let path = out_file(out, "bench.csv")?;
            report.write_csv(&path)?;
            print!("{}", report.table());
            println!("wrote {}", path.display());
        }
        Command::Dynamic => {
            let rows = bench::run_dynamic(&cfg)?;
            let path = out_file(out, "table3.csv")?;
            bench::write_table3(&path, &rows)?;
            print!("{}", bench::table3(&rows));
            println!("wrote {}", path.display());
        }
        Command::InspectCheckpoint { path } => inspect(path)?,
    }
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let describe = |net: &Network| {
        for (l, layer) in net.layers.iter().enumerate() {
            println!(
                "  layer {l}: {} -> {} {:?}",
                layer.spec.in_dim, layer.spec.out_dim, layer.spec.activation
            );
        }
        println!(
            "  parameters {}  ||theta||^2 {:.6}",
            net.parameter_count(),
            net.l2_norm_sq()
        );
    };
    if let Ok(net) = Network::from_json(&text) {
        println!("policy network, seed {}, epoch {}", net.seed, net.epoch);
        describe(&net);
        return Ok(());
    }
    let ckpt = SaeCheckpoint::load(path).context("neither a network nor an SAE checkpoint")?;
    let sae = Sae::from_checkpoint(ckpt.clone())?;
    println!(
        "SAE checkpoint, {} UEs x {} servers, code {} (compression ratio {:.2}), version {}",
        ckpt.n_ues,
        ckpt.n_mecs,
        sae.code_dim(),
        sae.compression_ratio(),
        ckpt.version
    );
    match &ckpt.network {
        Some(net) => describe(net),
        None => println!("  identity encoder"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    run(cli)
}
