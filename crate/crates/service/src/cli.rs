//! `transponder` command line.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use transponder_core::harness::{grid_search, run_comparison, write_grid, ExperimentSpec, Optimizer};
use transponder_core::ppo::{inference, Checkpoint, InferenceMode, PpoConfig, PpoTrainer};
use transponder_core::sa::{sa_run, SaParams};
use transponder_core::{ActionSpaceKind, Profile, TransponderEnv};

use crate::runs::Registry;
use crate::view::TransponderStateView;

#[derive(Debug, Parser)]
#[command(name = "transponder", version, about = "Transponder link-configuration optimizers")]
pub struct Cli {
    /// Environment profile (TOML); the bundled default when omitted.
    #[arg(long, global = true)]
    pub profile: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run optimizers over seeds and write the result table and traces.
    Compare(CompareArgs),
    /// Train PPO for each learning rate and seed and rank the rates.
    GridSearch(GridArgs),
    /// Train one PPO policy and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint without updating it.
    Infer(InferArgs),
    /// Run simulated annealing once.
    Sa(SaArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    /// Preset: 1 (space 1, seeds 0-4) or 2 (space 2, seeds 0-2).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub experiment: u8,
    /// Full experiment spec (TOML); replaces the preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub total_steps: Option<u64>,
    #[arg(long)]
    pub episode_length: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub inference_episodes: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

impl SpecArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None if self.experiment == 2 => ExperimentSpec::experiment2(),
            None => ExperimentSpec::experiment1(),
        };
        if let Some(n) = self.total_steps {
            spec.total_steps = n;
        }
        if self.episode_length.is_some() {
            spec.episode_length = self.episode_length;
        }
        if let Some(s) = &self.seeds {
            spec.seeds = s.clone();
        }
        if let Some(n) = self.inference_episodes {
            spec.inference_episodes = n;
        }
        if let Some(n) = self.threads {
            spec.threads = n;
        }
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Subset of random, sa, ppo.
    #[arg(long, value_delimiter = ',')]
    pub optimizers: Option<Vec<Optimizer>>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-4,1e-5")]
    pub learning_rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Deterministic,
    Stochastic,
}

impl From<Mode> for InferenceMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Deterministic => InferenceMode::Deterministic,
            Mode::Stochastic => InferenceMode::Stochastic,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Action space, 1 or 2.
    #[arg(long, default_value = "1")]
    pub space: ActionSpaceKind,
    /// PPO hyperparameters (TOML); defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub total_steps: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from this checkpoint instead of starting fresh.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value = "checkpoint.json")]
    pub checkpoint: PathBuf,
    /// Per-batch training trace.
    #[arg(long, default_value = "train_trace.csv")]
    pub trace: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Deterministic)]
    pub mode: Mode,
    /// Writes the result and the proposed configuration as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SaArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub steps_per_temp: Option<u64>,
    #[arg(long)]
    pub damping: Option<f64>,
    /// Trace with step, temp, current_reward and best_reward columns.
    #[arg(long, default_value = "sa_trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of `<id>.json` checkpoints; finished training runs are
    /// saved there.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
}

fn load_profile(path: Option<&Path>) -> Result<Profile> {
    match path {
        Some(p) => Profile::load(p).with_context(|| format!("loading profile {}", p.display())),
        None => Ok(Profile::default()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let profile = load_profile(cli.profile.as_deref())?;
    match cli.command {
        Command::Compare(a) => compare(&profile, a),
        Command::GridSearch(a) => grid(&profile, a),
        Command::Train(a) => train(profile, a),
        Command::Infer(a) => infer(profile, a, cli.profile.is_some()),
        Command::Sa(a) => sa(profile, a),
        Command::Serve(a) => serve(profile, a),
    }
}

fn compare(profile: &Profile, a: CompareArgs) -> Result<()> {
    let mut spec = a.spec.spec()?;
    if let Some(o) = a.optimizers {
        spec.optimizers = o;
    }
    if let Some(lr) = a.learning_rate {
        spec.learning_rates = vec![lr];
    }
    let result = run_comparison(profile, &spec, Some(&a.spec.out))?;
    println!("{:<10} {:<8} {:>8} {:>8} {:>5}", "algorithm", "env", "mean", "std", "seeds");
    for r in &result.table {
        println!("{:<10} {:<8} {:>8.4} {:>8.4} {:>5}", r.algorithm, r.environment, r.mean, r.std, r.seeds);
    }
    println!("wrote {}", a.spec.out.display());
    Ok(())
}

fn grid(profile: &Profile, a: GridArgs) -> Result<()> {
    let spec = a.spec.spec()?;
    let result = grid_search(profile, &spec, &a.learning_rates, &spec.seeds)?;
    write_grid(&a.spec.out, &result)?;
    for r in &result.rows {
        let mark = if r.learning_rate == result.winner { " *" } else { "" };
        println!("lr {:<8e} {:.4} +- {:.4}{mark}", r.learning_rate, r.mean, r.std);
    }
    println!("wrote {}", a.spec.out.join("grid.csv").display());
    Ok(())
}

fn train(profile: Profile, a: TrainArgs) -> Result<()> {
    let mut trainer = match &a.resume {
        Some(path) => {
            let mut c = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            if let Some(n) = a.total_steps {
                c.config.total_steps = n;
            }
            PpoTrainer::from_checkpoint(&c)?
        }
        None => {
            let mut config: PpoConfig = match &a.config {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => PpoConfig::default(),
            };
            if let Some(n) = a.total_steps {
                config.total_steps = n;
            }
            if let Some(lr) = a.learning_rate {
                config.learning_rate = lr;
            }
            if let Some(s) = a.seed {
                config.seed = s;
            }
            PpoTrainer::new(Arc::new(profile), a.space, config)?
        }
    };
    let quiet = a.quiet;
    trainer.run(|r| {
        if !quiet {
            println!(
                "step {:>8}  final {:.4}  entropy {:.3}  kl {:.2e}",
                r.env_steps, r.batch.mean_final_reward, r.loss.entropy, r.loss.approx_kl
            );
        }
    })?;
    trainer.checkpoint().save(&a.checkpoint)?;
    trainer.trace().save_csv(&a.trace)?;
    println!("wrote {} and {}", a.checkpoint.display(), a.trace.display());
    Ok(())
}

fn infer(profile: Profile, a: InferArgs, profile_given: bool) -> Result<()> {
    let c = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    // physics always come from the checkpoint; a given profile supplies the weights
    let profile = if profile_given { c.profile.clone().with_weights(profile.weights) } else { c.profile.clone() };
    let profile = Arc::new(profile);
    let r = inference(&c.net()?, profile.clone(), c.space, a.episodes, a.seed, a.mode.into())?;
    println!("{} episodes: {:.4} +- {:.4} (best {:.4})", a.episodes, r.mean, r.std, r.proposal_reward);
    let view = TransponderStateView::new(&r.proposal, &profile);
    for (i, l) in view.links.iter().enumerate() {
        println!(
            "link {i}: {:.4} - {:.4} MHz, {:.3} W, modfec {}, margin {}",
            l.interval.0 / 1e6,
            l.interval.1 / 1e6,
            l.eirp,
            l.modfec_index,
            if l.margin_ok { "ok" } else { "short" }
        );
    }
    if let Some(out) = a.out {
        let doc = serde_json::json!({
            "mean": r.mean,
            "std": r.std,
            "final_rewards": r.final_rewards,
            "proposal_reward": r.proposal_reward,
            "proposal": view,
        });
        std::fs::write(&out, serde_json::to_string_pretty(&doc)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn sa(profile: Profile, a: SaArgs) -> Result<()> {
    let d = SaParams::default();
    let params = SaParams {
        t_max: a.t_max.unwrap_or(d.t_max),
        t_min: a.t_min.unwrap_or(d.t_min),
        alpha: a.alpha.unwrap_or(d.alpha),
        steps_per_temp: a.steps_per_temp.unwrap_or(d.steps_per_temp),
        damping: a.damping.unwrap_or(d.damping),
        max_steps: a.max_steps.unwrap_or(d.max_steps),
        seed: a.seed.unwrap_or(d.seed),
    };
    let mut env = TransponderEnv::new(Arc::new(profile), ActionSpaceKind::Space1)?;
    let r = sa_run(&mut env, &params)?;
    r.trace.save_csv(&a.out)?;
    println!("best reward {:.4} after {} evaluations", r.best_reward, params.max_steps);
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Address from [`crate::BIND_ENV`] (an IP, or IP and port) with `port`
/// taking precedence over a port given there.
pub fn bind_address(env_value: Option<&str>, port: u16) -> Result<SocketAddr> {
    let raw = env_value.map(str::trim).filter(|v| !v.is_empty()).unwrap_or(crate::DEFAULT_BIND);
    if let Ok(addr) = raw.parse::<SocketAddr>() {
        return Ok(SocketAddr::new(addr.ip(), port));
    }
    match raw.trim_start_matches('[').trim_end_matches(']').parse::<IpAddr>() {
        Ok(ip) => Ok(SocketAddr::new(ip, port)),
        Err(_) => bail!("{} must be an IP address, optionally with a port (got '{raw}')", crate::BIND_ENV),
    }
}

fn serve(profile: Profile, a: ServeArgs) -> Result<()> {
    let addr = bind_address(std::env::var(crate::BIND_ENV).ok().as_deref(), a.port)?;
    let mut registry = Registry::new(profile);
    if let Some(dir) = a.checkpoints {
        registry = registry.with_checkpoint_dir(dir)?;
    }
    let app = crate::router(Arc::new(registry));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
