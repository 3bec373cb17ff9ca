//! Experiment orchestration: multi-seed comparisons, learning-rate grid
//! search, smoothing and result tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{ActionSpaceKind, TransponderEnv};
use crate::error::{config_err, Error, Result};
use crate::ppo::{self, InferenceMode, PpoConfig};
use crate::profile::Profile;
use crate::random::{run_random, RandomParams};
use crate::sa::{sa_run, SaParams};
use crate::trace::{config_hash, RunTrace};

/// Mean and population standard deviation; `(0, 0)` for an empty input.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trailing moving average; the first `window - 1` outputs average over the
/// points available so far.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(config_err("smoothing window must be at least 1"));
    }
    Ok((0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let w = &series[lo..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect())
}

pub const DEFAULT_SMOOTHING_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Random,
    Sa,
    Ppo,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Random => "random",
            Optimizer::Sa => "sa",
            Optimizer::Ppo => "ppo",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Optimizer::Random),
            "sa" => Ok(Optimizer::Sa),
            "ppo" => Ok(Optimizer::Ppo),
            other => Err(config_err(format!("unknown optimizer '{other}' (expected random, sa or ppo)"))),
        }
    }
}

/// What to run and on which seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub action_space: ActionSpaceKind,
    /// Environment-step budget of every optimizer.
    pub total_steps: u64,
    /// Overrides the profile's episode length for `action_space`.
    pub episode_length: Option<u32>,
    pub seeds: Vec<u64>,
    pub optimizers: Vec<Optimizer>,
    /// PPO uses the first rate in comparisons; grid search uses all.
    pub learning_rates: Vec<f64>,
    /// Episodes per seed when evaluating a trained policy.
    pub inference_episodes: usize,
    pub inference_mode: InferenceMode,
    pub sa: SaParams,
    pub ppo: PpoConfig,
    /// Worker threads for independent runs.
    pub threads: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::experiment1()
    }
}

impl ExperimentSpec {
    /// Space 1, 10-step episodes, seeds 0 to 4.
    pub fn experiment1() -> Self {
        Self {
            action_space: ActionSpaceKind::Space1,
            total_steps: 200_000,
            episode_length: None,
            seeds: (0..5).collect(),
            optimizers: vec![Optimizer::Random, Optimizer::Sa, Optimizer::Ppo],
            learning_rates: vec![1e-5],
            inference_episodes: 100,
            inference_mode: InferenceMode::Deterministic,
            sa: SaParams::default(),
            ppo: PpoConfig::default(),
            threads: 1,
        }
    }

    /// Space 2, 100-step episodes, seeds 0 to 2.
    pub fn experiment2() -> Self {
        Self { action_space: ActionSpaceKind::Space2, seeds: vec![0, 1, 2], ..Self::experiment1() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(config_err("total_steps must be positive"));
        }
        if self.seeds.is_empty() && !self.optimizers.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        if self.optimizers.contains(&Optimizer::Ppo) && self.learning_rates.is_empty() {
            return Err(config_err("PPO runs need a learning rate"));
        }
        if self.inference_episodes == 0 {
            return Err(config_err("inference_episodes must be positive"));
        }
        if self.threads == 0 {
            return Err(config_err("threads must be at least 1"));
        }
        if self.episode_length == Some(0) {
            return Err(config_err("episode_length must be positive"));
        }
        Ok(())
    }

    /// Profile with the spec's episode-length override applied.
    pub fn apply_to(&self, profile: &Profile) -> Profile {
        let mut p = profile.clone();
        if let Some(len) = self.episode_length {
            match self.action_space {
                ActionSpaceKind::Space1 => p.episodes.space1 = len,
                ActionSpaceKind::Space2 => p.episodes.space2 = len,
            }
        }
        p
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| config_err(format!("cannot start worker pool: {e}")))
    }
}

/// One optimizer run on one seed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub optimizer: Optimizer,
    pub environment: ActionSpaceKind,
    pub seed: u64,
    /// Random: mean final-step reward; SA: best reward; PPO: inference mean.
    pub final_reward: f64,
    pub trace: RunTrace,
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub algorithm: Optimizer,
    pub environment: ActionSpaceKind,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub table: Vec<TableRow>,
    pub runs: Vec<RunOutcome>,
}

impl ComparisonResult {
    pub fn row(&self, algorithm: Optimizer) -> Option<&TableRow> {
        self.table.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Runs one optimizer on one seed under `spec`.
pub fn run_one(profile: &Arc<Profile>, spec: &ExperimentSpec, optimizer: Optimizer, seed: u64) -> Result<RunOutcome> {
    let space = spec.action_space;
    match optimizer {
        Optimizer::Random => {
            let episodes = (spec.total_steps / profile.episode_length(space) as u64).max(1) as usize;
            let r = run_random(profile.clone(), &RandomParams { space, episodes, seed })?;
            Ok(RunOutcome { optimizer, environment: space, seed, final_reward: r.mean, trace: r.trace })
        }
        Optimizer::Sa => {
            let params = SaParams { seed, max_steps: spec.total_steps, ..spec.sa.clone() };
            let mut env = TransponderEnv::new(profile.clone(), ActionSpaceKind::Space1)?;
            let r = sa_run(&mut env, &params)?;
            Ok(RunOutcome {
                optimizer,
                environment: ActionSpaceKind::Space1,
                seed,
                final_reward: r.best_reward,
                trace: r.trace,
            })
        }
        Optimizer::Ppo => {
            let lr = *spec.learning_rates.first().ok_or_else(|| config_err("PPO runs need a learning rate"))?;
            run_ppo(profile, spec, lr, seed)
        }
    }
}

fn run_ppo(profile: &Arc<Profile>, spec: &ExperimentSpec, learning_rate: f64, seed: u64) -> Result<RunOutcome> {
    let space = spec.action_space;
    let config = PpoConfig { learning_rate, seed, total_steps: spec.total_steps, ..spec.ppo.clone() };
    let (net, trace) = ppo::train(profile.clone(), space, config)?;
    let inf = ppo::inference(&net, profile.clone(), space, spec.inference_episodes, seed, spec.inference_mode)?;
    Ok(RunOutcome { optimizer: Optimizer::Ppo, environment: space, seed, final_reward: inf.mean, trace })
}

fn trace_file(dir: &Path, optimizer: Optimizer, seed: u64) -> PathBuf {
    dir.join("traces").join(format!("{optimizer}_seed{seed}.csv"))
}

/// Every optimizer on every seed, aggregated into a mean/std table.
///
/// With `out_dir`, each trace is written as soon as its run finishes, so a
/// failing run still leaves the others on disk; the summary is written only
/// when every run succeeds.
pub fn run_comparison(profile: &Profile, spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ComparisonResult> {
    spec.validate()?;
    let profile = Arc::new(spec.apply_to(profile));
    profile.validate()?;
    let mut optimizers = spec.optimizers.clone();
    optimizers.dedup();
    let jobs: Vec<(Optimizer, u64)> =
        optimizers.iter().flat_map(|&o| spec.seeds.iter().map(move |&s| (o, s))).collect();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("traces"))?;
    }
    let results: Vec<Result<RunOutcome>> = spec.pool()?.install(|| {
        jobs.par_iter()
            .map(|&(o, s)| {
                let run = run_one(&profile, spec, o, s)?;
                if let Some(dir) = out_dir {
                    run.trace.save_csv(trace_file(dir, o, s))?;
                }
                Ok(run)
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let table = optimizers
        .iter()
        .map(|&o| {
            let finals: Vec<f64> = runs.iter().filter(|r| r.optimizer == o).map(|r| r.final_reward).collect();
            let environment = runs.iter().find(|r| r.optimizer == o).map_or(spec.action_space, |r| r.environment);
            let (mean, std) = mean_std(&finals);
            TableRow { algorithm: o, environment, mean, std, seeds: finals.len() }
        })
        .collect();
    let result = ComparisonResult { table, runs };
    if let Some(dir) = out_dir {
        write_summary(dir, &profile, spec, &result)?;
    }
    Ok(result)
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config_hash: String,
    spec: &'a ExperimentSpec,
    results: &'a [TableRow],
    runs: Vec<RunSummary>,
}

#[derive(Serialize)]
struct RunSummary {
    algorithm: Optimizer,
    seed: u64,
    final_reward: f64,
}

fn write_summary(dir: &Path, profile: &Profile, spec: &ExperimentSpec, result: &ComparisonResult) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["algorithm", "environment", "mean", "std", "seeds"])?;
    for r in &result.table {
        w.write_record([r.algorithm.to_string(), r.environment.to_string(), r.mean.to_string(), r.std.to_string(), r.seeds.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("runs.csv"))?;
    w.write_record(["algorithm", "environment", "seed", "final_reward"])?;
    for r in &result.runs {
        w.write_record([r.optimizer.to_string(), r.environment.to_string(), r.seed.to_string(), r.final_reward.to_string()])?;
    }
    w.flush()?;

    let summary = SummaryFile {
        config_hash: config_hash(&(spec, profile)),
        spec,
        results: &result.table,
        runs: result
            .runs
            .iter()
            .map(|r| RunSummary { algorithm: r.optimizer, seed: r.seed, final_reward: r.final_reward })
            .collect(),
    };
    let text = toml::to_string(&summary).map_err(|e| config_err(format!("cannot encode summary: {e}")))?;
    std::fs::write(dir.join("summary.toml"), text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub learning_rate: f64,
    pub mean: f64,
    pub std: f64,
    pub finals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Rate with the highest mean; ties go to the smaller rate.
    pub winner: f64,
    pub traces: Vec<(f64, RunTrace)>,
}

/// Picks the winning row: highest mean, then smallest rate.
pub fn grid_winner(rows: &[GridRow]) -> Option<f64> {
    rows.iter()
        .max_by(|a, b| a.mean.total_cmp(&b.mean).then(b.learning_rate.total_cmp(&a.learning_rate)))
        .map(|r| r.learning_rate)
}

/// Trains one PPO per `(rate, seed)` and ranks the rates by mean final
/// inference reward.
pub fn grid_search(profile: &Profile, spec: &ExperimentSpec, learning_rates: &[f64], seeds: &[u64]) -> Result<GridResult> {
    if learning_rates.is_empty() || seeds.is_empty() {
        return Err(config_err("grid search needs at least one learning rate and one seed"));
    }
    spec.validate()?;
    let profile = Arc::new(spec.apply_to(profile));
    let jobs: Vec<(f64, u64)> = learning_rates.iter().flat_map(|&lr| seeds.iter().map(move |&s| (lr, s))).collect();
    let runs = spec.pool()?.install(|| {
        jobs.par_iter().map(|&(lr, s)| run_ppo(&profile, spec, lr, s).map(|r| (lr, r))).collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<GridRow> = learning_rates
        .iter()
        .map(|&lr| {
            let finals: Vec<f64> = runs.iter().filter(|(r, _)| *r == lr).map(|(_, o)| o.final_reward).collect();
            let (mean, std) = mean_std(&finals);
            GridRow { learning_rate: lr, mean, std, finals }
        })
        .collect();
    let winner = grid_winner(&rows).expect("rows are non-empty");
    Ok(GridResult { rows, winner, traces: runs.into_iter().map(|(lr, o)| (lr, o.trace)).collect() })
}

/// Writes `grid.csv` (learning_rate, mean, std, seeds) to `dir`.
pub fn write_grid(dir: &Path, result: &GridResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("grid.csv"))?;
    w.write_record(["learning_rate", "mean", "std", "seeds", "winner"])?;
    for r in &result.rows {
        w.write_record([
            r.learning_rate.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.finals.len().to_string(),
            (r.learning_rate == result.winner).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
