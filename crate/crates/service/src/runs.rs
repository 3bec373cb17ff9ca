//! Run registry: creation, worker execution and append-only recordings.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use transponder_core::ppo::{inference, Checkpoint, InferenceMode, PpoConfig, PpoTrainer};
use transponder_core::random::{run_random_observed, RandomParams};
use transponder_core::sa::{sa_run_observed, SaParams};
use transponder_core::{ActionSpaceKind, EnvState, Profile, TransponderEnv};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Sa,
    Random,
    PpoTrain,
    PpoInfer,
}

impl std::str::FromStr for RunKind {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, ApiError> {
        match s {
            "sa" => Ok(RunKind::Sa),
            "random" => Ok(RunKind::Random),
            "ppo-train" => Ok(RunKind::PpoTrain),
            "ppo-infer" => Ok(RunKind::PpoInfer),
            other => Err(ApiError::BadRequest(format!(
                "unknown run kind '{other}' (expected sa, random, ppo-train or ppo-infer)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl RunStatus {
    pub fn is_finished(self) -> bool {
        matches!(self, RunStatus::Done | RunStatus::Failed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomRunConfig {
    pub space: ActionSpaceKind,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for RandomRunConfig {
    fn default() -> Self {
        Self { space: ActionSpaceKind::Space1, episodes: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub space: ActionSpaceKind,
    pub ppo: PpoConfig,
    /// Continue a stored checkpoint instead of starting fresh. `ppo` is then
    /// ignored except for `total_steps`, which extends the budget.
    pub resume_from: Option<String>,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self { space: ActionSpaceKind::Space1, ppo: PpoConfig::default(), resume_from: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub episodes: usize,
    pub seed: u64,
    pub mode: InferenceMode,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self { episodes: 10, seed: 0, mode: InferenceMode::Deterministic }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferRunConfig {
    pub checkpoint: String,
    #[serde(flatten)]
    pub infer: InferConfig,
}

/// Validated run request.
#[derive(Debug, Clone)]
pub enum RunConfig {
    Sa(SaParams),
    Random(RandomRunConfig),
    PpoTrain(TrainRunConfig),
    PpoInfer(InferRunConfig),
}

impl RunConfig {
    pub fn parse(kind: RunKind, config: serde_json::Value) -> Result<Self, ApiError> {
        let config = if config.is_null() { serde_json::Value::Object(Default::default()) } else { config };
        let bad = |e: serde_json::Error| ApiError::BadRequest(format!("invalid {kind:?} config: {e}"));
        let parsed = match kind {
            RunKind::Sa => RunConfig::Sa(serde_json::from_value(config).map_err(bad)?),
            RunKind::Random => RunConfig::Random(serde_json::from_value(config).map_err(bad)?),
            RunKind::PpoTrain => RunConfig::PpoTrain(serde_json::from_value(config).map_err(bad)?),
            RunKind::PpoInfer => RunConfig::PpoInfer(serde_json::from_value(config).map_err(bad)?),
        };
        parsed.validate()?;
        Ok(parsed)
    }

    fn validate(&self) -> Result<(), ApiError> {
        let msg = |e: transponder_core::Error| ApiError::BadRequest(e.to_string());
        match self {
            RunConfig::Sa(p) => p.validate().map_err(msg),
            RunConfig::Random(c) if c.episodes == 0 => Err(ApiError::BadRequest("episodes must be positive".into())),
            RunConfig::Random(_) => Ok(()),
            RunConfig::PpoTrain(c) if c.resume_from.is_some() => Ok(()),
            RunConfig::PpoTrain(c) => c.ppo.validate().map_err(msg),
            RunConfig::PpoInfer(c) if c.infer.episodes == 0 => Err(ApiError::BadRequest("episodes must be positive".into())),
            RunConfig::PpoInfer(_) => Ok(()),
        }
    }

    pub fn kind(&self) -> RunKind {
        match self {
            RunConfig::Sa(_) => RunKind::Sa,
            RunConfig::Random(_) => RunKind::Random,
            RunConfig::PpoTrain(_) => RunKind::PpoTrain,
            RunConfig::PpoInfer(_) => RunKind::PpoInfer,
        }
    }
}

/// One recorded trace point with the configuration it refers to.
#[derive(Debug, Clone)]
pub struct Point {
    pub step: u64,
    pub reward: f64,
    pub state: Arc<EnvState>,
}

#[derive(Debug)]
struct Progress {
    status: RunStatus,
    progress: f64,
    error: Option<String>,
    checkpoint: Option<String>,
}

/// A run and everything it has recorded so far.
#[derive(Debug)]
pub struct Run {
    pub id: String,
    pub kind: RunKind,
    /// Profile snapshot taken at creation.
    pub profile: Arc<Profile>,
    points: RwLock<Vec<Point>>,
    progress: Mutex<Progress>,
    /// Bumped on every append and status change.
    changed: watch::Sender<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHandle {
    pub id: String,
    pub kind: RunKind,
    pub status: RunStatus,
    pub progress: f64,
    pub points: usize,
    pub last_step: Option<u64>,
    pub last_reward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Id of the checkpoint a finished training run stored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

impl Run {
    fn new(id: String, kind: RunKind, profile: Arc<Profile>) -> Self {
        Self {
            id,
            kind,
            profile,
            points: RwLock::new(Vec::new()),
            progress: Mutex::new(Progress { status: RunStatus::Pending, progress: 0.0, error: None, checkpoint: None }),
            changed: watch::channel(0).0,
        }
    }

    pub fn handle(&self) -> RunHandle {
        let p = self.progress.lock().expect("progress lock");
        let points = self.points.read().expect("points lock");
        RunHandle {
            id: self.id.clone(),
            kind: self.kind,
            status: p.status,
            progress: p.progress,
            points: points.len(),
            last_step: points.last().map(|pt| pt.step),
            last_reward: points.last().map(|pt| pt.reward),
            error: p.error.clone(),
            checkpoint: p.checkpoint.clone(),
        }
    }

    pub fn status(&self) -> RunStatus {
        self.progress.lock().expect("progress lock").status
    }

    /// Latest point at or before `step`, or the last point when `step` is
    /// `None`. Steps past the end of the recording are not found.
    pub fn point_at(&self, step: Option<u64>) -> Option<Point> {
        let points = self.points.read().expect("points lock");
        match step {
            None => points.last().cloned(),
            Some(k) if points.last().is_some_and(|p| k > p.step) => None,
            Some(k) => {
                let n = points.partition_point(|p| p.step <= k);
                n.checked_sub(1).map(|i| points[i].clone())
            }
        }
    }

    /// Points with a step greater than `after`, in order.
    pub fn points_after(&self, after: Option<u64>, limit: usize) -> Vec<Point> {
        let points = self.points.read().expect("points lock");
        let start = after.map_or(0, |a| points.partition_point(|p| p.step <= a));
        points[start..].iter().take(limit).cloned().collect()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.changed.subscribe()
    }

    fn notify(&self) {
        self.changed.send_modify(|v| *v += 1);
    }

    fn record(&self, step: u64, reward: f64, state: &EnvState) {
        {
            let mut points = self.points.write().expect("points lock");
            if points.last().is_some_and(|p| p.step >= step) {
                return;
            }
            let state = match points.last() {
                Some(p) if *p.state == *state => p.state.clone(),
                _ => Arc::new(state.clone()),
            };
            points.push(Point { step, reward, state });
        }
        self.notify();
    }

    fn set_progress(&self, fraction: f64) {
        let mut p = self.progress.lock().expect("progress lock");
        p.progress = fraction.clamp(0.0, 1.0);
    }

    fn transition(&self, status: RunStatus, error: Option<String>) {
        {
            let mut p = self.progress.lock().expect("progress lock");
            if status <= p.status || p.status.is_finished() {
                return;
            }
            p.status = status;
            if status == RunStatus::Done {
                p.progress = 1.0;
            }
            p.error = error;
        }
        self.notify();
    }
}

/// Shared service state.
#[derive(Debug)]
pub struct Registry {
    profile: RwLock<Profile>,
    runs: RwLock<HashMap<String, Arc<Run>>>,
    checkpoints: RwLock<HashMap<String, Arc<Checkpoint>>>,
    checkpoint_dir: Option<PathBuf>,
    next_id: AtomicU64,
}

impl Registry {
    pub fn new(profile: Profile) -> Self {
        Self {
            profile: RwLock::new(profile),
            runs: RwLock::new(HashMap::new()),
            checkpoints: RwLock::new(HashMap::new()),
            checkpoint_dir: None,
            next_id: AtomicU64::new(1),
        }
    }

    /// Loads every `<id>.json` checkpoint in `dir` and stores finished
    /// training runs there.
    pub fn with_checkpoint_dir(mut self, dir: PathBuf) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        let mut loaded = HashMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let id = path.file_stem().expect("has a stem").to_string_lossy().into_owned();
                let c = Checkpoint::load(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
                loaded.insert(id, Arc::new(c));
            }
        }
        self.checkpoints = RwLock::new(loaded);
        self.checkpoint_dir = Some(dir);
        Ok(self)
    }

    pub fn profile(&self) -> Profile {
        self.profile.read().expect("profile lock").clone()
    }

    pub fn set_weights(&self, weights: transponder_core::MetricWeights) -> Result<(), ApiError> {
        weights.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
        self.profile.write().expect("profile lock").weights = weights;
        Ok(())
    }

    pub fn run(&self, id: &str) -> Result<Arc<Run>, ApiError> {
        self.runs.read().expect("runs lock").get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("run '{id}'")))
    }

    /// Every run in creation order.
    pub fn handles(&self) -> Vec<RunHandle> {
        let runs = self.runs.read().expect("runs lock");
        let mut runs: Vec<&Arc<Run>> = runs.values().collect();
        runs.sort_by_key(|r| r.id.trim_start_matches("run-").parse::<u64>().unwrap_or(u64::MAX));
        runs.into_iter().map(|r| r.handle()).collect()
    }

    pub fn checkpoint(&self, id: &str) -> Result<Arc<Checkpoint>, ApiError> {
        self.checkpoints
            .read()
            .expect("checkpoints lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("checkpoint '{id}'")))
    }

    pub fn checkpoint_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.checkpoints.read().expect("checkpoints lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn store_checkpoint(&self, id: &str, c: Checkpoint) -> anyhow::Result<()> {
        if let Some(dir) = &self.checkpoint_dir {
            c.save(dir.join(format!("{id}.json")))?;
        }
        self.checkpoints.write().expect("checkpoints lock").insert(id.to_string(), Arc::new(c));
        Ok(())
    }

    /// Profile an inference over `c` runs on: the checkpoint's physics with
    /// the current weights.
    pub fn inference_profile(&self, c: &Checkpoint) -> Profile {
        c.profile.clone().with_weights(self.profile().weights)
    }

    /// Registers a pending run and starts its worker.
    pub fn create(self: &Arc<Self>, config: RunConfig) -> Result<RunHandle, ApiError> {
        let profile = match &config {
            RunConfig::PpoInfer(c) => self.inference_profile(&*self.checkpoint(&c.checkpoint)?),
            RunConfig::PpoTrain(TrainRunConfig { resume_from: Some(id), .. }) => self.checkpoint(id)?.profile.clone(),
            _ => self.profile(),
        };
        let id = format!("run-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let run = Arc::new(Run::new(id.clone(), config.kind(), Arc::new(profile)));
        let handle = run.handle();
        self.runs.write().expect("runs lock").insert(id, run.clone());
        let registry = self.clone();
        tokio::task::spawn_blocking(move || {
            run.transition(RunStatus::Running, None);
            match execute(&registry, &run, config) {
                Ok(()) => run.transition(RunStatus::Done, None),
                Err(e) => run.transition(RunStatus::Failed, Some(format!("{e:#}"))),
            }
        });
        Ok(handle)
    }
}

fn execute(registry: &Registry, run: &Run, config: RunConfig) -> anyhow::Result<()> {
    let profile = run.profile.clone();
    match config {
        RunConfig::Sa(params) => {
            let mut env = TransponderEnv::new(profile, ActionSpaceKind::Space1)?;
            let total = params.max_steps as f64;
            sa_run_observed(&mut env, &params, |step, reward, state| {
                run.record(step, reward, state);
                if step % 256 == 0 {
                    run.set_progress(step as f64 / total);
                }
            })?;
        }
        RunConfig::Random(c) => {
            let params = RandomParams { space: c.space, episodes: c.episodes, seed: c.seed };
            let ep_len = profile.episode_length(c.space) as f64;
            let total = c.episodes as f64 * ep_len;
            run_random_observed(profile, &params, |step, reward, state| {
                run.record(step, reward, state);
                run.set_progress(step as f64 / total);
            })?;
        }
        RunConfig::PpoTrain(c) => {
            let mut trainer = match &c.resume_from {
                Some(id) => {
                    let mut ckpt = (*registry.checkpoint(id)?).clone();
                    ckpt.config.total_steps = ckpt.config.total_steps.max(c.ppo.total_steps);
                    PpoTrainer::from_checkpoint(&ckpt)?
                }
                None => PpoTrainer::new(profile, c.space, c.ppo)?,
            };
            let total = trainer.config().total_steps as f64;
            trainer.run(|report| {
                if let Some(state) = &report.batch.last_final_state {
                    run.record(report.env_steps, report.batch.mean_final_reward, state);
                }
                run.set_progress(report.env_steps as f64 / total);
            })?;
            registry.store_checkpoint(&run.id, trainer.checkpoint())?;
            run.progress.lock().expect("progress lock").checkpoint = Some(run.id.clone());
        }
        RunConfig::PpoInfer(c) => {
            let ckpt = registry.checkpoint(&c.checkpoint)?;
            let net = ckpt.net()?;
            let result = inference(&net, profile.clone(), ckpt.space, c.infer.episodes, c.infer.seed, c.infer.mode)?;
            let ep_len = profile.episode_length(ckpt.space) as u64;
            for (i, (state, reward)) in result.final_states.iter().zip(&result.final_rewards).enumerate() {
                run.record((i as u64 + 1) * ep_len, *reward, state);
            }
        }
    }
    Ok(())
}
