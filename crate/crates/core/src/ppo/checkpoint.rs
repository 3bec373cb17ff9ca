//! JSON checkpoints of a trainer.
//!
//! Floats of the network and optimizer are stored as their IEEE-754 bit
//! patterns, so a load reproduces the parameters bit for bit.

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::PpoConfig;
use super::dist::HeadLayout;
use super::net::{Dense, Mlp};
use super::policy::PolicyNet;
use super::train::PpoTrainer;
use crate::env::{ActionSpaceKind, EnvSnapshot, TransponderEnv};
use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::trace::RunTrace;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBits {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<u32>,
    pub b: Vec<u32>,
}

fn bits(xs: &[f32]) -> Vec<u32> {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn unbits(xs: &[u32]) -> Vec<f32> {
    xs.iter().map(|&x| f32::from_bits(x)).collect()
}

fn mlp_to_bits(m: &Mlp<f32>) -> Vec<LayerBits> {
    m.layers
        .iter()
        .map(|l| LayerBits {
            inputs: l.w.nrows(),
            outputs: l.w.ncols(),
            w: bits(l.w.as_slice().expect("standard layout")),
            b: bits(l.b.as_slice().expect("standard layout")),
        })
        .collect()
}

fn mlp_from_bits(layers: &[LayerBits]) -> Result<Mlp<f32>> {
    let layers = layers
        .iter()
        .map(|l| {
            if l.w.len() != l.inputs * l.outputs || l.b.len() != l.outputs {
                return Err(Error::Checkpoint(format!("layer {}x{} has the wrong number of values", l.inputs, l.outputs)));
            }
            Ok(Dense {
                w: Array2::from_shape_vec((l.inputs, l.outputs), unbits(&l.w)).expect("shape checked"),
                b: Array1::from(unbits(&l.b)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if layers.is_empty() || layers.windows(2).any(|w| w[0].w.ncols() != w[1].w.nrows()) {
        return Err(Error::Checkpoint("layer sizes do not chain".into()));
    }
    Ok(Mlp { layers })
}

/// Network parameters only; enough for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBits {
    pub layout: HeadLayout,
    pub actor: Vec<LayerBits>,
    pub critic: Vec<LayerBits>,
}

impl PolicyBits {
    pub fn from_net(net: &PolicyNet<f32>) -> Self {
        Self { layout: net.layout.clone(), actor: mlp_to_bits(&net.actor), critic: mlp_to_bits(&net.critic) }
    }

    pub fn to_net(&self) -> Result<PolicyNet<f32>> {
        let net = PolicyNet { layout: self.layout.clone(), actor: mlp_from_bits(&self.actor)?, critic: mlp_from_bits(&self.critic)? };
        if net.actor.output_dim() != net.layout.output_dim() || net.critic.output_dim() != 1 {
            return Err(Error::Checkpoint("network outputs do not match the head layout".into()));
        }
        if net.actor.input_dim() != net.critic.input_dim() {
            return Err(Error::Checkpoint("actor and critic disagree on the observation size".into()));
        }
        Ok(net)
    }
}

/// Full trainer state: parameters, optimizer, generators, environments and
/// the trace so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub space: ActionSpaceKind,
    pub config: PpoConfig,
    pub profile: Profile,
    pub policy: PolicyBits,
    pub adam_t: u64,
    pub adam_m: Vec<Vec<u32>>,
    pub adam_v: Vec<Vec<u32>>,
    pub rng: ChaCha8Rng,
    pub envs: Vec<EnvSnapshot>,
    pub env_steps: u64,
    pub policy_version: u64,
    pub trace: RunTrace,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format {} (expected {CHECKPOINT_FORMAT})", c.format)));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn net(&self) -> Result<PolicyNet<f32>> {
        self.policy.to_net()
    }
}

impl PpoTrainer {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            space: self.space,
            config: self.config.clone(),
            profile: self.profile.as_ref().clone(),
            policy: PolicyBits::from_net(&self.net),
            adam_t: self.adam.t,
            adam_m: self.adam.m.iter().map(|m| bits(m)).collect(),
            adam_v: self.adam.v.iter().map(|v| bits(v)).collect(),
            rng: self.rng.clone(),
            envs: self.envs.iter().map(TransponderEnv::snapshot).collect(),
            env_steps: self.env_steps,
            policy_version: self.policy_version,
            trace: self.trace.clone(),
        }
    }

    /// Rebuilds a trainer that continues exactly where the checkpoint left
    /// off.
    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        c.config.validate()?;
        c.profile.validate()?;
        let net = c.net()?;
        if net.layout != HeadLayout::for_space(c.space) {
            return Err(Error::Checkpoint(format!("policy heads do not match {}", c.space)));
        }
        let shapes: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
        let adam_shapes_ok = |xs: &[Vec<u32>]| xs.len() == shapes.len() && xs.iter().zip(&shapes).all(|(x, &n)| x.len() == n);
        if !adam_shapes_ok(&c.adam_m) || !adam_shapes_ok(&c.adam_v) {
            return Err(Error::Checkpoint("optimizer state does not match the network".into()));
        }
        let mut adam = Adam::new(&shapes);
        adam.t = c.adam_t;
        adam.m = c.adam_m.iter().map(|m| unbits(m)).collect();
        adam.v = c.adam_v.iter().map(|v| unbits(v)).collect();
        if c.envs.len() != c.config.num_envs {
            return Err(Error::Checkpoint("environment count does not match num_envs".into()));
        }
        let profile = Arc::new(c.profile.clone());
        let envs = c
            .envs
            .iter()
            .map(|snap| {
                let mut env = TransponderEnv::new(profile.clone(), c.space)?;
                env.restore(snap.clone());
                Ok(env)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PpoTrainer {
            profile,
            space: c.space,
            config: c.config.clone(),
            net,
            adam,
            envs,
            rng: c.rng.clone(),
            env_steps: c.env_steps,
            policy_version: c.policy_version,
            trace: c.trace.clone(),
        })
    }
}
