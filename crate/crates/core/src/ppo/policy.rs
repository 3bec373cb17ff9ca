//! Actor-critic network and the clipped surrogate loss.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBatch;
use super::dist::{HeadLayout, HybridDist};
use super::net::{cast, layer_tensors, uncast, Dense, Mlp, Scalar};
use crate::error::{Error, Result};

/// Initial standard deviation of the continuous heads. A sigmoid of
/// `N(0, 1.8^2)` is close to uniform on `[0, 1]`.
pub const INIT_STD: f64 = 1.8;
const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const ACTOR_OUTPUT_GAIN: f64 = 0.01;
const CRITIC_OUTPUT_GAIN: f64 = 1.0;

/// Separate actor and critic towers over the same observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet<F> {
    pub layout: HeadLayout,
    pub actor: Mlp<F>,
    pub critic: Mlp<F>,
}

/// Gradients with the same structure as a [`PolicyNet`].
#[derive(Debug, Clone)]
pub struct PolicyGrads<F> {
    pub actor: Vec<Dense<F>>,
    pub critic: Vec<Dense<F>>,
}

impl<F: Scalar> PolicyGrads<F> {
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut t = layer_tensors(&self.actor);
        t.extend(layer_tensors(&self.critic));
        t
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|&g| uncast(g).powi(2)).sum::<f64>().sqrt()
    }
}

/// Actor rows and critic values for a batch of observations.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    /// `n x layout.output_dim()`.
    pub actor: Array2<f64>,
    pub values: Array1<f64>,
}

impl PolicyOutput {
    pub fn dist<'a>(&'a self, i: usize, layout: &'a HeadLayout) -> HybridDist<'a> {
        HybridDist::new(self.actor.row(i).to_slice().expect("standard layout"), layout)
    }
}

/// Coefficients of the PPO objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub clip_epsilon: f64,
    pub vf_coeff: f64,
    pub entropy_coeff: f64,
}

/// Scalar components of one loss evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
    /// Mean of `log_prob_old - log_prob_new`.
    pub approx_kl: f64,
}

impl<F: Scalar> PolicyNet<F> {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], layout: HeadLayout, rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(layout.output_dim());
        sizes.push(1);
        let mut actor = Mlp::orthogonal(&actor_sizes, HIDDEN_GAIN, ACTOR_OUTPUT_GAIN, rng);
        let critic = Mlp::orthogonal(&sizes, HIDDEN_GAIN, CRITIC_OUTPUT_GAIN, rng);
        let out = actor.layers.last_mut().expect("non-empty");
        for j in 0..layout.continuous {
            out.b[layout.continuous + j] = cast(INIT_STD.ln());
        }
        Self { layout, actor, critic }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.critic.num_params()
    }

    pub fn tensors(&self) -> Vec<&[F]> {
        let mut t = self.actor.tensors();
        t.extend(self.critic.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut t = self.actor.tensors_mut();
        t.extend(self.critic.tensors_mut());
        t
    }

    fn to_input(obs: &Array2<f64>) -> Array2<F> {
        obs.mapv(cast)
    }

    /// Distribution parameters and values; fails on any non-finite output.
    pub fn forward(&self, obs: &Array2<f64>) -> Result<PolicyOutput> {
        let x = Self::to_input(obs);
        let actor = self.actor.forward(&x).mapv(uncast);
        let values = self.critic.forward(&x).column(0).mapv(uncast);
        check_finite(&actor, &values)?;
        Ok(PolicyOutput { actor, values })
    }

    /// Loss over the transitions `idx` of `batch` and its gradient.
    ///
    /// `L = -mean(min(r A, clip(r, 1 - eps, 1 + eps) A)) + c_v mean((V - R)^2)
    ///      - c_e mean(H)`.
    pub fn loss_and_grad(&self, batch: &RolloutBatch, idx: &[usize], cfg: &LossConfig) -> Result<(LossStats, PolicyGrads<F>)> {
        let n = idx.len();
        let obs = batch.observations.select(ndarray::Axis(0), idx);
        let x = Self::to_input(&obs);
        let (actor_out, actor_cache) = self.actor.forward_cached(&x);
        let (critic_out, critic_cache) = self.critic.forward_cached(&x);
        let actor = actor_out.mapv(uncast);
        let values = critic_out.column(0).mapv(uncast);
        check_finite(&actor, &values)?;

        let inv_n = 1.0 / n as f64;
        let mut d_actor = Array2::<f64>::zeros(actor.raw_dim());
        let mut d_critic = Array2::<f64>::zeros((n, 1));
        let mut stats = LossStats::default();
        let eps = cfg.clip_epsilon;
        for (row, &i) in idx.iter().enumerate() {
            let dist = HybridDist::new(actor.row(row).to_slice().expect("standard layout"), &self.layout);
            let action = &batch.actions[i];
            let lp = dist.log_prob(action);
            let log_ratio = lp - batch.log_prob_old[i];
            let ratio = log_ratio.exp();
            let adv = batch.advantages[i];
            let surr1 = ratio * adv;
            let surr2 = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
            stats.policy -= surr1.min(surr2) * inv_n;
            if (ratio - 1.0).abs() > eps {
                stats.clip_fraction += inv_n;
            }
            stats.approx_kl -= log_ratio * inv_n;
            let grad_row = d_actor.row_mut(row).into_slice().expect("standard layout");
            if surr1 <= surr2 {
                // d(-r A)/d lp = -r A
                dist.add_log_prob_grad(action, -surr1 * inv_n, grad_row);
            }
            let ent = dist.entropy();
            stats.entropy += ent * inv_n;
            if cfg.entropy_coeff != 0.0 {
                dist.add_entropy_grad(-cfg.entropy_coeff * inv_n, grad_row);
            }
            let err = values[row] - batch.returns[i];
            stats.value += err * err * inv_n;
            d_critic[[row, 0]] = 2.0 * cfg.vf_coeff * err * inv_n;
        }
        stats.total = stats.policy + cfg.vf_coeff * stats.value - cfg.entropy_coeff * stats.entropy;
        if !stats.total.is_finite() {
            return Err(Error::NonFinite {
                context: "ppo loss",
                detail: format!(
                    "policy={} value={} entropy={} over {n} samples, advantage mean {:.4}",
                    stats.policy,
                    stats.value,
                    stats.entropy,
                    idx.iter().map(|&i| batch.advantages[i]).sum::<f64>() * inv_n
                ),
            });
        }
        let grads = PolicyGrads {
            actor: self.actor.backward(&actor_cache, &d_actor.mapv(cast)),
            critic: self.critic.backward(&critic_cache, &d_critic.mapv(cast)),
        };
        Ok((stats, grads))
    }
}

fn check_finite(actor: &Array2<f64>, values: &Array1<f64>) -> Result<()> {
    if let Some(pos) = actor.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "policy forward",
            detail: format!("actor output element {pos} is {}", actor.iter().nth(pos).copied().unwrap_or(f64::NAN)),
        });
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "policy forward", detail: format!("value of sample {pos} is {}", values[pos]) });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::dist::HybridAction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zeroed_output_layers_give_uniform_heads_and_zero_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net: PolicyNet<f32> = PolicyNet::new(12, &[16, 16], HeadLayout { continuous: 2, categorical: vec![3] }, &mut rng);
        for out in [net.actor.layers.last_mut().unwrap(), net.critic.layers.last_mut().unwrap()] {
            out.w.fill(0.0);
            out.b.fill(0.0);
        }
        let obs = Array2::from_shape_fn((4, 12), |(i, j)| (i * j) as f64 * 0.1);
        let out = net.forward(&obs).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
        for i in 0..4 {
            let p = out.dist(i, &net.layout).probs(0);
            assert!(p.iter().all(|&q| (q - 1.0 / 3.0).abs() < 1e-12));
        }
    }

    #[test]
    fn forward_is_pure_and_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net: PolicyNet<f64> = PolicyNet::new(3, &[8], HeadLayout { continuous: 1, categorical: vec![2] }, &mut rng);
        let a = Array2::from_shape_vec((1, 3), vec![0.2, 0.5, 0.9]).unwrap();
        let b = Array2::from_shape_vec((1, 3), vec![0.2 + 1e-7, 0.5, 0.9]).unwrap();
        let oa = net.forward(&a).unwrap();
        assert_eq!(oa.actor, net.forward(&a).unwrap().actor);
        let ob = net.forward(&b).unwrap();
        let diff = (&oa.actor - &ob.actor).mapv(f64::abs).sum() + (oa.values[0] - ob.values[0]).abs();
        assert!(diff < 1e-5 && diff > 0.0);
    }

    #[test]
    fn initial_policy_is_near_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout = HeadLayout { continuous: 6, categorical: vec![3, 3, 3] };
        let net: PolicyNet<f32> = PolicyNet::new(12, &[256, 256], layout, &mut rng);
        let obs = Array2::from_shape_fn((1, 12), |(_, j)| j as f64 / 12.0);
        let out = net.forward(&obs).unwrap();
        let d = out.dist(0, &net.layout);
        for j in 0..6 {
            assert!(d.mean(j).abs() < 0.1);
            assert!((d.log_std(j) - INIT_STD.ln()).abs() < 0.1);
        }
        assert!(d.probs(0).iter().all(|&p| (p - 1.0 / 3.0).abs() < 0.05));
    }

    #[test]
    fn manual_ratio_one_loss() {
        // identical policy: r = 1 and the policy term is -mean(A)
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layout = HeadLayout { continuous: 1, categorical: vec![2] };
        let net: PolicyNet<f64> = PolicyNet::new(2, &[4], layout, &mut rng);
        let obs = Array2::from_shape_vec((2, 2), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let out = net.forward(&obs).unwrap();
        let actions = vec![
            HybridAction { pre_squash: vec![0.3], discrete: vec![1] },
            HybridAction { pre_squash: vec![-0.2], discrete: vec![0] },
        ];
        let log_prob_old = (0..2).map(|i| out.dist(i, &net.layout).log_prob(&actions[i])).collect();
        let batch = RolloutBatch {
            observations: obs,
            actions,
            log_prob_old,
            rewards: vec![0.0; 2],
            values: vec![0.0; 2],
            dones: vec![true; 2],
            advantages: vec![1.0, -0.5],
            returns: out.values.to_vec(),
            policy_version: 0,
        };
        let cfg = LossConfig { clip_epsilon: 0.3, vf_coeff: 0.5, entropy_coeff: 0.0 };
        let (stats, _) = net.loss_and_grad(&batch, &[0, 1], &cfg).unwrap();
        assert!((stats.policy - (-0.25)).abs() < 1e-12);
        assert!(stats.value.abs() < 1e-20);
    }
}
