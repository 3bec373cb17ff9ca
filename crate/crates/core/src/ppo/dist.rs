//! Hybrid action distribution: sigmoid-squashed Gaussians for continuous
//! components and independent categoricals for discrete ones.
//!
//! An actor output row is laid out as `[means (c), log_stds (c), logits..]`.
//! The joint log-probability is the sum over all heads.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace1, ActionSpace2, ActionSpaceKind, LinkAction, LinkParam, NUM_LINKS, NUM_MODFEC};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Sizes of the continuous and categorical heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub continuous: usize,
    pub categorical: Vec<usize>,
}

impl HeadLayout {
    /// Space 1: center and EIRP per link, one MOD-FEC head per link.
    /// Space 2: one continuous value, then link, parameter and discrete-value
    /// heads.
    pub fn for_space(space: ActionSpaceKind) -> Self {
        match space {
            ActionSpaceKind::Space1 => Self { continuous: 2 * NUM_LINKS, categorical: vec![NUM_MODFEC; NUM_LINKS] },
            ActionSpaceKind::Space2 => Self { continuous: 1, categorical: vec![NUM_LINKS, 3, NUM_MODFEC] },
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.continuous + self.categorical.iter().sum::<usize>()
    }

    fn logits_offset(&self, head: usize) -> usize {
        2 * self.continuous + self.categorical[..head].iter().sum::<usize>()
    }
}

/// A sampled composite action. Continuous components are kept before the
/// squashing so log-densities are evaluated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    pub pre_squash: Vec<f64>,
    pub discrete: Vec<usize>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log(a (1 - a))` for `a = sigmoid(u)`, stable for large `|u|`.
fn log_squash_jacobian(u: f64) -> f64 {
    -softplus(-u) - softplus(u)
}

impl HybridAction {
    /// Continuous components mapped into `[0, 1]`.
    pub fn squashed(&self) -> Vec<f64> {
        self.pre_squash.iter().map(|&u| sigmoid(u)).collect()
    }

    pub fn to_env_action(&self, space: ActionSpaceKind) -> Action {
        let a = self.squashed();
        match space {
            ActionSpaceKind::Space1 => Action::Full(ActionSpace1 {
                links: std::array::from_fn(|i| LinkAction {
                    center_freq_norm: a[2 * i],
                    eirp_norm: a[2 * i + 1],
                    modfec_index: self.discrete[i],
                }),
            }),
            ActionSpaceKind::Space2 => Action::Edit(ActionSpace2 {
                link_index: self.discrete[0],
                param: LinkParam::from_index(self.discrete[1]),
                continuous_value: a[0],
                discrete_value: self.discrete[2],
            }),
        }
    }
}

/// Distribution described by one actor output row.
#[derive(Debug, Clone, Copy)]
pub struct HybridDist<'a> {
    row: &'a [f64],
    layout: &'a HeadLayout,
}

impl<'a> HybridDist<'a> {
    pub fn new(row: &'a [f64], layout: &'a HeadLayout) -> Self {
        assert_eq!(row.len(), layout.output_dim(), "actor row does not match head layout");
        Self { row, layout }
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.row[j]
    }

    pub fn log_std(&self, j: usize) -> f64 {
        self.row[self.layout.continuous + j].clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn logits(&self, head: usize) -> &'a [f64] {
        let off = self.layout.logits_offset(head);
        &self.row[off..off + self.layout.categorical[head]]
    }

    /// Normalized probabilities of a categorical head.
    pub fn probs(&self, head: usize) -> Vec<f64> {
        let z = self.logits(head);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|&x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    fn log_softmax(&self, head: usize, k: usize) -> f64 {
        let z = self.logits(head);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
        z[k] - lse
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (HybridAction, f64) {
        let pre_squash = (0..self.layout.continuous)
            .map(|j| {
                let eps: f64 = rng.sample(StandardNormal);
                self.mean(j) + self.log_std(j).exp() * eps
            })
            .collect();
        let discrete = (0..self.layout.categorical.len())
            .map(|h| {
                let p = self.probs(h);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        return k;
                    }
                }
                p.len() - 1
            })
            .collect();
        let action = HybridAction { pre_squash, discrete };
        let lp = self.log_prob(&action);
        (action, lp)
    }

    /// Most likely action: `sigmoid(mean)` and the arg-max of every head.
    pub fn mode(&self) -> HybridAction {
        let pre_squash = (0..self.layout.continuous).map(|j| self.mean(j)).collect();
        let discrete = (0..self.layout.categorical.len())
            .map(|h| {
                let z = self.logits(h);
                (0..z.len()).fold(0, |best, k| if z[k] > z[best] { k } else { best })
            })
            .collect();
        HybridAction { pre_squash, discrete }
    }

    /// Joint log-density of the squashed action (Gaussian density of the
    /// pre-squash value plus the change-of-variables term) plus categorical
    /// log-masses.
    pub fn log_prob(&self, action: &HybridAction) -> f64 {
        let mut lp = 0.0;
        for (j, &u) in action.pre_squash.iter().enumerate() {
            let s = self.log_std(j);
            let z = (u - self.mean(j)) / s.exp();
            lp += -0.5 * z * z - s - 0.5 * (2.0 * PI).ln() - log_squash_jacobian(u);
        }
        for (h, &k) in action.discrete.iter().enumerate() {
            lp += self.log_softmax(h, k);
        }
        lp
    }

    /// Entropy of the pre-squash Gaussians plus the categoricals.
    pub fn entropy(&self) -> f64 {
        let gauss: f64 = (0..self.layout.continuous).map(|j| self.log_std(j) + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum();
        let cat: f64 = (0..self.layout.categorical.len())
            .map(|h| self.probs(h).iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum::<f64>())
            .sum();
        gauss + cat
    }

    /// Adds `scale * d log_prob(action) / d row` to `out`.
    pub fn add_log_prob_grad(&self, action: &HybridAction, scale: f64, out: &mut [f64]) {
        let c = self.layout.continuous;
        for (j, &u) in action.pre_squash.iter().enumerate() {
            let raw_s = self.row[c + j];
            let sigma = self.log_std(j).exp();
            let diff = u - self.mean(j);
            out[j] += scale * diff / (sigma * sigma);
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_s) {
                out[c + j] += scale * (diff * diff / (sigma * sigma) - 1.0);
            }
        }
        for (h, &k) in action.discrete.iter().enumerate() {
            let off = self.layout.logits_offset(h);
            for (i, p) in self.probs(h).into_iter().enumerate() {
                let onehot = if i == k { 1.0 } else { 0.0 };
                out[off + i] += scale * (onehot - p);
            }
        }
    }

    /// Adds `scale * d entropy / d row` to `out`.
    pub fn add_entropy_grad(&self, scale: f64, out: &mut [f64]) {
        let c = self.layout.continuous;
        for j in 0..c {
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&self.row[c + j]) {
                out[c + j] += scale;
            }
        }
        for h in 0..self.layout.categorical.len() {
            let off = self.layout.logits_offset(h);
            let p = self.probs(h);
            let ent: f64 = p.iter().filter(|&&q| q > 0.0).map(|q| -q * q.ln()).sum();
            for (i, &pi) in p.iter().enumerate() {
                if pi > 0.0 {
                    out[off + i] += scale * (-pi * (pi.ln() + ent));
                }
            }
        }
    }
}
