//! Rollout storage and generalized advantage estimation.

use ndarray::Array2;

use super::dist::HybridAction;

/// Advantages and returns for one contiguous segment of a single
/// environment.
///
/// `last_value` is the critic's estimate for the observation following the
/// final transition; it is used only when that transition is not terminal.
/// Nothing is bootstrapped across a `done` flag.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "segment arrays differ in length");
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, next_adv) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 < n {
            (values[t + 1], running)
        } else {
            (last_value, 0.0)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * next_adv;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// One batch of on-policy transitions.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    /// `len x obs_dim`.
    pub observations: Array2<f64>,
    pub actions: Vec<HybridAction>,
    pub log_prob_old: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Version of the parameters that generated the batch.
    pub policy_version: u64,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Shifts and scales advantages to zero mean and unit variance.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len() as f64;
        if n < 2.0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n;
        let var = self.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-8);
        for a in &mut self.advantages {
            *a = (*a - mean) / std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn undiscounted_telescoping() {
        let (adv, ret) = compute_gae(&[1.0; 3], &[0.0; 3], &[false, false, true], 99.0, 1.0, 1.0);
        assert_eq!(adv, vec![3.0, 2.0, 1.0]);
        assert_eq!(ret, adv);
    }

    #[test]
    fn discounted_by_half() {
        let (adv, _) = compute_gae(&[1.0; 3], &[0.0; 3], &[false, false, true], 0.0, 0.5, 1.0);
        assert_eq!(adv, vec![1.75, 1.5, 1.0]);
    }

    #[test]
    fn perfect_critic_has_zero_advantage() {
        let rewards = [0.2, 0.5, 0.1];
        let values = [0.2 + 0.9 * (0.5 + 0.9 * 0.1), 0.5 + 0.9 * 0.1, 0.1];
        let (adv, _) = compute_gae(&rewards, &values, &[false, false, true], 0.0, 0.9, 1.0);
        assert!(adv.iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn truncated_segment_bootstraps() {
        let (adv, _) = compute_gae(&[1.0], &[0.0], &[false], 10.0, 0.5, 1.0);
        assert_eq!(adv, vec![6.0]);
    }

    fn brute_force(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
        (0..rewards.len())
            .map(|t| {
                let mut g = 0.0;
                let mut disc = 1.0;
                for k in t..rewards.len() {
                    g += disc * rewards[k];
                    disc *= gamma;
                    if dones[k] {
                        break;
                    }
                }
                g - values[t]
            })
            .collect()
    }

    proptest! {
        #[test]
        fn lambda_one_matches_discounted_return(
            data in proptest::collection::vec((0.0f64..1.0, -2.0f64..2.0, proptest::bool::weighted(0.2)), 1..60),
            gamma in 0.5f64..1.0,
        ) {
            let rewards: Vec<f64> = data.iter().map(|d| d.0).collect();
            let values: Vec<f64> = data.iter().map(|d| d.1).collect();
            let mut dones: Vec<bool> = data.iter().map(|d| d.2).collect();
            *dones.last_mut().unwrap() = true;
            let (adv, _) = compute_gae(&rewards, &values, &dones, 0.0, gamma, 1.0);
            let oracle = brute_force(&rewards, &values, &dones, gamma);
            for (a, o) in adv.iter().zip(&oracle) {
                prop_assert!((a - o).abs() <= 1e-12 * (1.0 + o.abs()));
            }
        }
    }
}
