//! Clipped-surrogate PPO loss with value and entropy terms.

use crate::encoding::masked_log_softmax;
use crate::env::Transition;
use crate::error::TrainError;
use crate::net::{Gradients, Network};

use super::PpoConfig;

/// Collected steps with their advantages and returns.
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean of `old_log_prob - new_log_prob`.
    pub kl_estimate: f64,
    pub ratios: Vec<f64>,
    /// Per-sample `min(ratio * A, clip(ratio) * A)`.
    pub surrogates: Vec<f64>,
    pub grads: Gradients<f32>,
}

/// Loss and gradients on `batch[indices]`.
///
/// The network runs in eval mode so that the log-probabilities match the
/// ones recorded during collection; advantages are expected pre-normalized.
pub fn ppo_loss(
    net: &Network<f32>,
    batch: &RolloutBatch,
    indices: &[usize],
    config: &PpoConfig,
) -> Result<LossOutput, TrainError> {
    let n = indices.len();
    assert!(n > 0, "empty minibatch");
    let planes: Vec<[f32; 25]> = indices.iter().map(|&i| batch.transitions[i].obs.plane).collect();
    let out = net.forward_eval(&planes);
    let a_dim = net.config.actions;
    let inv_n = 1.0 / n as f64;
    let eps = config.clip_ratio;

    let mut dlogits = vec![0f32; n * a_dim];
    let mut dvalues = vec![0f32; n];
    let (mut policy_loss, mut value_loss, mut entropy, mut kl) = (0.0, 0.0, 0.0, 0.0);
    let mut ratios = Vec::with_capacity(n);
    let mut surrogates = Vec::with_capacity(n);

    for (row, &i) in indices.iter().enumerate() {
        let t = &batch.transitions[i];
        let adv = batch.advantages[i];
        let ret = batch.returns[i];
        let logits: Vec<f64> = out.logits_row(row).iter().map(|&v| v as f64).collect();
        let logp = masked_log_softmax(&logits, &t.obs.legal);
        let k = t
            .obs
            .legal
            .binary_search(&t.action)
            .expect("stored action is legal in its observation");
        let new_lp = logp[k];
        let ratio = (new_lp - t.log_prob).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        let surrogate = unclipped.min(clipped);
        ratios.push(ratio);
        surrogates.push(surrogate);
        policy_loss -= surrogate * inv_n;
        kl += (t.log_prob - new_lp) * inv_n;

        let clip_active = (adv > 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps);
        // d(loss)/d(new log-prob)
        let g_lp = if clip_active { 0.0 } else { -ratio * adv * inv_n };

        let h: f64 = -logp.iter().map(|&l| l.exp() * l).sum::<f64>();
        entropy += h * inv_n;

        let drow = &mut dlogits[row * a_dim..(row + 1) * a_dim];
        for (j, (&a, &l)) in t.obs.legal.iter().zip(&logp).enumerate() {
            let p = l.exp();
            let onehot = if j == k { 1.0 } else { 0.0 };
            let mut g = g_lp * (onehot - p);
            // -c * dH/dlogit, dH/dlogit_j = -p_j (log p_j + H)
            g += config.entropy_coef * inv_n * p * (l + h);
            drow[a.index()] = g as f32;
        }

        let v = out.values[row] as f64;
        value_loss += (v - ret) * (v - ret) * inv_n;
        dvalues[row] = (2.0 * config.value_coef * (v - ret) * inv_n) as f32;
    }

    let loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy;
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            update: 0,
            policy_loss,
            value_loss,
            entropy,
        });
    }
    let grads = net.backward(&out.cache, &dlogits, &dvalues);
    Ok(LossOutput {
        loss,
        policy_loss,
        value_loss,
        entropy,
        kl_estimate: kl,
        ratios,
        surrogates,
        grads,
    })
}
