use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::rollout::RolloutBatch;
use crate::error::{Error, Result};
use crate::nn::{adam_step, clip_grad_norm, AdamState, Tape};
use crate::policy::{record_entropy, record_forward, record_log_prob, Blocks, PolicyParams};

/// Diagnostics averaged over every minibatch of one update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub samples: usize,
    pub minibatches: usize,
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 - ε, 1 + ε]`.
    pub clip_fraction: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    /// Mean of `log π_old - log π_new`.
    pub approx_kl: f64,
}

/// `min(r·A, clip(r, 1 - ε, 1 + ε)·A)` for one sample.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Zero mean, unit variance; all zeros when the spread vanishes.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    adv.iter().map(|a| if std > 0.0 { (a - mean) / (std + 1e-8) } else { 0.0 }).collect()
}

/// Runs `epochs` passes of shuffled minibatch PPO over `batch`. On any failure the
/// parameters and optimizer state are left exactly as they were.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    adam: &mut AdamState,
    batch: &RolloutBatch,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<TrainStats> {
    let mut stats = TrainStats { samples: batch.len(), ..TrainStats::default() };
    if batch.is_empty() {
        return Ok(stats);
    }
    if batch.advantages.len() != batch.len() || batch.returns.len() != batch.len() {
        return Err(Error::Dimension("batch advantages are missing or misaligned".into()));
    }
    let mut work = params.clone();
    let mut work_adam = adam.clone();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let mb = minibatch_step(&mut work, &mut work_adam, batch, chunk, config)?;
            stats.minibatches += 1;
            stats.loss += mb.loss;
            stats.policy_loss += mb.policy_loss;
            stats.value_loss += mb.value_loss;
            stats.entropy += mb.entropy;
            stats.clip_fraction += mb.clip_fraction;
            stats.grad_norm += mb.grad_norm;
            stats.approx_kl += mb.approx_kl;
        }
    }
    let k = stats.minibatches as f64;
    for v in [
        &mut stats.loss,
        &mut stats.policy_loss,
        &mut stats.value_loss,
        &mut stats.entropy,
        &mut stats.clip_fraction,
        &mut stats.grad_norm,
        &mut stats.approx_kl,
    ] {
        *v /= k;
    }
    *params = work;
    *adam = work_adam;
    Ok(stats)
}

fn minibatch_step(
    params: &mut PolicyParams,
    adam: &mut AdamState,
    batch: &RolloutBatch,
    idx: &[usize],
    config: &PpoConfig,
) -> Result<TrainStats> {
    let (mut stats, mut grads) = ppo_loss_gradient(params, batch, idx, config)?;
    stats.grad_norm = clip_grad_norm(&mut grads, config.max_grad_norm);
    adam_step(params, &grads, adam, &config.adam)?;
    Ok(stats)
}

/// Loss of the samples `idx` of `batch` and its gradient with respect to every
/// parameter, before clipping. The loss is the mean over samples of
/// `-min(r·A, clip(r)·A) + c_v·(v - R)² - c_e·H`, with `A` normalised over `idx`.
pub fn ppo_loss_gradient(
    params: &PolicyParams,
    batch: &RolloutBatch,
    idx: &[usize],
    config: &PpoConfig,
) -> Result<(TrainStats, PolicyParams)> {
    if idx.is_empty() {
        return Err(Error::Dimension("empty minibatch".into()));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= batch.len() || i >= batch.advantages.len() || i >= batch.returns.len()) {
        return Err(Error::Dimension(format!("sample {bad} is outside the batch")));
    }
    let adv = normalize_advantages(&idx.iter().map(|&i| batch.advantages[i]).collect::<Vec<_>>());
    let n = idx.len() as f64;
    let mut stats = TrainStats { samples: idx.len(), ..TrainStats::default() };
    let mut tape = Tape::new();
    let blocks = Blocks::register(&mut tape, params);
    let mut terms = Vec::with_capacity(idx.len());
    for (&i, &a) in idx.iter().zip(&adv) {
        let tr = &batch.transitions[i];
        let nodes = record_forward(&mut tape, &blocks, &params.config, &tr.obs)?;
        let lp = record_log_prob(&mut tape, &nodes, tr.action);
        let diff = tape.add_const(lp, -tr.log_prob);
        let ratio = tape.exp(diff);
        let unclipped = tape.scale(ratio, a);
        let clipped_ratio = tape.clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
        let clipped = tape.scale(clipped_ratio, a);
        let surrogate = tape.min(unclipped, clipped);
        let err = tape.add_const(nodes.value, -batch.returns[i]);
        let sq = tape.square(err);
        let entropy = record_entropy(&mut tape, &nodes);

        let r = tape.scalar(ratio);
        stats.policy_loss -= tape.scalar(surrogate) / n;
        stats.value_loss += tape.scalar(sq) / n;
        stats.entropy += tape.scalar(entropy) / n;
        stats.approx_kl += (tr.log_prob - tape.scalar(lp)) / n;
        if (r - 1.0).abs() > config.clip {
            stats.clip_fraction += 1.0 / n;
        }

        let pg = tape.scale(surrogate, -1.0);
        let vl = tape.scale(sq, config.value_weight);
        let el = tape.scale(entropy, -config.entropy_weight);
        let pv = tape.add(pg, vl);
        terms.push(tape.add(pv, el));
    }
    let all = tape.concat(&terms);
    let total = tape.sum(all);
    let loss = tape.scale(total, 1.0 / n);
    stats.loss = tape.scalar(loss);
    if !stats.loss.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite PPO loss (policy {}, value {}, entropy {})",
            stats.policy_loss, stats.value_loss, stats.entropy
        )));
    }
    let grads = tape.backward(loss)?;
    let grads = PolicyParams::from_blocks(params.config.clone(), grads.blocks)?;
    Ok((stats, grads))
}
