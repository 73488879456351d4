//! Mini-batch training and gradient verification.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bce_loss, mae_loss, sigmoid, AdamW, Head, Network, NnError};
use crate::data::PatchSample;
use crate::exec::Exec;

/// Samples per gradient chunk. Fixed so that the floating-point reduction
/// order does not depend on the execution mode or thread count.
const CHUNK: usize = 8;

enum Target {
    Label(f64),
    Center(f64, f64),
}

fn target(net: &Network, s: &PatchSample) -> Result<Target, NnError> {
    match net.cfg.head {
        Head::Classification => Ok(Target::Label(s.label() as f64)),
        Head::Localization => {
            let (r, c) = s
                .center
                .ok_or_else(|| NnError::WrongHead("localization batches take positive samples only".into()))?;
            Ok(Target::Center(r as f64, c as f64))
        }
    }
}

fn loss_from_outputs(net: &Network, outputs: &[Vec<f64>], batch: &[PatchSample]) -> Result<f64, NnError> {
    match net.cfg.head {
        Head::Classification => {
            let p: Vec<f64> = outputs.iter().map(|o| sigmoid(o[0])).collect();
            let y: Vec<f64> = batch.iter().map(|s| s.label() as f64).collect();
            bce_loss(&p, &y)
        }
        Head::Localization => {
            let pred: Vec<(f64, f64)> = outputs.iter().map(|o| (o[0], o[1])).collect();
            let truth = batch
                .iter()
                .map(|s| s.center.map(|(r, c)| (r as f64, c as f64)))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| NnError::WrongHead("localization batches take positive samples only".into()))?;
            mae_loss(&pred, &truth)
        }
    }
}

/// Batch-mean loss and its gradient with respect to every parameter.
///
/// The classification gradient is taken through the logit, `(p − y) / N`,
/// which is the exact derivative of the unclamped loss.
pub fn batch_loss_and_grad(net: &Network, batch: &[PatchSample], exec: Exec) -> Result<(f64, Vec<f64>), NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let chunks: Vec<&[PatchSample]> = batch.chunks(CHUNK).collect();
    let parts = exec.map(&chunks, |chunk| -> Result<(Vec<Vec<f64>>, Vec<f64>), NnError> {
        let mut grad = vec![0.0; net.param_count()];
        let mut outs = Vec::with_capacity(chunk.len());
        for s in chunk.iter() {
            let t = target(net, s)?;
            let x = net.standardized(s)?;
            let cache = net.forward_cached(&x)?;
            let out = cache.acts.last().expect("output").clone();
            let dout = match t {
                Target::Label(y) => vec![(sigmoid(out[0]) - y) / n],
                Target::Center(r, c) => {
                    let sgn = |d: f64| if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
                    vec![sgn(out[0] - r) / (2.0 * n), sgn(out[1] - c) / (2.0 * n)]
                }
            };
            net.backward(&cache, &dout, &mut grad);
            outs.push(out);
        }
        Ok((outs, grad))
    });
    let mut grad = vec![0.0; net.param_count()];
    let mut outputs = Vec::with_capacity(batch.len());
    for part in parts {
        let (o, g) = part?;
        outputs.extend(o);
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss_from_outputs(net, &outputs, batch)?, grad))
}

/// One optimizer step; returns the loss before the update.
pub fn train_step(net: &mut Network, batch: &[PatchSample], opt: &mut AdamW, exec: Exec) -> Result<f64, NnError> {
    let (loss, grad) = batch_loss_and_grad(net, batch, exec)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(NnError::NanLoss {
            step: opt.step,
            detail: format!("loss {loss} on a batch of {} ({} head)", batch.len(), net.cfg.head.as_str()),
        });
    }
    opt.update(&mut net.params, &grad);
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once the full-set loss drops below this value.
    pub target_loss: Option<f64>,
    /// Full-set evaluation interval (steps) for early stopping.
    pub eval_every: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { steps: 500, batch_size: 16, seed: 0, target_loss: None, eval_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Pre-update mini-batch loss of every step taken.
    pub losses: Vec<f64>,
    /// Full-set loss after the last step.
    pub final_loss: f64,
}

/// Shuffled mini-batch training over `samples` (reshuffled each epoch).
pub fn fit(
    net: &mut Network,
    samples: &[PatchSample],
    cfg: &FitConfig,
    opt: &mut AdamW,
    exec: Exec,
) -> Result<FitReport, NnError> {
    if samples.is_empty() || cfg.batch_size == 0 {
        return Err(NnError::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::new();
    let full_loss = |net: &Network| -> Result<f64, NnError> {
        let outs = exec
            .map(samples, |s| net.forward_raw(&net.standardized(s)?))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        loss_from_outputs(net, &outs, samples)
    };
    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size.min(samples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(samples[order[cursor]].clone());
            cursor += 1;
        }
        losses.push(train_step(net, &batch, opt, exec)?);
        if let Some(target) = cfg.target_loss {
            if cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && full_loss(net)? < target {
                break;
            }
        }
    }
    Ok(FitReport { losses, final_loss: full_loss(net)? })
}

/// Largest relative error between analytic and central-difference
/// gradients over a random subset of `n_probe` parameters:
/// `|g_a − g_n| / max(1e-8, |g_a| + |g_n|)`.
pub fn gradient_check(net: &Network, batch: &[PatchSample], n_probe: usize, h: f64, seed: u64) -> Result<f64, NnError> {
    let (_, analytic) = batch_loss_and_grad(net, batch, Exec::Sequential)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..net.param_count()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(n_probe);
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for &i in &idx {
        let orig = probe.params[i];
        probe.params[i] = orig + h;
        let (lp, _) = batch_loss_and_grad(&probe, batch, Exec::Sequential)?;
        probe.params[i] = orig - h;
        let (lm, _) = batch_loss_and_grad(&probe, batch, Exec::Sequential)?;
        probe.params[i] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let ga = analytic[i];
        let rel = (ga - numeric).abs() / (ga.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
