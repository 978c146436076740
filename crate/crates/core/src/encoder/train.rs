use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{infonce_loss, infonce_with_grad, Encoder, EncoderError};
use crate::corpus::Corpus;
use crate::hashing::derive_seed;
use crate::mining::ContrastiveGroup;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Groups per optimizer step.
    pub batch: usize,
    pub seed: u64,
    pub temperature: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            lr: 1e-3,
            weight_decay: 0.01,
            batch: 1,
            seed: 0,
            temperature: 0.07,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::InvalidConfig(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        if self.batch == 0 {
            return bad("batch must be at least 1");
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return bad("temperature must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad("eps must be positive");
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay:
/// `p ← p − lr·(m̂/(√v̂ + ε) + wd·p)`, decay applied only where `mask` is set.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    mask: Vec<bool>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(cfg: &TrainConfig, mask: Vec<bool>) -> Self {
        let n = mask.len();
        AdamW {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            mask,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            let decay = if self.mask[i] { self.weight_decay * params[i] } else { 0.0 };
            params[i] -= self.lr * (mhat / (vhat.sqrt() + self.eps) + decay);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss over all groups before the first update.
    pub initial_loss: f64,
    /// Mean loss over all groups after the last update.
    pub final_loss: f64,
    /// Mean of the per-step losses seen during each epoch.
    pub curve: Vec<EpochLoss>,
    pub steps: usize,
}

/// A group resolved to corpus positions: anchor, positive, then negatives.
struct Resolved {
    anchor_id: String,
    members: Vec<usize>,
}

fn resolve(groups: &[ContrastiveGroup], corpus: &Corpus) -> Result<Vec<Resolved>, EncoderError> {
    groups
        .iter()
        .map(|g| {
            let ids = [g.anchor_id.as_str(), g.positive_id.as_str()]
                .into_iter()
                .chain(g.negative_ids());
            let members = ids
                .map(|id| corpus.position(id).ok_or_else(|| EncoderError::UnknownId(id.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Resolved { anchor_id: g.anchor_id.clone(), members })
        })
        .collect()
}

fn tokenize_corpus(encoder: &Encoder, corpus: &Corpus) -> Result<Vec<Vec<u32>>, EncoderError> {
    corpus
        .records()
        .iter()
        .map(|r| encoder.tokenize(&r.utterance))
        .collect()
}

fn loss_of(embs: &[&[f64]], temperature: f64) -> Result<f64, EncoderError> {
    infonce_loss(embs[0], embs[1], &embs[2..], temperature)
}

/// InfoNCE of one group under the current parameters.
pub fn group_loss(
    encoder: &Encoder,
    group: &ContrastiveGroup,
    corpus: &Corpus,
    temperature: f64,
) -> Result<f64, EncoderError> {
    mean_group_loss(encoder, std::slice::from_ref(group), corpus, temperature)
}

/// Mean InfoNCE over `groups`. Each referenced record is embedded once.
pub fn mean_group_loss(
    encoder: &Encoder,
    groups: &[ContrastiveGroup],
    corpus: &Corpus,
    temperature: f64,
) -> Result<f64, EncoderError> {
    if groups.is_empty() {
        return Err(EncoderError::NoGroups);
    }
    let resolved = resolve(groups, corpus)?;
    let mut needed: Vec<usize> = resolved.iter().flat_map(|r| r.members.iter().copied()).collect();
    needed.sort_unstable();
    needed.dedup();
    let embs: Vec<Vec<f64>> = needed
        .par_iter()
        .map(|&i| encoder.embed(&corpus.record(i).utterance, None))
        .collect::<Result<_, _>>()?;
    let lookup = |i: usize| embs[needed.binary_search(&i).unwrap()].as_slice();
    let mut total = 0.0;
    for r in &resolved {
        let e: Vec<&[f64]> = r.members.iter().map(|&i| lookup(i)).collect();
        let l = loss_of(&e, temperature)?;
        if !l.is_finite() {
            return Err(EncoderError::NonFiniteLoss(r.anchor_id.clone()));
        }
        total += l;
    }
    Ok(total / groups.len() as f64)
}

/// InfoNCE of one group given as token ids (anchor, positive, negatives),
/// adding `scale` times its parameter gradient into `grad`.
pub fn group_loss_grad(
    encoder: &Encoder,
    members: &[&[u32]],
    temperature: f64,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64, EncoderError> {
    if members.len() < 2 {
        return Err(EncoderError::EmptyInput);
    }
    for m in members {
        encoder.check_ids(m)?;
    }
    if grad.len() != encoder.params().len() {
        return Err(EncoderError::DimensionMismatch { expected: encoder.params().len(), got: grad.len() });
    }
    let traces: Vec<_> = members.iter().map(|ids| encoder.trace(ids)).collect();
    let pooled: Vec<Vec<f64>> = traces.iter().map(|t| t.hidden.pooled()).collect();
    let g = infonce_with_grad(&pooled[0], &pooled[1], &pooled[2..], temperature)?;
    let d_embs = std::iter::once(&g.d_anchor).chain(std::iter::once(&g.d_positive)).chain(&g.d_negatives);
    for (trace, de) in traces.iter().zip(d_embs) {
        let scaled: Vec<f64> = de.iter().map(|x| x * scale).collect();
        encoder.backprop(trace, &scaled, grad);
    }
    Ok(g.loss)
}

/// Minimizes mean InfoNCE over `groups` with AdamW. Group order is shuffled
/// per epoch from `cfg.seed`; updates run sequentially so results depend
/// only on the seed.
pub fn train(
    encoder: &mut Encoder,
    groups: &[ContrastiveGroup],
    corpus: &Corpus,
    cfg: &TrainConfig,
) -> Result<TrainReport, EncoderError> {
    cfg.validate()?;
    if groups.is_empty() {
        return Err(EncoderError::NoGroups);
    }
    let resolved = resolve(groups, corpus)?;
    let tokens = tokenize_corpus(encoder, corpus)?;
    let initial_loss = mean_group_loss(encoder, groups, corpus, cfg.temperature)?;
    let mut opt = AdamW::new(cfg, encoder.layout().decay_mask());
    let mut grad = vec![0.0; encoder.params().len()];
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    let mut order: Vec<usize> = (0..resolved.len()).collect();

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("epoch{epoch}")));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for batch in order.chunks(cfg.batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &gi in batch {
                let r = &resolved[gi];
                let members: Vec<&[u32]> = r.members.iter().map(|&i| tokens[i].as_slice()).collect();
                let loss = group_loss_grad(encoder, &members, cfg.temperature, scale, &mut grad)?;
                if !loss.is_finite() {
                    return Err(EncoderError::NonFiniteLoss(r.anchor_id.clone()));
                }
                epoch_total += loss;
            }
            if let Some(bad) = grad.iter().position(|g| !g.is_finite()) {
                log::error!("non-finite gradient at parameter {bad}");
                return Err(EncoderError::NonFiniteLoss(resolved[batch[0]].anchor_id.clone()));
            }
            opt.step(encoder.params_mut(), &grad);
            steps += 1;
        }
        let mean_loss = epoch_total / resolved.len() as f64;
        log::info!("epoch {epoch}: mean loss {mean_loss:.6}");
        curve.push(EpochLoss { epoch, mean_loss });
    }
    let final_loss = if cfg.epochs == 0 {
        initial_loss
    } else {
        mean_group_loss(encoder, groups, corpus, cfg.temperature)?
    };
    Ok(TrainReport { initial_loss, final_loss, curve, steps })
}

pub fn write_loss_csv<W: Write>(mut w: W, curve: &[EpochLoss]) -> std::io::Result<()> {
    writeln!(w, "epoch,mean_loss")?;
    for e in curve {
        writeln!(w, "{},{}", e.epoch, e.mean_loss)?;
    }
    Ok(())
}
