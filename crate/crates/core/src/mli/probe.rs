use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MliError, Property, TokenLabelCorpus};
use crate::encoder::Encoder;

/// Layer-`layer` states of every corpus token (no injection), with label
/// indices. Corpus tokens are fed to the encoder as-is; sentences longer
/// than the encoder's `max_len` are truncated in both states and labels.
pub fn collect_states(
    corpus: &TokenLabelCorpus,
    encoder: &Encoder,
    layer: usize,
) -> Result<(Array2<f64>, Vec<usize>), MliError> {
    if layer < 1 || layer > encoder.layers() {
        return Err(MliError::LayerOutOfRange { layer, max: encoder.layers() });
    }
    let label_ids = corpus.label_ids()?;
    let per_sentence: Vec<(Array2<f64>, Vec<usize>)> = corpus
        .sentences
        .par_iter()
        .zip(label_ids.par_iter())
        .map(|((toks, _), ys)| {
            let ids = encoder.token_ids(toks);
            let h = encoder.forward_ids(&ids, None)?;
            Ok((h.layers[layer].clone(), ys[..ids.len()].to_vec()))
        })
        .collect::<Result<_, MliError>>()?;
    let rows: usize = per_sentence.iter().map(|(m, _)| m.nrows()).sum();
    let mut x = Array2::zeros((rows, encoder.dim()));
    let mut y = Vec::with_capacity(rows);
    let mut r = 0;
    for (m, ys) in per_sentence {
        let n = m.nrows();
        x.slice_mut(ndarray::s![r..r + n, ..]).assign(&m);
        y.extend(ys);
        r += n;
    }
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { epochs: 300, lr: 1.0, l2: 1e-4 }
    }
}

/// Multinomial logistic regression `softmax(W·h + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub layer: usize,
    pub property: Property,
    pub training_accuracy: f64,
    /// Objective value before training and after every epoch.
    pub loss_curve: Vec<f64>,
}

impl Probe {
    pub fn predict(&self, h: &[f64]) -> usize {
        let h = ndarray::ArrayView1::from(h);
        let logits = self.w.dot(&h) + &self.b;
        argmax(logits.iter().copied())
    }
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Mean softmax cross-entropy plus `l2·‖W‖²`, with its gradient.
pub fn probe_loss_and_grad(
    x: ArrayView2<f64>,
    y: &[usize],
    w: ArrayView2<f64>,
    b: &Array1<f64>,
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut logits = x.dot(&w.t()) + b;
    let mut loss = 0.0;
    for (mut row, &yi) in logits.rows_mut().into_iter().zip(y) {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[yi];
        row.mapv_inplace(|v| (v - lse).exp());
        row[yi] -= 1.0;
    }
    let dlogits = logits / n;
    loss = loss / n + l2 * w.iter().map(|v| v * v).sum::<f64>();
    let dw = dlogits.t().dot(&x) + &(&w * (2.0 * l2));
    let db = dlogits.sum_axis(Axis(0));
    (loss, dw, db)
}

/// Full-batch gradient descent from zero. A step that would raise the
/// objective is rejected and retried at half the learning rate, so the loss
/// curve never increases.
pub fn train_probe(
    x: &Array2<f64>,
    y: &[usize],
    k: usize,
    cfg: &ProbeConfig,
    layer: usize,
    property: Property,
) -> Result<Probe, MliError> {
    let mut seen = y.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(MliError::DegenerateLabels);
    }
    assert!(seen.last().is_some_and(|&m| m < k), "label index out of range");
    let d = x.ncols();
    let mut w = Array2::zeros((k, d));
    let mut b = Array1::zeros(k);
    let mut lr = cfg.lr;
    let (mut loss, mut gw, mut gb) = probe_loss_and_grad(x.view(), y, w.view(), &b, cfg.l2);
    let mut curve = vec![loss];
    'epochs: for _ in 0..cfg.epochs {
        loop {
            let w2 = &w - &(&gw * lr);
            let b2 = &b - &(&gb * lr);
            let (l2v, gw2, gb2) = probe_loss_and_grad(x.view(), y, w2.view(), &b2, cfg.l2);
            if l2v <= loss {
                (w, b, loss, gw, gb) = (w2, b2, l2v, gw2, gb2);
                break;
            }
            lr *= 0.5;
            if lr < 1e-12 {
                break 'epochs;
            }
        }
        curve.push(loss);
    }
    let logits = x.dot(&w.t()) + &b;
    let correct = logits
        .rows()
        .into_iter()
        .zip(y)
        .filter(|(row, &yi)| argmax(row.iter().copied()) == yi)
        .count();
    Ok(Probe {
        w,
        b,
        layer,
        property,
        training_accuracy: correct as f64 / y.len() as f64,
        loss_curve: curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_blobs() {
        let mut x = Array2::zeros((40, 2));
        let mut y = vec![];
        for i in 0..40 {
            let c = i % 2;
            let jitter = (i as f64 * 0.37).sin() * 0.1;
            x[[i, 0]] = if c == 0 { -2.0 } else { 2.0 } + jitter;
            x[[i, 1]] = jitter;
            y.push(c);
        }
        let p = train_probe(&x, &y, 2, &ProbeConfig::default(), 1, Property::Pos).unwrap();
        assert!(p.training_accuracy >= 0.99);
        assert!(p.loss_curve.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::zeros((3, 2));
        assert_eq!(
            train_probe(&x, &[1, 1, 1], 3, &ProbeConfig::default(), 1, Property::Pos),
            Err(MliError::DegenerateLabels)
        );
    }
}
