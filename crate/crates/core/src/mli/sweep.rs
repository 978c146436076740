use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{collect_states, extract_direction, train_probe, InjectionDirection, MliError, ProbeConfig, Property, TokenLabelCorpus};
use crate::corpus::Corpus;
use crate::encoder::Encoder;
use crate::retrieval::{build_index, evaluate_with_targets, DevQuery, Scorer, StructuralTargets};

pub const DEFAULT_LAMBDAS: [f64; 9] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0];

/// `{⌈L/3⌉, ⌈2L/3⌉, L}` without duplicates.
pub fn default_layers(layers: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [layers.div_ceil(3), (2 * layers).div_ceil(3), layers]
        .into_iter()
        .filter(|&l| l >= 1)
        .collect();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub layers: Vec<usize>,
    pub properties: Vec<Property>,
    pub lambdas: Vec<f64>,
}

impl SweepGrid {
    pub fn default_for(layers: usize) -> Self {
        SweepGrid {
            layers: default_layers(layers),
            properties: Property::ALL.to_vec(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k: usize,
    pub probe: ProbeConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { k: 5, probe: ProbeConfig::default() }
    }
}

/// One grid cell. The baseline row has no property and λ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub layer: usize,
    pub property: Option<Property>,
    pub lambda: f64,
    pub score: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub property: Property,
    pub layer: usize,
    pub training_accuracy: f64,
    pub final_loss: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    /// `None` when no injected cell beats the uninjected baseline.
    pub best: Option<InjectionDirection>,
    pub best_score: f64,
    pub baseline_score: f64,
    pub rows: Vec<SweepRow>,
    pub probes: Vec<ProbeSummary>,
    /// Extracted directions with λ = 0, one per trained probe.
    pub directions: Vec<InjectionDirection>,
}

/// Mean `sim_struct@k` of dev queries against the bank under `injection`.
pub fn score_config(
    encoder: &Encoder,
    bank: &Corpus,
    dev: &[DevQuery],
    targets: &StructuralTargets,
    injection: Option<&InjectionDirection>,
    k: usize,
) -> Result<f64, MliError> {
    let index = build_index(bank, encoder, injection).map_err(|e| MliError::Retrieval(e.to_string()))?;
    let m = evaluate_with_targets(Scorer::Dense { index: &index, encoder }, dev, targets, k)
        .map_err(|e| MliError::Retrieval(e.to_string()))?;
    Ok(m.mean_sim_struct_at_k)
}

/// Scores every (layer, property, λ ≠ 0) cell plus the uninjected baseline
/// and returns the best. Ties keep the earlier row, so the baseline wins
/// ties and the best score is never below it. Probe or cell failures are
/// recorded in the row status.
pub fn sweep(
    dev: &[DevQuery],
    bank: &Corpus,
    encoder: &Encoder,
    label_corpora: &BTreeMap<Property, TokenLabelCorpus>,
    grid: &SweepGrid,
    cfg: &SweepConfig,
) -> Result<SweepOutcome, MliError> {
    for &layer in &grid.layers {
        if layer < 1 || layer > encoder.layers() {
            return Err(MliError::LayerOutOfRange { layer, max: encoder.layers() });
        }
    }
    let lambdas: Vec<f64> = grid.lambdas.iter().copied().filter(|&l| l != 0.0).collect();
    if !lambdas.is_empty() {
        for p in &grid.properties {
            if !label_corpora.contains_key(p) {
                return Err(MliError::MissingCorpus(*p));
            }
        }
    }
    let targets = StructuralTargets::new(dev, bank);
    let baseline_score = score_config(encoder, bank, dev, &targets, None, cfg.k)?;
    let mut rows = vec![SweepRow {
        layer: 0,
        property: None,
        lambda: 0.0,
        score: Some(baseline_score),
        status: "baseline".into(),
    }];
    if lambdas.is_empty() {
        return Ok(SweepOutcome {
            best: None,
            best_score: baseline_score,
            baseline_score,
            rows,
            probes: vec![],
            directions: vec![],
        });
    }

    let pairs: Vec<(usize, Property)> = grid
        .layers
        .iter()
        .flat_map(|&l| grid.properties.iter().map(move |&p| (l, p)))
        .collect();
    let trained: Vec<Result<(InjectionDirection, ProbeSummary), String>> = pairs
        .par_iter()
        .map(|&(layer, p)| {
            let corpus = &label_corpora[&p];
            let run = || -> Result<_, MliError> {
                let (x, y) = collect_states(corpus, encoder, layer)?;
                let probe = train_probe(&x, &y, corpus.label_set.len(), &cfg.probe, layer, p)?;
                let dir = extract_direction(&probe)?;
                let sigma = super::power_iteration(probe.w.view())?.sigma;
                let summary = ProbeSummary {
                    property: p,
                    layer,
                    training_accuracy: probe.training_accuracy,
                    final_loss: *probe.loss_curve.last().unwrap(),
                    sigma,
                };
                Ok((dir, summary))
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let cells: Vec<(usize, f64)> = (0..pairs.len())
        .flat_map(|i| lambdas.iter().map(move |&l| (i, l)))
        .collect();
    let scored: Vec<Result<f64, String>> = cells
        .par_iter()
        .map(|&(i, lambda)| match &trained[i] {
            Ok((dir, _)) => score_config(encoder, bank, dev, &targets, Some(&dir.with_lambda(lambda)), cfg.k)
                .map_err(|e| e.to_string()),
            Err(e) => Err(format!("probe failed: {e}")),
        })
        .collect();

    let mut best: Option<InjectionDirection> = None;
    let mut best_score = baseline_score;
    for (&(i, lambda), res) in cells.iter().zip(scored) {
        let (layer, p) = pairs[i];
        match res {
            Ok(score) => {
                if score > best_score {
                    best_score = score;
                    best = trained[i].as_ref().ok().map(|(d, _)| d.with_lambda(lambda));
                }
                rows.push(SweepRow { layer, property: Some(p), lambda, score: Some(score), status: "ok".into() });
            }
            Err(e) => {
                log::warn!("sweep cell layer={layer} property={p} lambda={lambda} failed: {e}");
                rows.push(SweepRow { layer, property: Some(p), lambda, score: None, status: e });
            }
        }
    }
    let (directions, probes) = trained.into_iter().filter_map(Result::ok).unzip();
    Ok(SweepOutcome { best, best_score, baseline_score, rows, probes, directions })
}

/// `layer,property,lambda,score,status` with `none` for the baseline property.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "layer,property,lambda,score,status")?;
    for r in rows {
        let status = r.status.replace(['\n', ','], ";");
        writeln!(
            w,
            "{},{},{},{},{}",
            r.layer,
            r.property.map_or("none", Property::as_str),
            r.lambda,
            r.score.map_or(String::new(), |s| s.to_string()),
            status
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_defaults() {
        assert_eq!(default_layers(12), vec![4, 8, 12]);
        assert_eq!(default_layers(4), vec![2, 3, 4]);
        assert_eq!(default_layers(2), vec![1, 2]);
        assert_eq!(default_layers(1), vec![1]);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            SweepRow { layer: 0, property: None, lambda: 0.0, score: Some(0.5), status: "baseline".into() },
            SweepRow { layer: 2, property: Some(Property::Pt), lambda: 1.5, score: None, status: "bad, x".into() },
        ];
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &rows).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "layer,property,lambda,score,status\n0,none,0,0.5,baseline\n2,PT,1.5,,bad; x\n"
        );
    }
}
