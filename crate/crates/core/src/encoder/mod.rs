//! Small word-level transformer encoder producing mean-pooled sentence
//! embeddings, with per-layer hidden states and an additive injection hook.

mod io;
mod loss;
mod model;
mod tokenizer;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::sha256_hex;
use crate::mli::InjectionDirection;

pub use loss::{cosine, infonce_loss, infonce_with_grad, InfoNceGrad};
pub use model::{HiddenStates, HookTrace, Layout, Segment, TensorKind, LAYER_TENSORS};
pub use tokenizer::{split_words, tokenize, Vocab, UNK, UNK_TOKEN};
pub use train::{
    group_loss, group_loss_grad, mean_group_loss, train, write_loss_csv, AdamW, EpochLoss, TrainConfig, TrainReport,
};
pub use io::ENCODER_FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error("input has no tokens")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("injection layer {layer} outside 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("zero-norm embedding")]
    ZeroVector,
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at group `{0}`")]
    NonFiniteLoss(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("no training groups")]
    NoGroups,
    #[error("io: {0}")]
    Io(String),
    #[error("parameter file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d: 64,
            layers: 4,
            heads: 4,
            ffn: 128,
            max_len: 64,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if self.d == 0 || self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return bad(format!("d={} must be a positive multiple of heads={}", self.d, self.heads));
        }
        if self.layers < 2 {
            return bad(format!("layers={} must be at least 2", self.layers));
        }
        if self.ffn == 0 || self.max_len == 0 {
            return bad("ffn and max_len must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    vocab: Vocab,
    layout: Layout,
    params: Vec<f64>,
}

impl Encoder {
    /// Freshly initialized encoder; init depends only on `config.seed`.
    pub fn new(config: EncoderConfig, vocab: Vocab) -> Result<Self, EncoderError> {
        config.validate()?;
        let layout = Layout::new(&config, vocab.len());
        let params = model::init_params(&config, &layout);
        Ok(Encoder { config, vocab, layout, params })
    }

    pub fn from_params(
        config: EncoderConfig,
        vocab: Vocab,
        params: Vec<f64>,
    ) -> Result<Self, EncoderError> {
        config.validate()?;
        let layout = Layout::new(&config, vocab.len());
        if params.len() != layout.total {
            return Err(EncoderError::DimensionMismatch { expected: layout.total, got: params.len() });
        }
        Ok(Encoder { config, vocab, layout, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn dim(&self) -> usize {
        self.config.d
    }

    pub fn layers(&self) -> usize {
        self.config.layers
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>, EncoderError> {
        let ids = tokenize(text, &self.vocab, self.config.max_len);
        if ids.is_empty() {
            return Err(EncoderError::EmptyInput);
        }
        Ok(ids)
    }

    /// Ids for pre-split tokens, bypassing the tokenizer. Truncated at
    /// `max_len`.
    pub fn token_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens
            .iter()
            .take(self.config.max_len)
            .map(|t| self.vocab.id(&t.as_ref().to_lowercase()))
            .collect()
    }

    pub(crate) fn check_ids(&self, ids: &[u32]) -> Result<(), EncoderError> {
        if ids.is_empty() {
            return Err(EncoderError::EmptyInput);
        }
        if ids.len() > self.config.max_len {
            return Err(EncoderError::DimensionMismatch {
                expected: self.config.max_len,
                got: ids.len(),
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.vocab.len()) {
            return Err(EncoderError::DimensionMismatch { expected: self.vocab.len(), got: bad as usize });
        }
        Ok(())
    }

    pub fn forward_ids(
        &self,
        ids: &[u32],
        injection: Option<&InjectionDirection>,
    ) -> Result<HiddenStates, EncoderError> {
        self.check_ids(ids)?;
        model::check_injection(&self.config, injection)?;
        Ok(model::forward(&self.config, &self.layout, &self.params, ids, injection, false).hidden)
    }

    pub fn forward(
        &self,
        text: &str,
        injection: Option<&InjectionDirection>,
    ) -> Result<HiddenStates, EncoderError> {
        self.forward_ids(&self.tokenize(text)?, injection)
    }

    /// Forward pass that also returns the residual stream just before and
    /// just after the injection hook.
    pub fn forward_instrumented(
        &self,
        ids: &[u32],
        injection: Option<&InjectionDirection>,
    ) -> Result<(HiddenStates, Option<HookTrace>), EncoderError> {
        self.check_ids(ids)?;
        model::check_injection(&self.config, injection)?;
        let t = model::forward(&self.config, &self.layout, &self.params, ids, injection, true);
        Ok((t.hidden, t.hook))
    }

    pub fn embed_ids(
        &self,
        ids: &[u32],
        injection: Option<&InjectionDirection>,
    ) -> Result<Vec<f64>, EncoderError> {
        Ok(self.forward_ids(ids, injection)?.pooled())
    }

    /// Mean-pooled sentence embedding.
    pub fn embed(
        &self,
        text: &str,
        injection: Option<&InjectionDirection>,
    ) -> Result<Vec<f64>, EncoderError> {
        self.embed_ids(&self.tokenize(text)?, injection)
    }

    /// Forward pass keeping the activations `backprop` needs.
    pub(crate) fn trace(&self, ids: &[u32]) -> model::Trace {
        model::forward(&self.config, &self.layout, &self.params, ids, None, false)
    }

    /// Accumulates into `grad` the parameter gradient of a scalar whose
    /// derivative with respect to the pooled embedding is `d_emb`.
    pub(crate) fn backprop(&self, trace: &model::Trace, d_emb: &[f64], grad: &mut [f64]) {
        model::backward(&self.config, &self.layout, &self.params, trace, d_emb, grad);
    }

    /// Hex SHA-256 of the serialized parameter file.
    pub fn params_hash(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Encoder {
        let vocab = Vocab::build(["remind me to call mom tomorrow", "what is the weather"]);
        let cfg = EncoderConfig { d: 8, layers: 2, heads: 2, ffn: 16, max_len: 8, seed: 1 };
        Encoder::new(cfg, vocab).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = EncoderConfig::default();
        assert!(c.validate().is_ok());
        c.heads = 3;
        assert!(c.validate().is_err());
        c = EncoderConfig { layers: 1, ..EncoderConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn forward_shapes() {
        let e = small();
        let h = e.forward("remind me tomorrow", None).unwrap();
        assert_eq!(h.layers.len(), 3);
        assert_eq!(h.tokens(), 3);
        assert!(h.layers.iter().all(|m| m.dim() == (3, 8) && m.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn deterministic() {
        assert_eq!(small().embed("what is the weather", None), small().embed("what is the weather", None));
    }

    #[test]
    fn single_token_embedding_is_its_output_row() {
        let e = small();
        let h = e.forward("mom", None).unwrap();
        assert_eq!(h.pooled(), h.output.row(0).to_vec());
    }

    #[test]
    fn order_matters() {
        let e = small();
        assert_ne!(e.embed("call mom", None).unwrap(), e.embed("mom call", None).unwrap());
    }

    #[test]
    fn empty_input() {
        assert_eq!(small().embed("   ", None), Err(EncoderError::EmptyInput));
    }
}
