//! Feature extraction, MinHash sketches and the banded LSH index used to
//! build candidate pools.

mod features;
mod lsh;
mod minhash;

use thiserror::Error;

use crate::tree::ParseError;

pub use features::{exact_jaccard, extract_features, normalize_token, FeatureSet};
pub use lsh::{
    band_threshold, collision_probability, lsh_params, LshIndex, LSH_FORMAT_VERSION,
};
pub use minhash::{minhash, HashFamily, MinHashSignature, MulAddShift};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BucketingError {
    #[error("cannot sign an empty feature set")]
    EmptyFeatureSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no band factorization for P = {0}")]
    NoFactorization(usize),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("signature length {got} does not match index P = {expected}")]
    SignatureLengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("io: {0}")]
    Io(String),
    #[error("index file line {line}: {msg}")]
    Format { line: usize, msg: String },
}
