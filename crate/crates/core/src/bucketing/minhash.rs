use serde::{Deserialize, Serialize};

use super::{BucketingError, FeatureSet};
use crate::hashing::{hash_str, SplitMix64};

/// One member of the multiply-add-shift family: `h(x) = ((a·x + b) mod 2^128) >> 64`.
/// Pairwise independent for 64-bit keys with 64-bit output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MulAddShift {
    a: u128,
    b: u128,
}

impl MulAddShift {
    pub fn hash(&self, x: u64) -> u64 {
        (self.a.wrapping_mul(x as u128).wrapping_add(self.b) >> 64) as u64
    }
}

/// The `P` hash functions used by one index, derived deterministically from
/// `(seed, i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    seed: u64,
    members: Vec<MulAddShift>,
}

impl HashFamily {
    pub fn new(permutations: usize, seed: u64) -> Self {
        let members = (0..permutations as u64)
            .map(|i| {
                let mut s = SplitMix64::new(seed ^ i.wrapping_mul(0xa076_1d64_78bd_642f));
                let a = ((s.next_u64() as u128) << 64) | s.next_u64() as u128;
                let b = ((s.next_u64() as u128) << 64) | s.next_u64() as u128;
                MulAddShift { a, b }
            })
            .collect();
        HashFamily { seed, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn member(&self, i: usize) -> &MulAddShift {
        &self.members[i]
    }

    pub fn signature(&self, features: &FeatureSet) -> Result<MinHashSignature, BucketingError> {
        if features.is_empty() {
            return Err(BucketingError::EmptyFeatureSet);
        }
        let keys: Vec<u64> = features.iter().map(hash_str).collect();
        let values = self
            .members
            .iter()
            .map(|h| keys.iter().map(|&k| h.hash(k)).min().unwrap())
            .collect();
        Ok(MinHashSignature { values })
    }
}

/// Per-permutation minima of a feature set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
}

impl MinHashSignature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of agreeing positions; an unbiased Jaccard estimate.
    pub fn estimate_jaccard(&self, other: &MinHashSignature) -> f64 {
        assert_eq!(self.len(), other.len(), "signature lengths differ");
        let same = self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.len() as f64
    }
}

/// Convenience wrapper building the family on the fly.
pub fn minhash(
    features: &FeatureSet,
    permutations: usize,
    seed: u64,
) -> Result<MinHashSignature, BucketingError> {
    if permutations == 0 {
        return Err(BucketingError::InvalidParameter(
            "permutation count must be at least 1".into(),
        ));
    }
    HashFamily::new(permutations, seed).signature(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> FeatureSet {
        items.iter().copied().collect()
    }

    #[test]
    fn deterministic() {
        let f = set(&["a", "b", "c"]);
        assert_eq!(minhash(&f, 64, 3).unwrap(), minhash(&f, 64, 3).unwrap());
        assert_ne!(minhash(&f, 64, 3).unwrap(), minhash(&f, 64, 4).unwrap());
    }

    #[test]
    fn singleton_is_member_hash() {
        let fam = HashFamily::new(16, 9);
        let sig = fam.signature(&set(&["x"])).unwrap();
        for i in 0..16 {
            assert_eq!(sig.values[i], fam.member(i).hash(hash_str("x")));
        }
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(
            minhash(&FeatureSet::new(), 8, 0),
            Err(BucketingError::EmptyFeatureSet)
        );
        assert!(minhash(&set(&["a"]), 0, 0).is_err());
    }

    #[test]
    fn identical_sets_agree_everywhere() {
        let a = minhash(&set(&["a", "b"]), 128, 1).unwrap();
        assert_eq!(a.estimate_jaccard(&a), 1.0);
    }
}
