use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{BucketingError, FeatureSet, HashFamily, MinHashSignature};
use crate::hashing::hash_words;

pub const LSH_FORMAT_VERSION: u32 = 1;

/// Approximate collision threshold `(1/b)^(1/r)` of a band geometry.
pub fn band_threshold(b: usize, r: usize) -> f64 {
    (1.0 / b as f64).powf(1.0 / r as f64)
}

/// Probability that two sets with Jaccard `j` share at least one band.
pub fn collision_probability(j: f64, b: usize, r: usize) -> f64 {
    1.0 - (1.0 - j.powi(r as i32)).powi(b as i32)
}

/// Picks the factorization `b·r = P` whose threshold is closest to `tau`,
/// preferring larger `r` on ties.
pub fn lsh_params(tau: f64, p: usize) -> Result<(usize, usize), BucketingError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(BucketingError::InvalidParameter(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    if p < 2 {
        return Err(BucketingError::InvalidParameter(format!(
            "permutation count must be at least 2, got {p}"
        )));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for r in 1..=p {
        if !p.is_multiple_of(r) {
            continue;
        }
        let b = p / r;
        let err = (band_threshold(b, r) - tau).abs();
        // r increases through the loop, so `<=` hands ties to the larger r.
        if best.is_none_or(|(e, _, _)| err <= e) {
            best = Some((err, b, r));
        }
    }
    best.map(|(_, b, r)| (b, r))
        .ok_or(BucketingError::NoFactorization(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    #[serde(rename = "P")]
    p: usize,
    b: usize,
    r: usize,
    tau: f64,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Record {
    id: String,
    sig: Vec<u64>,
}

/// Banded MinHash index. Buckets hold insertion positions; query results are
/// returned in insertion order.
#[derive(Debug, Clone)]
pub struct LshIndex {
    p: usize,
    b: usize,
    r: usize,
    tau: f64,
    seed: u64,
    family: HashFamily,
    ids: Vec<String>,
    positions: HashMap<String, usize>,
    sigs: Vec<MinHashSignature>,
    bands: Vec<HashMap<u64, Vec<usize>>>,
}

impl LshIndex {
    /// Builds an empty index, choosing the band geometry from `tau`.
    pub fn new(p: usize, tau: f64, seed: u64) -> Result<Self, BucketingError> {
        let (b, r) = lsh_params(tau, p)?;
        let achieved = band_threshold(b, r);
        if (achieved - tau).abs() > 0.05 {
            log::warn!(
                "no band geometry for P={p} reaches tau={tau}; using b={b}, r={r} (threshold {achieved:.3})"
            );
        }
        Self::with_geometry(b, r, tau, seed)
    }

    pub fn with_geometry(b: usize, r: usize, tau: f64, seed: u64) -> Result<Self, BucketingError> {
        if b == 0 || r == 0 {
            return Err(BucketingError::InvalidParameter(
                "band count and rows per band must be positive".into(),
            ));
        }
        let p = b * r;
        Ok(LshIndex {
            p,
            b,
            r,
            tau,
            seed,
            family: HashFamily::new(p, seed),
            ids: Vec::new(),
            positions: HashMap::new(),
            sigs: Vec::new(),
            bands: vec![HashMap::new(); b],
        })
    }

    pub fn permutations(&self) -> usize {
        self.p
    }

    pub fn bands(&self) -> usize {
        self.b
    }

    pub fn rows(&self) -> usize {
        self.r
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn threshold(&self) -> f64 {
        band_threshold(self.b, self.r)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn signature_of(&self, id: &str) -> Option<&MinHashSignature> {
        self.position(id).map(|i| &self.sigs[i])
    }

    /// Signs a feature set with this index's hash family.
    pub fn sign(&self, features: &FeatureSet) -> Result<MinHashSignature, BucketingError> {
        self.family.signature(features)
    }

    fn digests<'a>(&'a self, sig: &'a MinHashSignature) -> impl Iterator<Item = u64> + 'a {
        sig.values.chunks(self.r).map(hash_words)
    }

    fn check_len(&self, sig: &MinHashSignature) -> Result<(), BucketingError> {
        if sig.len() != self.p {
            return Err(BucketingError::SignatureLengthMismatch {
                expected: self.p,
                got: sig.len(),
            });
        }
        Ok(())
    }

    pub fn insert(&mut self, id: &str, sig: MinHashSignature) -> Result<(), BucketingError> {
        self.check_len(&sig)?;
        if self.positions.contains_key(id) {
            return Err(BucketingError::DuplicateId(id.to_string()));
        }
        let pos = self.ids.len();
        let digests: Vec<u64> = self.digests(&sig).collect();
        for (band, d) in self.bands.iter_mut().zip(digests) {
            band.entry(d).or_default().push(pos);
        }
        self.ids.push(id.to_string());
        self.positions.insert(id.to_string(), pos);
        self.sigs.push(sig);
        Ok(())
    }

    /// Positions colliding with `sig` in at least one band, ascending.
    pub fn query_positions(
        &self,
        sig: &MinHashSignature,
        exclude: Option<&str>,
    ) -> Result<Vec<usize>, BucketingError> {
        self.check_len(sig)?;
        let skip = exclude.and_then(|id| self.position(id));
        let mut hit = vec![false; self.ids.len()];
        for (band, d) in self.bands.iter().zip(self.digests(sig)) {
            if let Some(members) = band.get(&d) {
                for &m in members {
                    hit[m] = true;
                }
            }
        }
        Ok(hit
            .iter()
            .enumerate()
            .filter(|&(i, &h)| h && Some(i) != skip)
            .map(|(i, _)| i)
            .collect())
    }

    /// Candidate pool for `sig`: ids colliding in at least one band.
    pub fn query(
        &self,
        sig: &MinHashSignature,
        exclude: Option<&str>,
    ) -> Result<Vec<String>, BucketingError> {
        Ok(self
            .query_positions(sig, exclude)?
            .into_iter()
            .map(|i| self.ids[i].clone())
            .collect())
    }

    /// Pool of an indexed record, excluding itself.
    pub fn pool_of(&self, id: &str) -> Result<Vec<usize>, BucketingError> {
        let pos = self
            .position(id)
            .ok_or_else(|| BucketingError::UnknownId(id.to_string()))?;
        self.query_positions(&self.sigs[pos], Some(id))
    }

    /// Writes the index as JSON lines: one header, then one record per id.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), BucketingError> {
        let header = Header {
            format_version: LSH_FORMAT_VERSION,
            p: self.p,
            b: self.b,
            r: self.r,
            tau: self.tau,
            seed: self.seed,
        };
        let io = |e: std::io::Error| BucketingError::Io(e.to_string());
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
        for (id, sig) in self.ids.iter().zip(&self.sigs) {
            let rec = Record {
                id: id.clone(),
                sig: sig.values.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&rec).expect("record serializes")).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, BucketingError> {
        let mut lines = r.lines().enumerate();
        let io = |e: std::io::Error| BucketingError::Io(e.to_string());
        let (_, first) = lines
            .next()
            .ok_or_else(|| BucketingError::Format { line: 1, msg: "missing header".into() })?;
        let header: Header = serde_json::from_str(&first.map_err(io)?)
            .map_err(|e| BucketingError::Format { line: 1, msg: e.to_string() })?;
        if header.format_version != LSH_FORMAT_VERSION {
            return Err(BucketingError::Format {
                line: 1,
                msg: format!("unsupported format version {}", header.format_version),
            });
        }
        if header.b * header.r != header.p {
            return Err(BucketingError::Format {
                line: 1,
                msg: format!("b*r = {} does not match P = {}", header.b * header.r, header.p),
            });
        }
        let mut index = Self::with_geometry(header.b, header.r, header.tau, header.seed)?;
        for (n, line) in lines {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| BucketingError::Format { line: n + 1, msg: e.to_string() })?;
            index.insert(&rec.id, MinHashSignature { values: rec.sig })?;
        }
        Ok(index)
    }
}
