//! Parameter files: `STAREENC`, a little-endian u32 version, a u64 header
//! length, a JSON header (config, vocabulary, tensor table), then every
//! parameter as a little-endian f64 in layout order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Encoder, EncoderConfig, EncoderError, Vocab};

pub const ENCODER_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"STAREENC";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: EncoderConfig,
    vocab: Vocab,
    tensors: Vec<TensorEntry>,
    n_params: usize,
}

fn fmt_err(msg: impl Into<String>) -> EncoderError {
    EncoderError::Format(msg.into())
}

impl Encoder {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.config,
            vocab: self.vocab.clone(),
            tensors: self
                .layout
                .segments
                .iter()
                .map(|s| TensorEntry { name: s.name.clone(), rows: s.rows, cols: s.cols })
                .collect(),
            n_params: self.params.len(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + json.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&ENCODER_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(fmt_err("not an encoder parameter file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != ENCODER_FORMAT_VERSION {
            return Err(fmt_err(format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..).ok_or_else(|| fmt_err("truncated header"))?;
        if body.len() < hlen {
            return Err(fmt_err("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&body[..hlen]).map_err(|e| fmt_err(e.to_string()))?;
        let data = &body[hlen..];
        if data.len() != 8 * header.n_params {
            return Err(fmt_err(format!(
                "expected {} parameters, found {} bytes",
                header.n_params,
                data.len()
            )));
        }
        let params: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let enc = Encoder::from_params(header.config, header.vocab, params)?;
        let same_table = enc.layout.segments.len() == header.tensors.len()
            && enc
                .layout
                .segments
                .iter()
                .zip(&header.tensors)
                .all(|(s, t)| s.name == t.name && s.rows == t.rows && s.cols == t.cols);
        if !same_table {
            return Err(fmt_err("tensor table does not match the configured layout"));
        }
        Ok(enc)
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        fs::write(path, self.to_bytes()).map_err(|e| EncoderError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let bytes = fs::read(path).map_err(|e| EncoderError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let vocab = Vocab::build(["a b c"]);
        let cfg = EncoderConfig { d: 4, layers: 2, heads: 2, ffn: 8, max_len: 4, seed: 9 };
        let e = Encoder::new(cfg, vocab).unwrap();
        let bytes = e.to_bytes();
        let back = Encoder::from_bytes(&bytes).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_bytes(), bytes);
        assert!(Encoder::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Encoder::from_bytes(b"garbage garbage garbage").is_err());
    }
}
