//! Middle-layer injection: linear probes over intermediate token states, the
//! dominant probe direction, and the dev-set sweep over (layer, property, λ).

mod direction;
mod labels;
mod probe;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::EncoderError;
use crate::tree::ParseError;

pub use direction::{extract_direction, power_iteration, PowerIteration};
pub use labels::{default_label_set, parse_token_labels, read_label_set, TokenLabelCorpus};
pub use probe::{collect_states, probe_loss_and_grad, train_probe, Probe, ProbeConfig};
pub use sweep::{ProbeSummary, 
    default_layers, score_config, sweep, write_sweep_csv, SweepConfig, SweepGrid, SweepOutcome,
    SweepRow, DEFAULT_LAMBDAS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "POS")]
    Pos,
    #[serde(rename = "DEPS")]
    Deps,
    #[serde(rename = "PT")]
    Pt,
}

impl Property {
    pub const ALL: [Property; 3] = [Property::Pos, Property::Deps, Property::Pt];

    pub fn as_str(self) -> &'static str {
        match self {
            Property::Pos => "POS",
            Property::Deps => "DEPS",
            Property::Pt => "PT",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Property {
    type Err = MliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "POS" => Ok(Property::Pos),
            "DEPS" => Ok(Property::Deps),
            "PT" => Ok(Property::Pt),
            _ => Err(MliError::UnknownProperty(s.to_string())),
        }
    }
}

pub const DIRECTION_FORMAT_VERSION: u32 = 1;

/// Unit direction `u` added as `λ·u` to every token row after layer `layer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionDirection {
    pub property: Property,
    pub layer: usize,
    pub lambda: f64,
    pub u: Vec<f64>,
}

impl InjectionDirection {
    pub fn with_lambda(&self, lambda: f64) -> Self {
        InjectionDirection { lambda, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Versioned<'a> {
            format_version: u32,
            #[serde(flatten)]
            dir: &'a InjectionDirection,
        }
        serde_json::to_string_pretty(&Versioned {
            format_version: DIRECTION_FORMAT_VERSION,
            dir: self,
        })
        .expect("direction serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MliError> {
        #[derive(Deserialize)]
        struct Versioned {
            format_version: u32,
            #[serde(flatten)]
            dir: InjectionDirection,
        }
        let v: Versioned =
            serde_json::from_str(text).map_err(|e| MliError::Format { line: 0, msg: e.to_string() })?;
        if v.format_version != DIRECTION_FORMAT_VERSION {
            return Err(MliError::Format {
                line: 0,
                msg: format!("unsupported direction format version {}", v.format_version),
            });
        }
        Ok(v.dir)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MliError {
    #[error("label `{label}` is not in the {property} label set")]
    LabelSetMismatch { label: String, property: Property },
    #[error("sentence {0} is empty")]
    EmptySentence(usize),
    #[error("sentence {sentence}: {tokens} tokens but {labels} labels")]
    LengthMismatch { sentence: usize, tokens: usize, labels: usize },
    #[error("probe needs at least two distinct labels")]
    DegenerateLabels,
    #[error("probe weight matrix is zero or non-finite")]
    ZeroMatrix,
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("layer {layer} outside 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("no probe corpus for {0}")]
    MissingCorpus(Property),
    #[error("dev query `{id}`: {source}")]
    DevParse {
        id: String,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("{0}")]
    Retrieval(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_names() {
        for p in Property::ALL {
            assert_eq!(p.as_str().parse::<Property>().unwrap(), p);
        }
        assert!("tense".parse::<Property>().is_err());
    }

    #[test]
    fn direction_json_round_trip() {
        let d = InjectionDirection {
            property: Property::Deps,
            layer: 2,
            lambda: 1.5,
            u: vec![0.6, -0.8, 1e-17],
        };
        let text = d.to_json();
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(InjectionDirection::from_json(&text).unwrap(), d);
    }
}
