use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::encoder::{EncoderConfig, TrainConfig};
use crate::mli::{default_layers, ProbeConfig, Property, SweepGrid, DEFAULT_LAMBDAS};
use crate::retrieval::PromptTemplate;
use crate::tree::ParseDialect;

/// Prefix of environment overrides, as in `STARE_TRAINING_LR=1e-4`.
pub const ENV_PREFIX: &str = "STARE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    pub dialect: ParseDialect,
    #[serde(default)]
    pub anonymize_leaves: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BucketingSection {
    pub permutations: usize,
    pub tau: f64,
    pub seed: u64,
}

impl Default for BucketingSection {
    fn default() -> Self {
        BucketingSection { permutations: 128, tau: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningSection {
    pub n_hard: usize,
    pub n_rand: usize,
    pub seed: u64,
}

impl Default for MiningSection {
    fn default() -> Self {
        MiningSection { n_hard: 3, n_rand: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MliSection {
    /// Empty means `{⌈L/3⌉, ⌈2L/3⌉, L}`.
    pub layers: Vec<usize>,
    pub properties: Vec<Property>,
    pub lambdas: Vec<f64>,
    pub probe_epochs: usize,
    pub probe_lr: f64,
    pub probe_l2: f64,
    /// Token-label corpus per property name.
    pub label_corpora: BTreeMap<String, PathBuf>,
    /// Label-set file per property name; built-in sets otherwise.
    pub label_sets: BTreeMap<String, PathBuf>,
}

impl Default for MliSection {
    fn default() -> Self {
        let p = ProbeConfig::default();
        MliSection {
            layers: vec![],
            properties: Property::ALL.to_vec(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            probe_epochs: p.epochs,
            probe_lr: p.lr,
            probe_l2: p.l2,
            label_corpora: BTreeMap::new(),
            label_sets: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalSection {
    pub k: usize,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        RetrievalSection { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptSection {
    pub task_name: String,
    pub template: PromptTemplate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_file: Option<PathBuf>,
}

impl Default for PromptSection {
    fn default() -> Self {
        PromptSection { task_name: "MTop".into(), template: PromptTemplate::Conversational, schema_file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// One run's configuration. Relative paths resolve against the directory
/// of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSection,
    #[serde(default)]
    pub bucketing: BucketingSection,
    #[serde(default)]
    pub mining: MiningSection,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub mli: MliSection,
    #[serde(default)]
    pub retrieval: RetrievalSection,
    #[serde(default)]
    pub prompt: PromptSection,
    pub output: OutputSection,
}

fn invalid(field: &str, msg: impl Into<String>) -> PipelineError {
    PipelineError::Config { field: field.to_string(), msg: msg.into() }
}

/// Parses an override value as a TOML scalar or array, falling back to a
/// plain string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

const SECTIONS: [&str; 9] =
    ["data", "bucketing", "mining", "encoder", "training", "mli", "retrieval", "prompt", "output"];

fn apply_overrides(
    table: &mut toml::Table,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<(), PipelineError> {
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (name, raw) in vars {
        let rest = name[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some((section, key)) = rest.split_once('_') else {
            return Err(invalid(&name, "expected STARE_<SECTION>_<KEY>"));
        };
        if !SECTIONS.contains(&section) || key.is_empty() {
            return Err(invalid(&name, format!("unknown section `{section}`")));
        }
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(sec) = entry else {
            return Err(invalid(section, "must be a table"));
        };
        log::info!("override {section}.{key} from {name}");
        sec.insert(key.to_string(), env_value(&raw));
    }
    Ok(())
}

impl PipelineConfig {
    /// Reads `path` with overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::from_toml(&text, base, std::env::vars())?;
        cfg.check_files()?;
        Ok(cfg)
    }

    /// Parses, applies overrides, resolves paths against `base` and
    /// validates numeric ranges. File existence is checked by `load`.
    pub fn from_toml(
        text: &str,
        base: &Path,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, PipelineError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| invalid("config", e.message().to_string()))?;
        apply_overrides(&mut table, env)?;
        let mut cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid("config", e.message().to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        if let Some(d) = &mut self.data.dev {
            fix(d);
        }
        self.mli.label_corpora.values_mut().for_each(fix);
        self.mli.label_sets.values_mut().for_each(fix);
        if let Some(s) = &mut self.prompt.schema_file {
            fix(s);
        }
        fix(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let b = &self.bucketing;
        if b.permutations == 0 {
            return Err(invalid("bucketing.permutations", "must be at least 1"));
        }
        if !(b.tau > 0.0 && b.tau < 1.0) {
            return Err(invalid("bucketing.tau", format!("{} is outside (0, 1)", b.tau)));
        }
        let e = &self.encoder;
        for (field, v) in [
            ("encoder.d", e.d),
            ("encoder.layers", e.layers),
            ("encoder.heads", e.heads),
            ("encoder.ffn", e.ffn),
            ("encoder.max_len", e.max_len),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        if !e.d.is_multiple_of(e.heads) {
            return Err(invalid("encoder.heads", format!("{} does not divide d = {}", e.heads, e.d)));
        }
        let t = &self.training;
        if t.epochs > 3 {
            return Err(invalid("training.epochs", format!("{} exceeds the maximum of 3", t.epochs)));
        }
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(invalid("training.lr", "must be positive and finite"));
        }
        if !(t.weight_decay >= 0.0 && t.weight_decay.is_finite()) {
            return Err(invalid("training.weight_decay", "must be non-negative"));
        }
        if t.batch == 0 {
            return Err(invalid("training.batch", "must be at least 1"));
        }
        if !(t.temperature > 0.0 && t.temperature.is_finite()) {
            return Err(invalid("training.temperature", "must be positive"));
        }
        if !(0.0..1.0).contains(&t.beta1) {
            return Err(invalid("training.beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&t.beta2) {
            return Err(invalid("training.beta2", "must lie in [0, 1)"));
        }
        if !(t.eps > 0.0 && t.eps.is_finite()) {
            return Err(invalid("training.eps", "must be positive"));
        }
        let m = &self.mli;
        if let Some(&l) = m.layers.iter().find(|&&l| l == 0 || l > e.layers) {
            return Err(invalid("mli.layers", format!("layer {l} outside 1..={}", e.layers)));
        }
        if m.lambdas.is_empty() {
            return Err(invalid("mli.lambdas", "must not be empty"));
        }
        if m.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(invalid("mli.lambdas", "must be finite"));
        }
        if !(m.probe_lr > 0.0 && m.probe_lr.is_finite()) {
            return Err(invalid("mli.probe_lr", "must be positive"));
        }
        if !(m.probe_l2 >= 0.0 && m.probe_l2.is_finite()) {
            return Err(invalid("mli.probe_l2", "must be non-negative"));
        }
        for key in m.label_corpora.keys().chain(m.label_sets.keys()) {
            key.parse::<Property>().map_err(|_| invalid("mli.label_corpora", format!("unknown property `{key}`")))?;
        }
        if self.retrieval.k == 0 {
            return Err(invalid("retrieval.k", "must be at least 1"));
        }
        if self.prompt.template == PromptTemplate::SqlSchema && self.prompt.schema_file.is_none() {
            return Err(invalid("prompt.schema_file", "required by the sql_schema template"));
        }
        Ok(())
    }

    /// Every referenced input file must exist.
    pub fn check_files(&self) -> Result<(), PipelineError> {
        let check = |field: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(invalid(field, format!("{} does not exist", p.display())))
            }
        };
        check("data.train", &self.data.train)?;
        if let Some(d) = &self.data.dev {
            check("data.dev", d)?;
        }
        for p in self.mli.label_corpora.values() {
            check("mli.label_corpora", p)?;
        }
        for p in self.mli.label_sets.values() {
            check("mli.label_sets", p)?;
        }
        if let Some(s) = &self.prompt.schema_file {
            check("prompt.schema_file", s)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig { epochs: self.mli.probe_epochs, lr: self.mli.probe_lr, l2: self.mli.probe_l2 }
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        SweepGrid {
            layers: if self.mli.layers.is_empty() {
                default_layers(self.encoder.layers)
            } else {
                self.mli.layers.clone()
            },
            properties: self.mli.properties.clone(),
            lambdas: self.mli.lambdas.clone(),
        }
    }

    pub fn mining_config(&self) -> crate::mining::MiningConfig {
        crate::mining::MiningConfig { n_hard: self.mining.n_hard, n_rand: self.mining.n_rand, seed: self.mining.seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = "[data]\ntrain = \"t.jsonl\"\ndialect = \"bracketed\"\n[output]\ndir = \"out\"\n";

    fn no_env() -> Vec<(String, String)> {
        vec![]
    }

    #[test]
    fn defaults_and_relative_paths() {
        let c = PipelineConfig::from_toml(MIN, Path::new("/base"), no_env()).unwrap();
        assert_eq!(c.data.train, Path::new("/base/t.jsonl"));
        assert_eq!(c.bucketing.tau, 0.5);
        assert_eq!(c.retrieval.k, 5);
        assert_eq!(c.sweep_grid().layers, vec![2, 3, 4]);
    }

    #[test]
    fn env_overrides() {
        let env = vec![
            ("STARE_TRAINING_LR".to_string(), "0.0001".to_string()),
            ("STARE_MLI_LAMBDAS".to_string(), "[0.0, 1.5]".to_string()),
            ("STARE_PROMPT_TASK_NAME".to_string(), "Spider".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ];
        let c = PipelineConfig::from_toml(MIN, Path::new("."), env).unwrap();
        assert_eq!(c.training.lr, 1e-4);
        assert_eq!(c.mli.lambdas, vec![0.0, 1.5]);
        assert_eq!(c.prompt.task_name, "Spider");
    }

    #[test]
    fn field_named_errors() {
        let env = vec![("STARE_BUCKETING_TAU".to_string(), "1.5".to_string())];
        let err = PipelineConfig::from_toml(MIN, Path::new("."), env).unwrap_err();
        assert!(err.to_string().contains("bucketing.tau"), "{err}");
        let err = PipelineConfig::from_toml(&format!("{MIN}[retrieval]\nk = 0\n"), Path::new("."), no_env()).unwrap_err();
        assert!(err.to_string().contains("retrieval.k"));
        let err = PipelineConfig::from_toml(&format!("{MIN}[training]\ntemperature = 0.0\n"), Path::new("."), no_env())
            .unwrap_err();
        assert!(err.to_string().contains("training.temperature"));
        let env = vec![("STARE_NOPE_X".to_string(), "1".to_string())];
        assert!(PipelineConfig::from_toml(MIN, Path::new("."), env).is_err());
    }

    #[test]
    fn archived_form_round_trips() {
        let c = PipelineConfig::from_toml(MIN, Path::new("/b"), no_env()).unwrap();
        let back = PipelineConfig::from_toml(&c.to_toml(), Path::new("/elsewhere"), no_env()).unwrap();
        assert_eq!(back, c);
    }
}
