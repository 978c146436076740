//! Stage commands over a shared config and output directory:
//! bucket → mine → train → mli → eval, plus retrieve, ted and fixture-gen.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bucketing::{BucketingError, LshIndex};
use crate::corpus::{write_records, Corpus, CorpusError};
use crate::distance::{sim_struct, ted_unit};
use crate::encoder::{train, write_loss_csv, Encoder, EncoderError, TrainReport, Vocab};
use crate::fixture;
use crate::mining::{mine_all, read_groups, write_groups, MiningError, MiningReport};
use crate::mli::{
    default_label_set, parse_token_labels, read_label_set, sweep, write_sweep_csv, InjectionDirection, MliError,
    Property, SweepConfig, SweepOutcome,
};
use crate::retrieval::{
    build_index, build_prompt, evaluate_with_targets, topk, Bm25Index, DevQuery, Exemplar, Metrics, PromptSpec,
    RetrievalError, RetrievalIndex, Scorer, StructuralTargets,
};
use crate::tree::{ParseDialect, ParseError};

pub use config::{
    BucketingSection, DataSection, MiningSection, MliSection, OutputSection, PipelineConfig, PromptSection,
    RetrievalSection, ENV_PREFIX,
};

pub const CONFIG_FILE: &str = "config.toml";
pub const LOCK_FILE: &str = ".stare.lock";
pub const LSH_INDEX_FILE: &str = "lsh_index.jsonl";
pub const BUCKET_REPORT_FILE: &str = "bucket_report.json";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const MINING_REPORT_FILE: &str = "mining_report.json";
pub const ENCODER_FILE: &str = "encoder.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const INDEX_FILE: &str = "index.json";
pub const SWEEP_CSV_FILE: &str = "sweep.csv";
pub const SWEEP_JSON_FILE: &str = "sweep.json";
pub const DIRECTION_FILE: &str = "direction.json";
pub const MLI_INDEX_FILE: &str = "index_mli.json";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("{}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("output directory {} is locked by another run", .0.display())]
    Locked(PathBuf),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("missing artifact {}: run `{stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Bucketing(#[from] BucketingError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Mli(#[from] MliError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
}

impl PipelineError {
    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Encoder(EncoderError::NonFiniteLoss(_) | EncoderError::ZeroVector)
            | PipelineError::Mli(MliError::ZeroMatrix | MliError::Encoder(EncoderError::NonFiniteLoss(_))) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(dir.to_path_buf())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes through a temporary file so readers never see partial output.
fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_artifact(path: &Path, stage: &'static str) -> Result<String, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::MissingArtifact { path: path.to_path_buf(), stage });
    }
    fs::read_to_string(path).map_err(io_err(path))
}

/// Locks the output directory and archives the effective config into it.
fn begin(cfg: &PipelineConfig) -> Result<OutputLock, PipelineError> {
    let lock = OutputLock::acquire(&cfg.output.dir)?;
    write_file(&cfg.output.dir.join(CONFIG_FILE), cfg.to_toml().as_bytes())?;
    Ok(lock)
}

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.output.dir.join(name)
}

pub fn load_corpus(path: &Path, dialect: ParseDialect, anonymize: bool) -> Result<Corpus, PipelineError> {
    let c = Corpus::load(path, dialect)?;
    if c.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    Ok(if anonymize { c.with_anonymized_leaves() } else { c })
}

fn train_corpus(cfg: &PipelineConfig) -> Result<Corpus, PipelineError> {
    load_corpus(&cfg.data.train, cfg.data.dialect, cfg.data.anonymize_leaves)
}

fn dev_queries(cfg: &PipelineConfig) -> Result<Vec<DevQuery>, PipelineError> {
    let path = cfg
        .data
        .dev
        .as_ref()
        .ok_or_else(|| PipelineError::Config { field: "data.dev".into(), msg: "required by this command".into() })?;
    let dev = load_corpus(path, cfg.data.dialect, cfg.data.anonymize_leaves)?;
    Ok(DevQuery::from_corpus(&dev))
}

/// Pool sizes binned as 0, 1, 2–3, 4–7, …
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub min: usize,
    pub max: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub records: usize,
    pub permutations: usize,
    pub bands: usize,
    pub rows: usize,
    pub tau: f64,
    pub threshold: f64,
    pub mean_pool_size: f64,
    pub max_pool_size: usize,
    pub empty_pools: usize,
    pub pool_size_histogram: Vec<HistogramBin>,
}

pub fn pool_histogram(sizes: &[usize]) -> Vec<HistogramBin> {
    let top = sizes.iter().copied().max().unwrap_or(0);
    let mut bins = vec![HistogramBin { min: 0, max: 0, count: 0 }];
    let mut lo = 1;
    while lo <= top {
        bins.push(HistogramBin { min: lo, max: 2 * lo - 1, count: 0 });
        lo *= 2;
    }
    for &s in sizes {
        let i = if s == 0 { 0 } else { (usize::BITS - s.leading_zeros()) as usize };
        bins[i].count += 1;
    }
    bins
}

pub fn build_lsh(corpus: &Corpus, cfg: &BucketingSection) -> Result<LshIndex, PipelineError> {
    let mut index = LshIndex::new(cfg.permutations, cfg.tau, cfg.seed)?;
    let sigs: Vec<_> = (0..corpus.len())
        .into_par_iter()
        .map(|i| index.sign(&corpus.features(i)))
        .collect::<Result<_, _>>()?;
    for (r, sig) in corpus.records().iter().zip(sigs) {
        index.insert(&r.id, sig)?;
    }
    Ok(index)
}

pub fn cmd_bucket(cfg: &PipelineConfig) -> Result<BucketReport, PipelineError> {
    let _lock = begin(cfg)?;
    let corpus = train_corpus(cfg)?;
    let index = build_lsh(&corpus, &cfg.bucketing)?;
    let sizes: Vec<usize> = index
        .ids()
        .par_iter()
        .map(|id| index.pool_of(id).map(|p| p.len()))
        .collect::<Result<_, _>>()?;
    let report = BucketReport {
        records: corpus.len(),
        permutations: index.permutations(),
        bands: index.bands(),
        rows: index.rows(),
        tau: index.tau(),
        threshold: index.threshold(),
        mean_pool_size: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
        max_pool_size: sizes.iter().copied().max().unwrap_or(0),
        empty_pools: sizes.iter().filter(|&&s| s == 0).count(),
        pool_size_histogram: pool_histogram(&sizes),
    };
    let mut buf = Vec::new();
    index.write_to(&mut buf)?;
    write_file(&out(cfg, LSH_INDEX_FILE), &buf)?;
    write_json(&out(cfg, BUCKET_REPORT_FILE), &report)?;
    Ok(report)
}

pub fn cmd_mine(cfg: &PipelineConfig) -> Result<MiningReport, PipelineError> {
    let _lock = begin(cfg)?;
    let corpus = train_corpus(cfg)?;
    let path = out(cfg, LSH_INDEX_FILE);
    let text = read_artifact(&path, "bucket")?;
    let index = LshIndex::read_from(text.as_bytes())?;
    let (groups, report) = mine_all(&corpus, &index, &cfg.mining_config())?;
    let mut buf = Vec::new();
    write_groups(&mut buf, &groups).map_err(io_err(&out(cfg, PAIRS_FILE)))?;
    write_file(&out(cfg, PAIRS_FILE), &buf)?;
    write_json(&out(cfg, MINING_REPORT_FILE), &report)?;
    Ok(report)
}

/// Encoder as initialized for this config, before any training.
pub fn initial_encoder(cfg: &PipelineConfig, corpus: &Corpus) -> Result<Encoder, PipelineError> {
    let vocab = Vocab::build(corpus.records().iter().map(|r| r.utterance.as_str()));
    Ok(Encoder::new(cfg.encoder, vocab)?)
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainReport, PipelineError> {
    let _lock = begin(cfg)?;
    let corpus = train_corpus(cfg)?;
    let path = out(cfg, PAIRS_FILE);
    let text = read_artifact(&path, "mine")?;
    let groups = read_groups(text.as_bytes())?;
    let mut encoder = initial_encoder(cfg, &corpus)?;
    let report = train(&mut encoder, &groups, &corpus, &cfg.training)?;
    write_file(&out(cfg, ENCODER_FILE), &encoder.to_bytes())?;
    let mut csv = Vec::new();
    write_loss_csv(&mut csv, &report.curve).expect("write to memory");
    write_file(&out(cfg, LOSS_FILE), &csv)?;
    write_json(&out(cfg, TRAIN_REPORT_FILE), &report)?;
    let index = build_index(&corpus, &encoder, None)?;
    write_file(&out(cfg, INDEX_FILE), index.to_json().as_bytes())?;
    Ok(report)
}

pub fn load_encoder(cfg: &PipelineConfig) -> Result<Encoder, PipelineError> {
    let path = out(cfg, ENCODER_FILE);
    if !path.is_file() {
        return Err(PipelineError::MissingArtifact { path, stage: "train" });
    }
    Ok(Encoder::load(&path)?)
}

/// Token-label corpora for every property that has one configured.
pub fn load_label_corpora(cfg: &PipelineConfig) -> Result<BTreeMap<Property, crate::mli::TokenLabelCorpus>, PipelineError> {
    let mut out = BTreeMap::new();
    for (name, path) in &cfg.mli.label_corpora {
        let p: Property = name.parse()?;
        let labels = match cfg.mli.label_sets.get(name) {
            Some(set) => read_label_set(BufReader::new(File::open(set).map_err(io_err(set))?))?,
            None => default_label_set(p),
        };
        let f = File::open(path).map_err(io_err(path))?;
        let corpus = parse_token_labels(BufReader::new(f), labels, p)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        out.insert(p, corpus);
    }
    Ok(out)
}

pub fn cmd_mli(cfg: &PipelineConfig) -> Result<SweepOutcome, PipelineError> {
    let _lock = begin(cfg)?;
    let corpus = train_corpus(cfg)?;
    let dev = dev_queries(cfg)?;
    let encoder = load_encoder(cfg)?;
    let grid = cfg.sweep_grid();
    let label_corpora = load_label_corpora(cfg)?;
    let sweep_cfg = SweepConfig { k: cfg.retrieval.k, probe: cfg.probe_config() };
    let outcome = sweep(&dev, &corpus, &encoder, &label_corpora, &grid, &sweep_cfg)?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &outcome.rows).expect("write to memory");
    write_file(&out(cfg, SWEEP_CSV_FILE), &csv)?;
    write_json(&out(cfg, SWEEP_JSON_FILE), &outcome)?;
    let direction = out(cfg, DIRECTION_FILE);
    match &outcome.best {
        Some(best) => write_file(&direction, format!("{}\n", best.to_json()).as_bytes())?,
        None => {
            if direction.exists() {
                fs::remove_file(&direction).map_err(io_err(&direction))?;
            }
        }
    }
    let index = build_index(&corpus, &encoder, outcome.best.as_ref())?;
    write_file(&out(cfg, MLI_INDEX_FILE), index.to_json().as_bytes())?;
    Ok(outcome)
}

/// The selected direction, or `None` when the baseline won the sweep.
pub fn load_direction(cfg: &PipelineConfig) -> Result<Option<InjectionDirection>, PipelineError> {
    let path = out(cfg, DIRECTION_FILE);
    if !path.is_file() {
        if !out(cfg, SWEEP_JSON_FILE).is_file() {
            return Err(PipelineError::MissingArtifact { path, stage: "mli" });
        }
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(Some(InjectionDirection::from_json(&text)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Prompt,
}

impl std::str::FromStr for OutputFormat {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "prompt" => Ok(OutputFormat::Prompt),
            _ => Err(PipelineError::Usage(format!("unknown format `{s}`; expected json or prompt"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetrieveRequest {
    pub query: String,
    /// Defaults to `retrieval.k`.
    pub k: Option<usize>,
    pub exclude: Option<String>,
    /// Defaults to the MLI index when present, else the trained index.
    pub index: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExemplar {
    pub id: String,
    pub score: f64,
    pub utterance: String,
    pub parse: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResult {
    pub query: String,
    pub k: usize,
    pub injection: Option<InjectionDirection>,
    pub hits: Vec<RetrievedExemplar>,
}

/// Top-k exemplars as JSON, or the rendered few-shot prompt with the
/// exemplars in ascending similarity.
pub fn cmd_retrieve(cfg: &PipelineConfig, req: &RetrieveRequest) -> Result<String, PipelineError> {
    let corpus = train_corpus(cfg)?;
    let encoder = load_encoder(cfg)?;
    let path = match &req.index {
        Some(p) => p.clone(),
        None if out(cfg, MLI_INDEX_FILE).is_file() => out(cfg, MLI_INDEX_FILE),
        None => out(cfg, INDEX_FILE),
    };
    let index = RetrievalIndex::from_json(&read_artifact(&path, "train")?)?;
    index.check_encoder(&encoder)?;
    let k = req.k.unwrap_or(cfg.retrieval.k);
    let injection = index.provenance.injection.clone();
    let hits = topk(&index, &encoder, &req.query, k, injection.as_ref(), req.exclude.as_deref())?;
    let hits: Vec<RetrievedExemplar> = hits
        .into_iter()
        .map(|h| {
            let i = corpus
                .position(&h.id)
                .ok_or_else(|| PipelineError::Data(format!("index id `{}` is not in the corpus", h.id)))?;
            let r = corpus.record(i);
            Ok(RetrievedExemplar { id: h.id, score: h.score, utterance: r.utterance.clone(), parse: r.parse.clone() })
        })
        .collect::<Result<_, PipelineError>>()?;
    match req.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&RetrieveResult { query: req.query.clone(), k, injection, hits })
                .expect("result serializes");
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Prompt => {
            let schema_text = match &cfg.prompt.schema_file {
                Some(p) => Some(fs::read_to_string(p).map_err(io_err(p))?),
                None => None,
            };
            let spec = PromptSpec { task_name: cfg.prompt.task_name.clone(), k, template: cfg.prompt.template, schema_text };
            let exemplars: Vec<Exemplar> =
                hits.iter().rev().map(|h| Exemplar::new(h.utterance.clone(), h.parse.clone())).collect();
            Ok(build_prompt(&spec, &exemplars, &req.query)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MliChoice {
    pub property: Property,
    pub layer: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub dev_queries: usize,
    pub untrained: Metrics,
    pub trained: Metrics,
    pub trained_mli: Metrics,
    /// `mean_top1_sim` holds the top Okapi score here.
    pub bm25: Metrics,
    pub mli: Option<MliChoice>,
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<EvalReport, PipelineError> {
    let _lock = begin(cfg)?;
    let corpus = train_corpus(cfg)?;
    let dev = dev_queries(cfg)?;
    let trained = load_encoder(cfg)?;
    let direction = load_direction(cfg)?;
    let untrained = initial_encoder(cfg, &corpus)?;
    let targets = StructuralTargets::new(&dev, &corpus);
    let k = cfg.retrieval.k;
    let dense = |enc: &Encoder, inj: Option<&InjectionDirection>| -> Result<Metrics, PipelineError> {
        let index = build_index(&corpus, enc, inj)?;
        Ok(evaluate_with_targets(Scorer::Dense { index: &index, encoder: enc }, &dev, &targets, k)?)
    };
    let bm25 = Bm25Index::from_corpus(&corpus);
    let report = EvalReport {
        k,
        dev_queries: dev.len(),
        untrained: dense(&untrained, None)?,
        trained: dense(&trained, None)?,
        trained_mli: dense(&trained, direction.as_ref())?,
        bm25: evaluate_with_targets(Scorer::Bm25(&bm25), &dev, &targets, k)?,
        mli: direction.map(|d| MliChoice { property: d.property, layer: d.layer, lambda: d.lambda }),
    };
    write_json(&out(cfg, EVAL_FILE), &report)?;
    Ok(report)
}

/// Runs every stage in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<EvalReport, PipelineError> {
    cmd_bucket(cfg)?;
    cmd_mine(cfg)?;
    cmd_train(cfg)?;
    cmd_mli(cfg)?;
    cmd_eval(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TedResult {
    pub ted: f64,
    pub sim_struct: f64,
    pub size_a: usize,
    pub size_b: usize,
}

pub fn cmd_ted(dialect: ParseDialect, a: &str, b: &str, anonymize: bool) -> Result<TedResult, PipelineError> {
    let (mut ta, mut tb) = (dialect.parse(a)?, dialect.parse(b)?);
    if anonymize {
        ta = ta.anonymize_leaves();
        tb = tb.anonymize_leaves();
    }
    Ok(TedResult { ted: ted_unit(&ta, &tb), sim_struct: sim_struct(&ta, &tb), size_a: ta.size(), size_b: tb.size() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub train: usize,
    pub dev: usize,
    pub large: usize,
    pub probe_sentences: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { seed: 0, train: 500, dev: 60, large: 10_000, probe_sentences: 300 }
    }
}

/// Config written next to generated fixtures.
pub const FIXTURE_CONFIG: &str = r#"[data]
train = "train.jsonl"
dev = "dev.jsonl"
dialect = "bracketed"

[bucketing]
permutations = 128
tau = 0.5
seed = 0

[mining]
n_hard = 3
n_rand = 2
seed = 0

[encoder]
d = 64
layers = 4
heads = 4
ffn = 128
max_len = 64
seed = 0

[training]
epochs = 3
lr = 1e-4
weight_decay = 0.01
batch = 1
seed = 0
temperature = 0.07

[mli]
properties = ["POS", "DEPS", "PT"]
lambdas = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0]

[mli.label_corpora]
POS = "probe_pos.tsv"
DEPS = "probe_deps.tsv"
PT = "probe_pt.tsv"

[retrieval]
k = 5

[prompt]
task_name = "MTop"
template = "conversational"

[output]
dir = "run"
"#;

/// Writes the planted-template corpora, token-label files and a config.
pub fn cmd_fixture_gen(dir: &Path, spec: &FixtureSpec) -> Result<Vec<PathBuf>, PipelineError> {
    let _lock = OutputLock::acquire(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), PipelineError> {
        let p = dir.join(name);
        write_file(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    for (name, n, prefix) in [("train.jsonl", spec.train, "r"), ("dev.jsonl", spec.dev, "d"), ("large.jsonl", spec.large, "x")] {
        let mut buf = Vec::new();
        write_records(&mut buf, &fixture::records(n, spec.seed, prefix)).expect("write to memory");
        put(name, buf)?;
    }
    let probes = fixture::generate(spec.probe_sentences, spec.seed, "p");
    for (p, name) in [(Property::Pos, "probe_pos.tsv"), (Property::Deps, "probe_deps.tsv"), (Property::Pt, "probe_pt.tsv")] {
        let mut w = BufWriter::new(Vec::new());
        fixture::write_token_labels(&mut w, &probes, p).expect("write to memory");
        put(name, w.into_inner().expect("flush to memory"))?;
    }
    put(CONFIG_FILE, FIXTURE_CONFIG.as_bytes().to_vec())?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let h = pool_histogram(&[0, 1, 2, 3, 4, 9]);
        let counts: Vec<_> = h.iter().map(|b| (b.min, b.max, b.count)).collect();
        assert_eq!(counts, vec![(0, 0, 1), (1, 1, 1), (2, 3, 2), (4, 7, 1), (8, 15, 1)]);
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(PipelineError::Locked(_))));
        drop(lock);
        OutputLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Usage("x".into()).exit_code(), 1);
        assert_eq!(PipelineError::EmptyCorpus.exit_code(), 2);
        assert_eq!(PipelineError::Encoder(EncoderError::NonFiniteLoss("a".into())).exit_code(), 3);
        assert_eq!(PipelineError::Mli(MliError::ZeroMatrix).exit_code(), 3);
    }
}
