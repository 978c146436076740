#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stare::encoder::TrainReport;
use stare::hashing::sha256_hex;
use stare::mli::SweepOutcome;
use stare::pipeline::{
    cmd_bucket, cmd_eval, cmd_fixture_gen, cmd_mine, cmd_mli, cmd_train, EvalReport, FixtureSpec, PipelineConfig,
    LOCK_FILE,
};
use stare::tree::ParseTree;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One result line per criterion, written past the test harness capture.
pub fn report(n: usize, name: &str, pass: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let ok = pass && elapsed <= budget;
    let line = format!(
        "criterion {n:02} [{}] {name}: {detail} ({:.2}s, budget {}s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(elapsed <= budget, "criterion {n} exceeded its {}s budget", budget.as_secs());
}

/// Every ordered tree with exactly `n` nodes over `alphabet`.
pub fn trees_of_size(n: usize, alphabet: &[&str]) -> Vec<ParseTree> {
    let mut out = Vec::new();
    for &label in alphabet {
        for forest in forests_of_size(n - 1, alphabet) {
            out.push(if forest.is_empty() { ParseTree::leaf(label) } else { ParseTree::node(label, forest) });
        }
    }
    out
}

fn forests_of_size(m: usize, alphabet: &[&str]) -> Vec<Vec<ParseTree>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=m {
        for t in trees_of_size(first, alphabet) {
            for rest in forests_of_size(m - first, alphabet) {
                let mut f = vec![t.clone()];
                f.extend(rest);
                out.push(f);
            }
        }
    }
    out
}

/// Random tree with at most `max_nodes` nodes.
pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize, alphabet: &[&str]) -> ParseTree {
    let n = rng.random_range(1..=max_nodes);
    build_random(rng, n, alphabet)
}

fn build_random(rng: &mut ChaCha8Rng, n: usize, alphabet: &[&str]) -> ParseTree {
    let label = alphabet[rng.random_range(0..alphabet.len())];
    if n == 1 {
        return ParseTree::leaf(label);
    }
    let mut left = n - 1;
    let mut kids = Vec::new();
    while left > 0 {
        let take = rng.random_range(1..=left);
        kids.push(build_random(rng, take, alphabet));
        left -= take;
    }
    ParseTree::node(label, kids)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations;
/// returns (eigenvalues, eigenvectors as columns).
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[[i, j]].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[[i, i]]).collect(), v)
}

/// Top right-singular vector of `w` via Jacobi on the smaller Gram matrix.
pub fn dense_top_right_singular(w: &Array2<f64>) -> Vec<f64> {
    let wide = w.nrows() < w.ncols();
    let gram = if wide { w.dot(&w.t()) } else { w.t().dot(w) };
    let (vals, vecs) = jacobi_eigen(&gram);
    let top = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    if !wide {
        return vecs.column(top).to_vec();
    }
    let v = w.t().dot(&vecs.column(top));
    let n = v.dot(&v).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// sha256 of every artifact in `dir`, lock file excluded.
pub fn artifact_hashes(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().into_owned();
        if name == LOCK_FILE || !e.path().is_file() {
            continue;
        }
        out.insert(name, sha256_hex(&std::fs::read(e.path()).unwrap()));
    }
    out
}

pub type StageHashes = Vec<(&'static str, BTreeMap<String, String>)>;

pub struct PipelineRun {
    pub dir: PathBuf,
    pub config: PipelineConfig,
    pub train: TrainReport,
    pub mli: SweepOutcome,
    pub eval: EvalReport,
    /// Artifact hashes after each stage.
    pub stage_hashes: StageHashes,
    pub elapsed: Duration,
}

/// Runs bucket, mine, train, mli and eval, snapshotting hashes per stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> (TrainReport, SweepOutcome, EvalReport, StageHashes) {
    let mut hashes = Vec::new();
    cmd_bucket(cfg).unwrap();
    hashes.push(("bucket", artifact_hashes(&cfg.output.dir)));
    cmd_mine(cfg).unwrap();
    hashes.push(("mine", artifact_hashes(&cfg.output.dir)));
    let train = cmd_train(cfg).unwrap();
    hashes.push(("train", artifact_hashes(&cfg.output.dir)));
    let mli = cmd_mli(cfg).unwrap();
    hashes.push(("mli", artifact_hashes(&cfg.output.dir)));
    let eval = cmd_eval(cfg).unwrap();
    hashes.push(("eval", artifact_hashes(&cfg.output.dir)));
    (train, mli, eval, hashes)
}

pub fn fixture_config(dir: &Path) -> PipelineConfig {
    let spec = FixtureSpec { large: 0, ..FixtureSpec::default() };
    cmd_fixture_gen(dir, &spec).unwrap();
    PipelineConfig::from_toml(
        &std::fs::read_to_string(dir.join("config.toml")).unwrap(),
        dir,
        Vec::<(String, String)>::new(),
    )
    .unwrap()
}

/// The shipped fixture pipeline, run once per test binary.
pub fn shared_run() -> &'static PipelineRun {
    static RUN: OnceLock<PipelineRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let config = fixture_config(&dir);
        let t = Instant::now();
        let (train, mli, eval, stage_hashes) = run_pipeline(&config);
        PipelineRun { dir, config, train, mli, eval, stage_hashes, elapsed: t.elapsed() }
    })
}
