use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stare::pipeline::{
    cmd_bucket, cmd_eval, cmd_fixture_gen, cmd_mine, cmd_mli, cmd_retrieve, cmd_ted, cmd_train, FixtureSpec,
    OutputFormat, PipelineConfig, PipelineError, RetrieveRequest,
};
use stare::tree::ParseDialect;

#[derive(Parser)]
#[command(name = "stare", version, about = "Structure-aware exemplar retrieval")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the LSH index over the training corpus.
    Bucket(ConfigArg),
    /// Mine contrastive groups from the LSH pools.
    Mine(ConfigArg),
    /// Train the encoder on mined groups.
    Train(ConfigArg),
    /// Train probes and sweep injection configurations on dev.
    Mli(ConfigArg),
    /// Retrieve exemplars for a query.
    Retrieve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        query: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        exclude: Option<String>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// json or prompt
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Compare untrained, trained, trained+MLI and BM25 retrieval on dev.
    Eval(ConfigArg),
    /// Tree edit distance and structural similarity of two parses.
    Ted {
        #[arg(long, default_value = "bracketed")]
        dialect: ParseDialect,
        #[arg(long)]
        anonymize: bool,
        a: String,
        b: String,
    },
    /// Write synthetic corpora, token-label files and a config.
    FixtureGen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        train: usize,
        #[arg(long, default_value_t = 60)]
        dev: usize,
        #[arg(long, default_value_t = 10_000)]
        large: usize,
    },
}

#[derive(clap::Args)]
struct ConfigArg {
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        Ok(cfg)
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes")
}

fn run(cmd: Cmd) -> Result<String, PipelineError> {
    Ok(match cmd {
        Cmd::Bucket(c) => json(&cmd_bucket(&c.load()?)?),
        Cmd::Mine(c) => json(&cmd_mine(&c.load()?)?),
        Cmd::Train(c) => json(&cmd_train(&c.load()?)?),
        Cmd::Mli(c) => {
            let o = cmd_mli(&c.load()?)?;
            json(&serde_json::json!({
                "baseline_score": o.baseline_score,
                "best_score": o.best_score,
                "best": o.best.map(|d| serde_json::json!({"property": d.property, "layer": d.layer, "lambda": d.lambda})),
                "failed_cells": o.rows.iter().filter(|r| r.score.is_none()).count(),
            }))
        }
        Cmd::Retrieve { config, query, k, exclude, index, format } => {
            let format: OutputFormat = format.parse()?;
            let cfg = config.load()?;
            let s = cmd_retrieve(&cfg, &RetrieveRequest { query, k, exclude, index, format })?;
            return Ok(s.trim_end_matches('\n').to_string());
        }
        Cmd::Eval(c) => json(&cmd_eval(&c.load()?)?),
        Cmd::Ted { dialect, anonymize, a, b } => json(&cmd_ted(dialect, &a, &b, anonymize)?),
        Cmd::FixtureGen { out, seed, train, dev, large } => {
            let spec = FixtureSpec { seed, train, dev, large, ..FixtureSpec::default() };
            let files = cmd_fixture_gen(&out, &spec)?;
            files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n")
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(s) => {
            println!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
