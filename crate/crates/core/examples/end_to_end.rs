use std::time::Instant;

use stare::pipeline::{run_all, FixtureSpec, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("stare-end-to-end"));
    let t = Instant::now();
    stare::pipeline::cmd_fixture_gen(&dir, &FixtureSpec { large: 0, ..FixtureSpec::default() })?;
    let cfg = PipelineConfig::load(&dir.join("config.toml"))?;
    let report = run_all(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("artifacts in {} ({:.1}s)", cfg.output.dir.display(), t.elapsed().as_secs_f64());
    Ok(())
}
