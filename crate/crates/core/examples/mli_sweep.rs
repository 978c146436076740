use std::collections::BTreeMap;

use stare::corpus::Corpus;
use stare::encoder::{Encoder, EncoderConfig, Vocab};
use stare::fixture;
use stare::mli::{
    collect_states, default_label_set, extract_direction, parse_token_labels, sweep, train_probe, Property, ProbeConfig,
    SweepConfig, SweepGrid,
};
use stare::retrieval::DevQuery;
use stare::tree::ParseDialect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bank = Corpus::new(fixture::records(150, 0, "r"), ParseDialect::Bracketed)?;
    let dev = DevQuery::from_corpus(&Corpus::new(fixture::records(20, 0, "d"), ParseDialect::Bracketed)?);
    let vocab = Vocab::build(bank.records().iter().map(|r| r.utterance.as_str()));
    let encoder = Encoder::new(EncoderConfig { d: 32, layers: 3, heads: 4, ffn: 64, ..EncoderConfig::default() }, vocab)?;

    let probes = fixture::generate(120, 0, "p");
    let mut corpora = BTreeMap::new();
    for p in [Property::Pos, Property::Pt] {
        let mut buf = Vec::new();
        fixture::write_token_labels(&mut buf, &probes, p)?;
        corpora.insert(p, parse_token_labels(buf.as_slice(), default_label_set(p), p)?);
    }

    let pos = &corpora[&Property::Pos];
    let (x, y) = collect_states(pos, &encoder, 2)?;
    let probe = train_probe(&x, &y, pos.label_set.len(), &ProbeConfig::default(), 2, Property::Pos)?;
    let dir = extract_direction(&probe)?;
    println!("POS probe at layer 2: accuracy {:.3}, |u| = {:.6}", probe.training_accuracy, dir.u.iter().map(|v| v * v).sum::<f64>().sqrt());

    let grid = SweepGrid { layers: vec![1, 3], properties: vec![Property::Pos, Property::Pt], lambdas: vec![0.0, 1.0, 3.0] };
    let outcome = sweep(&dev, &bank, &encoder, &corpora, &grid, &SweepConfig::default())?;
    for row in &outcome.rows {
        let prop = row.property.map_or("none", |p| p.as_str());
        println!("  layer {} {prop:>4} lambda {:>3} -> {:?} {}", row.layer, row.lambda, row.score, row.status);
    }
    match &outcome.best {
        Some(d) => println!("best {}@{} x{} = {:.4} (baseline {:.4})", d.property, d.layer, d.lambda, outcome.best_score, outcome.baseline_score),
        None => println!("baseline kept at {:.4}", outcome.baseline_score),
    }
    Ok(())
}
