use stare::corpus::Corpus;
use stare::encoder::{cosine, train, Encoder, EncoderConfig, TrainConfig, Vocab};
use stare::fixture;
use stare::mining::{mine_all, MiningConfig};
use stare::pipeline::{build_lsh, BucketingSection};
use stare::tree::ParseDialect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Corpus::new(fixture::records(200, 3, "r"), ParseDialect::Bracketed)?;
    let index = build_lsh(&corpus, &BucketingSection::default())?;
    let (groups, _) = mine_all(&corpus, &index, &MiningConfig::default())?;

    let vocab = Vocab::build(corpus.records().iter().map(|r| r.utterance.as_str()));
    let config = EncoderConfig { d: 32, layers: 2, heads: 4, ffn: 64, ..EncoderConfig::default() };
    let mut encoder = Encoder::new(config, vocab)?;
    let report = train(&mut encoder, &groups, &corpus, &TrainConfig { lr: 1e-4, ..TrainConfig::default() })?;
    println!("loss {:.4} -> {:.4} over {} steps", report.initial_loss, report.final_loss, report.steps);
    for e in &report.curve {
        println!("  epoch {} mean step loss {:.4}", e.epoch, e.mean_loss);
    }

    let g = &groups[0];
    let embed = |id: &str| encoder.embed(&corpus.record(corpus.position(id).unwrap()).utterance, None);
    let a = embed(&g.anchor_id)?;
    println!("cos(anchor, positive) {:.3}", cosine(&a, &embed(&g.positive_id)?)?);
    for id in &g.hard_negative_ids {
        println!("cos(anchor, hard)     {:.3}", cosine(&a, &embed(id)?)?);
    }

    let path = std::env::temp_dir().join("stare-example-encoder.bin");
    encoder.save(&path)?;
    let back = Encoder::load(&path)?;
    println!("round trip exact: {}", back.params() == encoder.params());
    Ok(())
}
