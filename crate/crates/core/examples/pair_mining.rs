use stare::corpus::Corpus;
use stare::fixture;
use stare::mining::mine_all;
use stare::mining::MiningConfig;
use stare::pipeline::{build_lsh, BucketingSection};
use stare::tree::ParseDialect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Corpus::new(fixture::records(300, 1, "r"), ParseDialect::Bracketed)?;
    let index = build_lsh(&corpus, &BucketingSection::default())?;
    let cfg = MiningConfig { n_hard: 3, n_rand: 2, seed: 0 };
    let (groups, report) = mine_all(&corpus, &index, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let parse = |id: &str| &corpus.record(corpus.position(id).unwrap()).parse;
    for g in groups.iter().take(2) {
        println!("\nanchor   {}", parse(&g.anchor_id));
        println!("positive {}  (sim {:.3})", parse(&g.positive_id), g.positive_sim);
        for id in &g.hard_negative_ids {
            println!("hard     {}", parse(id));
        }
        for id in &g.random_negative_ids {
            println!("random   {}", parse(id));
        }
    }
    Ok(())
}
