use stare::corpus::Corpus;
use stare::encoder::{Encoder, EncoderConfig, Vocab};
use stare::fixture;
use stare::retrieval::{build_index, build_prompt, topk, Bm25Index, Exemplar, PromptSpec, PromptTemplate};
use stare::tree::ParseDialect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bank = Corpus::new(fixture::records(200, 0, "r"), ParseDialect::Bracketed)?;
    let vocab = Vocab::build(bank.records().iter().map(|r| r.utterance.as_str()));
    let encoder = Encoder::new(EncoderConfig { d: 32, layers: 2, heads: 4, ffn: 64, ..EncoderConfig::default() }, vocab)?;
    let index = build_index(&bank, &encoder, None)?;
    let query = "remind me to call mom tomorrow";

    let dense = topk(&index, &encoder, query, 3, None, None)?;
    let bm25 = Bm25Index::from_corpus(&bank).topk(query, 3, None)?;
    for (name, hits) in [("dense", &dense), ("bm25", &bm25)] {
        println!("{name}:");
        for h in hits {
            println!("  {:.3} {}", h.score, bank.record(bank.position(&h.id).unwrap()).utterance);
        }
    }

    // Most similar exemplar goes last, nearest the query.
    let exemplars: Vec<Exemplar> = dense
        .iter()
        .rev()
        .map(|h| {
            let r = bank.record(bank.position(&h.id).unwrap());
            Exemplar::new(r.utterance.clone(), r.parse.clone())
        })
        .collect();
    let spec = PromptSpec { task_name: "MTop".into(), k: 3, template: PromptTemplate::Conversational, schema_text: None };
    println!("\n{}", build_prompt(&spec, &exemplars, query)?);
    Ok(())
}
