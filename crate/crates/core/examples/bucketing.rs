use stare::bucketing::{collision_probability, exact_jaccard, lsh_params, LshIndex};
use stare::corpus::Corpus;
use stare::fixture;
use stare::tree::ParseDialect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (b, r) = lsh_params(0.5, 128)?;
    println!("P=128 tau=0.5 -> {b} bands x {r} rows");
    for j in [0.2, 0.4, 0.6, 0.8] {
        println!("  P(collide | J={j}) = {:.3}", collision_probability(j, b, r));
    }

    let corpus = Corpus::new(fixture::records(2000, 7, "r"), ParseDialect::Bracketed)?;
    let mut index = LshIndex::new(128, 0.5, 0)?;
    for (i, rec) in corpus.records().iter().enumerate() {
        index.insert(&rec.id, index.sign(&corpus.features(i))?)?;
    }
    let sizes: Vec<usize> = corpus.records().iter().map(|r| index.pool_of(&r.id).map(|p| p.len())).collect::<Result<_, _>>()?;
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    println!("{} records, threshold {:.3}, mean pool {mean:.1}", corpus.len(), index.threshold());

    let pool = index.pool_of(&corpus.record(0).id)?;
    let f0 = corpus.features(0);
    println!("pool of {}: {}", corpus.record(0).parse, pool.len());
    for &p in pool.iter().take(5) {
        println!("  J={:.2}  {}", exact_jaccard(&f0, &corpus.features(p)), corpus.record(p).parse);
    }
    Ok(())
}
