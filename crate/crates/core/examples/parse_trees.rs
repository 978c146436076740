use stare::tree::ParseDialect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples = [
        (ParseDialect::Bracketed, "[IN:CREATE_REMINDER [SL:PERSON_REMINDED me ] [SL:TODO call John ] ]"),
        (ParseDialect::SExpr, "(Yield :output (FindEventWrapperWithDefaults :constraint (EventOnDate :date (Tomorrow))))"),
        (ParseDialect::SqlSkeleton, "SELECT name FROM singer WHERE age > 30 ORDER BY name"),
    ];
    for (dialect, text) in samples {
        let tree = dialect.parse(text)?;
        println!("{}: {} nodes, depth {}", dialect.as_str(), tree.size(), tree.depth());
        println!("  {tree}");
        println!("  anonymized: {}", tree.anonymize_leaves());
    }
    match ParseDialect::Bracketed.parse("[IN:A [SL:B x ]") {
        Ok(_) => unreachable!(),
        Err(e) => println!("malformed input: {e}"),
    }
    Ok(())
}
