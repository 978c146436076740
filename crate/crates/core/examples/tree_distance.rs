use stare::distance::{sim_struct, ted, EditCosts};
use stare::tree::ParseDialect;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parse = |s: &str| ParseDialect::Bracketed.parse(s);
    let anchor = parse("[IN:CREATE_ALARM [SL:DATE_TIME for 7am ] ]")?;
    let others = [
        "[IN:CREATE_ALARM [SL:DATE_TIME for 6 tomorrow ] ]",
        "[IN:CREATE_ALARM [SL:DATE_TIME for 7am ] [SL:ALARM_NAME gym ] ]",
        "[IN:GET_WEATHER [SL:LOCATION paris ] ]",
        "[IN:SEND_MESSAGE [SL:RECIPIENT [IN:GET_CONTACT [SL:TYPE_RELATION mom ] ] ] [SL:CONTENT_EXACT hi ] ]",
    ];
    let unit = EditCosts::default();
    let cheap_relabel = EditCosts::new(1.0, 1.0, 0.5)?;
    println!("{anchor}");
    for s in others {
        let t = parse(s)?;
        println!(
            "  ted {:>4}  ted(relabel 0.5) {:>4}  sim {:.3}  raw {:.3}  anonymized sim {:.3}  {s}",
            ted(&anchor, &t, &unit),
            ted(&anchor, &t, &cheap_relabel),
            sim_struct(&anchor, &t),
            stare::distance::sim_struct_raw(&anchor, &t),
            sim_struct(&anchor.anonymize_leaves(), &t.anonymize_leaves()),
        );
    }
    Ok(())
}
