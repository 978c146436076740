//! Synthetic task-oriented corpus with planted parse templates.
//!
//! Each intent has carrier phrases and a list of slots, some optional and
//! some optionally nested, so records of one intent share most of their
//! structure while slot fillers are drawn from pools shared across intents.
//! The generator also labels every utterance token with POS, dependency and
//! phrase-type tags for probe training.

use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Record;
use crate::hashing::derive_seed;
use crate::mli::Property;

const TIME: &[&str] = &[
    "tomorrow", "tonight", "on sunday", "at 5 pm", "next week", "this morning", "on friday night",
    "at noon", "in 10 minutes", "this weekend",
];
const PERSON: &[&str] = &[
    "mom", "john", "sarah", "my boss", "the team", "dad", "alex", "my sister", "grandma", "kevin",
];
const PLACE: &[&str] = &[
    "boston", "the office", "paris", "downtown", "the airport", "chicago", "the mall", "home",
    "the beach", "seattle",
];
const MUSIC: &[&str] = &[
    "jazz", "some rock", "taylor swift", "classical music", "the beatles", "hip hop", "adele",
    "country",
];
const THING: &[&str] = &[
    "bars", "milk", "the report", "groceries", "tickets", "pasta", "the laundry", "flowers",
    "a cake", "the car",
];
const DURATION: &[&str] = &["5 minutes", "10 minutes", "an hour", "30 seconds", "two hours", "20 minutes"];
const TOPIC: &[&str] = &["sports", "politics", "the election", "tech", "the weather", "music"];
const ATTR: &[&str] = &["vegan", "quick", "healthy", "spicy", "easy", "cheap"];

#[derive(Clone, Copy)]
enum Fill {
    Pool(&'static [&'static str]),
    /// A nested intent built from another pool.
    Nested(&'static str, &'static str, &'static [&'static str], &'static str),
}

#[derive(Clone, Copy)]
struct Slot {
    name: &'static str,
    cue: &'static str,
    fill: Fill,
    /// Probability of the slot being present.
    p: f64,
    /// Pool for the flat variant of a nested slot.
    alt: Option<&'static [&'static str]>,
}

const fn slot(name: &'static str, cue: &'static str, pool: &'static [&'static str], p: f64) -> Slot {
    Slot { name, cue, fill: Fill::Pool(pool), p, alt: None }
}

struct Intent {
    name: &'static str,
    carriers: &'static [&'static str],
    slots: &'static [Slot],
}

const INTENTS: &[Intent] = &[
    Intent {
        name: "GET_WEATHER",
        carriers: &["whats the weather", "weather forecast", "will it rain", "how hot is it"],
        slots: &[slot("DATE_TIME", "for", TIME, 0.7), slot("LOCATION", "in", PLACE, 0.5)],
    },
    Intent {
        name: "CREATE_REMINDER",
        carriers: &["remind me to", "set a reminder to", "dont let me forget to"],
        slots: &[
            Slot {
                name: "TODO",
                cue: "buy",
                fill: Fill::Nested("CREATE_CALL", "CONTACT", PERSON, "call"),
                p: 1.0,
                alt: Some(THING),
            },
            slot("DATE_TIME", "", TIME, 0.6),
            slot("PERSON_REMINDED", "for", PERSON, 0.25),
        ],
    },
    Intent {
        name: "CREATE_ALARM",
        carriers: &["set an alarm", "wake me up", "i need an alarm"],
        slots: &[slot("DATE_TIME", "", TIME, 1.0), slot("ALARM_NAME", "called", THING, 0.3)],
    },
    Intent {
        name: "PLAY_MUSIC",
        carriers: &["play", "put on", "i want to hear"],
        slots: &[
            slot("MUSIC_GENRE", "", MUSIC, 1.0),
            slot("MUSIC_TYPE", "from my", &["playlist", "album", "library"], 0.4),
        ],
    },
    Intent {
        name: "SEND_MESSAGE",
        carriers: &["send a message to", "text", "message"],
        slots: &[
            Slot {
                name: "RECIPIENT",
                cue: "",
                fill: Fill::Nested("GET_CONTACT", "TYPE_RELATION", &["my boss", "my sister", "my dad"], ""),
                p: 1.0,
                alt: Some(PERSON),
            },
            slot("CONTENT_EXACT", "saying i will bring", THING, 0.6),
        ],
    },
    Intent {
        name: "CREATE_CALL",
        carriers: &["call", "phone", "ring", "start a call with"],
        slots: &[slot("CONTACT", "", PERSON, 1.0), slot("METHOD_CALL", "on", &["video", "speaker", "whatsapp"], 0.35)],
    },
    Intent {
        name: "GET_EVENT",
        carriers: &["what events are on", "whats happening", "any concerts"],
        slots: &[
            slot("LOCATION", "in", PLACE, 0.6),
            slot("DATE_TIME", "", TIME, 0.6),
            slot("CATEGORY_EVENT", "for", MUSIC, 0.3),
        ],
    },
    Intent {
        name: "CREATE_TIMER",
        carriers: &["set a timer for", "start a timer", "countdown"],
        slots: &[slot("METHOD_TIMER", "", &["timer", "stopwatch"], 0.3), slot("DATE_TIME", "for", DURATION, 1.0)],
    },
    Intent {
        name: "GET_DIRECTIONS",
        carriers: &["directions to", "how do i get to", "navigate to"],
        slots: &[
            slot("DESTINATION", "", PLACE, 1.0),
            slot("SOURCE", "from", PLACE, 0.4),
            slot("METHOD_TRAVEL", "", &["by bus", "walking", "by car", "by train"], 0.4),
        ],
    },
    Intent {
        name: "GET_RECIPES",
        carriers: &["how do i make", "recipe for", "how to cook"],
        slots: &[slot("RECIPES_ATTRIBUTE", "", ATTR, 0.5), slot("RECIPES_DISH", "", THING, 1.0)],
    },
    Intent {
        name: "GET_NEWS",
        carriers: &["whats the news", "show me headlines", "latest news"],
        slots: &[
            slot("NEWS_TOPIC", "about", TOPIC, 0.6),
            slot("NEWS_SOURCE", "from", &["cnn", "the bbc", "reuters"], 0.35),
            slot("DATE_TIME", "", TIME, 0.4),
        ],
    },
    Intent {
        name: "DELETE_REMINDER",
        carriers: &["delete my reminder to", "cancel the reminder to", "remove the reminder to"],
        slots: &[slot("TODO", "get", THING, 1.0), slot("DATE_TIME", "", TIME, 0.5)],
    },
    Intent {
        name: "GET_CONTACT",
        carriers: &["whats the number of", "find the email of", "look up"],
        slots: &[slot("CONTACT", "", PERSON, 1.0), slot("CONTACT_METHOD", "at", &["work", "home", "school"], 0.4)],
    },
    Intent {
        name: "UPDATE_ALARM",
        carriers: &["change my alarm", "move the alarm", "reset my alarm"],
        slots: &[slot("ALARM_NAME", "for", THING, 0.4), slot("DATE_TIME", "to", TIME, 1.0)],
    },
];

const PREFIXES: &[&str] = &["please", "hey", "can you", "um", "ok"];
const SUFFIXES: &[&str] = &["please", "thanks", "now"];

/// Per-token (POS, DEPS, PT) tags.
type Tags = (&'static str, &'static str, &'static str);

fn word_tags(word: &str, role: Role) -> Tags {
    let pos = match word {
        "the" | "a" | "an" | "some" | "any" => "DET",
        "my" | "me" | "i" | "it" => "PRON",
        "to" => "PART",
        "for" | "in" | "at" | "on" | "from" | "about" | "by" | "with" | "of" => "ADP",
        "is" | "will" | "do" | "can" | "are" => "AUX",
        "how" | "whats" | "what" | "now" => "ADV",
        "please" | "hey" | "um" | "ok" | "thanks" => "INTJ",
        "pm" | "minutes" | "seconds" | "hour" | "hours" | "week" | "morning" | "night" | "weekend" => "NOUN",
        w if w.chars().all(|c| c.is_ascii_digit()) || matches!(w, "two" | "five") => "NUM",
        "hot" | "quick" | "healthy" | "spicy" | "easy" | "cheap" | "vegan" | "latest" | "next" | "this" => "ADJ",
        "dont" | "not" => "PART",
        "john" | "sarah" | "alex" | "kevin" | "boston" | "paris" | "chicago" | "seattle" | "adele" | "cnn" | "reuters"
        | "bbc" | "swift" | "taylor" | "beatles" | "sunday" | "friday" | "whatsapp" => "PROPN",
        _ => match role {
            Role::Carrier | Role::Cue if is_verb(word) => "VERB",
            Role::Cue => "ADP",
            _ => "NOUN",
        },
    };
    let deps = match (role, pos) {
        (Role::Extra, _) => "DEP",
        (_, "DET") => "DET",
        (_, "ADP") => "CASE",
        (_, "AUX") => "AUX",
        (_, "PART") => "MARK",
        (_, "ADJ") => "MOD",
        (_, "NUM") => "NMOD",
        (_, "PRON") => "NSUBJ",
        (Role::Carrier, "VERB") => "ROOT",
        (Role::Carrier, _) => "OBJ",
        (Role::Cue, _) => "ADVMOD",
        (Role::Filler, _) => "OBL",
    };
    let pt = match (role, pos) {
        (Role::Extra, _) => "INTJ",
        (Role::Carrier, "VERB" | "AUX" | "PART") => "VP",
        (Role::Carrier, "ADV") => "WHADVP",
        (Role::Carrier, _) => "NP",
        (Role::Cue, "ADP") => "PP",
        (Role::Cue, _) => "VP",
        (Role::Filler, "ADJ") => "ADJP",
        (Role::Filler, "NUM") => "QP",
        (Role::Filler, _) => "NP",
    };
    (pos, deps, pt)
}

fn is_verb(w: &str) -> bool {
    matches!(
        w,
        "remind" | "set" | "let" | "forget" | "wake" | "need" | "play" | "put" | "want" | "hear" | "send" | "text"
            | "message" | "call" | "phone" | "ring" | "start" | "get" | "navigate" | "make" | "cook" | "show"
            | "delete" | "cancel" | "remove" | "find" | "look" | "change" | "move" | "reset" | "buy" | "rain"
            | "saying" | "bring" | "called"
    )
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Carrier,
    Cue,
    Filler,
    Extra,
}

/// A generated example with its token tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub record: Record,
    pub tokens: Vec<String>,
    pub tags: Vec<Tags>,
}

struct Builder {
    words: Vec<(String, Role)>,
}

impl Builder {
    fn push(&mut self, text: &str, role: Role) {
        for w in text.split_whitespace() {
            self.words.push((w.to_string(), role));
        }
    }
}

fn generate_one(rng: &mut ChaCha8Rng, id: String) -> Generated {
    let intent = &INTENTS[rng.random_range(0..INTENTS.len())];
    let mut b = Builder { words: vec![] };
    if rng.random_bool(0.25) {
        b.push(PREFIXES.choose(rng).unwrap(), Role::Extra);
    }
    b.push(intent.carriers.choose(rng).unwrap(), Role::Carrier);
    let mut parse = format!("[IN:{}", intent.name);
    for s in intent.slots {
        if !rng.random_bool(s.p) {
            continue;
        }
        let nested = match (s.fill, s.alt) {
            (Fill::Nested(..), Some(_)) => rng.random_bool(0.4),
            (Fill::Nested(..), None) => true,
            _ => false,
        };
        match s.fill {
            Fill::Nested(inner, inner_slot, pool, verb) if nested => {
                let v = *pool.choose(rng).unwrap();
                if !verb.is_empty() {
                    b.push(verb, Role::Cue);
                }
                b.push(v, Role::Filler);
                parse.push_str(&format!(" [SL:{} [IN:{inner} ", s.name));
                if !verb.is_empty() {
                    parse.push_str(&format!("{verb} "));
                }
                parse.push_str(&format!("[SL:{inner_slot} {v} ] ] ]"));
            }
            _ => {
                let pool = match s.fill {
                    Fill::Pool(p) => p,
                    Fill::Nested(..) => s.alt.unwrap(),
                };
                let v = *pool.choose(rng).unwrap();
                let cue = if s.cue.is_empty() || rng.random_bool(0.2) { "" } else { s.cue };
                if !cue.is_empty() {
                    b.push(cue, Role::Cue);
                }
                b.push(v, Role::Filler);
                parse.push_str(&format!(" [SL:{} {v} ]", s.name));
            }
        }
    }
    parse.push_str(" ]");
    if rng.random_bool(0.15) {
        b.push(SUFFIXES.choose(rng).unwrap(), Role::Extra);
    }
    let tokens: Vec<String> = b.words.iter().map(|(w, _)| w.clone()).collect();
    let tags = b.words.iter().map(|(w, r)| word_tags(w, *r)).collect();
    Generated { record: Record::new(id, tokens.join(" "), parse), tokens, tags }
}

/// `n` examples with ids `{prefix}{i:05}`, deterministic in `(seed, prefix)`.
pub fn generate(n: usize, seed: u64, prefix: &str) -> Vec<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("fixture-{prefix}")));
    (0..n).map(|i| generate_one(&mut rng, format!("{prefix}{i:05}"))).collect()
}

pub fn records(n: usize, seed: u64, prefix: &str) -> Vec<Record> {
    generate(n, seed, prefix).into_iter().map(|g| g.record).collect()
}

/// Token-label corpus for `property` in `token<TAB>label` form.
pub fn write_token_labels<W: Write>(mut w: W, examples: &[Generated], property: Property) -> std::io::Result<()> {
    for (i, g) in examples.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        for (t, tags) in g.tokens.iter().zip(&g.tags) {
            let label = match property {
                Property::Pos => tags.0,
                Property::Deps => tags.1,
                Property::Pt => tags.2,
            };
            writeln!(w, "{t}\t{label}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mli::{default_label_set, parse_token_labels};
    use crate::tree::ParseDialect;

    #[test]
    fn deterministic_and_parseable() {
        let a = generate(200, 7, "r");
        assert_eq!(a, generate(200, 7, "r"));
        assert_ne!(a, generate(200, 8, "r"));
        for g in &a {
            ParseDialect::Bracketed.parse(&g.record.parse).unwrap();
            assert_eq!(g.tokens.len(), g.tags.len());
        }
    }

    #[test]
    fn labels_belong_to_default_sets() {
        let ex = generate(300, 1, "p");
        for p in Property::ALL {
            let mut buf = Vec::new();
            write_token_labels(&mut buf, &ex, p).unwrap();
            let c = parse_token_labels(&buf[..], default_label_set(p), p).unwrap();
            assert_eq!(c.sentences.len(), 300);
            c.label_ids().unwrap();
        }
    }
}
