use super::{normalize_span, ParseError, ParseTree};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    Open(usize),
    Close(usize),
    Word(usize, &'a str),
}

fn lex(text: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        let delim = ch == '[' || ch == ']' || ch.is_whitespace();
        if delim {
            if let Some(s) = word_start.take() {
                toks.push(Tok::Word(s, &text[s..i]));
            }
            match ch {
                '[' => toks.push(Tok::Open(i)),
                ']' => toks.push(Tok::Close(i)),
                _ => {}
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        toks.push(Tok::Word(s, &text[s..]));
    }
    toks
}

/// Parses a bracketed intent/slot parse. Each `[LABEL ...]` becomes a parent
/// node; every maximal run of terminal words between structural children
/// becomes one leaf holding the normalized span.
pub fn parse_bracketed(text: &str) -> Result<ParseTree, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let toks = lex(text);
    let mut pos = 0;
    let tree = match toks.first() {
        Some(Tok::Open(_)) => node(&toks, &mut pos, text.len())?,
        Some(Tok::Close(p)) => return Err(ParseError::UnbalancedBrackets(*p)),
        Some(Tok::Word(p, _)) => return Err(ParseError::syntax(*p, "expected `[`")),
        None => return Err(ParseError::EmptyInput),
    };
    match toks.get(pos) {
        None => Ok(tree),
        Some(Tok::Close(p)) | Some(Tok::Open(p)) => Err(ParseError::UnbalancedBrackets(*p)),
        Some(Tok::Word(p, _)) => Err(ParseError::syntax(*p, "trailing text after root")),
    }
}

/// Non-terminal labels and raw terminal words of a well-formed parse, in
/// source order.
pub(crate) fn bracketed_parts(text: &str) -> Result<(Vec<String>, Vec<String>), ParseError> {
    parse_bracketed(text)?;
    let mut labels = Vec::new();
    let mut words = Vec::new();
    let mut after_open = false;
    for tok in lex(text) {
        match tok {
            Tok::Open(_) => after_open = true,
            Tok::Close(_) => after_open = false,
            Tok::Word(_, w) if after_open => {
                labels.push(w.to_string());
                after_open = false;
            }
            Tok::Word(_, w) => words.push(w.to_string()),
        }
    }
    Ok((labels, words))
}

fn node(toks: &[Tok<'_>], pos: &mut usize, end: usize) -> Result<ParseTree, ParseError> {
    let open = match toks[*pos] {
        Tok::Open(p) => p,
        _ => unreachable!("caller checks for `[`"),
    };
    *pos += 1;
    let label = match toks.get(*pos) {
        Some(Tok::Word(_, w)) => {
            *pos += 1;
            (*w).to_string()
        }
        Some(Tok::Open(p)) | Some(Tok::Close(p)) => {
            return Err(ParseError::syntax(*p, "missing label after `[`"))
        }
        None => return Err(ParseError::UnbalancedBrackets(open.min(end))),
    };

    let mut children = Vec::new();
    let mut span: Vec<&str> = Vec::new();
    loop {
        match toks.get(*pos) {
            Some(Tok::Word(_, w)) => {
                span.push(w);
                *pos += 1;
            }
            Some(Tok::Open(_)) => {
                flush(&mut span, &mut children);
                children.push(node(toks, pos, end)?);
            }
            Some(Tok::Close(_)) => {
                flush(&mut span, &mut children);
                *pos += 1;
                return Ok(ParseTree::node(label, children));
            }
            None => return Err(ParseError::UnbalancedBrackets(open)),
        }
    }
}

fn flush(span: &mut Vec<&str>, children: &mut Vec<ParseTree>) {
    if span.is_empty() {
        return;
    }
    let text = normalize_span(&span.join(" "));
    span.clear();
    children.push(ParseTree::leaf(text));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(s: &str) -> ParseTree {
        ParseTree::leaf(s)
    }

    #[test]
    fn weather_example() {
        let t = parse_bracketed("[IN:GET_WEATHER [SL:DATE_TIME for tomorrow ] ]").unwrap();
        let want = ParseTree::node(
            "IN:GET_WEATHER",
            vec![ParseTree::node("SL:DATE_TIME", vec![leaf("for tomorrow")])],
        );
        assert_eq!(t, want);
        assert_eq!(t.size(), 3);
    }

    #[test]
    fn tight_closing_brackets() {
        let a = parse_bracketed("[IN:GET_WEATHER [SL:DATE_TIME for tomorrow]]").unwrap();
        let b = parse_bracketed("[IN:GET_WEATHER [SL:DATE_TIME for tomorrow ] ]").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn smallest_input() {
        let t = parse_bracketed("[A ]").unwrap();
        assert_eq!(t, leaf("A"));
        assert_eq!(t.size(), 1);
    }

    #[test]
    fn spans_between_children() {
        let t = parse_bracketed("[IN:X [SL:A me ] tell Angie [SL:B Friday ] ]").unwrap();
        let want = ParseTree::node(
            "IN:X",
            vec![
                ParseTree::node("SL:A", vec![leaf("me")]),
                leaf("tell angie"),
                ParseTree::node("SL:B", vec![leaf("friday")]),
            ],
        );
        assert_eq!(t, want);
    }

    #[test]
    fn digits_kept_in_leaves() {
        let t = parse_bracketed("[IN:X [SL:T at 5  PM ] ]").unwrap();
        assert_eq!(t.children()[0].children()[0].label(), "at 5 pm");
    }

    #[test]
    fn errors() {
        assert_eq!(parse_bracketed("   "), Err(ParseError::EmptyInput));
        assert_eq!(
            parse_bracketed("[A [B x ]"),
            Err(ParseError::UnbalancedBrackets(0))
        );
        assert_eq!(
            parse_bracketed("[A x ] ]"),
            Err(ParseError::UnbalancedBrackets(7))
        );
        assert!(matches!(
            parse_bracketed("[ ]"),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_bracketed("A x ]"),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_bracketed("[A x ] y"),
            Err(ParseError::Syntax { .. })
        ));
    }
}
