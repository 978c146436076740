use super::{normalize_span, ParseError, ParseTree};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open(usize),
    Close(usize),
    Atom(usize, String),
    Str(usize, String),
}

fn lex(text: &str) -> Result<Vec<Tok>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, ch)) = chars.peek() {
        match ch {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                toks.push(Tok::Open(i));
            }
            ')' => {
                chars.next();
                toks.push(Tok::Close(i));
            }
            '"' => {
                chars.next();
                let mut buf = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '\\' => {
                            if let Some((_, esc)) = chars.next() {
                                buf.push(esc);
                            }
                        }
                        '"' => {
                            closed = true;
                            break;
                        }
                        c => buf.push(c),
                    }
                }
                if !closed {
                    return Err(ParseError::UnterminatedStringLiteral(i));
                }
                toks.push(Tok::Str(i, buf));
            }
            _ => {
                let start = i;
                let mut end = text.len();
                while let Some(&(j, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '"' {
                        end = j;
                        break;
                    }
                    chars.next();
                }
                toks.push(Tok::Atom(start, text[start..end].to_string()));
            }
        }
    }
    Ok(toks)
}

/// Parses a parenthesized S-expression. The head atom of each list becomes
/// the parent label and the remaining elements become its children.
///
/// Bare atoms are symbols and keep their spelling; double-quoted string
/// literals are terminal text and are normalized (lowercased, whitespace
/// collapsed).
pub fn parse_sexpr(text: &str) -> Result<ParseTree, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let mut pos = 0;
    let tree = expr(&toks, &mut pos)?;
    match toks.get(pos) {
        None => Ok(tree),
        Some(Tok::Close(p)) | Some(Tok::Open(p)) => Err(ParseError::UnbalancedParens(*p)),
        Some(Tok::Atom(p, _)) | Some(Tok::Str(p, _)) => {
            Err(ParseError::syntax(*p, "trailing input after expression"))
        }
    }
}

/// Head labels and terminal words (non-head atoms and the words of string
/// literals) of a well-formed expression, in source order.
pub(crate) fn sexpr_parts(text: &str) -> Result<(Vec<String>, Vec<String>), ParseError> {
    parse_sexpr(text)?;
    let mut heads = Vec::new();
    let mut words = Vec::new();
    let mut after_open = false;
    for tok in lex(text)? {
        match tok {
            Tok::Open(_) => {
                after_open = true;
                continue;
            }
            Tok::Close(_) => {}
            Tok::Atom(_, a) if after_open => heads.push(a),
            Tok::Atom(_, a) => words.push(a),
            Tok::Str(_, s) => words.extend(s.split_whitespace().map(str::to_string)),
        }
        after_open = false;
    }
    Ok((heads, words))
}

fn string_leaf(s: &str) -> ParseTree {
    let norm = normalize_span(s);
    if norm.is_empty() {
        ParseTree::leaf("\"\"")
    } else {
        ParseTree::leaf(norm)
    }
}

fn expr(toks: &[Tok], pos: &mut usize) -> Result<ParseTree, ParseError> {
    match &toks[*pos] {
        Tok::Atom(_, a) => {
            *pos += 1;
            Ok(ParseTree::leaf(a.clone()))
        }
        Tok::Str(_, s) => {
            *pos += 1;
            Ok(string_leaf(s))
        }
        Tok::Close(p) => Err(ParseError::UnbalancedParens(*p)),
        Tok::Open(open) => {
            let open = *open;
            *pos += 1;
            let mut children = Vec::new();
            let label = match toks.get(*pos) {
                None => return Err(ParseError::UnbalancedParens(open)),
                Some(Tok::Close(_)) => return Err(ParseError::EmptyList(open)),
                Some(Tok::Atom(_, a)) => {
                    *pos += 1;
                    a.clone()
                }
                Some(Tok::Str(_, s)) => {
                    *pos += 1;
                    let leaf = string_leaf(s);
                    leaf.label().to_string()
                }
                // A list in head position: keep it as the first child under
                // an application node.
                Some(Tok::Open(_)) => {
                    children.push(expr(toks, pos)?);
                    "@".to_string()
                }
            };
            loop {
                match toks.get(*pos) {
                    None => return Err(ParseError::UnbalancedParens(open)),
                    Some(Tok::Close(_)) => {
                        *pos += 1;
                        return Ok(ParseTree::node(label, children));
                    }
                    Some(_) => children.push(expr(toks, pos)?),
                }
            }
        }
    }
}
