//! Clause-level skeletons for a practical SQL subset.
//!
//! The parser keeps clause nodes (`SELECT`, `FROM`, `WHERE`, ...) and the
//! essential fields beneath them: identifiers as lowercased leaves, function
//! names over their arguments, operators over their operands. Literals are
//! replaced by `<NUM>` / `<STR>` and aliases are dropped.

use super::{ParseError, ParseTree};

const NUM: &str = "<NUM>";
const STR: &str = "<STR>";

const KEYWORDS: &[&str] = &[
    "SELECT", "DISTINCT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC",
    "LIMIT", "JOIN", "INNER", "LEFT", "RIGHT", "OUTER", "CROSS", "ON", "AS", "AND", "OR", "NOT",
    "IN", "LIKE", "BETWEEN", "IS", "NULL", "UNION", "INTERSECT", "EXCEPT", "ALL", "EXISTS",
];

const UNSUPPORTED: &[&str] = &[
    "WITH", "CASE", "WHEN", "THEN", "ELSE", "END", "OVER", "PARTITION", "INSERT", "UPDATE",
    "DELETE", "CREATE", "DROP", "ALTER", "VALUES", "SET", "INTO", "OFFSET", "NATURAL", "USING",
    "FULL", "CAST", "WINDOW", "RECURSIVE",
];

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Keyword(String),
    Ident(String),
    Number,
    Str,
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Tok {
    kind: Kind,
    pos: usize,
    text: String,
}

const SYMBOLS: &[&str] = &[
    "<=", ">=", "!=", "<>", "==", "(", ")", ",", ".", ";", "*", "+", "-", "/", "%", "=", "<", ">",
];

fn lex(text: &str) -> Result<Vec<Tok>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = text[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if c == '\'' || c == '"' {
            i += 1;
            loop {
                if i >= bytes.len() {
                    return Err(ParseError::UnterminatedStringLiteral(start));
                }
                if bytes[i] as char == c {
                    // doubled quote is an escaped quote
                    if i + 1 < bytes.len() && bytes[i + 1] as char == c {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            toks.push(Tok {
                kind: Kind::Str,
                pos: start,
                text: text[start..i].to_string(),
            });
            continue;
        }
        if c == '`' || c == '[' {
            let close = if c == '`' { '`' } else { ']' };
            i += 1;
            let body = i;
            while i < bytes.len() && bytes[i] as char != close {
                i += 1;
            }
            if i >= bytes.len() {
                return Err(ParseError::UnterminatedStringLiteral(start));
            }
            let name = text[body..i].to_string();
            i += 1;
            toks.push(Tok {
                kind: Kind::Ident(name.to_lowercase()),
                pos: start,
                text: name,
            });
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'.')
            {
                i += 1;
            }
            toks.push(Tok {
                kind: Kind::Number,
                pos: start,
                text: text[start..i].to_string(),
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            while i < bytes.len() {
                let ch = text[i..].chars().next().unwrap();
                if ch.is_alphanumeric() || ch == '_' || ch == '$' {
                    i += ch.len_utf8();
                } else {
                    break;
                }
            }
            let word = &text[start..i];
            let upper = word.to_ascii_uppercase();
            if UNSUPPORTED.contains(&upper.as_str()) {
                return Err(ParseError::UnsupportedSyntax {
                    token: word.to_string(),
                    pos: start,
                });
            }
            let kind = if KEYWORDS.contains(&upper.as_str()) {
                Kind::Keyword(upper)
            } else {
                Kind::Ident(word.to_lowercase())
            };
            toks.push(Tok {
                kind,
                pos: start,
                text: word.to_string(),
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| text[i..].starts_with(*s)) {
            Some(sym) => {
                i += sym.len();
                toks.push(Tok {
                    kind: Kind::Sym(sym),
                    pos: start,
                    text: sym.to_string(),
                });
            }
            None => {
                let ch = text[i..].chars().next().unwrap();
                return Err(ParseError::UnsupportedSyntax {
                    token: ch.to_string(),
                    pos: start,
                });
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Kind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, off: usize) -> Option<&Kind> {
        self.toks.get(self.pos + off).map(|t| &t.kind)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.pos).unwrap_or(self.end)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Kind::Keyword(k)) if k == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Kind::Sym(s)) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}")))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{sym}`")))
        }
    }

    fn error(&self, msg: String) -> ParseError {
        let found = self
            .toks
            .get(self.pos)
            .map(|t| format!(", found `{}`", t.text))
            .unwrap_or_else(|| ", found end of input".to_string());
        ParseError::syntax(self.here(), format!("{msg}{found}"))
    }

    fn query(&mut self) -> Result<ParseTree, ParseError> {
        let left = self.select()?;
        let op = match self.peek() {
            Some(Kind::Keyword(k)) if k == "UNION" || k == "INTERSECT" || k == "EXCEPT" => {
                k.clone()
            }
            _ => return Ok(left),
        };
        self.pos += 1;
        let label = if self.eat_kw("ALL") {
            format!("{op} ALL")
        } else {
            op
        };
        let right = self.query()?;
        Ok(ParseTree::node(label, vec![left, right]))
    }

    fn select(&mut self) -> Result<ParseTree, ParseError> {
        if self.is_sym("(") && matches!(self.peek_at(1), Some(Kind::Keyword(k)) if k == "SELECT")
        {
            self.pos += 1;
            let q = self.query()?;
            self.expect_sym(")")?;
            return Ok(q);
        }
        self.expect_kw("SELECT")?;
        let mut clauses = Vec::new();

        let mut items = Vec::new();
        if self.eat_kw("DISTINCT") {
            items.push(ParseTree::leaf("DISTINCT"));
        }
        loop {
            items.push(self.select_item()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        clauses.push(ParseTree::node("SELECT", items));

        if self.eat_kw("FROM") {
            clauses.push(self.parse_from()?);
        }
        if self.eat_kw("WHERE") {
            clauses.push(ParseTree::node("WHERE", vec![self.expr()?]));
        }
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            clauses.push(ParseTree::node("GROUP BY", self.expr_list()?));
        }
        if self.eat_kw("HAVING") {
            clauses.push(ParseTree::node("HAVING", vec![self.expr()?]));
        }
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            let mut keys = Vec::new();
            loop {
                let e = self.expr()?;
                keys.push(if self.eat_kw("DESC") {
                    ParseTree::node("DESC", vec![e])
                } else if self.eat_kw("ASC") {
                    ParseTree::node("ASC", vec![e])
                } else {
                    e
                });
                if !self.eat_sym(",") {
                    break;
                }
            }
            clauses.push(ParseTree::node("ORDER BY", keys));
        }
        if self.eat_kw("LIMIT") {
            match self.peek() {
                Some(Kind::Number) => {
                    self.pos += 1;
                    clauses.push(ParseTree::node("LIMIT", vec![ParseTree::leaf(NUM)]));
                }
                _ => return Err(self.error("expected number after LIMIT".into())),
            }
        }
        Ok(ParseTree::node("SELECT_STMT", clauses))
    }

    fn select_item(&mut self) -> Result<ParseTree, ParseError> {
        if self.eat_sym("*") {
            return Ok(ParseTree::leaf("*"));
        }
        let e = self.expr()?;
        self.skip_alias();
        Ok(e)
    }

    fn skip_alias(&mut self) {
        if self.eat_kw("AS") {
            if matches!(self.peek(), Some(Kind::Ident(_)) | Some(Kind::Str)) {
                self.pos += 1;
            }
        } else if matches!(self.peek(), Some(Kind::Ident(_))) {
            self.pos += 1;
        }
    }

    fn parse_from(&mut self) -> Result<ParseTree, ParseError> {
        let mut items = vec![self.table_ref()?];
        loop {
            if self.eat_sym(",") {
                items.push(self.table_ref()?);
                continue;
            }
            let label = if self.eat_kw("JOIN") {
                "JOIN"
            } else if self.is_kw("INNER") || self.is_kw("CROSS") {
                self.pos += 1;
                self.expect_kw("JOIN")?;
                "JOIN"
            } else if self.is_kw("LEFT") || self.is_kw("RIGHT") {
                let left = self.is_kw("LEFT");
                self.pos += 1;
                self.eat_kw("OUTER");
                self.expect_kw("JOIN")?;
                if left {
                    "LEFT JOIN"
                } else {
                    "RIGHT JOIN"
                }
            } else {
                break;
            };
            let mut join = vec![self.table_ref()?];
            if self.eat_kw("ON") {
                join.push(self.expr()?);
            }
            items.push(ParseTree::node(label, join));
        }
        Ok(ParseTree::node("FROM", items))
    }

    fn table_ref(&mut self) -> Result<ParseTree, ParseError> {
        if self.eat_sym("(") {
            let q = self.query()?;
            self.expect_sym(")")?;
            self.skip_alias();
            return Ok(q);
        }
        match self.peek().cloned() {
            Some(Kind::Ident(name)) => {
                self.pos += 1;
                let mut name = name;
                if self.is_sym(".") {
                    if let Some(Kind::Ident(n)) = self.peek_at(1).cloned() {
                        self.pos += 2;
                        name = format!("{name}.{n}");
                    }
                }
                self.skip_alias();
                Ok(ParseTree::leaf(name))
            }
            _ => Err(self.error("expected table name".into())),
        }
    }

    fn expr_list(&mut self) -> Result<Vec<ParseTree>, ParseError> {
        let mut out = vec![self.expr()?];
        while self.eat_sym(",") {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<ParseTree, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<ParseTree, ParseError> {
        let mut terms = vec![self.and_expr()?];
        while self.eat_kw("OR") {
            terms.push(self.and_expr()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            ParseTree::node("OR", terms)
        })
    }

    fn and_expr(&mut self) -> Result<ParseTree, ParseError> {
        let mut terms = vec![self.not_expr()?];
        while self.eat_kw("AND") {
            terms.push(self.not_expr()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            ParseTree::node("AND", terms)
        })
    }

    fn not_expr(&mut self) -> Result<ParseTree, ParseError> {
        if self.is_kw("NOT") && !matches!(self.peek_at(1), Some(Kind::Keyword(k)) if k == "EXISTS")
        {
            self.pos += 1;
            return Ok(ParseTree::node("NOT", vec![self.not_expr()?]));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<ParseTree, ParseError> {
        let left = self.additive()?;
        if let Some(Kind::Sym(s)) = self.peek() {
            let op = match *s {
                "=" | "==" => Some("="),
                "!=" | "<>" => Some("!="),
                "<" => Some("<"),
                ">" => Some(">"),
                "<=" => Some("<="),
                ">=" => Some(">="),
                _ => None,
            };
            if let Some(op) = op {
                self.pos += 1;
                let right = self.additive()?;
                return Ok(ParseTree::node(op, vec![left, right]));
            }
        }
        let negated = if self.is_kw("NOT")
            && matches!(self.peek_at(1), Some(Kind::Keyword(k)) if k == "IN" || k == "LIKE" || k == "BETWEEN")
        {
            self.pos += 1;
            true
        } else {
            false
        };
        let with_not = |op: &str| {
            if negated {
                format!("NOT {op}")
            } else {
                op.to_string()
            }
        };
        if self.eat_kw("IN") {
            self.expect_sym("(")?;
            let mut children = vec![left];
            if self.is_kw("SELECT") {
                children.push(self.query()?);
            } else {
                children.extend(self.expr_list()?);
            }
            self.expect_sym(")")?;
            return Ok(ParseTree::node(with_not("IN"), children));
        }
        if self.eat_kw("LIKE") {
            let right = self.additive()?;
            return Ok(ParseTree::node(with_not("LIKE"), vec![left, right]));
        }
        if self.eat_kw("BETWEEN") {
            let lo = self.additive()?;
            self.expect_kw("AND")?;
            let hi = self.additive()?;
            return Ok(ParseTree::node(with_not("BETWEEN"), vec![left, lo, hi]));
        }
        if negated {
            return Err(self.error("expected IN, LIKE or BETWEEN after NOT".into()));
        }
        if self.eat_kw("IS") {
            let label = if self.eat_kw("NOT") {
                "IS NOT NULL"
            } else {
                "IS NULL"
            };
            self.expect_kw("NULL")?;
            return Ok(ParseTree::node(label, vec![left]));
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<ParseTree, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.is_sym("+") {
                "+"
            } else if self.is_sym("-") {
                "-"
            } else {
                return Ok(left);
            };
            self.pos += 1;
            let right = self.multiplicative()?;
            left = ParseTree::node(op, vec![left, right]);
        }
    }

    fn multiplicative(&mut self) -> Result<ParseTree, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.is_sym("*") {
                "*"
            } else if self.is_sym("/") {
                "/"
            } else if self.is_sym("%") {
                "%"
            } else {
                return Ok(left);
            };
            self.pos += 1;
            let right = self.unary()?;
            left = ParseTree::node(op, vec![left, right]);
        }
    }

    fn unary(&mut self) -> Result<ParseTree, ParseError> {
        if self.eat_sym("-") {
            if matches!(self.peek(), Some(Kind::Number)) {
                self.pos += 1;
                return Ok(ParseTree::leaf(NUM));
            }
            return Ok(ParseTree::node("-", vec![self.unary()?]));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<ParseTree, ParseError> {
        match self.peek().cloned() {
            Some(Kind::Number) => {
                self.pos += 1;
                Ok(ParseTree::leaf(NUM))
            }
            Some(Kind::Str) => {
                self.pos += 1;
                Ok(ParseTree::leaf(STR))
            }
            Some(Kind::Keyword(k)) if k == "NULL" => {
                self.pos += 1;
                Ok(ParseTree::leaf("NULL"))
            }
            Some(Kind::Keyword(k)) if k == "EXISTS" || k == "NOT" => {
                let label = if k == "NOT" {
                    self.pos += 1;
                    "NOT EXISTS"
                } else {
                    "EXISTS"
                };
                self.expect_kw("EXISTS")?;
                self.expect_sym("(")?;
                let q = self.query()?;
                self.expect_sym(")")?;
                Ok(ParseTree::node(label, vec![q]))
            }
            Some(Kind::Sym("(")) => {
                self.pos += 1;
                let inner = if self.is_kw("SELECT") {
                    self.query()?
                } else {
                    self.expr()?
                };
                self.expect_sym(")")?;
                Ok(inner)
            }
            Some(Kind::Ident(name)) => {
                self.pos += 1;
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if self.eat_sym("*") {
                        args.push(ParseTree::leaf("*"));
                    } else if !self.is_sym(")") {
                        if self.eat_kw("DISTINCT") {
                            args.push(ParseTree::node("DISTINCT", vec![self.expr()?]));
                            while self.eat_sym(",") {
                                args.push(self.expr()?);
                            }
                        } else {
                            args = self.expr_list()?;
                        }
                    }
                    self.expect_sym(")")?;
                    return Ok(ParseTree::node(name, args));
                }
                if self.is_sym(".") {
                    match self.peek_at(1).cloned() {
                        Some(Kind::Ident(col)) => {
                            self.pos += 2;
                            return Ok(ParseTree::leaf(format!("{name}.{col}")));
                        }
                        Some(Kind::Sym("*")) => {
                            self.pos += 2;
                            return Ok(ParseTree::leaf(format!("{name}.*")));
                        }
                        _ => return Err(self.error("expected column after `.`".into())),
                    }
                }
                Ok(ParseTree::leaf(name))
            }
            Some(Kind::Keyword(k)) => Err(ParseError::UnsupportedSyntax {
                token: k,
                pos: self.here(),
            }),
            _ => Err(self.error("expected expression".into())),
        }
    }
}

fn parse_tokens(text: &str) -> Result<(Vec<Tok>, ParseTree), ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let tree = p.query()?;
    p.eat_sym(";");
    if p.pos < p.toks.len() {
        let t = &p.toks[p.pos];
        return Err(match &t.kind {
            Kind::Keyword(k) => ParseError::UnsupportedSyntax {
                token: k.clone(),
                pos: t.pos,
            },
            _ => ParseError::syntax(t.pos, format!("unexpected `{}`", t.text)),
        });
    }
    Ok((p.toks, tree))
}

/// Parses one SQL statement into its clause-level skeleton.
pub fn parse_sql_skeleton(text: &str) -> Result<ParseTree, ParseError> {
    parse_tokens(text).map(|(_, t)| t)
}

/// Discrete features of a SQL query: uppercased keywords, lowercased
/// identifiers (tables, columns, functions) and column stars. Literals and
/// operators are dropped. The query must parse.
pub fn sql_feature_tokens(text: &str) -> Result<Vec<String>, ParseError> {
    let (toks, _) = parse_tokens(text)?;
    let mut out = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        match &t.kind {
            Kind::Keyword(k) => out.push(k.clone()),
            Kind::Ident(id) => out.push(id.clone()),
            Kind::Sym("*") => {
                let star_position = i == 0
                    || matches!(
                        &toks[i - 1].kind,
                        Kind::Sym("(") | Kind::Sym(",") | Kind::Sym(".") | Kind::Keyword(_)
                    );
                if star_position {
                    out.push("*".to_string());
                }
            }
            _ => {}
        }
    }
    Ok(out)
}
