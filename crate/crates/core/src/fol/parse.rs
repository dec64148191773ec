use std::collections::BTreeMap;

use super::{FolError, FolRule, Formula, PredicateDef, RuleBase};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    At,
    Colon,
    Bar,
    Amp,
    Bang,
    LParen,
    RParen,
    Arrow,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::At => "`@`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bang => "`!`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Arrow => "`->`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.' || c == '-'
}

fn lex(source: &str) -> Result<Vec<Spanned>, FolError> {
    let mut out = Vec::new();
    let mut chars = source.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    let syntax = |line, column, message: String| FolError::Syntax { line, column, message };

    while let Some(&c) = chars.peek() {
        let (start_line, start_col) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        };
        let single = match c {
            '@' => Some(Tok::At),
            ':' => Some(Tok::Colon),
            '|' => Some(Tok::Bar),
            '&' => Some(Tok::Amp),
            '!' => Some(Tok::Bang),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            bump(&mut chars);
            out.push(Spanned { tok, line: start_line, column: start_col });
            continue;
        }
        if c.is_whitespace() {
            bump(&mut chars);
        } else if c == '#' {
            while let Some(&n) = chars.peek() {
                if n == '\n' {
                    break;
                }
                bump(&mut chars);
            }
        } else if c == '-' {
            bump(&mut chars);
            if chars.peek() == Some(&'>') {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Arrow, line: start_line, column: start_col });
            } else {
                return Err(syntax(start_line, start_col, "expected `->`".into()));
            }
        } else if c == '"' {
            bump(&mut chars);
            let mut s = String::new();
            loop {
                match bump(&mut chars) {
                    None => return Err(syntax(start_line, start_col, "unterminated string".into())),
                    Some('"') => break,
                    Some('\\') => match bump(&mut chars) {
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some(other) => {
                            return Err(syntax(line, column - 1, format!("unknown escape `\\{other}`")))
                        }
                        None => return Err(syntax(start_line, start_col, "unterminated string".into())),
                    },
                    Some(other) => s.push(other),
                }
            }
            out.push(Spanned { tok: Tok::Str(s), line: start_line, column: start_col });
        } else if is_word_char(c) {
            let mut w = String::new();
            while let Some(&n) = chars.peek() {
                if !is_word_char(n) {
                    break;
                }
                // `P3->` is a word followed by an arrow.
                if n == '-' {
                    let mut ahead = chars.clone();
                    ahead.next();
                    if ahead.peek() == Some(&'>') {
                        break;
                    }
                }
                w.push(n);
                bump(&mut chars);
            }
            out.push(Spanned { tok: Tok::Word(w), line: start_line, column: start_col });
        } else {
            return Err(syntax(start_line, start_col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.eof)
    }

    fn error(&self, message: impl Into<String>) -> FolError {
        let (line, column) = self.here();
        FolError::Syntax { line, column, message: message.into() }
    }

    fn unexpected(&self, wanted: &str) -> FolError {
        match self.peek() {
            Some(t) => self.error(format!("expected {wanted}, found {}", t.describe())),
            None => self.error(format!("expected {wanted}, found end of input")),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), FolError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn word(&mut self, wanted: &str) -> Result<String, FolError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn string(&mut self, wanted: &str) -> Result<String, FolError> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn disj(&mut self) -> Result<Formula, FolError> {
        let mut items = vec![self.conj()?];
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            items.push(self.conj()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::Or(items) })
    }

    fn conj(&mut self) -> Result<Formula, FolError> {
        let mut items = vec![self.lit()?];
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            items.push(self.lit()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::And(items) })
    }

    fn lit(&mut self) -> Result<Formula, FolError> {
        let negated = if self.peek() == Some(&Tok::Bang) {
            self.pos += 1;
            true
        } else {
            false
        };
        let inner = match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.disj()?;
                self.expect(Tok::RParen, "`)`")?;
                f
            }
            Some(Tok::Word(_)) => Formula::Atom(self.word("predicate id")?),
            _ => return Err(self.unexpected("predicate id or `(`")),
        };
        Ok(if negated { Formula::not(inner) } else { inner })
    }
}

/// Parses rule-base source text.
///
/// ```text
/// rulebase  := (pred_decl | rule_decl)*
/// pred_decl := "pred" ID "@" ARTICLE_ID ":" STRING
/// rule_decl := "article" ARTICLE_ID ["chapter" ID] ":" disj "->" STRING
/// disj      := conj ("|" conj)*
/// conj      := lit ("&" lit)*
/// lit       := "!"? (ID | "(" disj ")")
/// ```
///
/// `#` starts a line comment. Strings accept `\"`, `\\`, `\n` and `\t`.
pub fn parse_rulebase(source: &str) -> Result<RuleBase, FolError> {
    let toks = lex(source)?;
    let eof = {
        let line = source.lines().count().max(1);
        let column = source.lines().last().map_or(1, |l| l.chars().count() + 1);
        (line, column)
    };
    let mut p = Parser { toks, pos: 0, eof };

    let mut predicates = Vec::new();
    let mut rules = Vec::new();
    let mut chapters = BTreeMap::new();

    while p.peek().is_some() {
        match p.peek() {
            Some(Tok::Word(w)) if w == "pred" => {
                p.pos += 1;
                let id = p.word("predicate id")?;
                p.expect(Tok::At, "`@`")?;
                let article_id = p.word("article id")?;
                p.expect(Tok::Colon, "`:`")?;
                let text = p.string("predicate text")?;
                predicates.push(PredicateDef { id, article_id, text });
            }
            Some(Tok::Word(w)) if w == "article" => {
                p.pos += 1;
                let article_id = p.word("article id")?;
                if matches!(p.peek(), Some(Tok::Word(w)) if w == "chapter") {
                    p.pos += 1;
                    let chapter = p.word("chapter id")?;
                    chapters.insert(article_id.clone(), chapter);
                }
                p.expect(Tok::Colon, "`:`")?;
                let body = p.disj()?;
                p.expect(Tok::Arrow, "`->`")?;
                let head = p.string("conclusion string")?;
                rules.push(FolRule { article_id, body, head });
            }
            _ => return Err(p.unexpected("`pred` or `article`")),
        }
    }

    RuleBase::new(predicates, rules, chapters)
}
