//! Restricted interpreter for `regexr_transform` snippets.
//!
//! Snippets look like Python but only a closed set of statements is
//! accepted, in this order:
//!
//! ```text
//! jython: [import re]
//!         [match = re.search(r'<pattern>', value)]
//!         [if match: return match.group(<k>) | '<literal>']
//!         [return <expr>]
//! ```
//!
//! where `<expr>` is one of `value`, a string literal, `match.group(k)`,
//! `re.sub(r'<p>', '<r>', value)`, `value.strip()`, `value.upper()` or
//! `value.lower()`. At least one `return` is required. Anything else
//! (loops, other assignments, arbitrary calls) is a [`ParseError`].
//! Statements are separated by newlines or `;`.

use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::table::CellValue;

const PREFIX: &str = "jython:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {position}: expected {expected}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
}

impl ParseError {
    fn new(position: usize, expected: impl Into<String>) -> Self {
        Self {
            position,
            expected: expected.into(),
        }
    }
}

/// A parsed snippet. `source` keeps the original text for serialization.
#[derive(Clone)]
pub struct TransformExpr {
    source: String,
    program: Program,
}

impl TransformExpr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    /// True for programs that always return the cell unchanged.
    pub fn is_identity(&self) -> bool {
        self.program.conditional.is_none() && matches!(self.program.fallback, Some(Expr::Value))
    }
}

impl fmt::Debug for TransformExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformExpr")
            .field("source", &self.source)
            .field("program", &self.program)
            .finish()
    }
}

impl PartialEq for TransformExpr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

#[derive(Debug, Clone)]
pub struct Program {
    pub imports_re: bool,
    pub search: Option<Regex>,
    pub conditional: Option<Expr>,
    pub fallback: Option<Expr>,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Value,
    Literal(String),
    Group(usize),
    Sub { pattern: Regex, replacement: String },
    Strip,
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(usize),
    Dot,
    LParen,
    RParen,
    Comma,
    Colon,
    Assign,
    Sep,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Sep => "end of statement".into(),
        }
    }
}

fn lex(src: &str, offset: usize) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let pos = offset + i;
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'\n' | b';' => {
                out.push((pos, Tok::Sep));
                i += 1;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'.' => {
                out.push((pos, Tok::Dot));
                i += 1;
            }
            b'(' => {
                out.push((pos, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((pos, Tok::RParen));
                i += 1;
            }
            b',' => {
                out.push((pos, Tok::Comma));
                i += 1;
            }
            b':' => {
                out.push((pos, Tok::Colon));
                i += 1;
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    return Err(ParseError::new(pos, "`=` (comparisons are not supported)"));
                }
                out.push((pos, Tok::Assign));
                i += 1;
            }
            b'\'' | b'"' => {
                let (s, next) = lex_string(src, i, false, offset)?;
                out.push((pos, Tok::Str(s)));
                i = next;
            }
            b'r' | b'R' if matches!(bytes.get(i + 1), Some(b'\'') | Some(b'"')) => {
                let (s, next) = lex_string(src, i + 1, true, offset)?;
                out.push((pos, Tok::Str(s)));
                i = next;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n = src[start..i]
                    .parse()
                    .map_err(|_| ParseError::new(pos, "small integer"))?;
                out.push((pos, Tok::Int(n)));
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push((pos, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(pos, format!("statement token, found {ch:?}")));
            }
        }
    }
    Ok(out)
}

/// Lexes a single- or double-quoted literal starting at the quote byte `q`.
fn lex_string(src: &str, q: usize, raw: bool, offset: usize) -> Result<(String, usize), ParseError> {
    let quote = src.as_bytes()[q] as char;
    let mut out = String::new();
    let mut chars = src[q + 1..].char_indices();
    while let Some((j, c)) = chars.next() {
        match c {
            c if c == quote => return Ok((out, q + 1 + j + 1)),
            '\n' => break,
            '\\' => {
                let Some((_, esc)) = chars.next() else { break };
                if raw {
                    out.push('\\');
                    out.push(esc);
                } else {
                    match esc {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        '\\' => out.push('\\'),
                        '\'' => out.push('\''),
                        '"' => out.push('"'),
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
            }
            c => out.push(c),
        }
    }
    Err(ParseError::new(offset + q, "closing quote"))
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err(&self, expected: &str) -> ParseError {
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_string(), Tok::describe);
        ParseError::new(self.pos(), format!("{expected}, found {found}"))
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(tok) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn expect_ident(&mut self, name: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == name => {
                self.at += 1;
                Ok(())
            }
            _ => Err(self.err(&format!("`{name}`"))),
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == name)
    }

    fn skip_seps(&mut self) {
        while self.peek() == Some(&Tok::Sep) {
            self.at += 1;
        }
    }

    fn end_statement(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(Tok::Sep) => {
                self.skip_seps();
                Ok(())
            }
            _ => Err(self.err("end of statement")),
        }
    }

    fn string(&mut self, what: &str) -> Result<(usize, String), ParseError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok((pos, s))
            }
            _ => Err(self.err(what)),
        }
    }
}

fn compile(pattern: &str, pos: usize) -> Result<Regex, ParseError> {
    Regex::new(pattern).map_err(|e| {
        let msg = e.to_string();
        let first = msg.lines().last().unwrap_or("invalid pattern").trim();
        ParseError::new(pos, format!("valid regular expression ({first})"))
    })
}

/// Parses a snippet into a [`TransformExpr`].
pub fn parse_transform_expr(source: &str) -> Result<TransformExpr, ParseError> {
    let lead = source.len() - source.trim_start().len();
    if !source[lead..].starts_with(PREFIX) {
        return Err(ParseError::new(lead, "`jython:` prefix"));
    }
    let body_at = lead + PREFIX.len();
    let toks = lex(&source[body_at..], body_at)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: source.len(),
    };

    let mut program = Program {
        imports_re: false,
        search: None,
        conditional: None,
        fallback: None,
    };
    // 0 start, 1 after import, 2 after search, 3 after conditional
    let mut phase = 0;
    p.skip_seps();
    while p.peek().is_some() {
        if program.fallback.is_some() {
            return Err(p.err("end of program after `return`"));
        }
        if phase == 0 && p.is_ident("import") {
            p.bump();
            p.expect_ident("re")?;
            program.imports_re = true;
            phase = 1;
        } else if phase <= 1 && p.is_ident("match") {
            p.bump();
            p.expect(&Tok::Assign, "`=`")?;
            p.expect_ident("re")?;
            p.expect(&Tok::Dot, "`.`")?;
            p.expect_ident("search")?;
            p.expect(&Tok::LParen, "`(`")?;
            let (pat_pos, pattern) = p.string("pattern string")?;
            p.expect(&Tok::Comma, "`,`")?;
            p.expect_ident("value")?;
            p.expect(&Tok::RParen, "`)`")?;
            program.search = Some(compile(&pattern, pat_pos)?);
            phase = 2;
        } else if phase == 2 && p.is_ident("if") {
            p.bump();
            p.expect_ident("match")?;
            p.expect(&Tok::Colon, "`:`")?;
            p.skip_seps();
            p.expect_ident("return")?;
            let expr = parse_return_expr(&mut p, program.search.as_ref(), true)?;
            program.conditional = Some(expr);
            phase = 3;
        } else if p.is_ident("return") {
            p.bump();
            let expr = parse_return_expr(&mut p, program.search.as_ref(), false)?;
            program.fallback = Some(expr);
        } else {
            let expected = match phase {
                0 => "`import re`, `match = re.search(...)` or `return`",
                1 => "`match = re.search(...)` or `return`",
                2 => "`if match:` or `return`",
                _ => "`return`",
            };
            return Err(p.err(expected));
        }
        p.end_statement()?;
    }
    if program.conditional.is_none() && program.fallback.is_none() {
        return Err(ParseError::new(source.len(), "at least one `return` statement"));
    }
    Ok(TransformExpr {
        source: source.to_string(),
        program,
    })
}

fn parse_return_expr(
    p: &mut Parser,
    search: Option<&Regex>,
    conditional: bool,
) -> Result<Expr, ParseError> {
    let start = p.pos();
    match p.peek().cloned() {
        Some(Tok::Str(s)) => {
            p.bump();
            Ok(Expr::Literal(s))
        }
        Some(Tok::Ident(name)) if name == "match" => {
            p.bump();
            p.expect(&Tok::Dot, "`.`")?;
            p.expect_ident("group")?;
            p.expect(&Tok::LParen, "`(`")?;
            let group_pos = p.pos();
            let group = match p.peek() {
                Some(Tok::Int(n)) => {
                    let n = *n;
                    p.bump();
                    n
                }
                _ => 0,
            };
            p.expect(&Tok::RParen, "`)`")?;
            let Some(re) = search else {
                return Err(ParseError::new(start, "`match = re.search(...)` before `match.group`"));
            };
            if group >= re.captures_len() {
                return Err(ParseError::new(
                    group_pos,
                    format!("capture group below {} for this pattern", re.captures_len()),
                ));
            }
            Ok(Expr::Group(group))
        }
        _ if conditional => Err(p.err("`match.group(k)` or string literal")),
        Some(Tok::Ident(name)) if name == "value" => {
            p.bump();
            if p.peek() != Some(&Tok::Dot) {
                return Ok(Expr::Value);
            }
            p.bump();
            let method = match p.bump() {
                Some(Tok::Ident(m)) => m,
                _ => return Err(ParseError::new(p.pos(), "`strip`, `upper` or `lower`")),
            };
            let expr = match method.as_str() {
                "strip" => Expr::Strip,
                "upper" => Expr::Upper,
                "lower" => Expr::Lower,
                _ => {
                    return Err(ParseError::new(
                        p.toks[p.at - 1].0,
                        "`strip`, `upper` or `lower`",
                    ))
                }
            };
            p.expect(&Tok::LParen, "`(`")?;
            p.expect(&Tok::RParen, "`)`")?;
            Ok(expr)
        }
        Some(Tok::Ident(name)) if name == "re" => {
            p.bump();
            p.expect(&Tok::Dot, "`.`")?;
            p.expect_ident("sub")?;
            p.expect(&Tok::LParen, "`(`")?;
            let (pat_pos, pattern) = p.string("pattern string")?;
            p.expect(&Tok::Comma, "`,`")?;
            let (rep_pos, replacement) = p.string("replacement string")?;
            p.expect(&Tok::Comma, "`,`")?;
            p.expect_ident("value")?;
            p.expect(&Tok::RParen, "`)`")?;
            let pattern = compile(&pattern, pat_pos)?;
            let replacement = convert_replacement(&replacement, pattern.captures_len(), rep_pos)?;
            Ok(Expr::Sub {
                pattern,
                replacement,
            })
        }
        _ => Err(p.err("return expression")),
    }
}

/// Rewrites a Python `re.sub` replacement template into `regex` syntax.
fn convert_replacement(rep: &str, groups: usize, pos: usize) -> Result<String, ParseError> {
    let mut out = String::new();
    let mut chars = rep.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '$' => out.push_str("$$"),
            '\\' => match chars.next() {
                Some(d) if d.is_ascii_digit() => {
                    let mut num = d.to_string();
                    if let Some(d2) = chars.peek().copied().filter(char::is_ascii_digit) {
                        num.push(d2);
                        chars.next();
                    }
                    let n: usize = num.parse().unwrap_or(usize::MAX);
                    if n >= groups {
                        return Err(ParseError::new(pos, "existing group in replacement"));
                    }
                    out.push_str(&format!("${{{n}}}"));
                }
                Some('g') if chars.peek() == Some(&'<') => {
                    chars.next();
                    let name: String = chars.by_ref().take_while(|c| *c != '>').collect();
                    if let Ok(n) = name.parse::<usize>() {
                        if n >= groups {
                            return Err(ParseError::new(pos, "existing group in replacement"));
                        }
                    }
                    out.push_str(&format!("${{{name}}}"));
                }
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            },
            c => out.push(c),
        }
    }
    Ok(out)
}

/// Evaluates a program on one cell. Non-text cells, failed matches with no
/// fallback, and group references without a match all leave the cell as is.
pub fn eval_transform_expr(expr: &TransformExpr, cell: &CellValue) -> CellValue {
    let CellValue::Text(value) = cell else {
        return cell.clone();
    };
    let program = &expr.program;
    let caps = program.search.as_ref().and_then(|re| re.captures(value));

    if let (Some(cond), Some(caps)) = (&program.conditional, &caps) {
        match cond {
            Expr::Group(k) => {
                if let Some(m) = caps.get(*k) {
                    return CellValue::Text(m.as_str().to_string());
                }
                return cell.clone();
            }
            Expr::Literal(s) => return CellValue::Text(s.clone()),
            _ => unreachable!("conditional returns are groups or literals"),
        }
    }

    let Some(fallback) = &program.fallback else {
        return cell.clone();
    };
    let out = match fallback {
        Expr::Value => return cell.clone(),
        Expr::Literal(s) => s.clone(),
        Expr::Group(k) => match caps.as_ref().and_then(|c| c.get(*k)) {
            Some(m) => m.as_str().to_string(),
            None => return cell.clone(),
        },
        Expr::Sub {
            pattern,
            replacement,
        } => pattern.replace_all(value, replacement.as_str()).into_owned(),
        Expr::Strip => value.trim().to_string(),
        Expr::Upper => value.to_uppercase(),
        Expr::Lower => value.to_lowercase(),
    };
    CellValue::Text(out)
}
