use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::{distinct, reserved, HamiltonianSystem, ModelFile, OdeSystem, TIME};
use crate::algebra::rational::{format_rational, Rational};
use crate::algebra::{MultiPoly, Symbol};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UndeclaredSymbol(String),
    NonPolynomial(String),
    Declaration(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (tag, msg) = match &self.kind {
            ParseErrorKind::Syntax(m) => ("syntax error", m.as_str()),
            ParseErrorKind::UndeclaredSymbol(m) => ("undeclared symbol", m.as_str()),
            ParseErrorKind::NonPolynomial(m) => ("not a polynomial", m.as_str()),
            ParseErrorKind::Declaration(m) => ("declaration error", m.as_str()),
        };
        write!(f, "{}:{}: {tag}: {msg}", self.line, self.column)
    }
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Op(char),
}

struct Lexer<'a> {
    src: &'a str,
    line: usize,
    col0: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(&self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        let chars: Vec<(usize, char)> = self.src.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (_, c) = chars[i];
            let col = self.col0 + i;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].1.is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && (chars[i].1 == '.' || chars[i].1 == 'e' || chars[i].1 == 'E') {
                    return Err(err(
                        self.line,
                        self.col0 + i,
                        ParseErrorKind::Syntax("floating-point literals are not accepted; use p/q".into()),
                    ));
                }
                let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
                out.push((Tok::Num(text.parse().unwrap()), col));
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
                out.push((Tok::Ident(text), col));
            } else if "+-*/^()'=".contains(c) {
                out.push((Tok::Op(c), col));
                i += 1;
            } else if c == '.' {
                return Err(err(
                    self.line,
                    col,
                    ParseErrorKind::Syntax("floating-point literals are not accepted; use p/q".into()),
                ));
            } else {
                return Err(err(
                    self.line,
                    col,
                    ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
                ));
            }
        }
        Ok(out)
    }
}

/// Recursive-descent parser for polynomial expressions.
struct ExprParser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    end_col: usize,
    allowed: Option<&'a HashSet<String>>,
}

impl<'a> ExprParser<'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        err(self.line, self.col(), kind)
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<MultiPoly, ParseError> {
        let mut acc = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<MultiPoly, ParseError> {
        let mut acc = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let col = self.col();
            let rhs = self.unary()?;
            if c == '*' {
                acc = acc * rhs;
            } else {
                match rhs.as_constant() {
                    Some(d) if d.is_zero() => {
                        return Err(err(self.line, col, ParseErrorKind::Syntax("division by zero".into())))
                    }
                    Some(d) => acc = acc.scale(&d.recip()),
                    None => {
                        return Err(err(
                            self.line,
                            col,
                            ParseErrorKind::NonPolynomial(format!("division by `{rhs}`")),
                        ))
                    }
                }
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<MultiPoly, ParseError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<MultiPoly, ParseError> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let col = self.col();
        let e = self.unary()?;
        let bad = |what: String| err(self.line, col, ParseErrorKind::NonPolynomial(what));
        let Some(e) = e.as_constant() else {
            return Err(bad(format!("symbolic exponent `{e}`")));
        };
        if !e.is_integer() {
            return Err(bad(format!("fractional power {}", format_rational(&e))));
        }
        if e < Rational::zero() {
            return Err(bad(format!("negative power {}", format_rational(&e))));
        }
        let n = e
            .to_integer()
            .to_u32()
            .ok_or_else(|| bad("exponent too large".into()))?;
        Ok(base.pow(n))
    }

    fn atom(&mut self) -> Result<MultiPoly, ParseError> {
        let Some((tok, col)) = self.toks.get(self.pos).cloned() else {
            return Err(self.error(ParseErrorKind::Syntax("unexpected end of expression".into())));
        };
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(MultiPoly::constant(Rational::from_integer(n))),
            Tok::Ident(name) => {
                if let Some(allowed) = self.allowed {
                    if !allowed.contains(&name) {
                        return Err(err(self.line, col, ParseErrorKind::UndeclaredSymbol(name)));
                    }
                }
                Ok(MultiPoly::var(&name))
            }
            Tok::Op('(') => {
                let inner = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(self.error(ParseErrorKind::Syntax("expected `)`".into())));
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Op(c) => Err(err(
                self.line,
                col,
                ParseErrorKind::Syntax(format!("unexpected `{c}`")),
            )),
        }
    }
}

fn parse_poly(
    text: &str,
    line: usize,
    col0: usize,
    allowed: Option<&HashSet<String>>,
) -> Result<MultiPoly, ParseError> {
    let toks = Lexer { src: text, line, col0 }.tokens()?;
    let mut p = ExprParser {
        toks: &toks,
        pos: 0,
        line,
        end_col: col0 + text.chars().count(),
        allowed,
    };
    let out = p.expr()?;
    if p.pos != toks.len() {
        return Err(p.error(ParseErrorKind::Syntax("unexpected trailing input".into())));
    }
    Ok(out)
}

/// Parses a single polynomial expression; any identifier is accepted.
pub fn parse_expr(text: &str) -> Result<MultiPoly, ParseError> {
    parse_poly(text, 1, 1, None)
}

fn ident_ok(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn parse_name_list(text: &str, line: usize, col: usize) -> Result<Vec<Symbol>, ParseError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let name = part.trim();
        if !ident_ok(name) {
            return Err(err(
                line,
                col,
                ParseErrorKind::Syntax(format!("bad identifier `{name}`")),
            ));
        }
        if reserved(name) {
            return Err(err(
                line,
                col,
                ParseErrorKind::Declaration(format!("`{name}` is reserved")),
            ));
        }
        out.push(Symbol::new(name));
    }
    Ok(out)
}

#[derive(PartialEq, Clone, Copy)]
enum Mode {
    System,
    Hamiltonian,
}

/// Parses either kind of input file. The header line is optional; without it a
/// file containing an `H =` line or a `;` in its vars line is a Hamiltonian.
pub fn parse_file(text: &str) -> Result<ModelFile, ParseError> {
    let mut mode: Option<Mode> = None;
    let mut q: Option<Vec<Symbol>> = None;
    let mut p: Option<Vec<Symbol>> = None;
    let mut params: Vec<String> = Vec::new();
    // (line number, column of expression, lhs name, expression text)
    let mut eqns: Vec<(usize, usize, usize, String, String)> = Vec::new();
    let mut seen_content = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let col = |offset: usize| content[..offset].chars().count() + 1;
        if trimmed == "system" || trimmed == "hamiltonian" {
            if seen_content {
                return Err(err(
                    line,
                    indent + 1,
                    ParseErrorKind::Syntax("header must be the first line".into()),
                ));
            }
            mode = Some(if trimmed == "system" { Mode::System } else { Mode::Hamiltonian });
            seen_content = true;
            continue;
        }
        seen_content = true;
        if let Some(rest) = trimmed.strip_prefix("vars:") {
            if q.is_some() {
                return Err(err(line, indent + 1, ParseErrorKind::Declaration("vars declared twice".into())));
            }
            let c = col(indent + 5);
            match rest.split_once(';') {
                Some((a, b)) => {
                    q = Some(parse_name_list(a, line, c)?);
                    p = Some(parse_name_list(b, line, c)?);
                }
                None => q = Some(parse_name_list(rest, line, c)?),
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("params:") {
            let names = parse_name_list(rest, line, col(indent + 7))?;
            params = names.iter().map(|s| s.name().to_string()).collect();
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(err(
                line,
                indent + 1,
                ParseErrorKind::Syntax("expected `name' = expression` or `H = expression`".into()),
            ));
        };
        let lhs = content[..eq].trim();
        let rhs = content[eq + 1..].to_string();
        let (name, kind) = match lhs.strip_suffix('\'') {
            Some(n) => (n.trim().to_string(), 0),
            None => (lhs.to_string(), 1),
        };
        if !ident_ok(&name) {
            return Err(err(
                line,
                indent + 1,
                ParseErrorKind::Syntax(format!("bad left-hand side `{lhs}`")),
            ));
        }
        eqns.push((line, col(eq + 1), kind, name, rhs));
    }

    let mode = mode.unwrap_or(if p.is_some() || eqns.iter().any(|e| e.2 == 1) {
        Mode::Hamiltonian
    } else {
        Mode::System
    });
    let last_line = text.lines().count().max(1);
    let Some(q) = q else {
        return Err(err(last_line, 1, ParseErrorKind::Declaration("missing `vars:` line".into())));
    };

    match mode {
        Mode::System => {
            if p.is_some() {
                return Err(err(
                    1,
                    1,
                    ParseErrorKind::Declaration("`;` in vars is only valid for a hamiltonian".into()),
                ));
            }
            if !distinct(&q) {
                return Err(err(1, 1, ParseErrorKind::Declaration("duplicate variable".into())));
            }
            let allowed: HashSet<String> = q
                .iter()
                .map(|s| s.name().to_string())
                .chain([TIME.to_string()])
                .collect();
            let mut rhs: BTreeMap<usize, MultiPoly> = BTreeMap::new();
            for (line, c, kind, name, text) in eqns {
                if kind != 0 {
                    return Err(err(
                        line,
                        1,
                        ParseErrorKind::Syntax("expected a derivative `name'` on the left".into()),
                    ));
                }
                let Some(i) = q.iter().position(|s| s.name() == name) else {
                    return Err(err(line, 1, ParseErrorKind::UndeclaredSymbol(name)));
                };
                if rhs.contains_key(&i) {
                    return Err(err(
                        line,
                        1,
                        ParseErrorKind::Declaration(format!("second equation for `{name}`")),
                    ));
                }
                rhs.insert(i, parse_poly(&text, line, c, Some(&allowed))?);
            }
            if let Some(missing) = q.iter().enumerate().find(|(i, _)| !rhs.contains_key(i)) {
                return Err(err(
                    last_line,
                    1,
                    ParseErrorKind::Declaration(format!("no equation for `{}`", missing.1)),
                ));
            }
            Ok(ModelFile::System(OdeSystem {
                vars: q,
                rhs: rhs.into_values().collect(),
                params,
            }))
        }
        Mode::Hamiltonian => {
            let Some(p) = p else {
                return Err(err(
                    1,
                    1,
                    ParseErrorKind::Declaration("hamiltonian needs `vars: q... ; p...`".into()),
                ));
            };
            if p.len() != q.len() {
                return Err(err(
                    1,
                    1,
                    ParseErrorKind::Declaration("q and p lists differ in length".into()),
                ));
            }
            let all: Vec<Symbol> = q.iter().chain(&p).cloned().collect();
            if !distinct(&all) {
                return Err(err(1, 1, ParseErrorKind::Declaration("duplicate variable".into())));
            }
            let allowed: HashSet<String> = all
                .iter()
                .map(|s| s.name().to_string())
                .chain([TIME.to_string()])
                .collect();
            let mut h: Option<MultiPoly> = None;
            for (line, c, kind, name, text) in eqns {
                if kind != 1 || name != "H" {
                    return Err(err(line, 1, ParseErrorKind::Syntax("expected `H = expression`".into())));
                }
                if h.is_some() {
                    return Err(err(line, 1, ParseErrorKind::Declaration("H given twice".into())));
                }
                h = Some(parse_poly(&text, line, c, Some(&allowed))?);
            }
            let Some(h) = h else {
                return Err(err(last_line, 1, ParseErrorKind::Declaration("missing `H =` line".into())));
            };
            Ok(ModelFile::Hamiltonian(HamiltonianSystem { q, p, h, params }))
        }
    }
}

pub fn parse_system(text: &str) -> Result<OdeSystem, ParseError> {
    match parse_file(text)? {
        ModelFile::System(s) => Ok(s),
        ModelFile::Hamiltonian(_) => Err(err(
            1,
            1,
            ParseErrorKind::Declaration("expected a system, found a hamiltonian".into()),
        )),
    }
}

pub fn parse_hamiltonian(text: &str) -> Result<HamiltonianSystem, ParseError> {
    match parse_file(text)? {
        ModelFile::Hamiltonian(h) => Ok(h),
        ModelFile::System(_) => Err(err(
            1,
            1,
            ParseErrorKind::Declaration("hamiltonian needs `vars: q... ; p...` and `H = ...`".into()),
        )),
    }
}
