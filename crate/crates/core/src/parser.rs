//! Fault-tolerant parsing of raw completion text into an [`IRModel`].
//!
//! Model output rarely arrives clean. The parser looks for the first block
//! that has a `Variables` section, constraint lines and an `Objective
//! Function` section, ignoring framing such as code fences, quotes,
//! `### Solution` headings or an `Example Response:` prefix. Anything odd is
//! reported as a [`Diagnostic`] rather than an error: a second block
//! ([`DiagnosticKind::ExtraBlock`]), chatter after the block
//! ([`DiagnosticKind::TrailingNoise`]), a constraint cut off mid-expression
//! ([`DiagnosticKind::TruncatedLine`], the line is dropped), exact repeats
//! ([`DiagnosticKind::RepeatedConstraint`], kept in the model).

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostic::{Diagnostic, DiagnosticKind};
use crate::ir::{
    normalize_expr, validate_ir_spanned, Constraint, Direction, IRModel, Identifier, LinearExpr, Objective, Relation,
    SourceSpans,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("expression syntax error at byte {offset}: {message}")]
    ExprSyntax { offset: usize, message: String },
    #[error("invalid number {0:?}")]
    NumberSyntax(String),
    #[error("division by zero in {0:?}")]
    DivisionByZero(String),
}

/// Result of [`parse_ir`]. `model` is `None` exactly when a `MissingSection`
/// diagnostic for `Variables` or `Objective Function` is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub model: Option<IRModel>,
    pub diagnostics: Vec<Diagnostic>,
    /// Byte length of the input up to the end of the first complete block,
    /// or 0 when there is none.
    pub consumed: usize,
}

impl ParseOutcome {
    pub fn has(&self, kind: DiagnosticKind) -> bool {
        self.diagnostics.iter().any(|d| d.kind == kind)
    }

    pub fn count(&self, kind: DiagnosticKind) -> usize {
        self.diagnostics.iter().filter(|d| d.kind == kind).count()
    }
}

pub const SECTION_VARIABLES: &str = "Variables";
pub const SECTION_CONSTRAINTS: &str = "Constraints";
pub const SECTION_OBJECTIVE: &str = "Objective Function";

// ---------------------------------------------------------------------------
// numbers

/// Parses a standalone number: integers, decimals, signed or parenthesized
/// values, and simple fractions `p/q`.
pub fn parse_number(token: &str) -> Result<f64, ParseError> {
    let syntax = || ParseError::NumberSyntax(token.to_string());
    let mut s = token.trim();
    let mut negative = false;
    loop {
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            s = inner.trim();
        } else if let Some(rest) = s.strip_prefix('-').or_else(|| s.strip_prefix('\u{2212}')) {
            negative = !negative;
            s = rest.trim_start();
        } else if let Some(rest) = s.strip_prefix('+') {
            s = rest.trim_start();
        } else {
            break;
        }
    }
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num = parse_plain_number(num.trim()).ok_or_else(syntax)?;
            let den = parse_plain_number(den.trim()).ok_or_else(syntax)?;
            if den == 0.0 {
                return Err(ParseError::DivisionByZero(token.to_string()));
            }
            num / den
        }
        None => parse_plain_number(s).ok_or_else(syntax)?,
    };
    let value = if negative { -value } else { value };
    Ok(value + 0.0)
}

fn parse_plain_number(s: &str) -> Option<f64> {
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let ok = !digits.is_empty()
        && digits.chars().all(|c| c.is_ascii_digit() || c == '.')
        && digits.chars().filter(|&c| c == '.').count() <= 1
        && digits.chars().any(|c| c.is_ascii_digit());
    if !ok {
        return None;
    }
    digits.parse::<f64>().ok().map(|v| sign * v)
}

// ---------------------------------------------------------------------------
// expressions

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Word,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let c = text[i..].chars().next().expect("in bounds");
        let width = c.len_utf8();
        let single = |tok| Token {
            tok,
            start: i,
            end: i + width,
        };
        match c {
            c if c.is_whitespace() => {
                i += width;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < text.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let raw = &text[start..i];
                let value = parse_plain_number(raw).ok_or_else(|| ParseError::ExprSyntax {
                    offset: start,
                    message: format!("invalid number {raw:?}"),
                })?;
                tokens.push(Token {
                    tok: Tok::Num(value),
                    start,
                    end: i,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < text.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    tok: Tok::Word,
                    start,
                    end: i,
                });
            }
            '(' | '[' => {
                tokens.push(single(Tok::LParen));
                i += width;
            }
            ')' | ']' => {
                tokens.push(single(Tok::RParen));
                i += width;
            }
            '+' => {
                tokens.push(single(Tok::Plus));
                i += width;
            }
            '-' | '\u{2212}' | '\u{2013}' => {
                tokens.push(single(Tok::Minus));
                i += width;
            }
            '*' | '\u{00b7}' | '\u{00d7}' | '\u{22c5}' => {
                tokens.push(single(Tok::Star));
                i += width;
            }
            '/' => {
                tokens.push(single(Tok::Slash));
                i += width;
            }
            other => {
                return Err(ParseError::ExprSyntax {
                    offset: i,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(tokens)
}

struct ExprParser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    declared: &'a [Vec<String>],
    declared_ids: &'a [Identifier],
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.start).unwrap_or(self.text.len())
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::ExprSyntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn parse(mut self) -> Result<LinearExpr, ParseError> {
        let mut expr = LinearExpr::default();
        if self.tokens.is_empty() {
            return Err(self.error("empty expression"));
        }
        let mut first = true;
        while self.pos < self.tokens.len() {
            let mut sign = 1.0;
            let mut saw_sign = false;
            while let Some(tok) = self.peek() {
                match tok {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                saw_sign = true;
                self.pos += 1;
            }
            if !first && !saw_sign {
                return Err(self.error("expected `+` or `-` between terms"));
            }
            if self.peek().is_none() {
                return Err(self.error("expression ends after a sign"));
            }
            self.term(sign, &mut expr)?;
            first = false;
        }
        Ok(expr)
    }

    fn term(&mut self, sign: f64, expr: &mut LinearExpr) -> Result<(), ParseError> {
        let coef = match self.peek() {
            Some(Tok::Num(_)) | Some(Tok::LParen) => Some(self.number_atom()?),
            _ => None,
        };
        let starred = coef.is_some() && self.peek() == Some(&Tok::Star);
        if starred {
            self.pos += 1;
        }
        if self.peek() == Some(&Tok::Word) {
            let var = self.identifier()?;
            let mut value = coef.unwrap_or(1.0);
            loop {
                match self.peek() {
                    Some(Tok::Slash) => {
                        self.pos += 1;
                        let den = self.number_atom()?;
                        if den == 0.0 {
                            return Err(ParseError::DivisionByZero(self.text.to_string()));
                        }
                        value /= den;
                    }
                    Some(Tok::Star) => {
                        self.pos += 1;
                        value *= self.number_atom()?;
                    }
                    _ => break,
                }
            }
            expr.terms.push((sign * value + 0.0, var));
            return Ok(());
        }
        match coef {
            Some(value) if !starred => {
                expr.constant += sign * value;
                expr.constant += 0.0;
                Ok(())
            }
            Some(_) => Err(self.error("expected a variable after `*`")),
            None => Err(self.error("expected a coefficient, variable or constant")),
        }
    }

    /// `number`, `number / number`, or a parenthesized signed form of either.
    fn number_atom(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let mut sign = 1.0;
                while let Some(tok) = self.peek() {
                    match tok {
                        Tok::Plus => {}
                        Tok::Minus => sign = -sign,
                        _ => break,
                    }
                    self.pos += 1;
                }
                let value = self.fraction()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(sign * value)
            }
            Some(Tok::Num(_)) => self.fraction(),
            _ => Err(self.error("expected a number")),
        }
    }

    fn fraction(&mut self) -> Result<f64, ParseError> {
        let num = self.plain_number()?;
        if self.peek() == Some(&Tok::Slash)
            && matches!(self.tokens.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Num(_)))
        {
            let start = self.tokens[self.pos - 1].start;
            self.pos += 1;
            let den = self.plain_number()?;
            let end = self.tokens[self.pos - 1].end;
            if den == 0.0 {
                return Err(ParseError::DivisionByZero(self.text[start..end].to_string()));
            }
            return Ok(num / den);
        }
        Ok(num)
    }

    fn plain_number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("expected a number")),
        }
    }

    /// Consumes a run of adjacent words as one identifier. With a declared
    /// list, the longest declared name matching a prefix of the run wins;
    /// otherwise (or with no match) the whole run is taken verbatim.
    fn identifier(&mut self) -> Result<Identifier, ParseError> {
        let run_end = self.tokens[self.pos..]
            .iter()
            .position(|t| t.tok != Tok::Word)
            .map(|n| self.pos + n)
            .unwrap_or(self.tokens.len());
        let words: Vec<&str> = self.tokens[self.pos..run_end]
            .iter()
            .map(|t| &self.text[t.start..t.end])
            .collect();

        if !self.declared.is_empty() {
            for take in (1..=words.len()).rev() {
                let sub: Vec<String> = words[..take]
                    .iter()
                    .flat_map(|w| crate::ir::word_subtokens(w))
                    .collect();
                if let Some(idx) = self.declared.iter().position(|d| *d == sub) {
                    self.pos += take;
                    return Ok(self.declared_ids[idx].clone());
                }
            }
        }
        let start = self.tokens[self.pos].start;
        let end = self.tokens[run_end - 1].end;
        let id = Identifier::new(&self.text[start..end]).map_err(|_| ParseError::ExprSyntax {
            offset: start,
            message: format!("invalid identifier {:?}", &self.text[start..end]),
        })?;
        self.pos = run_end;
        Ok(id)
    }
}

/// Parses one side of a constraint (or an objective) into its raw terms.
///
/// Accepts `(c) * v`, `c * v`, `c v`, `cv`, bare `v` (coefficient 1), `v / q`,
/// fractions, and constant terms. Multi-word variables are matched
/// greedy-longest against `declared`; with an empty list, runs of words are
/// taken verbatim. The result is not normalized.
pub fn parse_expr(text: &str, declared: &[Identifier]) -> Result<LinearExpr, ParseError> {
    let keys: Vec<Vec<String>> = declared
        .iter()
        .map(|d| crate::ir::word_subtokens(d.as_str()).collect())
        .collect();
    parse_expr_with(text, declared, &keys)
}

fn parse_expr_with(text: &str, declared: &[Identifier], keys: &[Vec<String>]) -> Result<LinearExpr, ParseError> {
    let tokens = lex(text)?;
    ExprParser {
        text,
        tokens,
        pos: 0,
        declared: keys,
        declared_ids: declared,
    }
    .parse()
}

// ---------------------------------------------------------------------------
// relations

const RELATION_PATTERNS: &[(&str, Relation)] = &[
    ("\\leqslant", Relation::LE),
    ("\\geqslant", Relation::GE),
    ("\\leq", Relation::LE),
    ("\\geq", Relation::GE),
    ("\\le", Relation::LE),
    ("\\ge", Relation::GE),
    ("\\lt", Relation::LT),
    ("\\gt", Relation::GT),
    ("<=", Relation::LE),
    ("=<", Relation::LE),
    (">=", Relation::GE),
    ("=>", Relation::GE),
    ("==", Relation::EQ),
    ("\u{2264}", Relation::LE),
    ("\u{2266}", Relation::LE),
    ("\u{2265}", Relation::GE),
    ("\u{2267}", Relation::GE),
    ("<", Relation::LT),
    (">", Relation::GT),
    ("=", Relation::EQ),
];

/// Parses a relation operator. `<=`, `≤`, `=<` are LE; `>=`, `≥`, `=>` are
/// GE; `=` is EQ; `<` and `>` are the strict forms.
pub fn parse_relation(op: &str) -> Option<Relation> {
    let op = op.trim();
    RELATION_PATTERNS.iter().find(|(p, _)| *p == op).map(|(_, r)| *r)
}

/// Splits `a R1 b R2 c ...` into sides and relations.
fn split_relations(line: &str) -> (Vec<(usize, &str)>, Vec<Relation>) {
    let mut sides = Vec::new();
    let mut relations = Vec::new();
    let mut side_start = 0;
    let mut i = 0;
    while i < line.len() {
        if !line.is_char_boundary(i) {
            i += 1;
            continue;
        }
        let rest = &line[i..];
        let hit = RELATION_PATTERNS.iter().find(|(p, _)| {
            rest.starts_with(p)
                // `\le` must not swallow the start of `\left`
                && !(p.starts_with('\\')
                    && rest[p.len()..].chars().next().is_some_and(|c| c.is_ascii_alphabetic()))
        });
        match hit {
            Some((p, r)) => {
                sides.push((side_start, &line[side_start..i]));
                relations.push(*r);
                i += p.len();
                side_start = i;
            }
            None => i += rest.chars().next().map_or(1, char::len_utf8),
        }
    }
    sides.push((side_start, &line[side_start..]));
    (sides, relations)
}

// ---------------------------------------------------------------------------
// line-level helpers

static HEADER_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^[\s#*>`'$_\x22]*(decision\s+variables|variables|constraints|subject\s+to|objective\s+function|objective)\b\s*[*_`]*\s*:?\s*[*_`]*",
    )
    .expect("valid regex")
});

static INLINE_VARIABLES_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bvariables\s*[*_]*\s*:").expect("valid regex"));

static DIRECTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(minimi[sz]e|maximi[sz]e|min|max)\b[\s:]*").expect("valid regex"));

static OBJECTIVE_NAME_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*\s*=(?:[^=<>]|$)").expect("valid regex"));

static LIST_MARKER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[*\u{2022}]\s+|\d+[.)]\s+)").expect("valid regex"));

static LABEL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z][A-Za-z0-9 _\-]*(?:\([^)]*\))?\s*:\s*").expect("valid regex"));

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Variables,
    Constraints,
    Objective,
}

#[derive(Clone, Copy, Debug)]
struct Line<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

fn split_lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in text.split_inclusive('\n') {
        let body = piece.trim_end_matches(['\n', '\r']);
        out.push(Line {
            start,
            end: start + body.len(),
            text: body,
        });
        start += piece.len();
    }
    out
}

fn is_markup_char(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '`' | '"' | '\'' | '$' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}'
        )
}

/// Trims framing characters (quotes, backticks, `$`, LaTeX line breaks,
/// trailing punctuation) and returns the byte range of what remains.
fn strip_markup(s: &str) -> (usize, &str) {
    let start_trimmed = s.trim_start_matches(|c: char| is_markup_char(c) || c == '>');
    let offset = s.len() - start_trimmed.len();
    let end_trimmed =
        start_trimmed.trim_end_matches(|c: char| is_markup_char(c) || matches!(c, '\\' | ',' | ';' | '.'));
    (offset, end_trimmed)
}

fn is_markup_only(s: &str) -> bool {
    s.chars()
        .all(|c| is_markup_char(c) || matches!(c, '\\' | '.' | ',' | ';' | '>'))
}

fn classify(line: &str) -> Option<(Section, usize)> {
    if let Some(m) = HEADER_RE.captures(line) {
        let word = m.get(1).expect("group").as_str().to_ascii_lowercase();
        let section = if word.ends_with("variables") {
            Section::Variables
        } else if word.starts_with("objective") {
            Section::Objective
        } else {
            Section::Constraints
        };
        return Some((section, m.get(0).expect("match").end()));
    }
    INLINE_VARIABLES_RE.find(line).map(|m| (Section::Variables, m.end()))
}

// ---------------------------------------------------------------------------
// block parsing

struct BlockParse {
    variables: Vec<Identifier>,
    variables_span: Option<(usize, usize)>,
    constraints: Vec<Constraint>,
    constraint_spans: Vec<(usize, usize)>,
    objective: Option<(Objective, (usize, usize))>,
    diagnostics: Vec<Diagnostic>,
    /// Byte offset just past the objective line.
    end: usize,
    complete: bool,
    /// Identifiers mentioned anywhere in the block, with a span, for the
    /// reference-vocabulary check.
    mentioned: Vec<(Identifier, (usize, usize))>,
}

struct Parser<'a> {
    text: &'a str,
    lines: Vec<Line<'a>>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            lines: split_lines(text),
        }
    }

    fn block_starts(&self) -> Vec<(usize, usize)> {
        self.lines
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match classify(l.text) {
                Some((Section::Variables, off)) => Some((i, off)),
                _ => None,
            })
            .collect()
    }

    /// True when nothing but framing follows byte `pos`.
    fn only_markup_after(&self, pos: usize) -> bool {
        is_markup_only(&self.text[pos..])
    }

    fn parse_block(&self, start_line: usize, header_end: usize) -> BlockParse {
        let mut block = BlockParse {
            variables: Vec::new(),
            variables_span: None,
            constraints: Vec::new(),
            constraint_spans: Vec::new(),
            objective: None,
            diagnostics: Vec::new(),
            end: 0,
            complete: false,
            mentioned: Vec::new(),
        };

        // Variables: inline after the header, or on the following lines up
        // to the next header or the first line that looks like a constraint.
        let header_line = self.lines[start_line];
        let mut var_chunks: Vec<(usize, &str)> =
            vec![(header_line.start + header_end, &header_line.text[header_end..])];
        let mut i = start_line + 1;
        if strip_markup(&header_line.text[header_end..]).1.is_empty() {
            while i < self.lines.len() {
                let l = self.lines[i];
                let inequality = split_relations(l.text).1.iter().any(|r| *r != Relation::EQ);
                if classify(l.text).is_some() || inequality {
                    break;
                }
                var_chunks.push((l.start, l.text));
                i += 1;
            }
        }
        let var_span_start = var_chunks[0].0;
        let var_span_end = var_chunks.last().map(|(s, t)| s + t.len()).unwrap_or(var_span_start);
        block.variables_span = Some((var_span_start, var_span_end));
        for (offset, chunk) in var_chunks {
            self.parse_variable_list(offset, chunk, &mut block);
        }

        // Constraints up to the objective header.
        let mut saw_constraints_header = false;
        let mut constraint_lines: Vec<(usize, &str, bool)> = Vec::new();
        let mut objective_header: Option<usize> = None;
        while i < self.lines.len() {
            let l = self.lines[i];
            match classify(l.text) {
                Some((Section::Variables, _)) => break,
                Some((Section::Objective, _)) => {
                    objective_header = Some(i);
                    break;
                }
                Some((Section::Constraints, off)) => {
                    saw_constraints_header = true;
                    let rest = &l.text[off..];
                    if !strip_markup(rest).1.is_empty() {
                        constraint_lines.push((l.start + off, rest, false));
                    }
                }
                None => constraint_lines.push((l.start, l.text, false)),
            }
            i += 1;
        }
        if let Some(last) = constraint_lines.last_mut() {
            last.2 = objective_header.is_none();
        }
        for (offset, raw, last) in constraint_lines {
            let final_content = last && self.only_markup_after(offset + raw.len());
            self.parse_constraint_line(offset, raw, final_content, &mut block);
        }

        if !saw_constraints_header {
            block.diagnostics.push(
                Diagnostic::new(
                    DiagnosticKind::MissingSection,
                    (header_line.start, header_line.end),
                    "no `Constraints` header; lines before the objective were read as constraints",
                )
                .with_subject(SECTION_CONSTRAINTS),
            );
        }

        let Some(obj_line) = objective_header else {
            block.end = self.text.len();
            return block;
        };
        let l = self.lines[obj_line];
        let (_, off) = classify(l.text).expect("classified above");
        let mut content = (l.start + off, &l.text[off..]);
        let mut end = l.end;
        if strip_markup(content.1).1.is_empty() {
            if let Some(next) = self.lines[obj_line + 1..]
                .iter()
                .find(|n| !strip_markup(n.text).1.is_empty())
            {
                if classify(next.text).is_none() {
                    content = (next.start, next.text);
                    end = next.end;
                }
            }
        }
        block.end = end;
        match self.parse_objective(content.0, content.1, &block.variables) {
            Ok((objective, span)) => {
                for v in objective.expr.variables() {
                    block.mentioned.push((v.clone(), span));
                }
                block.objective = Some((objective, span));
                block.complete = true;
            }
            Err(message) => {
                block.diagnostics.push(
                    Diagnostic::new(
                        DiagnosticKind::MissingSection,
                        (content.0, content.0 + content.1.len()),
                        message,
                    )
                    .with_subject(SECTION_OBJECTIVE),
                );
                // A header was found, so the block is structurally complete
                // even though its objective is unusable.
                block.complete = true;
            }
        }
        block
    }

    fn parse_variable_list(&self, offset: usize, chunk: &str, block: &mut BlockParse) {
        let mut pos = 0;
        for piece in chunk.split([',', ';']) {
            let piece_start = offset + pos;
            pos += piece.len() + 1;
            let (lead, stripped) = strip_markup(piece);
            let stripped = LIST_MARKER_RE.find(stripped).map_or(stripped, |m| &stripped[m.end()..]);
            let stripped = stripped.trim_start_matches(['-', ' ']);
            // `x = number of cleaners`, `x: ...`, `x (number of ...)`
            let name = stripped
                .split(['=', ':', '('])
                .next()
                .unwrap_or("")
                .trim()
                .trim_end_matches(|c: char| is_markup_char(c) || c == '.');
            let name = name.strip_prefix("and ").unwrap_or(name).trim();
            if name.is_empty() {
                continue;
            }
            let span = (piece_start + lead, piece_start + lead + stripped.len());
            match Identifier::new(name) {
                Ok(id) => {
                    block.mentioned.push((id.clone(), span));
                    block.variables.push(id);
                }
                Err(_) => block.diagnostics.push(
                    Diagnostic::new(
                        DiagnosticKind::MalformedLine,
                        span,
                        format!("{name:?} is not a valid variable name"),
                    )
                    .with_subject(SECTION_VARIABLES),
                ),
            }
        }
    }

    fn parse_constraint_line(&self, offset: usize, raw: &str, final_content: bool, block: &mut BlockParse) {
        let (lead, mut body) = strip_markup(raw);
        if body.is_empty() {
            return;
        }
        let mut body_offset = offset + lead;
        if let Some(m) = LIST_MARKER_RE.find(body) {
            body_offset += m.end();
            body = &body[m.end()..];
        }
        if let Some(m) = LABEL_RE.find(body) {
            body_offset += m.end();
            body = &body[m.end()..];
        }
        let span = (body_offset, body_offset + body.len());
        let keys: Vec<Vec<String>> = block
            .variables
            .iter()
            .map(|d| crate::ir::word_subtokens(d.as_str()).collect())
            .collect();

        let truncated = |block: &mut BlockParse, why: &str| {
            block.diagnostics.push(Diagnostic::new(
                DiagnosticKind::TruncatedLine,
                span,
                format!("constraint line ends mid-expression ({why}); dropped"),
            ));
        };
        let malformed = |block: &mut BlockParse, why: String| {
            block.diagnostics.push(Diagnostic::new(
                DiagnosticKind::MalformedLine,
                span,
                format!("unparseable constraint line: {why}"),
            ));
        };

        let (sides, relations) = split_relations(body);
        if relations.is_empty() {
            match parse_expr_with(body, &block.variables, &keys) {
                Err(ParseError::ExprSyntax { offset, .. }) if offset >= body.len() => truncated(block, "no relation"),
                Ok(_) if final_content => truncated(block, "no relation"),
                Ok(_) => malformed(block, "no relation operator".into()),
                Err(e) => malformed(block, e.to_string()),
            }
            return;
        }

        // `x, y >= 0` declares one bound per listed variable.
        if relations.len() == 1 && sides[0].1.contains(',') {
            let rhs = parse_expr_with(sides[1].1.trim(), &block.variables, &keys);
            let names: Vec<_> = sides[0]
                .1
                .split(',')
                .map(|n| parse_expr_with(n.trim(), &block.variables, &keys))
                .collect();
            if let (Ok(rhs), true) = (&rhs, names.iter().all(|n| n.is_ok())) {
                for lhs in names.into_iter().flatten() {
                    self.push_constraint(
                        Constraint::new(normalize_expr(&lhs), relations[0], normalize_expr(rhs)),
                        span,
                        block,
                    );
                }
                return;
            }
        }

        let mut exprs = Vec::with_capacity(sides.len());
        for (idx, (_, side)) in sides.iter().enumerate() {
            let side_text = side.trim();
            let is_last = idx + 1 == sides.len();
            if side_text.is_empty() {
                if is_last {
                    truncated(block, "missing right-hand side");
                } else {
                    malformed(block, "empty side".into());
                }
                return;
            }
            match parse_expr_with(side_text, &block.variables, &keys) {
                Ok(e) => exprs.push(normalize_expr(&e)),
                Err(ParseError::ExprSyntax { offset, .. }) if is_last && offset >= side_text.len() => {
                    truncated(block, "incomplete right-hand side");
                    return;
                }
                Err(e) => {
                    malformed(block, e.to_string());
                    return;
                }
            }
        }
        for (k, relation) in relations.iter().enumerate() {
            self.push_constraint(
                Constraint::new(exprs[k].clone(), *relation, exprs[k + 1].clone()),
                span,
                block,
            );
        }
    }

    fn push_constraint(&self, c: Constraint, span: (usize, usize), block: &mut BlockParse) {
        if block.constraints.contains(&c) {
            block.diagnostics.push(Diagnostic::new(
                DiagnosticKind::RepeatedConstraint,
                span,
                "exact repeat of an earlier constraint",
            ));
        }
        for v in c.variables() {
            block.mentioned.push((v.clone(), span));
        }
        block.constraints.push(c);
        block.constraint_spans.push(span);
    }

    fn parse_objective(
        &self,
        offset: usize,
        raw: &str,
        declared: &[Identifier],
    ) -> Result<(Objective, (usize, usize)), String> {
        let (lead, body) = strip_markup(raw);
        let mut body_offset = offset + lead;
        let Some(m) = DIRECTION_RE.captures(body) else {
            return Err("objective line has no minimize/maximize keyword".into());
        };
        let word = m.get(1).expect("group").as_str().to_ascii_lowercase();
        let direction = if word.starts_with("max") {
            Direction::Maximize
        } else {
            Direction::Minimize
        };
        let skip = m.get(0).expect("match").end();
        let mut rest = &body[skip..];
        body_offset += skip;
        if let Some(m) = OBJECTIVE_NAME_RE.find(rest) {
            let eq = rest[..m.end()].rfind('=').expect("matched `=`") + 1;
            body_offset += eq;
            rest = &rest[eq..];
        }
        let span = (body_offset, body_offset + rest.len());
        let expr = parse_expr(rest.trim(), declared).map_err(|e| format!("objective: {e}"))?;
        let expr = normalize_expr(&expr);
        if expr.terms.is_empty() {
            return Err("objective has no variable terms".into());
        }
        Ok((Objective::new(direction, expr), span))
    }
}

/// Parses completion text into a model plus findings. Never fails.
pub fn parse_ir(text: &str) -> ParseOutcome {
    parse_ir_with_reference(text, None)
}

/// Like [`parse_ir`], additionally flagging every variable name that is not
/// part of `reference` (typically the gold formulation's variables) as
/// [`DiagnosticKind::UnknownVariable`].
pub fn parse_ir_with_reference(text: &str, reference: Option<&[Identifier]>) -> ParseOutcome {
    let parser = Parser::new(text);
    let starts = parser.block_starts();
    if starts.is_empty() {
        return ParseOutcome {
            model: None,
            diagnostics: vec![Diagnostic::new(
                DiagnosticKind::MissingSection,
                (0, text.len()),
                "no `Variables` section found",
            )
            .with_subject(SECTION_VARIABLES)],
            consumed: 0,
        };
    }

    let mut skipped = Vec::new();
    let mut chosen = None;
    for (n, &(line, off)) in starts.iter().enumerate() {
        let block = parser.parse_block(line, off);
        if block.complete {
            chosen = Some((n, block));
            break;
        }
        skipped.push((n, block));
    }

    let mut diagnostics = Vec::new();
    let (block, consumed) = match chosen {
        Some((n, block)) => {
            for (k, _) in &skipped {
                let (line, _) = starts[*k];
                let next = parser.lines[starts[k + 1].0].start;
                diagnostics.push(Diagnostic::new(
                    DiagnosticKind::ExtraBlock,
                    (parser.lines[line].start, next),
                    "incomplete block before the first complete one was skipped",
                ));
            }
            let end = block.end;
            let tail = &text[end..];
            if let Some(&(next_line, _)) = starts.get(n + 1) {
                let start = parser.lines[next_line].start;
                diagnostics.push(Diagnostic::new(
                    DiagnosticKind::ExtraBlock,
                    (start, text.len()),
                    "a second IR block follows the first; ignored",
                ));
            } else if !is_markup_only(tail) {
                let lead = tail.len()
                    - tail
                        .trim_start_matches(|c: char| is_markup_char(c) || matches!(c, '.' | '\\'))
                        .len();
                diagnostics.push(Diagnostic::new(
                    DiagnosticKind::TrailingNoise,
                    (end + lead, text.len()),
                    "non-IR text after the formulation",
                ));
            }
            (block, end)
        }
        None => {
            let (_, block) = skipped.swap_remove(0);
            (block, 0)
        }
    };

    let mut model = None;
    let mut block_diags = block.diagnostics;
    if block.variables.is_empty() {
        block_diags.push(
            Diagnostic::new(
                DiagnosticKind::MissingSection,
                block.variables_span.unwrap_or((0, 0)),
                "`Variables` section lists no valid names",
            )
            .with_subject(SECTION_VARIABLES),
        );
    }
    let objective_missing = block_diags
        .iter()
        .any(|d| d.kind == DiagnosticKind::MissingSection && d.subject.as_deref() == Some(SECTION_OBJECTIVE));
    if block.objective.is_none() && !objective_missing {
        block_diags.push(
            Diagnostic::new(
                DiagnosticKind::MissingSection,
                (block.variables_span.map_or(0, |s| s.0), text.len()),
                "no `Objective Function` section found",
            )
            .with_subject(SECTION_OBJECTIVE),
        );
    }
    diagnostics.extend(block_diags);

    let mut already_unknown: Vec<Identifier> = Vec::new();
    if let (false, Some((objective, obj_span))) = (block.variables.is_empty(), block.objective) {
        let m = IRModel::new(block.variables.clone(), block.constraints, objective);
        let spans = SourceSpans {
            variables: block.variables_span,
            constraints: block.constraint_spans,
            objective: Some(obj_span),
        };
        for d in validate_ir_spanned(&m, &spans) {
            if d.kind == DiagnosticKind::UnknownVariable {
                if let Some(Ok(id)) = d.subject.as_deref().map(Identifier::new) {
                    already_unknown.push(id);
                }
            }
            diagnostics.push(d);
        }
        model = Some(m);
    }

    if let Some(reference) = reference {
        for (id, span) in &block.mentioned {
            if reference.contains(id) || already_unknown.contains(id) {
                continue;
            }
            already_unknown.push(id.clone());
            diagnostics.push(
                Diagnostic::new(
                    DiagnosticKind::UnknownVariable,
                    *span,
                    format!("`{id}` does not name a variable of the problem"),
                )
                .with_subject(id.as_str()),
            );
        }
    }

    ParseOutcome {
        model,
        diagnostics,
        consumed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> Identifier {
        Identifier::new(s).unwrap()
    }

    fn terms(e: &LinearExpr) -> Vec<(f64, String)> {
        e.terms.iter().map(|(c, v)| (*c, v.key().to_string())).collect()
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("(-100.0)").unwrap(), -100.0);
        assert!((parse_number("1/3").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(parse_number("30000").unwrap(), 30000.0);
        assert_eq!(parse_number("+5").unwrap(), 5.0);
        assert_eq!(parse_number(" ( - 2.5 ) ").unwrap(), -2.5);
        assert_eq!(parse_number(".5").unwrap(), 0.5);
        let z = parse_number("-0.0").unwrap();
        assert!(z == 0.0 && z.is_sign_positive());
        assert!(matches!(parse_number("4/0"), Err(ParseError::DivisionByZero(_))));
        for bad in ["", "abc", "1.2.3", "inf", "NaN", "1e5", "(", "--"] {
            assert!(matches!(parse_number(bad), Err(ParseError::NumberSyntax(_))), "{bad:?}");
        }
    }

    #[test]
    fn hotel_expression() {
        let e = parse_expr("(0.33) * cleaners + (-1.0) * receptionists", &[]).unwrap();
        assert_eq!(terms(&e), [(0.33, "cleaners".into()), (-1.0, "receptionists".into())]);
    }

    #[test]
    fn bare_declared_variable() {
        let declared = [id("large_ships"), id("small_ships")];
        let e = parse_expr("large_ships", &declared).unwrap();
        assert_eq!(terms(&e), [(1.0, "large_ships".into())]);
    }

    #[test]
    fn juxtaposed_coefficients_merge() {
        let e = normalize_expr(&parse_expr("2x + 3 x - x", &[]).unwrap());
        assert_eq!(terms(&e), [(4.0, "x".into())]);
    }

    #[test]
    fn multi_word_greedy_longest() {
        let declared = [id("thin"), id("thin jar"), id("stubby jar")];
        let e = parse_expr("(50.0) * thin jar + 30 stubby_jar - thin", &declared).unwrap();
        assert_eq!(
            terms(&e),
            [
                (50.0, "thin_jar".into()),
                (30.0, "stubby_jar".into()),
                (-1.0, "thin".into())
            ]
        );
        // declared spelling wins
        assert_eq!(e.terms[1].1.as_str(), "stubby jar");
    }

    #[test]
    fn verbatim_multi_word_without_declarations() {
        let e = parse_expr("5 thin jar", &[]).unwrap();
        assert_eq!(e.terms[0].1.as_str(), "thin jar");
    }

    #[test]
    fn constants_fractions_and_division() {
        let e = parse_expr("x + 5 - (1/4) * y + z/2", &[]).unwrap();
        assert_eq!(e.constant, 5.0);
        assert_eq!(terms(&e), [(1.0, "x".into()), (-0.25, "y".into()), (0.5, "z".into())]);
        let e = parse_expr("-(3) * a", &[]).unwrap();
        assert_eq!(terms(&e), [(-3.0, "a".into())]);
    }

    #[test]
    fn expression_errors_carry_offsets() {
        match parse_expr("(1.0) * x + (-0.0) *", &[]) {
            Err(ParseError::ExprSyntax { offset, .. }) => assert_eq!(offset, 20),
            other => panic!("{other:?}"),
        }
        match parse_expr("x y + ? z", &[]) {
            Err(ParseError::ExprSyntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("x 5", &[]), Err(ParseError::ExprSyntax { .. })));
        assert!(matches!(parse_expr("", &[]), Err(ParseError::ExprSyntax { .. })));
        assert!(matches!(
            parse_expr("(2/0) * x", &[]),
            Err(ParseError::DivisionByZero(_))
        ));
    }

    #[test]
    fn relation_spellings() {
        for (op, rel) in [
            ("<=", Relation::LE),
            ("\u{2264}", Relation::LE),
            ("=<", Relation::LE),
            (">=", Relation::GE),
            ("\u{2265}", Relation::GE),
            ("=>", Relation::GE),
            ("=", Relation::EQ),
            ("<", Relation::LT),
            (">", Relation::GT),
        ] {
            assert_eq!(parse_relation(op), Some(rel), "{op}");
            let text = format!("Variables: x\nConstraints:\nx {op} 3\nObjective Function:\nminimize x");
            let out = parse_ir(&text);
            assert_eq!(out.model.unwrap().constraints[0].relation, rel, "{op}");
            assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
        }
    }

    #[test]
    fn chained_bounds_and_lists() {
        let out = parse_ir("Variables: x, y\nConstraints:\n0 <= x <= 10\nx, y >= 0\nObjective Function:\nmax x + y");
        let m = out.model.unwrap();
        assert_eq!(m.constraints.len(), 4);
        assert_eq!(m.constraints[1].relation, Relation::LE);
        assert_eq!(m.constraints[3].lhs.terms[0].1, id("y"));
        assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
    }

    #[test]
    fn labels_bullets_and_objective_names() {
        let out = parse_ir(
            "**Variables:**\n- x = number of apples\n- y = number of pears\n**Constraints:**\n* Budget: 2x + 3y <= 10\n1. x >= 1\n**Objective Function:**\nMaximize: z = 4x + y",
        );
        let m = out.model.expect("model");
        assert_eq!(m.variables, [id("x"), id("y")]);
        assert_eq!(m.constraints.len(), 2);
        assert_eq!(m.objective.direction, Direction::Maximize);
        assert_eq!(m.objective.expr.terms.len(), 2);
        assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
    }

    #[test]
    fn missing_sections() {
        let out = parse_ir("no formulation here");
        assert!(out.model.is_none());
        assert_eq!(out.diagnostics[0].subject.as_deref(), Some(SECTION_VARIABLES));

        let out = parse_ir("Variables: x\nConstraints:\nx <= 1\n");
        assert!(out.model.is_none());
        assert!(out
            .diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::MissingSection && d.subject.as_deref() == Some(SECTION_OBJECTIVE)));
        assert_eq!(out.consumed, 0);

        let out = parse_ir("Variables: x\nx <= 1\nObjective Function: min x");
        assert!(out.model.is_some());
        assert!(out
            .diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::MissingSection && d.subject.as_deref() == Some(SECTION_CONSTRAINTS)));
    }

    #[test]
    fn objective_without_direction_is_missing() {
        let out = parse_ir("Variables: x\nConstraints:\nx <= 1\nObjective Function:\n(1.0) * x");
        assert!(out.model.is_none());
        assert!(out.has(DiagnosticKind::MissingSection));
    }

    #[test]
    fn malformed_middle_line_is_reported() {
        let out =
            parse_ir("Variables: x\nConstraints:\nwhere x is the number of items\nx <= 4\nObjective Function:\nmin x");
        assert_eq!(out.model.as_ref().unwrap().constraints.len(), 1);
        assert_eq!(out.count(DiagnosticKind::MalformedLine), 1);
    }

    #[test]
    fn truncated_rhs() {
        let out = parse_ir("Variables: x\nConstraints:\nx <= 1\n(2.0) * x <=");
        assert!(out.has(DiagnosticKind::TruncatedLine));
        let out = parse_ir("Variables: x\nConstraints:\nx <= 1\n(2.0) * x + (-1.0");
        assert!(out.has(DiagnosticKind::TruncatedLine));
    }

    #[test]
    fn consumed_prefix_reparses_identically() {
        let text = "```\nVariables: a\nConstraints:\na <= 2\nObjective Function:\nmin a\n```\nThanks!";
        let out = parse_ir(text);
        assert!(out.has(DiagnosticKind::TrailingNoise));
        let prefix = parse_ir(&text[..out.consumed]);
        assert_eq!(prefix.model, out.model);
        assert!(prefix.diagnostics.is_empty());
    }

    #[test]
    fn spans_are_in_bounds_and_point_at_lines() {
        let text = "Variables: a\nConstraints:\n(1.0) * b <= 2\nObjective Function:\nmin a";
        let out = parse_ir(text);
        let d = out
            .diagnostics
            .iter()
            .find(|d| d.kind == DiagnosticKind::UnknownVariable)
            .unwrap();
        assert_eq!(&text[d.span.0..d.span.1], "(1.0) * b <= 2");
    }

    #[test]
    fn reference_vocabulary_flags_hallucinated_names() {
        let reference = [id("apple"), id("pear")];
        let out = parse_ir_with_reference(
            "Variables: apple, x1\nConstraints:\napple <= 3\nObjective Function:\nmax apple + x1",
            Some(&reference),
        );
        let unknown: Vec<_> = out
            .diagnostics
            .iter()
            .filter(|d| d.kind == DiagnosticKind::UnknownVariable)
            .map(|d| d.subject.clone().unwrap())
            .collect();
        assert_eq!(unknown, ["x1"]);
    }
}
