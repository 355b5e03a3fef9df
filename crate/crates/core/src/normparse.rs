//! The norm-combinator language.
//!
//! A norm is written as a small expression over base families and
//! norm-preserving combinators:
//!
//! ```text
//! norm   := "l1" | "l2" | "linf"
//!         | "lp" "(" number ")"
//!         | "wlp" "(" exponent ";" number ("," number)* ")"
//!         | "max" "(" norm "," norm ")"
//!         | "sum" "(" norm "," norm ")"
//!         | "scale" "(" number "," norm ")"
//! exponent := number | "inf"
//! ```
//!
//! Whitespace is ignored between tokens. Every accepted expression denotes a
//! genuine norm on `R^dim`: maxima, sums and positive multiples of norms are
//! norms, so no runtime axiom check is needed downstream.

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};

/// Maximum combinator nesting accepted by the parser.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("dimension error at byte {offset}: {message}")]
    Dimension { offset: usize, message: String },
    #[error("parameter out of domain at byte {offset}: {message}")]
    Domain { offset: usize, message: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::Dimension { offset, .. }
            | ParseError::Domain { offset, .. } => *offset,
        }
    }

    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn domain(offset: usize, message: impl Into<String>) -> Self {
        ParseError::Domain {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn dimension(offset: usize, message: impl Into<String>) -> Self {
        ParseError::Dimension {
            offset,
            message: message.into(),
        }
    }
}

/// Exponent of a weighted `l_p` node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormNode {
    L1,
    /// Euclidean norm; semantically identical to `Lp(2.0)`.
    L2,
    LInf,
    /// `(sum |x_i|^p)^(1/p)` with `1 < p < inf`.
    Lp(f64),
    /// `(sum w_i |x_i|^p)^(1/p)`, or `max w_i |x_i|` for `p = inf`.
    WLp {
        p: Exponent,
        weights: Vec<f64>,
    },
    Max(Box<NormNode>, Box<NormNode>),
    Sum(Box<NormNode>, Box<NormNode>),
    Scale(f64, Box<NormNode>),
}

impl NormNode {
    pub fn max(a: NormNode, b: NormNode) -> Self {
        NormNode::Max(Box::new(a), Box::new(b))
    }

    pub fn sum(a: NormNode, b: NormNode) -> Self {
        NormNode::Sum(Box::new(a), Box::new(b))
    }

    pub fn scale(c: f64, inner: NormNode) -> Self {
        NormNode::Scale(c, Box::new(inner))
    }

    pub fn depth(&self) -> usize {
        match self {
            NormNode::Max(a, b) | NormNode::Sum(a, b) => 1 + a.depth().max(b.depth()),
            NormNode::Scale(_, a) => 1 + a.depth(),
            _ => 1,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            NormNode::L1 | NormNode::L2 | NormNode::LInf => Ok(()),
            NormNode::Lp(p) => {
                if p.is_finite() && *p > 1.0 {
                    Ok(())
                } else {
                    bad(format!("lp exponent must be finite and > 1, got {p}"))
                }
            }
            NormNode::WLp { p, weights } => {
                if let Exponent::Finite(p) = p {
                    if !(p.is_finite() && *p >= 1.0) {
                        return bad(format!("wlp exponent must be >= 1, got {p}"));
                    }
                }
                if weights.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: weights.len(),
                    });
                }
                match weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                    Some(w) => bad(format!("wlp weights must be positive, got {w}")),
                    None => Ok(()),
                }
            }
            NormNode::Max(a, b) | NormNode::Sum(a, b) => {
                a.validate(dim)?;
                b.validate(dim)
            }
            NormNode::Scale(c, a) => {
                if !(c.is_finite() && *c > 0.0) {
                    return bad(format!("scale factor must be positive, got {c}"));
                }
                a.validate(dim)
            }
        }
    }
}

/// A validated norm expression together with the ambient dimension it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAst {
    root: NormNode,
    dim: usize,
}

impl NormAst {
    /// Builds an AST from a node tree, checking every parameter invariant.
    pub fn new(root: NormNode, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "ambient dimension must be at least 2, got {dim}"
            )));
        }
        root.validate(dim)?;
        Ok(NormAst { root, dim })
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self, ParseError> {
        parse_norm(text, dim)
    }

    pub fn root(&self) -> &NormNode {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl fmt::Display for NormAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn write_node(node: &NormNode, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        NormNode::L1 => f.write_str("l1"),
        NormNode::L2 => f.write_str("l2"),
        NormNode::LInf => f.write_str("linf"),
        NormNode::Lp(p) => write!(f, "lp({p})"),
        NormNode::WLp { p, weights } => {
            write!(f, "wlp({p}; ")?;
            for (i, w) in weights.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{w}")?;
            }
            f.write_str(")")
        }
        NormNode::Max(a, b) | NormNode::Sum(a, b) => {
            f.write_str(if matches!(node, NormNode::Max(..)) {
                "max("
            } else {
                "sum("
            })?;
            write_node(a, f)?;
            f.write_str(", ")?;
            write_node(b, f)?;
            f.write_str(")")
        }
        NormNode::Scale(c, a) => {
            write!(f, "scale({c}, ")?;
            write_node(a, f)?;
            f.write_str(")")
        }
    }
}

/// Canonical lowercase rendering; `parse_norm(&print_norm(a), a.dim())` returns `a`.
pub fn print_norm(ast: &NormAst) -> String {
    ast.to_string()
}

/// Parses `text` as a norm on `R^dim`.
pub fn parse_norm(text: &str, dim: usize) -> Result<NormAst, ParseError> {
    if dim < 2 {
        return Err(ParseError::dimension(
            0,
            format!("ambient dimension must be at least 2, got {dim}"),
        ));
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        end: text.len(),
        dim,
    };
    let root = parser.norm(0)?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::syntax(
            tok.offset,
            format!("unexpected {} after complete norm", tok.kind.describe()),
        ));
    }
    Ok(NormAst { root, dim })
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Semi,
}

impl TokenKind {
    pub(crate) fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("'{s}'"),
            TokenKind::Number(x) => format!("number {x}"),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::Semi => "';'".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

/// Splits `text` into tokens. Shared with the relation-tag parser.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            b';' => TokenKind::Semi,
            b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i], b'a'..=b'z' | b'0'..=b'9' | b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            b'-' | b'+' | b'.' | b'0'..=b'9' => {
                let (value, len) = lex_number(text, i)?;
                out.push(Token {
                    kind: TokenKind::Number(value),
                    offset: i,
                });
                i += len;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::syntax(
                    i,
                    format!("unexpected character {ch:?}"),
                ));
            }
        };
        out.push(Token { kind, offset: i });
        i += 1;
    }
    Ok(out)
}

/// Lexes a decimal literal (optional sign, optional exponent) starting at `start`.
/// Returns the value and the byte length consumed.
pub(crate) fn lex_number(text: &str, start: usize) -> Result<(f64, usize), ParseError> {
    let bytes = text.as_bytes();
    let mut i = start;
    if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return Err(ParseError::syntax(start, "malformed number"));
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
            j += 1;
        }
        let exp_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j == exp_start {
            return Err(ParseError::syntax(i, "malformed exponent"));
        }
        i = j;
    }
    let value: f64 = text[start..i]
        .parse()
        .map_err(|_| ParseError::syntax(start, "malformed number"))?;
    Ok((value, i - start))
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: usize,
    dim: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn next(&mut self, what: &str) -> Result<&Token, ParseError> {
        match self.tokens.get(self.pos) {
            Some(tok) => {
                self.pos += 1;
                Ok(tok)
            }
            None => Err(ParseError::syntax(
                self.end,
                format!("unexpected end of input, expected {what}"),
            )),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<usize, ParseError> {
        let what = kind.describe();
        let tok = self.next(&what)?;
        if tok.kind == kind {
            Ok(tok.offset)
        } else {
            Err(ParseError::syntax(
                tok.offset,
                format!("expected {what}, found {}", tok.kind.describe()),
            ))
        }
    }

    fn number(&mut self) -> Result<(f64, usize), ParseError> {
        let tok = self.next("a number")?;
        match tok.kind {
            TokenKind::Number(x) => Ok((x, tok.offset)),
            ref other => Err(ParseError::syntax(
                tok.offset,
                format!("expected a number, found {}", other.describe()),
            )),
        }
    }

    fn norm(&mut self, depth: usize) -> Result<NormNode, ParseError> {
        if depth >= MAX_DEPTH {
            return Err(ParseError::syntax(
                self.here(),
                "norm expression nested too deeply",
            ));
        }
        let tok = self.next("a norm")?;
        let offset = tok.offset;
        let name = match &tok.kind {
            TokenKind::Ident(name) => name.clone(),
            other => {
                return Err(ParseError::syntax(
                    offset,
                    format!("expected a norm, found {}", other.describe()),
                ))
            }
        };
        match name.as_str() {
            "l1" => Ok(NormNode::L1),
            "l2" => Ok(NormNode::L2),
            "linf" => Ok(NormNode::LInf),
            "lp" => {
                self.expect(TokenKind::LParen)?;
                let (p, at) = self.exponent()?;
                let p = match p {
                    Exponent::Finite(p) if p.is_finite() && p > 1.0 => p,
                    Exponent::Finite(p) => {
                        return Err(ParseError::domain(
                            at,
                            format!("lp exponent must be finite and > 1, got {p}"),
                        ))
                    }
                    Exponent::Infinity => {
                        return Err(ParseError::domain(
                            at,
                            "lp exponent must be finite; use linf",
                        ))
                    }
                };
                self.expect(TokenKind::RParen)?;
                Ok(NormNode::Lp(p))
            }
            "wlp" => {
                self.expect(TokenKind::LParen)?;
                let (p, at) = self.exponent()?;
                if let Exponent::Finite(x) = p {
                    if !(x.is_finite() && x >= 1.0) {
                        return Err(ParseError::domain(
                            at,
                            format!("wlp exponent must be >= 1 or inf, got {x}"),
                        ));
                    }
                }
                self.expect(TokenKind::Semi)?;
                let mut weights = Vec::new();
                loop {
                    let (w, at) = self.number()?;
                    if !(w.is_finite() && w > 0.0) {
                        return Err(ParseError::domain(
                            at,
                            format!("wlp weights must be positive, got {w}"),
                        ));
                    }
                    weights.push(w);
                    let tok = self.next("',' or ')'")?;
                    match tok.kind {
                        TokenKind::Comma => continue,
                        TokenKind::RParen => break,
                        ref other => {
                            return Err(ParseError::syntax(
                                tok.offset,
                                format!("expected ',' or ')', found {}", other.describe()),
                            ))
                        }
                    }
                }
                if weights.len() != self.dim {
                    return Err(ParseError::dimension(
                        offset,
                        format!(
                            "wlp has {} weights but the ambient dimension is {}",
                            weights.len(),
                            self.dim
                        ),
                    ));
                }
                Ok(NormNode::WLp { p, weights })
            }
            "max" | "sum" => {
                self.expect(TokenKind::LParen)?;
                let a = self.norm(depth + 1)?;
                self.expect(TokenKind::Comma)?;
                let b = self.norm(depth + 1)?;
                self.expect(TokenKind::RParen)?;
                Ok(if name == "max" {
                    NormNode::max(a, b)
                } else {
                    NormNode::sum(a, b)
                })
            }
            "scale" => {
                self.expect(TokenKind::LParen)?;
                let (c, at) = self.number()?;
                if !(c.is_finite() && c > 0.0) {
                    return Err(ParseError::domain(
                        at,
                        format!("scale factor must be positive and finite, got {c}"),
                    ));
                }
                self.expect(TokenKind::Comma)?;
                let inner = self.norm(depth + 1)?;
                self.expect(TokenKind::RParen)?;
                Ok(NormNode::scale(c, inner))
            }
            other => Err(ParseError::syntax(
                offset,
                format!("unknown norm '{other}'"),
            )),
        }
    }

    fn exponent(&mut self) -> Result<(Exponent, usize), ParseError> {
        let tok = self.next("an exponent")?;
        match &tok.kind {
            TokenKind::Number(x) => Ok((Exponent::Finite(*x), tok.offset)),
            TokenKind::Ident(s) if s == "inf" => Ok((Exponent::Infinity, tok.offset)),
            other => Err(ParseError::syntax(
                tok.offset,
                format!("expected an exponent, found {}", other.describe()),
            )),
        }
    }
}
