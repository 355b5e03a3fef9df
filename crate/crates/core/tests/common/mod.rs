#![allow(dead_code)]

use normderiv::{Exponent, NormAst, NormNode};
use rand::Rng;

/// The planar norm families every suite runs over.
pub const FAMILIES: [&str; 9] = [
    "l1",
    "l2",
    "linf",
    "lp(3)",
    "lp(1.5)",
    "wlp(2; 1, 4)",
    "max(l1, l2)",
    "sum(l1, linf)",
    "scale(0.7, l2)",
];

/// Families whose norm is differentiable away from the origin.
pub const SMOOTH_FAMILIES: [&str; 5] = ["l2", "lp(3)", "lp(1.5)", "wlp(2; 1, 4)", "scale(0.7, l2)"];

pub fn family(text: &str) -> NormAst {
    normderiv::parse_norm(text, 2).unwrap()
}

fn leaf<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> NormNode {
    match rng.random_range(0..5) {
        0 => NormNode::L1,
        1 => NormNode::L2,
        2 => NormNode::LInf,
        3 => NormNode::Lp(rng.random_range(1.01..12.0)),
        _ => {
            let p = match rng.random_range(0..3) {
                0 => Exponent::Infinity,
                1 => Exponent::Finite(1.0),
                _ => Exponent::Finite(rng.random_range(1.0..8.0)),
            };
            let weights = (0..dim).map(|_| rng.random_range(0.01..20.0)).collect();
            NormNode::WLp { p, weights }
        }
    }
}

/// A random norm tree of depth at most `depth`.
pub fn random_node<R: Rng + ?Sized>(rng: &mut R, depth: usize, dim: usize) -> NormNode {
    if depth <= 1 || rng.random_bool(0.3) {
        return leaf(rng, dim);
    }
    match rng.random_range(0..3) {
        0 => NormNode::max(
            random_node(rng, depth - 1, dim),
            random_node(rng, depth - 1, dim),
        ),
        1 => NormNode::sum(
            random_node(rng, depth - 1, dim),
            random_node(rng, depth - 1, dim),
        ),
        _ => NormNode::scale(
            rng.random_range(0.001..100.0),
            random_node(rng, depth - 1, dim),
        ),
    }
}

/// Byte spans of the tokens of a norm expression, found without the
/// library's lexer: runs of letters, runs of number characters, and single
/// punctuation bytes.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((s, i));
        } else if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' {
            let s = i;
            i += 1;
            while i < b.len()
                && (b[i].is_ascii_digit()
                    || b[i] == b'.'
                    || b[i] == b'e'
                    || b[i] == b'E'
                    || ((b[i] == b'-' || b[i] == b'+') && (b[i - 1] == b'e' || b[i - 1] == b'E')))
            {
                i += 1;
            }
            out.push((s, i));
        } else {
            out.push((i, i + 1));
            i += 1;
        }
    }
    out
}

/// Deletes one token or flips one parenthesis.
pub fn mutate<R: Rng + ?Sized>(rng: &mut R, text: &str) -> String {
    let spans = token_spans(text);
    let parens: Vec<usize> = text
        .bytes()
        .enumerate()
        .filter(|(_, c)| *c == b'(' || *c == b')')
        .map(|(i, _)| i)
        .collect();
    if rng.random_bool(0.5) && !parens.is_empty() {
        let i = parens[rng.random_range(0..parens.len())];
        let mut bytes = text.as_bytes().to_vec();
        bytes[i] = if bytes[i] == b'(' { b')' } else { b'(' };
        String::from_utf8(bytes).unwrap()
    } else {
        let (s, e) = spans[rng.random_range(0..spans.len())];
        format!("{}{}", &text[..s], &text[e..])
    }
}
