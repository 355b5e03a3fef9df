//! Orthogonality relations, the golden-section Birkhoff oracle and the
//! closed-form orthogonalization problems.

use std::f64::consts::TAU;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::derivatives::{rho_pair_unchecked, sip, AlphaBeta, Lambda};
use crate::error::{Error, Result};
use crate::normcore::{check_dim, normalize, Vector};
use crate::normparse::{tokenize, NormAst, ParseError, TokenKind};
use crate::search::{bisect, golden_min};

/// Golden-section iterations used by [`birkhoff_oracle`].
pub const ORACLE_ITERATIONS: usize = 200;
/// Angular resolution to which locus zero crossings are refined.
pub const LOCUS_XTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum Relation {
    Birkhoff,
    RhoPlus,
    RhoMinus,
    Rho,
    RhoLambda { lambda: Lambda },
    RhoAb { ab: AlphaBeta },
    Isosceles,
    Pythagorean,
    Semi,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Birkhoff => f.write_str("birkhoff"),
            Relation::RhoPlus => f.write_str("rho_plus"),
            Relation::RhoMinus => f.write_str("rho_minus"),
            Relation::Rho => f.write_str("rho"),
            Relation::RhoLambda { lambda } => write!(f, "rho_lambda({})", lambda.value()),
            Relation::RhoAb { ab } => write!(f, "rho_ab({}, {})", ab.alpha(), ab.beta()),
            Relation::Isosceles => f.write_str("isosceles"),
            Relation::Pythagorean => f.write_str("pythagorean"),
            Relation::Semi => f.write_str("semi"),
        }
    }
}

impl Relation {
    /// Parses a relation tag. Parameterized tags take their parameters inline
    /// (`rho_ab(0.3, 0.4)`, `rho_lambda(0.5)`) or, when written bare, from
    /// `ab` / `lambda`.
    pub fn parse(
        text: &str,
        ab: Option<AlphaBeta>,
        lambda: Option<Lambda>,
    ) -> std::result::Result<Relation, ParseError> {
        let tokens = tokenize(text)?;
        let Some(first) = tokens.first() else {
            return Err(ParseError::syntax(0, "empty relation tag"));
        };
        let TokenKind::Ident(name) = &first.kind else {
            return Err(ParseError::syntax(first.offset, "expected a relation name"));
        };
        let mut args = Vec::new();
        let mut rest = &tokens[1..];
        if let Some(open) = rest.first() {
            if open.kind != TokenKind::LParen {
                return Err(ParseError::syntax(
                    open.offset,
                    "expected '(' or end of tag",
                ));
            }
            rest = &rest[1..];
            loop {
                let Some(tok) = rest.first() else {
                    return Err(ParseError::syntax(
                        text.len(),
                        "unterminated parameter list",
                    ));
                };
                let TokenKind::Number(x) = tok.kind else {
                    return Err(ParseError::syntax(tok.offset, "expected a number"));
                };
                args.push((x, tok.offset));
                let Some(sep) = rest.get(1) else {
                    return Err(ParseError::syntax(
                        text.len(),
                        "unterminated parameter list",
                    ));
                };
                rest = &rest[2..];
                match sep.kind {
                    TokenKind::Comma => continue,
                    TokenKind::RParen => break,
                    _ => return Err(ParseError::syntax(sep.offset, "expected ',' or ')'")),
                }
            }
            if let Some(extra) = rest.first() {
                return Err(ParseError::syntax(
                    extra.offset,
                    "trailing input after relation",
                ));
            }
        }
        let arity = |n: usize| -> std::result::Result<(), ParseError> {
            if args.is_empty() || args.len() == n {
                Ok(())
            } else {
                Err(ParseError::syntax(
                    first.offset,
                    format!("'{name}' takes {n} parameter(s), got {}", args.len()),
                ))
            }
        };
        let plain = |r: Relation| -> std::result::Result<Relation, ParseError> {
            arity(0)?;
            Ok(r)
        };
        match name.as_str() {
            "birkhoff" => plain(Relation::Birkhoff),
            "rho_plus" => plain(Relation::RhoPlus),
            "rho_minus" => plain(Relation::RhoMinus),
            "rho" => plain(Relation::Rho),
            "isosceles" => plain(Relation::Isosceles),
            "pythagorean" => plain(Relation::Pythagorean),
            "semi" => plain(Relation::Semi),
            "rho_lambda" => {
                arity(1)?;
                let lambda = match args.first() {
                    Some(&(x, at)) => {
                        Lambda::new(x).map_err(|e| ParseError::domain(at, e.to_string()))?
                    }
                    None => lambda.ok_or_else(|| {
                        ParseError::syntax(first.offset, "rho_lambda needs a lambda parameter")
                    })?,
                };
                Ok(Relation::RhoLambda { lambda })
            }
            "rho_ab" => {
                arity(2)?;
                let ab = match args.as_slice() {
                    [(a, at), (b, _)] => AlphaBeta::new(*a, *b)
                        .map_err(|e| ParseError::domain(*at, e.to_string()))?,
                    _ => ab.ok_or_else(|| {
                        ParseError::syntax(first.offset, "rho_ab needs alpha and beta parameters")
                    })?,
                };
                Ok(Relation::RhoAb { ab })
            }
            other => Err(ParseError::syntax(
                first.offset,
                format!("unknown relation '{other}'"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrthoVerdict {
    pub holds: bool,
    /// Signed defect: the defining quantity for equational relations,
    /// `max(rho_-, -rho_+)` for Birkhoff (nonpositive when it holds), and
    /// `min |u + t v| - |u|` for the golden-section oracle.
    pub residual: f64,
    pub tolerance: f64,
}

fn check_pair(ast: &NormAst, u: &Vector, v: &Vector) -> Result<()> {
    check_dim(ast, u)?;
    check_dim(ast, v)
}

fn residual_unchecked(rel: Relation, ast: &NormAst, u: &Vector, v: &Vector) -> Result<f64> {
    let rho = || rho_pair_unchecked(ast, u, v);
    Ok(match rel {
        Relation::Birkhoff => {
            let (m, p) = rho();
            // Adding zero turns -0 into 0.
            m.max(-p) + 0.0
        }
        Relation::RhoPlus => rho().1,
        Relation::RhoMinus => rho().0,
        Relation::Rho => {
            let (m, p) = rho();
            0.5 * (m + p)
        }
        Relation::RhoLambda { lambda } => {
            let (m, p) = rho();
            lambda.combine(m, p)
        }
        Relation::RhoAb { ab } => {
            let (m, p) = rho();
            ab.combine(m, p)
        }
        Relation::Isosceles => ast.norm(&(u + v)) - ast.norm(&(u - v)),
        Relation::Pythagorean => {
            let d = ast.norm(&(u - v));
            let (a, b) = (ast.norm(u), ast.norm(v));
            d * d - a * a - b * b
        }
        Relation::Semi => sip(ast, v, u)?,
    })
}

/// The defining quantity of `rel` at `(u, v)`; see [`OrthoVerdict::residual`].
pub fn relation_residual(rel: Relation, ast: &NormAst, u: &Vector, v: &Vector) -> Result<f64> {
    check_pair(ast, u, v)?;
    residual_unchecked(rel, ast, u, v)
}

/// Decides `u ⊥ v` for `rel`. Birkhoff orthogonality is decided by the
/// derivative sign test `rho_-(u, v) <= tol` and `rho_+(u, v) >= -tol`.
pub fn is_orthogonal(
    rel: Relation,
    ast: &NormAst,
    u: &Vector,
    v: &Vector,
    tol: f64,
) -> Result<OrthoVerdict> {
    let residual = relation_residual(rel, ast, u, v)?;
    let holds = match rel {
        Relation::Birkhoff => residual <= tol,
        _ => residual.abs() <= tol,
    };
    Ok(OrthoVerdict {
        holds,
        residual,
        tolerance: tol,
    })
}

/// Birkhoff orthogonality from its definition: minimizes `|u + t v|` over
/// `|t| <= 4|u|/|v|` by golden-section search and checks `min >= |u| - tol`.
/// The minimizer satisfies `|t*| <= 2|u|/|v|`, so the bracket is rigorous.
pub fn birkhoff_oracle(ast: &NormAst, u: &Vector, v: &Vector, tol: f64) -> Result<OrthoVerdict> {
    check_pair(ast, u, v)?;
    if u.is_zero() {
        return Err(Error::ZeroVector("u"));
    }
    if v.is_zero() {
        return Err(Error::ZeroVector("v"));
    }
    let nu = ast.norm(u);
    let reach = 4.0 * nu / ast.norm(v);
    let (_, min) = golden_min(
        |t| ast.norm(&u.axpy(t, v)),
        -reach,
        reach,
        ORACLE_ITERATIONS,
    );
    let residual = min - nu;
    Ok(OrthoVerdict {
        holds: residual >= -tol,
        residual,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orthogonalized {
    pub s: f64,
    /// `w = s u + v`, which satisfies `rho_{alpha,beta}(u, w) = 0`.
    pub w: Vector,
}

/// Solves `rho_{alpha,beta}(u, s u + v) = 0` for `s`.
pub fn ab_orthogonalizer(
    ast: &NormAst,
    u: &Vector,
    v: &Vector,
    ab: AlphaBeta,
) -> Result<Orthogonalized> {
    check_pair(ast, u, v)?;
    if u.is_zero() {
        return Err(Error::ZeroVector("u"));
    }
    let (m, p) = rho_pair_unchecked(ast, u, v);
    let nu = ast.norm(u);
    let s = -ab.combine(m, p) / (ab.sum() * nu * nu);
    Ok(Orthogonalized {
        s,
        w: u.axpy(1.0, v).axpy(s - 1.0, u),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        self.lower <= t && t <= self.upper
    }
}

/// All `t` with `u ⊥_B t u + v`: `[-rho_+(u,v)/|u|^2, -rho_-(u,v)/|u|^2]`.
pub fn birkhoff_t_interval(ast: &NormAst, u: &Vector, v: &Vector) -> Result<Interval> {
    check_pair(ast, u, v)?;
    if u.is_zero() {
        return Err(Error::ZeroVector("u"));
    }
    let (m, p) = rho_pair_unchecked(ast, u, v);
    let n2 = ast.norm(u).powi(2);
    Ok(Interval {
        lower: -p / n2,
        upper: -m / n2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusPoint {
    pub theta: f64,
    pub x: f64,
    pub y: f64,
    pub residual: f64,
    pub is_zero_crossing: bool,
}

impl LocusPoint {
    pub fn point(&self) -> Vector {
        Vector::from_slice(&[self.x, self.y])
    }
}

/// The unit vector of `ast` in Euclidean direction `theta`.
pub fn unit_at(ast: &NormAst, theta: f64) -> Vector {
    normalize(ast, &Vector::from_slice(&[theta.cos(), theta.sin()]))
}

/// Scalar functions whose sign changes bound the zero set of `rel`.
/// Birkhoff orthogonality holds on a closed arc whose ends are zeros of
/// `rho_-` or `rho_+`, so both are traced.
fn channels(rel: Relation, ast: &NormAst, u: &Vector, x: &Vector) -> Result<Vec<f64>> {
    Ok(match rel {
        Relation::Birkhoff => {
            let (m, p) = rho_pair_unchecked(ast, u, x);
            vec![m, p]
        }
        _ => vec![residual_unchecked(rel, ast, u, x)?],
    })
}

/// Traces the zero set of `rel(u, ·)` on the unit circle of a planar norm.
///
/// The circle is parametrized by Euclidean angle; `resolution` equally
/// spaced samples are reported, together with every sign change refined by
/// bisection to [`LOCUS_XTOL`]. Rows are ordered by angle.
pub fn ortho_locus(
    ast: &NormAst,
    u: &Vector,
    rel: Relation,
    resolution: usize,
) -> Result<Vec<LocusPoint>> {
    check_dim(ast, u)?;
    if ast.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            required: 2,
            found: ast.dim(),
        });
    }
    if u.is_zero() {
        return Err(Error::ZeroVector("u"));
    }
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "locus resolution must be at least 8, got {resolution}"
        )));
    }
    let step = TAU / resolution as f64;
    let samples: Vec<(f64, Vector, Vec<f64>, f64)> = (0..resolution)
        .into_par_iter()
        .map(|j| {
            let theta = j as f64 * step;
            let x = unit_at(ast, theta);
            let ch = channels(rel, ast, u, &x)?;
            let r = residual_unchecked(rel, ast, u, &x)?;
            Ok((theta, x, ch, r))
        })
        .collect::<Result<_>>()?;

    let mut zeros: Vec<f64> = Vec::new();
    let n_channels = samples[0].2.len();
    for j in 0..resolution {
        let (theta, _, ch, _) = &samples[j];
        let next = &samples[(j + 1) % resolution].2;
        for c in 0..n_channels {
            if ch[c] == 0.0 {
                zeros.push(*theta);
            } else if next[c] != 0.0 && (ch[c] < 0.0) != (next[c] < 0.0) {
                let f = |t: f64| {
                    channels(rel, ast, u, &unit_at(ast, t))
                        .map(|v| v[c])
                        .unwrap_or(f64::NAN)
                };
                let z = bisect(f, *theta, theta + step, LOCUS_XTOL);
                zeros.push(z.rem_euclid(TAU));
            }
        }
    }
    zeros.sort_by(f64::total_cmp);
    zeros.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut rows: Vec<LocusPoint> = samples
        .into_iter()
        .map(|(theta, x, _, residual)| LocusPoint {
            theta,
            x: x.as_slice()[0],
            y: x.as_slice()[1],
            residual,
            is_zero_crossing: false,
        })
        .collect();
    for theta in zeros {
        let x = unit_at(ast, theta);
        rows.push(LocusPoint {
            theta,
            x: x.as_slice()[0],
            y: x.as_slice()[1],
            residual: residual_unchecked(rel, ast, u, &x)?,
            is_zero_crossing: true,
        });
    }
    rows.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(rows)
}
