//! One-sided norm derivatives and the functionals built from them.
//!
//! For a norm `N` the one-sided directional derivative `D±N(u; v)` exists at
//! every point because `N` is convex. The norm derivatives are
//! `rho±(u, v) = N(u) · D±N(u; v)`, i.e. the one-sided limits of
//! `(N(u + t v)^2 - N(u)^2) / 2t`.
//!
//! [`dir_deriv_exact`] evaluates `D±N` by structural recursion over the
//! [`NormAst`]; [`rho_pm_numeric`] is an independent finite-difference route
//! that returns an enclosure, used as a cross-check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normcore::{check_dim, eval_node, Vector};
use crate::normparse::{Exponent, NormAst, NormNode};

/// Relative band for the `l_inf` active index set.
pub const ACTIVE_SET_BAND: f64 = 1e-12;
/// Relative band under which the two children of a `max` node count as tied.
pub const MAX_TIE_BAND: f64 = 1e-12;
/// Smallest dimensionless step of the numeric ladder.
pub const LADDER_FLOOR: f64 = 1e-14;
/// Bound on the relative rounding error of one norm evaluation, in ulps.
const EVAL_ULPS: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

/// The parameter pair of `rho_{alpha,beta} = alpha rho_- + beta rho_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaBeta {
    alpha: f64,
    beta: f64,
}

impl AlphaBeta {
    /// Requires `0 <= alpha, beta < 1` and `0 < alpha + beta < 1`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let unit = |x: f64| (0.0..1.0).contains(&x);
        let s = alpha + beta;
        if !(unit(alpha) && unit(beta) && s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha, beta must lie in [0, 1) with 0 < alpha + beta < 1, got ({alpha}, {beta})"
            )));
        }
        Ok(AlphaBeta { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sum(&self) -> f64 {
        self.alpha + self.beta
    }

    /// The pair `(beta, alpha)`.
    pub fn swapped(&self) -> Self {
        AlphaBeta {
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    pub fn combine(&self, minus: f64, plus: f64) -> f64 {
        self.alpha * minus + self.beta * plus
    }
}

/// Weight of `rho_-` in `rho_lambda = lambda rho_- + (1 - lambda) rho_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lambda(f64);

impl Lambda {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        Ok(Lambda(lambda))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn combine(&self, minus: f64, plus: f64) -> f64 {
        self.0 * minus + (1.0 - self.0) * plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Numeric,
}

/// A one-sided derivative value. For numeric results the true value lies in
/// `[value - enclosure_width, value + enclosure_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivResult {
    pub value: f64,
    pub method: Method,
    pub enclosure_width: f64,
}

impl DerivResult {
    pub fn exact(value: f64) -> Self {
        DerivResult {
            value,
            method: Method::Exact,
            enclosure_width: 0.0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.enclosure_width
    }
}

fn check_pair(ast: &NormAst, u: &Vector, v: &Vector) -> Result<()> {
    check_dim(ast, u)?;
    check_dim(ast, v)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(D-N(u; v), D+N(u; v))` for `u != 0`.
fn node_derivs(node: &NormNode, u: &[f64], v: &[f64]) -> (f64, f64) {
    match node {
        NormNode::L1 => weighted_l1(u, v, None),
        NormNode::LInf => weighted_linf(u, v, None),
        NormNode::L2 => smooth_lp(u, v, 2.0, None),
        NormNode::Lp(p) => smooth_lp(u, v, *p, None),
        NormNode::WLp { p, weights } => match *p {
            Exponent::Infinity => weighted_linf(u, v, Some(weights)),
            Exponent::Finite(1.0) => weighted_l1(u, v, Some(weights)),
            Exponent::Finite(p) => smooth_lp(u, v, p, Some(weights)),
        },
        NormNode::Max(a, b) => {
            let na = eval_node(a, u);
            let nb = eval_node(b, u);
            if (na - nb).abs() <= MAX_TIE_BAND * na.max(nb).max(1.0) {
                let (am, ap) = node_derivs(a, u, v);
                let (bm, bp) = node_derivs(b, u, v);
                (am.min(bm), ap.max(bp))
            } else if na > nb {
                node_derivs(a, u, v)
            } else {
                node_derivs(b, u, v)
            }
        }
        NormNode::Sum(a, b) => {
            let (am, ap) = node_derivs(a, u, v);
            let (bm, bp) = node_derivs(b, u, v);
            (am + bm, ap + bp)
        }
        NormNode::Scale(c, a) => {
            let (m, p) = node_derivs(a, u, v);
            (c * m, c * p)
        }
    }
}

fn weighted_l1(u: &[f64], v: &[f64], w: Option<&[f64]>) -> (f64, f64) {
    let mut linear = 0.0;
    let mut kink = 0.0;
    for (i, (&a, &b)) in u.iter().zip(v).enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        if a == 0.0 {
            kink += wi * b.abs();
        } else {
            linear += wi * sign(a) * b;
        }
    }
    (linear - kink, linear + kink)
}

fn weighted_linf(u: &[f64], v: &[f64], w: Option<&[f64]>) -> (f64, f64) {
    let wi = |i: usize| w.map_or(1.0, |w| w[i]);
    let top = u
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (i, a)| m.max(wi(i) * a.abs()));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, (&a, &b)) in u.iter().zip(v).enumerate() {
        if wi(i) * a.abs() >= (1.0 - ACTIVE_SET_BAND) * top {
            let d = wi(i) * sign(a) * b;
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

/// `N(u)^(1-p) sum w_i |u_i|^(p-1) sign(u_i) v_i`, evaluated in the scaled
/// form `sum w_i^(1/p) (y_i / N)^(p-1) sign(u_i) v_i` with `y_i = w_i^(1/p) |u_i|`.
fn smooth_lp(u: &[f64], v: &[f64], p: f64, w: Option<&[f64]>) -> (f64, f64) {
    let root = |i: usize| w.map_or(1.0, |w| w[i].powf(1.0 / p));
    let ys: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, a)| root(i) * a.abs())
        .collect();
    let m = ys.iter().fold(0.0f64, |m, y| m.max(*y));
    let s: f64 = ys.iter().map(|y| (y / m).powf(p)).sum();
    let n = m * s.powf(1.0 / p);
    let d: f64 = u
        .iter()
        .zip(v)
        .enumerate()
        .map(|(i, (&a, &b))| {
            let r = ys[i] / n;
            let g = if p == 2.0 { r } else { r.powf(p - 1.0) };
            root(i) * g * sign(a) * b
        })
        .sum();
    (d, d)
}

fn derivs_unchecked(ast: &NormAst, u: &Vector, v: &Vector) -> (f64, f64) {
    if u.is_zero() {
        let nv = ast.norm(v);
        return (-nv, nv);
    }
    node_derivs(ast.root(), u.as_slice(), v.as_slice())
}

/// The one-sided directional derivative `D±N(u; v)` of the norm itself.
/// At `u = 0` this is `±N(v)`.
pub fn dir_deriv_exact(ast: &NormAst, u: &Vector, v: &Vector, side: Side) -> Result<f64> {
    check_pair(ast, u, v)?;
    let (m, p) = derivs_unchecked(ast, u, v);
    Ok(match side {
        Side::Plus => p,
        Side::Minus => m,
    })
}

/// `(rho_-(u, v), rho_+(u, v))` from the exact engine.
pub fn rho_pair(ast: &NormAst, u: &Vector, v: &Vector) -> Result<(f64, f64)> {
    check_pair(ast, u, v)?;
    Ok(rho_pair_unchecked(ast, u, v))
}

pub(crate) fn rho_pair_unchecked(ast: &NormAst, u: &Vector, v: &Vector) -> (f64, f64) {
    if u.is_zero() {
        return (0.0, 0.0);
    }
    let nu = ast.norm(u);
    let (m, p) = derivs_unchecked(ast, u, v);
    (nu * m, nu * p)
}

pub fn rho_pm(ast: &NormAst, u: &Vector, v: &Vector, side: Side) -> Result<DerivResult> {
    let (m, p) = rho_pair(ast, u, v)?;
    Ok(DerivResult::exact(match side {
        Side::Plus => p,
        Side::Minus => m,
    }))
}

/// Finite-difference enclosure of `rho±(u, v)`.
///
/// The quotient `g(t) = (N(u + t v) - N(u)) / t` is nondecreasing in `t`, so
/// `g(t_k)` decreases to `D+N(u; v)` along `t_k = t_0 2^-k` (and `g(-t_k)`
/// increases to `D-N`). The ladder stops once successive quotients differ by
/// less than `tol / N(u)`. The returned width is twice the last change plus a
/// bound on the cancellation error of the quotient; if the ladder reaches
/// [`LADDER_FLOOR`] first, the narrowest enclosure seen is returned inside
/// [`Error::ToleranceUnreachable`].
pub fn rho_pm_numeric(
    ast: &NormAst,
    u: &Vector,
    v: &Vector,
    side: Side,
    tol: f64,
) -> Result<DerivResult> {
    check_pair(ast, u, v)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if u.is_zero() {
        return Ok(DerivResult::exact(0.0));
    }
    let nu = ast.norm(u);
    let nv = ast.norm(v).max(f64::MIN_POSITIVE);
    let dir = match side {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    let quotient = |t: f64| {
        let moved = ast.norm(&u.axpy(dir * t, v));
        let q = (moved - nu) / (dir * t);
        let err = EVAL_ULPS * f64::EPSILON * (nu + moved) / t;
        (q, err)
    };
    let t0 = 1e-2 * nu / nv;
    let (mut prev, mut prev_err) = quotient(t0);
    let mut best: Option<DerivResult> = None;
    let mut k = 1;
    loop {
        let t = t0 * 0.5f64.powi(k);
        let (cur, err) = quotient(t);
        let change = (prev - cur).abs();
        let result = DerivResult {
            value: nu * cur,
            method: Method::Numeric,
            enclosure_width: nu * (2.0 * change + 2.0 * (err + prev_err)),
        };
        if best.is_none_or(|b| result.enclosure_width < b.enclosure_width) {
            best = Some(result);
        }
        if change < tol / nu {
            return Ok(result);
        }
        if t * nv / nu < LADDER_FLOOR {
            return Err(Error::ToleranceUnreachable {
                best: best.unwrap_or(result),
            });
        }
        prev = cur;
        prev_err = err;
        k += 1;
    }
}

/// `rho(u, v) = (rho_- + rho_+) / 2`.
pub fn rho(ast: &NormAst, u: &Vector, v: &Vector) -> Result<f64> {
    let (m, p) = rho_pair(ast, u, v)?;
    Ok(0.5 * (m + p))
}

pub fn rho_lambda(ast: &NormAst, u: &Vector, v: &Vector, lambda: Lambda) -> Result<f64> {
    let (m, p) = rho_pair(ast, u, v)?;
    Ok(lambda.combine(m, p))
}

pub fn rho_ab(ast: &NormAst, u: &Vector, v: &Vector, ab: AlphaBeta) -> Result<f64> {
    let (m, p) = rho_pair(ast, u, v)?;
    Ok(ab.combine(m, p))
}

/// Whether `rho_+ = rho_-` at `(u, v)` up to `1e-12 · max(1, |u||v|)`.
pub fn is_smooth_at(ast: &NormAst, u: &Vector, v: &Vector) -> Result<bool> {
    let (m, p) = rho_pair(ast, u, v)?;
    Ok(p - m <= smooth_band(ast, u, v))
}

fn smooth_band(ast: &NormAst, u: &Vector, v: &Vector) -> f64 {
    1e-12 * (ast.norm(u) * ast.norm(v)).max(1.0)
}

/// The semi-inner product `[v, u] = rho_+(u, v)`, defined where the norm is
/// smooth at `u` in direction `v`.
pub fn sip(ast: &NormAst, v: &Vector, u: &Vector) -> Result<f64> {
    let (m, p) = rho_pair(ast, u, v)?;
    if u.is_zero() {
        return Err(Error::ZeroVector("u"));
    }
    if p - m > smooth_band(ast, u, v) {
        return Err(Error::NonSmooth { plus: p, minus: m });
    }
    Ok(p)
}
