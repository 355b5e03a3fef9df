//! Vectors, norm evaluation, sampled norm-axiom audits and unit-sphere sampling.
//!
//! All sampling goes through [`SampleConfig::rng`], which is ChaCha8 seeded with
//! `rand_chacha`'s `seed_from_u64` (a PCG32 expansion of the 64-bit seed) and
//! optionally moved to a separate stream. The same seed therefore replays the
//! same vectors on every platform.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::normparse::{lex_number, Exponent, NormAst, NormNode, ParseError};

/// Default absolute tolerance for the norm-axiom audit on unit-scale data.
pub const AUDIT_TOL: f64 = 1e-10;

/// A point of `R^n` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(index) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Vector(coords))
    }

    /// Panics if a coordinate is not finite.
    pub fn from_slice(coords: &[f64]) -> Self {
        Vector::new(coords.to_vec()).expect("vector coordinates must be finite")
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    /// The `i`-th standard basis vector of `R^n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Vector) -> Vector {
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * b)
                .collect(),
        )
    }

    pub fn scaled(&self, t: f64) -> Vector {
        Vector(self.0.iter().map(|a| t * a).collect())
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl FromStr for Vector {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse_vector(s)
    }
}

/// Parses comma-separated decimals such as `"1,-0.5,2"`.
pub fn parse_vector(text: &str) -> std::result::Result<Vector, ParseError> {
    parse_vector_at(text, 0)
}

pub(crate) fn parse_vector_at(text: &str, base: usize) -> std::result::Result<Vector, ParseError> {
    let mut coords = Vec::new();
    let mut start = 0;
    for field in text.split(',') {
        let trimmed_start = field.len() - field.trim_start().len();
        let body = field.trim();
        let at = base + start + trimmed_start;
        if body.is_empty() {
            return Err(ParseError::syntax(at, "empty vector coordinate"));
        }
        let (x, len) = lex_number(body, 0).map_err(|e| shift(e, at))?;
        if len != body.len() {
            return Err(ParseError::syntax(
                at + len,
                "trailing characters in coordinate",
            ));
        }
        if !x.is_finite() {
            return Err(ParseError::domain(at, "vector coordinate is not finite"));
        }
        coords.push(x);
        start += field.len() + 1;
    }
    Ok(Vector(coords))
}

fn shift(e: ParseError, by: usize) -> ParseError {
    match e {
        ParseError::Syntax { offset, message } => ParseError::Syntax {
            offset: offset + by,
            message,
        },
        ParseError::Dimension { offset, message } => ParseError::Dimension {
            offset: offset + by,
            message,
        },
        ParseError::Domain { offset, message } => ParseError::Domain {
            offset: offset + by,
            message,
        },
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scaled(-1.0)
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scaled(self)
    }
}

pub(crate) fn check_dim(ast: &NormAst, v: &Vector) -> Result<()> {
    if v.len() != ast.dim() {
        return Err(Error::DimensionMismatch {
            expected: ast.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

impl NormAst {
    /// Evaluates the norm on a coordinate slice of the right length.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        eval_node(self.root(), x)
    }

    pub fn norm(&self, v: &Vector) -> f64 {
        self.eval(v.as_slice())
    }
}

pub(crate) fn eval_node(node: &NormNode, x: &[f64]) -> f64 {
    match node {
        NormNode::L1 => x.iter().map(|a| a.abs()).sum(),
        NormNode::L2 => lp_scaled(x.iter().map(|a| a.abs()), 2.0),
        NormNode::LInf => x.iter().fold(0.0, |m, a| m.max(a.abs())),
        NormNode::Lp(p) => lp_scaled(x.iter().map(|a| a.abs()), *p),
        NormNode::WLp { p, weights } => match *p {
            Exponent::Infinity => x
                .iter()
                .zip(weights)
                .fold(0.0, |m, (a, w)| m.max(w * a.abs())),
            Exponent::Finite(1.0) => x.iter().zip(weights).map(|(a, w)| w * a.abs()).sum(),
            Exponent::Finite(p) => lp_scaled(
                x.iter()
                    .zip(weights)
                    .map(|(a, w)| w.powf(1.0 / p) * a.abs()),
                p,
            ),
        },
        NormNode::Max(a, b) => eval_node(a, x).max(eval_node(b, x)),
        NormNode::Sum(a, b) => eval_node(a, x) + eval_node(b, x),
        NormNode::Scale(c, a) => c * eval_node(a, x),
    }
}

/// `(sum y_i^p)^(1/p)` for nonnegative `y`, scaled by the largest entry to
/// avoid overflow and underflow.
fn lp_scaled<I: Iterator<Item = f64> + Clone>(ys: I, p: f64) -> f64 {
    let m = ys.clone().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = if p == 2.0 {
        ys.map(|y| (y / m) * (y / m)).sum()
    } else {
        ys.map(|y| (y / m).powf(p)).sum()
    };
    m * if p == 2.0 { s.sqrt() } else { s.powf(1.0 / p) }
}

/// Checked norm evaluation.
pub fn eval_norm(ast: &NormAst, u: &Vector) -> Result<f64> {
    check_dim(ast, u)?;
    Ok(ast.norm(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub count: usize,
    /// Coordinates are drawn uniformly from `[-scale, scale]`.
    pub scale: f64,
}

impl SampleConfig {
    pub fn new(seed: u64, count: usize) -> Self {
        SampleConfig {
            seed,
            count,
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// An independent stream for the same seed.
    pub fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(stream);
        rng
    }
}

/// A vector with coordinates uniform in `[-scale, scale]`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vector {
    Vector((0..n).map(|_| rng.random_range(-scale..=scale)).collect())
}

pub(crate) fn random_nonzero<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vector {
    loop {
        let v = random_vector(rng, n, scale);
        if !v.is_zero() {
            return v;
        }
    }
}

/// Radially projects a nonzero vector onto the unit sphere of `ast`.
pub fn normalize(ast: &NormAst, x: &Vector) -> Vector {
    let n = ast.norm(x);
    let y = x.scaled(1.0 / n);
    // One correction step absorbs the rounding of the division.
    let m = ast.norm(&y);
    if (m - 1.0).abs() > 1e-15 {
        y.scaled(1.0 / m)
    } else {
        y
    }
}

/// `cfg.count` deterministic points on the unit sphere of `ast`.
pub fn sphere_sample(ast: &NormAst, cfg: &SampleConfig) -> Vec<Vector> {
    let mut rng = cfg.rng();
    (0..cfg.count)
        .map(|_| normalize(ast, &random_nonzero(&mut rng, ast.dim(), cfg.scale)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Homogeneity,
    Triangle,
    Positivity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub u: Vector,
    pub v: Vector,
    pub t: f64,
    /// Amount by which the axiom is violated beyond the tolerance allowance.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub seed: u64,
    pub checked: usize,
    pub positivity_skipped: usize,
    pub violations: usize,
    pub worst: Option<AxiomViolation>,
    pub tolerance: f64,
}

/// Checks homogeneity, the triangle inequality and positivity on one triple.
/// The second component is `true` when the positivity check was skipped because `u = 0`.
pub fn audit_triple(
    ast: &NormAst,
    u: &Vector,
    v: &Vector,
    t: f64,
    tol: f64,
) -> (Vec<AxiomViolation>, bool) {
    let nu = ast.norm(u);
    let nv = ast.norm(v);
    let mut out = Vec::new();
    let mut record = |axiom, excess: f64| {
        if excess > 0.0 {
            out.push(AxiomViolation {
                axiom,
                u: u.clone(),
                v: v.clone(),
                t,
                excess,
            });
        }
    };
    let hom = (ast.norm(&u.scaled(t)) - t.abs() * nu).abs() - tol * nu.max(f64::MIN_POSITIVE);
    record(Axiom::Homogeneity, hom);
    let tri = ast.norm(&(u + v)) - (nu + nv + tol);
    record(Axiom::Triangle, tri);
    let zero = u.is_zero();
    if !zero && nu <= 0.0 {
        record(Axiom::Positivity, f64::MIN_POSITIVE);
    }
    (out, zero)
}

/// Samples `cfg.count` triples `(u, v, t)` with `t` uniform in `[-10, 10]` and audits each.
pub fn audit_norm(ast: &NormAst, cfg: &SampleConfig, tol: f64) -> AuditReport {
    let mut rng = cfg.rng();
    let mut report = AuditReport {
        seed: cfg.seed,
        checked: 0,
        positivity_skipped: 0,
        violations: 0,
        worst: None,
        tolerance: tol,
    };
    for _ in 0..cfg.count {
        let u = random_vector(&mut rng, ast.dim(), cfg.scale);
        let v = random_vector(&mut rng, ast.dim(), cfg.scale);
        let t = rng.random_range(-10.0..=10.0);
        let (found, skipped) = audit_triple(ast, &u, &v, t, tol);
        report.absorb(found, skipped);
    }
    report
}

impl AuditReport {
    pub(crate) fn absorb(&mut self, found: Vec<AxiomViolation>, skipped: bool) {
        self.checked += 1;
        if skipped {
            self.positivity_skipped += 1;
        }
        self.violations += found.len();
        for v in found {
            if self.worst.as_ref().is_none_or(|w| v.excess > w.excess) {
                self.worst = Some(v);
            }
        }
    }
}
