//! Operator norms of linear maps between normed planes and spaces, checks of
//! the three conditions characterizing `rho_{alpha,beta}`-orthogonality
//! preservers, and a locus-driven search for pairs separating two
//! orthogonality relations.

use std::f64::consts::TAU;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::derivatives::{rho_pair_unchecked, AlphaBeta};
use crate::error::{Error, Result};
use crate::geometry::corner_vectors;
use crate::normcore::{normalize, random_nonzero, random_vector, SampleConfig, Vector};
use crate::normparse::{lex_number, NormAst, ParseError};
use crate::orthogonality::{ab_orthogonalizer, is_orthogonal, ortho_locus, unit_at, Relation};
use crate::search::golden_min;

/// Angles in the seeding grid of the planar operator-norm search.
pub const OPNORM_GRID: usize = 1024;
/// Condition tolerance when the operator norm comes from the planar grid search.
pub const PRESERVER_TOL: f64 = 1e-6;
/// Condition tolerance when the operator norm comes from hill climbing.
pub const PRESERVER_TOL_COARSE: f64 = 1e-5;

/// A dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "a {rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(index) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Matrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Matrix {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            entries: self.entries.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let x = x.as_slice();
        Vector::from_slice(
            &self
                .entries
                .chunks(self.cols)
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect::<Vec<f64>>(),
        )
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.entries.chunks(self.cols).enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
        }
        Ok(())
    }
}

/// Parses `"a,b;c,d"`: rows separated by `;`, entries by `,`.
pub fn parse_matrix(text: &str) -> std::result::Result<Matrix, ParseError> {
    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut start = 0;
    for row in text.split(';') {
        let mut n = 0;
        let mut at = start;
        for cell in row.split(',') {
            let lead = cell.len() - cell.trim_start().len();
            let trimmed = cell.trim();
            if trimmed.is_empty() {
                return Err(ParseError::syntax(at + lead, "empty matrix entry"));
            }
            let (x, len) = lex_number(text, at + lead)?;
            if len != trimmed.len() {
                return Err(ParseError::syntax(
                    at + lead + len,
                    "unexpected character in matrix entry",
                ));
            }
            if !x.is_finite() {
                return Err(ParseError::domain(
                    at + lead,
                    "matrix entries must be finite",
                ));
            }
            entries.push(x);
            n += 1;
            at += cell.len() + 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(ParseError::dimension(
                    start,
                    format!("row {} has {n} entries, expected {c}", rows + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
        start += row.len() + 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Matrix {
        rows,
        cols,
        entries,
    })
}

/// A matrix mapping `(R^cols, domain)` to `(R^rows, codomain)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub matrix: Matrix,
    pub domain: NormAst,
    pub codomain: NormAst,
}

impl LinearMap {
    pub fn new(matrix: Matrix, domain: NormAst, codomain: NormAst) -> Result<Self> {
        if domain.dim() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                found: domain.dim(),
            });
        }
        if codomain.dim() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: codomain.dim(),
            });
        }
        Ok(LinearMap {
            matrix,
            domain,
            codomain,
        })
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        self.matrix.apply(x)
    }

    /// `|T x|` for a domain unit vector `x`.
    fn gain(&self, x: &Vector) -> f64 {
        self.codomain.norm(&self.apply(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Angle grid on the planar unit circle plus golden-section refinement.
    GridGolden,
    /// Multi-start random hill climbing on the unit sphere.
    HillClimb,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorNorm {
    /// `|T x|` at the best unit vector found; never exceeds the true norm
    /// beyond rounding.
    pub lower_bound: f64,
    pub direction: Vector,
    pub method: SearchMethod,
    /// Grid points for the planar search, starts for hill climbing.
    pub search_points: usize,
}

fn planar_opnorm(map: &LinearMap) -> OperatorNorm {
    let step = TAU / OPNORM_GRID as f64;
    let gain = |theta: f64| map.gain(&unit_at(&map.domain, theta));
    let values: Vec<f64> = (0..OPNORM_GRID)
        .into_par_iter()
        .map(|k| gain(k as f64 * step))
        .collect();
    // Refine every grid-local maximum within 1e-3 of the best value.
    let top = values.iter().copied().fold(f64::MIN, f64::max);
    let mut best = (f64::MIN, 0.0);
    for k in 0..OPNORM_GRID {
        let prev = values[(k + OPNORM_GRID - 1) % OPNORM_GRID];
        let next = values[(k + 1) % OPNORM_GRID];
        let v = values[k];
        if v >= prev && v >= next && v >= top * (1.0 - 1e-3) {
            let c = k as f64 * step;
            let (t, neg) = golden_min(|t| -gain(t), c - step, c + step, 100);
            for (theta, g) in [(c, v), (t, -neg)] {
                if g > best.0 {
                    best = (g, theta);
                }
            }
        }
    }
    OperatorNorm {
        lower_bound: best.0,
        direction: unit_at(&map.domain, best.1),
        method: SearchMethod::GridGolden,
        search_points: OPNORM_GRID,
    }
}

fn hill_climb(map: &LinearMap, start: Vector, cfg: &SampleConfig, stream: u64) -> (f64, Vector) {
    let mut rng = cfg.stream(stream);
    let n = map.domain.dim();
    let mut x = normalize(&map.domain, &start);
    let mut fx = map.gain(&x);
    let mut h = 0.5;
    let mut failures = 0;
    for _ in 0..4000 {
        if h < 1e-12 {
            break;
        }
        let y = x.axpy(h, &random_vector(&mut rng, n, 1.0));
        if y.is_zero() {
            continue;
        }
        let y = normalize(&map.domain, &y);
        let fy = map.gain(&y);
        if fy > fx {
            x = y;
            fx = fy;
            failures = 0;
        } else {
            failures += 1;
            if failures >= 4 * n {
                h *= 0.5;
                failures = 0;
            }
        }
    }
    (fx, x)
}

fn climbing_opnorm(map: &LinearMap, cfg: &SampleConfig) -> OperatorNorm {
    let mut starts = corner_vectors(&map.domain);
    let mut rng = cfg.rng();
    starts.extend((0..cfg.count.max(1)).map(|_| random_nonzero(&mut rng, map.domain.dim(), 1.0)));
    let results: Vec<(f64, Vector)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(k, s)| hill_climb(map, s, cfg, k as u64 + 1))
        .collect();
    let n = results.len();
    let (value, direction) = results
        .into_iter()
        .fold((f64::MIN, Vector::zeros(0)), |best, r| {
            if r.0 > best.0 {
                r
            } else {
                best
            }
        });
    OperatorNorm {
        lower_bound: value,
        direction,
        method: SearchMethod::HillClimb,
        search_points: n,
    }
}

/// Lower estimate of `sup |T x|` over the domain unit sphere. Planar domains
/// use a 1024-angle grid refined by golden-section search; higher dimensions
/// use hill climbing from the corner set and `cfg.count` random starts.
pub fn operator_norm(map: &LinearMap, cfg: &SampleConfig) -> Result<OperatorNorm> {
    if map.matrix.is_zero() {
        return Err(Error::ZeroMap);
    }
    Ok(if map.domain.dim() == 2 {
        planar_opnorm(map)
    } else {
        climbing_opnorm(map, cfg)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `T` maps `rho_ab`-orthogonal pairs to `rho_ab`-orthogonal pairs.
    PreservesOrthogonality,
    /// `|T u| = |T| |u|`.
    ScaledIsometry,
    /// `rho_ab(T u, T v) = |T|^2 rho_ab(u, v)`.
    ScalesRho,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionWitness {
    pub u: Vector,
    /// Absent for the single-vector isometry condition.
    pub v: Option<Vector>,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub passes: bool,
    pub worst_metric: f64,
    /// The worst pair; present whenever any sample was evaluated.
    pub witness: Option<ConditionWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreserverReport {
    pub operator_norm: OperatorNorm,
    pub tolerance: f64,
    pub conditions: [ConditionResult; 3],
    pub seed: u64,
    pub samples: usize,
}

impl PreserverReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.passes)
    }

    pub fn all_fail(&self) -> bool {
        self.conditions.iter().all(|c| !c.passes)
    }
}

fn rho_ab_of(ast: &NormAst, u: &Vector, v: &Vector, ab: AlphaBeta) -> f64 {
    let (m, p) = rho_pair_unchecked(ast, u, v);
    ab.combine(m, p)
}

/// `|rho_ab(T u, T w)| / (|T u| |T w|)`, zero when an image vanishes.
pub fn orthogonality_defect(map: &LinearMap, u: &Vector, w: &Vector, ab: AlphaBeta) -> f64 {
    let (tu, tw) = (map.apply(u), map.apply(w));
    let d = map.codomain.norm(&tu) * map.codomain.norm(&tw);
    if d == 0.0 {
        return 0.0;
    }
    rho_ab_of(&map.codomain, &tu, &tw, ab).abs() / d
}

/// `| |T x| - |T| |x| | / (|T| |x|)`.
pub fn isometry_defect(map: &LinearMap, x: &Vector, opnorm: f64) -> f64 {
    let scale = opnorm * map.domain.norm(x);
    (map.codomain.norm(&map.apply(x)) - scale).abs() / scale
}

/// `|rho_ab(T u, T v) - |T|^2 rho_ab(u, v)| / (|T|^2 |u| |v|)`.
pub fn rho_scaling_defect(
    map: &LinearMap,
    u: &Vector,
    v: &Vector,
    ab: AlphaBeta,
    opnorm: f64,
) -> f64 {
    let t2 = opnorm * opnorm;
    let image = rho_ab_of(&map.codomain, &map.apply(u), &map.apply(v), ab);
    (image - t2 * rho_ab_of(&map.domain, u, v, ab)).abs()
        / (t2 * map.domain.norm(u) * map.domain.norm(v))
}

fn condition(condition: Condition, tol: f64, items: Vec<ConditionWitness>) -> ConditionResult {
    let mut worst: Option<ConditionWitness> = None;
    for w in items {
        if worst.as_ref().is_none_or(|b| w.metric > b.metric) {
            worst = Some(w);
        }
    }
    let worst_metric = worst.as_ref().map_or(0.0, |w| w.metric);
    ConditionResult {
        condition,
        passes: !(worst_metric > tol),
        worst_metric,
        witness: worst,
    }
}

/// Measures the three equivalent conditions on `cfg.count` samples each:
/// orthogonal pairs built by [`ab_orthogonalizer`], sphere points against the
/// [`operator_norm`] estimate, and the scaling of `rho_ab`. Each condition
/// passes when its worst relative defect is within 1e-6 (1e-5 when the
/// operator norm came from hill climbing).
pub fn preserver_check(
    map: &LinearMap,
    ab: AlphaBeta,
    cfg: &SampleConfig,
) -> Result<PreserverReport> {
    if map.domain.dim() != map.codomain.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.domain.dim(),
            found: map.codomain.dim(),
        });
    }
    let opnorm = operator_norm(map, cfg)?;
    let tol = match opnorm.method {
        SearchMethod::GridGolden => PRESERVER_TOL,
        SearchMethod::HillClimb => PRESERVER_TOL_COARSE,
    };
    let t = opnorm.lower_bound;
    let n = map.domain.dim();
    let corners = corner_vectors(&map.domain);
    let mut rng = cfg.stream(0);
    let mut pairs: Vec<(Vector, Vector)> = corners
        .iter()
        .flat_map(|u| corners.iter().map(move |v| (u.clone(), v.clone())))
        .collect();
    pairs.extend((0..cfg.count).map(|_| {
        (
            random_nonzero(&mut rng, n, cfg.scale),
            random_nonzero(&mut rng, n, cfg.scale),
        )
    }));

    let preserves: Vec<ConditionWitness> = pairs
        .par_iter()
        .filter_map(|(u, v)| {
            let w = ab_orthogonalizer(&map.domain, u, v, ab).ok()?.w;
            // v parallel to u leaves only rounding noise in w.
            let tiny = map.domain.norm(&w) <= 1e-9 * map.domain.norm(v);
            (!tiny).then(|| ConditionWitness {
                u: u.clone(),
                metric: orthogonality_defect(map, u, &w, ab),
                v: Some(w),
            })
        })
        .collect();
    let isometry: Vec<ConditionWitness> = corners
        .iter()
        .chain(pairs.iter().map(|(u, _)| u))
        .map(|x| ConditionWitness {
            u: x.clone(),
            v: None,
            metric: isometry_defect(map, x, t),
        })
        .collect();
    let scales: Vec<ConditionWitness> = pairs
        .par_iter()
        .map(|(u, v)| ConditionWitness {
            u: u.clone(),
            v: Some(v.clone()),
            metric: rho_scaling_defect(map, u, v, ab, t),
        })
        .collect();

    Ok(PreserverReport {
        conditions: [
            condition(Condition::PreservesOrthogonality, tol, preserves),
            condition(Condition::ScaledIsometry, tol, isometry),
            condition(Condition::ScalesRho, tol, scales),
        ],
        operator_norm: opnorm,
        tolerance: tol,
        seed: cfg.seed,
        samples: pairs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatingPair {
    pub u: Vector,
    pub v: Vector,
    /// Residual of the relation that holds.
    pub holding_residual: f64,
    /// Residual of the relation that fails.
    pub failing_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncomparabilityReport {
    pub relation_a: Relation,
    pub relation_b: Relation,
    /// A pair with `a` holding and `b` failing.
    pub witness_ab: Option<SeparatingPair>,
    /// A pair with `b` holding and `a` failing.
    pub witness_ba: Option<SeparatingPair>,
    pub seed: u64,
    pub budget: usize,
    pub tolerance: f64,
    pub resolution: usize,
    /// Base vectors `u` whose loci were traced.
    pub base_vectors: usize,
    pub tested_ab: usize,
    pub tested_ba: usize,
    /// Candidates at which the holding relation did not verify.
    pub discarded: usize,
    /// Loci that could not be traced (for example `semi` at a non-smooth point).
    pub untraceable: usize,
}

/// Tests `v` against the pair of relations; `Some` when `holds` holds and
/// `fails` fails, `None` when the candidate separates nothing, `Err(())` when
/// `holds` does not verify.
fn separate(
    ast: &NormAst,
    holds: Relation,
    fails: Relation,
    u: &Vector,
    v: &Vector,
    tol: f64,
) -> std::result::Result<Option<SeparatingPair>, ()> {
    let a = is_orthogonal(holds, ast, u, v, tol).map_err(|_| ())?;
    if !a.holds {
        return Err(());
    }
    let Ok(b) = is_orthogonal(fails, ast, u, v, tol) else {
        return Ok(None);
    };
    Ok((!b.holds).then(|| SeparatingPair {
        u: u.clone(),
        v: v.clone(),
        holding_residual: a.residual,
        failing_residual: b.residual,
    }))
}

/// Points of the locus of `rel` worth testing: refined zero crossings and
/// samples at which the relation holds outright.
fn candidates(
    ast: &NormAst,
    u: &Vector,
    rel: Relation,
    resolution: usize,
    tol: f64,
) -> Option<Vec<Vector>> {
    let rows = ortho_locus(ast, u, rel, resolution).ok()?;
    Some(
        rows.into_iter()
            .filter(|r| {
                r.is_zero_crossing
                    || is_orthogonal(rel, ast, u, &r.point(), tol).is_ok_and(|v| v.holds)
            })
            .map(|r| r.point())
            .collect(),
    )
}

/// Searches a normed plane for pairs that separate `rel_a` from `rel_b`.
///
/// Base vectors are the corner set followed by seeded random vectors, at
/// most `cfg.count` in total. For each base vector `u` the loci of both
/// relations are traced and every candidate `v` is checked with
/// [`is_orthogonal`]; at most `cfg.count` candidates are tested per
/// direction. Only verified pairs are reported.
pub fn mine_incomparability(
    ast: &NormAst,
    rel_a: Relation,
    rel_b: Relation,
    cfg: &SampleConfig,
    resolution: usize,
    tol: f64,
) -> Result<IncomparabilityReport> {
    if ast.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            required: 2,
            found: ast.dim(),
        });
    }
    let mut report = IncomparabilityReport {
        relation_a: rel_a,
        relation_b: rel_b,
        witness_ab: None,
        witness_ba: None,
        seed: cfg.seed,
        budget: cfg.count,
        tolerance: tol,
        resolution,
        base_vectors: 0,
        tested_ab: 0,
        tested_ba: 0,
        discarded: 0,
        untraceable: 0,
    };
    let mut rng = cfg.rng();
    let corners = corner_vectors(ast);
    let mut bases = corners.into_iter();
    let budget = cfg.count;
    let done = |r: &IncomparabilityReport| {
        (r.witness_ab.is_some() || r.tested_ab >= budget)
            && (r.witness_ba.is_some() || r.tested_ba >= budget)
    };
    while report.base_vectors < budget && !done(&report) {
        let u = bases
            .next()
            .unwrap_or_else(|| random_nonzero(&mut rng, 2, cfg.scale));
        report.base_vectors += 1;
        for (holds, fails, forward) in [(rel_a, rel_b, true), (rel_b, rel_a, false)] {
            let (found, tested) = if forward {
                (&mut report.witness_ab, &mut report.tested_ab)
            } else {
                (&mut report.witness_ba, &mut report.tested_ba)
            };
            if found.is_some() || *tested >= budget {
                continue;
            }
            let Some(vs) = candidates(ast, &u, holds, resolution, tol) else {
                report.untraceable += 1;
                continue;
            };
            for v in vs {
                if *tested >= budget {
                    break;
                }
                *tested += 1;
                match separate(ast, holds, fails, &u, &v, tol) {
                    Ok(Some(w)) => {
                        *found = Some(w);
                        break;
                    }
                    Ok(None) => {}
                    Err(()) => report.discarded += 1,
                }
            }
        }
    }
    Ok(report)
}
