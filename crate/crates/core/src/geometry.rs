//! `rho_{alpha,beta}`-angles, comparison constants between two norms, and
//! probes for smoothness, strict convexity and the inner-product identities.
//!
//! Probes run a deterministic corner set first (sign patterns, axis vectors,
//! vectors with zero coordinates, weighted-max ties and `max` switch points)
//! and then `cfg.count` seeded random samples. Random floats almost never land
//! on the non-smooth set of `l1`/`linf`, so the corners do the real work there.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::derivatives::{rho_pair_unchecked, AlphaBeta};
use crate::error::{Error, Result};
use crate::normcore::{check_dim, eval_node, normalize, random_nonzero, SampleConfig, Vector};
use crate::normparse::{Exponent, NormAst, NormNode};
use crate::search::bisect;

/// Cosine arguments within this distance of `[-1, 1]` are clamped.
pub const ANGLE_CLAMP_BAND: f64 = 1e-9;
/// Normalized gap `(rho_+ - rho_-)/(|u||v|)` above which a pair is non-smooth.
pub const SMOOTHNESS_GAP: f64 = 1e-7;
/// Midpoint norm at or above `1 - MIDPOINT_BAND` counts as a flat segment.
pub const MIDPOINT_BAND: f64 = 1e-9;
/// Minimum separation `|u - v|` of unit vectors tested for strict convexity.
/// Below it even `lp(4)` has midpoints within [`MIDPOINT_BAND`] of the sphere.
pub const CONVEXITY_SEPARATION: f64 = 0.1;
/// Relative asymmetry `|rho_ab(u,v) - rho_ab(v,u)|/(|u||v|)` that counts as a witness.
pub const SYMMETRY_BAND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleResult {
    /// Angle in `[0, pi]`.
    pub theta: f64,
    /// The unclamped argument of `arccos`.
    pub cosine_argument: f64,
}

fn check_pair(ast: &NormAst, u: &Vector, v: &Vector) -> Result<()> {
    check_dim(ast, u)?;
    check_dim(ast, v)
}

fn angle_unchecked(ast: &NormAst, u: &Vector, v: &Vector, ab: AlphaBeta) -> Result<AngleResult> {
    let (m, p) = rho_pair_unchecked(ast, u, v);
    let c = ab.combine(m, p) / (ab.sum() * ast.norm(u) * ast.norm(v));
    if !(c.abs() <= 1.0 + ANGLE_CLAMP_BAND) {
        return Err(Error::CosineOutOfRange(c));
    }
    Ok(AngleResult {
        theta: c.clamp(-1.0, 1.0).acos(),
        cosine_argument: c,
    })
}

/// `theta_{alpha,beta}(u, v) = arccos(rho_ab(u, v) / ((alpha + beta)|u||v|))`.
pub fn angle_ab(ast: &NormAst, u: &Vector, v: &Vector, ab: AlphaBeta) -> Result<AngleResult> {
    check_pair(ast, u, v)?;
    if u.is_zero() {
        return Err(Error::ZeroVector("u"));
    }
    if v.is_zero() {
        return Err(Error::ZeroVector("v"));
    }
    angle_unchecked(ast, u, v, ab)
}

/// Distance between `theta_ab(a u, b v)` and its predicted value: `theta_ab(u, v)`
/// when `ab > 0`, `pi - theta_ba(u, v)` when `ab < 0`.
pub fn angle_homogeneity_check(
    ast: &NormAst,
    u: &Vector,
    v: &Vector,
    a: f64,
    b: f64,
    params: AlphaBeta,
) -> Result<f64> {
    if a == 0.0 || b == 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scaling factors must be finite and nonzero, got a = {a}, b = {b}"
        )));
    }
    let scaled = angle_ab(ast, &u.scaled(a), &v.scaled(b), params)?.theta;
    let expected = if a * b > 0.0 {
        angle_ab(ast, u, v, params)?.theta
    } else {
        PI - angle_ab(ast, u, v, params.swapped())?.theta
    };
    Ok((scaled - expected).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub u: Vector,
    pub v: Vector,
    /// The probe's measured quantity at `(u, v)`.
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    WitnessFound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub verdict: Verdict,
    /// Present iff the verdict is `WitnessFound`: the worst pair seen.
    pub witness: Option<Witness>,
    pub samples_used: usize,
    pub corner_probes: usize,
    /// Largest metric over all samples, witness or not.
    pub worst_metric: f64,
    pub seed: u64,
}

/// A sampled lower estimate of a comparison constant between two norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub estimate: f64,
    /// Set when a pair makes the ratio unbounded; `estimate` is then infinite.
    pub unbounded: bool,
    pub witness: Option<Witness>,
    pub samples_used: usize,
    pub skipped: usize,
    pub seed: u64,
}

/// Keeps the first pair with the largest metric, so results do not depend on
/// evaluation order.
fn worst(items: impl IntoIterator<Item = Option<Witness>>) -> Option<Witness> {
    let mut best: Option<Witness> = None;
    for w in items.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| w.metric > b.metric) {
            best = Some(w);
        }
    }
    best
}

fn report(
    cfg: &SampleConfig,
    corners: usize,
    best: Option<Witness>,
    threshold: impl Fn(&Witness) -> bool,
) -> ProbeReport {
    let worst_metric = best.as_ref().map_or(0.0, |w| w.metric);
    let witness = best.filter(|w| threshold(w));
    ProbeReport {
        verdict: if witness.is_some() {
            Verdict::WitnessFound
        } else {
            Verdict::Pass
        },
        witness,
        samples_used: corners + cfg.count,
        corner_probes: corners,
        worst_metric,
        seed: cfg.seed,
    }
}

fn collect_max_nodes<'a>(node: &'a NormNode, out: &mut Vec<(&'a NormNode, &'a NormNode)>) {
    match node {
        NormNode::Max(a, b) => {
            out.push((a, b));
            collect_max_nodes(a, out);
            collect_max_nodes(b, out);
        }
        NormNode::Sum(a, b) => {
            collect_max_nodes(a, out);
            collect_max_nodes(b, out);
        }
        NormNode::Scale(_, a) => collect_max_nodes(a, out),
        _ => {}
    }
}

fn collect_wmax_weights<'a>(node: &'a NormNode, out: &mut Vec<&'a [f64]>) {
    match node {
        NormNode::WLp {
            p: Exponent::Infinity,
            weights,
        } => out.push(weights),
        NormNode::Max(a, b) | NormNode::Sum(a, b) => {
            collect_wmax_weights(a, out);
            collect_wmax_weights(b, out);
        }
        NormNode::Scale(_, a) => collect_wmax_weights(a, out),
        _ => {}
    }
}

fn push_unique(set: &mut Vec<Vector>, v: Vector) {
    if !v.is_zero() && !set.contains(&v) {
        set.push(v);
    }
}

/// Deterministic candidate points where common norms fail to be smooth or
/// strictly convex, in a fixed order starting with the all-ones sign patterns.
pub(crate) fn corner_vectors(ast: &NormAst) -> Vec<Vector> {
    let n = ast.dim();
    let mut set = Vec::new();
    let patterns: Vec<Vec<f64>> = if n <= 4 {
        (0..1usize << n)
            .map(|k| {
                (0..n)
                    .map(|i| if k >> (n - 1 - i) & 1 == 1 { -1.0 } else { 1.0 })
                    .collect()
            })
            .collect()
    } else {
        let mut out = vec![vec![1.0; n]];
        out.extend((0..n).map(|i| {
            let mut s = vec![1.0; n];
            s[i] = -1.0;
            s
        }));
        out
    };
    for s in &patterns {
        push_unique(&mut set, Vector::from_slice(s));
    }
    for i in 0..n {
        push_unique(&mut set, Vector::basis(n, i));
        push_unique(&mut set, Vector::basis(n, i).scaled(-1.0));
    }
    for i in 0..n {
        let mut x = vec![1.0; n];
        x[i] = 0.0;
        push_unique(&mut set, Vector::from_slice(&x));
    }
    let mut weights = Vec::new();
    collect_wmax_weights(ast.root(), &mut weights);
    for w in weights {
        for s in patterns.iter().take(2) {
            let x: Vec<f64> = w.iter().zip(s).map(|(wi, si)| si / wi).collect();
            push_unique(&mut set, Vector::from_slice(&x));
        }
    }
    let mut maxes = Vec::new();
    collect_max_nodes(ast.root(), &mut maxes);
    let base: Vec<Vector> = set.iter().take(16).cloned().collect();
    for (a, b) in maxes {
        let gap = |x: &Vector| eval_node(a, x.as_slice()) - eval_node(b, x.as_slice());
        for (i, p) in base.iter().enumerate() {
            for q in &base[i + 1..] {
                let at = |s: f64| p.scaled(1.0 - s).axpy(s, q);
                let (g0, g1) = (gap(p), gap(q));
                if g0 != 0.0 && g1 != 0.0 && (g0 < 0.0) != (g1 < 0.0) {
                    let s = bisect(|s| gap(&at(s)), 0.0, 1.0, 1e-15);
                    push_unique(&mut set, at(s));
                }
            }
        }
    }
    set
}

fn random_pairs(ast: &NormAst, cfg: &SampleConfig) -> Vec<(Vector, Vector)> {
    let mut rng = cfg.rng();
    let n = ast.dim();
    (0..cfg.count)
        .map(|_| {
            let u = random_nonzero(&mut rng, n, cfg.scale);
            let v = random_nonzero(&mut rng, n, cfg.scale);
            (u, v)
        })
        .collect()
}

fn all_pairs(vs: &[Vector]) -> Vec<(Vector, Vector)> {
    vs.iter()
        .flat_map(|u| vs.iter().map(move |v| (u.clone(), v.clone())))
        .collect()
}

fn smoothness_gap(ast: &NormAst, u: &Vector, v: &Vector) -> f64 {
    let (m, p) = rho_pair_unchecked(ast, u, v);
    (p - m) / (ast.norm(u) * ast.norm(v))
}

/// Searches for a pair with `rho_+(u,v) - rho_-(u,v) > 1e-7 |u||v|`.
/// The metric is the normalized gap.
pub fn smoothness_probe(ast: &NormAst, cfg: &SampleConfig) -> ProbeReport {
    let corners = all_pairs(&corner_vectors(ast));
    let n_corners = corners.len();
    let pairs: Vec<_> = corners.into_iter().chain(random_pairs(ast, cfg)).collect();
    let best = worst(
        pairs
            .par_iter()
            .map(|(u, v)| {
                Some(Witness {
                    u: u.clone(),
                    v: v.clone(),
                    metric: smoothness_gap(ast, u, v),
                })
            })
            .collect::<Vec<_>>(),
    );
    report(cfg, n_corners, best, |w| w.metric > SMOOTHNESS_GAP)
}

/// Searches for unit vectors `u, v` with `|u - v| >= 0.1` whose midpoint has
/// norm at least `1 - 1e-9`. The metric is the midpoint norm.
pub fn strict_convexity_probe(ast: &NormAst, cfg: &SampleConfig) -> ProbeReport {
    let unit: Vec<Vector> = corner_vectors(ast)
        .iter()
        .map(|x| normalize(ast, x))
        .collect();
    let corners = all_pairs(&unit);
    let n_corners = corners.len();
    let random = random_pairs(ast, cfg)
        .into_iter()
        .map(|(u, v)| (normalize(ast, &u), normalize(ast, &v)));
    let pairs: Vec<_> = corners.into_iter().chain(random).collect();
    let best = worst(
        pairs
            .par_iter()
            .map(|(u, v)| {
                (ast.norm(&(u - v)) >= CONVEXITY_SEPARATION).then(|| Witness {
                    u: u.clone(),
                    v: v.clone(),
                    metric: ast.norm(&(u + v)) / 2.0,
                })
            })
            .collect::<Vec<_>>(),
    );
    report(cfg, n_corners, best, |w| w.metric >= 1.0 - MIDPOINT_BAND)
}

fn rho_ab_unchecked(ast: &NormAst, u: &Vector, v: &Vector, ab: AlphaBeta) -> f64 {
    let (m, p) = rho_pair_unchecked(ast, u, v);
    ab.combine(m, p)
}

/// `(alpha+beta)(|u+v|^4 - |u-v|^4) - 8(|u|^2 rho_ab(u,v) + |v|^2 rho_ab(v,u))`,
/// which vanishes identically exactly for inner-product norms.
pub fn quartic_identity_residual(
    ast: &NormAst,
    u: &Vector,
    v: &Vector,
    ab: AlphaBeta,
) -> Result<f64> {
    check_pair(ast, u, v)?;
    let lhs = ab.sum() * (ast.norm(&(u + v)).powi(4) - ast.norm(&(u - v)).powi(4));
    let nu2 = ast.norm(u).powi(2);
    let nv2 = ast.norm(v).powi(2);
    let rhs = 8.0 * (nu2 * rho_ab_unchecked(ast, u, v, ab) + nv2 * rho_ab_unchecked(ast, v, u, ab));
    Ok(lhs - rhs)
}

/// `rho_ab(u, v) - rho_ab(v, u)`.
pub fn symmetry_residual(ast: &NormAst, u: &Vector, v: &Vector, ab: AlphaBeta) -> Result<f64> {
    check_pair(ast, u, v)?;
    Ok(rho_ab_unchecked(ast, u, v, ab) - rho_ab_unchecked(ast, v, u, ab))
}

/// Worst `|rho_ab(u,v) - rho_ab(v,u)|` over corner and random pairs; a
/// witness needs asymmetry above `1e-10 |u||v|`.
pub fn symmetry_search(ast: &NormAst, ab: AlphaBeta, cfg: &SampleConfig) -> ProbeReport {
    let corners = all_pairs(&corner_vectors(ast));
    let n_corners = corners.len();
    let pairs: Vec<_> = corners.into_iter().chain(random_pairs(ast, cfg)).collect();
    let best = worst(
        pairs
            .par_iter()
            .map(|(u, v)| {
                let r = rho_ab_unchecked(ast, u, v, ab) - rho_ab_unchecked(ast, v, u, ab);
                Some(Witness {
                    u: u.clone(),
                    v: v.clone(),
                    metric: r.abs(),
                })
            })
            .collect::<Vec<_>>(),
    );
    report(cfg, n_corners, best, |w| {
        w.metric > SYMMETRY_BAND * ast.norm(&w.u) * ast.norm(&w.v)
    })
}

fn check_same_dim(a: &NormAst, b: &NormAst) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Angles below this count as zero (and within it of `pi` as straight) when
/// comparing two norms' angles.
pub const ZERO_ANGLE: f64 = 1e-9;
/// A zero first angle with a second angle at least this large, or a straight
/// second angle with a first angle at least this far from `pi`, is unbounded.
pub const UNBOUNDED_ANGLE: f64 = 1e-6;

enum Ratio {
    Skip,
    Unbounded,
    Value(f64),
}

fn angle_ratio(a1: &NormAst, a2: &NormAst, u: &Vector, v: &Vector, ab: AlphaBeta) -> Result<Ratio> {
    let t1 = angle_unchecked(a1, u, v, ab)?.theta;
    let t2 = angle_unchecked(a2, u, v, ab)?.theta;
    // tan(theta/2) is zero at theta = 0 and infinite at theta = pi.
    let t1_zero = t1 < ZERO_ANGLE;
    let t2_straight = t2 > PI - ZERO_ANGLE;
    Ok(if t1_zero || t2_straight {
        if (t1_zero && t2 >= UNBOUNDED_ANGLE) || (t2_straight && t1 <= PI - UNBOUNDED_ANGLE) {
            Ratio::Unbounded
        } else {
            Ratio::Skip
        }
    } else {
        Ratio::Value((t2 / 2.0).tan() / (t1 / 2.0).tan())
    })
}

/// Sampled lower estimate of the smallest `K` with
/// `tan(theta_2/2) <= K tan(theta_1/2)` for the `rho_{alpha,beta}`-angles of
/// `ast1` (index 1) and `ast2` (index 2).
pub fn angular_constant(
    ast1: &NormAst,
    ast2: &NormAst,
    ab: AlphaBeta,
    cfg: &SampleConfig,
) -> Result<ConstantEstimate> {
    check_same_dim(ast1, ast2)?;
    let pairs = random_pairs(ast1, cfg);
    let ratios: Vec<Ratio> = pairs
        .par_iter()
        .map(|(u, v)| angle_ratio(ast1, ast2, u, v, ab))
        .collect::<Result<_>>()?;
    let mut est = ConstantEstimate {
        estimate: 0.0,
        unbounded: false,
        witness: None,
        samples_used: pairs.len(),
        skipped: 0,
        seed: cfg.seed,
    };
    for ((u, v), r) in pairs.iter().zip(ratios) {
        let witness = |metric| Witness {
            u: u.clone(),
            v: v.clone(),
            metric,
        };
        match r {
            Ratio::Skip => est.skipped += 1,
            Ratio::Unbounded => {
                if !est.unbounded {
                    est.unbounded = true;
                    est.estimate = f64::INFINITY;
                    est.witness = Some(witness(f64::INFINITY));
                }
            }
            Ratio::Value(k) if !est.unbounded && k > est.estimate => {
                est.estimate = k;
                est.witness = Some(witness(k));
            }
            Ratio::Value(_) => {}
        }
    }
    Ok(est)
}

/// Sampled lower estimate of the smallest `k` with
/// `|rho_ab_1(u,v) - rho_ab_2(u,v)| <= k min(|u|_1 |v|_1, |u|_2 |v|_2)`.
/// Pairs whose denominator is below `1e-12` are skipped.
pub fn norm_equiv_constant(
    ast1: &NormAst,
    ast2: &NormAst,
    ab: AlphaBeta,
    cfg: &SampleConfig,
) -> Result<ConstantEstimate> {
    check_same_dim(ast1, ast2)?;
    let pairs = random_pairs(ast1, cfg);
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(u, v)| {
            let d = (ast1.norm(u) * ast1.norm(v)).min(ast2.norm(u) * ast2.norm(v));
            (d >= 1e-12).then(|| {
                (rho_ab_unchecked(ast1, u, v, ab) - rho_ab_unchecked(ast2, u, v, ab)).abs() / d
            })
        })
        .collect();
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let witness = worst(pairs.iter().zip(&ratios).map(|((u, v), r)| {
        r.map(|metric| Witness {
            u: u.clone(),
            v: v.clone(),
            metric,
        })
    }));
    Ok(ConstantEstimate {
        estimate: witness.as_ref().map_or(0.0, |w| w.metric),
        unbounded: false,
        witness,
        samples_used: pairs.len(),
        skipped,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivatives::rho_pair;
    use crate::normparse::parse_norm;

    fn ast(text: &str) -> NormAst {
        parse_norm(text, 2).unwrap()
    }

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::from_slice(&[a, b])
    }

    fn ab(a: f64, b: f64) -> AlphaBeta {
        AlphaBeta::new(a, b).unwrap()
    }

    #[test]
    fn angle_examples() {
        let l2 = ast("l2");
        let p = ab(0.1, 0.7);
        assert!(
            (angle_ab(&l2, &vec2(1.0, 0.0), &vec2(0.0, 1.0), p)
                .unwrap()
                .theta
                - PI / 2.0)
                .abs()
                < 1e-15
        );
        assert_eq!(
            angle_ab(&l2, &vec2(1.0, 0.0), &vec2(1.0, 0.0), p)
                .unwrap()
                .theta,
            0.0
        );
        let p = ab(0.3, 0.4);
        let r = angle_ab(
            &ast("linf"),
            &vec2(1.0, 1.0),
            &vec2(-1.0 / 0.6, 1.0 / 0.8),
            p,
        )
        .unwrap();
        assert!((r.theta - PI / 2.0).abs() < 1e-12, "{r:?}");
        assert_eq!(
            angle_ab(&l2, &Vector::zeros(2), &vec2(1.0, 0.0), p).unwrap_err(),
            Error::ZeroVector("u")
        );
    }

    #[test]
    fn parallel_vectors() {
        for text in ["l1", "linf", "lp(3)", "max(l1, scale(1.2, l2))"] {
            let a = ast(text);
            let u = vec2(0.3, -1.1);
            let p = ab(0.25, 0.5);
            assert!(
                angle_ab(&a, &u, &u.scaled(2.5), p).unwrap().theta < 1e-7,
                "{text}"
            );
            assert!(
                (angle_ab(&a, &u, &u.scaled(-0.5), p).unwrap().theta - PI).abs() < 1e-7,
                "{text}"
            );
        }
    }

    #[test]
    fn homogeneity_examples() {
        let r = angle_homogeneity_check(
            &ast("l2"),
            &vec2(1.0, 2.0),
            &vec2(3.0, -1.0),
            2.0,
            5.0,
            ab(0.2, 0.3),
        )
        .unwrap();
        assert!(r < 1e-12);
        let r = angle_homogeneity_check(
            &ast("linf"),
            &vec2(1.0, 1.0),
            &vec2(1.0, -1.0),
            1.0,
            -1.0,
            ab(0.2, 0.3),
        )
        .unwrap();
        assert!(r < 1e-12);
        // Hand evaluation: rho_ab(u, -v) = 0.2*(-1) + 0.3*1 and rho_{0.3,0.2}(u, v) = -0.3 + 0.2.
        let lhs = (0.1f64 / 0.5).acos();
        let rhs = PI - (-0.1f64 / 0.5).acos();
        assert!((lhs - rhs).abs() < 1e-15);
        let r = angle_homogeneity_check(
            &ast("l1"),
            &vec2(1.0, 0.0),
            &vec2(1.0, 1.0),
            -3.0,
            2.0,
            ab(0.25, 0.25),
        )
        .unwrap();
        assert!(r < 1e-12);
        assert!(angle_homogeneity_check(
            &ast("l1"),
            &vec2(1.0, 0.0),
            &vec2(1.0, 1.0),
            0.0,
            2.0,
            ab(0.25, 0.25)
        )
        .is_err());
    }

    #[test]
    fn corner_set_contents() {
        let c = corner_vectors(&ast("linf"));
        assert_eq!(c[0], vec2(1.0, 1.0));
        assert_eq!(c[1], vec2(1.0, -1.0));
        assert!(c.contains(&vec2(1.0, 0.0)));
        let c = corner_vectors(&parse_norm("wlp(inf; 1, 4)", 2).unwrap());
        assert!(c.contains(&vec2(1.0, 0.25)));
        let a = ast("max(l2, scale(0.8, l1))");
        let c = corner_vectors(&a);
        let root = a.root();
        let NormNode::Max(x, y) = root else {
            unreachable!()
        };
        assert!(c.iter().any(|v| {
            let g = eval_node(x, v.as_slice()) - eval_node(y, v.as_slice());
            g.abs() < 1e-12 && !v.as_slice().contains(&0.0)
        }));
    }

    #[test]
    fn smoothness_examples() {
        let cfg = SampleConfig::new(0, 1000);
        let r = smoothness_probe(&ast("l2"), &cfg);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.witness.is_none());
        assert_eq!(smoothness_probe(&ast("lp(3)"), &cfg).verdict, Verdict::Pass);

        let r = smoothness_probe(&ast("linf"), &cfg);
        let w = r.witness.unwrap();
        assert_eq!(
            (w.u.clone(), w.v.clone()),
            (vec2(1.0, 1.0), vec2(1.0, -1.0))
        );
        assert_eq!(w.metric, 2.0);
        let (m, p) = rho_pair(&ast("linf"), &w.u, &w.v).unwrap();
        assert_eq!((m, p), (-1.0, 1.0));

        for text in [
            "l1",
            "max(l1, l2)",
            "wlp(inf; 1, 3)",
            "max(l2, scale(0.8, l1))",
        ] {
            let r = smoothness_probe(&ast(text), &SampleConfig::new(0, 0));
            assert_eq!(r.verdict, Verdict::WitnessFound, "{text}");
        }
    }

    #[test]
    fn smoothness_agrees_with_numeric_enclosures() {
        use crate::derivatives::{rho_pm_numeric, Side};
        let a = ast("lp(3)");
        let mut rng = SampleConfig::new(9, 0).rng();
        for _ in 0..100 {
            let u = random_nonzero(&mut rng, 2, 1.0);
            let v = random_nonzero(&mut rng, 2, 1.0);
            let p = rho_pm_numeric(&a, &u, &v, Side::Plus, 1e-10).unwrap();
            let m = rho_pm_numeric(&a, &u, &v, Side::Minus, 1e-10).unwrap();
            assert!((p.value - m.value).abs() < 1e-8 + p.enclosure_width + m.enclosure_width);
        }
    }

    #[test]
    fn strict_convexity_examples() {
        let cfg = SampleConfig::new(0, 1000);
        assert_eq!(
            strict_convexity_probe(&ast("l2"), &cfg).verdict,
            Verdict::Pass
        );
        assert_eq!(
            strict_convexity_probe(&ast("lp(4)"), &cfg).verdict,
            Verdict::Pass
        );
        assert_eq!(
            strict_convexity_probe(&ast("lp(1.5)"), &cfg).verdict,
            Verdict::Pass
        );
        let r = strict_convexity_probe(&ast("linf"), &cfg);
        let w = r.witness.unwrap();
        assert_eq!(
            (w.u.clone(), w.v.clone()),
            (vec2(1.0, 1.0), vec2(1.0, -1.0))
        );
        assert_eq!(w.metric, 1.0);
        assert_eq!(
            strict_convexity_probe(&ast("l1"), &cfg).verdict,
            Verdict::WitnessFound
        );
    }

    #[test]
    fn lp4_midpoints_stay_inside() {
        let a = ast("lp(4)");
        let mut rng = SampleConfig::new(4, 0).rng();
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let u = normalize(&a, &random_nonzero(&mut rng, 2, 1.0));
            let v = normalize(&a, &random_nonzero(&mut rng, 2, 1.0));
            if a.norm(&(&u - &v)) >= CONVEXITY_SEPARATION {
                let m = (u.as_slice()[0] + v.as_slice()[0]).abs().powi(4)
                    + (u.as_slice()[1] + v.as_slice()[1]).abs().powi(4);
                worst = worst.max(m.powf(0.25) / 2.0);
            }
        }
        assert!(worst < 1.0 - MIDPOINT_BAND);
    }

    #[test]
    fn quartic_examples() {
        let l2 = ast("l2");
        let (u, v) = (vec2(0.3, -1.7), vec2(2.2, 0.4));
        let r = quartic_identity_residual(&l2, &u, &v, ab(0.2, 0.5)).unwrap();
        assert!(r.abs() < 1e-8 * (l2.norm(&u) + l2.norm(&v)).powi(4));
        for text in ["l1", "linf", "max(l1, l2)"] {
            assert_eq!(
                quartic_identity_residual(&ast(text), &u, &u, ab(0.3, 0.3)).unwrap(),
                0.0
            );
        }
        // linf at (1,1),(1,-1): |u+v| = |u-v| = 2 and rho_ab(u,v) = rho_ab(v,u) = 0.3*(-1) + 0.3*1 = 0.
        let r = quartic_identity_residual(
            &ast("linf"),
            &vec2(1.0, 1.0),
            &vec2(1.0, -1.0),
            ab(0.3, 0.3),
        )
        .unwrap();
        assert_eq!(r, 0.0);
        // linf at (1,0),(1,1): |u+v|^4 = 16, |u-v|^4 = 1, rho_ab(u,v) = 0.3 + 0.3 and
        // rho_ab(v,u) = 0.3*0 + 0.3*1.
        let r =
            quartic_identity_residual(&ast("linf"), &vec2(1.0, 0.0), &vec2(1.0, 1.0), ab(0.3, 0.3))
                .unwrap();
        let expected = 0.6 * 15.0 - 8.0 * (0.6 + 0.3);
        assert!((r - expected).abs() < 1e-12, "{r}");
    }

    #[test]
    fn symmetry_examples() {
        let l2 = ast("l2");
        assert!(
            symmetry_residual(&l2, &vec2(0.4, 2.0), &vec2(-1.0, 0.3), ab(0.1, 0.6))
                .unwrap()
                .abs()
                < 1e-10
        );
        let l1 = ast("l1");
        let p = ab(0.2, 0.2);
        // rho_-(u,v) = 0, rho_+(u,v) = 2 and rho_-(v,u) = rho_+(v,u) = 2.
        assert!((rho_ab_unchecked(&l1, &vec2(1.0, 0.0), &vec2(1.0, 1.0), p) - 0.4).abs() < 1e-15);
        assert!((rho_ab_unchecked(&l1, &vec2(1.0, 1.0), &vec2(1.0, 0.0), p) - 0.8).abs() < 1e-15);
        let r = symmetry_residual(&l1, &vec2(1.0, 0.0), &vec2(1.0, 1.0), p).unwrap();
        assert!((r + 0.4).abs() < 1e-15);

        let cfg = SampleConfig::new(5, 10_000);
        let r = symmetry_search(&ast("linf"), ab(0.3, 0.3), &cfg);
        assert!(r.witness.unwrap().metric > 0.01);
        assert_eq!(
            symmetry_search(&l2, ab(0.3, 0.3), &cfg).verdict,
            Verdict::Pass
        );
    }

    #[test]
    fn linf_asymmetry_grid_oracle() {
        let a = ast("linf");
        let p = ab(0.3, 0.3);
        let grid: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
        let mut best = 0.0f64;
        for &a0 in &grid {
            for &a1 in &grid {
                for &b0 in &grid {
                    for &b1 in &grid {
                        let r = rho_ab_unchecked(&a, &vec2(a0, a1), &vec2(b0, b1), p)
                            - rho_ab_unchecked(&a, &vec2(b0, b1), &vec2(a0, a1), p);
                        best = best.max(r.abs());
                    }
                }
            }
        }
        assert!(best > 0.01);
    }

    #[test]
    fn angular_constant_examples() {
        let cfg = SampleConfig::new(1, 2000);
        let p = ab(0.2, 0.4);
        let e = angular_constant(&ast("l2"), &ast("scale(2, l2)"), p, &cfg).unwrap();
        assert!((e.estimate - 1.0).abs() < 1e-9, "{e:?}");
        let e = angular_constant(&ast("l2"), &ast("l2"), p, &cfg).unwrap();
        assert!((e.estimate - 1.0).abs() < 1e-12);
        assert!(!e.unbounded);
    }

    /// Exhaustive search over direction pairs on a uniform angle grid.
    /// Returns the largest finite ratio and whether any pair was unbounded.
    fn grid_angular_constant(second: &str, step: f64) -> (f64, bool) {
        let (l2, other) = (ast("l2"), ast(second));
        let p = ab(0.3, 0.3);
        let n = (2.0 * PI / step) as usize;
        let dirs: Vec<Vector> = (0..n)
            .map(|k| vec2((k as f64 * step).cos(), (k as f64 * step).sin()))
            .collect();
        dirs.par_iter()
            .map(|u| {
                let mut best = (0.0f64, false);
                for v in &dirs {
                    match angle_ratio(&l2, &other, u, v, p).unwrap() {
                        Ratio::Value(k) => best.0 = best.0.max(k),
                        Ratio::Unbounded => best.1 = true,
                        Ratio::Skip => {}
                    }
                }
                best
            })
            .reduce(|| (0.0, false), |a, b| (a.0.max(b.0), a.1 || b.1))
    }

    #[test]
    fn l2_linf_angular_constant_is_unbounded() {
        let e = angular_constant(
            &ast("l2"),
            &ast("linf"),
            ab(0.3, 0.3),
            &SampleConfig::new(3, 10_000),
        )
        .unwrap();
        assert!(e.unbounded && e.estimate == f64::INFINITY);
        let w = e.witness.unwrap();
        let (u, v) = (w.u.as_slice(), w.v.as_slice());
        // Independent evaluation: Euclidean angle and the linf angle from the
        // active-set formula with alpha = beta.
        let t1 = ((u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]))).acos();
        let nu = u[0].abs().max(u[1].abs());
        let active: Vec<f64> = (0..2)
            .filter(|&i| u[i].abs() >= (1.0 - 1e-12) * nu)
            .map(|i| u[i].signum() * v[i])
            .collect();
        let (lo, hi) = active
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        let c = 0.5 * (lo + hi) / v[0].abs().max(v[1].abs());
        let t2 = c.clamp(-1.0, 1.0).acos();
        let straight = t2 > PI - ZERO_ANGLE && t1 <= PI - UNBOUNDED_ANGLE;
        let flat = t1 < ZERO_ANGLE && t2 >= UNBOUNDED_ANGLE;
        assert!(straight || flat, "{t1} {t2}");
        assert!(grid_angular_constant("linf", 1e-2).1);
    }

    #[test]
    fn l2_lp3_angular_constant_regression() {
        let e = angular_constant(
            &ast("l2"),
            &ast("lp(3)"),
            ab(0.3, 0.3),
            &SampleConfig::new(3, 10_000),
        )
        .unwrap();
        assert!(!e.unbounded && e.estimate >= 1.0);
        assert_eq!(
            e.estimate.to_bits(),
            L2_LP3_ANGULAR_REGRESSION.to_bits(),
            "{}",
            e.estimate
        );
        let (grid, unbounded) = grid_angular_constant("lp(3)", 1e-2);
        assert!(!unbounded);
        assert!(e.estimate <= grid * (1.0 + 1e-3), "{} {grid}", e.estimate);
    }

    #[test]
    #[ignore = "dense 1e-3 grid, slow"]
    fn l2_lp3_angular_constant_fine_grid() {
        let e = angular_constant(
            &ast("l2"),
            &ast("lp(3)"),
            ab(0.3, 0.3),
            &SampleConfig::new(3, 10_000),
        )
        .unwrap();
        let (grid, unbounded) = grid_angular_constant("lp(3)", 1e-3);
        assert!(!unbounded && e.estimate <= grid * (1.0 + 1e-6));
    }

    const L2_LP3_ANGULAR_REGRESSION: f64 = 7.284322569014323;

    #[test]
    fn norm_equiv_examples() {
        let cfg = SampleConfig::new(2, 5000);
        let p = ab(0.25, 0.5);
        assert_eq!(
            norm_equiv_constant(&ast("l2"), &ast("l2"), p, &cfg)
                .unwrap()
                .estimate,
            0.0
        );
        let e = norm_equiv_constant(&ast("l2"), &ast("scale(2, l2)"), p, &cfg).unwrap();
        assert!(e.estimate <= 3.0 * p.sum() * (1.0 + 1e-12));
        assert!(e.estimate > 0.99 * 3.0 * p.sum(), "{e:?}");
        let w = e.witness.unwrap();
        let cos = w.u.dot(&w.v) / (w.u.dot(&w.u) * w.v.dot(&w.v)).sqrt();
        assert!((w.metric - 3.0 * p.sum() * cos.abs()).abs() < 1e-12);

        let e = norm_equiv_constant(
            &ast("l1"),
            &ast("linf"),
            ab(0.3, 0.3),
            &SampleConfig::new(0, 10_000),
        )
        .unwrap();
        assert!(e.estimate > 0.0 && e.estimate <= 5.0, "{e:?}");
        assert!(norm_equiv_constant(&ast("l1"), &parse_norm("l1", 3).unwrap(), p, &cfg).is_err());
    }
}
