//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach stdout.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{family, mutate, random_node, FAMILIES, SMOOTH_FAMILIES};
use normderiv::explorer::{
    isometry_defect, mine_incomparability, orthogonality_defect, parse_matrix, preserver_check,
    rho_scaling_defect, LinearMap, PreserverReport,
};
use normderiv::geometry::{
    angle_ab, norm_equiv_constant, quartic_identity_residual, smoothness_probe,
    strict_convexity_probe, symmetry_residual, symmetry_search, Verdict,
};
use normderiv::normcore::random_vector;
use normderiv::orthogonality::{ab_orthogonalizer, birkhoff_oracle, birkhoff_t_interval};
use normderiv::{
    is_orthogonal, parse_norm, print_norm, rho_ab, rho_pair, rho_pm, rho_pm_numeric, sphere_sample,
    AlphaBeta, Error, NormAst, Relation, SampleConfig, Side, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ab(a: f64, b: f64) -> AlphaBeta {
    AlphaBeta::new(a, b).unwrap()
}

fn vec2(a: f64, b: f64) -> Vector {
    Vector::from_slice(&[a, b])
}

fn nonzero(rng: &mut ChaCha8Rng, scale: f64) -> Vector {
    loop {
        let v = random_vector(rng, 2, scale);
        if !v.is_zero() {
            return v;
        }
    }
}

fn random_ab(rng: &mut ChaCha8Rng) -> AlphaBeta {
    loop {
        let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        if a + b > 1e-3 && a + b < 0.999 {
            return ab(a, b);
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn rel_close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale
}

fn linf_example() -> Outcome {
    let linf = family("linf");
    let u = vec2(1.0, 1.0);
    let mut worst = 0.0f64;
    let grid: Vec<f64> = (1..=9).map(|k| 0.05 * k as f64).collect();
    for &a in &grid {
        for &b in &grid {
            let v = vec2(-1.0 / (2.0 * a), 1.0 / (2.0 * b));
            worst = worst.max(rho_ab(&linf, &u, &v, ab(a, b)).unwrap().abs());
        }
    }
    check(worst <= 1e-12, || {
        format!("grid |rho_ab| reached {worst:e}")
    })?;
    let v = vec2(1.0, -1.0);
    let (m, p) = rho_pair(&linf, &u, &v).unwrap();
    check((m, p) == (-1.0, 1.0), || {
        format!("(rho-, rho+) = ({m}, {p})")
    })?;
    let p = ab(0.5, 1.0 / 3.0);
    let r = rho_ab(&linf, &u, &v, p).unwrap();
    check((r + 1.0 / 6.0).abs() <= 1e-15, || format!("rho_ab = {r}"))?;
    let b = is_orthogonal(Relation::Birkhoff, &linf, &u, &v, 1e-9).unwrap();
    let o = is_orthogonal(Relation::RhoAb { ab: p }, &linf, &u, &v, 1e-9).unwrap();
    check(b.holds && !o.holds, || {
        format!("birkhoff {b:?}, rho_ab {o:?}")
    })?;
    Ok(format!("81 grid points, worst |rho_ab| {worst:e}"))
}

fn l1_example() -> Outcome {
    let l1 = family("l1");
    let u = vec2(1.0, 0.0);
    let exact = |got: f64, want: f64, what: &str| {
        check((got - want).abs() <= 1e-15, || {
            format!("{what}: {got} vs {want}")
        })
    };
    let mut n = 0;
    for (a, b) in [(0.3, 0.4), (0.5, 1.0 / 3.0), (0.1, 0.8), (0.45, 0.05)] {
        let p = ab(a, b);
        for (v, m, pl, want) in [
            (vec2(1.0, 1.0), 0.0, 2.0, 2.0 * b),
            (vec2(-1.0, 1.0), -2.0, 0.0, -2.0 * a),
            (vec2(0.0, 2.0), -2.0, 2.0, 2.0 * b - 2.0 * a),
        ] {
            let (gm, gp) = rho_pair(&l1, &u, &v).unwrap();
            exact(gm, m, "rho-")?;
            exact(gp, pl, "rho+")?;
            exact(rho_ab(&l1, &u, &v, p).unwrap(), want, "rho_ab")?;
            n += 1;
        }
        exact(
            normderiv::rho(&l1, &u, &vec2(0.0, 2.0)).unwrap(),
            0.0,
            "rho",
        )?;
    }
    Ok(format!("{n} exact checks"))
}

fn ab_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for text in FAMILIES {
        let ast = family(text);
        for _ in 0..1000 {
            let (u, v) = (nonzero(&mut rng, 3.0), nonzero(&mut rng, 3.0));
            let t = rng.random_range(-5.0..5.0);
            let p = random_ab(&mut rng);
            let (nu, nv, s) = (ast.norm(&u), ast.norm(&v), p.sum());
            let r = rho_ab(&ast, &u, &v, p).unwrap();
            let fail = |which: &str| format!("{text}: ({which}) at u={u}, v={v}, t={t}, ab={p:?}");
            check(
                rel_close(rho_ab(&ast, &u, &u, p).unwrap(), s * nu * nu, s * nu * nu),
                || fail("i"),
            )?;
            let tu = rho_ab(&ast, &u.scaled(t), &v, p).unwrap();
            let scale = t.abs() * s * nu * nv;
            if t >= 0.0 {
                let tv = rho_ab(&ast, &u, &v.scaled(t), p).unwrap();
                check(
                    rel_close(tu, t * r, scale) && rel_close(tv, t * r, scale),
                    || fail("ii"),
                )?;
            } else {
                let swapped = rho_ab(&ast, &u, &v, p.swapped()).unwrap();
                check(rel_close(tu, t * swapped, scale), || fail("iii"))?;
            }
            let shifted = rho_ab(&ast, &u, &v.axpy(t, &u), p).unwrap();
            let scale = s * (t.abs() * nu * nu + nu * nv);
            check(rel_close(shifted, s * t * nu * nu + r, scale), || {
                fail("iv")
            })?;
            check(r.abs() <= s * nu * nv * (1.0 + 1e-9), || fail("v"))?;
        }
    }
    Ok("9 families x 1000 instances".into())
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut holding = 0;
    let mut disagreements = Vec::new();
    for text in FAMILIES {
        let ast = family(text);
        for k in 0..1000 {
            let u = nonzero(&mut rng, 2.0);
            let mut v = nonzero(&mut rng, 2.0);
            // A third of the pairs are generic, a third are built to be
            // orthogonal, and a third sit on an end of the Birkhoff interval.
            match k % 3 {
                0 => {}
                1 => {
                    v = ab_orthogonalizer(&ast, &u, &v, random_ab(&mut rng))
                        .unwrap()
                        .w
                }
                _ => {
                    let i = birkhoff_t_interval(&ast, &u, &v).unwrap();
                    let t = if rng.random_bool(0.5) {
                        i.lower
                    } else {
                        i.upper
                    };
                    v = v.axpy(t, &u);
                }
            }
            if v.is_zero() {
                continue;
            }
            let d = is_orthogonal(Relation::Birkhoff, &ast, &u, &v, 1e-7).unwrap();
            let o = birkhoff_oracle(&ast, &u, &v, 1e-7).unwrap();
            holding += d.holds as usize;
            if d.holds != o.holds {
                disagreements.push((text, u, v, d.residual, o.residual));
            }
        }
    }
    if disagreements.is_empty() {
        return Ok(format!("9000 pairs, {holding} orthogonal, 0 disagreements"));
    }
    // The two tolerances live on different scales: the sign test compares a
    // derivative with tol, the oracle compares a norm deficit, which near an
    // orthogonal pair is quadratic in that derivative. Report whether every
    // disagreement is of that kind.
    let quadratic_band = disagreements
        .iter()
        .all(|(.., d, o)| *d > 1e-7 && (-1e-7..=0.0).contains(o));
    let (text, u, v, d, o) = &disagreements[0];
    Err(format!(
        "{} disagreements in 9000 pairs ({}), first {text} u={u} v={v}: sign-test residual {d:e}, oracle residual {o:e}",
        disagreements.len(),
        if quadratic_band { "all with oracle deficit within tol but derivative residual above tol" } else { "not all explained by the tolerance scales" },
    ))
}

fn enclosures() -> Outcome {
    let mut widest = 0.0f64;
    let mut unreachable = 0;
    for (i, text) in FAMILIES.iter().enumerate() {
        let ast = family(text);
        let us = sphere_sample(&ast, &SampleConfig::new(10 + i as u64, 500));
        let vs = sphere_sample(&ast, &SampleConfig::new(100 + i as u64, 500));
        let smooth = SMOOTH_FAMILIES.contains(text);
        for (u, v) in us.iter().zip(&vs) {
            for side in [Side::Plus, Side::Minus] {
                let exact = rho_pm(&ast, u, v, side).unwrap().value;
                let r = match rho_pm_numeric(&ast, u, v, side, 1e-7) {
                    Ok(r) => r,
                    Err(Error::ToleranceUnreachable { best }) => {
                        unreachable += 1;
                        best
                    }
                    Err(e) => return Err(e.to_string()),
                };
                check(r.contains(exact), || {
                    format!("{text}: u={u}, v={v}: {r:?} misses {exact}")
                })?;
                if smooth {
                    widest = widest.max(r.enclosure_width);
                    check(r.enclosure_width <= 1e-6, || {
                        format!("{text}: width {:e}", r.enclosure_width)
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "9000 enclosures contain the exact value, widest smooth {widest:e}, {unreachable} hit the ladder floor"
    ))
}

fn birkhoff_inclusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tested = 0;
    for (i, text) in FAMILIES.iter().enumerate() {
        let ast = family(text);
        for _ in 0..1000 {
            let (u, v, p) = (
                nonzero(&mut rng, 2.0),
                nonzero(&mut rng, 2.0),
                random_ab(&mut rng),
            );
            let w = ab_orthogonalizer(&ast, &u, &v, p).unwrap().w;
            let b = is_orthogonal(Relation::Birkhoff, &ast, &u, &w, 1e-7).unwrap();
            check(b.holds, || format!("{text}: u={u}, w={w}: {b:?}"))?;
        }
        let rel = Relation::RhoAb { ab: ab(0.3, 0.4) };
        let r = mine_incomparability(
            &ast,
            rel,
            Relation::Birkhoff,
            &SampleConfig::new(i as u64, 10_000),
            64,
            1e-7,
        )
        .unwrap();
        check(r.witness_ab.is_none(), || {
            format!("{text}: {:?}", r.witness_ab)
        })?;
        tested += r.tested_ab;
    }
    Ok(format!(
        "9000 constructed pairs; mining tested {tested} rho_ab-orthogonal candidates"
    ))
}

fn euclidean_collapse() -> Outcome {
    let l2 = family("l2");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (u, v, p) = (
            nonzero(&mut rng, 2.0),
            nonzero(&mut rng, 2.0),
            random_ab(&mut rng),
        );
        let (nu, nv, dot) = (l2.norm(&u), l2.norm(&v), u.dot(&v));
        let fail = |what: &str| format!("{what} at u={u}, v={v}, ab={p:?}");
        let euclid = (dot / (nu * nv)).clamp(-1.0, 1.0).acos();
        check(
            (angle_ab(&l2, &u, &v, p).unwrap().theta - euclid).abs() <= 1e-9,
            || fail("angle"),
        )?;
        check(
            symmetry_residual(&l2, &u, &v, p).unwrap().abs() <= 1e-10,
            || fail("symmetry"),
        )?;
        let q = quartic_identity_residual(&l2, &u, &v, p).unwrap();
        check(q.abs() <= 1e-8 * (nu + nv).powi(4), || fail("quartic"))?;
        let (m, pl) = rho_pair(&l2, &u, &v).unwrap();
        check(
            (m - dot).abs() <= 1e-10 && (pl - dot).abs() <= 1e-10,
            || fail("rho"),
        )?;
    }
    Ok("1000 inputs".into())
}

fn nonsmooth_witnesses() -> Outcome {
    let corners_only = SampleConfig::new(0, 0);
    let sampled = SampleConfig::new(8, 1000);
    for text in ["l1", "linf"] {
        let ast = family(text);
        for (name, r) in [
            ("smoothness", smoothness_probe(&ast, &corners_only)),
            (
                "strict convexity",
                strict_convexity_probe(&ast, &corners_only),
            ),
        ] {
            check(
                r.verdict == Verdict::WitnessFound && r.corner_probes > 0,
                || format!("{text} {name}: {r:?}"),
            )?;
        }
        let r = symmetry_search(&ast, ab(0.3, 0.4), &SampleConfig::new(5, 10_000));
        let m = r.witness.as_ref().map_or(0.0, |w| w.metric);
        check(m > 1e-3, || format!("{text} symmetry: {r:?}"))?;
        let w = r.witness.unwrap();
        let again = symmetry_residual(&ast, &w.u, &w.v, ab(0.3, 0.4)).unwrap();
        check(again.abs() > 1e-3, || {
            format!("{text} symmetry witness re-evaluates to {again}")
        })?;
    }
    for text in ["lp(1.5)", "l2", "lp(3)"] {
        let ast = family(text);
        for (name, r) in [
            ("smoothness", smoothness_probe(&ast, &sampled)),
            ("strict convexity", strict_convexity_probe(&ast, &sampled)),
        ] {
            check(r.verdict == Verdict::Pass, || {
                format!("{text} {name}: {r:?}")
            })?;
        }
    }
    Ok("witnesses on l1, linf from corners; lp(1.5), l2, lp(3) pass".into())
}

fn preservers() -> Outcome {
    let cfg = SampleConfig::new(9, 1000);
    let p = ab(0.3, 0.3);
    let map =
        |m: &str| LinearMap::new(parse_matrix(m).unwrap(), family("l2"), family("l2")).unwrap();
    let (s, c) = 0.7f64.sin_cos();
    for m in [
        format!("{c},{};{s},{c}", -s),
        "0,-1;1,0".into(),
        "2,0;0,2".into(),
        "0.5,0;0,0.5".into(),
    ] {
        let r = preserver_check(&map(&m), p, &cfg).unwrap();
        check(r.all_pass() && r.tolerance == 1e-6, || {
            format!("{m}: {r:?}")
        })?;
    }
    let shear = map("1,1;0,1");
    let r: PreserverReport = preserver_check(&shear, p, &cfg).unwrap();
    check(r.all_fail(), || format!("shear: {r:?}"))?;
    let t = r.operator_norm.lower_bound;
    let [i, ii, iii] = &r.conditions;
    let (wi, wii, wiii) = (
        i.witness.as_ref().unwrap(),
        ii.witness.as_ref().unwrap(),
        iii.witness.as_ref().unwrap(),
    );
    let wi_v = wi.v.as_ref().unwrap();
    let built = is_orthogonal(Relation::RhoAb { ab: p }, &family("l2"), &wi.u, wi_v, 1e-9).unwrap();
    let metrics = [
        orthogonality_defect(&shear, &wi.u, wi_v, p),
        isometry_defect(&shear, &wii.u, t),
        rho_scaling_defect(&shear, &wiii.u, wiii.v.as_ref().unwrap(), p, t),
    ];
    check(
        built.holds && metrics.iter().all(|m| *m > r.tolerance),
        || format!("shear witnesses re-evaluate to {metrics:?}"),
    )?;
    Ok(format!(
        "4 maps pass; shear fails with re-verified defects {:.3e}, {:.3e}, {:.3e}",
        metrics[0], metrics[1], metrics[2]
    ))
}

fn equivalence_constant() -> Outcome {
    let k = norm_equiv_constant(
        &family("l1"),
        &family("linf"),
        ab(0.3, 0.3),
        &SampleConfig::new(10, 10_000),
    )
    .unwrap();
    check(k.estimate > 0.0 && k.estimate <= 5.0, || format!("{k:?}"))?;
    Ok(format!("k = {} over {} pairs", k.estimate, k.samples_used))
}

fn dsl_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut texts = Vec::new();
    for _ in 0..1000 {
        let dim = rng.random_range(2..5);
        let ast = NormAst::new(random_node(&mut rng, 4, dim), dim).unwrap();
        check(ast.root().depth() <= 4, || {
            format!("depth {}", ast.root().depth())
        })?;
        let text = print_norm(&ast);
        let back = parse_norm(&text, dim).map_err(|e| format!("{text}: {e}"))?;
        check(back == ast, || format!("{text} reparsed as {back:?}"))?;
        texts.push((text, dim));
    }
    for (text, dim) in &texts {
        let bad = mutate(&mut rng, text);
        match parse_norm(&bad, *dim) {
            Ok(_) => return Err(format!("mutation {bad:?} of {text:?} parsed")),
            Err(e) => check(e.offset() <= bad.len(), || {
                format!("{bad:?}: offset {} past end", e.offset())
            })?,
        }
    }
    Ok("1000 trees round-trip, 1000 mutations rejected".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("linf example", Duration::from_secs(1), linf_example),
        ("l1 example", Duration::from_secs(1), l1_example),
        ("rho_ab properties", Duration::from_secs(10), ab_properties),
        (
            "Birkhoff oracle agreement",
            Duration::from_secs(30),
            oracle_equivalence,
        ),
        ("numeric enclosures", Duration::from_secs(30), enclosures),
        (
            "rho_ab inside Birkhoff",
            Duration::from_secs(30),
            birkhoff_inclusion,
        ),
        (
            "Euclidean collapse",
            Duration::from_secs(5),
            euclidean_collapse,
        ),
        (
            "non-smooth witnesses",
            Duration::from_secs(10),
            nonsmooth_witnesses,
        ),
        ("preservers", Duration::from_secs(10), preservers),
        (
            "norm equivalence constant",
            Duration::from_secs(5),
            equivalence_constant,
        ),
        ("DSL round trip", Duration::from_secs(5), dsl_round_trip),
    ];
    let mut failed = 0;
    for (n, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if took <= limit {
                Ok(d)
            } else {
                Err(format!("{d}; took {took:.2?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({took:.2?}): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({took:.2?}): {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} of 11 criteria pass", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
