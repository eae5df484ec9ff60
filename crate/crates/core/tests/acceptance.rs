//! End-to-end acceptance checks. Runs as a plain binary so each criterion
//! prints one PASS/FAIL line; exits nonzero if any criterion fails.

use std::time::Instant;

use gmnl::behavior::CorrelatorForm;
use gmnl::fixtures::{corr1_t2_model, corr1_target, ghz_svetlichny_local_model, ghz_witness_scenario, s2_mixture};
use gmnl::inequalities::{
    expr_ghz_witness, expr_i, expr_i_ab, split_check, verify_bound, verify_facet, Catalog,
};
use gmnl::membership::{classify, LocalityClass, Verdict};
use gmnl::quantum::{
    born_behavior, born_correlators, optimize_threshold, scan_pure_states, seesaw_maximize, Measurements,
    PureStateParams, QuantumScenario, QuantumState,
};
use gmnl::scalar::ratio;
use gmnl::vertices::{enumerate_one_way, ns2_vertices, OrderingDirection};
use gmnl::{Behavior, Bipartition, Rational, Scalar};
use nalgebra::SVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn catalog_bounds() -> Outcome {
    let cat = Catalog::embedded();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for entry in cat.entries() {
        for class in [LocalityClass::Ns2, LocalityClass::T2, LocalityClass::S2] {
            let t = Instant::now();
            let c = verify_bound(cat, entry.family, class).map_err(err)?;
            worst = worst.max(t.elapsed().as_secs_f64());
            ensure(
                c.passed(),
                format!(
                    "family {} {class}: computed {} declared {:?}",
                    entry.family,
                    c.computed,
                    c.declared.map(|d| d.to_string())
                ),
            )?;
            checked += 1;
        }
    }
    ensure(worst < 60.0, format!("slowest bound took {worst:.1}s"))?;
    let f6: Vec<String> = [LocalityClass::Ns2, LocalityClass::T2, LocalityClass::S2]
        .iter()
        .map(|c| verify_bound(cat, 6, *c).map(|b| b.computed.to_string()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    Ok(format!(
        "{checked} bounds over {} families exact; family 6 = {}; slowest {worst:.2}s",
        cat.len(),
        f6.join(", ")
    ))
}

/// Random rational point of the NS₂ polytope: a mixture of 2..=8
/// generators with small integer weights.
fn random_ns_behavior(rng: &mut ChaCha8Rng) -> Behavior<Rational> {
    let gens: Vec<&Behavior<Rational>> = ns2_vertices().behaviors().collect();
    let k = rng.gen_range(2..=8);
    let picks: Vec<(usize, i64)> = (0..k).map(|_| (rng.gen_range(0..gens.len()), rng.gen_range(1..=9))).collect();
    let total: i64 = picks.iter().map(|p| p.1).sum();
    let mut p = vec![Rational::from_i64(0); 64];
    for (g, w) in picks {
        let w = ratio(w, total);
        for (e, v) in gens[g].entries().iter().enumerate() {
            p[e] += &w * v;
        }
    }
    Behavior::new(p).expect("mixture is valid")
}

fn inequality_i() -> Outcome {
    let i = expr_i();
    for class in [LocalityClass::T2, LocalityClass::Ns2] {
        let m = i.maximize(class).map_err(err)?;
        ensure(m.value == ratio(0, 1), format!("max over {class} is {}", m.value))?;
    }
    let v = i.evaluate(&s2_mixture());
    ensure(v == ratio(1, 4), format!("mixture gives {v}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let b = random_ns_behavior(&mut rng);
        split_check(&b).map_err(err)?;
    }
    let ab = expr_i_ab();
    let fwd = enumerate_one_way(OrderingDirection::forward(Bipartition::AbC));
    ensure(fwd.labeled_len() == 256, "expected 256 A<B strategies")?;
    let worst = fwd
        .labeled()
        .map(|(_, b)| ab.evaluate(b))
        .max()
        .expect("nonempty");
    ensure(worst <= ratio(0, 1), format!("I_A<B reaches {worst}"))?;
    Ok(format!("max T2 = max NS2 = 0; mixture = 1/4; split exact on 100; max I_A<B over 256 points = {worst}"))
}

fn explicit_models() -> Outcome {
    let corr1 = corr1_target();
    match classify(&corr1, LocalityClass::T2).map_err(err)? {
        Verdict::Member(cert) => cert.verify(&corr1, 0.0).map_err(err)?,
        Verdict::Nonmember(_) => return Err("corr1 not in T2".into()),
    }
    match classify(&corr1, LocalityClass::Ns2).map_err(err)? {
        Verdict::Nonmember(f) => f.verify(&corr1, LocalityClass::Ns2, 0.0).map_err(err)?,
        Verdict::Member(_) => return Err("corr1 in NS2".into()),
    }
    let model = corr1_t2_model();
    ensure(model.simulate(0) == corr1 && model.simulate(1) == corr1, "hidden-bit model differs from corr1")?;
    let q = born_behavior(&ghz_witness_scenario()).map_err(err)?;
    let diff = ghz_svetlichny_local_model().simulate(0).max_abs_diff(&q);
    ensure(diff <= 1e-9, format!("GHZ model differs by {diff:e}"))?;
    match classify(&q, LocalityClass::S2).map_err(err)? {
        Verdict::Member(cert) => cert.verify(&q, 1e-9).map_err(err)?,
        Verdict::Nonmember(_) => return Err("GHZ behavior not in S2".into()),
    }
    let v = expr_ghz_witness().evaluate(&q);
    let target = 1.0 + 2.0 * 2f64.sqrt();
    ensure((v - target).abs() <= 1e-9, format!("witness value {v}"))?;
    Ok(format!("corr1 in T2, not NS2 (certified); both orderings exact; GHZ model diff {diff:.1e}; witness {v:.9}"))
}

fn quantum_maxima() -> Outcome {
    let cat = Catalog::embedded();
    let fam = |n: u32| cat.get(n).map(|e| e.expression.clone()).map_err(err);
    let t = Instant::now();
    let ghz = QuantumState::ghz();
    let w = QuantumState::w();
    let s185 = seesaw_maximize(&fam(185)?, &ghz, 50, 0).value;
    let old = seesaw_maximize(&expr_ghz_witness(), &ghz, 50, 0).value;
    let w138 = seesaw_maximize(&fam(138)?, &w, 50, 0).value;
    let w12 = seesaw_maximize(&fam(12)?, &w, 50, 0).value;
    ensure((s185 - 5.65685).abs() <= 1e-4, format!("GHZ family 185: {s185}"))?;
    ensure((old - 3.82843).abs() <= 1e-5, format!("GHZ witness: {old}"))?;
    ensure((old - (1.0 + 2.0 * 2f64.sqrt())).abs() <= 1e-6, format!("GHZ witness: {old}"))?;
    ensure(w138 >= 12.48, format!("W family 138: {w138}"))?;
    ensure(w12 >= 7.31, format!("W family 12: {w12}"))?;
    Ok(format!(
        "GHZ 185 = {s185:.5}, GHZ witness = {old:.6}, W 138 = {w138:.4}, W 12 = {w12:.4} ({:.1}s)",
        t.elapsed().as_secs_f64()
    ))
}

fn thresholds() -> Outcome {
    let cases = [
        ("GHZ", QuantumState::ghz(), LocalityClass::Ns2, std::f64::consts::FRAC_1_SQRT_2, 1e-3),
        ("GHZ", QuantumState::ghz(), LocalityClass::T2, std::f64::consts::FRAC_1_SQRT_2, 1e-3),
        ("GHZ", QuantumState::ghz(), LocalityClass::S2, std::f64::consts::FRAC_1_SQRT_2, 1e-3),
        ("W", QuantumState::w(), LocalityClass::Ns2, 0.801, 3e-3),
        ("W", QuantumState::w(), LocalityClass::T2, 0.820, 3e-3),
        ("W", QuantumState::w(), LocalityClass::S2, 0.919, 3e-3),
    ];
    let mut parts = Vec::new();
    for (name, state, class, want, tol) in cases {
        let r = optimize_threshold(&state, class, 8, 0).map_err(err)?;
        ensure((r.p - want).abs() <= tol, format!("{name} {class}: p = {:.5}, expected {want} ± {tol}", r.p))?;
        parts.push(format!("{name} {class} {:.4}", r.p));
    }
    Ok(parts.join(", "))
}

/// Quantum behavior with white noise, correlators snapped to denominator
/// 1000 so the result is exact and no-signalling.
fn random_quantum_behavior(rng: &mut ChaCha8Rng) -> Behavior<Rational> {
    let cat = Catalog::embedded();
    loop {
        let v: SVector<Complex64, 8> =
            SVector::from_fn(|_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let v = v / Complex64::new(v.norm(), 0.0);
        let pure = match rng.gen_range(0..3) {
            0 => QuantumState::ghz(),
            1 => QuantumState::w(),
            _ => QuantumState::pure(&v).expect("normalized"),
        };
        let measurements = if rng.gen_bool(0.5) {
            Measurements::random(rng)
        } else {
            let family = rng.gen_range(2..=185);
            let expr = &cat.get(family).expect("family").expression;
            seesaw_maximize(expr, &pure, 3, rng.gen()).measurements
        };
        let state = pure.with_white_noise(rng.gen_range(0.55..1.0)).expect("weight in range");
        let c: CorrelatorForm<f64> = born_correlators(&QuantumScenario { state, measurements });
        if let Ok(b) = c.snap(1000).to_behavior() {
            return b;
        }
    }
}

fn chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut counts = [0usize; 5];
    for n in 0..200 {
        let b = random_quantum_behavior(&mut rng);
        let mut seen_member = false;
        for (k, class) in LocalityClass::CHAIN.iter().enumerate() {
            match classify(&b, *class).map_err(err)? {
                Verdict::Member(cert) => {
                    cert.verify(&b, 0.0).map_err(|e| format!("behavior {n}, {class}: {e}"))?;
                    counts[k] += 1;
                    seen_member = true;
                }
                Verdict::Nonmember(_) => {
                    ensure(!seen_member, format!("behavior {n}: inversion at {class}"))?;
                }
            }
        }
    }
    Ok(format!(
        "200 behaviors, 0 inversions; members LOCAL/NS2/T2/K2/S2 = {}/{}/{}/{}/{}",
        counts[0], counts[1], counts[2], counts[3], counts[4]
    ))
}

fn facets() -> Outcome {
    let cat = Catalog::embedded();
    let mut parts = Vec::new();
    for family in [1, 6, 185] {
        let t = Instant::now();
        let f = verify_facet(cat, family).map_err(err)?;
        let dt = t.elapsed().as_secs_f64();
        ensure(f.dimension == 26, format!("polytope dimension {}", f.dimension))?;
        ensure(f.is_facet(), format!("family {family}: rank {:?}, valid {}", f.rank, f.valid))?;
        ensure(dt < 30.0, format!("family {family} took {dt:.1}s"))?;
        parts.push(format!("{family}: {} saturating, rank {}", f.saturating, f.rank.unwrap_or(0)));
    }
    Ok(format!("dimension 26; {}", parts.join("; ")))
}

fn pure_state_scan() -> Outcome {
    let t = Instant::now();
    let report = scan_pure_states(4, &expr_i(), 10, 0).map_err(err)?;
    let tested = report.tested().count();
    ensure(report.non_violating().is_empty(), format!("{} states without violation", report.non_violating().len()))?;
    let min = report.min_value().ok_or("no state tested")?;
    let s = 3f64.sqrt();
    let special = PureStateParams::new([s / 2.0, 0.0, 0.0, s / 4.0, 0.25], 0.0).map_err(err)?;
    let v = seesaw_maximize(&expr_i(), &QuantumState::from_params(&special), 50, 0).value;
    ensure(v > 0.0, format!("special state gives {v}"))?;
    Ok(format!(
        "{tested} states tested, {} skipped, min violation {min:.3e}; special state {v:.4e} ({:.0}s)",
        report.skipped(),
        t.elapsed().as_secs_f64()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("class bounds of the catalog", catalog_bounds),
        ("inequality I", inequality_i),
        ("explicit models", explicit_models),
        ("quantum maxima", quantum_maxima),
        ("visibility thresholds", thresholds),
        ("class chain", chain),
        ("facets", facets),
        ("pure-state scan", pure_state_scan),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {} ({name}): PASS [{secs:.1}s] {msg}", n + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {msg}", n + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
