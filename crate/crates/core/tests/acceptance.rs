//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed.

use std::process::ExitCode;
use std::time::Instant;

use ergolab::arith::{frac, rat, PhaseSum, Rational};
use ergolab::experiments::{run_experiment, Report};
use ergolab::joinings::{
    build_joining_value, invariance_check, marginal_check, product_consistency_test, ConsistencyOptions, Joining,
};
use ergolab::measure::MonteCarlo;
use ergolab::rank1::{
    binary_digits, dyadic_equivalence, rank1_map, rank1_word, word_from_digits, DyadicVerdict, Rank1Spec,
};
use ergolab::spectral::{correlation_sequence, detect_eigenvalue, wiener_atomic_mass, SpectralOptions};
use ergolab::system::{build_system, freq_box, Freq, Observable, SystemSpec};
use num_bigint::BigInt;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

const SEED: u64 = 20_240_601;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn joining(doc: Value) -> Result<Joining, String> {
    build_joining_value(&doc).map_err(|e| e.to_string())
}

fn integral(j: &Joining, k: &Freq) -> Result<PhaseSum, String> {
    j.integrate(k)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("no exact integral for {k}"))
}

fn example1_chain() -> Outcome {
    let start = Instant::now();
    let j = joining(json!({"kind": "example1-triple", "params": {"alpha": "1/5"}}))?;
    let marg = marginal_check(&j, 8, MonteCarlo::default()).map_err(|e| e.to_string())?;
    ensure(marg.exact && marg.passed, || format!("marginals: {:?}", marg.failures))?;

    let f = Freq(vec![0, -1, 1]);
    let zero = Freq::zero(3);
    let moved = j
        .joint
        .transfer_integrals(&f, &zero, 1)
        .map_err(|e| e.to_string())?
        .ok_or("no exact path")?;
    let (m0, m1) = (moved[0].abs_sqr_rational(), moved[1].abs_sqr_rational());
    ensure(m0.is_some() && m0 == m1, || format!("|∫F|² {m0:?} vs |∫F∘P|² {m1:?}"))?;
    let inv = invariance_check(&j, std::slice::from_ref(&f), MonteCarlo::default()).map_err(|e| e.to_string())?;
    ensure(inv.passed, || "F not preserved".into())?;

    let n = 4096;
    let opts = SpectralOptions::default();
    let alpha = rat(1, 5);
    let eig = detect_eigenvalue(&j.joint, &Observable::Character(f.clone()), &alpha, n, 0.5, &opts)
        .map_err(|e| e.to_string())?;
    ensure(eig.exact_mass.as_deref() == Some("1") && (eig.mass - 1.0).abs() <= 1e-9, || {
        format!("joining mass {} ({:?})", eig.mass, eig.exact_mass)
    })?;
    let product = joining(json!({"kind": "product", "components": j.spec.components}))?;
    let lifted = product.lift(&[Freq(vec![0, -1]), Freq(vec![0, 1])]);
    let peig = detect_eigenvalue(&product.joint, &Observable::Character(lifted), &alpha, n, 0.5, &opts)
        .map_err(|e| e.to_string())?;
    ensure(peig.mass.abs() <= 2.0 / n as f64, || format!("product mass {}", peig.mass))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("runtime {secs:.2} s"))?;
    Ok(format!(
        "marginals exact over {} characters; |∫F| preserved; mass {} at 1/5; product mass {:.2e} <= 2/N; {secs:.2} s",
        marg.checked, eig.mass, peig.mass
    ))
}

fn spectral_engine() -> Outcome {
    let opts = SpectralOptions::default();
    let sys = |kind: &str, params: Value| build_system(&SystemSpec::new(kind, params)).map_err(|e| e.to_string());
    let one = Observable::Character(Freq(vec![1]));

    let rot = sys("rotation", json!({"alpha": "1/3", "measure": {"type": "cyclic", "order": 3}}))?;
    let eig = detect_eigenvalue(&rot, &one, &rat(1, 3), 4096, 0.5, &opts).map_err(|e| e.to_string())?;
    ensure(eig.exact_mass.as_deref() == Some("1"), || format!("rotation atom mass {:?}", eig.exact_mass))?;

    let twist = sys("twist", json!({}))?;
    let fiber = Observable::Character(Freq(vec![0, 1]));
    for n in [256usize, 1024, 4096] {
        let c = correlation_sequence(&twist, &fiber, n, false, &opts).map_err(|e| e.to_string())?;
        let w = wiener_atomic_mass(&c, &[]).map_err(|e| e.to_string())?;
        let want = format!("1/{n}");
        ensure(w.exact_total_mass.as_deref() == Some(want.as_str()), || {
            format!("twist Wiener average at N={n}: {:?}", w.exact_total_mass)
        })?;
    }

    // Exact sequences only: Monte Carlo estimates are PSD up to sampling noise.
    let mut worst = f64::INFINITY;
    for (s, obs) in [
        (rot.clone(), one.clone()),
        (twist.clone(), Observable::Character(Freq(vec![1, 1]))),
        (sys("identity", json!({"measure": {"type": "cyclic", "order": 4}}))?, one.clone()),
        (sys("rank1-family", json!({"a": "1/3", "depth": 8}))?, Observable::Level { stage: 3, level: 5 }),
    ] {
        let c = correlation_sequence(&s, &obs, 64, false, &opts).map_err(|e| e.to_string())?;
        ensure(c.is_exact(), || format!("{obs} has no exact sequence"))?;
        let m = c.toeplitz_min_eigenvalue(64).map_err(|e| e.to_string())?;
        worst = worst.min(m);
    }
    ensure(worst >= -1e-9, || format!("Toeplitz min eigenvalue {worst:e}"))?;

    // Correlations of e(x + y) under the twist with ρ = w·δ_{2/7} + (1 - w)·Haar.
    let obs = Observable::Character(Freq(vec![1, 1]));
    let seq = |rho: Value| -> Result<Vec<PhaseSum>, String> {
        let s = sys("twist", json!({"rho": rho}))?;
        let c = correlation_sequence(&s, &obs, 32, false, &opts).map_err(|e| e.to_string())?;
        Ok((0..=32).map(|n| c.exact_value(n).expect("exact")).collect())
    };
    let atom = json!({"type": "dirac", "at": "2/7"});
    let haar = json!({"type": "haar"});
    let on_atom = seq(atom.clone())?;
    let on_haar = seq(haar.clone())?;
    for (w, rho) in [
        (rat(0, 1), haar.clone()),
        (rat(1, 4), mixture("1/4", &atom, "3/4", &haar)),
        (rat(1, 2), mixture("1/2", &atom, "1/2", &haar)),
        (rat(1, 1), atom.clone()),
    ] {
        let mixed = seq(rho)?;
        let rest = rat(1, 1) - &w;
        for n in 0..=32 {
            let want = on_atom[n].scale(&w).add(&on_haar[n].scale(&rest));
            ensure(mixed[n].exact_eq(&want), || format!("affinity fails at w = {w}, lag {n}"))?;
        }
    }
    Ok(format!(
        "rotation atom mass 1; twist Wiener average 1/N at N = 256, 1024, 4096; Toeplitz(64) min eigenvalue {worst:.2e}; affinity exact at w = 0, 1/4, 1/2, 1"
    ))
}

fn mixture(w1: &str, m1: &Value, w2: &str, m2: &Value) -> Value {
    json!({"type": "mixture", "components": [{"weight": w1, "measure": m1}, {"weight": w2, "measure": m2}]})
}

fn joinings() -> Outcome {
    let comps = json!([
        {"kind": "rotation", "params": {"alpha": "1/3", "measure": {"type": "cyclic", "order": 3}}},
        {"kind": "twist"}
    ]);
    let p = joining(json!({"kind": "product", "components": comps}))?;
    let r = joining(json!({"kind": "rel-indep", "components": comps, "params": {"factors": ["trivial", "trivial"]}}))?;
    let mut compared = 0;
    for a in freq_box(1, 8) {
        for b in freq_box(2, 8) {
            let k = p.lift(&[a.clone(), b.clone()]);
            // Oracle: the product of the two marginal integrals.
            let want = integral(&p, &p.lift(&[a.clone(), Freq::zero(2)]))?
                .mul(&integral(&p, &p.lift(&[Freq::zero(1), b.clone()]))?);
            let got = integral(&r, &k)?;
            ensure(got.exact_eq(&want) && integral(&p, &k)?.exact_eq(&want), || {
                format!("rel-indep differs from product at {k}")
            })?;
            compared += 1;
        }
    }

    let rot = json!({"kind": "rotation", "params": {"alpha": "2/5"}});
    let d = joining(json!({"kind": "diagonal", "components": [rot]}))?;
    let o = joining(json!({"kind": "off-diagonal", "components": [rot], "params": {"power": 0}}))?;
    let fam = freq_box(2, 8);
    for k in &fam {
        ensure(integral(&d, k)?.exact_eq(&integral(&o, k)?), || format!("diagonal vs off-diagonal(0) at {k}"))?;
    }

    let g = joining(json!({"kind": "graph", "components": [rot], "params": {"map": {"kind": "identity"}}}))?;
    let rep = product_consistency_test(&g, 1, ConsistencyOptions::default()).map_err(|e| e.to_string())?;
    let w = rep.witnesses.iter().find(|w| w.character == Freq(vec![1, -1]));
    let ok = rep.refuted
        && w.is_some_and(|w| (w.joint[0] - 1.0).abs() < 1e-15 && w.joint[1] == 0.0 && w.product == [0.0, 0.0]);
    ensure(ok, || format!("graph verdict {} without the e(x - y) witness", rep.verdict))?;
    Ok(format!(
        "rel-indep = product on {compared} characters; diagonal = off-diagonal(0) on {} characters; graph refuted by e(x - y): 1 vs 0",
        fam.len()
    ))
}

fn identity_disjointness() -> Outcome {
    let id = json!({"kind": "identity", "params": {"measure": mixture("1/2", &json!({"type": "dirac", "at": "0"}), "1/2", &json!({"type": "dirac", "at": "1/2"}))}});
    let rot = json!({"kind": "rotation", "params": {"alpha": "1/3", "measure": {"type": "cyclic", "order": 3}}});
    let comps = json!([id, rot]);
    let docs = [
        json!({"kind": "product", "components": comps}),
        json!({"kind": "rel-indep", "components": comps, "params": {"factors": ["trivial", "trivial"]}}),
        json!({"kind": "rel-indep", "components": comps, "params": {"factors": [{"coordinates": [0]}, "trivial"]}}),
        json!({"kind": "custom-sampler", "components": comps, "params": {"atoms": [
            {"weight": "1/6", "point": ["0", "0"]}, {"weight": "1/6", "point": ["0", "1/3"]},
            {"weight": "1/6", "point": ["0", "2/3"]}, {"weight": "1/6", "point": ["1/2", "0"]},
            {"weight": "1/6", "point": ["1/2", "1/3"]}, {"weight": "1/6", "point": ["1/2", "2/3"]}]}}),
    ];
    let mut cross = 0;
    for doc in &docs {
        let j = joining(doc.clone())?;
        for a in freq_box(1, 8) {
            for b in freq_box(1, 8) {
                let ia = j.components[0].measure().integrator(&a).map_err(|e| e.to_string())?.ok_or("inexact")?;
                let ib = j.components[1].measure().integrator(&b).map_err(|e| e.to_string())?.ok_or("inexact")?;
                let k = j.lift(&[a.clone(), b.clone()]);
                ensure(integral(&j, &k)?.exact_eq(&ia.mul(&ib)), || format!("{} differs from the product at {k}", j.spec.kind))?;
                cross += 1;
            }
        }
    }

    // ‖(1/N) Σ_{n<N} h∘Rⁿ‖² = (1/N²) Σ_{m,n<N} ∫ h∘R^{n-m} h̄ for centered h = e(kx).
    let rot_sys = build_system(&serde_json::from_value(rot).expect("spec")).map_err(|e| e.to_string())?;
    let n = 4096usize;
    let mut worst = 0.0f64;
    for k in (1..=8).flat_map(|k| [k, -k]) {
        let f = Freq(vec![k]);
        let corr = rot_sys.transfer_integrals(&f, &f, n).map_err(|e| e.to_string())?.ok_or("inexact")?;
        let mean = rot_sys.measure().integrator(&f).map_err(|e| e.to_string())?.ok_or("inexact")?.to_complex();
        let c: Vec<_> = corr.iter().map(|v| v.to_complex() - mean.norm_sqr()).collect();
        let mut total = c[0].re * n as f64;
        for (lag, v) in c.iter().enumerate().skip(1) {
            total += 2.0 * (n - lag) as f64 * v.re;
        }
        worst = worst.max((total.max(0.0)).sqrt() / n as f64);
    }
    ensure(worst <= 2.0 / n as f64, || format!("ergodic average norm {worst:e} > 2/N"))?;
    Ok(format!(
        "{cross} cross-character integrals equal product values over {} joinings; max ‖average‖ {worst:.2e} <= 2/N",
        docs.len()
    ))
}

fn product_closure(report: &Report) -> Outcome {
    ensure(report.config["samples"] == json!(100_000), || "not run with 10^5 samples".into())?;
    let sampled: Vec<_> = report.checks.iter().filter(|c| c.id.ends_with(".sampled")).collect();
    ensure(sampled.len() == 3, || format!("{} sampled joinings", sampled.len()))?;
    let max_sigma = sampled.iter().filter_map(|c| c.sigma).fold(0.0, f64::max);
    ensure(report.passed && max_sigma < 4.0, || format!("failing: {:?}, max sigma {max_sigma:.2}", report.failing))?;
    ensure(report.wall_clock < 60.0, || format!("runtime {:.1} s", report.wall_clock))?;
    Ok(format!(
        "{} joinings consistent at 4σ with 10^5 samples (max {max_sigma:.2}σ); {:.1} s",
        sampled.len(),
        report.wall_clock
    ))
}

fn rank1() -> Outcome {
    let params = [rat(1, 4), rat(3, 4), rat(1, 3)];
    for a in &params {
        let spec = Rank1Spec::exact(a.clone(), 12);
        for (n, (len, h)) in [(1, 1), (4, 3), (13, 9), (40, 27)].into_iter().enumerate() {
            let w = rank1_word(&spec, n).map_err(|e| e.to_string())?;
            ensure(w.length == len && w.height == h && w.word.len() as u64 == len, || {
                format!("a = {a}, stage {n}: length {} height {}", w.length, w.height)
            })?;
        }
        for d in 1..=12 {
            let map = rank1_map(&Rank1Spec::exact(a.clone(), d)).map_err(|e| e.to_string())?;
            let it = map.itinerary_from_base().map_err(|e| e.to_string())?;
            ensure(it == rank1_word(&spec, d).map_err(|e| e.to_string())?.word, || {
                format!("a = {a}: itinerary differs from B_{d}")
            })?;
            ensure(map.pieces_partition_exactly(), || format!("a = {a}: pieces fail at depth {d}"))?;
        }
        // Independent rational oracle at a moderate depth: sorted pieces
        // cover [0, 1) except for gaps of total length 1/L, and their images
        // are disjoint and inside [0, 1).
        let map = rank1_map(&Rank1Spec::exact(a.clone(), 5)).map_err(|e| e.to_string())?;
        let mut pieces = map.pieces();
        pieces.sort_by(|x, y| x.lo.cmp(&y.lo));
        let mut edge = rat(0, 1);
        let mut gaps = rat(0, 1);
        for p in &pieces {
            ensure(p.lo >= edge && p.hi > p.lo, || format!("a = {a}: overlap at {}", p.lo))?;
            gaps += &p.lo - &edge;
            edge = p.hi.clone();
        }
        gaps += rat(1, 1) - &edge;
        ensure(edge <= rat(1, 1) && gaps == map.undefined_measure() && gaps == rat(1, 364), || {
            format!("a = {a}: uncovered length {gaps}, expected 1/364")
        })?;
        let mut images: Vec<(Rational, Rational)> =
            pieces.iter().map(|p| (&p.lo + &p.shift, &p.hi + &p.shift)).collect();
        images.sort();
        ensure(
            images.windows(2).all(|w| w[0].1 <= w[1].0)
                && images.first().is_some_and(|i| i.0 >= rat(0, 1))
                && images.last().is_some_and(|i| i.1 <= rat(1, 1)),
            || format!("a = {a}: images overlap"),
        )?;
    }

    let table = [
        (0, 1, DyadicVerdict::IsomorphicFamily),
        (0, 2, DyadicVerdict::DisjointFamily),
        (1, 2, DyadicVerdict::DisjointFamily),
    ];
    for (i, j, want) in table {
        let got = dyadic_equivalence(&Rank1Spec::exact(params[i].clone(), 1), &Rank1Spec::exact(params[j].clone(), 1))
            .map_err(|e| e.to_string())?;
        ensure(got == want, || format!("({}, {}): {got}", params[i], params[j]))?;
    }

    let mut prefixes = 0;
    for n in 1..=6usize {
        for p in 0..(1u64 << n) {
            let digits: Vec<u8> = (0..n).rev().map(|b| ((p >> b) & 1) as u8).collect();
            let scale = Rational::from_integer(BigInt::from(1u64 << n));
            let a = (Rational::from_integer(p.into()) + rat(1, 3)) / &scale;
            let b = frac(&((Rational::from_integer(p.into()) + rat(5, 7)) / &scale));
            ensure(binary_digits(&a, n) == digits && binary_digits(&b, n) == digits, || {
                format!("prefix {digits:?} not shared")
            })?;
            let (sa, sb) = (Rank1Spec::exact(a, n), Rank1Spec::exact(b, n));
            let direct = word_from_digits(&digits);
            let wa = rank1_word(&sa, n).map_err(|e| e.to_string())?;
            let wb = rank1_word(&sb, n).map_err(|e| e.to_string())?;
            ensure(wa == wb && wa == direct, || format!("prefix {digits:?}: words differ"))?;
            prefixes += 1;
        }
    }
    Ok(format!(
        "stage 0-3 lengths 1, 4, 13, 40 and heights 1, 3, 9, 27; itinerary = B_d and exact partition for d <= 12; dichotomy table matches; {prefixes} prefixes of length <= 6 give identical words"
    ))
}

fn determinism(first: &[(String, Report)]) -> Outcome {
    for (name, a) in first {
        let b = run_experiment(name, &Value::Null, SEED).map_err(|e| format!("{name}: {e}"))?;
        let same = a.canonical_json().map_err(|e| e.to_string())? == b.canonical_json().map_err(|e| e.to_string())?
            && a.to_csv().map_err(|e| e.to_string())? == b.to_csv().map_err(|e| e.to_string())?
            && a.to_markdown() == b.to_markdown();
        ensure(same, || format!("{name}: reports differ between runs"))?;
    }
    Ok(format!(
        "{} experiments re-run with the same config and seed give byte-identical JSON, CSV and Markdown",
        first.len()
    ))
}

fn main() -> ExitCode {
    let names = ["example1", "identity-disjoint", "product-closure", "rank1-family", "spectral-probe"];
    let mut runs = Vec::new();
    let mut run_errors = Vec::new();
    for name in names {
        match run_experiment(name, &Value::Null, SEED) {
            Ok(r) => runs.push((name.to_string(), r)),
            Err(e) => run_errors.push(format!("{name}: {e}")),
        }
    }
    let closure = runs
        .iter()
        .find(|(n, _)| n == "product-closure")
        .map(|(_, r)| product_closure(r))
        .unwrap_or_else(|| Err(format!("product-closure did not run: {run_errors:?}")));
    let det = if run_errors.is_empty() {
        determinism(&runs)
    } else {
        Err(format!("runs failed: {run_errors:?}"))
    };

    let results = [
        ("example-1 chain", example1_chain()),
        ("spectral engine", spectral_engine()),
        ("joinings", joinings()),
        ("identity disjointness", identity_disjointness()),
        ("product closure", closure),
        ("rank-1 family", rank1()),
        ("determinism", det),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
