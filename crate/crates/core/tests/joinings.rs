use ergolab::arith::{frac, parse_number, rat, PhaseSum};
use ergolab::joinings::{
    build_joining_value, capped_family, invariance_check, marginal_check, product_consistency_test,
    sample_joining, ConsistencyOptions, Joining,
};
use ergolab::measure::MonteCarlo;
use ergolab::system::Freq;
use ergolab::Error;
use serde_json::{json, Value};

fn rot(alpha: &str) -> Value {
    json!({"kind": "rotation", "params": {"alpha": alpha}})
}

fn cyclic_rot(alpha: &str, order: u64) -> Value {
    json!({"kind": "rotation", "params": {"alpha": alpha, "measure": {"type": "cyclic", "order": order}}})
}

fn joining(doc: Value) -> Joining {
    build_joining_value(&doc).unwrap()
}

fn integral(j: &Joining, k: &[i64]) -> PhaseSum {
    j.integrate(&Freq(k.to_vec())).unwrap().unwrap()
}

fn exact_opts(lags: usize) -> ConsistencyOptions {
    ConsistencyOptions {
        lags,
        ..Default::default()
    }
}

#[test]
fn product_of_rotations_kills_cross_characters() {
    let j = joining(json!({"kind": "product", "components": [rot("1/3"), rot("1/3")]}));
    assert_eq!(j.marginals, vec![vec![0], vec![1]]);
    assert!(integral(&j, &[1, -1]).is_zero());
    assert!(integral(&j, &[0, 0]).exact_eq(&PhaseSum::one()));
}

#[test]
fn diagonal_puts_mass_on_x_equals_y() {
    let j = joining(json!({"kind": "diagonal", "components": [rot("1/3")]}));
    assert!(integral(&j, &[1, -1]).exact_eq(&PhaseSum::one()));
    assert!(integral(&j, &[1, 0]).is_zero());
    for p in sample_joining(&j, 4, 50) {
        assert_eq!(p[0], p[1]);
    }
}

#[test]
fn graph_of_the_identity_is_refuted_by_the_cross_character() {
    let j = joining(json!({"kind": "graph", "components": [rot("1/3")],
                           "params": {"map": {"kind": "identity"}}}));
    let r = product_consistency_test(&j, 1, exact_opts(0)).unwrap();
    assert_eq!(r.verdict, "refuted");
    let w = r
        .witnesses
        .iter()
        .find(|w| w.character == Freq(vec![1, -1]))
        .expect("e(x - y) is a witness");
    assert_eq!(w.lag, 0);
    assert!((w.joint[0] - 1.0).abs() < 1e-15);
    assert!(w.product[0].abs() < 1e-15 && w.product[1].abs() < 1e-15);
}

#[test]
fn graph_of_a_rotation_shifts_the_diagonal() {
    // y = x + 1/2, so ∫ e(y - x) = e(1/2) = -1.
    let j = joining(json!({"kind": "graph", "components": [rot("1/3")],
                           "params": {"map": rot("1/2")}}));
    let v = integral(&j, &[-1, 1]).to_complex();
    assert!((v.re + 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
}

#[test]
fn graph_map_that_moves_the_measure_is_rejected() {
    let doc = json!({"kind": "graph", "components": [cyclic_rot("1/2", 2)],
                     "params": {"map": rot("1/3")}});
    match build_joining_value(&doc) {
        Err(Error::Rejected { .. }) => {}
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn graph_map_that_does_not_commute_is_an_error() {
    let twist = json!({"kind": "twist"});
    let shift = json!({"kind": "product", "params": {"factors": [rot("1/2"), {"kind": "identity"}]}});
    let doc = json!({"kind": "graph", "components": [twist], "params": {"map": shift}});
    let e = build_joining_value(&doc).unwrap_err();
    assert!(e.to_string().contains("commute"), "{e}");
}

#[test]
fn off_diagonal_at_power_zero_is_the_diagonal() {
    let d = joining(json!({"kind": "diagonal", "components": [rot("2/5")]}));
    let o = joining(json!({"kind": "off-diagonal", "components": [rot("2/5")], "params": {"power": 0}}));
    for k in capped_family(2, 8, 10_000) {
        assert!(integral(&d, &k).exact_eq(&integral(&o, &k)), "{k}");
    }
}

#[test]
fn off_diagonal_places_t_n_x_in_the_second_slot() {
    let o = joining(json!({"kind": "off-diagonal", "components": [rot("1/5")], "params": {"power": 2}}));
    for p in sample_joining(&o, 9, 20) {
        assert_eq!(p[1], frac(&(&p[0] + rat(2, 5))));
    }
}

#[test]
fn relative_independence_over_trivial_factors_is_the_product() {
    let comps = json!([rot("1/4"), {"kind": "twist"}]);
    let p = joining(json!({"kind": "product", "components": comps}));
    let r = joining(json!({"kind": "rel-indep", "components": comps,
                           "params": {"factors": ["trivial", "trivial"]}}));
    for k in capped_family(3, 8, 6_000) {
        assert!(integral(&p, &k).exact_eq(&integral(&r, &k)), "{k}");
    }
}

#[test]
fn example_triple_carries_the_rotation() {
    let j = joining(json!({"kind": "example1-triple", "params": {"alpha": "1/5"}}));
    assert_eq!(j.marginals, vec![vec![0, 1], vec![0, 2]]);
    assert!(marginal_check(&j, 4, MonteCarlo::default()).unwrap().passed);
    let fam = capped_family(3, 3, 1_000);
    assert!(invariance_check(&j, &fam, MonteCarlo::default()).unwrap().passed);
    let r = product_consistency_test(&j, 1, exact_opts(1)).unwrap();
    assert!(r.refuted);
    assert!(r.witnesses.iter().any(|w| w.character == Freq(vec![0, -1, 1]) && w.lag == 1));
}

#[test]
fn example_triple_orbits_are_exact_at_a_decimal_angle() {
    let text = "0.7071067811865475244008443621048490392848";
    let alpha = parse_number(text, Some(40), "alpha").unwrap();
    let j = joining(json!({"kind": "example1-triple", "precision": 40, "params": {"alpha": text}}));
    for start in sample_joining(&j, 21, 8) {
        let orbit = j.joint.orbit(&start, 6).unwrap();
        for w in orbit.windows(2) {
            assert_eq!(w[1][0], w[0][0]);
            assert_eq!(w[1][1], frac(&(&w[0][1] + &w[0][0])));
            assert_eq!(w[1][2], frac(&(&w[0][2] + &w[0][0] + &alpha)));
        }
    }
}

#[test]
fn custom_sampler_checks_marginals() {
    let comps = json!([cyclic_rot("1/2", 2), cyclic_rot("1/2", 2)]);
    let good = json!({"kind": "custom-sampler", "components": comps, "params": {"atoms": [
        {"weight": "1/2", "point": ["0", "0"]}, {"weight": "1/2", "point": ["1/2", "1/2"]}]}});
    let j = joining(good);
    assert!(!j.invariance_enforced);
    let bad = json!({"kind": "custom-sampler", "components": comps, "params": {"atoms": [
        {"weight": "1", "point": ["0", "0"]}]}});
    let e = build_joining_value(&bad).unwrap_err();
    assert!(e.to_string().contains("params.atoms"), "{e}");
}

#[test]
fn sampling_is_deterministic_and_matches_marginals() {
    let j = joining(json!({"kind": "product", "components": [rot("1/3"), {"kind": "twist"}]}));
    let a = sample_joining(&j, 77, 4000);
    let b = sample_joining(&j, 77, 4000);
    assert_eq!(a, b);
    assert_ne!(a, sample_joining(&j, 78, 4000));
    // Haar coordinates: the mean of x is 1/2 with standard error 1/sqrt(12 n).
    let n = a.len() as f64;
    for c in 0..3 {
        let mean = a.iter().map(|p| p.to_f64()[c]).sum::<f64>() / n;
        assert!((mean - 0.5).abs() < 4.0 / (12.0 * n).sqrt(), "coordinate {c}: {mean}");
    }
}

#[test]
fn sampled_consistency_accepts_products_and_refutes_diagonals() {
    let comps = json!([rot("0.41421356"), rot("0.41421356")]);
    let p = joining(json!({"kind": "product", "components": comps}));
    let opts = ConsistencyOptions {
        samples: 20_000,
        seed: 5,
        force_sampled: true,
        ..Default::default()
    };
    let r = product_consistency_test(&p, 2, opts).unwrap();
    assert_eq!(r.verdict, "consistent-with-product");
    assert!(r.max_sigma.unwrap() < 4.0);
    let d = joining(json!({"kind": "diagonal", "components": comps}));
    let r = product_consistency_test(&d, 2, opts).unwrap();
    assert_eq!(r.verdict, "refuted");
}

#[test]
fn component_errors_carry_field_paths() {
    let doc = json!({"kind": "product", "components": [rot("1/3"), {"kind": "rotation", "params": {}}]});
    let e = build_joining_value(&doc).unwrap_err();
    assert!(e.to_string().contains("components[1].params.alpha"), "{e}");
    let doc = json!({"kind": "nope", "components": []});
    assert!(build_joining_value(&doc).unwrap_err().to_string().contains("unknown joining kind"));
}
