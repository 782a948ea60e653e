use std::f64::consts::TAU;

use ergolab::arith::number::to_f64;
use ergolab::arith::{parse_number, rat};
use ergolab::spectral::{
    correlation_sequence, detect_eigenvalue, fiber_eigenvalue_scan, weak_mixing_test, wiener_atomic_mass,
    SpectralOptions,
};
use ergolab::system::{build_system, Freq, Observable, SystemSpec};
use num_complex::Complex64;
use serde_json::json;

fn sys(kind: &str, params: serde_json::Value) -> ergolab::system::System {
    build_system(&SystemSpec::new(kind, params)).unwrap()
}

fn chr(k: &[i64]) -> Observable {
    Observable::Character(Freq(k.to_vec()))
}

fn opts() -> SpectralOptions {
    SpectralOptions::default()
}

#[test]
fn rotation_values_are_conjugate_phases() {
    let r = sys("rotation", json!({"alpha": "1/3"}));
    let c = correlation_sequence(&r, &chr(&[1]), 64, false, &opts()).unwrap();
    assert!(c.is_exact());
    for n in 0..=64i64 {
        let want = Complex64::from_polar(1.0, -TAU * n as f64 / 3.0);
        assert!((c.value(n) - want).norm() < 1e-12, "lag {n}");
        assert!((c.value(-n) - want.conj()).norm() < 1e-12, "lag -{n}");
    }
}

#[test]
fn decimal_rotation_values_match_floating_phases() {
    let r = build_system(&SystemSpec::new("rotation", json!({"alpha": "0.7071067811865475"})).with_precision(16)).unwrap();
    let c = correlation_sequence(&r, &chr(&[2]), 32, false, &opts()).unwrap();
    for n in 0..=32i64 {
        let want = Complex64::from_polar(1.0, -TAU * 2.0 * 0.7071067811865475 * n as f64);
        assert!((c.value(n) - want).norm() < 1e-9, "lag {n}");
    }
}

#[test]
fn twist_fiber_character_decorrelates_immediately() {
    let t = sys("twist", json!({}));
    let c = correlation_sequence(&t, &chr(&[0, 1]), 32, false, &opts()).unwrap();
    assert!(c.is_exact());
    assert!((c.values[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    for v in &c.values[1..] {
        assert!(v.norm() < 1e-15);
    }
}

#[test]
fn identity_values_are_constant() {
    let id = sys("identity", json!({}));
    let c = correlation_sequence(&id, &chr(&[3]), 16, false, &opts()).unwrap();
    assert!(c.values.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
}

#[test]
fn centering_removes_the_mean() {
    // e(x) is constant on δ_{1/4}, so the centered observable vanishes.
    let id = sys("identity", json!({"measure": {"type": "dirac", "at": "1/4"}}));
    let c = correlation_sequence(&id, &chr(&[1]), 16, true, &opts()).unwrap();
    assert!(c.values.iter().all(|v| v.norm() < 1e-15));
}

#[test]
fn wiener_mass_of_a_twist_is_one_over_n() {
    let t = sys("twist", json!({}));
    for n in [256usize, 1024, 4096] {
        let c = correlation_sequence(&t, &chr(&[0, 1]), n, false, &opts()).unwrap();
        let r = wiener_atomic_mass(&c, &[]).unwrap();
        assert_eq!(r.exact_total_mass.as_deref(), Some(format!("1/{n}").as_str()));
        assert!(r.atoms.is_empty());
    }
}

#[test]
fn wiener_mass_of_a_rotation_is_one_with_an_atom_at_minus_alpha() {
    let r = sys("rotation", json!({"alpha": "1/3"}));
    let c = correlation_sequence(&r, &chr(&[1]), 1024, false, &opts()).unwrap();
    let w = wiener_atomic_mass(&c, &[]).unwrap();
    assert_eq!(w.exact_total_mass.as_deref(), Some("1"));
    assert_eq!(w.atoms[0].angle, "2/3");
    assert!((w.atoms[0].mass - 1.0).abs() < 1e-9);
}

#[test]
fn eigenvalue_detection_on_rotations() {
    let r = sys("rotation", json!({"alpha": "1/3"}));
    let n = 4096;
    let hit = detect_eigenvalue(&r, &chr(&[1]), &rat(1, 3), n, 0.5, &opts()).unwrap();
    assert_eq!(hit.exact_mass.as_deref(), Some("1"));
    assert!(hit.witnessed);
    // Oracle: |(1/N) Σ e(n(β - α))| as a geometric sum.
    for beta in [rat(0, 1), rat(1, 2), rat(5, 6)] {
        let miss = detect_eigenvalue(&r, &chr(&[1]), &beta, n, 0.5, &opts()).unwrap();
        let d = to_f64(&beta) - 1.0 / 3.0;
        let geo = ((std::f64::consts::PI * n as f64 * d).sin() / (std::f64::consts::PI * d).sin()).abs() / n as f64;
        assert!((miss.mass - geo).abs() < 1e-9, "angle {beta}");
        assert!(miss.mass <= 2.0 / n as f64);
        assert!(!miss.witnessed);
    }
}

#[test]
fn eigenvalue_detection_at_a_decimal_angle() {
    let alpha = parse_number("0.41421356237309504880", Some(20), "alpha").unwrap();
    let r = build_system(&SystemSpec::new("rotation", json!({"alpha": "0.41421356237309504880"})).with_precision(20))
        .unwrap();
    let hit = detect_eigenvalue(&r, &chr(&[1]), &alpha, 1024, 0.5, &opts()).unwrap();
    assert!((hit.mass - 1.0).abs() < 1e-9);
}

#[test]
fn toeplitz_matrices_are_positive_semidefinite() {
    for (kind, params, k) in [
        ("rotation", json!({"alpha": "2/7"}), vec![1]),
        ("twist", json!({}), vec![1, 1]),
        ("identity", json!({"measure": {"type": "cyclic", "order": 5}}), vec![2]),
    ] {
        let s = sys(kind, params);
        let c = correlation_sequence(&s, &chr(&k), 128, false, &opts()).unwrap();
        assert!(c.bounded_by_origin(1e-12));
        assert!(c.toeplitz_min_eigenvalue(64).unwrap() >= -1e-9, "{kind}");
    }
}

#[test]
fn toeplitz_size_is_validated() {
    let s = sys("identity", json!({}));
    let c = correlation_sequence(&s, &chr(&[1]), 16, false, &opts()).unwrap();
    assert!(c.toeplitz_min_eigenvalue(0).is_err());
    assert!(c.toeplitz_min_eigenvalue(18).is_err());
}

#[test]
fn short_orders_are_rejected() {
    let s = sys("identity", json!({}));
    assert!(detect_eigenvalue(&s, &chr(&[1]), &rat(0, 1), 8, 0.5, &opts()).is_err());
}

#[test]
fn weak_mixing_flags_rotations_and_passes_twist_fibers() {
    let r = sys("rotation", json!({"alpha": "1/5", "measure": {"type": "cyclic", "order": 5}}));
    let rep = weak_mixing_test(&r, &[chr(&[1]), chr(&[2])], 512, 0.05, &opts()).unwrap();
    assert!(!rep.no_atoms_detected);
    assert!(rep.note.contains("never certify"));

    let t = sys("twist", json!({}));
    let rep = weak_mixing_test(&t, &[chr(&[0, 1]), chr(&[1, 1])], 512, 0.05, &opts()).unwrap();
    assert!(rep.no_atoms_detected);
    assert_eq!(rep.verdict, "no atoms detected among tested observables");
}

#[test]
fn fiber_scan_over_an_atom_finds_the_rotation() {
    // Base δ_{1/3}: every fiber is a rotation by 1/3.
    let t = sys("twist", json!({"rho": {"type": "dirac", "at": "1/3"}}));
    let fs = t.fibered().unwrap();
    let rep = fiber_eigenvalue_scan(fs, Some(&t), &chr(&[1]), &rat(1, 3), 8, 256, 0.5, 11).unwrap();
    assert_eq!(rep.witnessed, 8);
    assert!(rep.flat.unwrap().witnessed);
}

#[test]
fn fiber_scan_of_a_haar_twist_sees_fibers_but_not_the_flat_system() {
    let t = sys("twist", json!({}));
    let fs = t.fibered().unwrap();
    let alpha = rat(1, 7);
    let rep = fiber_eigenvalue_scan(fs, Some(&t), &chr(&[1]), &alpha, 16, 256, 0.5, 3).unwrap();
    assert_eq!(rep.failures, 0);
    // Dyadic base samples are never 1/7, so no fiber rotates by it.
    assert_eq!(rep.witnessed, 0);
    assert!(!rep.flat.unwrap().witnessed);
}

#[test]
fn constant_fibers_inherit_the_eigenvalue() {
    let f = sys(
        "fibered",
        json!({"base": {"type": "haar"}, "fiber": {"constant": {"kind": "rotation", "params": {"alpha": "1/3"}}}}),
    );
    let fs = f.fibered().unwrap();
    let rep = fiber_eigenvalue_scan(fs, Some(&f), &chr(&[1]), &rat(1, 3), 6, 256, 0.5, 5).unwrap();
    assert_eq!(rep.witness_fraction, 1.0);
    assert!(rep.flat.unwrap().witnessed);
}
