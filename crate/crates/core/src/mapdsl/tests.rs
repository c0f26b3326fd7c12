use super::*;
use crate::torus;

fn dy(x: f64) -> Dyadic {
    Dyadic::from_f64(x).unwrap()
}

#[test]
fn doubling_has_lipschitz_two() {
    let m = parse_map("2*x1 mod 1", 1).unwrap();
    assert_eq!(m.lipschitz_bound(), 2.0);
    assert!((m.modulus_of_continuity(0.05) - 0.1).abs() < 1e-15);
}

#[test]
fn sine_lipschitz_bound_is_tight_and_sound() {
    let m = parse_map("x1 + 0.1*sin(4*pi*x1) mod 1", 1).unwrap();
    let exact = 1.0 + 0.4 * std::f64::consts::PI;
    assert!(m.lipschitz_bound() >= exact);
    assert!(m.lipschitz_bound() <= 2.257);
    assert!(m.modulus_of_continuity(0.1) <= 0.2257);
}

#[test]
fn rotation_is_an_isometry() {
    let m = load_map("rotation:0.3", 1).unwrap();
    assert_eq!(m.lipschitz_bound(), 1.0);
    assert!((m.modulus_of_continuity(0.05) - 0.05).abs() < 1e-15);
    let back = load_map("rotation:-0.3", 1).unwrap();
    assert_eq!(back.source(), "x1 - 0.3 mod 1");
}

#[test]
fn modulus_is_clamped_to_diameter() {
    let m = load_map("doubling", 1).unwrap();
    assert_eq!(m.modulus_of_continuity(0.4), 0.5);
}

#[test]
fn syntax_error_points_at_star() {
    match parse_map("x1 + * 2", 1) {
        Err(Error::Syntax { position, .. }) => assert_eq!(position, 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn non_integer_degree_is_rejected() {
    assert!(matches!(
        parse_map("1.5*x1 mod 1", 1),
        Err(Error::NotPeriodic { component: 1 })
    ));
}

#[test]
fn doubling_of_three_tenths() {
    let m = load_map("doubling", 1).unwrap();
    let v = m.eval_map(&[dy(0.3)], 10).unwrap()[0].to_f64();
    assert!((v - 0.6).abs() <= 2f64.powi(-10));
}

#[test]
fn identity_is_exact() {
    let m = parse_map("x1 mod 1", 1).unwrap();
    for k in [1, 10, 40, 100] {
        let v = m.eval_map(&[dy(0.71875)], k).unwrap();
        assert_eq!(v[0], dy(0.71875));
    }
}

#[test]
fn sine_fixed_point_at_quarter() {
    let m = load_map("sine2:0.1", 1).unwrap();
    let v = m.eval_map(&[dy(0.25)], 20).unwrap()[0].to_f64();
    assert!((v - 0.25).abs() <= 2f64.powi(-20));
}

#[test]
fn deep_tolerance_needs_multiprecision() {
    let m = load_map("sine2:0.1", 1).unwrap();
    let v = m.eval_map(&[dy(0.125)], 300).unwrap();
    // f(1/8) = 1/8 + 0.1 * sin(pi/2) = 0.225
    let exact = parse_decimal("0.225").unwrap();
    let err = (v[0].to_rational() - exact).abs();
    let tol = BigRational::new(1.into(), num_bigint::BigInt::from(1) << 300usize);
    assert!(err <= tol);
}

#[test]
fn precision_cap_is_enforced() {
    let m = load_map("sine2:0.1", 1).unwrap().with_max_precision(64);
    assert!(matches!(
        m.eval_map(&[dy(0.1)], 100),
        Err(Error::PrecisionUnreachable { bits: 64 })
    ));
}

#[test]
fn output_wraps_into_unit_interval() {
    let m = load_map("rotation:0.3", 1).unwrap();
    let v = m.eval_map(&[dy(0.9)], 30).unwrap()[0].to_f64();
    assert!((0.0..1.0).contains(&v));
    assert!(torus::distance(v, 0.2) <= 2f64.powi(-30));
}

#[test]
fn two_dimensional_cat_map() {
    let m = parse_map("2*x1 + x2 mod 1; x1 + x2 mod 1", 2).unwrap();
    // largest singular value of [[2,1],[1,1]] is about 2.618, Frobenius sqrt(7)
    assert!(m.lipschitz_bound() >= 2.618 && m.lipschitz_bound() <= 7f64.sqrt() + 1e-12);
    let v = m.eval_point(&[0.25, 0.5], 1e-12).unwrap();
    assert!((v[0] - 0.0).abs() < 1e-12 && (v[1] - 0.75).abs() < 1e-12);
}

#[test]
fn image_lift_contains_samples() {
    let m = load_map("sine2:0.1", 1).unwrap();
    let (lo, hi) = (-0.03, 0.02);
    let enc = m.image_lift(lo, hi, 0.001);
    for k in 0..=200 {
        let x = lo + (hi - lo) * k as f64 / 200.0;
        let y = m.components()[0].eval_f64(&[x]);
        assert!(enc.contains(y), "{y} not in {enc:?}");
    }
    // tight up to second order
    let f = |x: f64| m.components()[0].eval_f64(&[x]);
    assert!(enc.width() < (f(hi) - f(lo)) + 1e-3);
}

#[test]
fn builtin_names_resolve() {
    assert_eq!(builtin_source("doubling").unwrap().unwrap(), "2*x1 mod 1");
    assert_eq!(
        builtin_source("sine2:0.1").unwrap().unwrap(),
        "x1 + 0.1*sin(4*pi*x1) mod 1"
    );
    assert!(builtin_source("x1 mod 1").unwrap().is_none());
    assert!(builtin_source("rotation:abc").is_err());
}
