use ergomeasure::{load_map, parse_map, Dyadic};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;

const REFERENCE: &str = include_str!("data/map_reference.csv");

fn torus_dist_q(a: &BigRational, b: &BigRational) -> BigRational {
    let d = a - b;
    let frac = &d - BigRational::from_integer(d.floor().to_integer());
    let other = BigRational::one() - &frac;
    if frac < other {
        frac
    } else {
        other
    }
}

#[test]
fn eval_map_matches_high_precision_reference() {
    let tol_bits = 100u32;
    let scale = BigInt::from(10).pow(90u32);
    // reference digits are truncated, so allow one unit in the last place
    let allowed = BigRational::new(BigInt::one(), BigInt::one() << tol_bits as usize)
        + BigRational::new(BigInt::one(), scale.clone());
    let mut rows = 0;
    let mut cache = std::collections::HashMap::new();
    for line in REFERENCE.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let mut parts = line.split(',');
        let name = parts.next().unwrap();
        let x: f64 = parts.next().unwrap().parse().unwrap();
        let digits: BigInt = parts.next().unwrap().parse().unwrap();
        let map = cache
            .entry(name.to_string())
            .or_insert_with(|| load_map(name, 1).unwrap());
        let p = Dyadic::from_f64(x).unwrap();
        let y = map.eval_map(&[p], tol_bits).unwrap();
        let got = y[0].to_rational();
        let want = BigRational::new(digits, scale.clone());
        let d = torus_dist_q(&got, &want);
        assert!(d <= allowed, "{name} at {x}: off by {}", d.to_string());
        rows += 1;
    }
    assert_eq!(rows, 3000);
}

#[test]
fn eval_map_is_exact_for_affine_maps_on_dyadics() {
    let map = load_map("doubling", 1).unwrap();
    let p = Dyadic::new(BigInt::from(3), -3);
    let y = map.eval_map(&[p], 10).unwrap();
    let got = y[0].to_rational();
    let frac = got.numer().mod_floor(got.denom());
    assert_eq!(BigRational::new(frac, got.denom().clone()), BigRational::new(3.into(), 4.into()));
}

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..40, 0u32..100).prop_map(|(a, b)| format!("{a}.{b:02}")),
        Just("pi".to_string()),
        // x1 only appears under a periodic wrapper, so any body is a circle map
        (1u32..4).prop_map(|k| format!("cos(2*{k}*pi*x1)")),
        Just("sin(2*pi*x1)".to_string()),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} + {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin(2*pi*({a}))")),
            inner.prop_map(|a| format!("cos(2*pi*({a}))")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_source_round_trips(body in expr()) {
        let src = format!("x1 + 0.1*sin(2*pi*({body})) mod 1");
        let map = parse_map(&src, 1).unwrap();
        let printed = map.source();
        let again = parse_map(&printed, 1).unwrap();
        prop_assert_eq!(map.components(), again.components());
        prop_assert_eq!(again.source(), printed);
    }

    #[test]
    fn modulus_of_continuity_bounds_sampled_pairs(
        x in 0.0f64..1.0,
        h in 0.0f64..0.05,
        amp in 0.0f64..0.3,
    ) {
        let src = format!("x1 + {amp:.4}*sin(4*pi*x1) mod 1");
        let map = parse_map(&src, 1).unwrap();
        let y = (x + h).rem_euclid(1.0);
        let fx = map.eval1(x, 1e-15).unwrap();
        let fy = map.eval1(y, 1e-15).unwrap();
        let d = (fx - fy).rem_euclid(1.0);
        let d = d.min(1.0 - d);
        prop_assert!(d <= map.modulus_of_continuity(h) + 4e-15);
    }

    #[test]
    fn image_lift_encloses_samples(lo in 0.0f64..0.95, w in 0.0f64..0.05, s in 0.0f64..1.0) {
        let map = load_map("sine2:0.2", 1).unwrap();
        let hull = map.image_lift(lo, lo + w, 0.01);
        let x = lo + s * w;
        let fx = map.eval1(x, 1e-15).unwrap();
        // the lift is unreduced, so compare modulo 1
        let k = (hull.lo - fx).ceil();
        let lifted = fx + k;
        prop_assert!(lifted >= hull.lo - 1e-12 && lifted <= hull.hi + 1e-12);
    }
}

#[test]
fn dyadic_rejects_nonfinite_input() {
    assert!(Dyadic::from_f64(f64::NAN).is_none());
}
