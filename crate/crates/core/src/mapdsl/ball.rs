//! Multiprecision midpoint-radius arithmetic on fixed-point dyadics.
//!
//! A [`Ball`] at precision `p` is the set `[c - r, c + r] * 2^-p` with integer
//! `c` and nonnegative integer `r`. Every operation returns a ball that
//! contains the exact result for all inputs drawn from its argument balls.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

/// Exact dyadic rational `mantissa * 2^exponent`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dyadic {
    #[serde(with = "bigint_str")]
    pub mantissa: BigInt,
    pub exponent: i64,
}

mod bigint_str {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        Dyadic { mantissa, exponent }.normalized()
    }

    /// Every finite double is a dyadic; this conversion is exact.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Dyadic::new(BigInt::zero(), 0));
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if exp_bits == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp_bits - 1075)
        };
        Some(Dyadic::new(BigInt::from(sign) * BigInt::from(m), e))
    }

    fn normalized(mut self) -> Self {
        if self.mantissa.is_zero() {
            self.exponent = 0;
            return self;
        }
        let tz = self.mantissa.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mantissa >>= tz;
            self.exponent += tz as i64;
        }
        self
    }

    /// Nearest double (ties to even through `BigRational`'s conversion).
    pub fn to_f64(&self) -> f64 {
        let m = self.mantissa.to_f64().unwrap_or(f64::NAN);
        if self.mantissa.bits() <= 53 {
            return m * 2f64.powi(self.exponent.clamp(-1100, 1100) as i32);
        }
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as usize)
        } else {
            BigRational::new(
                self.mantissa.clone(),
                BigInt::one() << (-self.exponent) as usize,
            )
        }
    }

    /// Number of significant mantissa bits.
    pub fn bits(&self) -> u64 {
        self.mantissa.bits()
    }

    /// Scaled to a fixed-point integer at precision `p` with floor rounding;
    /// the second value reports whether rounding was needed.
    pub(crate) fn to_fixed(&self, p: u32) -> (BigInt, bool) {
        let shift = self.exponent + p as i64;
        if shift >= 0 {
            (&self.mantissa << shift as usize, false)
        } else {
            let s = (-shift) as usize;
            let q = floor_shr(&self.mantissa, s);
            let exact = (&q << s) == self.mantissa;
            (q, !exact)
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mantissa, self.exponent)
    }
}

/// `floor(x / 2^s)` for signed `x`.
pub(crate) fn floor_shr(x: &BigInt, s: usize) -> BigInt {
    // Shr on BigInt rounds toward negative infinity
    x >> s
}

/// `ceil(x / 2^s)` for signed `x`.
pub(crate) fn ceil_shr(x: &BigInt, s: usize) -> BigInt {
    -floor_shr(&-x, s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub c: BigInt,
    pub r: BigInt,
    pub prec: u32,
}

impl Ball {
    pub fn exact(c: BigInt, prec: u32) -> Self {
        Ball {
            c,
            r: BigInt::zero(),
            prec,
        }
    }

    pub fn zero(prec: u32) -> Self {
        Ball::exact(BigInt::zero(), prec)
    }

    pub fn from_dyadic(d: &Dyadic, prec: u32) -> Self {
        let (c, rounded) = d.to_fixed(prec);
        Ball {
            c,
            r: if rounded { BigInt::one() } else { BigInt::zero() },
            prec,
        }
    }

    pub fn from_rational(q: &BigRational, prec: u32) -> Self {
        let num = q.numer() << prec as usize;
        let (c, rem) = num.div_mod_floor(q.denom());
        Ball {
            c,
            r: if rem.is_zero() { BigInt::zero() } else { BigInt::one() },
            prec,
        }
    }

    pub fn pi(prec: u32) -> Self {
        pi_ball(prec)
    }

    /// Radius in units of `2^-prec` as a double, rounded up.
    pub fn radius_f64(&self) -> f64 {
        let v = self.r.to_f64().unwrap_or(f64::INFINITY);
        (v * 2f64.powi(-(self.prec as i32))).next_up()
    }

    pub fn mid_f64(&self) -> f64 {
        Dyadic::new(self.c.clone(), -(self.prec as i64)).to_f64()
    }

    pub fn add(&self, o: &Ball) -> Ball {
        debug_assert_eq!(self.prec, o.prec);
        Ball {
            c: &self.c + &o.c,
            r: &self.r + &o.r,
            prec: self.prec,
        }
    }

    pub fn sub(&self, o: &Ball) -> Ball {
        debug_assert_eq!(self.prec, o.prec);
        Ball {
            c: &self.c - &o.c,
            r: &self.r + &o.r,
            prec: self.prec,
        }
    }

    pub fn neg(&self) -> Ball {
        Ball {
            c: -&self.c,
            r: self.r.clone(),
            prec: self.prec,
        }
    }

    pub fn mul(&self, o: &Ball) -> Ball {
        debug_assert_eq!(self.prec, o.prec);
        let p = self.prec as usize;
        let prod = &self.c * &o.c;
        let c = floor_shr(&prod, p);
        let exact = (&c << p) == prod;
        // |x y - c1 c2| <= |c1| r2 + |c2| r1 + r1 r2 in units of 2^-2p
        let spread = self.c.abs() * &o.r + o.c.abs() * &self.r + &self.r * &o.r;
        let mut r = ceil_shr(&spread, p);
        if !exact {
            r += 1;
        }
        Ball {
            c,
            r,
            prec: self.prec,
        }
    }

    pub fn sin(&self) -> Ball {
        self.trig(false)
    }

    pub fn cos(&self) -> Ball {
        self.trig(true)
    }

    fn trig(&self, cosine: bool) -> Ball {
        let p = self.prec;
        let (v, err) = sin_cos_fixed(&self.c, p, cosine);
        // sin and cos are 1-Lipschitz
        let r = &self.r + err;
        let one = BigInt::one() << p as usize;
        // the result can never leave [-1, 1]
        if r > one {
            return Ball { c: BigInt::zero(), r: one, prec: p };
        }
        Ball { c: v, r, prec: p }
    }
}

const GUARD: u32 = 40;

/// Fixed-point `sin(x)` or `cos(x)` for exact `x = c * 2^-p`, returned with an
/// error bound in units of `2^-p`.
fn sin_cos_fixed(c: &BigInt, p: u32, cosine: bool) -> (BigInt, BigInt) {
    let w = p + GUARD;
    let ws = w as usize;
    let x = c << GUARD as usize;
    let pi = pi_ball(w);
    // pi/2 as a ball at precision w
    let half_c = floor_shr(&pi.c, 1);
    let half_r = &pi.r + 1;
    // k = round(x / (pi/2)); any k is valid, this one keeps |m| <= pi/4 + tiny
    let k = ((&x << 1usize) + &half_c).div_floor(&(&half_c << 1usize));
    let m = &x - &k * &half_c;
    // uncertainty of the reduced argument, in ulps at w
    let m_err = k.abs() * &half_r;
    let quadrant = k.mod_floor(&BigInt::from(4)).to_u32().unwrap_or(0);
    let quadrant = if cosine { (quadrant + 1) % 4 } else { quadrant };
    let (series_cos, negate) = match quadrant {
        0 => (false, false),
        1 => (true, false),
        2 => (false, true),
        _ => (true, true),
    };
    let m2 = floor_shr(&(&m * &m), ws);
    let mut term = if series_cos {
        BigInt::one() << ws
    } else {
        m.clone()
    };
    let mut sum = term.clone();
    let mut j: u64 = 0;
    let mut n_terms: u64 = 1;
    loop {
        let (a, b) = if series_cos {
            (2 * j + 1, 2 * j + 2)
        } else {
            (2 * j + 2, 2 * j + 3)
        };
        let t = floor_shr(&(&term * &m2), ws);
        term = -t.div_floor(&BigInt::from(a * b));
        if term.is_zero() {
            break;
        }
        sum += &term;
        n_terms += 1;
        j += 1;
        if n_terms > 100_000 {
            break;
        }
    }
    // each term carries at most a few ulps of rounding which the later
    // terms shrink; the alternating tail is bounded by the last term
    let series_err = BigInt::from(4 * n_terms + 8) + term.abs() * 2;
    let total_err_w = series_err + m_err;
    let v = if negate { -sum } else { sum };
    let out = floor_shr(&v, GUARD as usize);
    let err = ceil_shr(&total_err_w, GUARD as usize) + 1;
    (out, err)
}

fn pi_cache() -> &'static Mutex<HashMap<u32, Ball>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Ball>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Rigorous enclosure of pi via Machin's formula.
pub fn pi_ball(prec: u32) -> Ball {
    if let Some(b) = pi_cache().lock().ok().and_then(|m| m.get(&prec).cloned()) {
        return b;
    }
    let w = prec + 48;
    let (a5, e5) = atan_inv(5, w);
    let (a239, e239) = atan_inv(239, w);
    let v: BigInt = a5 * 16 - a239 * 4;
    let err: BigInt = e5 * 16 + e239 * 4;
    let c = floor_shr(&v, 48);
    let r = ceil_shr(&err, 48) + 1;
    let b = Ball { c, r, prec };
    if let Ok(mut m) = pi_cache().lock() {
        m.insert(prec, b.clone());
    }
    b
}

/// `atan(1/x)` at fixed precision `w` with its error bound in ulps.
fn atan_inv(x: u64, w: u32) -> (BigInt, BigInt) {
    let x2 = BigInt::from(x * x);
    let mut power = (BigInt::one() << w as usize).div_floor(&BigInt::from(x));
    let mut sum = power.clone();
    let mut k: u64 = 0;
    let mut n: u64 = 1;
    loop {
        power = power.div_floor(&x2);
        k += 1;
        let term = power.div_floor(&BigInt::from(2 * k + 1));
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        n += 1;
    }
    // floor errors: at most one ulp in each power (decaying) and one per
    // term division, plus the unsummed tail (< 1 ulp once a term is zero)
    (sum, BigInt::from(2 * n + 2))
}

impl Ball {
    /// True if the ball lies within distance `2^-tol_bits` once rounded to a
    /// `tol_bits + 1` bit dyadic.
    pub(crate) fn fits(&self, tol_bits: u32) -> bool {
        // need r * 2^-p <= 2^-(k+1)
        let k = tol_bits as i64;
        let p = self.prec as i64;
        if p < k + 1 {
            return false;
        }
        let limit = BigInt::one() << (p - k - 1) as usize;
        self.r <= limit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_floor_negative_values() {
        assert_eq!(floor_shr(&BigInt::from(-5), 1), BigInt::from(-3));
        assert_eq!(ceil_shr(&BigInt::from(-5), 1), BigInt::from(-2));
        assert_eq!(ceil_shr(&BigInt::from(5), 1), BigInt::from(3));
    }

    #[test]
    fn pi_matches_known_digits() {
        let b = pi_ball(150);
        // pi = 3.14159265358979323846264338327950288419716939937510...
        let digits = "314159265358979323846264338327950288419716939937510";
        let exact = BigRational::new(
            digits.parse::<BigInt>().unwrap(),
            BigInt::from(10).pow(50),
        );
        let scaled = (exact * BigRational::from_integer(BigInt::one() << 150usize))
            .floor()
            .to_integer();
        assert!((&scaled - &b.c).abs() <= &b.r + 1);
        assert!(b.r < BigInt::from(1000));
    }

    #[test]
    fn sine_of_one() {
        let p = 120;
        let x = Ball::exact(BigInt::one() << p as usize, p);
        let s = x.sin();
        // sin(1) = 0.8414709848078965066525023216302989996225630607983710656727517
        assert!((s.mid_f64() - 0.841_470_984_807_896_5).abs() < 1e-15);
        assert!(s.radius_f64() < 1e-30);
        let c = x.cos();
        assert!((c.mid_f64() - 0.540_302_305_868_139_8).abs() < 1e-15);
    }

    #[test]
    fn dyadic_roundtrip() {
        for x in [0.0, 0.3, -1.5e-7, 0.71875, 1e300] {
            assert_eq!(Dyadic::from_f64(x).unwrap().to_f64(), x);
        }
    }
}
