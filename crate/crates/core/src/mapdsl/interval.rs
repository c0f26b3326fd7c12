//! Double-precision interval arithmetic with outward rounding.
//!
//! Every operation rounds its endpoints one ulp outward, which is sound
//! because IEEE addition and multiplication are correctly rounded. The
//! transcendental functions add an absolute pad on top of that to absorb
//! the (sub-ulp to few-ulp) error of the platform `sin`/`cos`.

use std::f64::consts::{FRAC_PI_2, PI};

const TRIG_PAD: f64 = 4.0e-16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[inline]
fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "{lo} > {hi}");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Tight enclosure of a real known only to within one rounding.
    pub fn around(x: f64) -> Self {
        Interval {
            lo: down(x),
            hi: up(x),
        }
    }

    pub fn pi() -> Self {
        // f64 PI is below the true value
        Interval {
            lo: PI,
            hi: PI.next_up(),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval {
            lo: down(self.lo + o.lo),
            hi: up(self.hi + o.hi),
        }
    }

    pub fn sub(self, o: Interval) -> Interval {
        Interval {
            lo: down(self.lo - o.hi),
            hi: up(self.hi - o.lo),
        }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(self, o: Interval) -> Interval {
        // exact zero times anything stays exact
        if (self.lo == 0.0 && self.hi == 0.0) || (o.lo == 0.0 && o.hi == 0.0) {
            return Interval::point(0.0);
        }
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let mut lo = p[0];
        let mut hi = p[0];
        for v in &p[1..] {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        Interval {
            lo: down(lo),
            hi: up(hi),
        }
    }

    pub fn scale(self, k: f64) -> Interval {
        self.mul(Interval::point(k))
    }

    pub fn sin(self) -> Interval {
        self.trig(0.0)
    }

    pub fn cos(self) -> Interval {
        // cos x = sin(x + pi/2): shift the critical-point lattice instead of
        // the argument so no rounding is introduced
        self.trig(FRAC_PI_2)
    }

    /// Enclosure of `sin(x + phase)` for phase in {0, pi/2}.
    fn trig(self, phase: f64) -> Interval {
        if !self.is_finite() || self.width() >= 2.0 * PI {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let f = |x: f64| if phase == 0.0 { x.sin() } else { x.cos() };
        let a = f(self.lo);
        let b = f(self.hi);
        let mut lo = a.min(b) - TRIG_PAD;
        let mut hi = a.max(b) + TRIG_PAD;
        // maxima of sin(x + phase) sit at x = pi/2 - phase + 2 pi j, minima
        // half a period later. Membership is tested with slack so a
        // borderline critical point is always counted.
        let slack = 1e-9 * (1.0 + self.mag());
        let hits = |offset: f64| {
            let base = offset - phase;
            let j = ((self.lo - slack - base) / (2.0 * PI)).ceil();
            base + 2.0 * PI * j <= self.hi + slack
        };
        if hits(FRAC_PI_2) {
            hi = 1.0;
        }
        if hits(-FRAC_PI_2) {
            lo = -1.0;
        }
        Interval {
            lo: lo.max(-1.0),
            hi: hi.min(1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_encloses() {
        let a = Interval::new(0.1, 0.2);
        let b = Interval::new(-0.3, 0.4);
        let p = a.mul(b);
        assert!(p.contains(0.1 * -0.3) && p.contains(0.2 * 0.4));
        let s = a.add(b);
        assert!(s.lo < 0.1 + -0.3 && s.hi > 0.2 + 0.4);
    }

    #[test]
    fn sine_extrema() {
        let s = Interval::new(1.0, 2.0).sin();
        assert_eq!(s.hi, 1.0);
        assert!(s.lo <= 1.0f64.sin());
        let c = Interval::new(3.0, 3.3).cos();
        assert_eq!(c.lo, -1.0);
        let n = Interval::new(0.1, 0.2).sin();
        assert!(n.lo <= 0.1f64.sin() && n.hi >= 0.2f64.sin() && n.hi < 0.21);
        assert_eq!(Interval::new(0.0, 7.0).cos(), Interval::new(-1.0, 1.0));
    }

    #[test]
    fn cosine_at_pi_boundary() {
        // the minimum of cos is at pi, which lies inside 4*pi*[1/4 - tiny, 1/4]
        let x = Interval::pi().mul(Interval::point(4.0)).mul(Interval::new(0.2, 0.25));
        assert_eq!(x.cos().lo, -1.0);
    }
}
