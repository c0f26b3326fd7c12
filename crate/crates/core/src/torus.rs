//! Geometry of the flat torus `[0,1)^d` with the wrap-around metric.

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // x - floor(x) can round up to exactly 1.0 for tiny negative x
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed displacement `y - x` reduced to `[-1/2, 1/2)`.
#[inline]
pub fn displacement(x: f64, y: f64) -> f64 {
    let d = wrap(y - x);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Circle distance between two points, in `[0, 1/2]`.
#[inline]
pub fn distance(x: f64, y: f64) -> f64 {
    let d = wrap(y - x);
    d.min(1.0 - d)
}

/// Euclidean wrap-around distance on the `d`-torus.
pub fn distance_nd(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = distance(*a, *b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Largest distance between two points of the `d`-torus.
pub fn diameter(dim: usize) -> f64 {
    0.5 * (dim as f64).sqrt()
}

/// A closed arc of the circle described by a lift `[lo, hi]` with `hi - lo < 1`.
///
/// The lift is not normalized: `lo` may be negative or exceed one. All
/// predicates compare modulo one.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Arc {
    pub lo: f64,
    pub hi: f64,
}

impl Arc {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(hi >= lo);
        Arc { lo, hi }
    }

    pub fn centered(center: f64, radius: f64) -> Self {
        Arc {
            lo: center - radius,
            hi: center + radius,
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_full(&self) -> bool {
        self.length() >= 1.0
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Arc grown by `r` on both sides.
    pub fn fattened(&self, r: f64) -> Arc {
        Arc {
            lo: self.lo - r,
            hi: self.hi + r,
        }
    }

    /// Whether `x` lies in the closed arc.
    pub fn contains_point(&self, x: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let off = wrap(x - self.lo);
        off <= self.length()
    }

    /// Whether `other` lies inside `self`, both as closed arcs.
    pub fn contains_arc(&self, other: &Arc) -> bool {
        if self.is_full() {
            return true;
        }
        if other.is_full() {
            return false;
        }
        let start = wrap(other.lo - self.lo);
        start + other.length() <= self.length()
    }

    /// Whether `other` lies strictly inside the open arc `self`.
    pub fn contains_arc_strictly(&self, other: &Arc) -> bool {
        if self.is_full() {
            return true;
        }
        if other.is_full() {
            return false;
        }
        let start = wrap(other.lo - self.lo);
        start > 0.0 && start + other.length() < self.length()
    }

    /// Whether the closed arcs share at least one point.
    pub fn intersects(&self, other: &Arc) -> bool {
        if self.is_full() || other.is_full() {
            return true;
        }
        if self.length() + other.length() >= 1.0 {
            // two arcs whose lengths sum past the circumference always meet
            return true;
        }
        let start = wrap(other.lo - self.lo);
        start <= self.length() || start + other.length() >= 1.0
    }

    /// Length of the intersection of two arcs (each shorter than the circle).
    pub fn overlap_length(&self, other: &Arc) -> f64 {
        if self.is_full() {
            return other.length().min(1.0);
        }
        if other.is_full() {
            return self.length();
        }
        // unwrap `other` to the copies nearest to `self` and add the overlaps
        let base = other.lo - (other.lo - self.lo).floor();
        let mut total = 0.0;
        for shift in [-1.0, 0.0, 1.0] {
            let lo = (base + shift).max(self.lo);
            let hi = (base + shift + other.length()).min(self.hi);
            if hi > lo {
                total += hi - lo;
            }
        }
        total
    }

    /// Smallest arc containing both arcs, assuming they overlap or touch.
    ///
    /// `other` is translated by an integer so that its midpoint is nearest
    /// to the midpoint of `self`.
    pub fn hull(&self, other: &Arc) -> Arc {
        let shift = (self.midpoint() - other.midpoint()).round();
        Arc {
            lo: self.lo.min(other.lo + shift),
            hi: self.hi.max(other.hi + shift),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_distance() {
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.25), 0.75);
        assert_eq!(wrap(-1e-300), 0.0);
        assert!((distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert!((displacement(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert!((displacement(0.05, 0.95) + 0.1).abs() < 1e-15);
        assert_eq!(distance(0.0, 0.5), 0.5);
    }

    #[test]
    fn arc_predicates_across_zero() {
        let a = Arc::new(-0.1, 0.1);
        assert!(a.contains_point(0.95));
        assert!(!a.contains_point(0.5));
        assert!(a.contains_arc(&Arc::new(0.92, 0.98)));
        assert!(!a.contains_arc(&Arc::new(0.85, 0.95)));
        assert!(a.intersects(&Arc::new(0.85, 0.95)));
        assert!(!a.intersects(&Arc::new(0.2, 0.3)));
        assert!((a.overlap_length(&Arc::new(0.85, 0.95)) - 0.05).abs() < 1e-15);
        assert!((a.overlap_length(&Arc::new(0.05, 0.3)) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn hull_unwraps() {
        let h = Arc::new(0.9, 0.98).hull(&Arc::new(0.01, 0.05));
        assert!((h.lo - 0.9).abs() < 1e-15 && (h.hi - 1.05).abs() < 1e-15);
    }
}
