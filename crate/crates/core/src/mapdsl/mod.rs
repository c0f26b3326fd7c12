//! Torus endomorphisms given by a small expression language, with certified
//! dyadic evaluation and Lipschitz data.

mod ast;
mod ball;
mod interval;
mod parser;

pub use ast::Expr;
pub use ball::{pi_ball, Ball, Dyadic};
pub use interval::Interval;
pub use parser::parse_decimal;

use crate::torus;
use crate::Error;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Default cap on the working precision of [`MapSpec::eval_map`].
pub const DEFAULT_MAX_PRECISION: u32 = 4096;

/// Subintervals per coordinate used to bound the derivative in 1-D.
const LIPSCHITZ_CELLS_1D: usize = 64;

#[derive(Clone, Debug)]
pub struct MapSpec {
    dim: usize,
    components: Vec<Expr>,
    /// `jacobian[i][j]` is the partial of component `i` in coordinate `j`.
    jacobian: Vec<Vec<Expr>>,
    lipschitz_bound: f64,
    label: String,
    max_precision: u32,
}

/// Parses DSL source into a map of the `dim`-torus.
pub fn parse_map(source: &str, dim: usize) -> Result<MapSpec, Error> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let components = parser::parse_components(source, dim)?;
    MapSpec::from_components(components, dim, source.trim().to_string())
}

/// Resolves a built-in name (`doubling`, `rotation:<a>`, `sine2:<amp>`) or,
/// failing that, parses the text as DSL source.
pub fn load_map(text: &str, dim: usize) -> Result<MapSpec, Error> {
    match builtin_source(text)? {
        Some(src) => {
            if dim != 1 {
                return Err(Error::InvalidArgument(format!(
                    "built-in map '{text}' is one-dimensional"
                )));
            }
            let mut spec = parse_map(&src, 1)?;
            spec.label = text.trim().to_string();
            Ok(spec)
        }
        None => parse_map(text, dim),
    }
}

/// DSL source of a built-in map, or `None` if `name` is not a built-in.
pub fn builtin_source(name: &str) -> Result<Option<String>, Error> {
    let name = name.trim();
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (name, None),
    };
    let param = |what: &str| -> Result<BigRational, Error> {
        arg.and_then(parse_decimal).ok_or_else(|| {
            Error::InvalidArgument(format!("built-in '{head}' needs a decimal {what}"))
        })
    };
    let signed = |q: &BigRational| {
        let s = ast::Expr::Num(q.abs()).to_string();
        if q.is_negative() {
            format!("- {s}")
        } else {
            format!("+ {s}")
        }
    };
    Ok(match head {
        "doubling" if arg.is_none() => Some("2*x1 mod 1".into()),
        "identity" if arg.is_none() => Some("x1 mod 1".into()),
        "rotation" => {
            let a = param("angle")?;
            if a.is_zero() {
                Some("x1 mod 1".into())
            } else {
                Some(format!("x1 {} mod 1", signed(&a)))
            }
        }
        "sine2" => {
            let a = param("amplitude")?;
            Some(format!("x1 {}*sin(4*pi*x1) mod 1", signed(&a)))
        }
        _ => None,
    })
}

impl MapSpec {
    fn from_components(components: Vec<Expr>, dim: usize, label: String) -> Result<MapSpec, Error> {
        let jacobian: Vec<Vec<Expr>> = components
            .iter()
            .map(|c| (0..dim).map(|j| c.derivative(j)).collect())
            .collect();
        let mut spec = MapSpec {
            dim,
            components,
            jacobian,
            lipschitz_bound: 0.0,
            label,
            max_precision: DEFAULT_MAX_PRECISION,
        };
        spec.check_periodic()?;
        spec.lipschitz_bound = spec.bound_derivative()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Certified upper bound on the Lipschitz constant for the torus metric.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn max_precision(&self) -> u32 {
        self.max_precision
    }

    pub fn with_max_precision(mut self, bits: u32) -> Self {
        self.max_precision = bits;
        self
    }

    /// Canonical DSL text of the map.
    pub fn source(&self) -> String {
        self.components
            .iter()
            .map(|c| format!("{c} mod 1"))
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// `m(delta)`, clamped to the torus diameter.
    pub fn modulus_of_continuity(&self, delta: f64) -> f64 {
        (self.lipschitz_bound * delta).next_up().min(torus::diameter(self.dim))
    }

    /// A map of the torus must lift to one whose increments over a unit
    /// translation are integers.
    fn check_periodic(&self) -> Result<(), Error> {
        let bases = [0.0, 0.375, 0.8125];
        for (i, comp) in self.components.iter().enumerate() {
            for j in 0..self.dim {
                for &b in &bases {
                    let x: Vec<Interval> = vec![Interval::point(b); self.dim];
                    let mut x1 = x.clone();
                    x1[j] = Interval::point(b + 1.0);
                    let d = comp.eval_interval(&x1).sub(comp.eval_interval(&x));
                    let k = d.mid().round();
                    if !d.is_finite() || !d.contains(k) || d.width() > 0.25 {
                        return Err(Error::NotPeriodic { component: i + 1 });
                    }
                }
            }
        }
        Ok(())
    }

    fn bound_derivative(&self) -> Result<f64, Error> {
        let cells = if self.dim == 1 {
            LIPSCHITZ_CELLS_1D
        } else {
            ((4096f64).powf(1.0 / self.dim as f64).floor() as usize).clamp(1, LIPSCHITZ_CELLS_1D)
        };
        let total = cells.pow(self.dim as u32);
        let mut best = 0.0f64;
        let mut idx = vec![0usize; self.dim];
        for _ in 0..total {
            let boxv: Vec<Interval> = idx
                .iter()
                .map(|&k| Interval::new(k as f64 / cells as f64, (k + 1) as f64 / cells as f64))
                .collect();
            let norm = if self.dim == 1 {
                self.jacobian[0][0].eval_interval(&boxv).mag()
            } else {
                // Frobenius norm bounds the operator norm
                let mut s = 0.0f64;
                for row in &self.jacobian {
                    for e in row {
                        let m = e.eval_interval(&boxv).mag();
                        s = (s + (m * m).next_up()).next_up();
                    }
                }
                s.sqrt().next_up()
            };
            if !norm.is_finite() {
                return Err(Error::UnboundedDerivative);
            }
            best = best.max(norm);
            for d in 0..self.dim {
                idx[d] += 1;
                if idx[d] < cells {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(best)
    }

    /// Evaluates `f(point)` to within torus distance `2^-tol_bits`.
    ///
    /// The result lies in `[0, 1)^d`. It has at most `tol_bits + 1`
    /// fractional bits unless the enclosure is exact, in which case the
    /// exact value is returned.
    pub fn eval_map(&self, point: &[Dyadic], tol_bits: u32) -> Result<Vec<Dyadic>, Error> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                index: point.len(),
                dim: self.dim,
            });
        }
        let k = tol_bits;
        let mut prec = (2 * k).max(16);
        loop {
            if prec > self.max_precision {
                return Err(Error::PrecisionUnreachable {
                    bits: self.max_precision,
                });
            }
            let xs: Vec<Ball> = point.iter().map(|d| Ball::from_dyadic(d, prec)).collect();
            let outs: Vec<Ball> = self.components.iter().map(|c| c.eval_ball(&xs, prec)).collect();
            if outs.iter().all(|b| b.fits(k)) {
                let shift = (prec - k - 1) as usize;
                let modulus = num_bigint::BigInt::from(1) << (k + 1) as usize;
                return Ok(outs
                    .iter()
                    .map(|b| {
                        if b.r.is_zero() {
                            // exact result: no rounding needed
                            let q = num_integer::Integer::mod_floor(
                                &b.c,
                                &(num_bigint::BigInt::from(1) << prec as usize),
                            );
                            return Dyadic::new(q, -(prec as i64));
                        }
                        let half = num_bigint::BigInt::from(1) << shift.saturating_sub(1);
                        let q = if shift == 0 {
                            b.c.clone()
                        } else {
                            ball::floor_shr(&(&b.c + half), shift)
                        };
                        let q = num_integer::Integer::mod_floor(&q, &modulus);
                        Dyadic::new(q, -((k + 1) as i64))
                    })
                    .collect());
            }
            prec = prec.saturating_mul(2);
        }
    }

    /// Interval image of a box under the lift of `f` (no reduction mod 1).
    pub fn eval_interval(&self, x: &[Interval]) -> Vec<Interval> {
        self.components.iter().map(|c| c.eval_interval(x)).collect()
    }

    /// Fast evaluation of a one-dimensional map to within `tol`, returned
    /// in `[0, 1)`. Falls back to multiprecision when doubles are too coarse.
    pub fn eval1(&self, x: f64, tol: f64) -> Result<f64, Error> {
        let iv = self.components[0].eval_interval(&[Interval::point(x)]);
        if iv.is_finite() && iv.width() <= tol {
            return Ok(torus::wrap(iv.mid()));
        }
        let bits = (-tol.log2()).ceil().max(1.0) as u32;
        let p = Dyadic::from_f64(x).ok_or_else(|| Error::InvalidArgument("non-finite point".into()))?;
        Ok(torus::wrap(self.eval_map(&[p], bits)?[0].to_f64()))
    }

    /// Vector version of [`MapSpec::eval1`].
    pub fn eval_point(&self, x: &[f64], tol: f64) -> Result<Vec<f64>, Error> {
        let xs: Vec<Interval> = x.iter().map(|v| Interval::point(*v)).collect();
        let ivs = self.eval_interval(&xs);
        if ivs.iter().all(|iv| iv.is_finite() && iv.width() <= tol) {
            return Ok(ivs.iter().map(|iv| torus::wrap(iv.mid())).collect());
        }
        let bits = (-tol.log2()).ceil().max(1.0) as u32;
        let pts = x
            .iter()
            .map(|v| Dyadic::from_f64(*v).ok_or_else(|| Error::InvalidArgument("non-finite point".into())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .eval_map(&pts, bits)?
            .iter()
            .map(|d| torus::wrap(d.to_f64()))
            .collect())
    }

    /// Enclosure of the lifted image `F([lo, hi])` of a 1-D arc.
    ///
    /// The arc is cut into pieces no wider than `eta`; each piece is bounded
    /// by the tighter of the natural and mean-value enclosures.
    pub fn image_lift(&self, lo: f64, hi: f64, eta: f64) -> Interval {
        debug_assert_eq!(self.dim, 1);
        let f = &self.components[0];
        let df = &self.jacobian[0][0];
        let width = hi - lo;
        let pieces = ((width / eta).ceil() as usize).clamp(1, 256);
        let step = width / pieces as f64;
        let mut out: Option<Interval> = None;
        for k in 0..pieces {
            let a = if k == 0 { lo } else { lo + step * k as f64 };
            let b = if k + 1 == pieces { hi } else { lo + step * (k + 1) as f64 };
            // a and b carry rounding; widen so consecutive pieces overlap
            let piece = Interval::new(a.next_down(), b.next_up());
            let natural = f.eval_interval(&[piece]);
            let m = piece.mid();
            let fm = f.eval_interval(&[Interval::point(m)]);
            let slope = df.eval_interval(&[piece]);
            let half = Interval::new(piece.lo - m, piece.hi - m).mul(Interval::new(-1.0, 1.0));
            let mvf = fm.add(slope.mul(half));
            let enc = natural.intersect(&mvf).unwrap_or(natural);
            out = Some(match out {
                None => enc,
                Some(o) => o.hull(&enc),
            });
        }
        out.unwrap_or_else(|| Interval::new(f64::NEG_INFINITY, f64::INFINITY))
    }
}

#[cfg(test)]
mod tests;
