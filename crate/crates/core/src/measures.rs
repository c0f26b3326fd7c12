//! Densities on the circle and the distances between them.
//!
//! [`GridDensity`] is piecewise constant on a regular partition and stores
//! atom masses. [`AnalyticDensity`] keeps a Taylor expansion per atom.

use crate::Error;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const MASS_SLACK: f64 = 1e-12;

/// Piecewise-constant density on the regular partition `[i/n, (i+1)/n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    masses: Vec<f64>,
    /// Optional per-atom error half-widths (e.g. a 95% sampling band).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    half_widths: Option<Vec<f64>>,
}

impl GridDensity {
    /// Builds a density from atom masses. Masses must be finite,
    /// nonnegative and sum to at most one.
    pub fn new(masses: Vec<f64>) -> Result<Self, Error> {
        if masses.is_empty() {
            return Err(Error::InvalidArgument("partition has no atoms".into()));
        }
        if let Some(bad) = masses.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidArgument(format!("atom mass {bad} is not a nonnegative number")));
        }
        let total: f64 = masses.iter().sum();
        if total > 1.0 + MASS_SLACK {
            return Err(Error::InvalidArgument(format!("total mass {total} exceeds one")));
        }
        Ok(GridDensity {
            masses,
            half_widths: None,
        })
    }

    pub fn uniform(n: usize) -> Self {
        GridDensity {
            masses: vec![1.0 / n as f64; n],
            half_widths: None,
        }
    }

    /// Unit mass spread over the atom containing `x`.
    pub fn point_mass(n: usize, x: f64) -> Self {
        let mut masses = vec![0.0; n];
        masses[atom_index(n, x)] = 1.0;
        GridDensity {
            masses,
            half_widths: None,
        }
    }

    pub fn with_half_widths(mut self, hw: Vec<f64>) -> Result<Self, Error> {
        if hw.len() != self.masses.len() {
            return Err(Error::PartitionMismatch {
                a: self.masses.len(),
                b: hw.len(),
            });
        }
        self.half_widths = Some(hw);
        Ok(self)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn half_widths(&self) -> Option<&[f64]> {
        self.half_widths.as_deref()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Atom width `1/n`.
    pub fn delta(&self) -> f64 {
        1.0 / self.masses.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn left_endpoint(&self, i: usize) -> f64 {
        i as f64 / self.masses.len() as f64
    }

    /// Density value (mass per unit length) at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.masses.len();
        self.masses[atom_index(n, x)] * n as f64
    }

    /// Same density on a partition `factor` times finer.
    pub fn refine(&self, factor: usize) -> Self {
        let f = factor as f64;
        GridDensity {
            masses: self
                .masses
                .iter()
                .flat_map(|m| std::iter::repeat_n(m / f, factor))
                .collect(),
            half_widths: self.half_widths.as_ref().map(|hw| {
                hw.iter()
                    .flat_map(|h| std::iter::repeat_n(h / f, factor))
                    .collect()
            }),
        }
    }

    /// Merges groups of `factor` neighbouring atoms.
    pub fn coarsen(&self, factor: usize) -> Result<Self, Error> {
        if factor == 0 || self.masses.len() % factor != 0 {
            return Err(Error::PartitionMismatch {
                a: self.masses.len(),
                b: factor,
            });
        }
        Ok(GridDensity {
            masses: self.masses.chunks(factor).map(|c| c.iter().sum()).collect(),
            half_widths: self
                .half_widths
                .as_ref()
                .map(|hw| hw.chunks(factor).map(|c| c.iter().sum()).collect()),
        })
    }

    /// Rescaled to unit mass; a zero density stays zero.
    pub fn normalized(&self) -> Self {
        let t = self.total_mass();
        if t == 0.0 {
            return self.clone();
        }
        GridDensity {
            masses: self.masses.iter().map(|m| m / t).collect(),
            half_widths: self
                .half_widths
                .as_ref()
                .map(|hw| hw.iter().map(|h| h / t).collect()),
        }
    }

    /// `atom_index,left_endpoint,mass` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("atom_index,left_endpoint,mass\n");
        for (i, m) in self.masses.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.16e},{:.16e}", self.left_endpoint(i), m);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, Error> {
        let mut masses = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("atom_index") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidArgument(format!("density csv line {}: malformed", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let idx: usize = fields[0].trim().parse().map_err(|_| bad())?;
            if idx != masses.len() {
                return Err(bad());
            }
            masses.push(fields[2].trim().parse::<f64>().map_err(|_| bad())?);
        }
        GridDensity::new(masses)
    }
}

fn atom_index(n: usize, x: f64) -> usize {
    let i = (crate::torus::wrap(x) * n as f64).floor() as usize;
    i.min(n - 1)
}

/// Breakpoints of the common refinement of two regular partitions, with the
/// two atom indices active on each segment.
fn merged_segments(na: usize, nb: usize) -> impl Iterator<Item = (f64, usize, usize)> {
    let (na_w, nb_w) = (na as u128, nb as u128);
    let scale = (na_w * nb_w) as f64;
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut prev: u128 = 0;
    std::iter::from_fn(move || {
        if ia >= na || ib >= nb {
            return None;
        }
        // right ends of the current atoms, over the common denominator na*nb
        let ea = (ia as u128 + 1) * nb_w;
        let eb = (ib as u128 + 1) * na_w;
        let end = ea.min(eb);
        let seg = ((end - prev) as f64 / scale, ia, ib);
        prev = end;
        if ea == end {
            ia += 1;
        }
        if eb == end {
            ib += 1;
        }
        Some(seg)
    })
}

/// Total variation `sup_A |a(A) - b(A)|`, computed on the common refinement.
///
/// For equal total mass this is half the L1 distance of the densities.
pub fn tv_distance(a: &GridDensity, b: &GridDensity) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let (mut pos, mut neg) = (0.0, 0.0);
    for (len, ia, ib) in merged_segments(na, nb) {
        let d = a.masses[ia] * na as f64 * len - b.masses[ib] * nb as f64 * len;
        if d > 0.0 {
            pos += d;
        } else {
            neg -= d;
        }
    }
    f64::max(pos, neg)
}

/// Wasserstein-1 distance on the circle.
///
/// With `D = F_a - F_b` the difference of distribution functions, the
/// distance is `min_c ∫ |D - c|`, attained at a median of `D`.
pub fn w1_distance(a: &GridDensity, b: &GridDensity) -> Result<f64, Error> {
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > 1e-9 {
        return Err(Error::MassMismatch { a: ma, b: mb });
    }
    let (na, nb) = (a.len(), b.len());
    // knots (segment length, D at left end, D at right end)
    let mut segs = Vec::with_capacity(na + nb);
    let mut d = 0.0;
    for (len, ia, ib) in merged_segments(na, nb) {
        let next = d + (a.masses[ia] * na as f64 - b.masses[ib] * nb as f64) * len;
        segs.push((len, d, next));
        d = next;
    }
    let below = |c: f64| -> f64 {
        segs.iter()
            .map(|&(h, v0, v1)| measure_below(h, v0 - c, v1 - c))
            .sum()
    };
    let (mut lo, mut hi) = segs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| {
        (l.min(s.1).min(s.2), h.max(s.1).max(s.2))
    });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(segs.iter().map(|&(h, v0, v1)| abs_integral(h, v0 - c, v1 - c)).sum())
}

/// Length of the part of a segment where a linear function is negative.
fn measure_below(h: f64, v0: f64, v1: f64) -> f64 {
    match (v0 < 0.0, v1 < 0.0) {
        (true, true) => h,
        (false, false) => 0.0,
        (true, false) => h * (-v0) / (v1 - v0),
        (false, true) => h * (-v1) / (v0 - v1),
    }
}

/// `∫ |L|` over a segment of length `h` where `L` is linear from `v0` to `v1`.
fn abs_integral(h: f64, v0: f64, v1: f64) -> f64 {
    if (v0 >= 0.0) == (v1 >= 0.0) {
        0.5 * h * (v0.abs() + v1.abs())
    } else {
        0.5 * h * (v0 * v0 + v1 * v1) / (v0.abs() + v1.abs())
    }
}

/// Density given on each atom of a regular partition by a Taylor polynomial
/// around the atom center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "AnalyticJson", try_from = "AnalyticJson")]
pub struct AnalyticDensity {
    coeffs: Vec<Vec<f64>>,
    bound_c: f64,
    bound_gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    center: f64,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AnalyticJson {
    atoms: Vec<AtomJson>,
    #[serde(rename = "C")]
    c: f64,
    gamma: f64,
}

impl From<AnalyticDensity> for AnalyticJson {
    fn from(d: AnalyticDensity) -> Self {
        let n = d.coeffs.len();
        AnalyticJson {
            atoms: d
                .coeffs
                .into_iter()
                .enumerate()
                .map(|(i, coeffs)| AtomJson {
                    center: (i as f64 + 0.5) / n as f64,
                    coeffs,
                })
                .collect(),
            c: d.bound_c,
            gamma: d.bound_gamma,
        }
    }
}

impl TryFrom<AnalyticJson> for AnalyticDensity {
    type Error = Error;
    fn try_from(j: AnalyticJson) -> Result<Self, Error> {
        let n = j.atoms.len();
        for (i, a) in j.atoms.iter().enumerate() {
            let expect = (i as f64 + 0.5) / n as f64;
            if (a.center - expect).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "atom {i} center {} does not match a regular partition",
                    a.center
                )));
            }
        }
        AnalyticDensity::new(j.atoms.into_iter().map(|a| a.coeffs).collect(), j.c, j.gamma)
    }
}

impl AnalyticDensity {
    /// `coeffs[i][k]` multiplies `(x - x_i)^k` on atom `i`. All atoms must
    /// carry the same order, and `e^gamma / n < 1`.
    pub fn new(coeffs: Vec<Vec<f64>>, bound_c: f64, bound_gamma: f64) -> Result<Self, Error> {
        let Some(first) = coeffs.first() else {
            return Err(Error::InvalidArgument("partition has no atoms".into()));
        };
        if first.is_empty() || coeffs.iter().any(|c| c.len() != first.len()) {
            return Err(Error::InvalidArgument("coefficient vectors must share one nonzero length".into()));
        }
        let r = bound_gamma.exp() / coeffs.len() as f64;
        if !(r < 1.0) {
            return Err(Error::ContractionViolated(format!("e^gamma * diam = {r}")));
        }
        Ok(AnalyticDensity {
            coeffs,
            bound_c,
            bound_gamma,
        })
    }

    /// Constant density `value` on `n` atoms, stored to order `order`.
    pub fn constant(n: usize, order: usize, value: f64, bound_c: f64, bound_gamma: f64) -> Result<Self, Error> {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        AnalyticDensity::new(vec![c; n], bound_c, bound_gamma)
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn num_atoms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn order(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn bound_c(&self) -> f64 {
        self.bound_c
    }

    pub fn bound_gamma(&self) -> f64 {
        self.bound_gamma
    }

    pub fn diam(&self) -> f64 {
        1.0 / self.coeffs.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.diam()
    }

    /// Value at `x` together with the bound on the neglected Taylor tail.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.coeffs.len();
        let i = atom_index(n, x);
        let u = crate::torus::wrap(x) - self.center(i);
        let c = &self.coeffs[i];
        let value = c.iter().rev().fold(0.0, |acc, a| acc * u + a);
        let r = self.bound_gamma.exp() * u.abs();
        let tail = if u == 0.0 {
            0.0
        } else {
            self.bound_c * r.powi(c.len() as i32) / (1.0 - r)
        };
        (value, tail)
    }

    /// Coefficients above `order` dropped (zero-padded when `order` exceeds
    /// the stored order).
    pub fn truncated(&self, order: usize) -> Self {
        AnalyticDensity {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| (0..=order).map(|k| c.get(k).copied().unwrap_or(0.0)).collect())
                .collect(),
            bound_c: self.bound_c,
            bound_gamma: self.bound_gamma,
        }
    }

    /// Coefficients outside `C e^(gamma k) (1 + slack)`, as `(atom, k)`.
    pub fn envelope_violations(&self, slack: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            for (k, a) in c.iter().enumerate() {
                let env = self.bound_c * (self.bound_gamma * k as f64).exp() * (1.0 + slack);
                if !(a.abs() <= env) {
                    out.push((i, k));
                }
            }
        }
        out
    }

    /// Exact integral of the stored polynomials over the circle.
    pub fn integral(&self) -> f64 {
        let h = 0.5 * self.diam();
        self.coeffs
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .step_by(2)
                    .map(|(k, a)| a * 2.0 * h.powi(k as i32 + 1) / (k as f64 + 1.0))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Masses of `sub` equal pieces of every atom, integrated exactly.
    /// Negative pieces (possible only through rounding) are clamped to zero.
    pub fn to_grid(&self, sub: usize) -> Result<GridDensity, Error> {
        let h = self.diam() / sub as f64;
        let half = 0.5 * self.diam();
        let mut masses = Vec::with_capacity(self.coeffs.len() * sub);
        for c in &self.coeffs {
            for s in 0..sub {
                let a = -half + s as f64 * h;
                let b = a + h;
                // antiderivative sum a_k u^(k+1)/(k+1)
                let prim = |u: f64| {
                    c.iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (k, ak)| acc * u + ak / (k as f64 + 1.0))
                        * u
                };
                masses.push((prim(b) - prim(a)).max(0.0));
            }
        }
        let total: f64 = masses.iter().sum();
        if total > 1.0 {
            for m in &mut masses {
                *m /= total;
            }
        }
        GridDensity::new(masses)
    }

    /// `self + w * other`, both on the same partition and order.
    pub fn axpy(&self, w: f64, other: &AnalyticDensity) -> Result<Self, Error> {
        if self.coeffs.len() != other.coeffs.len() || self.order() != other.order() {
            return Err(Error::PartitionMismatch {
                a: self.coeffs.len(),
                b: other.coeffs.len(),
            });
        }
        Ok(AnalyticDensity {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + w * q).collect())
                .collect(),
            bound_c: self.bound_c,
            bound_gamma: self.bound_gamma,
        })
    }

    pub fn scaled(&self, w: f64) -> Self {
        AnalyticDensity {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().map(|a| a * w).collect())
                .collect(),
            bound_c: self.bound_c,
            bound_gamma: self.bound_gamma,
        }
    }
}
