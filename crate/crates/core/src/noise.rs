//! Perturbation kernels: uniform noise on an epsilon-ball and the wrapped
//! Gaussian on the circle.

use crate::rng::open_unit;
use crate::torus;
use crate::Error;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{PI, SQRT_2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    UniformBall,
    WrappedGaussian,
}

/// Perturbation kernel `Q_x` together with the constants the certificates
/// need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Ball radius, or standard deviation for the Gaussian.
    pub epsilon: f64,
    pub dim: usize,
    /// `C` with `|d^k K / dx^k| / k! <= C e^(gamma k)`.
    pub analytic_c: Option<f64>,
    pub analytic_gamma: Option<f64>,
    /// Lower and upper bounds on the transition density.
    pub density_min: f64,
    pub density_max: f64,
    /// `1 - density_min` for the Gaussian on the unit circle.
    pub mixing_theta: Option<f64>,
    /// Wrap terms `|k| <= wrap_terms` kept in the Gaussian sum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wrap_terms: Option<i64>,
}

/// Volume of the Euclidean ball of radius `r` in dimension `d`.
pub fn ball_volume(r: f64, d: usize) -> f64 {
    let half = d as f64 / 2.0;
    PI.powf(half) / statrs::function::gamma::gamma(half + 1.0) * r.powi(d as i32)
}

/// Standard normal distribution function.
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn gaussian(u: f64, eps: f64) -> f64 {
    (-(u * u) / (2.0 * eps * eps)).exp() / (eps * (2.0 * PI).sqrt())
}

/// Uniform noise on the ball of radius `epsilon`.
pub fn uniform_kernel(epsilon: f64, dim: usize) -> Result<NoiseModel, Error> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::EpsilonOutOfRange { epsilon, max: 0.5 });
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(NoiseModel {
        kind: NoiseKind::UniformBall,
        epsilon,
        dim,
        analytic_c: None,
        analytic_gamma: None,
        density_min: 0.0,
        density_max: 1.0 / ball_volume(epsilon, dim),
        mixing_theta: None,
        wrap_terms: None,
    })
}

/// Gaussian of standard deviation `epsilon` wrapped onto the circle.
pub fn wrapped_gaussian_kernel(epsilon: f64) -> Result<NoiseModel, Error> {
    if !(epsilon > 0.0 && epsilon <= 0.25) {
        return Err(Error::EpsilonOutOfRange { epsilon, max: 0.25 });
    }
    let terms = ((12.0 * epsilon).ceil() as i64 + 1).max(2);
    let mut m = NoiseModel {
        kind: NoiseKind::WrappedGaussian,
        epsilon,
        dim: 1,
        analytic_c: None,
        analytic_gamma: None,
        density_min: 0.0,
        density_max: 0.0,
        mixing_theta: None,
        wrap_terms: Some(terms),
    };
    let tail = m.wrap_tail();
    // the wrapped density is largest at distance 0 and smallest at 1/2
    let at_center = m.density1(0.0, 0.0);
    let at_antipode = m.density1(0.0, 0.5);
    let fuzz = 1e-13;
    m.density_max = (at_center + tail) * (1.0 + fuzz);
    m.density_min = at_antipode * (1.0 - fuzz);
    m.mixing_theta = Some(1.0 - m.density_min);
    // Cauchy estimate on the strip |Im| <= eps/2: |g(u + iv)| <= g(u) e^(1/8)
    m.analytic_c = Some(m.density_max * (0.125f64).exp() * (1.0 + fuzz));
    m.analytic_gamma = Some((2.0 / epsilon).ln());
    Ok(m)
}

impl NoiseModel {
    /// Bound on the neglected wrap terms of the Gaussian sum.
    pub fn wrap_tail(&self) -> f64 {
        let Some(k) = self.wrap_terms else {
            return 0.0;
        };
        let eps = self.epsilon;
        // terms beyond k sit at distance >= k + 1/2 and decay faster than a
        // geometric series with ratio exp(-(k + 1/2) / eps^2)
        let first = gaussian(k as f64 + 0.5, eps);
        let ratio = (-(k as f64 + 0.5) / (eps * eps)).exp();
        2.0 * first / (1.0 - ratio)
    }

    /// Transition density of moving from `y` to `x` (1-D).
    pub fn density1(&self, y: f64, x: f64) -> f64 {
        let u = torus::displacement(y, x);
        match self.kind {
            NoiseKind::UniformBall => {
                if u.abs() <= self.epsilon {
                    1.0 / (2.0 * self.epsilon)
                } else {
                    0.0
                }
            }
            NoiseKind::WrappedGaussian => {
                let k = self.wrap_terms.unwrap_or(2);
                (-k..=k).map(|j| gaussian(u + j as f64, self.epsilon)).sum()
            }
        }
    }

    /// Transition density on the `d`-torus.
    pub fn density(&self, y: &[f64], x: &[f64]) -> f64 {
        if self.dim == 1 {
            return self.density1(y[0], x[0]);
        }
        match self.kind {
            NoiseKind::UniformBall => {
                if torus::distance_nd(y, x) <= self.epsilon {
                    self.density_max
                } else {
                    0.0
                }
            }
            NoiseKind::WrappedGaussian => unreachable!("gaussian noise is one-dimensional"),
        }
    }

    /// Taylor coefficients of `x' -> K(y, x')` at `x`, scaled by `scale^l`,
    /// for `l = 0..=max_order`.
    ///
    /// With `z = (x - y)/eps` the unscaled coefficients are
    /// `g(x - y) (-1)^l He_l(z) / (eps^l l!)`, summed over the wrap terms,
    /// and follow a three-term recurrence.
    pub fn deriv_coeffs(&self, y: f64, x: f64, max_order: usize, scale: f64) -> Result<Vec<f64>, Error> {
        if self.kind != NoiseKind::WrappedGaussian {
            return Err(Error::UnsupportedKernel);
        }
        let mut out = vec![0.0; max_order + 1];
        self.add_deriv_coeffs(torus::displacement(y, x), scale, 1.0, &mut out);
        Ok(out)
    }

    /// Accumulates `weight` times the scaled coefficients at displacement
    /// `u = x - y` into `out`.
    pub(crate) fn add_deriv_coeffs(&self, u: f64, scale: f64, weight: f64, out: &mut [f64]) {
        let eps = self.epsilon;
        let k = self.wrap_terms.unwrap_or(2);
        let a = scale / eps;
        for j in -k..=k {
            let v = u + j as f64;
            let g = gaussian(v, eps) * weight;
            if g == 0.0 {
                continue;
            }
            let z = v / eps;
            let mut prev = 0.0;
            let mut cur = g;
            out[0] += cur;
            for l in 0..out.len() - 1 {
                let lf = (l + 1) as f64;
                let next = -(z * a / lf) * cur - (a * a / lf) * prev;
                prev = cur;
                cur = next;
                out[l + 1] += cur;
            }
        }
    }

    /// The `l`-th Taylor coefficient of `x' -> K(y, x')` at `x`.
    pub fn kernel_deriv_coeff(&self, y: f64, x: f64, l: usize) -> Result<f64, Error> {
        Ok(self.deriv_coeffs(y, x, l, 1.0)?[l])
    }

    /// Probability that one noise step from `center` lands in the arc
    /// `[lo, hi]` (1-D, `hi - lo <= 1`).
    pub fn arc_probability(&self, center: f64, lo: f64, hi: f64) -> f64 {
        match self.kind {
            NoiseKind::UniformBall => {
                let ball = torus::Arc::centered(center, self.epsilon);
                ball.overlap_length(&torus::Arc::new(lo, hi)) / (2.0 * self.epsilon)
            }
            NoiseKind::WrappedGaussian => {
                // shift so the arc starts within one period after the center
                let a = center + torus::wrap(lo - center);
                let b = a + (hi - lo);
                let k = self.wrap_terms.unwrap_or(2) + 1;
                (-k..=k)
                    .map(|j| {
                        let s = j as f64;
                        std_normal_cdf((b - center + s) / self.epsilon)
                            - std_normal_cdf((a - center + s) / self.epsilon)
                    })
                    .sum()
            }
        }
    }

    /// One noise step around `center` (1-D).
    pub fn sample1<R: RngCore + ?Sized>(&self, center: f64, rng: &mut R) -> f64 {
        let u = open_unit(rng);
        let y = match self.kind {
            NoiseKind::UniformBall => center + self.epsilon * (2.0 * u - 1.0),
            NoiseKind::WrappedGaussian => center - self.epsilon * SQRT_2 * erfc_inv(2.0 * u),
        };
        torus::wrap(y)
    }

    /// One noise step around `center` on the `d`-torus.
    pub fn sample<R: RngCore + ?Sized>(&self, center: &[f64], rng: &mut R) -> Vec<f64> {
        if center.len() == 1 {
            return vec![self.sample1(center[0], rng)];
        }
        // rejection from the enclosing cube
        loop {
            let v: Vec<f64> = center.iter().map(|_| 2.0 * open_unit(rng) - 1.0).collect();
            if v.iter().map(|t| t * t).sum::<f64>() <= 1.0 {
                return center
                    .iter()
                    .zip(&v)
                    .map(|(c, t)| torus::wrap(c + self.epsilon * t))
                    .collect();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn uniform_density_values() {
        let m = uniform_kernel(0.25, 1).unwrap();
        assert_eq!(m.density1(0.5, 0.6), 2.0);
        assert_eq!(m.density1(0.5, 0.8), 0.0);
        assert!(matches!(
            uniform_kernel(0.6, 1),
            Err(Error::EpsilonOutOfRange { .. })
        ));
    }

    #[test]
    fn gaussian_antipode_matches_reference() {
        let m = wrapped_gaussian_kernel(0.1).unwrap();
        // sum_k g_{0.1}(0.5 + k), 60-digit evaluation:
        // 2.9734390294685954...e-5 (only the k = 0, -1 terms matter)
        let reference = 2.973_439_029_468_595_4e-5;
        assert!((m.density1(0.0, 0.5) - reference).abs() < 1e-18);
        assert!(m.density_min <= m.density1(0.3, 0.8));
        assert!((m.mixing_theta.unwrap() - (1.0 - m.density_min)).abs() < 1e-15);
    }

    #[test]
    fn wrap_tail_is_negligible() {
        for eps in [0.01, 0.05, 0.1, 0.2, 0.25] {
            let m = wrapped_gaussian_kernel(eps).unwrap();
            assert!(m.wrap_tail() < 2f64.powi(-60), "eps {eps}: {}", m.wrap_tail());
            assert!(2 * m.wrap_terms.unwrap() + 1 >= 5);
        }
    }

    #[test]
    fn odd_coefficient_vanishes_at_center() {
        let m = wrapped_gaussian_kernel(0.1).unwrap();
        assert!(m.kernel_deriv_coeff(0.3, 0.3, 1).unwrap().abs() < 1e-12);
        let c0 = m.kernel_deriv_coeff(0.0, 0.2, 0).unwrap();
        assert!((c0 - m.density1(0.0, 0.2)).abs() < 1e-15);
    }

    #[test]
    fn second_coefficient_matches_finite_differences() {
        let m = wrapped_gaussian_kernel(0.1).unwrap();
        let h = 1e-4;
        let k = |x: f64| m.density1(0.0, x);
        let fd = (k(0.2 + h) - 2.0 * k(0.2) + k(0.2 - h)) / (h * h) / 2.0;
        let c2 = m.kernel_deriv_coeff(0.0, 0.2, 2).unwrap();
        assert!(((c2 - fd) / c2).abs() < 1e-5, "{c2} vs {fd}");
    }

    #[test]
    fn uniform_has_no_taylor_data() {
        let m = uniform_kernel(0.1, 1).unwrap();
        assert_eq!(m.kernel_deriv_coeff(0.0, 0.1, 0), Err(Error::UnsupportedKernel));
    }

    #[test]
    fn uniform_samples_stay_in_ball() {
        let m = uniform_kernel(0.1, 1).unwrap();
        let mut r = CounterRng::new(3, 0);
        for t in 0..10_000 {
            let y = m.sample1(0.5, r.at(t));
            assert!(torus::distance(y, 0.5) <= 0.1);
        }
    }

    #[test]
    fn seeded_samples_repeat() {
        let m = wrapped_gaussian_kernel(0.1).unwrap();
        let draw = || {
            let mut r = CounterRng::new(42, 0);
            (0..100).map(|t| m.sample1(0.5, r.at(t))).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn gaussian_arc_probabilities_sum_to_one() {
        let m = wrapped_gaussian_kernel(0.2).unwrap();
        let total: f64 = (0..16)
            .map(|i| m.arc_probability(0.9, i as f64 / 16.0, (i + 1) as f64 / 16.0))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(0.25, 1) - 0.5).abs() < 1e-15);
        assert!((ball_volume(0.1, 2) - PI * 0.01).abs() < 1e-15);
    }
}
