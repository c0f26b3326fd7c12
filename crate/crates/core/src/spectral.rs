//! Transfer operator on piecewise Taylor coefficients for wrapped Gaussian
//! noise, its truncation, and the invariant density it yields.
//!
//! Coefficients are stored internally in a scaled basis: on atom `a` with
//! center `x_a` and half-width `s` the density is `Σ_k c_k u^k` with
//! `u = (x - x_a)/s`, so `c_k = ρ_k s^k`. Every row of the operator then
//! has entries of comparable size and `Σ_k |c_k|` bounds the sup norm.

use crate::mapdsl::MapSpec;
use crate::measures::AnalyticDensity;
use crate::noise::{NoiseKind, NoiseModel};
use crate::torus;
use crate::Error;
use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

/// Tolerance for evaluating the map at quadrature nodes.
const MAP_TOL: f64 = 1e-14;
/// Entry accuracy that double precision reliably reaches.
pub const QUAD_FLOOR: f64 = 1e-15;
const MAX_PANELS: usize = 64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_q
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if q == 1 { x } else { p1 };
            let pm1 = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        // the middle node is exactly zero
        let m = q / 2;
        nodes[m] = 0.0;
    }
    (nodes, weights)
}

/// Composite rule with `panels` equal panels of `q` nodes on `[-1, 1]`.
fn composite_rule(q: usize, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(q);
    let h = 1.0 / panels as f64;
    let mut nodes = Vec::with_capacity(q * panels);
    let mut weights = Vec::with_capacity(q * panels);
    for p in 0..panels {
        let mid = -1.0 + (2 * p + 1) as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + h * xi);
            weights.push(h * wi);
        }
    }
    (nodes, weights)
}

/// Truncated transfer operator `P_N` on a regular partition.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    num_atoms: usize,
    order: usize,
    /// Block matrix in the scaled basis; row `i(N+1) + l`, column
    /// `j(N+1) + m`.
    matrix: Array2<f64>,
    quad_tol: f64,
    /// Largest estimated entry error (scaled basis).
    entry_error: f64,
    /// Estimated sup-norm error of one application to a density inside
    /// the coefficient envelope.
    step_error: f64,
    pub c: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Noise constants `(C, γ, θ)` of a wrapped Gaussian.
///
/// `C` serves both the coefficient envelope and the mixing estimate
/// `‖μP^t - νP^t‖_∞ ≤ c₊ θ^(t-1)`, so it is the larger of the analytic
/// constant and `c₊/θ`.
pub fn noise_constants(noise: &NoiseModel) -> Result<(f64, f64, f64), Error> {
    if noise.kind != NoiseKind::WrappedGaussian {
        return Err(Error::UnsupportedKernel);
    }
    let (Some(ca), Some(gamma), Some(theta)) = (noise.analytic_c, noise.analytic_gamma, noise.mixing_theta) else {
        return Err(Error::UnsupportedKernel);
    };
    Ok((ca.max(noise.density_max / theta), gamma, theta))
}

/// Smallest power-of-two partition with `e^γ diam ≤ 1/2`.
pub fn default_num_atoms(gamma: f64) -> usize {
    ((2.0 * gamma.exp()).ceil() as usize).next_power_of_two()
}

/// Builds `P_N` by composite Gauss–Legendre quadrature.
///
/// The entry for blocks `(i, j)` and orders `(l, m)` is
/// `∫_{a_j} (y - x_j)^m ∂₂^l K(f(y), x_i) / l! dy`. Each column of blocks
/// is refined by doubling the panel count until two successive rules agree
/// to `quad_tol` on every entry.
pub fn build_spectral(
    system: &MapSpec,
    noise: &NoiseModel,
    num_atoms: usize,
    order: usize,
    quad_tol: f64,
) -> Result<SpectralOperator, Error> {
    let (c, gamma, theta) = noise_constants(noise)?;
    if system.dim() != 1 {
        return Err(Error::InvalidArgument("the spectral method is one-dimensional".into()));
    }
    if num_atoms == 0 {
        return Err(Error::InvalidArgument("partition has no atoms".into()));
    }
    let ratio = gamma.exp() / num_atoms as f64;
    if !(ratio < 1.0) {
        return Err(Error::GammaTooLarge { value: ratio });
    }
    if !(quad_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("quadrature tolerance {quad_tol} must be positive")));
    }
    let n = num_atoms;
    let k1 = order + 1;
    let s = 0.5 / n as f64;
    let q = order / 2 + 12;
    // envelope of the scaled coefficients of an admissible density
    let env: Vec<f64> = (0..k1).map(|m| c * (gamma.exp() * s).powi(m as i32)).collect();

    let columns: Vec<Result<(Vec<Array2<f64>>, f64, Vec<f64>), Error>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let xj = (j as f64 + 0.5) / n as f64;
            let rule = |panels: usize| -> Result<Vec<Array2<f64>>, Error> {
                let (tau, w) = composite_rule(q, panels);
                let fy = tau
                    .iter()
                    .map(|t| system.eval1(torus::wrap(xj + s * t), MAP_TOL))
                    .collect::<Result<Vec<_>, _>>()?;
                let nq = tau.len();
                let mut mono = Array2::<f64>::zeros((nq, k1));
                for (r, t) in tau.iter().enumerate() {
                    let mut p = 1.0;
                    for m in 0..k1 {
                        mono[[r, m]] = p;
                        p *= t;
                    }
                }
                let mut blocks = Vec::with_capacity(n);
                let mut d = Array2::<f64>::zeros((k1, nq));
                let mut col = vec![0.0; k1];
                for i in 0..n {
                    let xi = (i as f64 + 0.5) / n as f64;
                    for r in 0..nq {
                        col.iter_mut().for_each(|v| *v = 0.0);
                        noise.add_deriv_coeffs(torus::displacement(fy[r], xi), s, s * w[r], &mut col);
                        for l in 0..k1 {
                            d[[l, r]] = col[l];
                        }
                    }
                    blocks.push(d.dot(&mono));
                }
                Ok(blocks)
            };
            let mut panels = 1;
            let mut coarse = rule(panels)?;
            loop {
                panels *= 2;
                let fine = rule(panels)?;
                let mut worst = 0.0f64;
                let mut row_err = vec![0.0; n];
                for (i, (a, b)) in coarse.iter().zip(&fine).enumerate() {
                    for l in 0..k1 {
                        for m in 0..k1 {
                            let e = (a[[l, m]] - b[[l, m]]).abs();
                            worst = worst.max(e);
                            row_err[i] += e * env[m];
                        }
                    }
                }
                if worst <= quad_tol {
                    return Ok((fine, worst, row_err));
                }
                if panels >= MAX_PANELS {
                    return Err(Error::QuadratureFailure {
                        tol: quad_tol,
                        achieved: worst,
                    });
                }
                coarse = fine;
            }
        })
        .collect();

    let dim = n * k1;
    let mut matrix = Array2::<f64>::zeros((dim, dim));
    let mut entry_error = 0.0f64;
    let mut row_errors = vec![0.0; n];
    for (j, col) in columns.into_iter().enumerate() {
        let (blocks, worst, row_err) = col?;
        entry_error = entry_error.max(worst);
        for (i, b) in blocks.into_iter().enumerate() {
            matrix
                .slice_mut(ndarray::s![i * k1..(i + 1) * k1, j * k1..(j + 1) * k1])
                .assign(&b);
            row_errors[i] += row_err[i];
        }
    }
    let step_error = row_errors.into_iter().fold(0.0, f64::max);
    Ok(SpectralOperator {
        num_atoms: n,
        order,
        matrix,
        quad_tol,
        entry_error,
        step_error,
        c,
        gamma,
        theta,
    })
}

impl SpectralOperator {
    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn diam(&self) -> f64 {
        1.0 / self.num_atoms as f64
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// Largest difference between the two finest quadrature rules.
    pub fn entry_error(&self) -> f64 {
        self.entry_error
    }

    /// Estimated sup-norm error of one application caused by quadrature.
    pub fn step_error(&self) -> f64 {
        self.step_error
    }

    /// `e^γ diam ζ`.
    pub fn ratio(&self) -> f64 {
        self.gamma.exp() * self.diam()
    }

    fn half_width(&self) -> f64 {
        0.5 * self.diam()
    }

    /// Matrix element `P^{(a_i, a_j)}(l, m)` in the unscaled basis.
    pub fn entry(&self, i: usize, j: usize, l: usize, m: usize) -> f64 {
        let k1 = self.order + 1;
        let s = self.half_width();
        self.matrix[[i * k1 + l, j * k1 + m]] * s.powi(m as i32) / s.powi(l as i32)
    }

    /// Coefficients of `rho` truncated to this order, in the scaled basis.
    fn to_scaled(&self, rho: &AnalyticDensity) -> Result<Array1<f64>, Error> {
        if rho.num_atoms() != self.num_atoms {
            return Err(Error::PartitionMismatch {
                a: self.num_atoms,
                b: rho.num_atoms(),
            });
        }
        let k1 = self.order + 1;
        let s = self.half_width();
        let mut v = Array1::zeros(self.num_atoms * k1);
        for (i, c) in rho.coeffs().iter().enumerate() {
            for (k, a) in c.iter().take(k1).enumerate() {
                v[i * k1 + k] = a * s.powi(k as i32);
            }
        }
        Ok(v)
    }

    fn density_from_scaled(&self, v: ArrayView1<f64>) -> Result<AnalyticDensity, Error> {
        let k1 = self.order + 1;
        let s = self.half_width();
        let coeffs = (0..self.num_atoms)
            .map(|i| (0..k1).map(|k| v[i * k1 + k] / s.powi(k as i32)).collect())
            .collect();
        AnalyticDensity::new(coeffs, self.c, self.gamma)
    }

    /// One application of `P_N = Π_N P Π_N`.
    pub fn apply(&self, rho: &AnalyticDensity) -> Result<AnalyticDensity, Error> {
        let v = self.to_scaled(rho)?;
        self.density_from_scaled(self.matrix.dot(&v).view())
    }

    /// `P_N^t ρ` by binary powering of the block matrix.
    pub fn iterate(&self, rho: &AnalyticDensity, t: u64) -> Result<AnalyticDensity, Error> {
        let mut v = self.to_scaled(rho)?;
        let mut e = t;
        let mut power: Option<Array2<f64>> = None;
        while e > 0 {
            let p = match power.take() {
                None => self.matrix.clone(),
                Some(p) => p.dot(&p),
            };
            if e & 1 == 1 {
                v = p.dot(&v);
            }
            e >>= 1;
            power = Some(p);
        }
        self.density_from_scaled(v.view())
    }

    /// `sup |ρ|` bound `max_a Σ_k |c_k|` in the scaled basis.
    pub fn sup_bound(&self, rho: &AnalyticDensity) -> Result<f64, Error> {
        let v = self.to_scaled(rho)?;
        let k1 = self.order + 1;
        Ok((0..self.num_atoms)
            .map(|i| (0..k1).map(|k| v[i * k1 + k].abs()).sum::<f64>())
            .fold(0.0, f64::max))
    }
}

/// Iteration count, truncation order and the tail constant for `n` bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationBudget {
    pub n_bits: u32,
    pub t: u64,
    #[serde(rename = "N")]
    pub order: usize,
    #[serde(rename = "q_N")]
    pub q_n: f64,
    /// `k = n ln 2 + ln(8.5 C)`.
    pub k: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub theta: f64,
    /// `e^γ diam ζ`.
    pub ratio: f64,
    /// `[1 + q_N] e^(q_N t) q_N t + q_N + 2 C θ^t`.
    pub error_chain: f64,
    /// Real-valued affine `t(n)`.
    pub t_linear: f64,
    /// Real-valued affine `N(n)`.
    pub order_linear: f64,
}

/// `q_N = C r^(N+1) / (1 - r)` with `r = e^γ diam ζ`.
pub fn q_n(c: f64, ratio: f64, order: usize) -> f64 {
    c * ratio.powi(order as i32 + 1) / (1.0 - ratio)
}

/// Bound on `‖π - P_N^t ρ‖_∞` for an admissible start on the unit circle.
pub fn error_chain(c: f64, theta: f64, ratio: f64, order: usize, t: u64) -> f64 {
    let q = q_n(c, ratio, order);
    let tf = t as f64;
    (1.0 + q) * (q * tf).exp() * q * tf + q + 2.0 * c * theta.powf(tf)
}

/// Affine `t(n) = (n ln 2 + ln 8.5C) / ln(1/θ)`.
pub fn t_linear(c: f64, theta: f64, n_bits: u32) -> f64 {
    (n_bits as f64 * LN_2 + (8.5 * c).ln()) / (1.0 / theta).ln()
}

/// Affine `N(n)` with `k + ln k ≤ 2k` and `|M| = 1`.
pub fn order_linear(c: f64, theta: f64, ratio: f64, n_bits: u32) -> f64 {
    let nl = n_bits as f64 * LN_2;
    let l85 = (8.5 * c).ln();
    let lr = (1.0 / ratio).ln();
    (2.0 * nl + (c.ln() - l85 - nl).max(0.0) + (1.0 / (1.0 - ratio)).ln() - (1.0 / theta).ln().ln() + 2.0 * l85) / lr
        - 1.0
}

/// `t` and `N` from the three-term bound, with `N` raised until the error
/// chain is at most `2^-n`.
pub fn truncation_budget(constants: (f64, f64, f64), diam: f64, n_bits: u32) -> Result<TruncationBudget, Error> {
    let (c, gamma, theta) = constants;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::ContractionViolated(format!("theta = {theta}")));
    }
    let ratio = gamma.exp() * diam;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::ContractionViolated(format!("e^gamma * diam = {ratio}")));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("constant C = {c} must be positive")));
    }
    let k = n_bits as f64 * LN_2 + (8.5 * c).ln();
    let log_theta = (1.0 / theta).ln();
    let t_real = k / log_theta;
    if !(t_real < 1e15) {
        return Err(Error::ContractionViolated(format!("iteration count {t_real} unrepresentable")));
    }
    let t = t_real.ceil().max(1.0) as u64;
    let lr = (1.0 / ratio).ln();
    let n_plus_1 = (k + k.ln()) / lr + (c.ln() - k).max(0.0) / lr + ((1.0 / (1.0 - ratio)).ln() - log_theta.ln()) / lr;
    let mut order = (n_plus_1.ceil() - 1.0).max(0.0) as usize;
    let target = (-(n_bits as f64) * LN_2).exp();
    while error_chain(c, theta, ratio, order, t) > target {
        order += 1;
        if order > 10_000 {
            return Err(Error::ContractionViolated("truncation order does not converge".into()));
        }
    }
    Ok(TruncationBudget {
        n_bits,
        t,
        order,
        q_n: q_n(c, ratio, order),
        k,
        c,
        gamma,
        theta,
        ratio,
        error_chain: error_chain(c, theta, ratio, order, t),
        t_linear: t_linear(c, theta, n_bits),
        order_linear: order_linear(c, theta, ratio, n_bits),
    })
}

/// `Π_N ρ`.
pub fn project_truncate(rho: &AnalyticDensity, order: usize) -> AnalyticDensity {
    rho.truncated(order)
}

/// Sup-norm change of `Π_N` on a density inside its envelope:
/// `C (e^γ diam/2)^(N+1) / (1 - e^γ diam/2)`.
pub fn truncation_tail_bound(rho: &AnalyticDensity, order: usize) -> f64 {
    let r = rho.bound_gamma().exp() * rho.diam() / 2.0;
    rho.bound_c() * r.powi(order as i32 + 1) / (1.0 - r)
}

/// `P_N^t ρ₀`.
pub fn iterate_density(op: &SpectralOperator, rho0: &AnalyticDensity, t: u64) -> Result<AnalyticDensity, Error> {
    if rho0.num_atoms() != op.num_atoms() {
        return Err(Error::PartitionMismatch {
            a: op.num_atoms(),
            b: rho0.num_atoms(),
        });
    }
    if t == 0 {
        return Ok(project_truncate(rho0, op.order()));
    }
    op.iterate(rho0, t)
}

#[derive(Clone, Debug)]
pub struct SpectralSolution {
    pub density: AnalyticDensity,
    pub budget: TruncationBudget,
    pub operator: SpectralOperator,
    /// Accumulated quadrature error estimate over `t` steps.
    pub quadrature_slack: f64,
    /// `2^-n` plus the quadrature slack.
    pub certified_error: f64,
}

/// Invariant density with sup-norm error `2^-n_bits` plus quadrature slack.
pub fn invariant_density_spectral(system: &MapSpec, noise: &NoiseModel, n_bits: u32) -> Result<SpectralSolution, Error> {
    let constants = noise_constants(noise)?;
    let atoms = default_num_atoms(constants.1);
    let budget = truncation_budget(constants, 1.0 / atoms as f64, n_bits)?;
    let k1 = (budget.order + 1) as f64;
    let wanted = (-(n_bits as f64) * LN_2).exp() / (4.0 * (atoms * atoms) as f64 * k1 * k1 * budget.t as f64);
    let op = build_spectral(system, noise, atoms, budget.order, wanted.max(QUAD_FLOOR))?;
    let rho0 = AnalyticDensity::constant(atoms, budget.order, 1.0, constants.0, constants.1)?;
    let density = iterate_density(&op, &rho0, budget.t)?;
    let growth = (1.0 + budget.q_n).powf(budget.t as f64);
    let quadrature_slack = op.step_error() * budget.t as f64 * growth;
    let certified_error = budget.error_chain.max((-(n_bits as f64) * LN_2).exp()) + quadrature_slack;
    Ok(SpectralSolution {
        density,
        budget,
        operator: op,
        quadrature_slack,
        certified_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapdsl::load_map;
    use crate::noise::wrapped_gaussian_kernel;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in [1, 2, 5, 12, 31] {
            let (x, w) = gauss_legendre(q);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * q {
                let got: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-13, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn budget_example() {
        let b = truncation_budget((1.0, 1.0, 0.5), 0.5 / 1.0f64.exp(), 20).unwrap();
        assert!((b.k - (20.0 * LN_2 + 8.5f64.ln())).abs() < 1e-12);
        assert_eq!(b.t, 24);
        assert!((26..=32).contains(&b.order), "N = {}", b.order);
        assert!(b.error_chain <= 2f64.powi(-20));
        // the chain fails one order lower unless the formula already overshoots
        assert!(b.order as f64 <= b.order_linear.ceil());
    }

    #[test]
    fn budget_guards() {
        assert!(matches!(
            truncation_budget((1.0, 1.0, 1.0), 0.1, 10),
            Err(Error::ContractionViolated(_))
        ));
        assert!(matches!(
            truncation_budget((1.0, 3.0, 0.5), 0.1, 10),
            Err(Error::ContractionViolated(_))
        ));
    }

    #[test]
    fn budget_is_affine_in_bits() {
        let cst = (2.0, 1.0, 0.7);
        let d = 0.5 / 1.0f64.exp();
        let b: Vec<_> = (4..12).map(|n| truncation_budget(cst, d, n).unwrap()).collect();
        for w in b.windows(3) {
            let dt = (w[1].t_linear - w[0].t_linear) - (w[2].t_linear - w[1].t_linear);
            let dn = (w[1].order_linear - w[0].order_linear) - (w[2].order_linear - w[1].order_linear);
            assert!(dt.abs() < 1e-12 && dn.abs() < 1e-12);
            assert!(w[1].t >= w[0].t);
        }
    }

    #[test]
    fn projection_is_idempotent_and_bounded() {
        let rho = AnalyticDensity::new(vec![vec![1.0, 0.5, -2.0, 3.0]; 8], 4.0, 1.0).unwrap();
        let p = project_truncate(&rho, 2);
        assert_eq!(project_truncate(&p, 2), p);
        let p0 = project_truncate(&rho, 0);
        assert!(p0.coeffs().iter().all(|c| c == &vec![1.0]));
    }

    #[test]
    fn identity_entries_match_fine_quadrature() {
        let f = load_map("identity", 1).unwrap();
        let noise = wrapped_gaussian_kernel(0.1).unwrap();
        let op = build_spectral(&f, &noise, 64, 3, 1e-13).unwrap();
        for (i, j) in [(0, 0), (5, 9), (40, 2), (63, 31)] {
            let xi = (i as f64 + 0.5) / 64.0;
            let lo = j as f64 / 64.0;
            // midpoint rule on 20000 cells
            let m = 20000;
            let h = 1.0 / 64.0 / m as f64;
            let reference: f64 = (0..m).map(|k| noise.density1(lo + (k as f64 + 0.5) * h, xi) * h).sum();
            assert!((op.entry(i, j, 0, 0) - reference).abs() < 1e-10, "{i},{j}");
        }
    }

    #[test]
    fn entries_respect_envelope() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let noise = wrapped_gaussian_kernel(0.1).unwrap();
        let op = build_spectral(&f, &noise, 64, 6, 1e-13).unwrap();
        let d = op.diam();
        for i in (0..64).step_by(7) {
            for j in (0..64).step_by(5) {
                for l in 0..=6 {
                    for m in 0..=6 {
                        let bound = d * d.powi(m as i32) * op.c * (op.gamma * l as f64).exp();
                        assert!(op.entry(i, j, l, m).abs() <= bound);
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_reversal_flips_first_derivative() {
        let noise = wrapped_gaussian_kernel(0.1).unwrap();
        let fwd = build_spectral(&load_map("rotation:0.3", 1).unwrap(), &noise, 64, 2, 1e-13).unwrap();
        let bwd = build_spectral(&load_map("rotation:0.7", 1).unwrap(), &noise, 64, 2, 1e-13).unwrap();
        // reflecting y about x_j and using that K' is odd:
        // backward block (2j - i, j) is minus forward block (i, j)
        let (i, j) = (29, 10);
        let a = fwd.entry(i, j, 1, 0);
        let b = bwd.entry((2 * j + 64 - i) % 64, j, 1, 0);
        assert!(a.abs() > 1e-3);
        assert!((a + b).abs() < 1e-10 * a.abs());
    }

    #[test]
    fn rotation_keeps_constants() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let noise = wrapped_gaussian_kernel(0.1).unwrap();
        let op = build_spectral(&f, &noise, 64, 8, 1e-13).unwrap();
        let rho = AnalyticDensity::constant(64, 8, 1.0, op.c, op.gamma).unwrap();
        let out = op.apply(&rho).unwrap();
        for c in out.coeffs() {
            assert!((c[0] - 1.0).abs() < 1e-10);
            for (k, a) in c.iter().enumerate().skip(1) {
                assert!(a.abs() * (0.5f64 / 64.0).powi(k as i32) < 1e-10);
            }
        }
        let many = iterate_density(&op, &rho, 1000).unwrap();
        assert!((many.coeffs()[17][0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn iteration_is_linear_and_zero_steps_project() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let noise = wrapped_gaussian_kernel(0.1).unwrap();
        let op = build_spectral(&f, &noise, 64, 5, 1e-13).unwrap();
        let a = AnalyticDensity::new(
            (0..64).map(|i| vec![1.0 + 0.1 * (i as f64).sin(), 0.3, 0.0, 0.0, 0.0, 0.0, 7.0]).collect(),
            op.c,
            op.gamma,
        )
        .unwrap();
        let b = AnalyticDensity::constant(64, 5, 1.0, op.c, op.gamma).unwrap();
        assert_eq!(iterate_density(&op, &a, 0).unwrap(), a.truncated(5));
        let lhs = iterate_density(&op, &a.scaled(2.0).axpy(-3.0, &b.truncated(6)).unwrap(), 37).unwrap();
        let rhs = iterate_density(&op, &a, 37)
            .unwrap()
            .scaled(2.0)
            .axpy(-3.0, &iterate_density(&op, &b, 37).unwrap())
            .unwrap();
        for x in 0..200 {
            let x = x as f64 / 200.0;
            assert!((lhs.eval(x).0 - rhs.eval(x).0).abs() < 1e-12);
        }
    }
}
