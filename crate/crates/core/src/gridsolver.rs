//! Sub-Markov discretization for uniform noise, Perron vectors, Doeblin
//! certificates and the resulting total-variation bound.

use crate::cover::{AtomSet, Cover, GraphKind, IterationGraph};
use crate::mapdsl::MapSpec;
use crate::measures::{tv_distance, GridDensity};
use crate::noise::{NoiseKind, NoiseModel};
use crate::torus::{self, Arc};
use crate::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Mass-deficiency constant of the circle: `vol(B_(e+a)) - vol(B_(e-b))`
/// is `2(a + b)` against `vol(B_e) = 2e`.
pub const C_CIRCLE: f64 = 2.0;

/// Largest power of two not above `x` (for `0 < x <= 1`).
pub fn dyadic_floor(x: f64) -> f64 {
    f64::powi(2.0, x.log2().floor() as i32)
}

/// Default evaluation precision for `n` atoms: `min(δ/8, δ²)` rounded down
/// to a power of two.
pub fn default_eta(n: usize) -> f64 {
    let d = 1.0 / n as f64;
    dyadic_floor((d / 8.0).min(d * d))
}

/// Sparse matrix `p_ij ∈ {0, p̂}` on the regular partition of `n` atoms.
///
/// Row `i` is nonzero on a cyclic window of columns; columns outside the
/// active state space are masked.
#[derive(Clone, Debug)]
pub struct GridOperator {
    n: usize,
    epsilon: f64,
    eta: f64,
    modulus: f64,
    threshold: f64,
    p_hat: f64,
    /// `(first column, count)` per row, before masking; `None` for rows
    /// outside the state space.
    windows: Vec<Option<(usize, usize)>>,
    /// Columns inside the state space.
    col_mask: Vec<bool>,
    /// Prefix counts of `col_mask` (length `n + 1`).
    col_prefix: Vec<usize>,
}

impl GridOperator {
    pub fn num_atoms(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `m(δ)` used in the threshold.
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    /// `C_M (m(δ) + 2δ + 2η) / ε`.
    pub fn deficiency_bound(&self) -> f64 {
        C_CIRCLE * (self.modulus + 2.0 * self.delta() + 2.0 * self.eta) / self.epsilon
    }

    /// Rows in the state space.
    pub fn active_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.windows
            .iter()
            .enumerate()
            .filter_map(|(i, w)| w.map(|_| i))
    }

    pub fn is_active_row(&self, i: usize) -> bool {
        self.windows[i].is_some()
    }

    pub fn is_active_col(&self, j: usize) -> bool {
        self.col_mask[j]
    }

    fn masked_count(&self, start: usize, count: usize) -> usize {
        let end = start + count;
        if end <= self.n {
            self.col_prefix[end] - self.col_prefix[start]
        } else {
            (self.col_prefix[self.n] - self.col_prefix[start]) + self.col_prefix[end - self.n]
        }
    }

    /// `p_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self.windows[i] {
            Some((s, c)) if self.col_mask[j] && (j + self.n - s) % self.n < c => self.p_hat,
            _ => 0.0,
        }
    }

    /// Nonzero columns of row `i`.
    pub fn row_columns(&self, i: usize) -> Vec<usize> {
        match self.windows[i] {
            Some((s, c)) => (0..c)
                .map(|k| (s + k) % self.n)
                .filter(|&j| self.col_mask[j])
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        match self.windows[i] {
            Some((s, c)) => self.masked_count(s, c) as f64 * self.p_hat,
            None => 0.0,
        }
    }

    /// `(κ₋, κ₊)`: smallest and largest `1 - row sum` over active rows.
    pub fn kappas(&self) -> (f64, f64) {
        self.active_rows().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let k = 1.0 - self.row_sum(i);
            (lo.min(k), hi.max(k))
        })
    }

    /// `w'_j = Σ_i w_i p_ij` on raw mass vectors.
    pub fn push(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut diff = vec![0.0; n + 1];
        for (i, win) in self.windows.iter().enumerate() {
            let (Some((s, c)), wi) = (win, w[i]) else { continue };
            if wi == 0.0 {
                continue;
            }
            let v = wi * self.p_hat;
            let end = s + c;
            if end <= n {
                diff[*s] += v;
                diff[end] -= v;
            } else {
                diff[*s] += v;
                diff[n] -= v;
                diff[0] += v;
                diff[end - n] -= v;
            }
        }
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            acc += diff[j];
            out.push(if self.col_mask[j] { acc.max(0.0) } else { 0.0 });
        }
        out
    }

    /// Push-forward of a density through the matrix.
    pub fn apply(&self, rho: &GridDensity) -> Result<GridDensity, Error> {
        if rho.len() != self.n {
            return Err(Error::PartitionMismatch { a: self.n, b: rho.len() });
        }
        GridDensity::new(self.push(rho.masses()))
    }
}

/// Restricts the operator to a state space.
#[derive(Clone, Debug, Default)]
pub struct StateSpace {
    /// Forward-invariant union of arcs; `None` is the whole circle.
    pub region: Option<Vec<Arc>>,
}

/// Builds `p_ij = p̂` iff `d(f(c_i), c_j) < ε - m(δ) - 2η - δ`.
pub fn build_submarkov(system: &MapSpec, noise: &NoiseModel, num_atoms: usize, eta: f64) -> Result<GridOperator, Error> {
    build_submarkov_on(system, noise, num_atoms, eta, &StateSpace::default())
}

/// [`build_submarkov`] with rows restricted to atoms meeting the region
/// and columns to atoms inside it.
pub fn build_submarkov_on(
    system: &MapSpec,
    noise: &NoiseModel,
    num_atoms: usize,
    eta: f64,
    space: &StateSpace,
) -> Result<GridOperator, Error> {
    if noise.kind != NoiseKind::UniformBall {
        return Err(Error::UnsupportedKernel);
    }
    if system.dim() != 1 || noise.dim != 1 {
        return Err(Error::InvalidArgument("the grid solver works on the circle".into()));
    }
    let n = num_atoms;
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two atoms".into()));
    }
    let delta = 1.0 / n as f64;
    if !(eta > 0.0 && eta <= delta / 8.0) {
        return Err(Error::InvalidArgument(format!("eta {eta} must lie in (0, δ/8]")));
    }
    let eps = noise.epsilon;
    let modulus = system.modulus_of_continuity(delta);
    let threshold = eps - modulus - 2.0 * eta - delta;
    if !(threshold > 0.0) {
        return Err(Error::DegenerateScale { threshold });
    }
    let p_hat = (delta / (2.0 * eps) / eta).floor() * eta;

    let center = |i: usize| (i as f64 + 0.5) * delta;
    let (row_ok, col_mask): (Vec<bool>, Vec<bool>) = match &space.region {
        None => (vec![true; n], vec![true; n]),
        Some(region) => (0..n)
            .map(|i| {
                let atom = Arc::new(i as f64 * delta, (i + 1) as f64 * delta);
                let meets = region.iter().any(|r| r.intersects(&atom));
                let inside = region.iter().any(|r| r.contains_arc(&atom));
                (meets, inside)
            })
            .unzip(),
    };
    let windows = (0..n)
        .into_par_iter()
        .map(|i| {
            if !row_ok[i] {
                return Ok(None);
            }
            let y = system.eval1(center(i), eta)?;
            // candidate columns around y, then the strict test
            let lo = ((y - threshold) * n as f64 - 0.5).floor() as i64 - 1;
            let hi = ((y + threshold) * n as f64 - 0.5).ceil() as i64 + 1;
            let inside = |k: i64| torus::distance(center(k.rem_euclid(n as i64) as usize), y) < threshold;
            let mut first = None;
            let mut count = 0usize;
            for k in lo..=hi {
                if inside(k) {
                    if first.is_none() {
                        first = Some(k);
                    }
                    count += 1;
                }
            }
            Ok(first.map(|f| (f.rem_euclid(n as i64) as usize, count.min(n))).or(Some((0, 0))))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut col_prefix = vec![0usize; n + 1];
    for j in 0..n {
        col_prefix[j + 1] = col_prefix[j] + col_mask[j] as usize;
    }
    Ok(GridOperator {
        n,
        epsilon: eps,
        eta,
        modulus,
        threshold,
        p_hat,
        windows,
        col_mask,
        col_prefix,
    })
}

/// Normalized Perron vector of `op` (acting on row vectors) and its
/// eigenvalue, by power iteration.
#[derive(Clone, Debug)]
pub struct PerronResult {
    pub psi: GridDensity,
    pub lambda: f64,
    /// `‖ψᵀP - λψᵀ‖₁`.
    pub residual: f64,
    pub iterations: usize,
}

pub fn perron_vector(op: &GridOperator, residual_tol: f64, max_iters: usize) -> Result<PerronResult, Error> {
    if op.active_rows().all(|i| op.row_sum(i) == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let n = op.n;
    let support = (0..n).filter(|&j| op.col_mask[j] && op.is_active_row(j)).count();
    if support == 0 {
        return Err(Error::ZeroMatrix);
    }
    let mut w: Vec<f64> = (0..n)
        .map(|j| {
            if op.col_mask[j] && op.is_active_row(j) {
                1.0 / support as f64
            } else {
                0.0
            }
        })
        .collect();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let next = op.push(&w);
        let lambda: f64 = next.iter().sum();
        if lambda == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        residual = next.iter().zip(&w).map(|(a, b)| (a - lambda * b).abs()).sum();
        if residual <= residual_tol {
            let psi = GridDensity::new(w.iter().map(|x| x.max(0.0)).collect())?.normalized();
            return Ok(PerronResult {
                psi,
                lambda,
                residual,
                iterations: it,
            });
        }
        w = next.into_iter().map(|x| x / lambda).collect();
    }
    Err(Error::NoConvergence {
        residual,
        iterations: max_iters,
    })
}

/// Cover, weights and constants of the averaged-chain minorization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoeblinCertificate {
    pub cover_xi: Cover,
    /// Cover atoms forming the state space.
    pub atoms: Vec<usize>,
    pub xi_irr: Vec<usize>,
    pub n_xi: usize,
    pub beta: f64,
    /// `vol(ă) / vol(B_ε)`.
    pub q: f64,
    /// `(#ξ_irr / N_ξ) q^N_ξ`.
    pub beta_lower_bound: f64,
}

/// Doeblin certificate on `cover` for the chain restricted to `atoms`
/// (all atoms when `None`).
pub fn doeblin_certificate(
    system: &MapSpec,
    noise: &NoiseModel,
    cover: &Cover,
    atoms: Option<&AtomSet>,
) -> Result<DoeblinCertificate, Error> {
    if noise.kind != NoiseKind::UniformBall {
        return Err(Error::UnsupportedKernel);
    }
    let mut inner_cover = cover.clone();
    inner_cover.delta = noise.epsilon;
    let graph = IterationGraph::inner(system, &inner_cover)?;
    doeblin_from_graph(&graph, &inner_cover, noise.epsilon, atoms)
}

/// Certificate from a precomputed inner graph with margin `ε`.
pub fn doeblin_from_graph(
    graph: &IterationGraph,
    cover: &Cover,
    epsilon: f64,
    atoms: Option<&AtomSet>,
) -> Result<DoeblinCertificate, Error> {
    debug_assert_eq!(graph.kind, GraphKind::Inner);
    let all: AtomSet = (0..cover.len()).collect();
    let space = atoms.unwrap_or(&all);
    if space.is_empty() {
        return Err(Error::NotIrreducible);
    }
    // ξ_irr = ∩ O_in(a)
    let mut irr: Option<AtomSet> = None;
    for &a in space {
        let o = graph.orbit(a);
        irr = Some(match irr {
            None => o,
            Some(s) => s.intersection(&o).copied().collect(),
        });
        if irr.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(Error::NotIrreducible);
        }
    }
    let irr = irr.unwrap_or_default();
    let q = cover.shrunken_length() / (2.0 * epsilon);
    if !(q > 0.0) {
        return Err(Error::CertificateUnobtainable("shrunken atoms are empty".into()));
    }
    // N_ξ = max over space atoms and ξ_irr targets of the hitting number
    let mut n_xi = 0;
    for &a in space {
        let hit = graph.hitting_numbers(a);
        for &t in &irr {
            match hit[t] {
                Some(h) => n_xi = n_xi.max(h),
                None => return Err(Error::NotIrreducible),
            }
        }
    }
    let is_irr: Vec<bool> = (0..cover.len()).map(|k| irr.contains(&k)).collect();
    let beta = space
        .par_iter()
        .map(|&i| {
            let mut v = vec![0.0; cover.len()];
            v[i] = 1.0;
            let mut acc = 0.0;
            for _ in 0..n_xi {
                let mut next = vec![0.0; cover.len()];
                for (a, &va) in v.iter().enumerate() {
                    if va != 0.0 {
                        for b in graph.successors(a) {
                            next[b] += va * q;
                        }
                    }
                }
                acc += next.iter().zip(&is_irr).filter(|(_, &m)| m).map(|(x, _)| x).sum::<f64>();
                v = next;
            }
            acc / n_xi as f64
        })
        .reduce(|| f64::INFINITY, f64::min);
    let beta_lower_bound = irr.len() as f64 / n_xi as f64 * q.powi(n_xi as i32);
    Ok(DoeblinCertificate {
        cover_xi: cover.clone(),
        atoms: space.iter().copied().collect(),
        xi_irr: irr.into_iter().collect(),
        n_xi,
        beta: beta.min(1.0),
        q,
        beta_lower_bound,
    })
}

/// Bound on `‖π - ψ‖_TV` and the quantities entering it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub delta: f64,
    pub eta: f64,
    pub num_atoms: usize,
    pub lambda: f64,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub deficiency_bound: f64,
    pub spectral_c: f64,
    pub spectral_theta: f64,
    /// Length `N` of the averaging window.
    pub n_avg: usize,
    pub perron_residual: f64,
    pub beta: f64,
    #[serde(rename = "N_xi")]
    pub n_xi: usize,
    pub beta_lower_bound: f64,
    pub tv_bound: f64,
}

/// `(C/θ) [1 - (1/N) Σ_{k=1..N} (1 - κ₊)^k] + (C/θ) (N + 1)/2 · r`.
///
/// The second term covers the Perron residual `r = ‖ψᵀP - λψᵀ‖₁`.
pub fn tv_bound(c: f64, theta: f64, n_avg: usize, kappa_plus: f64, residual: f64) -> f64 {
    let avg: f64 = (1..=n_avg).map(|k| (1.0 - kappa_plus).powi(k as i32)).sum::<f64>() / n_avg as f64;
    c / theta * (1.0 - avg) + c / theta * (n_avg as f64 + 1.0) / 2.0 * residual
}

#[derive(Clone, Debug)]
pub struct GridOptions {
    /// Largest partition tried.
    pub max_atoms: usize,
    /// Smallest partition tried.
    pub min_atoms: usize,
    /// Restrict to the component containing this region (e.g. from
    /// [`crate::cover::decompose`]).
    pub region: Option<Vec<Arc>>,
    /// Take `region` itself as the state space instead of its outer
    /// closure. Only sound when the caller knows the region is forward
    /// invariant under every noise displacement.
    pub assume_invariant: bool,
    pub residual_tol: f64,
    pub max_iters: usize,
    /// Override `(C, θ)`; default `(1, β)`.
    pub spectral_constants: Option<(f64, f64)>,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            max_atoms: 4096,
            min_atoms: 64,
            region: None,
            assume_invariant: false,
            residual_tol: 1e-12,
            max_iters: 200_000,
            spectral_constants: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridSolution {
    pub density: GridDensity,
    pub certificate: ErrorCertificate,
    pub doeblin: DoeblinCertificate,
    pub operator: GridOperator,
}

/// Doeblin certificate with the best `β` over a few regular covers with thin
/// overlaps, restricted to the outer closure of `region` (or to `region`
/// itself when `assume_invariant` is set).
pub fn best_doeblin(
    system: &MapSpec,
    noise: &NoiseModel,
    region: Option<&[Arc]>,
    assume_invariant: bool,
) -> Result<(DoeblinCertificate, Option<Vec<Arc>>), Error> {
    let mut best: Option<(DoeblinCertificate, Option<Vec<Arc>>)> = None;
    let mut last_err = Error::NotIrreducible;
    for n in [16usize, 32, 64, 128, 256] {
        let cover = Cover::regular(n, (0.5 + 1.0 / 64.0) / n as f64, noise.epsilon)?;
        let inner = IterationGraph::inner(system, &cover)?;
        if inner.first_empty().is_some() {
            last_err = Error::MeshTooCoarse {
                atom: inner.first_empty().unwrap(),
                mesh: cover.mesh(),
            };
            continue;
        }
        let (atoms, space) = match region {
            None => (None, None),
            Some(r) if assume_invariant => (Some(cover.atoms_meeting(r)), Some(r.to_vec())),
            Some(r) => {
                let outer = IterationGraph::outer(system, &cover)?;
                let mut set = cover.atoms_meeting(r);
                let seeds: Vec<usize> = set.iter().copied().collect();
                for s in seeds {
                    set.extend(outer.orbit(s));
                }
                let arcs = cover.region(&set);
                (Some(set), Some(arcs))
            }
        };
        match doeblin_from_graph(&inner, &cover, noise.epsilon, atoms.as_ref()) {
            Ok(cert) => {
                if best.as_ref().is_none_or(|(b, _)| cert.beta > b.beta) {
                    best = Some((cert, space));
                }
            }
            Err(e) => last_err = e,
        }
    }
    best.ok_or(last_err)
}

/// Certified invariant density for uniform noise to TV accuracy `alpha`.
pub fn invariant_density_grid(system: &MapSpec, noise: &NoiseModel, alpha: f64, opts: &GridOptions) -> Result<GridSolution, Error> {
    if noise.kind != NoiseKind::UniformBall {
        return Err(Error::UnsupportedKernel);
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("accuracy {alpha} must be positive")));
    }
    let (doeblin, region) = best_doeblin(system, noise, opts.region.as_deref(), opts.assume_invariant).map_err(|e| match e {
        Error::NotIrreducible | Error::MeshTooCoarse { .. } => {
            Error::CertificateUnobtainable(format!("no Doeblin minorization: {e}"))
        }
        other => other,
    })?;
    let (c, theta) = opts.spectral_constants.unwrap_or((1.0, doeblin.beta));
    let n_avg = doeblin.n_xi;
    let space = StateSpace { region };
    let mut n = opts.min_atoms.max(2).next_power_of_two();
    while n <= opts.max_atoms {
        let eta = default_eta(n);
        let op = match build_submarkov_on(system, noise, n, eta, &space) {
            Ok(op) => op,
            Err(Error::DegenerateScale { .. }) => {
                n *= 2;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (kappa_minus, kappa_plus) = op.kappas();
        let structural = tv_bound(c, theta, n_avg, kappa_plus, 0.0);
        if structural <= alpha {
            let pr = perron_vector(&op, opts.residual_tol, opts.max_iters)?;
            let bound = tv_bound(c, theta, n_avg, kappa_plus, pr.residual);
            if bound <= alpha {
                let certificate = ErrorCertificate {
                    delta: op.delta(),
                    eta,
                    num_atoms: n,
                    lambda: pr.lambda,
                    kappa_minus,
                    kappa_plus,
                    deficiency_bound: op.deficiency_bound(),
                    spectral_c: c,
                    spectral_theta: theta,
                    n_avg,
                    perron_residual: pr.residual,
                    beta: doeblin.beta,
                    n_xi: doeblin.n_xi,
                    beta_lower_bound: doeblin.beta_lower_bound,
                    tv_bound: bound,
                };
                return Ok(GridSolution {
                    density: pr.psi,
                    certificate,
                    doeblin,
                    operator: op,
                });
            }
        }
        n *= 2;
    }
    Err(Error::ResourceCap {
        atoms: n,
        max: opts.max_atoms,
    })
}

/// `P̄ρ = (1/N) Σ_{k=1..N} ρ P^k`, each power renormalized to unit mass.
pub fn apply_averaged(op: &GridOperator, rho: &GridDensity, n_avg: usize) -> Result<GridDensity, Error> {
    if rho.len() != op.n {
        return Err(Error::PartitionMismatch { a: op.n, b: rho.len() });
    }
    let mut acc = vec![0.0; op.n];
    let mut w = rho.masses().to_vec();
    for _ in 0..n_avg {
        w = op.push(&w);
        let t: f64 = w.iter().sum();
        if t == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        for (a, x) in acc.iter_mut().zip(&w) {
            *a += x / t / n_avg as f64;
        }
    }
    Ok(GridDensity::new(acc)?.normalized())
}

/// `tv(P̄^t ρ, ψ)` for `t = 1..=steps`.
pub fn convergence_profile(op: &GridOperator, rho: &GridDensity, psi: &GridDensity, n_avg: usize, steps: usize) -> Result<Vec<f64>, Error> {
    let mut cur = rho.clone();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        cur = apply_averaged(op, &cur, n_avg)?;
        out.push(tv_distance(&cur, psi));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapdsl::load_map;
    use crate::noise::uniform_kernel;

    #[test]
    fn identity_example_rows() {
        let f = load_map("identity", 1).unwrap();
        let noise = uniform_kernel(0.4, 1).unwrap();
        let op = build_submarkov(&f, &noise, 10, 1.0 / 1024.0).unwrap();
        assert!((op.threshold() - (0.4 - 0.1 - 2.0 / 1024.0 - 0.1)).abs() < 1e-12);
        assert!((op.threshold() - 0.198).abs() < 1e-3);
        for i in 0..10 {
            let cols = op.row_columns(i);
            let mut expect = vec![(i + 9) % 10, i, (i + 1) % 10];
            expect.sort_unstable();
            let mut got = cols.clone();
            got.sort_unstable();
            assert_eq!(got, expect);
            assert_eq!(op.entry(i, i), 0.125);
            assert!((op.row_sum(i) - 0.375).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_scale() {
        let f = load_map("identity", 1).unwrap();
        let noise = uniform_kernel(0.15, 1).unwrap();
        assert!(matches!(
            build_submarkov(&f, &noise, 10, 1.0 / 1024.0),
            Err(Error::DegenerateScale { .. })
        ));
    }

    #[test]
    fn doubling_entries_and_rows() {
        let f = load_map("doubling", 1).unwrap();
        let noise = uniform_kernel(0.2, 1).unwrap();
        let op = build_submarkov(&f, &noise, 64, default_eta(64)).unwrap();
        let p = op.p_hat();
        assert!(p <= (1.0 / 64.0) / 0.4);
        for i in 0..64 {
            for j in 0..64 {
                let e = op.entry(i, j);
                assert!(e == 0.0 || e == p);
            }
            assert!(op.row_sum(i) <= 1.0);
            assert!(1.0 - op.row_sum(i) <= op.deficiency_bound());
        }
    }

    fn dense(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    /// Reference power iteration on a small dense matrix.
    fn dense_perron(m: &[Vec<f64>]) -> (Vec<f64>, f64) {
        let n = m.len();
        let mut v = vec![1.0 / n as f64; n];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let mut w = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    w[j] += v[i] * m[i][j];
                }
            }
            lambda = w.iter().sum();
            v = w.iter().map(|x| x / lambda).collect();
        }
        (v, lambda)
    }

    #[test]
    fn small_dense_references() {
        let (v, l) = dense_perron(&dense(&[&[0.5, 0.25], &[0.25, 0.5]]));
        assert!((l - 0.75).abs() < 1e-12);
        assert!((v[0] - 0.5).abs() < 1e-12);
        let ds = dense(&[
            &[0.1, 0.2, 0.3, 0.4],
            &[0.2, 0.1, 0.4, 0.3],
            &[0.3, 0.4, 0.1, 0.2],
            &[0.4, 0.3, 0.2, 0.1],
        ]);
        let (v, l) = dense_perron(&ds);
        assert!((l - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn identity_perron_is_uniform() {
        let f = load_map("identity", 1).unwrap();
        let noise = uniform_kernel(0.4, 1).unwrap();
        let op = build_submarkov(&f, &noise, 10, 1.0 / 1024.0).unwrap();
        let pr = perron_vector(&op, 1e-14, 1000).unwrap();
        assert!((pr.lambda - 0.375).abs() < 1e-14);
        assert!(pr.psi.masses().iter().all(|m| (m - 0.1).abs() < 1e-14));
        let (km, kp) = op.kappas();
        assert!(1.0 - kp <= pr.lambda + 1e-15 && pr.lambda <= 1.0 - km + 1e-15);
    }

    #[test]
    fn apply_basics() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let noise = uniform_kernel(0.2, 1).unwrap();
        let op = build_submarkov(&f, &noise, 128, default_eta(128)).unwrap();
        let zero = GridDensity::new(vec![0.0; 128]).unwrap();
        assert_eq!(op.apply(&zero).unwrap().total_mass(), 0.0);
        let rho = GridDensity::point_mass(128, 0.4);
        let out = op.apply(&rho).unwrap();
        let m = out.total_mass();
        assert!(m <= 1.0 && m >= 1.0 - op.deficiency_bound());
        assert!(matches!(
            op.apply(&GridDensity::uniform(64)),
            Err(Error::PartitionMismatch { .. })
        ));
    }

    #[test]
    fn two_cycles_are_not_irreducible() {
        let g = IterationGraph::from_edges(GraphKind::Inner, vec![vec![0], vec![1]]);
        let cover = Cover::regular(2, 0.3, 0.1).unwrap();
        assert!(matches!(
            doeblin_from_graph(&g, &cover, 0.1, None),
            Err(Error::NotIrreducible)
        ));
    }

    #[test]
    fn rotation_doeblin() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let noise = uniform_kernel(0.2, 1).unwrap();
        let cover = Cover::regular(10, 0.06, 0.2).unwrap();
        let d = doeblin_certificate(&f, &noise, &cover, None).unwrap();
        assert!(d.n_xi >= 1);
        assert!(d.beta > 0.0 && d.beta <= 1.0);
        assert!(d.beta >= d.beta_lower_bound);
    }

    #[test]
    fn rotation_grid_is_uniform() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let noise = uniform_kernel(0.2, 1).unwrap();
        let sol = invariant_density_grid(&f, &noise, 0.05, &GridOptions::default()).unwrap();
        let c = &sol.certificate;
        assert!(c.tv_bound <= 0.05);
        let u = GridDensity::uniform(sol.density.len());
        assert!(tv_distance(&sol.density, &u) <= c.tv_bound);
        assert!(c.kappa_minus <= 1.0 - c.lambda + 1e-15);
        assert!(1.0 - c.lambda <= c.kappa_plus + 1e-15);
        assert!(c.kappa_plus <= c.deficiency_bound);
    }

    #[test]
    fn resource_cap() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let noise = uniform_kernel(0.2, 1).unwrap();
        let opts = GridOptions {
            max_atoms: 128,
            ..Default::default()
        };
        assert!(matches!(
            invariant_density_grid(&f, &noise, 0.001, &opts),
            Err(Error::ResourceCap { .. })
        ));
    }
}
