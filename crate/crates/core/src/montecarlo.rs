//! Simulation of the perturbed chain: trajectories, histograms and basin
//! estimates used to cross-check the certified engines.

use crate::cover::{DecompositionResult, DecompositionStatus};
use crate::gridsolver::DoeblinCertificate;
use crate::mapdsl::MapSpec;
use crate::measures::GridDensity;
use crate::noise::NoiseModel;
use crate::rng::CounterRng;
use crate::torus::{self, Arc};
use crate::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Map evaluation tolerance per step.
pub const STEP_TOL: f64 = 1.0 / (1u64 << 40) as f64;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// States `x_0, ..., x_steps` of one run, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub states: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn point(&self, t: usize) -> &[f64] {
        &self.states[t * self.dim..(t + 1) * self.dim]
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// First coordinates after the burn-in.
    fn tail1(&self, burn_in: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().step_by(self.dim).skip(burn_in.saturating_add(1)).copied()
    }

    /// CSV with header `t,x1,...,xd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.dim {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for t in 0..self.len() {
            out.push_str(&t.to_string());
            for v in self.point(t) {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Burn-in of `10 N_ξ` steps when a Doeblin certificate is known, else 1000.
pub fn default_burn_in(doeblin: Option<&DoeblinCertificate>) -> usize {
    doeblin.map_or(1000, |d| 10 * d.n_xi.max(1))
}

/// Runs the chain for `steps` steps from `x0`; step `t` draws its noise
/// from window `t` of the seeded stream.
pub fn simulate(system: &MapSpec, noise: &NoiseModel, x0: &[f64], steps: usize, seed: u64) -> Result<Trajectory, Error> {
    let dim = system.dim();
    if x0.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "start point has {} coordinates, map dimension is {dim}",
            x0.len()
        )));
    }
    if noise.dim != dim {
        return Err(Error::InvalidArgument(format!(
            "noise dimension {} does not match map dimension {dim}",
            noise.dim
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    let mut rng = CounterRng::new(seed, 0);
    let mut states = Vec::with_capacity((steps + 1) * dim);
    let mut x: Vec<f64> = x0.iter().map(|v| torus::wrap(*v)).collect();
    states.extend_from_slice(&x);
    for t in 0..steps {
        let fx = system.eval_point(&x, STEP_TOL)?;
        x = noise.sample(&fx, rng.at(t as u64));
        states.extend_from_slice(&x);
    }
    Ok(Trajectory {
        dim,
        states,
        seed,
        burn_in: 0,
    })
}

/// Independent runs, one per seed, in parallel.
pub fn simulate_many(
    system: &MapSpec,
    noise: &NoiseModel,
    x0: &[f64],
    steps: usize,
    seeds: &[u64],
) -> Result<Vec<Trajectory>, Error> {
    seeds
        .par_iter()
        .map(|&s| simulate(system, noise, x0, steps, s))
        .collect()
}

/// `draws` independent one-step transitions from `x` (1-D).
pub fn one_step_samples(system: &MapSpec, noise: &NoiseModel, x: f64, draws: usize, seed: u64) -> Result<Vec<f64>, Error> {
    let fx = system.eval1(x, STEP_TOL)?;
    let mut rng = CounterRng::new(seed, 1);
    Ok((0..draws).map(|t| noise.sample1(fx, rng.at(t as u64))).collect())
}

fn histogram(samples: impl Iterator<Item = f64>, num_atoms: usize, counts: &mut [u64]) {
    for x in samples {
        let k = ((torus::wrap(x) * num_atoms as f64) as usize).min(num_atoms - 1);
        counts[k] += 1;
    }
}

/// Normalized histogram of the first coordinates of `samples` on `num_atoms`
/// atoms, with multinomial 95% half-widths.
pub fn histogram_density(samples: &[f64], num_atoms: usize) -> Result<GridDensity, Error> {
    if num_atoms == 0 {
        return Err(Error::InvalidArgument("partition has no atoms".into()));
    }
    let need = 10 * num_atoms;
    if samples.len() < need {
        return Err(Error::InsufficientSamples { have: samples.len(), need });
    }
    let mut counts = vec![0u64; num_atoms];
    histogram(samples.iter().copied(), num_atoms, &mut counts);
    from_counts(&counts)
}

fn from_counts(counts: &[u64]) -> Result<GridDensity, Error> {
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let hw = masses.iter().map(|p| Z95 * (p * (1.0 - p) / n).sqrt()).collect();
    GridDensity::new(masses)?.with_half_widths(hw)
}

/// Histogram of all post-burn-in states, normalized to mass one, with the
/// multinomial 95% half-width per atom. Counts merge by addition, so the
/// result does not depend on the order of `trajectories`.
pub fn empirical_density(trajectories: &[Trajectory], num_atoms: usize, burn_in: usize) -> Result<GridDensity, Error> {
    if num_atoms == 0 {
        return Err(Error::InvalidArgument("partition has no atoms".into()));
    }
    let have: usize = trajectories.iter().map(|t| t.len().saturating_sub(burn_in + 1)).sum();
    let need = 10 * num_atoms;
    if have < need {
        return Err(Error::InsufficientSamples { have, need });
    }
    let counts = trajectories
        .par_iter()
        .map(|t| {
            let mut c = vec![0u64; num_atoms];
            histogram(t.tail1(burn_in), num_atoms, &mut c);
            c
        })
        .reduce(
            || vec![0u64; num_atoms],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    from_counts(&counts)
}

/// Like [`empirical_density`] but the half-widths come from batch means
/// over `batches` consecutive blocks of each trajectory, which accounts for
/// correlation along the chain.
pub fn empirical_density_batched(
    trajectories: &[Trajectory],
    num_atoms: usize,
    burn_in: usize,
    batches: usize,
) -> Result<GridDensity, Error> {
    let base = empirical_density(trajectories, num_atoms, burn_in)?;
    if batches < 2 {
        return Err(Error::InvalidArgument("batch means need at least two batches".into()));
    }
    let mut batch_masses: Vec<Vec<f64>> = Vec::new();
    for t in trajectories {
        let xs: Vec<f64> = t.tail1(burn_in).collect();
        let size = xs.len() / batches;
        if size == 0 {
            continue;
        }
        for b in xs.chunks_exact(size).take(batches) {
            let mut c = vec![0u64; num_atoms];
            histogram(b.iter().copied(), num_atoms, &mut c);
            batch_masses.push(c.iter().map(|&v| v as f64 / size as f64).collect());
        }
    }
    let nb = batch_masses.len();
    if nb < 2 {
        return Err(Error::InsufficientSamples { have: nb, need: 2 });
    }
    let hw = (0..num_atoms)
        .map(|k| {
            let mean = batch_masses.iter().map(|m| m[k]).sum::<f64>() / nb as f64;
            let var = batch_masses.iter().map(|m| (m[k] - mean).powi(2)).sum::<f64>() / (nb - 1) as f64;
            Z95 * (var / nb as f64).sqrt()
        })
        .collect();
    base.with_half_widths(hw)
}

/// Statistical allowance on the total variation distance of an empirical
/// density from the truth: half the summed half-widths.
pub fn tv_band(density: &GridDensity) -> f64 {
    density.half_widths().map_or(0.0, |h| 0.5 * h.iter().sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasinOutcome {
    Component(usize),
    Escaped,
}

/// Which component attracts the run from `x0`: the one whose region,
/// fattened by the cover margin, holds at least 99% of the last 20% of
/// states.
pub fn estimate_basin(
    system: &MapSpec,
    noise: &NoiseModel,
    x0: f64,
    components: &DecompositionResult,
    steps: usize,
    seed: u64,
) -> Result<BasinOutcome, Error> {
    if components.status != DecompositionStatus::Decomposed {
        return Err(Error::InvalidArgument("basin estimates need a decided decomposition".into()));
    }
    let traj = simulate(system, noise, &[x0], steps, seed)?;
    let start = traj.len() - (traj.len() / 5).max(1);
    let delta = components.cover.delta;
    let regions: Vec<Vec<Arc>> = components
        .regions()
        .into_iter()
        .map(|r| r.into_iter().map(|a| a.fattened(delta)).collect())
        .collect();
    let tail: Vec<f64> = (start..traj.len()).map(|t| traj.point(t)[0]).collect();
    for (k, region) in regions.iter().enumerate() {
        let inside = tail
            .iter()
            .filter(|&&x| region.iter().any(|a| a.contains_point(x)))
            .count();
        if inside as f64 >= 0.99 * tail.len() as f64 {
            return Ok(BasinOutcome::Component(k));
        }
    }
    Ok(BasinOutcome::Escaped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{decompose, DecomposeOptions};
    use crate::mapdsl::load_map;
    use crate::noise::{uniform_kernel, wrapped_gaussian_kernel};

    #[test]
    fn same_seed_same_path() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let noise = wrapped_gaussian_kernel(0.1).unwrap();
        let a = simulate(&f, &noise, &[0.3], 500, 9).unwrap();
        let b = simulate(&f, &noise, &[0.3], 500, 9).unwrap();
        let c = simulate(&f, &noise, &[0.3], 500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.states, c.states);
        assert_eq!(a.len(), 501);
    }

    #[test]
    fn tiny_noise_stays_put() {
        let f = load_map("identity", 1).unwrap();
        let noise = uniform_kernel(1e-6, 1).unwrap();
        let t = simulate(&f, &noise, &[0.4], 100, 3).unwrap();
        for k in 0..t.len() {
            assert!(torus::distance(t.point(k)[0], 0.4) < 1e-3);
        }
    }

    #[test]
    fn rotation_increments_are_unbiased() {
        let f = load_map("rotation:0.3", 1).unwrap();
        let noise = uniform_kernel(0.1, 1).unwrap();
        let steps = 20_000;
        let t = simulate(&f, &noise, &[0.0], steps, 5).unwrap();
        let mean = (0..steps)
            .map(|k| torus::displacement(torus::wrap(t.point(k)[0] + 0.3), t.point(k + 1)[0]))
            .sum::<f64>()
            / steps as f64;
        // uniform on [-0.1, 0.1] has sd 0.1/sqrt(3)
        let sd = 0.1 / 3f64.sqrt();
        assert!(mean.abs() <= 3.0 * sd / (steps as f64).sqrt());
    }

    #[test]
    fn histogram_basics() {
        let t = Trajectory {
            dim: 1,
            states: vec![0.51; 1000],
            seed: 0,
            burn_in: 0,
        };
        let d = empirical_density(&[t.clone()], 10, 0).unwrap();
        assert_eq!(d.masses()[5], 1.0);
        assert!(matches!(
            empirical_density(&[t.clone()], 200, 0),
            Err(Error::InsufficientSamples { .. })
        ));
        // two runs in different atoms mix by sample counts
        let u = Trajectory {
            dim: 1,
            states: vec![0.05; 3001],
            seed: 1,
            burn_in: 0,
        };
        let d = empirical_density(&[t, u], 10, 0).unwrap();
        assert!((d.masses()[5] - 999.0 / 3999.0).abs() < 1e-15);
        assert!((d.masses()[0] - 3000.0 / 3999.0).abs() < 1e-15);
    }

    #[test]
    fn basins_of_the_sine_map() {
        let f = load_map("sine2:0.1", 1).unwrap();
        let noise = uniform_kernel(0.01, 1).unwrap();
        let d = decompose(&f, &noise, &DecomposeOptions::default()).unwrap();
        let left = d.component_containing(0.25).unwrap();
        let right = d.component_containing(0.75).unwrap();
        assert_eq!(estimate_basin(&f, &noise, 0.2, &d, 2000, 1).unwrap(), BasinOutcome::Component(left));
        assert_eq!(estimate_basin(&f, &noise, 0.8, &d, 2000, 1).unwrap(), BasinOutcome::Component(right));
        for seed in 0..10 {
            assert_ne!(estimate_basin(&f, &noise, 0.5, &d, 2000, seed).unwrap(), BasinOutcome::Escaped);
        }
    }
}
