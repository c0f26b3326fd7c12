//! Command implementations.

use crate::config::{Command, NoiseKindArg, RunConfig};
use crate::output::{json, Artifacts};
use anyhow::Result;
use ergomeasure::cover::{decompose, DecomposeOptions, DecompositionStatus};
use ergomeasure::gridsolver::{best_doeblin, invariant_density_grid, DoeblinCertificate, ErrorCertificate, GridOptions};
use ergomeasure::measures::{tv_distance, w1_distance, GridDensity};
use ergomeasure::montecarlo::{default_burn_in, empirical_density_batched, simulate_many, tv_band};
use ergomeasure::noise::{uniform_kernel, wrapped_gaussian_kernel};
use ergomeasure::spectral::{
    default_num_atoms, invariant_density_spectral, noise_constants, truncation_budget, SpectralSolution,
};
use ergomeasure::torus::Arc;
use ergomeasure::{load_map, MapSpec, NoiseModel};
use serde_json::{json, Value};
use std::fmt::Write as _;

/// Batches for the Monte-Carlo confidence band.
const MC_BATCHES: usize = 20;
/// Sample points of the spectral density CSV.
const SPECTRAL_SAMPLES: usize = 1024;

pub enum Status {
    Success,
    /// The engine ran but could not certify the requested result.
    Uncertified(String),
}

pub fn execute(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let map = load_map(&cfg.map, cfg.dim)?;
    let noise = match cfg.noise.kind {
        NoiseKindArg::Uniform => uniform_kernel(cfg.noise.epsilon, cfg.dim)?,
        NoiseKindArg::Gaussian => wrapped_gaussian_kernel(cfg.noise.epsilon)?,
    };
    match cfg.command {
        Command::Decompose => run_decompose(cfg, &map, &noise, out),
        Command::Grid => run_grid(cfg, &map, &noise, out),
        Command::Spectral => run_spectral(cfg, &map, &noise, out),
        Command::Simulate => run_simulate(cfg, &map, &noise, out),
        Command::Compare => run_compare(cfg, &map, &noise, out),
        Command::Certify => run_certify(cfg, &map, &noise, out),
    }
}

fn region(cfg: &RunConfig) -> Option<Vec<Arc>> {
    cfg.params
        .region
        .as_ref()
        .map(|r| r.iter().map(|[lo, hi]| Arc::new(*lo, *hi)).collect())
}

fn grid_options(cfg: &RunConfig) -> GridOptions {
    GridOptions {
        region: region(cfg),
        assume_invariant: cfg.params.assume_invariant,
        ..GridOptions::default()
    }
}

fn doeblin_summary(d: &DoeblinCertificate) -> Value {
    json!({
        "cover_atoms": d.cover_xi.len(),
        "cover_mesh": d.cover_xi.mesh(),
        "cover_delta": d.cover_xi.delta,
        "state_atoms": d.atoms.len(),
        "xi_irr": d.xi_irr.len(),
        "N_xi": d.n_xi,
        "q": d.q,
        "beta": d.beta,
        "beta_lower_bound": d.beta_lower_bound,
    })
}

fn grid_certificate(c: &ErrorCertificate) -> Result<Value> {
    json(&json!({
        "delta": c.delta,
        "eta": c.eta,
        "num_atoms": c.num_atoms,
        "lambda": c.lambda,
        "kappa_minus": c.kappa_minus,
        "kappa_plus": c.kappa_plus,
        "deficiency_bound": c.deficiency_bound,
        "beta": c.beta,
        "N_xi": c.n_xi,
        "beta_lower_bound": c.beta_lower_bound,
        "perron_residual": c.perron_residual,
        "C": c.spectral_c,
        "theta": c.spectral_theta,
        "tv_bound": c.tv_bound,
    }))
}

fn spectral_certificate(sol: &SpectralSolution, bits: u32) -> Result<Value> {
    json(&json!({
        "bits": bits,
        "num_atoms": sol.density.num_atoms(),
        "budget": sol.budget,
        "step_error": sol.operator.step_error(),
        "quadrature_slack": sol.quadrature_slack,
        "certified_error": sol.certified_error,
    }))
}

fn density_csv(d: &GridDensity) -> String {
    let mut s = String::from("atom_index,left_endpoint,mass,half_width\n");
    let hw = d.half_widths();
    for (i, m) in d.masses().iter().enumerate() {
        let h = hw.map_or(0.0, |h| h[i]);
        let _ = writeln!(s, "{i},{:.16e},{m:.16e},{h:.16e}", d.left_endpoint(i));
    }
    s
}

fn run_decompose(cfg: &RunConfig, map: &MapSpec, noise: &NoiseModel, out: &mut Artifacts) -> Result<Status> {
    let opts = DecomposeOptions {
        initial_mesh: cfg.params.initial_mesh,
        max_refinements: cfg.params.max_refinements,
    };
    let d = decompose(map, noise, &opts)?;
    let components: Vec<Vec<[f64; 2]>> = d
        .regions()
        .iter()
        .map(|r| r.iter().map(|a| [a.lo, a.hi]).collect())
        .collect();
    let report = json(&json!({
        "status": d.status,
        "num_components": d.components.len(),
        "components": components,
        "refinements_used": d.refinements_used,
        "cover": {"atoms": d.cover.len(), "mesh": d.cover.mesh(), "delta": d.cover.delta},
        "diagnostics": d.diagnostics,
    }))?;
    out.write_json("decomposition.json", &report)?;
    out.certify("decomposition", report);
    if cfg.params.dot {
        if let Some(g) = &d.inner {
            out.write("inner.dot", &g.to_dot(Some(&d.cover)))?;
        }
        if let Some(g) = &d.outer {
            out.write("outer.dot", &g.to_dot(Some(&d.cover)))?;
        }
    }
    Ok(match d.status {
        DecompositionStatus::Decomposed => Status::Success,
        DecompositionStatus::UndecidedAtMaxResolution => Status::Uncertified(format!(
            "undecided after {} refinements; a slightly different epsilon usually resolves this",
            d.refinements_used
        )),
    })
}

fn run_grid(cfg: &RunConfig, map: &MapSpec, noise: &NoiseModel, out: &mut Artifacts) -> Result<Status> {
    let sol = invariant_density_grid(map, noise, cfg.params.accuracy, &grid_options(cfg))?;
    let cert = grid_certificate(&sol.certificate)?;
    out.write("density.csv", &density_csv(&sol.density))?;
    out.write_json("certificate.json", &cert)?;
    out.certify("grid", cert);
    out.certify("doeblin", json(&doeblin_summary(&sol.doeblin))?);
    Ok(Status::Success)
}

fn run_spectral(cfg: &RunConfig, map: &MapSpec, noise: &NoiseModel, out: &mut Artifacts) -> Result<Status> {
    let sol = invariant_density_spectral(map, noise, cfg.params.bits)?;
    out.write_json("density.json", &json(&sol.density)?)?;
    let mut csv = String::from("x,density\n");
    for k in 0..SPECTRAL_SAMPLES {
        let x = k as f64 / SPECTRAL_SAMPLES as f64;
        let _ = writeln!(csv, "{x:.16e},{:.16e}", sol.density.eval(x).0);
    }
    out.write("density.csv", &csv)?;
    let cert = spectral_certificate(&sol, cfg.params.bits)?;
    out.write_json("certificate.json", &cert)?;
    out.certify("spectral", cert);
    Ok(Status::Success)
}

fn run_simulate(cfg: &RunConfig, map: &MapSpec, noise: &NoiseModel, out: &mut Artifacts) -> Result<Status> {
    let p = &cfg.params;
    let runs = simulate_many(map, noise, &p.x0, p.steps, &p.seeds)?;
    for (seed, traj) in p.seeds.iter().zip(&runs) {
        out.write(&format!("trajectory_seed{seed}.csv"), &traj.to_csv())?;
    }
    if cfg.dim == 1 {
        let burn_in = p.burn_in.unwrap_or_else(|| default_burn_in(None).min(p.steps / 10));
        let hist = empirical_density_batched(&runs, p.num_atoms, burn_in, MC_BATCHES)?;
        out.write("histogram.csv", &density_csv(&hist))?;
        out.certify(
            "monte_carlo",
            json(&json!({
                "burn_in": burn_in,
                "samples": runs.len() * (p.steps + 1 - burn_in),
                "batches": MC_BATCHES,
                "tv_band": tv_band(&hist),
            }))?,
        );
    }
    Ok(Status::Success)
}

fn run_compare(cfg: &RunConfig, map: &MapSpec, noise: &NoiseModel, out: &mut Artifacts) -> Result<Status> {
    let p = &cfg.params;
    let (reference, certified_bound, doeblin) = match cfg.noise.kind {
        NoiseKindArg::Uniform => {
            let sol = invariant_density_grid(map, noise, p.accuracy, &grid_options(cfg))?;
            let n = sol.density.len();
            if n % p.num_atoms != 0 {
                anyhow::bail!("grid partition of {n} atoms cannot be coarsened to {}", p.num_atoms);
            }
            out.certify("grid", grid_certificate(&sol.certificate)?);
            out.certify("doeblin", json(&doeblin_summary(&sol.doeblin))?);
            (sol.density.coarsen(n / p.num_atoms)?, sol.certificate.tv_bound, Some(sol.doeblin))
        }
        NoiseKindArg::Gaussian => {
            let sol = invariant_density_spectral(map, noise, p.bits)?;
            let n = sol.density.num_atoms();
            let grid = if p.num_atoms >= n {
                sol.density.to_grid(p.num_atoms / n)?
            } else {
                sol.density.to_grid(1)?.coarsen(n / p.num_atoms)?
            };
            out.certify("spectral", spectral_certificate(&sol, p.bits)?);
            // a sup-norm error e is at most e/2 in total variation
            (grid, 0.5 * sol.certified_error, None)
        }
    };
    let burn_in = p.burn_in.unwrap_or_else(|| default_burn_in(doeblin.as_ref()));
    if burn_in >= p.steps {
        anyhow::bail!("burn-in of {burn_in} steps leaves nothing of {} steps", p.steps);
    }
    let runs = simulate_many(map, noise, &p.x0, p.steps, &p.seeds)?;
    let mc = empirical_density_batched(&runs, p.num_atoms, burn_in, MC_BATCHES)?;
    let tv = tv_distance(&reference, &mc);
    let w1 = w1_distance(&reference, &mc)?;
    let band = tv_band(&mc);
    let pass = tv <= certified_bound + band;
    let report = json(&json!({
        "tv": tv,
        "w1": w1,
        "certified_bound": certified_bound,
        "mc_band": band,
        "pass": pass,
        "burn_in": burn_in,
    }))?;
    out.write("reference.csv", &density_csv(&reference))?;
    out.write("empirical.csv", &density_csv(&mc))?;
    out.write_json("compare.json", &report)?;
    out.certify("compare", report);
    Ok(if pass {
        Status::Success
    } else {
        Status::Uncertified(format!("tv {tv:.3e} exceeds certified bound plus band {:.3e}", certified_bound + band))
    })
}

fn run_certify(cfg: &RunConfig, map: &MapSpec, noise: &NoiseModel, out: &mut Artifacts) -> Result<Status> {
    match cfg.noise.kind {
        NoiseKindArg::Uniform => {
            let r = region(cfg);
            let (d, _) = best_doeblin(map, noise, r.as_deref(), cfg.params.assume_invariant)?;
            let cert = json(&doeblin_summary(&d))?;
            out.write_json("doeblin.json", &cert)?;
            out.certify("doeblin", cert);
        }
        NoiseKindArg::Gaussian => {
            let cst = noise_constants(noise)?;
            let atoms = default_num_atoms(cst.1);
            let b = truncation_budget(cst, 1.0 / atoms as f64, cfg.params.bits)?;
            let cert = json(&json!({"num_atoms": atoms, "budget": b}))?;
            out.write_json("budget.json", &cert)?;
            out.certify("budget", cert);
        }
    }
    Ok(Status::Success)
}
