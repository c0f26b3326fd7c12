mod config;
mod output;
mod run;

use clap::Parser;
use config::{Command, ConfigError, NoiseKindArg, Overrides, RunConfig};
use output::{json, Artifacts};
use run::Status;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

/// Certified invariant measures and ergodic decompositions of noisy torus maps.
#[derive(Parser, Debug)]
#[command(name = "ergomeasure", version)]
struct Cli {
    /// Command to run; falls back to `command` in the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in map name (doubling, rotation:<a>, sine2:<a>) or DSL source.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum)]
    noise: Option<NoiseKindArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Target total-variation error of the grid solver.
    #[arg(long)]
    accuracy: Option<f64>,
    /// Target sup-norm error 2^-bits of the spectral solver.
    #[arg(long)]
    bits: Option<u32>,
    /// Histogram / comparison partition size.
    #[arg(long)]
    atoms: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Repeat for several independent runs.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Starting point, one flag per coordinate.
    #[arg(long, allow_negative_numbers = true)]
    x0: Vec<f64>,
    #[arg(long)]
    max_refinements: Option<usize>,
    /// Also write the inner and outer graphs as DOT files.
    #[arg(long)]
    dot: bool,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            command: self.command,
            map: self.map.clone(),
            dim: self.dim,
            noise: self.noise,
            epsilon: self.epsilon,
            accuracy: self.accuracy,
            bits: self.bits,
            atoms: self.atoms,
            steps: self.steps,
            seeds: self.seeds.clone(),
            burn_in: self.burn_in,
            x0: self.x0.clone(),
            max_refinements: self.max_refinements,
            dot: self.dot,
            threads: self.threads,
            out: self.out.clone(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let table = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            config::parse_table(&text).map_err(|e| match e {
                ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => toml::Table::new(),
    };
    config::resolve(table, &cli.overrides())
}

/// Engine errors meaning "ran, but the result could not be certified".
fn is_certified_failure(e: &ergomeasure::Error) -> bool {
    use ergomeasure::Error::*;
    matches!(
        e,
        PrecisionUnreachable { .. }
            | MeshTooCoarse { .. }
            | DegenerateScale { .. }
            | NoConvergence { .. }
            | NotIrreducible
            | CertificateUnobtainable(_)
            | ResourceCap { .. }
            | GammaTooLarge { .. }
            | QuadratureFailure { .. }
            | ContractionViolated(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(k) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let mut out = match Artifacts::new(&cfg.output_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };

    let (code, status) = match run::execute(&cfg, &mut out) {
        Ok(Status::Success) => (0u8, json!({"result": "success"})),
        Ok(Status::Uncertified(why)) => {
            eprintln!("not certified: {why}");
            (2, json!({"result": "uncertified", "message": why}))
        }
        Err(e) => {
            let engine = e.downcast_ref::<ergomeasure::Error>();
            let code = engine.map_or("runtime_error", |x| x.code());
            eprintln!("error[{code}]: {e:#}");
            let exit = if engine.is_some_and(is_certified_failure) { 2 } else { 1 };
            (exit, json!({"result": "error", "code": code, "message": format!("{e:#}")}))
        }
    };

    let manifest = json!({
        "version": ergomeasure::VERSION,
        "config": cfg,
        "status": status,
        "exit_code": code,
        "artifacts": out.written(),
        "certificates": out.certificates.clone(),
    });
    let written = json(&manifest).and_then(|m| out.write_json("manifest.json", &m));
    if let Err(e) = written {
        eprintln!("error: cannot write the manifest: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
