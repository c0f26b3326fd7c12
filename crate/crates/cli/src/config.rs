//! Run configuration: a TOML file with dotted sections, overridden by flags.

use serde::Serialize;
use std::fmt;
use std::path::PathBuf;
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Decompose,
    Grid,
    Spectral,
    Simulate,
    Compare,
    Certify,
}

impl Command {
    fn parse(s: &str) -> Option<Command> {
        Some(match s {
            "decompose" => Command::Decompose,
            "grid" => Command::Grid,
            "spectral" => Command::Spectral,
            "simulate" => Command::Simulate,
            "compare" => Command::Compare,
            "certify" => Command::Certify,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindArg {
    Uniform,
    Gaussian,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseConfig {
    pub kind: NoiseKindArg,
    pub epsilon: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub accuracy: f64,
    pub bits: u32,
    pub num_atoms: usize,
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub burn_in: Option<usize>,
    pub x0: Vec<f64>,
    pub max_refinements: usize,
    pub initial_mesh: f64,
    pub region: Option<Vec<[f64; 2]>>,
    pub assume_invariant: bool,
    pub dot: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub map: String,
    pub dim: usize,
    pub noise: NoiseConfig,
    pub params: Params,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    /// TOML syntax; the message carries line and column.
    Parse(String),
    Missing(&'static str),
    Type { field: String, expected: &'static str },
    Unknown(String),
    Invalid { field: &'static str, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "cannot read {}: {message}", path.display()),
            ConfigError::Parse(m) => write!(f, "{m}"),
            ConfigError::Missing(field) => write!(f, "missing required field `{field}`"),
            ConfigError::Type { field, expected } => write!(f, "field `{field}` must be {expected}"),
            ConfigError::Unknown(field) => write!(f, "unknown field `{field}`"),
            ConfigError::Invalid { field, message } => write!(f, "field `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub map: Option<String>,
    pub dim: Option<usize>,
    pub noise: Option<NoiseKindArg>,
    pub epsilon: Option<f64>,
    pub accuracy: Option<f64>,
    pub bits: Option<u32>,
    pub atoms: Option<usize>,
    pub steps: Option<usize>,
    pub seeds: Vec<u64>,
    pub burn_in: Option<usize>,
    pub x0: Vec<f64>,
    pub max_refinements: Option<usize>,
    pub dot: bool,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

const TOP: &[&str] = &["command", "map", "dim", "output_dir", "threads", "noise", "params"];
const NOISE: &[&str] = &["kind", "epsilon"];
const PARAMS: &[&str] = &[
    "accuracy",
    "bits",
    "num_atoms",
    "steps",
    "seeds",
    "burn_in",
    "x0",
    "max_refinements",
    "initial_mesh",
    "region",
    "assume_invariant",
    "dot",
];

pub fn parse_table(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))
}

fn set(table: &mut Table, section: Option<&str>, key: &str, v: Value) {
    let t = match section {
        None => table,
        Some(s) => table
            .entry(s)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("section checked to be a table"),
    };
    t.insert(key.to_string(), v);
}

fn check_keys(table: &Table) -> Result<(), ConfigError> {
    for (k, v) in table {
        if !TOP.contains(&k.as_str()) {
            return Err(ConfigError::Unknown(k.clone()));
        }
        let allowed = match k.as_str() {
            "noise" => NOISE,
            "params" => PARAMS,
            _ => continue,
        };
        let sub = v.as_table().ok_or_else(|| ConfigError::Type {
            field: k.clone(),
            expected: "a table",
        })?;
        for key in sub.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::Unknown(format!("{k}.{key}")));
            }
        }
    }
    Ok(())
}

struct View<'a>(&'a Table);

impl View<'_> {
    fn get(&self, path: &str) -> Option<&Value> {
        match path.split_once('.') {
            Some((s, k)) => self.0.get(s)?.as_table()?.get(k),
            None => self.0.get(path),
        }
    }

    fn float(&self, path: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(type_err(path, "a number")),
        }
    }

    fn uint(&self, path: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(type_err(path, "a nonnegative integer")),
        }
    }

    fn string(&self, path: &str) -> Result<Option<String>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(type_err(path, "a string")),
        }
    }

    fn boolean(&self, path: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(type_err(path, "true or false")),
        }
    }

    fn array(&self, path: &str) -> Result<Option<&Vec<Value>>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(type_err(path, "an array")),
        }
    }
}

fn type_err(field: &str, expected: &'static str) -> ConfigError {
    ConfigError::Type {
        field: field.to_string(),
        expected,
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Merges `overrides` into `table` and validates the result for its command.
pub fn resolve(mut table: Table, o: &Overrides) -> Result<RunConfig, ConfigError> {
    check_keys(&table)?;
    if let Some(c) = o.command {
        let name = serde_json::to_value(c).expect("enum serializes");
        set(&mut table, None, "command", Value::String(name.as_str().unwrap_or_default().into()));
    }
    if let Some(m) = &o.map {
        set(&mut table, None, "map", Value::String(m.clone()));
    }
    if let Some(d) = o.dim {
        set(&mut table, None, "dim", Value::Integer(d as i64));
    }
    if let Some(k) = o.noise {
        let s = if k == NoiseKindArg::Uniform { "uniform" } else { "gaussian" };
        set(&mut table, Some("noise"), "kind", Value::String(s.into()));
    }
    if let Some(e) = o.epsilon {
        set(&mut table, Some("noise"), "epsilon", Value::Float(e));
    }
    if let Some(a) = o.accuracy {
        set(&mut table, Some("params"), "accuracy", Value::Float(a));
    }
    if let Some(b) = o.bits {
        set(&mut table, Some("params"), "bits", Value::Integer(b as i64));
    }
    if let Some(a) = o.atoms {
        set(&mut table, Some("params"), "num_atoms", Value::Integer(a as i64));
    }
    if let Some(s) = o.steps {
        set(&mut table, Some("params"), "steps", Value::Integer(s as i64));
    }
    if !o.seeds.is_empty() {
        let v = o.seeds.iter().map(|s| Value::Integer(*s as i64)).collect();
        set(&mut table, Some("params"), "seeds", Value::Array(v));
    }
    if let Some(b) = o.burn_in {
        set(&mut table, Some("params"), "burn_in", Value::Integer(b as i64));
    }
    if !o.x0.is_empty() {
        let v = o.x0.iter().map(|x| Value::Float(*x)).collect();
        set(&mut table, Some("params"), "x0", Value::Array(v));
    }
    if let Some(m) = o.max_refinements {
        set(&mut table, Some("params"), "max_refinements", Value::Integer(m as i64));
    }
    if o.dot {
        set(&mut table, Some("params"), "dot", Value::Boolean(true));
    }
    if let Some(t) = o.threads {
        set(&mut table, None, "threads", Value::Integer(t as i64));
    }
    if let Some(p) = &o.out {
        set(&mut table, None, "output_dir", Value::String(p.display().to_string()));
    }
    build(&View(&table))
}

fn build(v: &View) -> Result<RunConfig, ConfigError> {
    let command = match v.string("command")? {
        None => return Err(ConfigError::Missing("command")),
        Some(s) => Command::parse(&s).ok_or_else(|| invalid("command", format!("unknown command '{s}'")))?,
    };
    let map = v.string("map")?.ok_or(ConfigError::Missing("map"))?;
    let dim = v.uint("dim")?.unwrap_or(1) as usize;
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    if dim != 1 && command != Command::Simulate {
        return Err(invalid("dim", "only `simulate` handles maps of dimension above 1"));
    }

    let kind = match v.string("noise.kind")?.as_deref() {
        None if command == Command::Spectral => NoiseKindArg::Gaussian,
        None | Some("uniform") => NoiseKindArg::Uniform,
        Some("gaussian") => NoiseKindArg::Gaussian,
        Some(other) => return Err(invalid("noise.kind", format!("'{other}' is neither uniform nor gaussian"))),
    };
    let epsilon = v.float("noise.epsilon")?.ok_or(ConfigError::Missing("noise.epsilon"))?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("noise.epsilon", "must be a positive number"));
    }
    match (command, kind) {
        (Command::Grid | Command::Decompose, NoiseKindArg::Gaussian) => {
            return Err(invalid("noise.kind", "this command needs uniform noise"))
        }
        (Command::Spectral, NoiseKindArg::Uniform) => {
            return Err(invalid("noise.kind", "the spectral solver needs gaussian noise"))
        }
        _ => {}
    }

    let accuracy = v.float("params.accuracy")?.unwrap_or(0.05);
    if !(accuracy > 0.0 && accuracy <= 1.0) {
        return Err(invalid("params.accuracy", "must lie in (0, 1]"));
    }
    let bits = v.uint("params.bits")?.unwrap_or(16);
    if !(1..=52).contains(&bits) {
        return Err(invalid("params.bits", "must lie in 1..=52"));
    }
    let num_atoms = v.uint("params.num_atoms")?.unwrap_or(64) as usize;
    if !(num_atoms.is_power_of_two() && (2..=4096).contains(&num_atoms)) {
        return Err(invalid("params.num_atoms", "must be a power of two between 2 and 4096"));
    }
    let steps = v.uint("params.steps")?.unwrap_or(100_000) as usize;
    if steps == 0 {
        return Err(invalid("params.steps", "must be positive"));
    }
    let seeds = match v.array("params.seeds")? {
        None => vec![0],
        Some(a) => a
            .iter()
            .map(|s| match s {
                Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(type_err("params.seeds", "an array of nonnegative integers")),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    if seeds.is_empty() {
        return Err(invalid("params.seeds", "needs at least one seed"));
    }
    let burn_in = v.uint("params.burn_in")?.map(|b| b as usize);
    if let Some(b) = burn_in {
        if b >= steps {
            return Err(invalid("params.burn_in", "must be below params.steps"));
        }
    }
    let x0 = match v.array("params.x0")? {
        None => vec![0.5; dim],
        Some(a) => a
            .iter()
            .map(|x| number(x).filter(|x| x.is_finite()).ok_or_else(|| type_err("params.x0", "an array of numbers")))
            .collect::<Result<Vec<_>, _>>()?,
    };
    if x0.len() != dim {
        return Err(invalid("params.x0", format!("needs {dim} coordinates, got {}", x0.len())));
    }
    let max_refinements = v.uint("params.max_refinements")?.unwrap_or(10) as usize;
    let initial_mesh = v.float("params.initial_mesh")?.unwrap_or(0.125);
    if !(initial_mesh > 0.0 && initial_mesh <= 0.5) {
        return Err(invalid("params.initial_mesh", "must lie in (0, 1/2]"));
    }
    let region = match v.array("params.region")? {
        None => None,
        Some(a) => Some(
            a.iter()
                .map(|arc| {
                    let pair = arc.as_array().filter(|p| p.len() == 2);
                    match pair.map(|p| (number(&p[0]), number(&p[1]))) {
                        Some((Some(lo), Some(hi))) if lo <= hi && hi - lo < 1.0 => Ok([lo, hi]),
                        _ => Err(type_err("params.region", "an array of [lo, hi] pairs with lo <= hi < lo + 1")),
                    }
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    let assume_invariant = v.boolean("params.assume_invariant")?.unwrap_or(false);
    if assume_invariant && region.is_none() {
        return Err(invalid("params.assume_invariant", "needs params.region"));
    }
    let dot = v.boolean("params.dot")?.unwrap_or(false);
    let output_dir = PathBuf::from(v.string("output_dir")?.unwrap_or_else(|| "ergomeasure-out".into()));
    let threads = match v.uint("threads")? {
        Some(0) => return Err(invalid("threads", "must be at least 1")),
        t => t.map(|t| t as usize),
    };

    Ok(RunConfig {
        command,
        map,
        dim,
        noise: NoiseConfig { kind, epsilon },
        params: Params {
            accuracy,
            bits: bits as u32,
            num_atoms,
            steps,
            seeds,
            burn_in,
            x0,
            max_refinements,
            initial_mesh,
            region,
            assume_invariant,
            dot,
        },
        output_dir,
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_text(text: &str, o: &Overrides) -> Result<RunConfig, ConfigError> {
        resolve(parse_table(text)?, o)
    }

    #[test]
    fn dotted_keys_and_sections_agree() {
        let a = resolve_text("command = \"grid\"\nmap = \"doubling\"\nnoise.epsilon = 0.2\n", &Overrides::default()).unwrap();
        let b = resolve_text(
            "command = \"grid\"\nmap = \"doubling\"\n[noise]\nepsilon = 0.2\n",
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(a.noise.epsilon, b.noise.epsilon);
        assert_eq!(a.noise.kind, NoiseKindArg::Uniform);
    }

    #[test]
    fn missing_epsilon_is_named() {
        let e = resolve_text("command = \"grid\"\nmap = \"doubling\"\n", &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("noise.epsilon"), "{e}");
    }

    #[test]
    fn flags_override_the_file() {
        let o = Overrides {
            epsilon: Some(0.3),
            seeds: vec![4, 5],
            command: Some(Command::Simulate),
            ..Overrides::default()
        };
        let c = resolve_text("command = \"grid\"\nmap = \"doubling\"\nnoise.epsilon = 0.2\n", &o).unwrap();
        assert_eq!(c.noise.epsilon, 0.3);
        assert_eq!(c.params.seeds, vec![4, 5]);
        assert_eq!(c.command, Command::Simulate);
    }

    #[test]
    fn unknown_and_mistyped_fields_are_rejected() {
        let e = resolve_text("map = \"doubling\"\nnoise.epsilom = 0.2\n", &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("noise.epsilom"));
        let e = resolve_text("command = \"grid\"\nmap = 3\n", &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("`map`"));
    }

    #[test]
    fn syntax_errors_report_a_line() {
        let e = parse_table("map = \"doubling\"\nnoise.epsilon = = 0.2\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn spectral_defaults_to_gaussian_and_grid_rejects_it() {
        let c = resolve_text("command = \"spectral\"\nmap = \"doubling\"\nnoise.epsilon = 0.1\n", &Overrides::default()).unwrap();
        assert_eq!(c.noise.kind, NoiseKindArg::Gaussian);
        let e = resolve_text(
            "command = \"grid\"\nmap = \"doubling\"\nnoise = { kind = \"gaussian\", epsilon = 0.1 }\n",
            &Overrides::default(),
        )
        .unwrap_err();
        assert!(e.to_string().contains("noise.kind"));
    }
}
