//! Artifact writing: atomic files, fixed-precision JSON, the run manifest.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Significant digits kept for every float in JSON output.
const JSON_DIGITS: usize = 12;

fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", JSON_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every non-integer number to [`JSON_DIGITS`] significant digits so
/// that reruns produce byte-identical files.
pub fn fixed(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(fixed).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fixed(v))).collect()),
        other => other,
    }
}

pub fn json<T: Serialize>(x: &T) -> Result<Value> {
    Ok(fixed(serde_json::to_value(x)?))
}

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
    pub certificates: Map<String, Value>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            certificates: Map::new(),
        })
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating a temporary file in {}", self.dir.display()))?;
        tmp.write_all(contents.as_bytes())?;
        tmp.flush()?;
        tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, &s)
    }

    pub fn certify(&mut self, name: &str, v: Value) {
        self.certificates.insert(name.to_string(), v);
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_rounds_floats_and_keeps_integers() {
        let v = serde_json::json!({"a": 0.1 + 0.2, "b": 7, "c": [1.0 / 3.0]});
        let f = fixed(v);
        assert_eq!(f["a"], serde_json::json!(0.3));
        assert_eq!(f["b"], serde_json::json!(7));
        assert_eq!(f["c"][0].as_f64().unwrap(), 0.333333333333);
    }

    #[test]
    fn writes_replace_existing_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path()).unwrap();
        a.write("x.txt", "one").unwrap();
        a.write("x.txt", "two").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("x.txt")).unwrap(), "two");
        assert_eq!(a.written(), ["x.txt"]);
    }
}
