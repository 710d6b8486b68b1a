//! Deterministic tables and machine-checkable verdicts.
//!
//! Result tables must come out byte-identical across reruns and thread
//! counts, so every cell goes through the shortest-roundtrip float writer
//! and rows are assembled on one thread in a fixed order. Wall-clock
//! timings never enter a table; they live in the verdict JSON, which is
//! exempt from the byte-identity guarantee.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Shortest decimal string that parses back to exactly `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// An in-memory CSV with a fixed header. Rendering is the single code path
/// that produces `results.csv` bytes, for the CLI and the tests alike.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> CsvTable {
        CsvTable { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row arity does not match the header");
        self.rows.push(row);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        push_line(&mut out, &self.header);
        for row in &self.rows {
            push_line(&mut out, row);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.render())?;
        Ok(())
    }
}

fn push_line(out: &mut String, cells: &[String]) {
    for (k, cell) in cells.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        if cell.contains([',', '"', '\n']) {
            out.push('"');
            out.push_str(&cell.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(cell);
        }
    }
    out.push('\n');
}

/// SHA-256 over the canonical JSON encoding; identifies a config in every
/// output row so tables from different runs are never conflated.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_string(value)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    let digest = Sha256::digest(json.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize: {e}")))?;
    std::fs::write(path.as_ref(), text + "\n")?;
    Ok(())
}

/// Two-column gnuplot-style data file.
pub fn write_dat(path: impl AsRef<Path>, xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Misaligned("dat columns differ in length".into()));
    }
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        out.push_str(&fmt_f64(*x));
        out.push(' ');
        out.push_str(&fmt_f64(*y));
        out.push('\n');
    }
    std::fs::write(path.as_ref(), out)?;
    Ok(())
}

/// One named assertion of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// PASS/FAIL summary written next to each results table.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub wall_seconds: f64,
    pub threads: usize,
}

impl Verdict {
    pub fn new(
        experiment: impl Into<String>,
        config_hash: impl Into<String>,
        master_seed: u64,
        checks: Vec<Check>,
        wall_seconds: f64,
        threads: usize,
    ) -> Verdict {
        let passed = checks.iter().all(|c| c.passed);
        Verdict {
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            master_seed,
            passed,
            checks,
            wall_seconds,
            threads,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_renders_deterministically_and_escapes() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec!["1".into(), "x,\"y\"".into()]);
        let once = t.render();
        assert_eq!(once, t.render());
        assert_eq!(once, "a,b\n1,\"x,\"\"y\"\"\"\n");
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-17, 12345.678, -2.5e300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn config_hash_tracks_content() {
        use crate::harness::config::ExperimentConfig;
        let a = ExperimentConfig::default_experiment();
        let mut b = ExperimentConfig::default_experiment();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.master_seed += 1;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn verdict_aggregates_checks() {
        let v = Verdict::new(
            "demo",
            "hash",
            7,
            vec![Check::new("one", true, ""), Check::new("two", false, "detail")],
            1.5,
            4,
        );
        assert!(!v.passed);
        let w = Verdict::new("demo", "hash", 7, vec![Check::new("one", true, "")], 0.1, 1);
        assert!(w.passed);
    }
}
