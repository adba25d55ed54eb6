use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, Method};
use crate::error::Result;

/// One `(method, k, seed)` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub ave_dif: f64,
    pub encode_ms: f64,
    pub train_ms: f64,
}

/// A cell that failed; the report is then partial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    pub encode_ms: f64,
    pub train_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub library_version: String,
    pub config: BenchConfig,
    pub cells: Vec<CellResult>,
    pub timing: Vec<MethodTiming>,
    pub failures: Vec<CellFailure>,
    pub partial: bool,
}

impl BenchReport {
    pub fn new(config: BenchConfig) -> Self {
        Self {
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            cells: Vec::new(),
            timing: Vec::new(),
            failures: Vec::new(),
            partial: false,
        }
    }

    /// Seed-averaged ave_dif, or `None` if no cell matched.
    pub fn mean_ave_dif(&self, method: Method, k: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.method == method && c.k == k)
            .map(|c| c.ave_dif)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn ave_dif(&self, method: Method, k: usize, seed: u64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.k == k && c.seed == seed)
            .map(|c| c.ave_dif)
    }

    /// Seed-averaged table keyed by `(method, k)`.
    pub fn summary(&self) -> BTreeMap<(Method, usize), f64> {
        let mut out = BTreeMap::new();
        for c in &self.cells {
            out.entry((c.method, c.k))
                .or_insert_with(|| self.mean_ave_dif(c.method, c.k).unwrap_or(f64::NAN));
        }
        out
    }

    pub(crate) fn finish_timing(&mut self) {
        let mut acc: BTreeMap<Method, (f64, f64)> = BTreeMap::new();
        for c in &self.cells {
            let e = acc.entry(c.method).or_default();
            e.0 += c.encode_ms;
            e.1 += c.train_ms;
        }
        self.timing = acc
            .into_iter()
            .map(|(method, (encode_ms, train_ms))| MethodTiming { method, encode_ms, train_ms })
            .collect();
        self.partial = !self.failures.is_empty();
    }

    /// Flat `method,k,seed,ave_dif` table. Timings live only in the JSON
    /// report so the CSV is reproducible byte for byte.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,k,seed,ave_dif\n");
        for c in &self.cells {
            let _ = writeln!(s, "{},{},{},{:.6}", c.method, c.k, c.seed, c.ave_dif);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>.json` and `<stem>.csv` next to `path`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path.with_extension("json"), self.to_json()?)?;
        std::fs::write(path.with_extension("csv"), self.to_csv())?;
        Ok(())
    }
}
