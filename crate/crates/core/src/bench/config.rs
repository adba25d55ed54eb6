use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DltfError, Result};
use crate::trainer::Hyperparams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Original,
    Random,
    Ksvd,
    Dltf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Original, Method::Random, Method::Ksvd, Method::Dltf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Random => "random",
            Method::Ksvd => "ksvd",
            Method::Dltf => "dltf",
        }
    }

    /// Whether the dictionary is learned from data and so carries an
    /// arbitrary atom order relative to the generator.
    pub fn is_learned(self) -> bool {
        matches!(self, Method::Ksvd | Method::Dltf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = DltfError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| DltfError::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Benchmark configuration. JSON field names match the struct fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N_train")]
    pub n_train: usize,
    #[serde(rename = "N_test")]
    pub n_test: usize,
    pub k_list: Vec<usize>,
    pub lambda: f64,
    pub theta: f64,
    pub beta: f64,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub output: Option<PathBuf>,
    /// Standard deviation of the additive noise.
    pub noise_std: f64,
    pub ksvd_iters: usize,
    pub dltf_outer_iters: usize,
    /// Relabel learned atoms to the generator's order before scoring.
    pub align_learned: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 64,
            m: 128,
            n_train: 2000,
            n_test: 2000,
            k_list: vec![4, 6, 8],
            lambda: 0.05,
            theta: 0.01,
            beta: 1.0,
            seeds: vec![0, 1, 2],
            methods: Method::ALL.to_vec(),
            output: None,
            noise_std: 0.1,
            ksvd_iters: 30,
            dltf_outer_iters: 30,
            align_learned: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DltfError::InvalidParameter(msg));
        if self.n == 0 || self.m == 0 || self.n_train == 0 || self.n_test == 0 {
            return bad(format!(
                "dimensions must be positive: n = {}, m = {}, N_train = {}, N_test = {}",
                self.n, self.m, self.n_train, self.n_test
            ));
        }
        if self.k_list.is_empty() || self.seeds.is_empty() || self.methods.is_empty() {
            return bad("k_list, seeds and methods must be nonempty".into());
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k == 0 || k > self.m) {
            return Err(DltfError::InvalidK { k, len: self.m });
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std = {}", self.noise_std));
        }
        if self.ksvd_iters == 0 || self.dltf_outer_iters == 0 {
            return bad("iteration counts must be positive".into());
        }
        if self.methods.contains(&Method::Ksvd) {
            if let Some(&k) = self.k_list.iter().find(|&&k| k > self.n) {
                return bad(format!("ksvd needs k <= n, got k = {k}, n = {}", self.n));
            }
        }
        self.hyperparams(self.k_list[0]).validate()
    }

    /// Trainer settings for one sparsity level.
    pub fn hyperparams(&self, k: usize) -> Hyperparams {
        Hyperparams {
            lambda: self.lambda,
            theta: self.theta,
            beta: self.beta,
            k,
            atoms: self.m,
            outer_iters: self.dltf_outer_iters,
            ..Hyperparams::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
