//! Synthetic support-recovery benchmark, parameter sweeps and timing.

pub mod config;
pub mod report;
pub mod synthetic;

use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{ksvd_train, omp, random_dictionary};
use crate::encoder::{ave_dif, encode_batch};
use crate::error::{DltfError, Result};
use crate::model::Dictionary;
use crate::trainer::train;

pub use config::{BenchConfig, Method};
pub use report::{BenchReport, CellFailure, CellResult, MethodTiming};
pub use synthetic::{generate_synthetic, sample_from, SyntheticInstance};

/// Mixes a master seed with a stream tag (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_GENERATOR: u64 = 0;
const STREAM_RANDOM: u64 = 1;
const STREAM_TRAIN: u64 = 100;
const STREAM_TEST: u64 = 200;
const STREAM_KSVD: u64 = 300;
const STREAM_DLTF: u64 = 400;

/// Reorders the atoms of `w` so that atom `j` is the one matched to
/// `reference`'s atom `j` by a maximum total |correlation| assignment.
pub fn align_to_reference(w: &Dictionary, reference: &Dictionary) -> Result<Dictionary> {
    if w.n() != reference.n() || w.m() != reference.m() {
        return Err(DltfError::DimensionMismatch(format!(
            "align {}x{} against {}x{}",
            w.n(),
            w.m(),
            reference.n(),
            reference.m()
        )));
    }
    let corr = reference.view().t().dot(&w.view());
    let weights = Matrix::from_fn(corr.nrows(), corr.ncols(), |(r, c)| {
        (corr[[r, c]].abs() * 1e9).round() as i64
    });
    let (_, assignment) = kuhn_munkres(&weights);
    let mut out = Array2::zeros(w.view().raw_dim());
    for (r, &c) in assignment.iter().enumerate() {
        out.column_mut(r).assign(&w.atom(c));
    }
    Dictionary::new(out)
}

struct GroupOutput {
    cells: Vec<CellResult>,
    failures: Vec<CellFailure>,
}

fn build_dictionary(
    method: Method,
    cfg: &BenchConfig,
    train_set: &SyntheticInstance,
    k: usize,
    seed: u64,
) -> Result<Dictionary> {
    let (n, m) = (cfg.n, cfg.m);
    let tag = k as u64;
    match method {
        Method::Original => Ok(train_set.w0.clone()),
        Method::Random => random_dictionary(n, m, derive_seed(seed, STREAM_RANDOM)),
        Method::Ksvd => ksvd_train(
            &train_set.x,
            k,
            m,
            cfg.ksvd_iters,
            derive_seed(seed, STREAM_KSVD + tag),
        ),
        Method::Dltf => {
            let hp = cfg.hyperparams(k);
            Ok(train(&train_set.x, &hp, derive_seed(seed, STREAM_DLTF + tag))?.dictionary)
        }
    }
}

fn run_group(cfg: &BenchConfig, seed: u64, k: usize) -> Result<GroupOutput> {
    let w0 = random_dictionary(cfg.n, cfg.m, derive_seed(seed, STREAM_GENERATOR))?;
    let tag = k as u64;
    let train_set =
        sample_from(w0.clone(), cfg.n_train, k, cfg.noise_std, derive_seed(seed, STREAM_TRAIN + tag))?;
    let test_set = sample_from(w0, cfg.n_test, k, cfg.noise_std, derive_seed(seed, STREAM_TEST + tag))?;

    let mut out = GroupOutput { cells: Vec::new(), failures: Vec::new() };
    for &method in &cfg.methods {
        let t0 = Instant::now();
        let dict = build_dictionary(method, cfg, &train_set, k, seed).and_then(|d| {
            if cfg.align_learned && method.is_learned() {
                align_to_reference(&d, &test_set.w0)
            } else {
                Ok(d)
            }
        });
        let train_ms = t0.elapsed().as_secs_f64() * 1e3;
        let scored = dict.and_then(|d| {
            let t1 = Instant::now();
            let codes = encode_batch(&d, &test_set.x, k)?;
            let encode_ms = t1.elapsed().as_secs_f64() * 1e3;
            Ok((ave_dif(codes.view(), test_set.z_true.view())?, encode_ms))
        });
        match scored {
            Ok((value, encode_ms)) => {
                log::info!("{method} k={k} seed={seed}: ave_dif {value:.4}");
                out.cells.push(CellResult { method, k, seed, ave_dif: value, encode_ms, train_ms });
            }
            Err(e) if e.is_numerical() => {
                log::warn!("{method} k={k} seed={seed} failed: {e}");
                out.failures.push(CellFailure { method, k, seed, error: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Runs every `(seed, k)` group, each on its own thread. Train and test
/// sets share the generating dictionary and `k`; all methods of a group see
/// the same test set. Numerical failures are recorded and mark the report
/// partial; validation errors abort.
pub fn run_support_recovery_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let groups: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.k_list.iter().map(move |&k| (s, k)))
        .collect();
    let results: Vec<Result<GroupOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = groups
            .iter()
            .map(|&(s, k)| scope.spawn(move || run_group(cfg, s, k)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(DltfError::InvalidParameter("worker panicked".into()))))
            .collect()
    });

    let mut report = BenchReport::new(cfg.clone());
    let mut cells = Vec::new();
    for r in results {
        let g = r?;
        cells.extend(g.cells);
        report.failures.extend(g.failures);
    }
    let rank = |m: Method| cfg.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    cells.sort_by(|a, b| {
        (rank(a.method), a.k, cfg.seeds.iter().position(|&s| s == a.seed))
            .cmp(&(rank(b.method), b.k, cfg.seeds.iter().position(|&s| s == b.seed)))
    });
    report.cells = cells;
    report.finish_timing();
    if let Some(path) = &cfg.output {
        report.write(path)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Lambda,
    Theta,
    N,
}

impl FromStr for SweepParam {
    type Err = DltfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lambda" => Ok(SweepParam::Lambda),
            "theta" => Ok(SweepParam::Theta),
            "n" => Ok(SweepParam::N),
            other => Err(DltfError::InvalidParameter(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: SweepParam,
    pub value: f64,
    pub report: BenchReport,
}

/// The config with one parameter replaced; `m` stays fixed for the `n` sweep.
pub fn sweep_config(cfg: &BenchConfig, param: SweepParam, value: f64) -> Result<BenchConfig> {
    let mut c = cfg.clone();
    c.output = None;
    match param {
        SweepParam::Lambda => c.lambda = value,
        SweepParam::Theta => c.theta = value,
        SweepParam::N => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(DltfError::InvalidParameter(format!("n = {value} is not a positive integer")));
            }
            c.n = value as usize;
        }
    }
    c.validate()?;
    Ok(c)
}

/// Repeats the benchmark for each grid value.
pub fn run_param_sweep(cfg: &BenchConfig, param: SweepParam, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(DltfError::InvalidParameter("empty sweep grid".into()));
    }
    grid.iter()
        .map(|&value| {
            let c = sweep_config(cfg, param, value)?;
            Ok(SweepPoint { param, value, report: run_support_recovery_bench(&c)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub n: usize,
    pub m: usize,
    pub n_samples: usize,
    pub k: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Each method is timed this many times; the fastest run is kept.
    pub repeats: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { n: 64, m: 128, n_samples: 2000, k: 8, noise_std: 0.1, seed: 0, repeats: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub config: TimingConfig,
    pub thresholded_ms: f64,
    pub omp_ms: f64,
    /// `omp_ms / thresholded_ms`.
    pub ratio: f64,
}

/// Wall-clock of batch thresholded encoding vs per-sample OMP on one test set.
pub fn timing_compare(cfg: &TimingConfig) -> Result<TimingRecord> {
    let inst = generate_synthetic(cfg.n, cfg.m, cfg.n_samples, cfg.k, cfg.noise_std, cfg.seed)?;
    let w = &inst.w0;
    let repeats = cfg.repeats.max(1);
    let mut thresholded_ms = f64::INFINITY;
    let mut omp_ms = f64::INFINITY;
    for _ in 0..repeats {
        let t = Instant::now();
        let codes = encode_batch(w, &inst.x, cfg.k)?;
        thresholded_ms = thresholded_ms.min(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(codes);

        let t = Instant::now();
        for col in inst.x.view().columns() {
            std::hint::black_box(omp(w, col, cfg.k)?);
        }
        omp_ms = omp_ms.min(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(TimingRecord {
        config: cfg.clone(),
        thresholded_ms,
        omp_ms,
        ratio: omp_ms / thresholded_ms.max(1e-9),
    })
}
