use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::baselines::random_dictionary;
use crate::error::{DltfError, Result};
use crate::model::{DataMatrix, Dictionary, SparseCodeBatch};

/// `X = W0 Ztrue + E` with binary `k`-sparse codes and Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub w0: Dictionary,
    pub z_true: SparseCodeBatch,
    pub x: DataMatrix,
    pub noise_std: f64,
    pub seed: u64,
}

/// Draws a fresh generating dictionary and samples from it.
pub fn generate_synthetic(
    n: usize,
    m: usize,
    n_samples: usize,
    k: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticInstance> {
    let w0 = random_dictionary(n, m, super::derive_seed(seed, 0))?;
    sample_from(w0, n_samples, k, noise_std, super::derive_seed(seed, 1))
}

/// Samples `n_samples` columns from a given generating dictionary.
pub fn sample_from(
    w0: Dictionary,
    n_samples: usize,
    k: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticInstance> {
    let m = w0.m();
    if k == 0 || k > m {
        return Err(DltfError::InvalidK { k, len: m });
    }
    if n_samples == 0 {
        return Err(DltfError::InvalidParameter("sample count must be positive".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(DltfError::InvalidParameter(format!("noise_std = {noise_std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Array2::zeros((m, n_samples));
    for i in 0..n_samples {
        for j in sample(&mut rng, m, k).iter() {
            z[[j, i]] = 1.0;
        }
    }
    let mut x = w0.view().dot(&z);
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std)
            .map_err(|e| DltfError::InvalidParameter(e.to_string()))?;
        x.mapv_inplace(|v| v + normal.sample(&mut rng));
    }
    Ok(SyntheticInstance {
        w0,
        z_true: SparseCodeBatch::new(z, k)?,
        x: DataMatrix::new(x)?,
        noise_std,
        seed,
    })
}
