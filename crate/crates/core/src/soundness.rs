//! Randomized soundness suites for the recovery conditions: whenever a
//! condition holds, thresholding must recover the support exactly.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::encoder::{max_k, support};
use crate::error::Result;
use crate::guarantees::{
    rip_constant_exhaustive, strong_condition, strong_delta_upper, weak_condition,
    weak_condition_noisy,
};
use crate::model::{normalize_columns, Dictionary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    /// Instances on which the condition held.
    pub held: usize,
    /// Held but the support was not recovered.
    pub counterexamples: usize,
    /// Instances where the condition could not be evaluated (e.g. `delta`
    /// outside the admissible range).
    pub inadmissible: usize,
    pub elapsed_ms: f64,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            instances: 0,
            held: 0,
            counterexamples: 0,
            inadmissible: 0,
            elapsed_ms: 0.0,
        }
    }

    pub fn sound(&self) -> bool {
        self.counterexamples == 0
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn orthonormalize(mut q: Array2<f64>) -> Array2<f64> {
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let d = q.column(i).dot(&q.column(j));
                let ci = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-d, &ci);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    q
}

/// Square orthonormal basis plus a perturbation of relative size `eps`.
pub fn near_orthonormal(n: usize, eps: f64, rng: &mut ChaCha8Rng) -> Result<Dictionary> {
    let q = orthonormalize(gaussian(n, n, rng));
    normalize_columns(&(q + gaussian(n, n, rng) * (eps / (n as f64).sqrt())))
}

/// Dictionaries spanning low to high coherence: near-orthonormal squares,
/// an orthonormal basis with a few random extra atoms, and Gaussian frames.
fn random_dictionary_mix(rng: &mut ChaCha8Rng) -> Result<Dictionary> {
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(6..=20);
            let eps = rng.random_range(0.0..0.3);
            near_orthonormal(n, eps, rng)
        }
        1 => {
            let n = rng.random_range(16..=48);
            let extra = rng.random_range(1..=6);
            let mut w = Array2::zeros((n, n + extra));
            w.slice_mut(ndarray::s![.., ..n]).assign(&orthonormalize(gaussian(n, n, rng)));
            w.slice_mut(ndarray::s![.., n..]).assign(&gaussian(n, extra, rng));
            normalize_columns(&w)
        }
        _ => {
            let n = rng.random_range(8..=32);
            let m = rng.random_range(n..=2 * n);
            normalize_columns(&gaussian(n, m, rng))
        }
    }
}

/// k-sparse code with random support, signs, and magnitudes in `[lo, 1]`.
fn random_code(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let lo = rng.random_range(0.2..1.0);
    let mut z = Array1::zeros(m);
    for i in sample(rng, m, k) {
        let mag = rng.random_range(lo..=1.0);
        z[i] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    z
}

fn recovers(w: &Dictionary, x: &Array1<f64>, z: &Array1<f64>, k: usize) -> Result<bool> {
    let corr = w.view().t().dot(x);
    let zbar = max_k(corr.view(), k)?;
    Ok(support(zbar.values.view()) == support(z.view()))
}

/// Noiseless coherence condition over `instances` random problems.
pub fn weak_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("weak");
    for _ in 0..instances {
        let w = random_dictionary_mix(&mut rng)?;
        let k = rng.random_range(1..=3.min(w.m()));
        let z = random_code(w.m(), k, &mut rng);
        let x = w.view().dot(&z);
        rep.instances += 1;
        if weak_condition(&w, z.view())?.holds {
            rep.held += 1;
            if !recovers(&w, &x, &z, k)? {
                rep.counterexamples += 1;
            }
        }
    }
    rep.elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(rep)
}

/// Coherence condition with Gaussian noise of random level.
pub fn weak_noisy_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("weak_noisy");
    for _ in 0..instances {
        let w = random_dictionary_mix(&mut rng)?;
        let k = rng.random_range(1..=3.min(w.m()));
        let z = random_code(w.m(), k, &mut rng);
        let std = rng.random_range(0.0..0.05);
        let e = Array1::from_shape_fn(w.n(), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            std * v
        });
        let x = w.view().dot(&z) + &e;
        rep.instances += 1;
        if weak_condition_noisy(&w, z.view(), e.view())?.holds {
            rep.held += 1;
            if !recovers(&w, &x, &z, k)? {
                rep.counterexamples += 1;
            }
        }
    }
    rep.elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(rep)
}

/// RIP condition with `delta = rip_constant_exhaustive(W, 2k)`.
///
/// `near_orthonormal_eps = None` draws Gaussian `n x m` frames; `Some(eps)`
/// draws square near-orthonormal dictionaries (`m` is then ignored).
/// Instances whose exact `delta` falls outside the admissible range are
/// counted as inadmissible.
pub fn strong_suite(
    instances: usize,
    n: usize,
    m: usize,
    k: usize,
    near_orthonormal_eps: Option<f64>,
    seed: u64,
) -> Result<SuiteReport> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new(match near_orthonormal_eps {
        None => "strong_gaussian",
        Some(_) => "strong_near_orthonormal",
    });
    let upper = strong_delta_upper();
    for _ in 0..instances {
        let w = match near_orthonormal_eps {
            None => normalize_columns(&gaussian(n, m, &mut rng))?,
            Some(eps) => near_orthonormal(n, rng.random_range(0.0..eps), &mut rng)?,
        };
        let z = random_code(w.m(), k, &mut rng);
        let std = rng.random_range(0.0..0.02);
        let e = Array1::from_shape_fn(w.n(), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            std * v
        });
        let x = w.view().dot(&z) + &e;
        rep.instances += 1;
        let delta = rip_constant_exhaustive(&w, (2 * k).min(w.m()))?;
        if !(delta > 0.0 && delta < upper) {
            rep.inadmissible += 1;
            continue;
        }
        if strong_condition(&w, z.view(), e.view(), delta)?.holds {
            rep.held += 1;
            if !recovers(&w, &x, &z, k)? {
                rep.counterexamples += 1;
            }
        }
    }
    rep.elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(rep)
}
