//! Comparison dictionaries: seeded Gaussian, OMP sparse coding and KSVD.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DltfError, Result};
use crate::model::{normalize_columns, DataMatrix, Dictionary, ZERO_COLUMN_TOL};

/// Ridge added to the OMP normal equations.
pub const OMP_RIDGE: f64 = 1e-12;
/// OMP stops once the residual norm drops below this.
pub const OMP_RESIDUAL_TOL: f64 = 1e-10;
const POWER_ITERS: usize = 50;
const POWER_TOL: f64 = 1e-10;

/// Seeded standard-Gaussian `n x m` dictionary with normalized columns.
pub fn random_dictionary(n: usize, m: usize, seed: u64) -> Result<Dictionary> {
    if n == 0 || m == 0 {
        return Err(DltfError::InvalidParameter(format!("dictionary shape {n}x{m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = Array2::from_shape_fn((n, m), |_| StandardNormal.sample(&mut rng));
    normalize_columns(&raw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    pub code: Array1<f64>,
    pub residual_norm: f64,
    /// Chosen atoms in selection order.
    pub selected: Vec<usize>,
}

/// Lower-triangular Cholesky factor of the selected atoms' Gram matrix,
/// grown one row per selection.
struct GrowingCholesky {
    l: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(b.len());
        for (i, row) in self.l.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&y).map(|(a, b)| a * b).sum();
            y.push((b[i] - s) / row[i]);
        }
        y
    }

    fn backward(&self, y: &[f64]) -> Vec<f64> {
        let p = y.len();
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = ((i + 1)..p).map(|j| self.l[j][i] * x[j]).sum();
            x[i] = (y[i] - s) / self.l[i][i];
        }
        x
    }
}

/// Orthogonal matching pursuit with a fixed sparsity budget.
pub fn omp(w: &Dictionary, x: ArrayView1<'_, f64>, k: usize) -> Result<OmpResult> {
    let (n, m) = (w.n(), w.m());
    if x.len() != n {
        return Err(DltfError::DimensionMismatch(format!("signal length {} vs n = {n}", x.len())));
    }
    if k == 0 || k > n.min(m) {
        return Err(DltfError::InvalidK { k, len: n.min(m) });
    }
    let wv = w.view();
    let mut chol = GrowingCholesky { l: Vec::with_capacity(k) };
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut in_set = vec![false; m];
    let mut rhs: Vec<f64> = Vec::with_capacity(k);
    let mut coef: Vec<f64> = Vec::new();
    let mut residual = x.to_owned();
    let mut rnorm = residual.dot(&residual).sqrt();

    while selected.len() < k && rnorm >= OMP_RESIDUAL_TOL {
        let corr = wv.t().dot(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if !in_set[j] && best.is_none_or(|(_, b)| c.abs() > b) {
                best = Some((j, c.abs()));
            }
        }
        let Some((j, cmax)) = best else { break };
        if cmax == 0.0 {
            break;
        }
        let atom = wv.column(j);
        let v: Vec<f64> = selected.iter().map(|&i| wv.column(i).dot(&atom)).collect();
        let l_row = chol.forward(&v);
        let d2 = atom.dot(&atom) + OMP_RIDGE - l_row.iter().map(|a| a * a).sum::<f64>();
        if d2 < OMP_RIDGE / 2.0 {
            return Err(DltfError::SingularSubproblem(j));
        }
        let mut row = l_row;
        row.push(d2.sqrt());
        chol.l.push(row);
        selected.push(j);
        in_set[j] = true;
        rhs.push(atom.dot(&x));

        coef = chol.backward(&chol.forward(&rhs));
        residual.assign(&x);
        for (&i, &a) in selected.iter().zip(&coef) {
            residual.scaled_add(-a, &wv.column(i));
        }
        rnorm = residual.dot(&residual).sqrt();
    }

    let mut code = Array1::zeros(m);
    for (&i, &a) in selected.iter().zip(&coef) {
        code[i] = a;
    }
    Ok(OmpResult { code, residual_norm: rnorm, selected })
}

/// Codes every column of `x` with [`omp`], returning the `m x N` code matrix.
pub fn omp_batch(w: &Dictionary, x: &DataMatrix, k: usize) -> Result<Array2<f64>> {
    let mut z = Array2::zeros((w.m(), x.len()));
    for (i, col) in x.view().columns().into_iter().enumerate() {
        z.column_mut(i).assign(&omp(w, col, k)?.code);
    }
    Ok(z)
}

/// Reconstruction errors around each atom-update sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub error_before: f64,
    pub error_after: f64,
}

#[derive(Debug, Clone)]
pub struct KsvdOutput {
    pub dictionary: Dictionary,
    pub sweeps: Vec<SweepRecord>,
}

/// KSVD from `m` distinct random data columns.
pub fn ksvd_train(x: &DataMatrix, k: usize, m: usize, iters: usize, seed: u64) -> Result<Dictionary> {
    Ok(ksvd_train_with_trace(x, k, m, iters, seed)?.dictionary)
}

fn initial_atoms(x: &DataMatrix, m: usize, seed: u64) -> Result<Dictionary> {
    let (n, n_samples) = (x.n(), x.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Array2::zeros((n, m));
    let picks = sample(&mut rng, n_samples, m.min(n_samples));
    let mut filled = 0;
    for i in picks.iter() {
        let col = x.sample(i);
        if col.dot(&col).sqrt() > ZERO_COLUMN_TOL {
            raw.column_mut(filled).assign(&col);
            filled += 1;
        }
    }
    for j in filled..m {
        for r in 0..n {
            raw[[r, j]] = StandardNormal.sample(&mut rng);
        }
    }
    normalize_columns(&raw)
}

/// Dominant left singular vector of `e` by power iteration on `E E^T`,
/// started at `start`. Starting from the current atom makes `||E^T u||`
/// non-decreasing in the iteration count.
fn dominant_left(e: &ArrayView2<'_, f64>, start: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut u = start.to_owned();
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..POWER_ITERS {
        let v = e.t().dot(&u);
        let next = e.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm <= ZERO_COLUMN_TOL {
            break;
        }
        let gain = v.dot(&v);
        u = next / norm;
        if (gain - prev).abs() <= POWER_TOL * gain.max(1.0) {
            break;
        }
        prev = gain;
    }
    if let Some(first) = u.iter().find(|v| **v != 0.0) {
        if *first < 0.0 {
            u.mapv_inplace(|v| -v);
        }
    }
    u
}

/// KSVD returning the per-sweep reconstruction errors.
pub fn ksvd_train_with_trace(
    x: &DataMatrix,
    k: usize,
    m: usize,
    iters: usize,
    seed: u64,
) -> Result<KsvdOutput> {
    if iters == 0 {
        return Err(DltfError::InvalidParameter("ksvd iters must be positive".into()));
    }
    if m == 0 {
        return Err(DltfError::TooFewAtoms(m));
    }
    let mut w = initial_atoms(x, m, seed)?.into_inner();
    let xv = x.view();
    let mut sweeps = Vec::with_capacity(iters);

    for _ in 0..iters {
        let dict = Dictionary::new(w.clone())?;
        let mut z = omp_batch(&dict, x, k.min(x.n()).min(m))?;
        let mut resid = &xv - &w.dot(&z);
        let error_before = resid.iter().map(|v| v * v).sum::<f64>();
        let mut col_err: Vec<f64> =
            resid.columns().into_iter().map(|c| c.dot(&c)).collect();

        for j in 0..m {
            let users: Vec<usize> = (0..x.len()).filter(|&i| z[[j, i]] != 0.0).collect();
            if users.is_empty() {
                let worst = (0..x.len())
                    .max_by(|&a, &b| col_err[a].total_cmp(&col_err[b]).then(b.cmp(&a)));
                if let Some(i) = worst {
                    let col = xv.column(i);
                    let norm = col.dot(&col).sqrt();
                    if norm > ZERO_COLUMN_TOL {
                        w.column_mut(j).assign(&(&col / norm));
                        col_err[i] = f64::NEG_INFINITY;
                    }
                }
                continue;
            }
            let atom = w.column(j).to_owned();
            let mut e = Array2::zeros((x.n(), users.len()));
            for (c, &i) in users.iter().enumerate() {
                let mut col = e.column_mut(c);
                col.assign(&resid.column(i));
                col.scaled_add(z[[j, i]], &atom);
            }
            let before: f64 = users.iter().map(|&i| {
                let r = resid.column(i);
                r.dot(&r)
            }).sum();
            let u = dominant_left(&e.view(), atom.view());
            let coeffs = e.t().dot(&u);
            for (c, &i) in users.iter().enumerate() {
                z[[j, i]] = coeffs[c];
                let mut r = resid.column_mut(i);
                r.assign(&e.column(c));
                r.scaled_add(-coeffs[c], &u);
            }
            let after: f64 = users.iter().map(|&i| {
                let r = resid.column(i);
                r.dot(&r)
            }).sum();
            debug_assert!(
                after <= before * (1.0 + 1e-9) + 1e-12,
                "atom {j}: restricted residual grew from {before} to {after}"
            );
            w.column_mut(j).assign(&u);
        }

        let error_after = resid.iter().map(|v| v * v).sum::<f64>();
        debug_assert!(
            error_after <= error_before * (1.0 + 1e-9) + 1e-12,
            "sweep error grew from {error_before} to {error_after}"
        );
        sweeps.push(SweepRecord { error_before, error_after });
        // renormalize against drift from the power iteration
        for mut col in w.axis_iter_mut(Axis(1)) {
            let norm = col.dot(&col).sqrt();
            col /= norm;
        }
    }
    Ok(KsvdOutput { dictionary: Dictionary::new(w)?, sweeps })
}
