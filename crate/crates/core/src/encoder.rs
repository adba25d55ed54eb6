//! Thresholded features `max_k(W^T x)` and the support-recovery metric.

use std::cmp::Ordering;

use ndarray::{Array1, ArrayView1, ArrayViewMut1, Axis};

use crate::error::{DltfError, Result};
use crate::model::{DataMatrix, Dictionary, SparseCodeBatch, SupportMask};

/// A vector with at most `k` nonzeros, obtained by keeping the `k`
/// largest-magnitude entries of its input.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedFeature {
    pub values: Array1<f64>,
    pub k: usize,
}

/// Magnitude-descending order; equal magnitudes keep the lower index first.
#[inline]
fn by_magnitude_then_index(v: &[f64], a: usize, b: usize) -> Ordering {
    v[b].abs()
        .partial_cmp(&v[a].abs())
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

/// Indices of the `k` largest-magnitude entries (unordered), ties to lower index.
pub(crate) fn top_k_indices(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < v.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| by_magnitude_then_index(v, a, b));
        idx.truncate(k);
    }
    idx
}

/// Zeroes every entry of `v` outside its top-`k` magnitudes, in place.
pub(crate) fn threshold_in_place(mut v: ArrayViewMut1<'_, f64>, k: usize, scratch: &mut Vec<f64>) {
    let m = v.len();
    if k >= m {
        return;
    }
    scratch.clear();
    scratch.extend(v.iter().copied());
    let keep = top_k_indices(scratch, k);
    v.fill(0.0);
    for i in keep {
        v[i] = scratch[i];
    }
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k < 1 || k > m {
        return Err(DltfError::InvalidK { k, len: m });
    }
    Ok(())
}

/// Keeps the `k` largest-magnitude entries of `v`, zeroing the rest.
pub fn max_k(v: ArrayView1<'_, f64>, k: usize) -> Result<ThresholdedFeature> {
    check_k(k, v.len())?;
    let mut values = v.to_owned();
    let mut scratch = Vec::with_capacity(v.len());
    threshold_in_place(values.view_mut(), k, &mut scratch);
    Ok(ThresholdedFeature { values, k })
}

/// Thresholded features of every sample: column `i` is `max_k(W^T x_i)`.
pub fn encode_batch(w: &Dictionary, x: &DataMatrix, k: usize) -> Result<SparseCodeBatch> {
    if w.n() != x.n() {
        return Err(DltfError::DimensionMismatch(format!(
            "dictionary has n = {}, data has n = {}",
            w.n(),
            x.n()
        )));
    }
    check_k(k, w.m())?;
    let mut codes = w.view().t().dot(&x.view());
    let mut scratch = Vec::with_capacity(w.m());
    for col in codes.axis_iter_mut(Axis(1)) {
        threshold_in_place(col, k, &mut scratch);
    }
    SparseCodeBatch::new(codes, k)
}

/// Indicator of the nonzero entries of `v` (exact zero test).
pub fn support(v: ArrayView1<'_, f64>) -> SupportMask {
    SupportMask::from_bits(v.iter().map(|x| *x != 0.0).collect())
}

/// Mean over samples of half the Hamming distance between column supports.
pub fn ave_dif(
    zhat: ndarray::ArrayView2<'_, f64>,
    z: ndarray::ArrayView2<'_, f64>,
) -> Result<f64> {
    if zhat.dim() != z.dim() {
        return Err(DltfError::DimensionMismatch(format!(
            "{:?} vs {:?}",
            zhat.dim(),
            z.dim()
        )));
    }
    let n_samples = z.ncols();
    if n_samples == 0 {
        return Err(DltfError::DimensionMismatch("no samples".into()));
    }
    let total: usize = zhat
        .axis_iter(Axis(1))
        .zip(z.axis_iter(Axis(1)))
        .map(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .filter(|(x, y)| (**x != 0.0) != (**y != 0.0))
                .count()
        })
        .sum();
    Ok(total as f64 / (2.0 * n_samples as f64))
}
