//! Shared numerical data model.
//!
//! Matrices are dense `f64` arrays. Columns carry the meaning: a dictionary
//! column is an atom, a data or code column is a sample.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{DltfError, Result};

/// Absolute tolerance on atom norms.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Columns with norm below this cannot be normalized.
pub const ZERO_COLUMN_TOL: f64 = 1e-12;

/// An `n x m` matrix whose columns (atoms) have unit l2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    data: Array2<f64>,
}

impl Dictionary {
    /// Wraps a matrix that already has unit-norm columns.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        check_nonempty(&data)?;
        check_finite(data.view())?;
        for (j, col) in data.axis_iter(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(DltfError::NotUnitNorm { column: j, norm });
            }
        }
        Ok(Self { data })
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of atoms.
    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn atom(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Largest deviation of any atom norm from one.
    pub fn max_colnorm_deviation(&self) -> f64 {
        self.data
            .axis_iter(Axis(1))
            .map(|c| (c.dot(&c).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Divides every column of `raw` by its l2 norm.
pub fn normalize_columns(raw: &Array2<f64>) -> Result<Dictionary> {
    check_nonempty(raw)?;
    check_finite(raw.view())?;
    let mut data = raw.clone();
    for (j, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
        let norm = col.dot(&col).sqrt();
        if norm < ZERO_COLUMN_TOL {
            return Err(DltfError::ZeroColumn { column: j, norm });
        }
        col.mapv_inplace(|v| v / norm);
    }
    Ok(Dictionary { data })
}

/// The Gram matrix `W^T W`, exactly symmetric.
pub fn gram(w: &Dictionary) -> Array2<f64> {
    let v = w.view();
    let mut g = v.t().dot(&v);
    let m = g.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let s = g[[i, j]];
            g[[j, i]] = s;
        }
    }
    g
}

/// An `n x N` matrix of observed samples, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: Array2<f64>,
}

impl DataMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        check_nonempty(&data)?;
        check_finite(data.view())?;
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Sample count.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.column(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// An `m x N` code matrix whose columns have at most `k` nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodeBatch {
    data: Array2<f64>,
    k: usize,
}

impl SparseCodeBatch {
    pub fn new(data: Array2<f64>, k: usize) -> Result<Self> {
        let m = data.nrows();
        if k < 1 || k > m {
            return Err(DltfError::InvalidK { k, len: m });
        }
        check_finite(data.view())?;
        for (i, col) in data.axis_iter(Axis(1)).enumerate() {
            let nnz = col.iter().filter(|v| **v != 0.0).count();
            if nnz > k {
                return Err(DltfError::SparsityViolated { column: i, nnz, k });
            }
        }
        Ok(Self { data, k })
    }

    pub fn zeros(m: usize, n_samples: usize, k: usize) -> Result<Self> {
        Self::new(Array2::zeros((m, n_samples)), k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Nonzero `(row, value)` pairs of column `i`.
    pub fn column_entries(&self, i: usize) -> Vec<(usize, f64)> {
        self.data
            .column(i)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(r, v)| (r, *v))
            .collect()
    }
}

/// Boolean support indicator of a vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportMask {
    bits: Vec<bool>,
}

impl SupportMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of positions where the two masks differ.
    pub fn xor_count(&self, other: &SupportMask) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Squared Frobenius norm.
pub fn frob_sq(a: &ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Frobenius inner product.
pub fn frob_dot(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `G * Z` exploiting the column sparsity of `Z`.
pub fn mul_sparse_right(g: &ArrayView2<'_, f64>, z: &SparseCodeBatch) -> Array2<f64> {
    let mut out = Array2::zeros((g.nrows(), z.len()));
    for (i, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        for (r, v) in z.column_entries(i) {
            col.scaled_add(v, &g.column(r));
        }
    }
    out
}

fn check_nonempty(a: &Array2<f64>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(DltfError::DimensionMismatch(format!(
            "matrix must be non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn check_finite(a: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(DltfError::NonFinite { row, col });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_is_already_normalized() {
        let eye = Array2::<f64>::eye(2);
        let w = normalize_columns(&eye).unwrap();
        assert_eq!(w.view(), eye.view());
    }

    #[test]
    fn three_four_five() {
        let raw = array![[3.0], [4.0]];
        let w = normalize_columns(&raw).unwrap();
        assert!((w.view()[[0, 0]] - 0.6).abs() < 1e-15);
        assert!((w.view()[[1, 0]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_column_rejected() {
        let raw = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(matches!(
            normalize_columns(&raw),
            Err(DltfError::ZeroColumn { column: 1, .. })
        ));
    }

    #[test]
    fn dictionary_new_checks_norms() {
        assert!(Dictionary::new(array![[1.0, 0.5], [0.0, 0.5]]).is_err());
        assert!(Dictionary::new(Array2::eye(3)).is_ok());
    }

    #[test]
    fn gram_of_orthonormal_is_identity() {
        let w = Dictionary::new(Array2::eye(4)).unwrap();
        assert_eq!(gram(&w), Array2::<f64>::eye(4));
    }

    #[test]
    fn gram_duplicate_columns() {
        let raw = array![[1.0, 2.0, 1.0], [1.0, 0.0, 1.0]];
        let g = gram(&normalize_columns(&raw).unwrap());
        assert!((g[[0, 2]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_random_matches_direct_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raw = Array2::from_shape_fn((4, 6), |_| StandardNormal.sample(&mut rng));
        let w = normalize_columns(&raw).unwrap();
        let g = gram(&w);
        for i in 0..6 {
            assert!((g[[i, i]] - 1.0).abs() < 1e-8);
            for j in 0..6 {
                let direct: f64 = (0..4).map(|r| w.view()[[r, i]] * w.view()[[r, j]]).sum();
                assert!((g[[i, j]] - direct).abs() < 1e-14);
                assert_eq!(g[[i, j]], g[[j, i]]);
            }
        }
    }

    #[test]
    fn sparse_batch_enforces_budget() {
        let z = array![[1.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        assert!(SparseCodeBatch::new(z.clone(), 2).is_ok());
        assert!(matches!(
            SparseCodeBatch::new(z, 1),
            Err(DltfError::SparsityViolated { column: 0, .. })
        ));
        assert!(SparseCodeBatch::zeros(3, 2, 4).is_err());
    }

    #[test]
    fn data_matrix_rejects_nan() {
        assert!(DataMatrix::new(array![[1.0, f64::NAN]]).is_err());
    }

    #[test]
    fn sparse_product_matches_dense() {
        let g = array![[1.0, 2.0, 0.5], [0.0, 1.0, 3.0]];
        let z = SparseCodeBatch::new(array![[1.0, 0.0], [0.0, -2.0], [4.0, 0.0]], 2).unwrap();
        assert_eq!(mul_sparse_right(&g.view(), &z), g.dot(&z.view()));
    }
}
