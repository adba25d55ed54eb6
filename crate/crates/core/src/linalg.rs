//! Small dense helpers: symmetric eigenvalues and power iteration.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{DltfError, Result};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &ArrayView2<'_, f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.to_owned();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let scale: f64 = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration,
/// returned as the final Rayleigh quotient.
pub fn power_iteration(a: &ArrayView2<'_, f64>, iters: usize) -> Result<f64> {
    let n = a.nrows();
    // deterministic start with no exact symmetry
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 0.1 * ((i * 7919 % 97) as f64) / 97.0);
    v /= v.dot(&v).sqrt();
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let av = a.dot(&v);
        estimate = v.dot(&av);
        let norm = av.dot(&av).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(DltfError::PowerIterationDiverged(norm));
        }
        v = av / norm;
    }
    if !(estimate.is_finite() && estimate > 0.0) {
        return Err(DltfError::PowerIterationDiverged(estimate));
    }
    Ok(estimate)
}

/// `A^T A` for a small column block.
pub fn gram_of(a: &ArrayView2<'_, f64>) -> Array2<f64> {
    a.t().dot(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_2x2() {
        let ev = symmetric_eigenvalues(&array![[1.0, 0.3], [0.3, 1.0]].view());
        assert!((ev[0] - 0.7).abs() < 1e-14 && (ev[1] - 1.3).abs() < 1e-14);
    }

    #[test]
    fn jacobi_diagonal_and_dense() {
        let ev = symmetric_eigenvalues(&array![[3.0, 0.0], [0.0, -1.0]].view());
        assert_eq!(ev, vec![-1.0, 3.0]);
        let a = array![[4.0, 1.0, 2.0], [1.0, 3.0, 0.5], [2.0, 0.5, 5.0]];
        let ev = symmetric_eigenvalues(&a.view());
        let trace: f64 = ev.iter().sum();
        assert!((trace - 12.0).abs() < 1e-12);
        // determinant check
        let det = 4.0 * (15.0 - 0.25) - 1.0 * (5.0 - 1.0) + 2.0 * (0.5 - 6.0);
        assert!((ev.iter().product::<f64>() - det).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_finds_top() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        assert!((power_iteration(&a.view(), 60).unwrap() - 3.0).abs() < 1e-12);
        assert!(power_iteration(&Array2::zeros((2, 2)).view(), 5).is_err());
    }
}
