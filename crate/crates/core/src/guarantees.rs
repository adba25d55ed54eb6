//! Sufficient conditions for thresholded features to recover the support
//! of a sparse code, plus the dictionary statistics they depend on.
//!
//! With `x = W z (+ e)` and `zbar = max_k(W^T x)`:
//!
//! * weak (coherence) condition: `k mu_W <= |z_k| / (2 |z_1|)`, and with
//!   noise `k mu_W <= |z_k| / (2 |z_1|) - mu_e / |z_1|`;
//! * strong (RIP) condition: `|z_k| >= 2 sqrt(2 delta - delta^2) ||z|| +
//!   2 ||max_{2k}(W^T e)||` for `delta` in `(0, 1 - sqrt(3)/2)`.
//!
//! `z_1` and `z_k` are the largest and smallest nonzero magnitudes of `z`.
//! Exact RIP constants are only computed by exhaustive enumeration.

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::encoder::max_k;
use crate::error::{DltfError, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::model::{gram, Dictionary};
use crate::prox::k2_norm_sq;

/// Largest number of subsets [`rip_constant_exhaustive`] will enumerate.
pub const RIP_BUDGET: u128 = 1_000_000;

/// Exclusive upper end of the admissible RIP constant range, `1 - sqrt(3)/2`.
pub fn strong_delta_upper() -> f64 {
    1.0 - 3f64.sqrt() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub mu_w: f64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeVerdict {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl GuaranteeVerdict {
    fn compare(lhs: f64, rhs: f64) -> Self {
        Self {
            holds: lhs <= rhs,
            lhs,
            rhs,
            margin: rhs - lhs,
            note: None,
        }
    }
}

/// Maximum absolute inner product between distinct atoms.
pub fn mutual_coherence(w: &Dictionary) -> Result<CoherenceReport> {
    let m = w.m();
    if m < 2 {
        return Err(DltfError::TooFewAtoms(m));
    }
    let g = gram(w);
    let mut best = CoherenceReport { mu_w: -1.0, i: 0, j: 1 };
    for i in 0..m {
        for j in (i + 1)..m {
            let v = g[[i, j]].abs();
            if v > best.mu_w {
                best = CoherenceReport { mu_w: v, i, j };
            }
        }
    }
    Ok(best)
}

/// `max_i |<w_i, e>|`.
pub fn cross_coherence(w: &Dictionary, e: ArrayView1<'_, f64>) -> Result<f64> {
    check_noise(w, e)?;
    Ok(w.view().t().dot(&e).iter().fold(0.0, |a, v| a.max(v.abs())))
}

/// Nonzero magnitudes of `z`: (count, largest, smallest).
fn code_extremes(z: ArrayView1<'_, f64>) -> Result<(usize, f64, f64)> {
    let mut mags: Vec<f64> = z.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
    if mags.is_empty() {
        return Err(DltfError::AllZeroCode);
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok((mags.len(), mags[0], mags[mags.len() - 1]))
}

fn check_code(w: &Dictionary, z: ArrayView1<'_, f64>) -> Result<()> {
    if z.len() != w.m() {
        return Err(DltfError::DimensionMismatch(format!(
            "code has {} entries, dictionary has {} atoms",
            z.len(),
            w.m()
        )));
    }
    Ok(())
}

fn check_noise(w: &Dictionary, e: ArrayView1<'_, f64>) -> Result<()> {
    if e.len() != w.n() {
        return Err(DltfError::DimensionMismatch(format!(
            "noise has {} entries, dictionary has n = {}",
            e.len(),
            w.n()
        )));
    }
    Ok(())
}

/// Coherence condition for noiseless samples, with `k = nnz(z)`.
pub fn weak_condition(w: &Dictionary, z: ArrayView1<'_, f64>) -> Result<GuaranteeVerdict> {
    check_code(w, z)?;
    let (k, z1, zk) = code_extremes(z)?;
    let mu = if w.m() >= 2 { mutual_coherence(w)?.mu_w } else { 0.0 };
    Ok(GuaranteeVerdict::compare(k as f64 * mu, zk / (2.0 * z1)))
}

/// Coherence condition with additive noise `e`.
pub fn weak_condition_noisy(
    w: &Dictionary,
    z: ArrayView1<'_, f64>,
    e: ArrayView1<'_, f64>,
) -> Result<GuaranteeVerdict> {
    check_code(w, z)?;
    check_noise(w, e)?;
    let (k, z1, zk) = code_extremes(z)?;
    let mu = if w.m() >= 2 { mutual_coherence(w)?.mu_w } else { 0.0 };
    let mu_e = cross_coherence(w, e)?;
    Ok(GuaranteeVerdict::compare(
        k as f64 * mu,
        zk / (2.0 * z1) - mu_e / z1,
    ))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Tightest `delta` with `1 - delta <= sigma^2(W_S) <= 1 + delta` over all
/// column subsets `S` of size `k`, found by enumeration.
pub fn rip_constant_exhaustive(w: &Dictionary, k: usize) -> Result<f64> {
    let m = w.m();
    if k < 1 || k > m {
        return Err(DltfError::InvalidK { k, len: m });
    }
    let required = binomial(m, k);
    if required > RIP_BUDGET {
        return Err(DltfError::BudgetExceeded { required, budget: RIP_BUDGET });
    }
    let g = gram(w);
    let mut subset: Vec<usize> = (0..k).collect();
    let mut block = Array2::<f64>::zeros((k, k));
    let mut delta = 0.0f64;
    loop {
        for (a, &i) in subset.iter().enumerate() {
            for (b, &j) in subset.iter().enumerate() {
                block[[a, b]] = g[[i, j]];
            }
        }
        let ev = symmetric_eigenvalues(&block.view());
        let lo = ev[0];
        let hi = ev[k - 1];
        delta = delta.max(1.0 - lo).max(hi - 1.0);

        // next combination in lexicographic order
        let mut pos = k;
        while pos > 0 && subset[pos - 1] == m - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        subset[pos - 1] += 1;
        for t in pos..k {
            subset[t] = subset[t - 1] + 1;
        }
    }
    Ok(delta.max(0.0))
}

/// `||max_{2k}(W^T e)||`, with `2k` capped at the atom count.
pub fn noise_top2k_norm(w: &Dictionary, e: ArrayView1<'_, f64>, k: usize) -> Result<f64> {
    check_noise(w, e)?;
    let s = (2 * k).min(w.m());
    let corr = w.view().t().dot(&e);
    let top = max_k(corr.view(), s)?;
    Ok(k2_norm_sq(top.values.as_slice().unwrap(), s)?.sqrt())
}

/// RIP-based condition. `delta` is supplied by the caller and is assumed to
/// hold for supports of size up to `2k`.
pub fn strong_condition(
    w: &Dictionary,
    z: ArrayView1<'_, f64>,
    e: ArrayView1<'_, f64>,
    delta: f64,
) -> Result<GuaranteeVerdict> {
    let upper = strong_delta_upper();
    if !(delta > 0.0 && delta < upper) {
        return Err(DltfError::DeltaOutOfRange { delta, upper });
    }
    check_code(w, z)?;
    let (k, _, zk) = code_extremes(z)?;
    let znorm = z.dot(&z).sqrt();
    let bound = 2.0 * (2.0 * delta - delta * delta).sqrt() * znorm
        + 2.0 * noise_top2k_norm(w, e, k)?;
    let mut verdict = GuaranteeVerdict::compare(bound, zk);
    verdict.note = Some(format!("delta = {delta} taken as valid at sparsity {}", 2 * k));
    Ok(verdict)
}

/// Lower bound on `||z||` implied by the strong condition at sparsity `k`.
pub fn strong_norm_lower_bound(
    delta: f64,
    k: usize,
    w: &Dictionary,
    e: ArrayView1<'_, f64>,
) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(DltfError::DeltaOutOfRange { delta, upper: 1.0 });
    }
    if k < 1 {
        return Err(DltfError::InvalidK { k, len: w.m() });
    }
    let spread = 2.0 * delta - delta * delta;
    let denominator = 1.0 - 2.0 * (k as f64 * spread).sqrt();
    if denominator <= 0.0 {
        return Err(DltfError::DenominatorNonpositive {
            denominator,
            k_ceiling: 1.0 / (4.0 * spread),
        });
    }
    Ok(2.0 * (k as f64).sqrt() * noise_top2k_norm(w, e, k)? / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::normalize_columns;
    use ndarray::{array, Array1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn gaussian_dict(n: usize, m: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        normalize_columns(&Array2::from_shape_fn((n, m), |_| StandardNormal.sample(&mut rng)))
            .unwrap()
    }

    #[test]
    fn coherence_examples() {
        let eye = Dictionary::new(Array2::eye(4)).unwrap();
        assert_eq!(mutual_coherence(&eye).unwrap().mu_w, 0.0);
        let dup = normalize_columns(&array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        let r = mutual_coherence(&dup).unwrap();
        assert_eq!((r.mu_w, r.i, r.j), (1.0, 0, 2));
        let single = Dictionary::new(array![[1.0], [0.0]]).unwrap();
        assert!(matches!(mutual_coherence(&single), Err(DltfError::TooFewAtoms(1))));
    }

    #[test]
    fn cross_coherence_examples() {
        let w = gaussian_dict(8, 12, 1);
        assert_eq!(cross_coherence(&w, Array1::zeros(8).view()).unwrap(), 0.0);
        let w0 = w.atom(0).to_owned();
        assert!((cross_coherence(&w, w0.view()).unwrap() - 1.0).abs() < 1e-12);
        assert!(cross_coherence(&w, Array1::zeros(3).view()).is_err());
    }

    #[test]
    fn cross_coherence_matches_direct_loop() {
        let w = gaussian_dict(64, 128, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let e = Array1::from_shape_fn(64, |_| normal.sample(&mut rng));
        let mut direct = 0.0f64;
        for j in 0..128 {
            let mut s = 0.0;
            for r in 0..64 {
                s += w.view()[[r, j]] * e[r];
            }
            direct = direct.max(s.abs());
        }
        assert!((cross_coherence(&w, e.view()).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn weak_condition_orthonormal_and_binary() {
        let w = Dictionary::new(Array2::eye(5)).unwrap();
        let v = weak_condition(&w, array![0.0, 3.0, -1.0, 0.0, 0.5].view()).unwrap();
        assert!(v.holds && v.lhs == 0.0);
        let v = weak_condition(&w, array![1.0, 1.0, 0.0, 0.0, 0.0].view()).unwrap();
        assert_eq!(v.rhs, 0.5);
        assert!(matches!(
            weak_condition(&w, Array1::zeros(5).view()),
            Err(DltfError::AllZeroCode)
        ));
    }

    #[test]
    fn weak_condition_fails_for_gaussian_bench_dictionary() {
        let w = gaussian_dict(64, 128, 7);
        let mut z = Array1::zeros(128);
        for i in [3, 40, 77, 101] {
            z[i] = 1.0;
        }
        let v = weak_condition(&w, z.view()).unwrap();
        assert!(!v.holds);
        assert!(v.lhs > 1.2 && v.rhs == 0.5);
    }

    #[test]
    fn noisy_condition_reduces_to_noiseless() {
        let w = gaussian_dict(6, 9, 4);
        let z = array![0.0, 2.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0];
        let a = weak_condition(&w, z.view()).unwrap();
        let b = weak_condition_noisy(&w, z.view(), Array1::zeros(6).view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_condition_never_holds_when_noise_dominates() {
        let w = Dictionary::new(Array2::eye(3)).unwrap();
        let z = array![1.0, 0.0, 0.0];
        let v = weak_condition_noisy(&w, z.view(), array![0.0, 0.9, 0.0].view()).unwrap();
        assert!(v.rhs <= 0.0 && !v.holds);
    }

    #[test]
    fn rip_examples() {
        let eye = Dictionary::new(Array2::eye(5)).unwrap();
        assert_eq!(rip_constant_exhaustive(&eye, 3).unwrap(), 0.0);
        let dup = normalize_columns(&array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(rip_constant_exhaustive(&dup, 2).unwrap() >= 1.0 - 1e-12);
        let big = gaussian_dict(4, 200, 1);
        assert!(matches!(
            rip_constant_exhaustive(&big, 4),
            Err(DltfError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn rip_pairs_match_closed_form_eigenvalues() {
        // 2x2 Gram [[1, g], [g, 1]] has eigenvalues 1 - |g| and 1 + |g|
        let w = gaussian_dict(10, 16, 21);
        let raw = w.view();
        let mut oracle = 0.0f64;
        let mut pairs = 0;
        for i in 0..16 {
            for j in (i + 1)..16 {
                let g: f64 = (0..10).map(|r| raw[[r, i]] * raw[[r, j]]).sum();
                oracle = oracle.max(g.abs());
                pairs += 1;
            }
        }
        assert_eq!(pairs, 120);
        assert!((rip_constant_exhaustive(&w, 2).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn strong_condition_examples() {
        let w = Dictionary::new(Array2::eye(4)).unwrap();
        let z = array![1.0, 0.0, 0.0, 0.0];
        let v = strong_condition(&w, z.view(), Array1::zeros(4).view(), 1e-12).unwrap();
        assert!(v.holds);
        assert!(matches!(
            strong_condition(&w, z.view(), Array1::zeros(4).view(), strong_delta_upper()),
            Err(DltfError::DeltaOutOfRange { .. })
        ));
        assert!(matches!(
            strong_condition(&w, Array1::zeros(4).view(), Array1::zeros(4).view(), 0.01),
            Err(DltfError::AllZeroCode)
        ));
    }

    #[test]
    fn norm_lower_bound_examples() {
        let w = gaussian_dict(8, 10, 5);
        assert_eq!(strong_norm_lower_bound(0.01, 2, &w, Array1::zeros(8).view()).unwrap(), 0.0);
        // ceiling 1/(4(2d - d^2)); at delta = 0.1 it is 1/0.76 ~ 1.3, so k = 2 fails
        assert!(matches!(
            strong_norm_lower_bound(0.1, 2, &w, Array1::ones(8).view()),
            Err(DltfError::DenominatorNonpositive { .. })
        ));
    }

    #[test]
    fn norm_lower_bound_formula() {
        let w = gaussian_dict(8, 10, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let e = Array1::from_shape_fn(8, |_| { let v: f64 = StandardNormal.sample(&mut rng); 0.1 * v });
        // re-evaluate by sorting all correlations
        let mut c: Vec<f64> = w.view().t().dot(&e).iter().map(|v| v * v).collect();
        c.sort_by(|a, b| b.total_cmp(a));
        let top4: f64 = c[..4].iter().sum::<f64>().sqrt();
        let d: f64 = 0.01;
        let expected = 2.0 * 2f64.sqrt() * top4 / (1.0 - 2.0 * (2.0 * (2.0 * d - d * d)).sqrt());
        let got = strong_norm_lower_bound(d, 2, &w, e.view()).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
    }
}
