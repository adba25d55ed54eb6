//! Exact proximal mapping of the squared (k,2) norm.
//!
//! `prox(c) = argmin_q  gamma * ||q||_{k,2}^2 + ||q - c||^2`, where
//! `||q||_{k,2}^2` sums the squares of the `k` largest magnitudes of `q`.
//!
//! The optimum keeps the signs of `c` and the magnitude order of `|c|`, so
//! after sorting `|c|` ascending the largest `k` coordinates sit at the end.
//! The problem then becomes a weighted isotonic regression: the tail targets
//! are shrunk by `1/(1+gamma)` with weight `1+gamma`, the head keeps weight 1,
//! and adjacent violators are pooled into their weighted mean. Sorting costs
//! `O(m log m)`, pooling `O(m)`.

use crate::encoder::top_k_indices;
use crate::error::{DltfError, Result};

/// Input of one proximal evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxProblem {
    c: Vec<f64>,
    kprime: usize,
    gamma: f64,
}

impl ProxProblem {
    pub fn new(c: Vec<f64>, kprime: usize, gamma: f64) -> Result<Self> {
        if kprime < 1 || kprime > c.len() {
            return Err(DltfError::InvalidK { k: kprime, len: c.len() });
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(DltfError::InvalidParameter(format!("gamma = {gamma} must be >= 0")));
        }
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(DltfError::NonFinite { row: i, col: 0 });
        }
        Ok(Self { c, kprime, gamma })
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn kprime(&self) -> usize {
        self.kprime
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Sum of squares of the `k` largest-magnitude entries.
pub fn k2_norm_sq(v: &[f64], k: usize) -> Result<f64> {
    if k < 1 || k > v.len() {
        return Err(DltfError::InvalidK { k, len: v.len() });
    }
    if k == v.len() {
        return Ok(v.iter().map(|x| x * x).sum());
    }
    Ok(top_k_indices(v, k).into_iter().map(|i| v[i] * v[i]).sum())
}

/// Stack of pooled blocks for the pool-adjacent-violators pass.
///
/// Block `b` covers original positions `starts[b] .. starts[b] + lens[b]`.
#[derive(Debug, Clone, Default)]
pub struct PoolState {
    values: Vec<f64>,
    weights: Vec<f64>,
    starts: Vec<usize>,
    lens: Vec<usize>,
    merges: usize,
}

impl PoolState {
    fn with_capacity(cap: usize) -> Self {
        Self {
            values: Vec::with_capacity(cap),
            weights: Vec::with_capacity(cap),
            starts: Vec::with_capacity(cap),
            lens: Vec::with_capacity(cap),
            merges: 0,
        }
    }

    fn push(&mut self, value: f64, weight: f64, start: usize) {
        self.values.push(value);
        self.weights.push(weight);
        self.starts.push(start);
        self.lens.push(1);
        while self.values.len() >= 2 {
            let last = self.values.len() - 1;
            if self.values[last - 1] <= self.values[last] {
                break;
            }
            let (t1, t2) = (self.weights[last - 1], self.weights[last]);
            let merged = (t1 * self.values[last - 1] + t2 * self.values[last]) / (t1 + t2);
            self.values[last - 1] = merged;
            self.weights[last - 1] = t1 + t2;
            self.lens[last - 1] += self.lens[last];
            self.values.pop();
            self.weights.pop();
            self.starts.pop();
            self.lens.pop();
            self.merges += 1;
        }
    }

    pub fn block_count(&self) -> usize {
        self.values.len()
    }

    pub fn merges(&self) -> usize {
        self.merges
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Block values repeated over the positions each block covers.
    pub fn expand(&self) -> Vec<f64> {
        let len: usize = self.lens.iter().sum();
        let mut out = vec![0.0; len];
        for b in 0..self.values.len() {
            let s = self.starts[b];
            out[s..s + self.lens[b]].fill(self.values[b]);
        }
        out
    }
}

/// Result of [`reduce_with_stats`].
#[derive(Debug, Clone)]
pub struct ReduceOutput {
    pub x: Vec<f64>,
    pub merges: usize,
    pub blocks: usize,
}

/// Weighted isotonic regression: minimizes `sum_j t_j (x_j - u_j)^2` over
/// nondecreasing `x`.
pub fn reduce(u: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    reduce_with_stats(u, t).map(|r| r.x)
}

pub fn reduce_with_stats(u: &[f64], t: &[f64]) -> Result<ReduceOutput> {
    if u.len() != t.len() {
        return Err(DltfError::DimensionMismatch(format!(
            "u has {} entries, t has {}",
            u.len(),
            t.len()
        )));
    }
    if let Some(index) = t.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(DltfError::NonpositiveWeight { index, value: t[index] });
    }
    let mut pool = PoolState::with_capacity(u.len());
    for (j, (&uj, &tj)) in u.iter().zip(t).enumerate() {
        pool.push(uj, tj, j);
    }
    Ok(ReduceOutput {
        x: pool.expand(),
        merges: pool.merges(),
        blocks: pool.block_count(),
    })
}

/// Prox for a nonnegative, nondecreasing `c`. Returns the solution and the
/// number of block merges.
pub fn prox_sorted_positive_with_stats(
    c: &[f64],
    kprime: usize,
    gamma: f64,
) -> Result<ReduceOutput> {
    let m = c.len();
    if kprime < 1 || kprime > m {
        return Err(DltfError::InvalidK { k: kprime, len: m });
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(DltfError::InvalidParameter(format!("gamma = {gamma} must be >= 0")));
    }
    if let Some(index) = c.iter().position(|v| !(*v >= 0.0)) {
        return Err(DltfError::NegativeInput { index, value: c[index] });
    }
    if let Some(index) = c.windows(2).position(|w| w[0] > w[1]) {
        return Err(DltfError::UnsortedInput { index: index + 1 });
    }
    let head = m - kprime;
    let shrink = 1.0 + gamma;
    let mut pool = PoolState::with_capacity(m);
    for (j, &cj) in c.iter().enumerate() {
        if j < head {
            pool.push(cj, 1.0, j);
        } else {
            pool.push(cj / shrink, shrink, j);
        }
    }
    Ok(ReduceOutput {
        x: pool.expand(),
        merges: pool.merges(),
        blocks: pool.block_count(),
    })
}

pub fn prox_sorted_positive(c: &[f64], kprime: usize, gamma: f64) -> Result<Vec<f64>> {
    prox_sorted_positive_with_stats(c, kprime, gamma).map(|r| r.x)
}

/// Solution of a general proximal problem plus merge count.
#[derive(Debug, Clone)]
pub struct ProxOutput {
    pub q: Vec<f64>,
    pub merges: usize,
}

pub fn prox_k2_with_stats(p: &ProxProblem) -> Result<ProxOutput> {
    let m = p.c.len();
    let mags: Vec<f64> = p.c.iter().map(|v| v.abs()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    // stable: equal magnitudes keep index order
    order.sort_by(|&a, &b| mags[a].total_cmp(&mags[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| mags[i]).collect();
    let inner = prox_sorted_positive_with_stats(&sorted, p.kprime, p.gamma)?;
    let mut q = vec![0.0; m];
    for (pos, &i) in order.iter().enumerate() {
        let mag = inner.x[pos];
        q[i] = if p.c[i] < 0.0 { -mag } else { mag };
    }
    Ok(ProxOutput { q, merges: inner.merges })
}

/// `argmin_q gamma * ||q||_{k',2}^2 + ||q - c||^2`.
pub fn prox_k2(p: &ProxProblem) -> Result<Vec<f64>> {
    prox_k2_with_stats(p).map(|o| o.q)
}

/// Objective value `gamma * ||q||_{k',2}^2 + ||q - c||^2`.
pub fn prox_objective(q: &[f64], c: &[f64], kprime: usize, gamma: f64) -> Result<f64> {
    if q.len() != c.len() {
        return Err(DltfError::DimensionMismatch(format!(
            "q has {} entries, c has {}",
            q.len(),
            c.len()
        )));
    }
    let dist: f64 = q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(gamma * k2_norm_sq(q, kprime)? + dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn k2_norm_examples() {
        assert_eq!(k2_norm_sq(&[3.0, -4.0, 1.0], 2).unwrap(), 25.0);
        assert_eq!(k2_norm_sq(&[3.0, -4.0, 1.0], 3).unwrap(), 26.0);
        assert_eq!(k2_norm_sq(&[0.0; 4], 2).unwrap(), 0.0);
        assert!(k2_norm_sq(&[1.0], 2).is_err());
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce(&[1.0, 2.0, 2.0, 5.0], &[1.0; 4]).unwrap(), vec![1.0, 2.0, 2.0, 5.0]);
        assert_eq!(reduce(&[2.0, 1.0], &[1.0, 1.0]).unwrap(), vec![1.5, 1.5]);
        // one-dimensional pooled quadratic: (1*1 + 3*(1.1/3)) / 4
        let x = reduce(&[1.0, 1.1 / 3.0], &[1.0, 3.0]).unwrap();
        assert!(close(&x, &[0.525, 0.525], 1e-15));
    }

    #[test]
    fn reduce_cascading_merges() {
        // 3,2.5 pool to 2.75; adding -1.5 gives 4/3, which then pools with 2
        let r = reduce_with_stats(&[2.0, 3.0, 2.5, -1.5], &[1.0; 4]).unwrap();
        assert!(close(&r.x, &[1.5, 1.5, 1.5, 1.5], 1e-15));
        assert_eq!(r.merges, 3);
        assert_eq!(r.blocks, 1);
        let r = reduce_with_stats(&[1.0, 3.0, 2.0, 0.0], &[1.0; 4]).unwrap();
        assert!(close(&r.x, &[1.0, 5.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0], 1e-15));
        assert_eq!((r.merges, r.blocks), (2, 2));
    }

    #[test]
    fn reduce_rejects_bad_weights() {
        assert!(matches!(
            reduce(&[1.0, 2.0], &[1.0, 0.0]),
            Err(DltfError::NonpositiveWeight { index: 1, .. })
        ));
        assert!(matches!(reduce(&[1.0], &[-1.0]), Err(DltfError::NonpositiveWeight { .. })));
    }

    #[test]
    fn sorted_positive_examples() {
        let c = [0.5, 1.0, 4.0];
        assert_eq!(prox_sorted_positive(&c, 2, 0.0).unwrap(), c.to_vec());
        assert_eq!(prox_sorted_positive(&[1.0, 2.0, 10.0], 1, 1.0).unwrap(), vec![1.0, 2.0, 5.0]);
        let q = prox_sorted_positive(&[1.0, 1.1], 1, 2.0).unwrap();
        assert!(close(&q, &[0.525, 0.525], 1e-15));
    }

    #[test]
    fn sorted_positive_validation() {
        assert!(matches!(
            prox_sorted_positive(&[2.0, 1.0], 1, 1.0),
            Err(DltfError::UnsortedInput { index: 1 })
        ));
        assert!(matches!(
            prox_sorted_positive(&[-1.0, 1.0], 1, 1.0),
            Err(DltfError::NegativeInput { index: 0, .. })
        ));
        assert!(prox_sorted_positive(&[1.0], 1, -0.5).is_err());
    }

    #[test]
    fn prox_examples() {
        let c = vec![-1.1, 1.0];
        let q = prox_k2(&ProxProblem::new(c.clone(), 1, 2.0).unwrap()).unwrap();
        assert!(close(&q, &[-0.525, 0.525], 1e-15));
        let obj = prox_objective(&q, &c, 1, 2.0).unwrap();
        assert!((obj - 1.1075).abs() < 1e-12);

        let c = vec![0.3, -2.0, 1.5];
        let q = prox_k2(&ProxProblem::new(c.clone(), 2, 0.0).unwrap()).unwrap();
        assert_eq!(q, c);
        let q = prox_k2(&ProxProblem::new(c.clone(), 3, 4.0).unwrap()).unwrap();
        assert!(close(&q, &[0.06, -0.4, 0.3], 1e-15));
    }

    #[test]
    fn objective_examples() {
        let c = [1.0, -3.0, 2.0];
        assert_eq!(prox_objective(&c, &c, 2, 0.5).unwrap(), 0.5 * 13.0);
        assert_eq!(prox_objective(&[0.0; 3], &c, 2, 0.5).unwrap(), 14.0);
        assert!(prox_objective(&[0.0; 2], &c, 1, 1.0).is_err());
    }

    #[test]
    fn problem_validation() {
        assert!(ProxProblem::new(vec![1.0], 0, 1.0).is_err());
        assert!(ProxProblem::new(vec![1.0], 1, f64::NAN).is_err());
        assert!(ProxProblem::new(vec![f64::INFINITY], 1, 1.0).is_err());
    }

    #[test]
    fn zeros_stay_zero() {
        let c = vec![0.0, 3.0, -0.0, 1.0];
        let q = prox_k2(&ProxProblem::new(c, 1, 5.0).unwrap()).unwrap();
        assert_eq!(q[0], 0.0);
        assert_eq!(q[2], 0.0);
    }

    fn problem_strategy() -> impl Strategy<Value = (Vec<f64>, usize, f64)> {
        (prop::collection::vec(-20.0f64..20.0, 1..16), 0.0f64..1.0, 0.0f64..20.0).prop_map(
            |(c, kf, gamma)| {
                let k = 1 + ((c.len() - 1) as f64 * kf) as usize;
                (c, k, gamma)
            },
        )
    }

    proptest! {
        #[test]
        fn reduce_output_is_monotone_and_preserves_weighted_mass(
            u in prop::collection::vec(-5.0f64..5.0, 1..30),
            tw in prop::collection::vec(0.1f64..4.0, 30),
        ) {
            let t = &tw[..u.len()];
            let r = reduce_with_stats(&u, t).unwrap();
            prop_assert!(r.x.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            let mass_in: f64 = u.iter().zip(t).map(|(a, b)| a * b).sum();
            let mass_out: f64 = r.x.iter().zip(t).map(|(a, b)| a * b).sum();
            prop_assert!((mass_in - mass_out).abs() < 1e-9);
            prop_assert!(r.merges + r.blocks == u.len());
            // adjacent violators end up pooled
            for j in 0..u.len() - 1 {
                if u[j] > u[j + 1] {
                    prop_assert_eq!(r.x[j], r.x[j + 1]);
                }
            }
        }

        #[test]
        fn prox_preserves_sign_order_and_shrinks((c, k, gamma) in problem_strategy()) {
            let out = prox_k2_with_stats(&ProxProblem::new(c.clone(), k, gamma).unwrap()).unwrap();
            let q = out.q;
            prop_assert!(out.merges < c.len());
            for i in 0..c.len() {
                prop_assert!(q[i].abs() <= c[i].abs() + 1e-12);
                if c[i] > 0.0 { prop_assert!(q[i] > 0.0); }
                if c[i] < 0.0 { prop_assert!(q[i] < 0.0); }
                for j in 0..c.len() {
                    if c[i].abs() <= c[j].abs() {
                        prop_assert!(q[i].abs() <= q[j].abs() + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn prox_beats_simple_candidates((c, k, gamma) in problem_strategy()) {
            let q = prox_k2(&ProxProblem::new(c.clone(), k, gamma).unwrap()).unwrap();
            let best = prox_objective(&q, &c, k, gamma).unwrap();
            let shrunk: Vec<f64> = c.iter().map(|v| v / (1.0 + gamma)).collect();
            for cand in [c.clone(), vec![0.0; c.len()], shrunk] {
                prop_assert!(best <= prox_objective(&cand, &c, k, gamma).unwrap() + 1e-9);
            }
        }
    }
}
