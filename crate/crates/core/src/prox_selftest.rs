//! Randomized optimality check for [`crate::prox::prox_k2`].
//!
//! Each instance is solved twice: by the sorted pooling algorithm and by a
//! plain subgradient method that knows nothing about sorting or pooling.
//! The pooled solution must be at least as good as the best subgradient
//! iterate, and no small random perturbation may decrease its objective.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::prox::{prox_k2, ProxProblem};

pub const GAMMAS: [f64; 4] = [0.0, 0.1, 1.0, 10.0];

#[derive(Debug, Clone)]
pub struct SelftestConfig {
    pub instances: usize,
    pub max_len: usize,
    pub oracle_iters: usize,
    pub oracle_starts: usize,
    pub directions: usize,
    pub epsilon: f64,
    pub objective_slack: f64,
    pub sweep_slack: f64,
    pub seed: u64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            max_len: 10,
            oracle_iters: 100_000,
            oracle_starts: 5,
            directions: 200,
            epsilon: 1e-5,
            objective_slack: 1e-9,
            sweep_slack: 1e-10,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub instances: usize,
    /// Largest `F(prox) - F(oracle)`; negative means the prox always won.
    pub max_objective_gap: f64,
    pub objective_failures: usize,
    /// Largest `F(prox) - F(prox + eps d)` over all directions.
    pub max_sweep_violation: f64,
    pub sweep_failures: usize,
    pub elapsed_ms: f64,
    pub passed: bool,
}

/// Objective evaluated by full sort, independent of the library routine.
pub fn reference_objective(q: &[f64], c: &[f64], kprime: usize, gamma: f64) -> f64 {
    let mut sq: Vec<f64> = q.iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sq[..kprime].iter().sum();
    let dist: f64 = q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    gamma * top + dist
}

/// Best objective found by diminishing-step subgradient descent from
/// `starts` random points.
pub fn subgradient_oracle(
    c: &[f64],
    kprime: usize,
    gamma: f64,
    iters: usize,
    starts: usize,
    rng: &mut impl Rng,
) -> (Vec<f64>, f64) {
    let m = c.len();
    let scale = c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut best_q = c.to_vec();
    let mut best = reference_objective(c, c, kprime, gamma);
    let mut q = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    for _ in 0..starts {
        for v in q.iter_mut() {
            *v = rng.random_range(-2.0 * scale..2.0 * scale);
        }
        for t in 1..=iters {
            // top-kprime magnitudes by insertion sort (m is small)
            for i in 1..m {
                let mut j = i;
                while j > 0 && q[order[j - 1]].abs() < q[order[j]].abs() {
                    order.swap(j - 1, j);
                    j -= 1;
                }
            }
            let step = 1.0 / (2.0 * (t as f64 + gamma));
            let mut grad = [0.0f64; 64];
            for i in 0..m {
                grad[i] = 2.0 * (q[i] - c[i]);
            }
            for &i in &order[..kprime] {
                grad[i] += 2.0 * gamma * q[i];
            }
            for i in 0..m {
                q[i] -= step * grad[i];
            }
            if t % 64 == 0 || t == iters {
                let f = reference_objective(&q, c, kprime, gamma);
                if f < best {
                    best = f;
                    best_q.copy_from_slice(&q);
                }
            }
        }
    }
    (best_q, best)
}

/// Runs the randomized comparison over `cfg.instances` problems.
pub fn run_selftest(cfg: &SelftestConfig) -> Result<SelftestReport> {
    assert!(cfg.max_len <= 64, "oracle scratch holds at most 64 coordinates");
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SelftestReport {
        instances: cfg.instances,
        max_objective_gap: f64::NEG_INFINITY,
        objective_failures: 0,
        max_sweep_violation: f64::NEG_INFINITY,
        sweep_failures: 0,
        elapsed_ms: 0.0,
        passed: false,
    };
    for inst in 0..cfg.instances {
        let m = rng.random_range(1..=cfg.max_len);
        let kprime = rng.random_range(1..=m);
        let gamma = GAMMAS[inst % GAMMAS.len()];
        let c: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let q = prox_k2(&ProxProblem::new(c.clone(), kprime, gamma)?)?;
        let f_prox = reference_objective(&q, &c, kprime, gamma);

        let (_, f_oracle) = subgradient_oracle(
            &c,
            kprime,
            gamma,
            cfg.oracle_iters,
            cfg.oracle_starts,
            &mut rng,
        );
        let gap = f_prox - f_oracle;
        report.max_objective_gap = report.max_objective_gap.max(gap);
        if gap > cfg.objective_slack {
            report.objective_failures += 1;
        }

        let mut probe = vec![0.0; m];
        for _ in 0..cfg.directions {
            let d: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            for i in 0..m {
                probe[i] = q[i] + cfg.epsilon * d[i] / norm;
            }
            let violation = f_prox - reference_objective(&probe, &c, kprime, gamma);
            report.max_sweep_violation = report.max_sweep_violation.max(violation);
            if violation > cfg.sweep_slack {
                report.sweep_failures += 1;
            }
        }
    }
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    report.passed = report.objective_failures == 0 && report.sweep_failures == 0;
    Ok(report)
}
