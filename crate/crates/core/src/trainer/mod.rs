//! ADMM trainer for dictionaries tailored to thresholded features.
//!
//! Objective, over `W` with unit-norm columns and `k`-sparse columns of `Z`:
//!
//! ```text
//! (lambda/2) sum_i ||q_i||_{2k,2}^2 + ||W^T W - I||^2 + (theta/2) ||X - W Z||^2
//! s.t. Q = W^T (X - W Z)
//! ```
//!
//! Each outer iteration updates `Z` (iterative hard thresholding), `Q`
//! (columnwise (2k,2) prox), `W` (Riemannian descent on a product of
//! spheres) and finally the multiplier `Y`.

mod qstep;
mod wstep;
mod zstep;

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::baselines::random_dictionary;
use crate::error::{DltfError, Result};
use crate::model::{frob_dot, frob_sq, gram, mul_sparse_right, DataMatrix, Dictionary, SparseCodeBatch};
use crate::prox::k2_norm_sq;

pub use qstep::update_q;
pub use wstep::{update_w, w_subproblem_gradient, w_subproblem_objective, WUpdate};
pub use zstep::{update_z, z_subproblem_objective, ZUpdate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Weight of the (2k,2)-norm term.
    pub lambda: f64,
    /// Reconstruction weight.
    pub theta: f64,
    /// ADMM penalty.
    pub beta: f64,
    /// Per-sample sparsity.
    pub k: usize,
    /// Number of atoms to learn.
    pub atoms: usize,
    pub outer_iters: usize,
    pub iht_max_iters: usize,
    pub iht_rel_tol: f64,
    pub w_max_iters: usize,
    pub w_grad_tol: f64,
    /// Stop once `||Q - W^T(X - WZ)||_F < primal_tol * sqrt(m N)`.
    pub primal_tol: f64,
    pub power_iters: usize,
    pub step_safety: f64,
    pub max_backtracks: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            theta: 0.01,
            beta: 1.0,
            k: 4,
            atoms: 128,
            outer_iters: 30,
            iht_max_iters: 50,
            iht_rel_tol: 1e-8,
            w_max_iters: 30,
            w_grad_tol: 1e-6,
            primal_tol: 1e-5,
            power_iters: 20,
            step_safety: 0.99,
            max_backtracks: 30,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DltfError::InvalidParameter(msg));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be positive", self.beta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be nonnegative", self.lambda));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return bad(format!("theta = {} must be nonnegative", self.theta));
        }
        if self.k < 1 || self.k > self.atoms {
            return Err(DltfError::InvalidK { k: self.k, len: self.atoms });
        }
        if self.outer_iters < 1 || self.iht_max_iters < 1 || self.power_iters < 1 {
            return bad("iteration caps must be positive".into());
        }
        if !(self.step_safety > 0.0 && self.step_safety <= 1.0) {
            return bad(format!("step_safety = {} must lie in (0, 1]", self.step_safety));
        }
        Ok(())
    }

    /// Sparsity of the (2k,2) norm, capped at the atom count.
    pub fn k_double(&self, m: usize) -> usize {
        (2 * self.k).min(m)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lagrangian: f64,
    pub primal_residual: f64,
    pub max_colnorm_dev: f64,
    pub wall_ms: f64,
    pub iht_iters: usize,
    pub w_iters: usize,
    pub line_search_failed: bool,
}

/// ADMM variables plus the iteration log.
#[derive(Debug, Clone)]
pub struct TrainerState {
    pub w: Dictionary,
    pub z: SparseCodeBatch,
    pub q: Array2<f64>,
    pub y: Array2<f64>,
    pub iteration: usize,
    pub diagnostics: Vec<IterationRecord>,
}

impl TrainerState {
    /// Seeded Gaussian dictionary with normalized columns, `Z = Q = Y = 0`.
    pub fn init(x: &DataMatrix, hp: &Hyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let m = hp.atoms;
        let w = random_dictionary(x.n(), m, seed)?;
        Self::from_dictionary(w, x, hp)
    }

    pub fn from_dictionary(w: Dictionary, x: &DataMatrix, hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        if w.n() != x.n() || w.m() != hp.atoms {
            return Err(DltfError::DimensionMismatch(format!(
                "dictionary {}x{} vs data n = {}, atoms = {}",
                w.n(),
                w.m(),
                x.n(),
                hp.atoms
            )));
        }
        let (m, n_samples) = (w.m(), x.len());
        Ok(Self {
            w,
            z: SparseCodeBatch::zeros(m, n_samples, hp.k)?,
            q: Array2::zeros((m, n_samples)),
            y: Array2::zeros((m, n_samples)),
            iteration: 0,
            diagnostics: Vec::new(),
        })
    }

    /// One round of Z, Q, W and Y updates. Returns the logged record.
    pub fn step(&mut self, x: &DataMatrix, hp: &Hyperparams) -> Result<IterationRecord> {
        let start = Instant::now();
        let z_up = update_z(self, x, hp)?;
        self.z = z_up.codes;
        self.q = update_q(self, x, hp)?;
        let w_up = update_w(self, x, hp)?;
        if w_up.line_search_failed {
            log::warn!(
                "iteration {}: W line search failed after {} steps",
                self.iteration,
                w_up.iterations
            );
        }
        self.w = w_up.dictionary;
        self.y = update_y(self, x, hp)?;
        self.iteration += 1;

        let record = IterationRecord {
            iteration: self.iteration,
            lagrangian: lagrangian_value(self, x, hp)?,
            primal_residual: primal_residual(self, x)?,
            max_colnorm_dev: self.w.max_colnorm_deviation(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            iht_iters: z_up.iterations,
            w_iters: w_up.iterations,
            line_search_failed: w_up.line_search_failed,
        };
        log::debug!("{record:?}");
        self.diagnostics.push(record.clone());
        Ok(record)
    }
}

fn check_shapes(state: &TrainerState, x: &DataMatrix) -> Result<()> {
    let (m, n_samples) = (state.w.m(), x.len());
    if state.w.n() != x.n()
        || state.z.m() != m
        || state.z.len() != n_samples
        || state.q.dim() != (m, n_samples)
        || state.y.dim() != (m, n_samples)
    {
        return Err(DltfError::DimensionMismatch(format!(
            "state shapes W {}x{}, Z {}x{}, Q {:?}, Y {:?} vs X {}x{}",
            state.w.n(),
            m,
            state.z.m(),
            state.z.len(),
            state.q.dim(),
            state.y.dim(),
            x.n(),
            n_samples
        )));
    }
    Ok(())
}

/// `W^T (X - W Z)`.
pub(crate) fn projected_residual(
    w: &ArrayView2<'_, f64>,
    x: &DataMatrix,
    z: &SparseCodeBatch,
) -> (Array2<f64>, Array2<f64>) {
    let r = &x.view() - &mul_sparse_right(w, z);
    let a = w.t().dot(&r);
    (r, a)
}

/// `||Q - W^T (X - W Z)||_F`.
pub fn primal_residual(state: &TrainerState, x: &DataMatrix) -> Result<f64> {
    check_shapes(state, x)?;
    let (_, a) = projected_residual(&state.w.view(), x, &state.z);
    Ok(frob_sq(&(&state.q - &a).view()).sqrt())
}

/// Augmented Lagrangian at the current state.
pub fn lagrangian_value(state: &TrainerState, x: &DataMatrix, hp: &Hyperparams) -> Result<f64> {
    check_shapes(state, x)?;
    let m = state.w.m();
    let kk = hp.k_double(m);
    let mut norm_term = 0.0;
    for col in state.q.columns() {
        norm_term += k2_norm_sq(col.to_vec().as_slice(), kk)?;
    }
    let g = gram(&state.w) - Array2::<f64>::eye(m);
    let (r, a) = projected_residual(&state.w.view(), x, &state.z);
    let d = &state.q - &a;
    Ok(0.5 * hp.lambda * norm_term
        + frob_sq(&g.view())
        + 0.5 * hp.theta * frob_sq(&r.view())
        + frob_dot(&state.y.view(), &d.view())
        + 0.5 * hp.beta * frob_sq(&d.view()))
}

/// Dual ascent `Y + beta (Q - W^T X + W^T W Z)`.
pub fn update_y(state: &TrainerState, x: &DataMatrix, hp: &Hyperparams) -> Result<Array2<f64>> {
    check_shapes(state, x)?;
    let (_, a) = projected_residual(&state.w.view(), x, &state.z);
    let mut y = state.y.clone();
    y.scaled_add(hp.beta, &(&state.q - &a));
    Ok(y)
}

/// Final dictionary and state of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub dictionary: Dictionary,
    pub state: TrainerState,
}

/// Runs up to `hp.outer_iters` ADMM rounds from a seeded random start.
pub fn train(x: &DataMatrix, hp: &Hyperparams, seed: u64) -> Result<TrainOutput> {
    let state = TrainerState::init(x, hp, seed)?;
    train_from(state, x, hp)
}

/// Continues training from an existing state.
pub fn train_from(mut state: TrainerState, x: &DataMatrix, hp: &Hyperparams) -> Result<TrainOutput> {
    let stop = hp.primal_tol * ((state.w.m() * x.len()) as f64).sqrt();
    for _ in 0..hp.outer_iters {
        let rec = state.step(x, hp)?;
        if rec.primal_residual < stop {
            break;
        }
    }
    Ok(TrainOutput { dictionary: state.w.clone(), state })
}

/// `A Z^T` for a `p x N` matrix `A`, exploiting column sparsity of `Z`.
pub(crate) fn mul_sparse_transpose(a: &ArrayView2<'_, f64>, z: &SparseCodeBatch) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), z.m()));
    for i in 0..z.len() {
        let col = a.column(i);
        for (r, v) in z.column_entries(i) {
            out.column_mut(r).scaled_add(v, &col);
        }
    }
    out
}
