//! Sparse-code update by iterative hard thresholding.
//!
//! The subproblem is the quadratic
//! `f(Z) = (theta/2)||X - WZ||^2 + <Y, GZ> + (beta/2)||GZ - W^T X + Q||^2`
//! with `G = W^T W`, i.e. `f(Z) = 1/2 <Z, HZ> + <B, Z> + const` where
//! `H = theta G + beta G^2` and `B = -theta W^T X + G (Y + beta (Q - W^T X))`.
//! `H` and `B` are formed once, so inner iterations only touch sparse columns.

use ndarray::{Array2, Axis};

use super::{check_shapes, Hyperparams, TrainerState};
use crate::encoder::threshold_in_place;
use crate::error::{DltfError, Result};
use crate::linalg::power_iteration;
use crate::model::{frob_dot, frob_sq, gram, mul_sparse_right, DataMatrix, SparseCodeBatch};

#[derive(Debug, Clone)]
pub struct ZUpdate {
    pub codes: SparseCodeBatch,
    /// Subproblem objective before the first and after every accepted step.
    pub objective_trace: Vec<f64>,
    /// Final curvature bound used for the step.
    pub lipschitz: f64,
    pub iterations: usize,
}

struct Quadratic {
    h: Array2<f64>,
    b: Array2<f64>,
    constant: f64,
}

impl Quadratic {
    fn build(state: &TrainerState, x: &DataMatrix, hp: &Hyperparams) -> Self {
        let w = state.w.view();
        let g = gram(&state.w);
        let wtx = w.t().dot(&x.view());
        let mut h = g.dot(&g);
        h *= hp.beta;
        h.scaled_add(hp.theta, &g);
        // symmetrize against rounding in G^2
        let m = h.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                let s = 0.5 * (h[[i, j]] + h[[j, i]]);
                h[[i, j]] = s;
                h[[j, i]] = s;
            }
        }
        let q_minus = &state.q - &wtx;
        let mut inner = state.y.clone();
        inner.scaled_add(hp.beta, &q_minus);
        let mut b = g.dot(&inner);
        b.scaled_add(-hp.theta, &wtx);
        let constant =
            0.5 * hp.theta * frob_sq(&x.view()) + 0.5 * hp.beta * frob_sq(&q_minus.view());
        Self { h, b, constant }
    }

    fn value(&self, z: &Array2<f64>, hz: &Array2<f64>) -> f64 {
        0.5 * frob_dot(&z.view(), &hz.view()) + frob_dot(&self.b.view(), &z.view()) + self.constant
    }
}

/// Evaluates the Z-subproblem objective directly from its definition.
pub fn z_subproblem_objective(
    state: &TrainerState,
    x: &DataMatrix,
    hp: &Hyperparams,
    z: &SparseCodeBatch,
) -> Result<f64> {
    check_shapes(state, x)?;
    let w = state.w.view();
    let wz = mul_sparse_right(&w, z);
    let r = &x.view() - &wz;
    let gz = w.t().dot(&wz);
    let wtx = w.t().dot(&x.view());
    let d = &gz - &wtx + &state.q;
    Ok(0.5 * hp.theta * frob_sq(&r.view())
        + frob_dot(&state.y.view(), &gz.view())
        + 0.5 * hp.beta * frob_sq(&d.view()))
}

fn threshold_columns(z: &mut Array2<f64>, k: usize) {
    let mut scratch = Vec::with_capacity(z.nrows());
    for col in z.axis_iter_mut(Axis(1)) {
        threshold_in_place(col, k, &mut scratch);
    }
}

/// Iterative hard thresholding warm-started at the current codes.
///
/// The step is `step_safety / L` with `L` the power-iteration estimate of
/// `lambda_max(H)`. Power iteration can underestimate, so a step that raises
/// the objective doubles `L` and is retried; accepted steps never increase
/// the objective.
pub fn update_z(state: &TrainerState, x: &DataMatrix, hp: &Hyperparams) -> Result<ZUpdate> {
    check_shapes(state, x)?;
    let k = hp.k;
    let quad = Quadratic::build(state, x, hp);
    let mut lipschitz = power_iteration(&quad.h.view(), hp.power_iters)?;

    let mut z = state.z.view().to_owned();
    let mut hz = quad.h.dot(&z);
    let mut f = quad.value(&z, &hz);
    let mut trace = vec![f];
    let mut iterations = 0;

    for _ in 0..hp.iht_max_iters {
        let grad = &hz + &quad.b;
        let mut accepted = None;
        for _ in 0..=hp.max_backtracks {
            let eta = hp.step_safety / lipschitz;
            let mut cand = z.clone();
            cand.scaled_add(-eta, &grad);
            threshold_columns(&mut cand, k);
            let cand_codes = SparseCodeBatch::new(cand, k)?;
            let cand_hz = mul_sparse_right(&quad.h.view(), &cand_codes);
            let cand = cand_codes.into_inner();
            let f_new = quad.value(&cand, &cand_hz);
            if f_new <= f + 1e-12 * f.abs().max(1.0) {
                accepted = Some((cand, cand_hz, f_new));
                break;
            }
            lipschitz *= 2.0;
        }
        let Some((cand, cand_hz, f_new)) = accepted else {
            return Err(DltfError::PowerIterationDiverged(lipschitz));
        };
        iterations += 1;
        let rel = (f - f_new).abs() / f.abs().max(1e-300);
        z = cand;
        hz = cand_hz;
        f = f_new;
        trace.push(f);
        if rel < hp.iht_rel_tol {
            break;
        }
    }
    Ok(ZUpdate {
        codes: SparseCodeBatch::new(z, k)?,
        objective_trace: trace,
        lipschitz,
        iterations,
    })
}
