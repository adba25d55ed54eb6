use ndarray::Array2;

use super::{check_shapes, projected_residual, Hyperparams, TrainerState};
use crate::error::Result;
use crate::model::DataMatrix;
use crate::prox::{prox_k2, ProxProblem};

/// Columnwise `prox` of `(lambda/(2 beta)) ||.||_{2k,2}^2` at
/// `C = W^T (X - W Z) - Y / beta`.
pub fn update_q(state: &TrainerState, x: &DataMatrix, hp: &Hyperparams) -> Result<Array2<f64>> {
    check_shapes(state, x)?;
    let (_, mut c) = projected_residual(&state.w.view(), x, &state.z);
    c.scaled_add(-1.0 / hp.beta, &state.y);
    let kk = hp.k_double(state.w.m());
    let gamma = hp.lambda / hp.beta;
    let mut q = Array2::zeros(c.dim());
    for (i, col) in c.columns().into_iter().enumerate() {
        let problem = ProxProblem::new(col.to_vec(), kk, gamma)?;
        for (dst, v) in q.column_mut(i).iter_mut().zip(prox_k2(&problem)?) {
            *dst = v;
        }
    }
    Ok(q)
}
