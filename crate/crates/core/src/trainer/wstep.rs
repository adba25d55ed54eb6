//! Dictionary update on the product of unit spheres.
//!
//! Minimizes
//! `F(W) = ||W^T W - I||^2 + (theta/2)||R||^2 + <Y, Q - A> + (beta/2)||Q - A||^2`
//! with `R = X - W Z` and `A = W^T R`, using projected gradients, a
//! Barzilai-Borwein step, a nonmonotone Armijo test and column normalization
//! as the retraction.

use ndarray::{Array2, ArrayView2, Axis, Zip};

use super::{check_shapes, mul_sparse_transpose, Hyperparams, TrainerState};
use crate::error::Result;
use crate::model::{frob_dot, frob_sq, mul_sparse_right, normalize_columns, DataMatrix, Dictionary, SparseCodeBatch};

/// Weight of the reference value in the nonmonotone acceptance test.
const NONMONOTONE_ETA: f64 = 0.85;
/// Sufficient-decrease constant.
const ARMIJO_RHO: f64 = 1e-4;
const TAU_MIN: f64 = 1e-10;
const TAU_MAX: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct WUpdate {
    pub dictionary: Dictionary,
    pub objective_before: f64,
    pub objective_after: f64,
    pub iterations: usize,
    /// Frobenius norm of the projected gradient at the returned point.
    pub grad_norm: f64,
    pub line_search_failed: bool,
}

struct Terms {
    r: Array2<f64>,
    a: Array2<f64>,
    g: Array2<f64>,
}

fn terms(w: &ArrayView2<'_, f64>, x: &DataMatrix, z: &SparseCodeBatch) -> Terms {
    let r = &x.view() - &mul_sparse_right(w, z);
    let a = w.t().dot(&r);
    let mut g = w.t().dot(w);
    g.diag_mut().mapv_inplace(|v| v - 1.0);
    Terms { r, a, g }
}

/// `F(W)` for an arbitrary (not necessarily normalized) `W`.
pub fn w_subproblem_objective(
    w: &ArrayView2<'_, f64>,
    x: &DataMatrix,
    z: &SparseCodeBatch,
    q: &ArrayView2<'_, f64>,
    y: &ArrayView2<'_, f64>,
    hp: &Hyperparams,
) -> f64 {
    let t = terms(w, x, z);
    let d = q - &t.a;
    frob_sq(&t.g.view())
        + 0.5 * hp.theta * frob_sq(&t.r.view())
        + frob_dot(y, &d.view())
        + 0.5 * hp.beta * frob_sq(&d.view())
}

/// Euclidean gradient of [`w_subproblem_objective`]:
/// `4 W (G - I) - theta R Z^T - R M^T + W M Z^T` with `M = Y + beta (Q - A)`.
pub fn w_subproblem_gradient(
    w: &ArrayView2<'_, f64>,
    x: &DataMatrix,
    z: &SparseCodeBatch,
    q: &ArrayView2<'_, f64>,
    y: &ArrayView2<'_, f64>,
    hp: &Hyperparams,
) -> Array2<f64> {
    let t = terms(w, x, z);
    let mut mm = y.to_owned();
    mm.scaled_add(hp.beta, &(q - &t.a));
    let mut grad = w.dot(&t.g) * 4.0;
    grad.scaled_add(-hp.theta, &mul_sparse_transpose(&t.r.view(), z));
    grad.scaled_add(-1.0, &t.r.dot(&mm.t()));
    grad += &w.dot(&mul_sparse_transpose(&mm.view(), z));
    grad
}

/// Removes the radial component of each column.
fn project_tangent(w: &ArrayView2<'_, f64>, grad: &mut Array2<f64>) {
    Zip::from(grad.axis_iter_mut(Axis(1)))
        .and(w.axis_iter(Axis(1)))
        .for_each(|mut g, wc| {
            let s = g.dot(&wc);
            g.scaled_add(-s, &wc);
        });
}

/// Runs at most `hp.w_max_iters` Riemannian steps from the current dictionary.
///
/// If the line search exhausts its backtracks the last accepted iterate is
/// returned and `line_search_failed` is set.
pub fn update_w(state: &TrainerState, x: &DataMatrix, hp: &Hyperparams) -> Result<WUpdate> {
    check_shapes(state, x)?;
    let (z, q, y) = (&state.z, state.q.view(), state.y.view());
    let eval = |w: &ArrayView2<'_, f64>| w_subproblem_objective(w, x, z, &q, &y, hp);
    let rgrad = |w: &ArrayView2<'_, f64>| {
        let mut p = w_subproblem_gradient(w, x, z, &q, &y, hp);
        project_tangent(w, &mut p);
        p
    };

    let mut w = state.w.clone();
    let mut f = eval(&w.view());
    let objective_before = f;
    let mut p = rgrad(&w.view());
    let mut p_sq = frob_sq(&p.view());
    let mut reference = f;
    let mut weight = 1.0;
    let mut tau = 0.1 / p_sq.sqrt().max(1e-300);
    let mut iterations = 0;
    let mut line_search_failed = false;

    while iterations < hp.w_max_iters && p_sq.sqrt() >= hp.w_grad_tol {
        let mut accepted = None;
        for _ in 0..=hp.max_backtracks {
            let mut trial = w.view().to_owned();
            trial.scaled_add(-tau, &p);
            let trial = normalize_columns(&trial)?;
            let f_trial = eval(&trial.view());
            if f_trial <= reference - ARMIJO_RHO * tau * p_sq {
                accepted = Some((trial, f_trial));
                break;
            }
            tau *= 0.5;
        }
        let Some((w_new, f_new)) = accepted else {
            line_search_failed = true;
            break;
        };
        iterations += 1;
        let p_new = rgrad(&w_new.view());
        let s = &w_new.view() - &w.view();
        let dy = &p_new - &p;
        let sy = frob_dot(&s.view(), &dy.view()).abs();
        tau = if sy > 0.0 {
            if iterations % 2 == 1 {
                frob_sq(&s.view()) / sy
            } else {
                sy / frob_sq(&dy.view()).max(1e-300)
            }
        } else {
            TAU_MAX
        }
        .clamp(TAU_MIN, TAU_MAX);

        let next_weight = NONMONOTONE_ETA * weight + 1.0;
        reference = (NONMONOTONE_ETA * weight * reference + f_new) / next_weight;
        weight = next_weight;
        w = w_new;
        f = f_new;
        p = p_new;
        p_sq = frob_sq(&p.view());
    }

    Ok(WUpdate {
        dictionary: w,
        objective_before,
        objective_after: f,
        iterations,
        grad_norm: p_sq.sqrt(),
        line_search_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn tangent_projection_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = normalize_columns(&Array2::from_shape_fn((4, 6), |_| StandardNormal.sample(&mut rng))).unwrap();
        let mut g = Array2::from_shape_fn((4, 6), |_| StandardNormal.sample(&mut rng));
        project_tangent(&w.view(), &mut g);
        for j in 0..6 {
            assert!(g.column(j).dot(&w.atom(j)).abs() < 1e-14);
        }
    }

    #[test]
    fn orthonormal_basis_with_exact_fit_is_stationary() {
        let w = Dictionary::new(Array2::eye(3)).unwrap();
        let z = ndarray::array![[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]];
        let x = DataMatrix::new(z.clone()).unwrap();
        let hp = Hyperparams { k: 1, atoms: 3, ..Default::default() };
        let mut state = TrainerState::from_dictionary(w, &x, &hp).unwrap();
        state.z = SparseCodeBatch::new(z, 1).unwrap();
        let up = update_w(&state, &x, &hp).unwrap();
        assert_eq!(up.iterations, 0);
        assert!(up.grad_norm < 1e-14);
        assert_eq!(up.objective_before, 0.0);
    }
}
