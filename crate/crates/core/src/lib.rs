//! Dictionary learning for thresholded features.
//!
//! A thresholded feature keeps the `k` largest-magnitude correlations
//! `max_k(W^T x)` of a sample with the atoms of a unit-norm dictionary `W`.
//! This crate provides the encoder, the (k,2)-norm proximal operator used by
//! the ADMM dictionary trainer, checkable support-recovery conditions, the
//! OMP/KSVD baselines and the synthetic benchmark harness.

pub mod baselines;
pub mod bench;
pub mod encoder;
pub mod error;
pub mod guarantees;
pub mod io;
pub mod linalg;
pub mod model;
pub mod prox;
pub mod prox_selftest;
pub mod soundness;
pub mod trainer;

pub use error::{DltfError, Result};
pub use model::{DataMatrix, Dictionary, SparseCodeBatch, SupportMask};
