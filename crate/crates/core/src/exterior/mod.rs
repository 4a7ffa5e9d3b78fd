//! Multilinear algebra on ℝⁿ: constant-coefficient forms, simple m-vectors,
//! metrics, and the operations between them (wedge, contraction,
//! evaluation, Gram norms, pullback).
//!
//! Indices are zero-based throughout the API.

mod form;
mod index;
mod metric;
mod simple;

pub use form::{AlternatingForm, DENSE_LIMIT};
pub use index::{binomial, MultiIndex, MultiIndexIter};
pub use metric::MetricTensor;
pub use simple::SimpleVector;

use crate::error::Result;

pub fn wedge(phi: &AlternatingForm, psi: &AlternatingForm) -> Result<AlternatingForm> {
    phi.wedge(psi)
}

pub fn contract(eta: &SimpleVector, phi: &AlternatingForm) -> Result<AlternatingForm> {
    phi.contract(eta)
}

pub fn evaluate(phi: &AlternatingForm, q: &SimpleVector) -> Result<f64> {
    phi.evaluate(q)
}

pub fn gram_norm(q: &SimpleVector, g: &MetricTensor) -> Result<f64> {
    q.gram_norm(g)
}

pub fn pullback(a: &nalgebra::DMatrix<f64>, phi: &AlternatingForm) -> Result<AlternatingForm> {
    phi.pullback(a)
}
