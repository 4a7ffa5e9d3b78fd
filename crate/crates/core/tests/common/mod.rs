#![allow(dead_code)]

use calibra::exterior::{AlternatingForm, MetricTensor, MultiIndex};
use calibra::rng::{gaussian_matrix, gaussian_vector, SeededRng};
use nalgebra::DMatrix;

pub fn random_form(rng: &mut SeededRng, n: usize, m: usize) -> AlternatingForm {
    let idx: Vec<MultiIndex> = MultiIndex::all(n, m).collect();
    let c = gaussian_vector(rng, idx.len());
    AlternatingForm::from_terms(n, m, idx.into_iter().zip(c.iter().copied())).unwrap()
}

/// `AAᵀ + ½I` with Gaussian `A`: condition numbers stay moderate.
pub fn random_metric(rng: &mut SeededRng, n: usize) -> MetricTensor {
    let a = gaussian_matrix(rng, n, n);
    MetricTensor::new(&a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5).unwrap()
}

/// Haar-ish rotation from the QR factor of a Gaussian matrix.
pub fn random_rotation(rng: &mut SeededRng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
