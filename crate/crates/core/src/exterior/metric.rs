use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric positive-definite bilinear form on ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    matrix: DMatrix<f64>,
}

impl MetricTensor {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::invalid(format!(
                "metric matrix is {}x{}, expected square",
                n,
                matrix.ncols()
            )));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!("metric matrix not symmetric (defect {asym:e})")));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let min_eig = crate::linalg::spd_min_eigenvalue(&sym);
        if !(min_eig > 0.0) || sym.clone().cholesky().is_none() {
            return Err(Error::invalid(format!(
                "metric matrix not positive definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(MetricTensor { matrix: sym })
    }

    pub fn euclidean(n: usize) -> Self {
        MetricTensor { matrix: DMatrix::identity(n, n) }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.matrix * c)
    }

    /// Lower-triangular `L` with `g = L Lᵀ`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.matrix
            .clone()
            .cholesky()
            .expect("metric validated positive definite at construction")
            .l()
    }

    /// The linear map `L⁻ᵀ` taking Euclidean-orthonormal frames to
    /// `g`-orthonormal ones.
    pub fn whitening(&self) -> DMatrix<f64> {
        let l = self.cholesky_factor();
        let linv = l
            .try_inverse()
            .expect("cholesky factor of a positive-definite matrix is invertible");
        linv.transpose()
    }

    /// `g₁ ⊕ g₂` on `ℝ^{n₁+n₂}`.
    pub fn block_sum(&self, other: &MetricTensor) -> MetricTensor {
        let (n1, n2) = (self.dim(), other.dim());
        let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
        m.view_mut((0, 0), (n1, n1)).copy_from(&self.matrix);
        m.view_mut((n1, n1), (n2, n2)).copy_from(&other.matrix);
        MetricTensor { matrix: m }
    }

    pub fn inner(&self, a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
        (a.transpose() * &self.matrix * b)[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(MetricTensor::diagonal(&[1.0, -1.0]).is_err());
        assert!(MetricTensor::diagonal(&[1.0, 0.0]).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(MetricTensor::new(m).is_err());
        assert!(MetricTensor::diagonal(&[4.0, 9.0]).is_ok());
    }

    #[test]
    fn whitening_orthonormalizes() {
        let g = MetricTensor::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let w = g.whitening();
        let gram = w.transpose() * g.matrix() * &w;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
