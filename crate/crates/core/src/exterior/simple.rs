use nalgebra::{DMatrix, DVector};

use super::metric::MetricTensor;
use crate::error::{Error, Result};

/// `v₁∧…∧v_m` as the ordered list of its factors, stored as the columns of
/// an `n×m` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleVector {
    factors: DMatrix<f64>,
}

impl SimpleVector {
    pub fn from_matrix(factors: DMatrix<f64>) -> Self {
        SimpleVector { factors }
    }

    pub fn from_factors(factors: &[DVector<f64>]) -> Result<Self> {
        let n = factors
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::invalid("simple vector needs at least one factor"))?;
        if let Some(bad) = factors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        Ok(SimpleVector { factors: DMatrix::from_columns(factors) })
    }

    /// `e_{i₁}∧…∧e_{i_m}` in ℝⁿ (zero-based indices).
    pub fn basis(n: usize, indices: &[usize]) -> Self {
        let mut f = DMatrix::zeros(n, indices.len());
        for (col, &i) in indices.iter().enumerate() {
            f[(i, col)] = 1.0;
        }
        SimpleVector { factors: f }
    }

    pub fn dim(&self) -> usize {
        self.factors.nrows()
    }

    pub fn degree(&self) -> usize {
        self.factors.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> DVector<f64> {
        self.factors.column(j).into_owned()
    }

    pub fn factors(&self) -> Vec<DVector<f64>> {
        (0..self.degree()).map(|j| self.factor(j)).collect()
    }

    /// `self ∧ other`, i.e. the concatenated factor list.
    pub fn wedge(&self, other: &SimpleVector) -> Result<SimpleVector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let mut cols = self.factors();
        cols.extend(other.factors());
        SimpleVector::from_factors(&cols)
    }

    pub fn scaled(&self, c: f64) -> SimpleVector {
        let mut f = self.factors.clone();
        if f.ncols() > 0 {
            let first = f.column(0) * c;
            f.set_column(0, &first);
        }
        SimpleVector { factors: f }
    }

    pub fn swapped(&self, i: usize, j: usize) -> SimpleVector {
        let mut f = self.factors.clone();
        f.swap_columns(i, j);
        SimpleVector { factors: f }
    }

    /// Determinant of the Gram matrix `[g(vᵢ, vⱼ)]`.
    pub fn gram_determinant(&self, g: &MetricTensor) -> Result<f64> {
        if g.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: g.dim() });
        }
        let gram = self.factors.transpose() * g.matrix() * &self.factors;
        Ok(gram.determinant())
    }

    /// `‖v₁∧…∧v_m‖_g = √det[g(vᵢ,vⱼ)]`.
    pub fn gram_norm(&self, g: &MetricTensor) -> Result<f64> {
        Ok(self.gram_determinant(g)?.max(0.0).sqrt())
    }

    /// Same m-plane and orientation, with unit Gram norm under `g`. The
    /// returned factors are `g`-orthonormal.
    pub fn normalized(&self, g: &MetricTensor) -> Result<SimpleVector> {
        let q = crate::linalg::orthonormalize(&self.factors, Some(g.matrix()))
            .ok_or_else(|| Error::invalid("simple vector has linearly dependent factors"))?;
        // Gram–Schmidt is triangular with positive diagonal, so orientation is kept
        Ok(SimpleVector { factors: q })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_norm_examples() {
        let e = MetricTensor::euclidean(3);
        assert!((SimpleVector::basis(3, &[0, 1]).gram_norm(&e).unwrap() - 1.0).abs() < 1e-15);
        let q = SimpleVector::basis(3, &[0, 1]).scaled(2.0);
        assert!((q.gram_norm(&e).unwrap() - 2.0).abs() < 1e-15);
        let g = MetricTensor::diagonal(&[4.0, 9.0, 1.0]).unwrap();
        assert!((SimpleVector::basis(3, &[0, 1]).gram_norm(&g).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn dependent_factors_have_zero_norm() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let q = SimpleVector::from_factors(&[v.clone(), v * -2.0]).unwrap();
        assert!(q.gram_norm(&MetricTensor::euclidean(3)).unwrap() < 1e-7);
        assert!(q.normalized(&MetricTensor::euclidean(3)).is_err());
    }
}
