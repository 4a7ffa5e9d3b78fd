use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exterior::{AlternatingForm, MultiIndex, SimpleVector};

/// `|φ(ξ)|` must be within this of 1.
pub const UNIT_TOL: f64 = 1e-9;
/// Coefficients the construction forces to vanish are checked against this.
const FORCED_ZERO_TOL: f64 = 1e-9;

/// `φ = ±v₁*∧⋯∧v_m* + Σ a_I v_I*` in the dual basis of `[V | W]`, where
/// `W` is the common kernel of the 1-forms `λᵢ = φ(ηᵢ ∧ ·)`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub v_basis: DMatrix<f64>,
    /// Euclidean-orthonormal basis of `W`, oriented so that `det[V|W] > 0`.
    pub w_basis: DMatrix<f64>,
    pub leading_sign: f64,
    /// `a_I` for multi-indices into the combined basis (zero-based; `0..m`
    /// are the `V` slots). Only indices with fewer than `m − 1` `V` slots
    /// are stored, the rest vanish.
    pub tail_coeffs: Vec<(MultiIndex, f64)>,
    /// Rows are the `λᵢ` as covectors.
    pub lambdas: DMatrix<f64>,
}

impl Decomposition {
    pub fn dim(&self) -> usize {
        self.v_basis.nrows()
    }

    pub fn degree(&self) -> usize {
        self.v_basis.ncols()
    }

    /// The basis `[V | W]` as an `n×n` matrix.
    pub fn basis(&self) -> DMatrix<f64> {
        let (n, m) = (self.dim(), self.degree());
        let mut b = DMatrix::zeros(n, n);
        b.view_mut((0, 0), (n, m)).copy_from(&self.v_basis);
        b.view_mut((0, m), (n, n - m)).copy_from(&self.w_basis);
        b
    }

    /// Coefficients against the combined basis, including the leading term.
    pub fn basis_form(&self) -> AlternatingForm {
        let (n, m) = (self.dim(), self.degree());
        let mut psi = AlternatingForm::zero(n, m);
        psi.set(&MultiIndex::leading(m), self.leading_sign);
        for (i, a) in &self.tail_coeffs {
            psi.set(i, *a);
        }
        psi
    }

    /// Reassemble the form in standard coordinates.
    pub fn reconstruct(&self) -> Result<AlternatingForm> {
        let binv = self
            .basis()
            .try_inverse()
            .ok_or_else(|| Error::invalid("decomposition basis is singular"))?;
        self.basis_form().pullback(&binv)
    }
}

/// `ηᵢ = (−1)^{m+i} v₁∧⋯∧v̂ᵢ∧⋯∧v_m` with one-based `i`; zero-based below.
fn eta(v: &DMatrix<f64>, i: usize) -> SimpleVector {
    let m = v.ncols();
    let cols: Vec<_> = (0..m).filter(|&j| j != i).map(|j| v.column(j).into_owned()).collect();
    let mut f = DMatrix::zeros(v.nrows(), m - 1);
    for (c, col) in cols.iter().enumerate() {
        f.set_column(c, col);
    }
    // (−1)^{m+(i+1)}
    let sign = if (m + i + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    SimpleVector::from_matrix(f).scaled(sign)
}

fn sign_scaled_eta(v: &DMatrix<f64>, i: usize) -> (SimpleVector, f64) {
    let e = eta(v, i);
    if e.degree() == 0 {
        // empty wedge: the scalar sign lives outside the factor list
        let m = v.ncols();
        let sign = if (m + i + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        return (e, sign);
    }
    (e, 1.0)
}

/// The 1-forms `λᵢ(v) = φ(ηᵢ ∧ v)` as the rows of an `m×n` matrix.
pub(crate) fn lambda_matrix(phi: &AlternatingForm, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, m) = (phi.dim(), v.ncols());
    let mut out = DMatrix::zeros(m, n);
    for i in 0..m {
        let (e, extra) = sign_scaled_eta(v, i);
        let lam = phi.contract(&e)?;
        for (idx, c) in lam.terms() {
            out[(i, idx.as_slice()[0])] = extra * c;
        }
    }
    Ok(out)
}

pub fn decompose(phi: &AlternatingForm, xi: &SimpleVector) -> Result<Decomposition> {
    let (n, m) = (phi.dim(), phi.degree());
    if xi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: xi.dim() });
    }
    if xi.degree() != m {
        return Err(Error::DegreeMismatch { expected: m, found: xi.degree() });
    }
    if m == 0 {
        return Err(Error::invalid("decomposition needs degree ≥ 1"));
    }
    let v = xi.matrix().clone();
    let svals = v.clone().singular_values();
    let smax = svals.iter().fold(0.0f64, |a, &s| a.max(s));
    let smin = svals.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if !(smin > 1e-10 * smax.max(1.0)) {
        return Err(Error::invalid("ξ has linearly dependent factors"));
    }
    let val = phi.evaluate(xi)?;
    if (val.abs() - 1.0).abs() > UNIT_TOL {
        return Err(Error::precondition(format!(
            "φ(ξ) = {val}, expected ±1; rescale φ by 1/φ(ξ) first"
        )));
    }
    let sign = val.signum();

    let mut lambdas = lambda_matrix(phi, &v)? * sign;
    // the pairing is δᵢⱼ up to rounding; re-solve it exactly
    let pairing = &lambdas * &v;
    if (&pairing - DMatrix::identity(m, m)).abs().max() > 1e-8 {
        return Err(Error::invalid("λᵢ(vⱼ) pairing is not the identity"));
    }
    lambdas = pairing
        .try_inverse()
        .ok_or_else(|| Error::invalid("λᵢ(vⱼ) pairing is singular"))?
        * lambdas;

    // W = ker Λ, reached from the Euclidean complement of V through the
    // projection P = I − VΛ along V
    let vq = crate::linalg::orthonormalize(&v, None)
        .ok_or_else(|| Error::invalid("ξ has linearly dependent factors"))?;
    let full = crate::linalg::complete_basis(&vq, None);
    let u = full.columns(m, n - m).into_owned();
    let p = DMatrix::identity(n, n) - &v * &lambdas;
    let mut w = if n > m {
        crate::linalg::orthonormalize(&(p * u), None)
            .ok_or_else(|| Error::invalid("common kernel of the λᵢ has the wrong dimension"))?
    } else {
        DMatrix::zeros(n, 0)
    };

    let mut b = DMatrix::zeros(n, n);
    b.view_mut((0, 0), (n, m)).copy_from(&v);
    b.view_mut((0, m), (n, n - m)).copy_from(&w);
    if n > m && b.determinant() < 0.0 {
        let last = -w.column(n - m - 1).into_owned();
        w.set_column(n - m - 1, &last);
        b.set_column(n - 1, &last);
    }

    let scale = phi.max_abs_coeff().max(1.0);
    let mut tail = Vec::new();
    let mut cols = DMatrix::zeros(n, m);
    for idx in MultiIndex::all(n, m) {
        let v_slots = idx.as_slice().iter().filter(|&&i| i < m).count();
        if v_slots == m {
            continue;
        }
        for (slot, &src) in idx.as_slice().iter().enumerate() {
            cols.set_column(slot, &b.column(src));
        }
        let a = phi.evaluate_columns(&cols)?;
        if v_slots + 1 >= m {
            if a.abs() > FORCED_ZERO_TOL * scale {
                return Err(Error::NonConvergence(format!(
                    "coefficient a_{idx} = {a:e} should vanish"
                )));
            }
            continue;
        }
        if a != 0.0 {
            tail.push((idx, a));
        }
    }

    Ok(Decomposition { v_basis: v, w_basis: w, leading_sign: sign, tail_coeffs: tail, lambdas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn basis_form(n: usize, terms: &[(&[usize], f64)]) -> AlternatingForm {
        let mut f = AlternatingForm::zero(n, terms[0].0.len());
        for (i, c) in terms {
            f = &f + &AlternatingForm::basis(n, i).unwrap().scaled(*c);
        }
        f
    }

    fn spans_equal(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
        // projections onto the two column spaces agree
        let qa = crate::linalg::orthonormalize(a, None).unwrap();
        let qb = crate::linalg::orthonormalize(b, None).unwrap();
        (&qa * qa.transpose() - &qb * qb.transpose()).abs().max() < 1e-10
    }

    #[test]
    fn kahler_pair_decomposes() {
        let phi = basis_form(4, &[(&[0, 1], 1.0), (&[2, 3], 1.0)]);
        let d = decompose(&phi, &SimpleVector::basis(4, &[0, 1])).unwrap();
        assert!(spans_equal(&d.w_basis, &SimpleVector::basis(4, &[2, 3]).matrix().clone()));
        assert_eq!(d.tail_coeffs.len(), 1);
        assert_eq!(d.tail_coeffs[0].0.as_slice(), &[2, 3]);
        assert!((d.tail_coeffs[0].1 - 1.0).abs() < 1e-12);
        assert!(d.reconstruct().unwrap().approx_eq(&phi, 1e-12));
        let expect = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((&d.lambdas - expect).abs().max() < 1e-14);
    }

    #[test]
    fn monomial_has_no_tail() {
        let phi = AlternatingForm::basis(5, &[0, 1]).unwrap();
        let d = decompose(&phi, &SimpleVector::basis(5, &[0, 1])).unwrap();
        assert!(spans_equal(&d.w_basis, &SimpleVector::basis(5, &[2, 3, 4]).matrix().clone()));
        assert!(d.tail_coeffs.is_empty());
    }

    #[test]
    fn linear_form_kernel() {
        let phi = AlternatingForm::covector(&[1.0, 1.0]);
        let d = decompose(&phi, &SimpleVector::basis(2, &[0])).unwrap();
        let w = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        assert!(spans_equal(&d.w_basis, &w));
        assert!(d.tail_coeffs.is_empty());
        assert!(d.reconstruct().unwrap().approx_eq(&phi, 1e-12));
    }

    #[test]
    fn pairing_is_identity_for_generic_xi() {
        let phi = basis_form(4, &[(&[0, 1], 2.0), (&[0, 2], 0.5), (&[1, 3], -1.0), (&[2, 3], 0.3)]);
        let v1 = DVector::from_vec(vec![1.0, 0.2, 0.0, 0.1]);
        let v2 = DVector::from_vec(vec![0.0, 1.0, 0.3, 0.0]);
        let xi = SimpleVector::from_factors(&[v1, v2]).unwrap();
        let val = phi.evaluate(&xi).unwrap();
        let phi = phi.scaled(1.0 / val);
        let d = decompose(&phi, &xi).unwrap();
        assert!((&d.lambdas * xi.matrix() - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        assert!((&d.lambdas * &d.w_basis).abs().max() < 1e-12);
        assert!(d.reconstruct().unwrap().approx_eq(&phi, 1e-10));
        assert!(d.basis().determinant() > 0.0);
    }

    #[test]
    fn rejects_unnormalized_xi() {
        let phi = AlternatingForm::basis(3, &[0, 1]).unwrap().scaled(2.0);
        assert!(matches!(
            decompose(&phi, &SimpleVector::basis(3, &[0, 1])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn negative_orientation_is_recorded() {
        let phi = AlternatingForm::basis(3, &[0, 1]).unwrap();
        let d = decompose(&phi, &SimpleVector::basis(3, &[1, 0])).unwrap();
        assert_eq!(d.leading_sign, -1.0);
        assert!(d.reconstruct().unwrap().approx_eq(&phi, 1e-12));
    }
}
