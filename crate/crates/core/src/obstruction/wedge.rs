use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::comass::{comass, comass_warm, ComassOptions};
use crate::error::{Error, Result};
use crate::exterior::{binomial, AlternatingForm, MetricTensor, SimpleVector};

/// `binom(m₁+m₂, m₁)·C₁·C₂`.
pub fn wedge_comass_bound(c1: f64, m1: usize, c2: f64, m2: usize) -> Result<f64> {
    if !(c1 >= 0.0 && c2 >= 0.0) {
        return Err(Error::invalid("comass bounds must be nonnegative"));
    }
    Ok(binomial(m1 + m2, m1) as f64 * c1 * c2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WedgeCheck {
    pub c1: f64,
    pub c2: f64,
    /// Comass of `φ₁∧φ₂` under `g₁ ⊕ g₂`.
    pub measured: f64,
    pub bound: f64,
    /// `measured ≤ bound + 1e-6`.
    pub ok: bool,
    /// `measured ≥ C₁C₂`, the value on the wedge of the two maximizers.
    pub above_split: bool,
}

fn block_embed(v: &SimpleVector, n_total: usize, offset: usize) -> DMatrix<f64> {
    let m = v.matrix();
    let mut out = DMatrix::zeros(n_total, m.ncols());
    out.view_mut((offset, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

pub fn wedge_comass_check(
    phi1: &AlternatingForm,
    g1: &MetricTensor,
    phi2: &AlternatingForm,
    g2: &MetricTensor,
    opts: &ComassOptions,
) -> Result<WedgeCheck> {
    if phi1.is_zero() || phi2.is_zero() {
        return Err(Error::ZeroForm);
    }
    let (n1, n2) = (phi1.dim(), phi2.dim());
    let n = n1 + n2;
    let r1 = comass(phi1, g1, opts)?;
    let r2 = comass(phi2, g2, opts)?;
    let wedge = phi1.embed(n, 0)?.wedge(&phi2.embed(n, n1)?)?;
    let g = g1.block_sum(g2);
    let a = block_embed(&r1.maximizer, n, 0);
    let b = block_embed(&r2.maximizer, n, n1);
    let split = SimpleVector::from_matrix(DMatrix::from_fn(n, a.ncols() + b.ncols(), |i, j| {
        if j < a.ncols() {
            a[(i, j)]
        } else {
            b[(i, j - a.ncols())]
        }
    }));
    let measured = comass_warm(&wedge, &g, opts, Some(&split))?.value;
    let bound = wedge_comass_bound(r1.value, phi1.degree(), r2.value, phi2.degree())?;
    Ok(WedgeCheck {
        c1: r1.value,
        c2: r2.value,
        measured,
        bound,
        ok: measured <= bound + 1e-6,
        above_split: measured >= r1.value * r2.value - 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_arithmetic() {
        assert_eq!(wedge_comass_bound(1.0, 1, 1.0, 1).unwrap(), 2.0);
        let c = 1.0 / 24.0;
        assert!((wedge_comass_bound(c, 2, c, 2).unwrap() - 1.0 / 96.0).abs() < 1e-18);
        assert!((wedge_comass_bound(0.5, 2, 0.1, 3).unwrap() - 0.5).abs() < 1e-15);
        assert!(wedge_comass_bound(-1.0, 1, 1.0, 1).is_err());
    }

    #[test]
    fn wedge_examples() {
        let opts = ComassOptions::default();
        let dx = AlternatingForm::basis(1, &[0]).unwrap();
        let e1 = MetricTensor::euclidean(1);
        let r = wedge_comass_check(&dx, &e1, &dx, &e1, &opts).unwrap();
        assert!((r.measured - 1.0).abs() < 1e-9 && r.bound == 2.0 && r.ok && r.above_split);

        let kahler = &AlternatingForm::basis(4, &[0, 1]).unwrap() + &AlternatingForm::basis(4, &[2, 3]).unwrap();
        let e4 = MetricTensor::euclidean(4);
        let r = wedge_comass_check(&kahler, &e4, &kahler, &e4, &opts).unwrap();
        assert!((r.bound - 6.0).abs() < 1e-9 && r.ok && r.above_split, "{r:?}");

        let tiny = kahler.scaled(1.0 / 24.0);
        let r = wedge_comass_check(&tiny, &e4, &tiny, &e4, &opts).unwrap();
        assert!(r.measured <= 1.0);
    }
}
