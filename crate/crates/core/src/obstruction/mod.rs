//! Obstructions to constant-coefficient calibrations of cones over minimal
//! products with a hypersurface factor, and the comass bound for wedge
//! products of forms on orthogonal blocks.
//!
//! A constant calibration of such a cone pulls back to a simple form on the
//! hypersurface factor's ambient space whose value on every cone plane
//! `ξ(x)∧x` is the same nonzero constant. Writing that simple form as
//! `v ↦ det[v, n]`, the value is `±⟨n, N(x)⟩`, so the Gauss image would lie in
//! an open hemisphere. A zero convex combination of Gauss points rules that
//! out.

mod hemisphere;
mod wedge;

pub use hemisphere::{hemisphere_test, HemisphereCertificate, HemisphereVerdict};
pub use wedge::{wedge_comass_bound, wedge_comass_check, WedgeCheck};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{AlternatingForm, MultiIndex};
use crate::product::{minimal_product, Factor, ProductLink};

const UNIT_TOL: f64 = 1e-10;

/// Points on `S^n ⊂ ℝ^{n+1}`.
#[derive(Clone, Debug)]
pub struct SpherePointSet {
    pub n: usize,
    pub points: Vec<DVector<f64>>,
}

impl SpherePointSet {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::invalid("empty point set"))?;
        let len = first.len();
        if len < 1 {
            return Err(Error::invalid("points need at least one coordinate"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != len {
                return Err(Error::DimensionMismatch { expected: len, found: p.len() });
            }
            if (p.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(format!("point {i} has norm {}", p.norm())));
            }
        }
        Ok(SpherePointSet { n: len - 1, points })
    }

    pub fn ambient_len(&self) -> usize {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Representatives of the points up to `tol`.
    pub fn distinct(&self, tol: f64) -> Vec<DVector<f64>> {
        let mut out: Vec<DVector<f64>> = Vec::new();
        for p in &self.points {
            if !out.iter().any(|q| (q - p).norm() <= tol) {
                out.push(p.clone());
            }
        }
        out
    }

    pub fn negated(&self) -> SpherePointSet {
        SpherePointSet { n: self.n, points: self.points.iter().map(|p| -p).collect() }
    }
}

/// One sample of an oriented hypersurface: point, tangent frame and unit
/// normal inside the sphere.
#[derive(Clone, Debug)]
pub struct HypersurfaceSample {
    pub x: DVector<f64>,
    pub tangent: DMatrix<f64>,
    pub normal: DVector<f64>,
}

/// Samples of a codimension-one factor, oriented by its normal frame
/// (reversed when `reverse`).
pub fn hypersurface_samples(factor: &Factor, count: usize, seed: u64, reverse: bool) -> Result<Vec<HypersurfaceSample>> {
    if factor.codim() != 1 {
        return Err(Error::precondition(format!(
            "factor has codimension {} in its sphere, the obstruction needs a hypersurface",
            factor.codim()
        )));
    }
    let link = minimal_product(vec![factor.clone()])?;
    let sign = if reverse { -1.0 } else { 1.0 };
    Ok(link
        .sample_points(count, seed)?
        .into_iter()
        .map(|p| HypersurfaceSample { normal: p.normals.column(0).into_owned() * sign, x: p.x, tangent: p.tangent })
        .collect())
}

/// `x ↦ x*`, the unit normals read as points of the sphere.
pub fn gauss_image(samples: &[HypersurfaceSample]) -> Result<SpherePointSet> {
    SpherePointSet::new(samples.iter().map(|s| s.normal.clone()).collect())
}

/// The simple `N`-form `v₁∧⋯∧v_N ↦ det[v₁, …, v_N, n]` on `ℝ^{N+1}`.
pub fn determinant_form(n: &DVector<f64>) -> Result<AlternatingForm> {
    let dim = n.len();
    let m = dim - 1;
    let terms = (0..dim).map(|j| {
        let idx: Vec<usize> = (0..dim).filter(|&i| i != j).collect();
        let sign = if (j + m).is_multiple_of(2) { 1.0 } else { -1.0 };
        (MultiIndex::new(idx, dim).expect("increasing indices"), sign * n[j])
    });
    AlternatingForm::from_terms(dim, m, terms)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleResidual {
    pub index: usize,
    /// `det[ξ, x, N]`, the orientation of the sample.
    pub orientation: f64,
    /// `max_j |P_j(ξ∧x) − det[ξ,x,N]·⟨e_j, N⟩|` over the coordinate simple
    /// forms `P_j = det[·, e_j]`.
    pub evaluation_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub obstructed: bool,
    pub lambda1: f64,
    pub samples: usize,
    /// The Gauss image collapses to one point (the equatorial case).
    pub single_point: bool,
    pub certificate: HemisphereCertificate,
    /// The certificate re-checked against the Gauss points.
    pub certificate_verified: bool,
    /// `λ₁ − ‖Σ wᵢN(xᵢ)‖`: a constant calibration would need every
    /// `⟨n, N(xᵢ)⟩` to equal `±λ₁`, and the zero combination bounds their
    /// weighted mean by the residual.
    pub contradiction_gap: Option<f64>,
    pub max_evaluation_residual: f64,
    pub orientation_consistent: bool,
    pub per_sample: Vec<SampleResidual>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstructionOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for ObstructionOptions {
    fn default() -> Self {
        ObstructionOptions { samples: 256, seed: 0, tol: 1e-8 }
    }
}

/// Whether a constant-coefficient calibration of the cone over `product`
/// is ruled out by the Gauss image of its first factor.
pub fn constant_calibration_obstruction(product: &ProductLink, opts: &ObstructionOptions) -> Result<ObstructionReport> {
    let first = &product.factors[0];
    let samples = hypersurface_samples(first, opts.samples, opts.seed, false)?;
    let image = gauss_image(&samples)?;
    let dim = image.ambient_len();
    let coord_forms: Vec<AlternatingForm> = (0..dim)
        .map(|j| determinant_form(&DVector::from_fn(dim, |i, _| if i == j { 1.0 } else { 0.0 })))
        .collect::<Result<_>>()?;
    let per_sample: Vec<SampleResidual> = samples
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            let mut cols: Vec<DVector<f64>> = s.tangent.column_iter().map(|c| c.into_owned()).collect();
            cols.push(s.x.clone());
            let plane = DMatrix::from_columns(&cols);
            let mut full = cols.clone();
            full.push(s.normal.clone());
            let orientation = DMatrix::from_columns(&full).determinant();
            let mut worst: f64 = 0.0;
            for (j, p) in coord_forms.iter().enumerate() {
                let v = p.evaluate_columns(&plane)?;
                worst = worst.max((v - orientation * s.normal[j]).abs());
            }
            Ok(SampleResidual { index, orientation, evaluation_residual: worst })
        })
        .collect::<Result<_>>()?;
    let certificate = hemisphere_test(&image, opts.tol)?;
    let certificate_verified = certificate.verify(&image);
    let single_point = image.distinct(1e-9).len() == 1;
    let lambda1 = product.lambdas[0];
    let obstructed = certificate_verified
        && matches!(certificate.verdict, HemisphereVerdict::Infeasible | HemisphereVerdict::Boundary)
        && certificate.dual_residual.is_some_and(|r| r < opts.tol);
    let contradiction_gap = certificate.dual_residual.map(|r| lambda1 - r);
    let max_evaluation_residual = per_sample.iter().map(|s| s.evaluation_residual).fold(0.0, f64::max);
    let o0 = per_sample[0].orientation.signum();
    let orientation_consistent = per_sample.iter().all(|s| (s.orientation - o0).abs() < 1e-9);
    Ok(ObstructionReport {
        obstructed,
        lambda1,
        samples: samples.len(),
        single_point,
        certificate,
        certificate_verified,
        contradiction_gap,
        max_evaluation_residual,
        orientation_consistent,
        per_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clifford() -> Factor {
        Factor::Product(vec![Factor::Sphere { dim: 1 }, Factor::Sphere { dim: 1 }])
    }

    #[test]
    fn equator_image_is_a_point() {
        let s = hypersurface_samples(&Factor::Equator { dim: 3 }, 20, 1, false).unwrap();
        let img = gauss_image(&s).unwrap();
        assert_eq!(img.distinct(1e-12).len(), 1);
        let c = hemisphere_test(&img, 1e-8).unwrap();
        assert_eq!(c.verdict, HemisphereVerdict::Feasible);
    }

    #[test]
    fn reversed_orientation_is_antipodal() {
        let a = gauss_image(&hypersurface_samples(&clifford(), 30, 4, false).unwrap()).unwrap();
        let b = gauss_image(&hypersurface_samples(&clifford(), 30, 4, true).unwrap()).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!((x + y).norm() < 1e-15);
        }
    }

    #[test]
    fn clifford_gauss_image_matches_formula() {
        // N = (λ₂x̂₁, −λ₁x̂₂) = (x̂₁, −x̂₂)/√2 at (x̂₁, x̂₂)/√2
        for s in hypersurface_samples(&clifford(), 10, 2, false).unwrap() {
            let want = DVector::from_vec(vec![s.x[0], s.x[1], -s.x[2], -s.x[3]]);
            assert!((s.normal - want).norm() < 1e-14);
        }
    }

    #[test]
    fn non_hypersurface_factor_is_rejected() {
        let p = minimal_product(vec![Factor::Sphere { dim: 3 }, Factor::Sphere { dim: 2 }]).unwrap();
        assert!(constant_calibration_obstruction(&p, &ObstructionOptions::default()).is_err());
    }

    #[test]
    fn obstruction_examples() {
        let opts = ObstructionOptions::default();
        let p = minimal_product(vec![clifford(), Factor::Sphere { dim: 3 }]).unwrap();
        let r = constant_calibration_obstruction(&p, &opts).unwrap();
        assert!(r.obstructed && r.certificate_verified && r.orientation_consistent, "{:?}", r.certificate);
        assert!(r.max_evaluation_residual < 1e-12);
        assert!((r.lambda1 - 0.4f64.sqrt()).abs() < 1e-15);

        let eq = minimal_product(vec![Factor::Equator { dim: 2 }, Factor::Sphere { dim: 1 }]).unwrap();
        let r = constant_calibration_obstruction(&eq, &opts).unwrap();
        assert!(!r.obstructed && r.single_point);

        let grouped = minimal_product(vec![clifford(), Factor::Sphere { dim: 2 }]).unwrap();
        assert!(constant_calibration_obstruction(&grouped, &opts).unwrap().obstructed);
    }

    #[test]
    fn determinant_form_evaluates_the_determinant() {
        let n = DVector::from_vec(vec![0.3, -0.2, 0.9, 0.1]);
        let f = determinant_form(&n).unwrap();
        let v = DMatrix::from_row_slice(4, 3, &[1.0, 0.2, 0.0, 0.5, 1.0, 0.3, -0.4, 0.0, 1.0, 0.1, 0.7, 0.2]);
        let mut cols: Vec<DVector<f64>> = v.column_iter().map(|c| c.into_owned()).collect();
        cols.push(n.clone());
        let det = DMatrix::from_columns(&cols).determinant();
        assert!((f.evaluate_columns(&v).unwrap() - det).abs() < 1e-14);
    }
}
