use nalgebra::DMatrix;

use super::decomposition::{decompose, lambda_matrix, Decomposition};
use super::{comass, ComassOptions};
use crate::error::{Error, Result};
use crate::exterior::{binomial, AlternatingForm, MetricTensor, SimpleVector};

/// Smallest `φ(ξ)` accepted before rescaling by `1/φ(ξ)`.
pub const MIN_THETA: f64 = 1e-6;
/// Cross pairings `λᵢ(vⱼ)` below this count as zero. A form of comass at
/// most `1 + ε` admits only `|λᵢ(vⱼ)| ≤ √(2ε + ε²)`.
pub const RIGIDITY_TOL: f64 = 1e-4;

fn block_metric(d: &Decomposition, g: &MetricTensor, c2: f64) -> Result<MetricTensor> {
    let (n, m) = (d.dim(), d.degree());
    let b = d.basis();
    let binv = b
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("decomposition basis is singular"))?;
    let gb = b.transpose() * g.matrix() * &b;
    let mut blk = DMatrix::zeros(n, n);
    blk.view_mut((0, 0), (m, m)).copy_from(&gb.view((0, 0), (m, m)));
    let ww = gb.view((m, m), (n - m, n - m)) * c2;
    blk.view_mut((m, m), (n - m, n - m)).copy_from(&ww);
    let gp = binv.transpose() * blk * &binv;
    MetricTensor::new((&gp + gp.transpose()) * 0.5)
}

/// The metric in which the decomposition basis `[V | W]` is orthonormal.
pub fn adapted_base_metric(phi: &AlternatingForm, xi: &SimpleVector) -> Result<MetricTensor> {
    let theta = phi.evaluate(xi)?;
    if !(theta >= MIN_THETA) {
        return Err(Error::precondition(format!("φ(ξ) = {theta:e} is below {MIN_THETA:e}")));
    }
    let d = decompose(&phi.scaled(1.0 / theta), xi)?;
    let binv = d
        .basis()
        .try_inverse()
        .ok_or_else(|| Error::invalid("decomposition basis is singular"))?;
    let g = binv.transpose() * &binv;
    MetricTensor::new((&g + g.transpose()) * 0.5)
}

fn check_adapted_inputs(phi: &AlternatingForm, xi: &SimpleVector, base_g: &MetricTensor) -> Result<f64> {
    let n = phi.dim();
    if base_g.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: base_g.dim() });
    }
    let norm = xi.gram_norm(base_g)?;
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::precondition(format!("‖ξ‖ = {norm} under the base metric, expected 1")));
    }
    let theta = phi.evaluate(xi)?;
    if !(theta >= MIN_THETA) {
        return Err(Error::precondition(format!("φ(ξ) = {theta:e} is below {MIN_THETA:e}")));
    }
    Ok(theta)
}

fn threshold_of(phi: &AlternatingForm, d: &Decomposition, base_g: &MetricTensor, theta: f64, opts: &ComassOptions) -> Result<f64> {
    let (n, m) = (phi.dim(), phi.degree());
    if m < 2 || n == m {
        return Ok(0.0);
    }
    let g_perp = block_metric(d, base_g, 1.0)?;
    let c = comass(phi, &g_perp, opts)?.value;
    Ok(binomial(n, m) as f64 * c / theta)
}

/// `binom(n,m)·comass(φ, g_⊥)/φ(ξ)`, the value `C²` must exceed in
/// [`adapted_metric`]; 0 when every `C² > 0` is accepted.
pub fn adapted_threshold(phi: &AlternatingForm, xi: &SimpleVector, base_g: &MetricTensor, opts: &ComassOptions) -> Result<f64> {
    let theta = check_adapted_inputs(phi, xi, base_g)?;
    let d = decompose(&phi.scaled(1.0 / theta), xi)?;
    threshold_of(phi, &d, base_g, theta, opts)
}

/// `g′ = g|_V ⊕ C²·g|_W` with `V = span ξ` and `W` from the decomposition of
/// `φ/φ(ξ)`. Rejects `C²` at or below [`adapted_threshold`], where `g_⊥` is
/// `base_g` with `V` and `W` made orthogonal (equal to `base_g` when they
/// already are).
pub fn adapted_metric(
    phi: &AlternatingForm,
    xi: &SimpleVector,
    base_g: &MetricTensor,
    c2: f64,
    opts: &ComassOptions,
) -> Result<MetricTensor> {
    let theta = check_adapted_inputs(phi, xi, base_g)?;
    if !(c2 > 0.0) || !c2.is_finite() {
        return Err(Error::precondition(format!("C² = {c2} must be positive")));
    }
    let d = decompose(&phi.scaled(1.0 / theta), xi)?;
    let threshold = threshold_of(phi, &d, base_g, theta, opts)?;
    if c2 <= threshold {
        return Err(Error::precondition(format!("C² = {c2} must exceed {threshold}")));
    }
    block_metric(&d, base_g, c2)
}

#[derive(Clone, Debug)]
pub struct RigidityReport {
    pub is_rigid_w: bool,
    /// Zero-based `(i, j)` with `i < m ≤ j` in the completed basis.
    pub violating_pair: Option<(usize, usize)>,
    pub max_cross_pairing: f64,
    /// For a violating pair with `a = λᵢ(vⱼ)`, the unit simple vector
    /// obtained by replacing `vᵢ` with `(vᵢ + a vⱼ)/√(1+a²)`, and `φ` on it.
    pub probe: Option<(SimpleVector, f64)>,
    /// The completion `v_{m+1}, …, v_n`.
    pub completion: DMatrix<f64>,
}

pub(crate) fn cross_pairings(phi: &AlternatingForm, xi: &SimpleVector, g: &MetricTensor) -> Result<RigidityReport> {
    let (n, m) = (phi.dim(), phi.degree());
    let v = xi.matrix().clone();
    let full = crate::linalg::complete_basis(&v, Some(g.matrix()));
    if full.ncols() != n {
        return Err(Error::invalid("could not complete ξ to a g-orthonormal basis"));
    }
    let completion = full.columns(m, n - m).into_owned();
    let lam = lambda_matrix(phi, &v)?;
    let cross = &lam * &completion;
    let mut violating = None;
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..n - m {
            let a = cross[(i, j)];
            worst = worst.max(a.abs());
            if violating.is_none() && a.abs() > RIGIDITY_TOL {
                violating = Some((i, m + j, a));
            }
        }
    }
    let probe = match violating {
        Some((i, j, a)) => {
            let mut f = v.clone();
            let col = (v.column(i) + full.column(j) * a) / (1.0 + a * a).sqrt();
            f.set_column(i, &col);
            let q = SimpleVector::from_matrix(f);
            let val = phi.evaluate(&q)?;
            Some((q, val))
        }
        None => None,
    };
    Ok(RigidityReport {
        is_rigid_w: violating.is_none(),
        violating_pair: violating.map(|(i, j, _)| (i, j)),
        max_cross_pairing: worst,
        probe,
        completion,
    })
}

/// For `φ` of comass ≤ 1 calibrating a `g`-orthonormal `ξ`, check that the
/// complementary subspace of the decomposition is the `g`-orthogonal
/// complement of `ξ`, i.e. `λᵢ(vⱼ) = 0` for `i ≤ m < j`.
pub fn calibration_decomposition_check(
    phi: &AlternatingForm,
    xi: &SimpleVector,
    g: &MetricTensor,
    opts: &ComassOptions,
) -> Result<RigidityReport> {
    let (n, m) = (phi.dim(), phi.degree());
    if g.dim() != n || xi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g.dim().max(xi.dim()) });
    }
    if xi.degree() != m {
        return Err(Error::DegreeMismatch { expected: m, found: xi.degree() });
    }
    let gram = xi.matrix().transpose() * g.matrix() * xi.matrix();
    if (gram - DMatrix::identity(m, m)).abs().max() > 1e-9 {
        return Err(Error::precondition("ξ factors are not g-orthonormal"));
    }
    let val = phi.evaluate(xi)?;
    if (val - 1.0).abs() > 1e-9 {
        return Err(Error::precondition(format!("φ(ξ) = {val}, expected 1")));
    }
    let c = comass(phi, g, opts)?.value;
    if c > 1.0 + 1e-9 {
        return Err(Error::precondition(format!("comass {c} exceeds 1")));
    }
    cross_pairings(phi, xi, g)
}
