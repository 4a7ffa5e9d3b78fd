//! Comass along the segment `g(s) = (1−s)g₁ + s g₂` of metrics.
//!
//! For a simple `Q` spanning `P`, diagonalize `g₂|_P` in a `g₁|_P`-orthonormal
//! basis: `g₂|_P = diag(λ₁,…,λ_m)` and `Q = t·e₁∧⋯∧e_m`. Then
//! `‖Q‖²_{g(s)} = t²·Π(1 − s + sλᵢ)`, and `(ΠXᵢ)⁻¹` is convex on the open
//! positive orthant, which gives `‖φ‖*_{g(s)} ≤ 1` whenever both endpoint
//! comasses are at most 1.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::comass::{comass, comass_warm, ComassOptions};
use crate::error::{Error, Result};
use crate::exterior::{AlternatingForm, MetricTensor, SimpleVector};

/// Endpoint comasses may exceed 1 by this much.
pub const HYPOTHESIS_TOL: f64 = 1e-8;

pub fn glued_metric(g1: &MetricTensor, g2: &MetricTensor, s: f64) -> Result<MetricTensor> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch { expected: g1.dim(), found: g2.dim() });
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("s = {s} outside [0, 1]")));
    }
    if s == 0.0 {
        return Ok(g1.clone());
    }
    if s == 1.0 {
        return Ok(g2.clone());
    }
    MetricTensor::new(g1.matrix() * (1.0 - s) + g2.matrix() * s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub t_factor: f64,
}

pub fn relative_spectrum(g1: &MetricTensor, g2: &MetricTensor, q: &SimpleVector) -> Result<RelativeSpectrum> {
    let n = g1.dim();
    if g2.dim() != n || q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g2.dim().max(q.dim()) });
    }
    let e = crate::linalg::orthonormalize(q.matrix(), Some(g1.matrix()))
        .ok_or_else(|| Error::invalid("Q has linearly dependent factors"))?;
    // Gram–Schmidt is triangular with positive diagonal, so Q = t·e₁∧⋯∧e_m
    // with t = ‖Q‖_{g₁}; a rotation of the eᵢ with det +1 keeps t
    let t = q.gram_norm(g1)?;
    let restricted = e.transpose() * g2.matrix() * &e;
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(RelativeSpectrum { eigenvalues: ev, t_factor: t })
}

/// `t²·Π(1 − s + sλᵢ)`.
pub fn t_of_s(spec: &RelativeSpectrum, s: f64) -> f64 {
    spec.t_factor * spec.t_factor * spec.eigenvalues.iter().map(|&l| 1.0 - s + s * l).product::<f64>()
}

/// Hessian of `F(X) = (ΠXᵢ)⁻¹`: `F·D⁻¹(11ᵀ + I)D⁻¹` with `D = diag(X)`.
pub fn inverse_product_hessian(x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let f = 1.0 / x.iter().product::<f64>();
    DMatrix::from_fn(m, m, |i, j| {
        let base = f / (x[i] * x[j]);
        if i == j {
            2.0 * base
        } else {
            base
        }
    })
}

/// `1/√(aᵐ/c₁² + bᵐ/c₂²)` for `a, b ≥ 0`, reading `1/0` as `+∞` and
/// `1/∞` as 0.
pub fn ccgp_bound_from(c1: f64, c2: f64, m: usize, a: f64, b: f64) -> f64 {
    let term = |w: f64, c: f64| if w == 0.0 { 0.0 } else { w.powi(m as i32) / (c * c) };
    let denom = term(a, c1) + term(b, c2);
    1.0 / denom.sqrt()
}

/// Upper bound for `‖φ‖*_{a g₁ + b g₂}` from the endpoint comasses.
pub fn ccgp_bound(
    phi: &AlternatingForm,
    g1: &MetricTensor,
    g2: &MetricTensor,
    a: f64,
    b: f64,
    opts: &ComassOptions,
) -> Result<f64> {
    if a < 0.0 || b < 0.0 || (a == 0.0 && b == 0.0) {
        return Err(Error::invalid(format!("weights a = {a}, b = {b} must be nonnegative and not both 0")));
    }
    let c1 = comass(phi, g1, opts)?.value;
    let c2 = comass(phi, g2, opts)?.value;
    Ok(ccgp_bound_from(c1, c2, phi.degree(), a, b))
}

/// `√((1−s)c₁² + s c₂²)`.
pub fn improved_bound_from(c1: f64, c2: f64, s: f64) -> f64 {
    ((1.0 - s) * c1 * c1 + s * c2 * c2).sqrt()
}

pub fn improved_bound(
    phi: &AlternatingForm,
    g1: &MetricTensor,
    g2: &MetricTensor,
    s: f64,
    opts: &ComassOptions,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("s = {s} outside [0, 1]")));
    }
    let c1 = comass(phi, g1, opts)?.value;
    let c2 = comass(phi, g2, opts)?.value;
    Ok(improved_bound_from(c1, c2, s))
}

/// Rescale `g` so that `φ` has comass 1 under it. Returns the metric and the
/// original comass.
pub fn normalize_metric(phi: &AlternatingForm, g: &MetricTensor, opts: &ComassOptions) -> Result<(MetricTensor, f64)> {
    let c = comass(phi, g, opts)?.value;
    let m = phi.degree() as f64;
    Ok((g.scaled(c.powf(2.0 / m))?, c))
}

#[derive(Clone, Debug)]
pub struct GluingOptions {
    pub comass: ComassOptions,
    /// Restarts at grid points after the first, on top of the warm start.
    pub warm_restarts: usize,
    pub tol: f64,
}

impl Default for GluingOptions {
    fn default() -> Self {
        GluingOptions { comass: ComassOptions::default(), warm_restarts: 8, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GluingReport {
    pub s_grid: Vec<f64>,
    pub comass_values: Vec<f64>,
    pub ccgp_bounds: Vec<f64>,
    pub improved_bounds: Vec<f64>,
    pub endpoint_comass: (f64, f64),
    /// `max(comass − 1)` over the grid.
    pub worst_violation: f64,
    /// `max(comass − improved bound)`.
    pub worst_improved_violation: f64,
    /// `max(comass − ccgp bound)` with `a = 1−s`, `b = s`.
    pub worst_ccgp_violation: f64,
    pub tol: f64,
}

impl GluingReport {
    pub fn passes(&self) -> bool {
        self.worst_violation <= self.tol
            && self.worst_improved_violation <= self.tol
            && self.worst_ccgp_violation <= self.tol
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,comass,ccgp_bound,improved_bound")?;
        for i in 0..self.s_grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.s_grid[i], self.comass_values[i], self.ccgp_bounds[i], self.improved_bounds[i]
            )?;
        }
        Ok(())
    }
}

pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

pub fn verify_gluing_bound(
    phi: &AlternatingForm,
    g1: &MetricTensor,
    g2: &MetricTensor,
    s_grid: &[f64],
    opts: &GluingOptions,
) -> Result<GluingReport> {
    if let Some(&bad) = s_grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::invalid(format!("grid point s = {bad} outside [0, 1]")));
    }
    let c1 = comass(phi, g1, &opts.comass)?.value;
    if c1 > 1.0 + HYPOTHESIS_TOL {
        return Err(Error::precondition(format!("comass under g₁ is {c1}, exceeds 1")));
    }
    let c2 = comass(phi, g2, &opts.comass)?.value;
    if c2 > 1.0 + HYPOTHESIS_TOL {
        return Err(Error::precondition(format!("comass under g₂ is {c2}, exceeds 1")));
    }
    let m = phi.degree();
    let mut warm = ComassOptions { restarts: opts.warm_restarts, ..opts.comass.clone() };
    let mut prev: Option<SimpleVector> = None;
    let mut report = GluingReport {
        s_grid: s_grid.to_vec(),
        comass_values: Vec::with_capacity(s_grid.len()),
        ccgp_bounds: Vec::with_capacity(s_grid.len()),
        improved_bounds: Vec::with_capacity(s_grid.len()),
        endpoint_comass: (c1, c2),
        worst_violation: f64::NEG_INFINITY,
        worst_improved_violation: f64::NEG_INFINITY,
        worst_ccgp_violation: f64::NEG_INFINITY,
        tol: opts.tol,
    };
    for (i, &s) in s_grid.iter().enumerate() {
        let g = glued_metric(g1, g2, s)?;
        let r = match &prev {
            None => comass(phi, &g, &opts.comass)?,
            Some(start) => {
                warm.seed = opts.comass.seed.wrapping_add(977 * i as u64);
                // rescale the previous maximizer to unit length under g(s)
                let start = start.normalized(&g)?;
                comass_warm(phi, &g, &warm, Some(&start))?
            }
        };
        let ccgp = ccgp_bound_from(c1, c2, m, 1.0 - s, s);
        let improved = improved_bound_from(c1, c2, s);
        report.worst_violation = report.worst_violation.max(r.value - 1.0);
        report.worst_improved_violation = report.worst_improved_violation.max(r.value - improved);
        report.worst_ccgp_violation = report.worst_ccgp_violation.max(r.value - ccgp);
        report.comass_values.push(r.value);
        report.ccgp_bounds.push(ccgp);
        report.improved_bounds.push(improved);
        prev = Some(r.maximizer);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualityStatus {
    /// `φ(Q) = 1`, unit at both ends, all relative eigenvalues 1.
    CalibratedAllS,
    /// Unit at both ends with some `λᵢ ≠ 1`, so `‖Q‖_{g(s)} < 1` inside.
    StrictlyInterior,
    NotCalibrated,
}

pub fn equality_analysis(
    phi: &AlternatingForm,
    g1: &MetricTensor,
    g2: &MetricTensor,
    q: &SimpleVector,
) -> Result<EqualityStatus> {
    const TOL: f64 = 1e-9;
    let n1 = q.gram_norm(g1)?;
    let n2 = q.gram_norm(g2)?;
    if (n1 - 1.0).abs() > TOL || (n2 - 1.0).abs() > TOL {
        return Ok(EqualityStatus::NotCalibrated);
    }
    let spec = relative_spectrum(g1, g2, q)?;
    if spec.eigenvalues.iter().any(|l| (l - 1.0).abs() > TOL) {
        return Ok(EqualityStatus::StrictlyInterior);
    }
    if (phi.evaluate(q)? - 1.0).abs() <= TOL {
        Ok(EqualityStatus::CalibratedAllS)
    } else {
        Ok(EqualityStatus::NotCalibrated)
    }
}
