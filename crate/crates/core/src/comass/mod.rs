//! Comass of constant-coefficient forms.
//!
//! The comass of an m-form `φ` under a metric `g` is the maximum of
//! `φ(ξ)` over simple m-vectors `ξ` of unit `g`-length. Every routine here
//! first whitens the problem: with `g = LLᵀ` and `W = L⁻ᵀ`, a frame `U`
//! is Euclidean-orthonormal iff `WU` is `g`-orthonormal, and
//! `φ(WU) = (W*φ)(U)`. The search therefore runs on the Euclidean
//! Grassmannian for the pulled-back form.

mod adapted;
mod decomposition;
pub(crate) mod kernel;

pub use adapted::{adapted_base_metric, adapted_metric, adapted_threshold, calibration_decomposition_check, RigidityReport};
pub use decomposition::{decompose, Decomposition};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{AlternatingForm, MetricTensor, SimpleVector};
use crate::rng::{gaussian_vector, seeded, unit_vector};
use kernel::{orthonormalize_cols, CompiledForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Optimizer,
    Bruteforce,
    Analytic,
}

#[derive(Clone, Debug)]
pub struct ComassOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ComassOptions {
    fn default() -> Self {
        ComassOptions { restarts: 32, max_iters: 2000, tol: 1e-10, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct ComassResult {
    pub value: f64,
    /// A `g`-unit simple m-vector on which `φ` attains `value`.
    pub maximizer: SimpleVector,
    pub method: Method,
    pub restarts_used: usize,
}

fn check_inputs(phi: &AlternatingForm, g: &MetricTensor) -> Result<()> {
    if g.dim() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), found: g.dim() });
    }
    if phi.degree() == 0 {
        return Err(Error::invalid("comass of a 0-form is its absolute value; degree ≥ 1 required"));
    }
    if phi.is_zero() {
        return Err(Error::ZeroForm);
    }
    Ok(())
}

/// `W*φ` with `W = L⁻ᵀ`, together with `W`.
fn whitened(phi: &AlternatingForm, g: &MetricTensor) -> Result<(AlternatingForm, nalgebra::DMatrix<f64>)> {
    let w = g.whitening();
    Ok((phi.pullback(&w)?, w))
}

struct Ascent {
    value: f64,
    frame: Vec<f64>,
}

/// Projected gradient ascent on orthonormal frames with step halving.
fn ascend(k: &CompiledForm, mut u: Vec<f64>, opts: &ComassOptions) -> Ascent {
    let (n, m) = (k.n, k.m);
    let mut scratch = Vec::new();
    let mut grad = vec![0.0; n * m];
    let mut trial = vec![0.0; n * m];
    orthonormalize_cols(&mut u, n, m);
    let mut f = k.value(&u, &mut scratch);
    if f < 0.0 {
        u[..n].iter_mut().for_each(|x| *x = -*x);
        f = -f;
    }
    let mut step = 1.0 / (1.0 + f.abs());
    let mut stall = 0;
    for _ in 0..opts.max_iters {
        k.value_grad(&u, &mut grad, &mut scratch);
        // horizontal part: Z = G − U(UᵀG)
        let mut utg = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                utg[a * m + b] = (0..n).map(|r| u[a * n + r] * grad[b * n + r]).sum();
            }
        }
        for b in 0..m {
            for r in 0..n {
                let proj: f64 = (0..m).map(|a| u[a * n + r] * utg[a * m + b]).sum();
                grad[b * n + r] -= proj;
            }
        }
        let gnorm2: f64 = grad.iter().map(|x| x * x).sum();
        if gnorm2.sqrt() <= opts.tol * (1.0 + f.abs()) {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            for e in 0..n * m {
                trial[e] = u[e] + step * grad[e];
            }
            orthonormalize_cols(&mut trial, n, m);
            let ft = k.value(&trial, &mut scratch);
            if ft >= f + 1e-4 * step * gnorm2 {
                let gain = ft - f;
                std::mem::swap(&mut u, &mut trial);
                f = ft;
                accepted = true;
                step *= 2.0;
                if gain <= opts.tol * (1.0 + f.abs()) {
                    stall += 1;
                } else {
                    stall = 0;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || stall >= 5 {
            break;
        }
    }
    Ascent { value: f, frame: u }
}

fn random_frame(seed: u64, n: usize, m: usize) -> Vec<f64> {
    let mut rng = seeded(seed);
    gaussian_vector(&mut rng, n * m).iter().copied().collect()
}

/// Comass by multi-restart projected ascent over ordered m-frames.
pub fn comass(phi: &AlternatingForm, g: &MetricTensor, opts: &ComassOptions) -> Result<ComassResult> {
    comass_warm(phi, g, opts, None)
}

/// As [`comass`], with an optional warm-start frame tried before the random
/// restarts.
pub fn comass_warm(
    phi: &AlternatingForm,
    g: &MetricTensor,
    opts: &ComassOptions,
    start: Option<&SimpleVector>,
) -> Result<ComassResult> {
    check_inputs(phi, g)?;
    let (n, m) = (phi.dim(), phi.degree());
    let (white, w) = whitened(phi, g)?;
    let k = CompiledForm::new(&white);
    let lt = g.cholesky_factor().transpose();

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts + 1);
    if let Some(s) = start {
        if s.dim() != n || s.degree() != m {
            return Err(Error::DegreeMismatch { expected: m, found: s.degree() });
        }
        let u = &lt * s.matrix();
        starts.push(u.as_slice().to_vec());
    }
    for r in 0..opts.restarts {
        starts.push(random_frame(opts.seed.wrapping_add(r as u64), n, m));
    }
    if starts.is_empty() {
        return Err(Error::invalid("comass needs at least one restart or a warm start"));
    }
    let runs: Vec<Ascent> = starts.into_par_iter().map(|u| ascend(&k, u, opts)).collect();
    // first run reaching the max wins
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.value > runs[best].value {
            best = i;
        }
    }
    let frame = nalgebra::DMatrix::from_column_slice(n, m, &runs[best].frame);
    let maximizer = SimpleVector::from_matrix(&w * frame);
    Ok(ComassResult {
        value: runs[best].value,
        maximizer,
        method: Method::Optimizer,
        restarts_used: runs.len(),
    })
}

/// Lower bound for the comass: max of `|φ(Q)|/‖Q‖_g` over `sample_count`
/// simple m-vectors whose factors are drawn uniformly from the unit sphere
/// of `g`.
pub fn comass_bruteforce(phi: &AlternatingForm, g: &MetricTensor, sample_count: usize, seed: u64) -> Result<f64> {
    check_inputs(phi, g)?;
    let (n, m) = (phi.dim(), phi.degree());
    let (white, _) = whitened(phi, g)?;
    let k = CompiledForm::new(&white);
    const CHUNK: usize = 4096;
    let chunks = sample_count.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeded(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut scratch = Vec::new();
            let mut u = vec![0.0; n * m];
            let mut best = 0.0f64;
            let count = CHUNK.min(sample_count - c * CHUNK);
            for _ in 0..count {
                for j in 0..m {
                    let v = unit_vector(&mut rng, n);
                    u[j * n..(j + 1) * n].copy_from_slice(v.as_slice());
                }
                let val = k.value(&u, &mut scratch);
                let vol = orthonormalize_cols(&mut u, n, m);
                if vol > 0.0 {
                    best = best.max(val.abs() / vol);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Closed-form comass where one exists: degree 1 (dual norm), degree 2
/// (top singular value of the whitened skew matrix) and top degree.
pub fn comass_analytic(phi: &AlternatingForm, g: &MetricTensor) -> Result<Option<f64>> {
    check_inputs(phi, g)?;
    let (n, m) = (phi.dim(), phi.degree());
    let (white, _) = whitened(phi, g)?;
    let value = if m == 1 {
        let t: Vec<f64> = (0..n)
            .map(|i| white.get(&crate::exterior::MultiIndex::from_sorted(vec![i])))
            .collect();
        Some(t.iter().map(|x| x * x).sum::<f64>().sqrt())
    } else if m == 2 {
        let a = white.skew_matrix()?;
        let sv = a.singular_values();
        Some(sv.iter().fold(0.0f64, |acc, &s| acc.max(s)))
    } else if m == n {
        Some(white.max_abs_coeff())
    } else {
        None
    };
    Ok(value)
}

/// `1 / min{‖Q‖_g : φ(Q) = 1}` by constrained descent on unnormalized frames.
pub fn comass_via_min(phi: &AlternatingForm, g: &MetricTensor, opts: &ComassOptions) -> Result<f64> {
    check_inputs(phi, g)?;
    let (n, m) = (phi.dim(), phi.degree());
    let (white, _) = whitened(phi, g)?;
    let k = CompiledForm::new(&white);
    let restarts = opts.restarts.max(1);
    let mins: Vec<f64> = (0..restarts)
        .into_par_iter()
        .map(|r| min_norm_descent(&k, opts.seed.wrapping_add(1_000_003 + r as u64), opts))
        .collect();
    let best = mins.into_iter().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NonConvergence(format!(
            "no frame in ℝ^{n} with φ(Q) = 1 found for a {m}-form"
        )));
    }
    Ok(1.0 / best)
}

/// Put the frame in the gauge `UᵀU = c·I` without changing `φ(U)` or the
/// Gram norm (right multiplication by a unimodular matrix).
fn gauge_fix(u: &mut [f64], n: usize, m: usize) -> f64 {
    let vol = orthonormalize_cols(u, n, m);
    let s = vol.powf(1.0 / m as f64);
    u.iter_mut().for_each(|x| *x *= s);
    vol
}

fn min_norm_descent(k: &CompiledForm, seed: u64, opts: &ComassOptions) -> f64 {
    let (n, m) = (k.n, k.m);
    let mut scratch = Vec::new();
    let mut u = random_frame(seed, n, m);
    let mut fval = k.value(&u, &mut scratch);
    let mut tries = 0;
    while fval.abs() < 1e-8 {
        tries += 1;
        if tries > 100 {
            return f64::INFINITY;
        }
        u = random_frame(seed.wrapping_add(7919 * tries), n, m);
        fval = k.value(&u, &mut scratch);
    }
    // land on the constraint surface by rescaling the first factor
    u[..n].iter_mut().for_each(|x| *x /= fval);
    let mut vol = gauge_fix(&mut u, n, m);

    let mut grad_phi = vec![0.0; n * m];
    let mut dir = vec![0.0; n * m];
    let mut trial = vec![0.0; n * m];
    let mut step = 0.5;
    let mut stall = 0;
    for _ in 0..opts.max_iters {
        k.value_grad(&u, &mut grad_phi, &mut scratch);
        // in the gauge UᵀU = c·I, ∇ ½log det(UᵀU) = U (UᵀU)⁻¹ = U / c
        let c = vol.powf(2.0 / m as f64);
        let gf: Vec<f64> = u.iter().map(|x| x / c).collect();
        let gp2: f64 = grad_phi.iter().map(|x| x * x).sum();
        let cross: f64 = gf.iter().zip(&grad_phi).map(|(a, b)| a * b).sum();
        for e in 0..n * m {
            dir[e] = gf[e] - cross / gp2 * grad_phi[e];
        }
        let dnorm2: f64 = dir.iter().map(|x| x * x).sum();
        if dnorm2 * c <= opts.tol * opts.tol {
            break;
        }
        let obj = vol.ln();
        let mut accepted = false;
        // steps are taken in units of the frame scale c
        for _ in 0..60 {
            for e in 0..n * m {
                trial[e] = u[e] - step * c * dir[e];
            }
            let ft = k.value(&trial, &mut scratch);
            if ft > 1e-12 {
                trial[..n].iter_mut().for_each(|x| *x /= ft);
                let mut t = trial.clone();
                let vt = gauge_fix(&mut t, n, m);
                if vt > 0.0 && vt.ln() <= obj - 1e-4 * step * c * dnorm2 {
                    let gain = obj - vt.ln();
                    u = t;
                    vol = vt;
                    accepted = true;
                    step = (step * 2.0).min(1.0);
                    if gain <= opts.tol * 1e-2 {
                        stall += 1;
                    } else {
                        stall = 0;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if stall >= 5 {
            break;
        }
        if !accepted {
            break;
        }
    }
    vol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{AlternatingForm, MetricTensor};

    fn kahler4() -> AlternatingForm {
        &AlternatingForm::basis(4, &[0, 1]).unwrap() + &AlternatingForm::basis(4, &[2, 3]).unwrap()
    }

    #[test]
    fn basic_comass_values() {
        let e4 = MetricTensor::euclidean(4);
        let o = ComassOptions::default();
        let f12 = AlternatingForm::basis(4, &[0, 1]).unwrap();
        assert!((comass(&f12, &e4, &o).unwrap().value - 1.0).abs() < 1e-9);
        assert!((comass(&f12.scaled(2.0), &e4, &o).unwrap().value - 2.0).abs() < 1e-9);
        let r = comass(&kahler4(), &e4, &o).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
        assert!((r.maximizer.gram_norm(&e4).unwrap() - 1.0).abs() < 1e-9);
        assert!(kahler4().evaluate(&r.maximizer).unwrap() >= r.value - 1e-9);
        assert_eq!(r.method, Method::Optimizer);
    }

    #[test]
    fn zero_form_is_rejected() {
        let z = AlternatingForm::zero(3, 2);
        assert!(matches!(comass(&z, &MetricTensor::euclidean(3), &ComassOptions::default()), Err(Error::ZeroForm)));
    }

    #[test]
    fn bruteforce_examples() {
        let f12 = AlternatingForm::basis(3, &[0, 1]).unwrap();
        assert!(comass_bruteforce(&f12, &MetricTensor::euclidean(3), 100_000, 1).unwrap() >= 0.99);
        let f1 = AlternatingForm::basis(2, &[0]).unwrap();
        assert!(comass_bruteforce(&f1, &MetricTensor::euclidean(2), 1000, 2).unwrap() >= 0.999);
        let top = AlternatingForm::basis(2, &[0, 1]).unwrap();
        let v = comass_bruteforce(&top, &MetricTensor::euclidean(2), 50, 3).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn via_min_examples() {
        let o = ComassOptions::default();
        let f1 = AlternatingForm::basis(2, &[0]).unwrap();
        assert!((comass_via_min(&f1, &MetricTensor::euclidean(2), &o).unwrap() - 1.0).abs() < 1e-6);
        let g = MetricTensor::diagonal(&[0.25, 1.0]).unwrap();
        assert!((comass_via_min(&f1, &g, &o).unwrap() - 2.0).abs() < 1e-6);
        let v = comass_via_min(&kahler4(), &MetricTensor::euclidean(4), &o).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn analytic_oracle_examples() {
        let e4 = MetricTensor::euclidean(4);
        assert!((comass_analytic(&kahler4(), &e4).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let f1 = AlternatingForm::covector(&[3.0, 4.0]);
        assert!((comass_analytic(&f1, &MetricTensor::euclidean(2)).unwrap().unwrap() - 5.0).abs() < 1e-12);
        let g = MetricTensor::diagonal(&[0.25, 1.0]).unwrap();
        let f = AlternatingForm::basis(2, &[0]).unwrap();
        assert!((comass_analytic(&f, &g).unwrap().unwrap() - 2.0).abs() < 1e-12);
    }
}
