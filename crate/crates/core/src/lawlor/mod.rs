//! Lawlor's curvature criterion as a computation on the scalar profile `h(t)`.
//!
//! A profile `h` with `h(0) = 1` is admissible when
//! `(h − t h′/K)² + (h′/K)² ≤ p(t)²`. Solved for the slope this is
//! `lo ≤ h′ ≤ hi` with `K/(1+t²)·(t h ∓ √((1+t²)p² − h²))`. The fastest
//! descending profile follows `lo`; the angle `arctan t₀` at which it reaches
//! zero is the vanishing angle, and the cone is certified when that angle is at
//! most half the normal radius of the link.
//!
//! `K` is `k + 1` under [`Normalization::Eq42`] and `k` under
//! [`Normalization::PaperK`].

pub mod ode;
mod smooth;
mod verify;

pub use smooth::{build_smooth_profile, SmoothOptions, SmoothProfile};
pub use verify::{fd_weights, verify_profile, ProfileCheck, VERIFY_TOL};

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use ode::{dp45, Dp45Options, Stop};

/// Verdict margins smaller than this are reported as boundary cases.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Slope prefactor `k + 1`, obtained by solving the calibration inequality.
    #[default]
    Eq42,
    /// Slope prefactor `k`.
    PaperK,
}

impl Normalization {
    pub fn prefactor(self, k: usize) -> f64 {
        match self {
            Normalization::Eq42 => (k + 1) as f64,
            Normalization::PaperK => k as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Normalization::Eq42 => "eq42",
            Normalization::PaperK => "paper-k",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Control {
    #[serde(rename = "F")]
    F,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "custom")]
    Custom,
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Control::F => "F",
            Control::C => "c",
            Control::Custom => "custom",
        })
    }
}

/// `F(α, t, k+1) = (1 − αt√(k/(k+1)))·(1 + αt/√(k(k+1)))^k`.
pub fn f_control(alpha: f64, t: f64, k: usize) -> f64 {
    let kf = k as f64;
    let a = 1.0 - alpha * t * (kf / (kf + 1.0)).sqrt();
    let b = 1.0 + alpha * t / (kf * (kf + 1.0)).sqrt();
    a * b.powi(k as i32)
}

/// `(1 − αt)e^{αt}`.
pub fn c_control(alpha: f64, t: f64) -> f64 {
    (1.0 - alpha * t) * (alpha * t).exp()
}

pub type PFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Link dimension, curvature bound and the curvature function `p`.
#[derive(Clone)]
pub struct CurvatureModel {
    pub k: usize,
    pub alpha: f64,
    /// Second Taylor coefficient of `p` at 0.
    pub p2: f64,
    pub source: Control,
    p: PFn,
}

impl fmt::Debug for CurvatureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurvatureModel")
            .field("k", &self.k)
            .field("alpha", &self.alpha)
            .field("p2", &self.p2)
            .field("source", &self.source)
            .finish()
    }
}

impl CurvatureModel {
    pub fn custom(k: usize, alpha: f64, p: PFn, p2: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("link dimension k must be ≥ 1"));
        }
        if !(alpha >= 0.0) {
            return Err(Error::invalid(format!("α = {alpha} must be ≥ 0")));
        }
        let p0 = p(0.0);
        if (p0 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("p(0) = {p0}, expected 1")));
        }
        if p2 > 1e-12 {
            return Err(Error::invalid(format!("p₂ = {p2} must be ≤ 0")));
        }
        Ok(CurvatureModel { k, alpha, p2: p2.min(0.0), source: Control::Custom, p })
    }

    /// `p` replaced by one of the two closed-form lower controls; both have
    /// `p₂ = −α²/2`.
    pub fn with_control(k: usize, alpha: f64, control: Control) -> Result<Self> {
        let p: PFn = match control {
            Control::F => Arc::new(move |t| f_control(alpha, t, k)),
            Control::C => Arc::new(move |t| c_control(alpha, t)),
            Control::Custom => return Err(Error::invalid("custom control needs an explicit p")),
        };
        let mut m = Self::custom(k, alpha, p, -alpha * alpha / 2.0)?;
        m.source = control;
        Ok(m)
    }

    /// `p ≡ 1`.
    pub fn flat(k: usize) -> Self {
        Self::custom(k, 0.0, Arc::new(|_| 1.0), 0.0).expect("flat model is valid")
    }

    pub fn p(&self, t: f64) -> f64 {
        (self.p)(t)
    }

    pub fn p_fn(&self) -> PFn {
        self.p.clone()
    }

    /// `(1+t²)p(t)² − y²`.
    /// `(1 + t²)p² − y²`, with `p` clamped at 0: past a zero of `p` the band
    /// is empty.
    pub fn discriminant(&self, t: f64, y: f64) -> f64 {
        let p = self.p(t).max(0.0);
        (1.0 + t * t) * p * p - y * y
    }
}

/// Discriminants down to this are read as 0.
const DISC_SLACK: f64 = 1e-14;

fn interval_unchecked(t: f64, y: f64, kk: f64, d: f64) -> (f64, f64) {
    let r = d.max(0.0).sqrt();
    let c = kk / (1.0 + t * t);
    (c * (t * y - r), c * (t * y + r))
}

/// The admissible slopes `[lo, hi]` at height `y ≥ 0`.
pub fn slope_interval(t: f64, y: f64, model: &CurvatureModel, norm: Normalization) -> Result<(f64, f64)> {
    let d = model.discriminant(t, y);
    if y < 0.0 || d < -DISC_SLACK {
        return Err(Error::invalid(format!(
            "(t, y) = ({t}, {y}) outside the admissible band 0 ≤ y ≤ √(1+t²)p(t)"
        )));
    }
    Ok(interval_unchecked(t, y, norm.prefactor(model.k), d))
}

/// `(a_min, a_max) = (K/4)(K − 2 ∓ √((K−2)² + 8p₂))`, the second-order
/// coefficients of the two profiles `1 − a t² + ⋯` that follow the lower
/// slope near `t = 0`. `prefactor` is the slope prefactor `K`.
pub fn second_order_coeffs(prefactor: f64, p2: f64) -> Result<(f64, f64)> {
    let disc = (prefactor - 2.0).powi(2) + 8.0 * p2;
    if disc < 0.0 {
        return Err(Error::precondition(format!(
            "no real second-order branch: (K−2)² + 8p₂ = {disc} < 0"
        )));
    }
    let r = disc.sqrt();
    Ok((prefactor / 4.0 * (prefactor - 2.0 - r), prefactor / 4.0 * (prefactor - 2.0 + r)))
}

#[derive(Clone, Debug)]
pub struct IntegrationOptions {
    pub ode: Dp45Options,
    pub t_boot: f64,
    pub t_cap: f64,
    pub grid_dt: f64,
    pub normalization: Normalization,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            ode: Dp45Options { atol: 1e-13, ..Dp45Options::default() },
            t_boot: 1e-3,
            t_cap: 50.0,
            grid_dt: 5e-4,
            normalization: Normalization::Eq42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Vanished,
    /// The profile reached the upper edge of the admissible band at `t`.
    BandExit { t: f64 },
    /// `(K−2)² + 8p₂ < 0`.
    NoRealBranch,
    /// Still positive at the cap.
    Cap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Profile {
    pub t_samples: Vec<f64>,
    pub h_values: Vec<f64>,
    pub vanishing_t: Option<f64>,
    pub theta: Option<f64>,
    pub outcome: Outcome,
    pub normalization: Normalization,
    /// Smallest `(1+t²)p² − h²` over the samples.
    pub min_discriminant: f64,
}

impl Profile {
    fn degenerate(norm: Normalization, outcome: Outcome) -> Self {
        Profile {
            t_samples: vec![0.0],
            h_values: vec![1.0],
            vanishing_t: None,
            theta: None,
            outcome,
            normalization: norm,
            min_discriminant: 0.0,
        }
    }
}

pub(crate) fn lower_rhs(model: &CurvatureModel, kk: f64) -> impl Fn(f64, f64) -> Option<f64> + '_ {
    move |t, y| {
        let d = model.discriminant(t, y);
        if d < -DISC_SLACK {
            return None;
        }
        Some(interval_unchecked(t, y, kk, d).0)
    }
}

/// The profile that starts as `1 − a t²` on `[0, t_boot]` and then follows
/// the lower slope.
pub fn integrate_branch(model: &CurvatureModel, a: f64, opts: &IntegrationOptions) -> Result<Profile> {
    let kk = opts.normalization.prefactor(model.k);
    let tb = opts.t_boot;
    let y0 = 1.0 - a * tb * tb;
    if !(y0 > 0.0) {
        return Err(Error::invalid("bootstrap interval too long for this curvature"));
    }
    let rhs = lower_rhs(model, kk);
    // one pass: a second integration would land a few ulps-times-growth away
    // from zero at the vanishing point, since this branch amplifies errors
    let n_max = (opts.t_cap / opts.grid_dt).ceil() as usize;
    let nodes: Vec<f64> = (0..=n_max).map(|i| i as f64 * opts.grid_dt).collect();
    let inner: Vec<f64> = nodes.iter().copied().filter(|&t| t > tb).collect();
    let sol = dp45(&rhs, |_, y| y, tb, y0, opts.t_cap, &inner, &opts.ode);
    let mut ts = Vec::new();
    let mut hs = Vec::new();
    for &t in nodes.iter().filter(|&&t| t <= tb) {
        ts.push(t);
        hs.push(1.0 - a * t * t);
    }
    for &(t, y) in &sol.outputs {
        ts.push(t);
        hs.push(y);
    }
    let (end, outcome) = match sol.stop {
        Stop::Event { t, .. } => (Some((t, 0.0)), Outcome::Vanished),
        Stop::DomainExit { t, y } => (Some((t, y)), Outcome::BandExit { t }),
        Stop::End | Stop::MaxSteps { .. } => (None, Outcome::Cap),
    };
    if let Some((te, ye)) = end {
        // a node almost on top of the endpoint ruins the stencil there
        while ts.last().is_some_and(|&t| te - t < 0.05 * opts.grid_dt) {
            ts.pop();
            hs.pop();
        }
        ts.push(te);
        hs.push(ye);
    }
    let t_stop = end.map(|e| e.0);
    let min_disc = ts
        .iter()
        .zip(&hs)
        .map(|(&t, &h)| model.discriminant(t, h))
        .fold(f64::INFINITY, f64::min);
    let vanishing_t = if outcome == Outcome::Vanished { t_stop } else { None };
    Ok(Profile {
        t_samples: ts,
        h_values: hs,
        vanishing_t,
        theta: vanishing_t.map(f64::atan),
        outcome,
        normalization: opts.normalization,
        min_discriminant: min_disc,
    })
}

/// Fastest-descent profile from `h(0) = 1` along the `a_max` branch.
pub fn integrate_fastest(model: &CurvatureModel, opts: &IntegrationOptions) -> Result<Profile> {
    let kk = opts.normalization.prefactor(model.k);
    match second_order_coeffs(kk, model.p2) {
        Ok((_, a_max)) => integrate_branch(model, a_max, opts),
        Err(_) => Ok(Profile::degenerate(opts.normalization, Outcome::NoRealBranch)),
    }
}

/// The same vanishing parameter computed with a fixed-step RK4 integrator
/// (independent of the adaptive one), for cross-checks.
pub fn vanishing_t_rk4(model: &CurvatureModel, norm: Normalization, t_boot: f64, dt: f64, t_cap: f64) -> Option<f64> {
    let kk = norm.prefactor(model.k);
    let (_, a) = second_order_coeffs(kk, model.p2).ok()?;
    let rhs = lower_rhs(model, kk);
    match ode::rk4_fixed(rhs, |_, y| y, t_boot, 1.0 - a * t_boot * t_boot, t_cap, dt) {
        Stop::Event { t, .. } => Some(t),
        _ => None,
    }
}

/// `arctan t₀` for the fastest profile under the chosen control, or `None`
/// when it does not vanish.
pub fn vanishing_angle(
    control: Control,
    alpha: f64,
    k: usize,
    p: Option<(PFn, f64)>,
    opts: &IntegrationOptions,
) -> Result<Option<f64>> {
    let model = match control {
        Control::Custom => {
            let (p, p2) = p.ok_or_else(|| Error::invalid("custom control needs p and p₂"))?;
            CurvatureModel::custom(k, alpha, p, p2)?
        }
        c => CurvatureModel::with_control(k, alpha, c)?,
    };
    Ok(integrate_fastest(&model, opts)?.theta)
}

/// Inputs to the criterion for one link.
#[derive(Clone, Debug)]
pub struct LinkData {
    pub k: usize,
    pub ambient_dim: usize,
    pub alpha: f64,
    /// Needed for [`Control::Custom`].
    pub curvature: Option<CurvatureModel>,
    pub normal_radius: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub theta_used: Option<f64>,
    pub control: Control,
    pub r_half: f64,
    /// `θ ≤ R/2`. A failing verdict means inconclusive, never "not minimizing".
    pub passes: bool,
    pub margin: Option<f64>,
    /// `|R/2 − θ| < BOUNDARY_TOL`.
    pub boundary: bool,
    pub outcome: Outcome,
    pub normalization: Normalization,
}

impl CriterionVerdict {
    pub fn status(&self) -> &'static str {
        match (self.passes, self.boundary) {
            (_, true) => "boundary-inconclusive",
            (true, false) => "passes",
            (false, false) => "inconclusive",
        }
    }
}

pub fn check_area_minimizing(link: &LinkData, control: Control, opts: &IntegrationOptions) -> Result<CriterionVerdict> {
    let r = link
        .normal_radius
        .ok_or_else(|| Error::precondition("normal radius R(L) is required"))?;
    let model = match control {
        Control::Custom => link
            .curvature
            .clone()
            .ok_or_else(|| Error::precondition("custom control needs the link's curvature model"))?,
        c => CurvatureModel::with_control(link.k, link.alpha, c)?,
    };
    let profile = integrate_fastest(&model, opts)?;
    let r_half = r / 2.0;
    let margin = profile.theta.map(|th| r_half - th);
    Ok(CriterionVerdict {
        theta_used: profile.theta,
        control,
        r_half,
        passes: margin.is_some_and(|m| m >= 0.0),
        margin,
        boundary: margin.is_some_and(|m| m.abs() < BOUNDARY_TOL),
        outcome: profile.outcome,
        normalization: opts.normalization,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRow {
    pub k: usize,
    pub alpha: f64,
    pub control: Control,
    pub theta: Option<f64>,
    /// A vanishing angle was found and halving the tolerance moved it by
    /// less than `1e-8`.
    pub converged: bool,
}

pub fn vanishing_table(ks: &[usize], alphas: &[f64], opts: &IntegrationOptions) -> Result<Vec<TableRow>> {
    let mut jobs = Vec::new();
    for &k in ks {
        for &alpha in alphas {
            for control in [Control::F, Control::C] {
                jobs.push((k, alpha, control));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(k, alpha, control)| {
            let theta = vanishing_angle(control, alpha, k, None, opts)?;
            let mut fine = opts.clone();
            fine.ode.atol /= 2.0;
            let theta_fine = vanishing_angle(control, alpha, k, None, &fine)?;
            let converged = matches!((theta, theta_fine), (Some(a), Some(b)) if (a - b).abs() < 1e-8);
            Ok(TableRow { k, alpha, control, theta, converged })
        })
        .collect()
}

pub fn write_table_csv<W: Write>(rows: &[TableRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,alpha,control,theta,converged")?;
    for r in rows {
        let theta = r.theta.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.k, r.alpha, r.control, theta, r.converged)?;
    }
    Ok(())
}
