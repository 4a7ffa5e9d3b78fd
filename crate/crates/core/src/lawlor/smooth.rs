//! A smooth admissible profile that starts as `1 − a t²` and meets the
//! t-axis tangentially.
//!
//! Every ODE phase uses slopes `h′ = lo + w·(hi − lo)` with `w ∈ [0, 1]`, so
//! admissibility holds by construction wherever the phase is defined:
//!
//! 1. `1 − a t²` on `[0, tan δ]` (checked directly);
//! 2. `w` moves from the cap's own value to 0 through a flat C^∞ step;
//! 3. `w = 0` (fastest descent) down to height `σ`;
//! 4. `w` rises to `w_C ∈ (0, ½)` through the same step, giving slack;
//! 5. at height `σ/4` a quintic Hermite segment takes value, slope and
//!    curvature to `(0, 0, 0)` at `t₂`, checked on a fine grid;
//! 6. `h ≡ 0` afterwards.
//!
//! `σ` is halved until `θ₂ − θ̂ ≤ theta2_gap`, with `θ̂` the hit of the plain
//! fastest-descent continuation of phase 2.

use serde::{Deserialize, Serialize};

use super::ode::{dp45, Stop};
use super::verify::{verify_profile, ProfileCheck};
use super::{interval_unchecked, second_order_coeffs, CurvatureModel, IntegrationOptions, Outcome, Profile};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SmoothOptions {
    pub integration: IntegrationOptions,
    pub w_c: f64,
    pub max_refinements: usize,
    pub join_samples: usize,
}

impl Default for SmoothOptions {
    fn default() -> Self {
        SmoothOptions { integration: IntegrationOptions::default(), w_c: 0.25, max_refinements: 40, join_samples: 200 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothProfile {
    pub profile: Profile,
    pub a: f64,
    pub cap_end: f64,
    pub blend_end: f64,
    /// Vanishing angle of the plain fastest-descent continuation.
    pub theta_hat: f64,
    pub theta2: f64,
    pub join_start: f64,
    pub join_window: f64,
    /// `h′(t₂)`, zero by construction.
    pub end_slope: f64,
    pub check: ProfileCheck,
}

/// `f(τ)/(f(τ) + f(1−τ))` with `f(x) = e^{−1/x}`: 0 below 0, 1 above 1, all
/// derivatives vanishing at both ends.
pub(crate) fn smooth_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    let (a, b) = (f(tau), f(1.0 - tau));
    a / (a + b)
}

struct Slopes<'a> {
    model: &'a CurvatureModel,
    kk: f64,
}

impl Slopes<'_> {
    fn interval(&self, t: f64, y: f64) -> Option<(f64, f64)> {
        let d = self.model.discriminant(t, y);
        if d < -1e-14 {
            return None;
        }
        Some(interval_unchecked(t, y, self.kk, d))
    }

    fn with_w(&self, t: f64, y: f64, w: f64) -> Option<f64> {
        let (lo, hi) = self.interval(t, y)?;
        Some(lo + w * (hi - lo))
    }
}

/// Quintic Hermite from `(h0, s0, c0)` at `τ = 0` to `(0, 0, 0)` at `τ = 1`
/// on a window of length `l`; returns value and derivative in `t`.
fn hermite(h0: f64, s0: f64, c0: f64, l: f64, tau: f64) -> (f64, f64) {
    let (t2, t3, t4, t5) = (tau * tau, tau.powi(3), tau.powi(4), tau.powi(5));
    let b0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let b1 = tau - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let b2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d2 = 0.5 * (2.0 * tau - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let value = h0 * b0 + s0 * l * b1 + c0 * l * l * b2;
    let slope = (h0 * d0 + s0 * l * d1 + c0 * l * l * d2) / l;
    (value, slope)
}

fn hermite_admissible(sl: &Slopes, t0: f64, h0: f64, s0: f64, c0: f64, l: f64) -> bool {
    let n = 4000;
    (1..n).all(|i| {
        let tau = i as f64 / n as f64;
        let (y, s) = hermite(h0, s0, c0, l, tau);
        if y < 0.0 {
            return false;
        }
        match sl.interval(t0 + tau * l, y) {
            Some((lo, hi)) => lo < s && s < hi,
            None => false,
        }
    })
}

pub fn build_smooth_profile(
    model: &CurvatureModel,
    a: f64,
    delta: f64,
    theta2_gap: f64,
    opts: &SmoothOptions,
) -> Result<SmoothProfile> {
    let io = &opts.integration;
    let kk = io.normalization.prefactor(model.k);
    let (a_min, a_max) = second_order_coeffs(kk, model.p2)?;
    if !(a_min < a && a < a_max) {
        return Err(Error::precondition(format!("a = {a} must lie strictly inside ({a_min}, {a_max})")));
    }
    if !(delta > 0.0 && delta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::invalid(format!("δ = {delta} outside (0, π/2)")));
    }
    if !(theta2_gap > 0.0) {
        return Err(Error::invalid("theta2_gap must be positive"));
    }
    if !(opts.w_c > 0.0 && opts.w_c < 0.5) {
        return Err(Error::invalid("w_C must lie in (0, 1/2)"));
    }
    let sl = Slopes { model, kk };
    let td = delta.tan();

    // the cap must satisfy the inequality on (0, tan δ]
    let cap = |t: f64| 1.0 - a * t * t;
    let cap_slope = |t: f64| -2.0 * a * t;
    for i in 1..=2000 {
        let t = td * i as f64 / 2000.0;
        let (y, s) = (cap(t), cap_slope(t));
        let r = (y - t * s / kk).powi(2) + (s / kk).powi(2) - model.p(t).powi(2);
        if !(y > 0.0) || model.discriminant(t, y) < 0.0 || r > 1e-15 {
            return Err(Error::precondition(format!(
                "δ = {delta} too large: 1 − a t² violates the inequality at t = {t}"
            )));
        }
    }
    let w_cap = |t: f64| {
        let (lo, hi) = sl.interval(t, cap(t)).unwrap_or((0.0, 0.0));
        if hi > lo {
            ((cap_slope(t) - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };

    let dt = io.grid_dt;
    let n_nodes = (io.t_cap / dt).ceil() as usize;
    let nodes: Vec<f64> = (0..=n_nodes).map(|i| i as f64 * dt).collect();
    let mut ts: Vec<f64> = Vec::new();
    let mut hs: Vec<f64> = Vec::new();
    for &t in nodes.iter().take_while(|&&t| t <= td) {
        ts.push(t);
        hs.push(cap(t));
    }

    // phase 2: cap's w → 0
    let eps1 = 0.5 * td;
    let blend_end = td + eps1;
    let rhs_a = |t: f64, y: f64| {
        let w = (1.0 - smooth_step((t - td) / eps1)) * w_cap(t);
        sl.with_w(t, y, w)
    };
    let outs: Vec<f64> = nodes.iter().copied().filter(|&t| t > td && t <= blend_end).collect();
    let sol = dp45(rhs_a, |_, y| y, td, cap(td), blend_end, &outs, &io.ode);
    if sol.stop != Stop::End {
        return Err(Error::NonConvergence(format!("blend off the cap stopped early: {:?}", sol.stop)));
    }
    let h_blend = sol.outputs.last().map(|o| o.1);
    let mut phase_a = sol.outputs;
    // the blend end is generally not a node; integrate to it exactly
    let end_a = dp45(rhs_a, |_, _| 1.0, td, cap(td), blend_end, &[blend_end], &io.ode);
    let h_a = end_a.outputs.last().map(|o| o.1).or(h_blend).unwrap_or(cap(td));
    ts.extend(phase_a.iter().map(|o| o.0));
    hs.extend(phase_a.iter().map(|o| o.1));
    phase_a.clear();

    let rhs_b = |t: f64, y: f64| sl.with_w(t, y, 0.0);
    let hit = dp45(rhs_b, |_, y| y, blend_end, h_a, io.t_cap, &[], &io.ode);
    let t_hat = match hit.stop {
        Stop::Event { t, .. } => t,
        s => {
            return Err(Error::precondition(format!(
                "fastest-descent continuation does not reach the axis ({s:?})"
            )))
        }
    };
    let theta_hat = t_hat.atan();

    let mut sigma = (0.5 * h_a).min(0.2);
    for _ in 0..opts.max_refinements {
        sigma *= 0.5;
        let outs: Vec<f64> = nodes.iter().copied().filter(|&t| t > blend_end).collect();
        let b = dp45(rhs_b, |_, y| y - sigma, blend_end, h_a, io.t_cap, &outs, &io.ode);
        let Stop::Event { t: t_s, .. } = b.stop else { continue };
        let (lo_s, _) = sl.interval(t_s, sigma).ok_or_else(|| Error::NonConvergence("left the band".into()))?;
        let eps2 = 0.5 * sigma / lo_s.abs().max(1e-12);
        let w_c = opts.w_c;
        let sl = &sl;
        let rhs_c = move |t: f64, y: f64| sl.with_w(t, y, smooth_step((t - t_s) / eps2) * w_c);
        let h_b = 0.25 * sigma;
        // the ramp and the join live on scales far below dt; sample them finely
        let fine = dt.min(eps2) / 50.0;
        let reach = t_s + eps2 + 4.0 * sigma / lo_s.abs().max(1e-12);
        let ramp = (1..400).map(|j| t_s + eps2 * j as f64 / 400.0);
        let c_outs: Vec<f64> = ramp
            .chain((0..).map(|j| t_s + eps2 + j as f64 * fine).take_while(|&t| t < reach))
            .chain(nodes.iter().copied().filter(|&t| t >= reach))
            .collect();
        let c = dp45(rhs_c, |_, y| y - h_b, t_s, sigma, io.t_cap, &c_outs, &io.ode);
        let Stop::Event { t: t_b, .. } = c.stop else { continue };
        if t_b < t_s + eps2 {
            continue;
        }
        let s_b = rhs_c(t_b, h_b).ok_or_else(|| Error::NonConvergence("left the band".into()))?;
        let fd = 1e-6 * (1.0 + t_b);
        let c_b = match (rhs_c(t_b + fd, h_b + fd * s_b), rhs_c(t_b - fd, h_b - fd * s_b)) {
            (Some(up), Some(dn)) => (up - dn) / (2.0 * fd),
            _ => continue,
        };
        if s_b >= 0.0 {
            continue;
        }
        let base = h_b / s_b.abs();
        let window = [2.0, 1.75, 2.5, 1.5, 3.0, 1.25]
            .iter()
            .map(|f| f * base)
            .find(|&l| hermite_admissible(sl, t_b, h_b, s_b, c_b, l));
        let Some(window) = window else { continue };
        let t2 = t_b + window;
        let theta2 = t2.atan();
        if theta2 - theta_hat > theta2_gap {
            continue;
        }

        // refill the approach to t_s on the fine grid, restarting from the
        // last coarse output well before it
        let lead = t_s - 20.0 * fine;
        let b_coarse: Vec<(f64, f64)> = b.outputs.iter().copied().filter(|o| o.0 <= lead).collect();
        let (t_c, y_c) = b_coarse.last().copied().unwrap_or((blend_end, h_a));
        let b_outs: Vec<f64> = (1..)
            .map(|j| t_c + j as f64 * fine)
            .take_while(|&t| t < t_s - 0.5 * fine)
            .collect();
        let b_fine = dp45(rhs_b, |_, _| 1.0, t_c, y_c, t_s, &b_outs, &io.ode);

        let mut t_all = ts.clone();
        let mut h_all = hs.clone();
        for (t, y) in b_coarse.into_iter().chain(b_fine.outputs).chain([(t_s, sigma)]).chain(c.outputs) {
            t_all.push(t);
            h_all.push(y);
        }
        let step = fine.min(window / opts.join_samples as f64);
        let n_join = (window / step).ceil() as usize;
        t_all.push(t_b);
        h_all.push(h_b);
        for i in 1..n_join {
            let t = t_b + window * i as f64 / n_join as f64;
            t_all.push(t);
            h_all.push(hermite(h_b, s_b, c_b, window, (t - t_b) / window).0);
        }
        t_all.push(t2);
        h_all.push(0.0);
        for j in 1..=20 {
            t_all.push(t2 + j as f64 * step);
            h_all.push(0.0);
        }
        let tail_end = t2 + 10.0 * dt;
        for &t in nodes.iter().filter(|&&t| t > t2 + 20.0 * step && t <= tail_end) {
            t_all.push(t);
            h_all.push(0.0);
        }
        let (t_all, h_all) = sort_dedup(t_all, h_all);
        let min_disc = t_all
            .iter()
            .zip(&h_all)
            .map(|(&t, &h)| model.discriminant(t, h))
            .fold(f64::INFINITY, f64::min);
        let profile = Profile {
            t_samples: t_all,
            h_values: h_all,
            vanishing_t: Some(t2),
            theta: Some(theta2),
            outcome: Outcome::Vanished,
            normalization: io.normalization,
            min_discriminant: min_disc,
        };
        let check = verify_profile(&profile, model);
        return Ok(SmoothProfile {
            profile,
            a,
            cap_end: td,
            blend_end,
            theta_hat,
            theta2,
            join_start: t_b,
            join_window: window,
            end_slope: hermite(h_b, s_b, c_b, window, 1.0).1,
            check,
        });
    }
    Err(Error::NonConvergence(format!(
        "could not join the axis within θ₂ − θ̂ ≤ {theta2_gap} after {} refinements",
        opts.max_refinements
    )))
}

fn sort_dedup(t: Vec<f64>, h: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = t.into_iter().zip(h).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.dedup_by(|x, y| (x.0 - y.0).abs() < 1e-12 * (1.0 + x.0.abs()));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn simons() -> CurvatureModel {
        CurvatureModel::custom(6, 6f64.sqrt(), Arc::new(|t: f64| (1.0 - t * t).powi(3)), -3.0).unwrap()
    }

    #[test]
    fn smooth_step_is_a_step() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert!(smooth_step(1e-3) < 1e-100);
    }

    #[test]
    fn hermite_endpoints() {
        let (v, s) = hermite(0.3, -2.0, 1.5, 0.2, 0.0);
        assert!((v - 0.3).abs() < 1e-15 && (s + 2.0).abs() < 1e-14);
        let (v, s) = hermite(0.3, -2.0, 1.5, 0.2, 1.0);
        assert!(v.abs() < 1e-15 && s.abs() < 1e-13);
    }

    #[test]
    fn midpoint_profile_verifies() {
        let m = simons();
        let (lo, hi) = second_order_coeffs(7.0, -3.0).unwrap();
        let sp = build_smooth_profile(&m, 0.5 * (lo + hi), 0.05, 1e-3, &SmoothOptions::default()).unwrap();
        assert!(sp.check.ok, "{:?}", sp.check);
        assert!(sp.theta2 >= sp.theta_hat && sp.theta2 - sp.theta_hat <= 1e-3);
        assert_eq!(sp.end_slope.abs() < 1e-12, true);
        assert!(build_smooth_profile(&m, lo, 0.05, 1e-3, &SmoothOptions::default()).is_err());
        assert!(build_smooth_profile(&m, 0.5 * (lo + hi), 1.2, 1e-3, &SmoothOptions::default()).is_err());
    }
}
