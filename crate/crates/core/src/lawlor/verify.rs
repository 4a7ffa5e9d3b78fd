use serde::{Deserialize, Serialize};

use super::{CurvatureModel, Normalization, Profile};

/// A profile passes when its worst residual is at most this.
pub const VERIFY_TOL: f64 = 1e-6;

/// Finite-difference weights for the first derivative at `x0` from the
/// given nodes (Fornberg's recursion, derivative orders 0 and 1).
pub fn fd_weights(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    // c[j][d]: weight of node j for derivative d
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for d in (1..=mn).rev() {
                    c[i][d] = c1 * (d as f64 * c[i - 1][d - 1] - c5 * c[i - 1][d]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for d in (1..=mn).rev() {
                c[j][d] = (c4 * c[j][d] - d as f64 * c[j][d - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Five-point derivative estimates at every sample.
pub(crate) fn derivatives(t: &[f64], h: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let w = 5.min(n);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(w / 2).min(n - w);
            let nodes = &t[start..start + w];
            let weights = fd_weights(t[i], nodes);
            weights.iter().zip(&h[start..start + w]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileCheck {
    /// Worst residual under the profile's own normalization is ≤ `VERIFY_TOL`.
    pub ok: bool,
    pub worst_margin: f64,
    pub worst_t: f64,
    pub worst_margin_eq42: f64,
    pub worst_margin_paper_k: f64,
}

fn residual(t: f64, h: f64, dh: f64, p: f64, kk: f64) -> f64 {
    (h - t * dh / kk).powi(2) + (dh / kk).powi(2) - p * p
}

/// `(h − t h′/K)² + (h′/K)² − p²` at every interior sample, with `h′` from
/// five-point finite differences; reported for both normalizations.
pub fn verify_profile(profile: &Profile, model: &CurvatureModel) -> ProfileCheck {
    let (t, h) = (&profile.t_samples, &profile.h_values);
    let dh = derivatives(t, h);
    let mut worst = [f64::NEG_INFINITY; 2];
    let mut worst_t = [0.0; 2];
    for (slot, norm) in [Normalization::Eq42, Normalization::PaperK].into_iter().enumerate() {
        let kk = norm.prefactor(model.k);
        for i in 1..t.len().saturating_sub(1) {
            let r = residual(t[i], h[i], dh[i], model.p(t[i]), kk);
            if r > worst[slot] {
                worst[slot] = r;
                worst_t[slot] = t[i];
            }
        }
    }
    // fewer than three samples: nothing interior to check
    for w in worst.iter_mut().filter(|w| w.is_infinite()) {
        *w = 0.0;
    }
    let own = match profile.normalization {
        Normalization::Eq42 => 0,
        Normalization::PaperK => 1,
    };
    ProfileCheck {
        ok: worst[own] <= VERIFY_TOL,
        worst_margin: worst[own],
        worst_t: worst_t[own],
        worst_margin_eq42: worst[0],
        worst_margin_paper_k: worst[1],
    }
}
