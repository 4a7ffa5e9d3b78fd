use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SpherePointSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HemisphereVerdict {
    /// Some open hemisphere contains every point.
    Feasible,
    /// A convex combination of the points vanishes.
    Infeasible,
    /// The distance from the origin to the hull is within the tolerance
    /// band; both near-certificates are attached.
    Boundary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HemisphereCertificate {
    pub verdict: HemisphereVerdict,
    /// Unit `w` maximizing `min ⟨w, xᵢ⟩` (feasible or boundary).
    pub direction: Option<Vec<f64>>,
    /// `min ⟨w, xᵢ⟩`, recomputed from the points.
    pub margin: Option<f64>,
    /// Sparse convex weights `(index, weight)` (infeasible or boundary).
    pub weights: Option<Vec<(usize, f64)>>,
    /// `‖Σ wᵢxᵢ‖`, recomputed from the points.
    pub dual_residual: Option<f64>,
    /// `|Σ wᵢ − 1|` plus any negative weight mass.
    pub weight_defect: Option<f64>,
    pub tol: f64,
}

impl HemisphereCertificate {
    /// Re-check the attached certificate against `pts` by direct arithmetic.
    pub fn verify(&self, pts: &SpherePointSet) -> bool {
        let dual_ok = || match &self.weights {
            Some(w) => {
                let (res, defect) = combination(pts, w);
                res <= self.tol && defect <= 1e-12
            }
            None => false,
        };
        let primal_ok = || match &self.direction {
            Some(d) => {
                let w = DVector::from_column_slice(d);
                (w.norm() - 1.0).abs() < 1e-12 && pts.points.iter().map(|x| x.dot(&w)).fold(f64::INFINITY, f64::min) > 0.0
            }
            None => false,
        };
        match self.verdict {
            HemisphereVerdict::Feasible => primal_ok(),
            HemisphereVerdict::Infeasible => dual_ok(),
            HemisphereVerdict::Boundary => dual_ok(),
        }
    }
}

fn combination(pts: &SpherePointSet, w: &[(usize, f64)]) -> (f64, f64) {
    let mut z = DVector::zeros(pts.ambient_len());
    let mut sum = 0.0;
    let mut neg = 0.0;
    for &(i, c) in w {
        z += &pts.points[i] * c;
        sum += c;
        if c < 0.0 {
            neg -= c;
        }
    }
    (z.norm(), (sum - 1.0).abs() + neg)
}

/// Affine minimizer of `‖Σ αₛ xₛ‖` with `Σ αₛ = 1` over the corral.
fn affine_min(pts: &[DVector<f64>], corral: &[usize]) -> Option<Vec<f64>> {
    let s = corral.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for a in 0..s {
        for b in 0..s {
            kkt[(a, b)] = pts[corral[a]].dot(&pts[corral[b]]);
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let sol = kkt.clone().lu().solve(&rhs).or_else(|| kkt.svd(true, true).solve(&rhs, 1e-14).ok())?;
    Some(sol.rows(0, s).iter().copied().collect())
}

/// Wolfe's algorithm for the point of minimum norm in the convex hull.
/// Returns the corral and its convex weights.
fn min_norm_point(pts: &[DVector<f64>]) -> (Vec<usize>, Vec<f64>) {
    let point = |corral: &[usize], lam: &[f64]| {
        corral.iter().zip(lam).fold(DVector::zeros(pts[0].len()), |acc, (&i, &l)| acc + &pts[i] * l)
    };
    let first = (0..pts.len()).min_by(|&a, &b| pts[a].norm().partial_cmp(&pts[b].norm()).unwrap()).unwrap();
    let mut corral = vec![first];
    let mut lam = vec![1.0];
    let scale = pts.iter().map(|p| p.norm_squared()).fold(0.0, f64::max);
    for _major in 0..50 * pts.len() + 100 {
        let x = point(&corral, &lam);
        let xx = x.norm_squared();
        if xx <= 1e-30 * scale {
            break;
        }
        let (j, best) = (0..pts.len())
            .map(|i| (i, x.dot(&pts[i])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if xx - best <= 1e-15 * scale || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lam.push(0.0);
        for _minor in 0..corral.len() + 5 {
            let Some(alpha) = affine_min(pts, &corral) else { break };
            if alpha.iter().all(|&a| a > 1e-15) {
                lam = alpha;
                break;
            }
            // move from lam towards alpha until a weight hits zero
            let mut theta = 1.0f64;
            for (l, a) in lam.iter().zip(&alpha) {
                if *a <= 1e-15 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let keep: Vec<bool> = lam.iter().map(|&l| l > 1e-15).collect();
            corral = corral.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect();
            lam = lam.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect();
            let s: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= s);
        }
    }
    (corral, lam)
}

/// Decide whether the points lie in an open hemisphere. The maximal margin
/// `max_{|w|=1} min ⟨w, xᵢ⟩`, when positive, equals the distance from the
/// origin to the convex hull and is attained at the normalized min-norm
/// point; otherwise the min-norm weights are a zero convex combination.
pub fn hemisphere_test(pts: &SpherePointSet, tol: f64) -> Result<HemisphereCertificate> {
    if pts.points.is_empty() {
        return Err(Error::invalid("hemisphere test needs at least one point"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let (corral, lam) = min_norm_point(&pts.points);
    let weights: Vec<(usize, f64)> = corral.into_iter().zip(lam).collect();
    let (dist, defect) = combination(pts, &weights);
    let z = weights.iter().fold(DVector::zeros(pts.ambient_len()), |acc, &(i, c)| acc + &pts.points[i] * c);
    let primal = (dist > 0.0).then(|| {
        let w = &z / z.norm();
        let margin = pts.points.iter().map(|x| x.dot(&w)).fold(f64::INFINITY, f64::min);
        (w.iter().copied().collect::<Vec<f64>>(), margin)
    });
    let verdict = if dist > tol {
        HemisphereVerdict::Feasible
    } else if dist <= 1e-2 * tol {
        HemisphereVerdict::Infeasible
    } else {
        HemisphereVerdict::Boundary
    };
    let keep_primal = verdict != HemisphereVerdict::Infeasible;
    let keep_dual = verdict != HemisphereVerdict::Feasible;
    Ok(HemisphereCertificate {
        verdict,
        direction: primal.as_ref().filter(|_| keep_primal).map(|p| p.0.clone()),
        margin: primal.as_ref().filter(|_| keep_primal).map(|p| p.1),
        weights: keep_dual.then(|| weights.clone()),
        dual_residual: keep_dual.then_some(dist),
        weight_defect: keep_dual.then_some(defect),
        tol,
    })
}
