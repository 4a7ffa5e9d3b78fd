use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Factor, LinkPoint, ProductLink};
use crate::error::{Error, Result};
use crate::lawlor::{CurvatureModel, PFn};
use crate::rng::{seeded, unit_vector};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplingOptions {
    /// Random points per link (ignored for a bare sampled link, which uses
    /// all of its samples).
    pub points: usize,
    /// Random unit normals per point, on top of the frame directions, when
    /// the codimension exceeds one.
    pub normal_dirs: usize,
    pub seed: u64,
    /// Central-difference step for second derivatives of charts.
    pub fd_step: f64,
    /// Sample pairs refined into double normals.
    pub pair_candidates: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { points: 64, normal_dirs: 24, seed: 0, fd_step: 2e-4, pair_candidates: 32 }
    }
}

/// Second derivatives `∂ᵢ∂ⱼX` of the chart at `p`.
fn chart_hessian(root: &Factor, p: &LinkPoint, step: f64) -> Result<Vec<Vec<DVector<f64>>>> {
    let k = p.tangent.ncols();
    let at = |pairs: &[(usize, f64)]| -> Result<DVector<f64>> {
        let mut u = vec![0.0; k];
        for &(i, s) in pairs {
            u[i] += s;
        }
        root.chart(&p.data, &u)
    };
    let f0 = at(&[])?;
    let h = step;
    let mut out = vec![vec![DVector::zeros(f0.len()); k]; k];
    for i in 0..k {
        out[i][i] = (at(&[(i, h)])? - &f0 * 2.0 + at(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])? + at(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            out[j][i] = v.clone();
            out[i][j] = v;
        }
    }
    Ok(out)
}

fn project(hess: &[Vec<DVector<f64>>], v: &DVector<f64>) -> DMatrix<f64> {
    let k = hess.len();
    DMatrix::from_fn(k, k, |i, j| hess[i][j].dot(v))
}

/// `h^ν` for every column `ν` of the normal frame.
fn shape_operators(root: &Factor, p: &LinkPoint, step: f64) -> Result<Vec<DMatrix<f64>>> {
    let hess = chart_hessian(root, p, step)?;
    Ok(p.normals.column_iter().map(|c| project(&hess, &c.into_owned())).collect())
}

/// `h^v_{ij} = ⟨∂ᵢ∂ⱼX, v⟩` in the orthonormal tangent frame at `p`.
pub fn numeric_second_fundamental_form(
    link: &ProductLink,
    p: &LinkPoint,
    v: &DVector<f64>,
    opts: &SamplingOptions,
) -> Result<DMatrix<f64>> {
    if v.len() != p.x.len() {
        return Err(Error::DimensionMismatch { expected: p.x.len(), found: v.len() });
    }
    if (v.norm() - 1.0).abs() > 1e-8 || v.dot(&p.x).abs() > 1e-8 || (p.tangent.transpose() * v).amax() > 1e-8 {
        return Err(Error::precondition("v must be a unit normal to the link inside the sphere"));
    }
    let hess = chart_hessian(link.as_factor(), p, opts.fd_step)?;
    Ok(project(&hess, v))
}

/// Largest `|tr h^ν|` over the normal frame at `p`.
pub fn mean_curvature(link: &ProductLink, p: &LinkPoint, opts: &SamplingOptions) -> Result<f64> {
    let ops = shape_operators(link.as_factor(), p, opts.fd_step)?;
    Ok(ops.iter().map(|h| h.trace().abs()).fold(0.0, f64::max))
}

fn combine(ops: &[DMatrix<f64>], c: &DVector<f64>) -> DMatrix<f64> {
    let k = ops[0].nrows();
    ops.iter().zip(c.iter()).fold(DMatrix::zeros(k, k), |acc, (h, &w)| acc + h * w)
}

/// `G_{νμ} = tr(h^ν h^μ)`; `sup_v ‖h^v‖_F² = λ_max(G)`.
fn frobenius_gram(ops: &[DMatrix<f64>]) -> DMatrix<f64> {
    let c = ops.len();
    DMatrix::from_fn(c, c, |a, b| ops[a].component_mul(&ops[b]).sum())
}

fn top_eigvec(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let e = SymmetricEigen::new(m.clone());
    let j = e.eigenvalues.imax();
    (e.eigenvalues[j], e.eigenvectors.column(j).into_owned())
}

/// `max_{|u|=1, |v|=1} uᵀ h^v u` by alternating maximization over `u` (top
/// eigenvector in absolute value) and `v = II(u,u)/|II(u,u)|`, started from
/// every frame direction. Returns the value and the maximizing `v`.
fn kappa_max(ops: &[DMatrix<f64>]) -> (f64, DVector<f64>) {
    let c = ops.len();
    let mut best = (0.0, DVector::zeros(c));
    let mut starts: Vec<DVector<f64>> = (0..c).map(|j| DVector::from_fn(c, |i, _| if i == j { 1.0 } else { 0.0 })).collect();
    starts.push(top_eigvec(&frobenius_gram(ops)).1);
    for mut v in starts {
        let mut kappa = 0.0;
        for _ in 0..200 {
            let e = SymmetricEigen::new(combine(ops, &v));
            let j = e.eigenvalues.iamax();
            let u = e.eigenvectors.column(j).into_owned();
            let g = DVector::from_fn(c, |a, _| (u.transpose() * &ops[a] * &u)[(0, 0)]);
            let next = g.norm();
            if next <= 0.0 {
                break;
            }
            v = g / next;
            let done = next - kappa <= 1e-15 * next.max(1.0);
            kappa = next;
            if done {
                break;
            }
        }
        if kappa > best.0 {
            best = (kappa, v);
        }
    }
    best
}

/// Numeric curvature data of a link.
#[derive(Clone, Debug)]
pub struct CurvatureEstimate {
    /// `p(t) = min det(I − t h^v)` over the frozen set of sampled `(x, v)`.
    pub model: CurvatureModel,
    /// `sup ‖h^v‖_F` over sampled points and all unit normals.
    pub alpha: f64,
    pub p2: f64,
    /// Largest principal curvature over sampled points and all unit normals.
    pub kappa_max: f64,
    /// Largest `|tr h^ν|` seen; zero up to discretization for minimal links.
    pub max_mean_curvature: f64,
    pub samples: usize,
    pub spectra: usize,
}

impl CurvatureEstimate {
    /// The guaranteed-sound substitute `p ≥ F(α, t, k+1)`.
    pub fn conservative_model(&self) -> Result<CurvatureModel> {
        CurvatureModel::with_control(self.model.k, self.alpha, crate::lawlor::Control::F)
    }
}

struct PointCurvature {
    ops: Vec<DMatrix<f64>>,
}

fn point_curvatures(link: &ProductLink, opts: &SamplingOptions) -> Result<(Vec<LinkPoint>, Vec<PointCurvature>)> {
    if link.as_factor().is_sampled() && link.factors.len() == 1 {
        // fits are built lazily; make sure they exist before fanning out
        let p = link.sample_points(1, opts.seed)?;
        link.as_factor().chart(&p[0].data, &vec![0.0; link.k])?;
    }
    let pts = link.sample_points(opts.points, opts.seed)?;
    if pts.is_empty() {
        return Err(Error::precondition("degenerate sampling: no points"));
    }
    let curv: Vec<PointCurvature> = pts
        .par_iter()
        .map(|p| shape_operators(link.as_factor(), p, opts.fd_step).map(|ops| PointCurvature { ops }))
        .collect::<Result<_>>()?;
    Ok((pts, curv))
}

pub fn curvature_model(link: &ProductLink, opts: &SamplingOptions) -> Result<CurvatureEstimate> {
    let (_, curv) = point_curvatures(link, opts)?;
    let codim = link.codim();
    let mut alpha2: f64 = 0.0;
    let mut kappa: f64 = 0.0;
    let mut mean: f64 = 0.0;
    let spectra: Vec<Vec<f64>> = curv
        .par_iter()
        .enumerate()
        .map(|(i, pc)| {
            if codim == 0 {
                return Vec::new();
            }
            let mut dirs: Vec<DVector<f64>> = (0..codim)
                .map(|j| DVector::from_fn(codim, |a, _| if a == j { 1.0 } else { 0.0 }))
                .collect();
            if codim > 1 {
                dirs.push(top_eigvec(&frobenius_gram(&pc.ops)).1);
                dirs.push(kappa_max(&pc.ops).1);
                let mut rng = seeded(opts.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
                dirs.extend((0..opts.normal_dirs).map(|_| unit_vector(&mut rng, codim)));
            }
            let mut out = Vec::new();
            for d in dirs {
                for s in [1.0, -1.0] {
                    let e = SymmetricEigen::new(combine(&pc.ops, &(&d * s)));
                    out.push(e.eigenvalues.iter().copied().collect::<Vec<f64>>());
                }
            }
            out
        })
        .flatten()
        .collect();
    for pc in &curv {
        if pc.ops.is_empty() {
            continue;
        }
        alpha2 = alpha2.max(top_eigvec(&frobenius_gram(&pc.ops)).0);
        kappa = kappa.max(kappa_max(&pc.ops).0);
        mean = mean.max(pc.ops.iter().map(|h| h.trace().abs()).fold(0.0, f64::max));
    }
    let alpha = alpha2.max(0.0).sqrt();
    // the t² coefficient of each det(I − t h) is e₂ of its eigenvalues
    let p2 = spectra
        .iter()
        .map(|mu| {
            let s: f64 = mu.iter().sum();
            let s2: f64 = mu.iter().map(|m| m * m).sum();
            0.5 * (s * s - s2)
        })
        .fold(0.0f64, f64::min);
    let n_spectra = spectra.len();
    let shared = Arc::new(spectra);
    let p: PFn = Arc::new(move |t: f64| {
        shared
            .iter()
            .map(|mu| mu.iter().map(|m| 1.0 - t * m).product::<f64>())
            .fold(1.0f64, f64::min)
    });
    let model = CurvatureModel::custom(link.k, alpha, p, p2)?;
    Ok(CurvatureEstimate {
        model,
        alpha,
        p2,
        kappa_max: kappa,
        max_mean_curvature: mean,
        samples: curv.len(),
        spectra: n_spectra,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusBound {
    Focal,
    SelfAvoidance,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalRadius {
    /// `min(focal, self_avoidance)`.
    pub value: f64,
    /// `arccot κ_max`.
    pub focal: f64,
    /// Half the shortest double normal found (π/2 when none shorter than π).
    pub self_avoidance: f64,
    pub binding: RadiusBound,
    pub kappa_max: f64,
    pub double_normals: usize,
    pub shortest_double_normal: Option<f64>,
    pub samples: usize,
    /// The bound collapsed and should not be trusted.
    pub flagged: bool,
}

/// Unit initial direction at `x` of the great circle through `y`.
fn chord_dir(x: &DVector<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let w = y - x * x.dot(y);
    let n = w.norm();
    (n > 1e-14).then(|| w / n)
}

fn defect(x: &DVector<f64>, tx: &DMatrix<f64>, y: &DVector<f64>, ty: &DMatrix<f64>) -> Option<f64> {
    let a = (tx.transpose() * chord_dir(x, y)?).amax();
    let b = (ty.transpose() * chord_dir(y, x)?).amax();
    Some(a.max(b))
}

fn arc(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    x.dot(y).clamp(-1.0, 1.0).acos()
}

const DN_TOL: f64 = 1e-8;

/// Levenberg–Marquardt on the tangential components of the chord directions
/// at both ends, in the charts around `p` and `q`. Returns the length of the
/// double normal reached.
fn refine_double_normal(root: &Factor, p: &LinkPoint, q: &LinkPoint) -> Option<f64> {
    let k = p.tangent.ncols();
    let fd = 1e-5;
    let frame = |lp: &LinkPoint, u: &[f64]| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let x = root.chart(&lp.data, u).ok()?;
        let mut cols = Vec::with_capacity(k);
        for i in 0..k {
            let mut a = u.to_vec();
            a[i] += fd;
            let up = root.chart(&lp.data, &a).ok()?;
            a[i] -= 2.0 * fd;
            let dn = root.chart(&lp.data, &a).ok()?;
            cols.push((up - dn) / (2.0 * fd));
        }
        Some((x, DMatrix::from_columns(&cols)))
    };
    let residual = |z: &[f64]| -> Option<(DVector<f64>, f64)> {
        let (x, tx) = frame(p, &z[..k])?;
        let (y, ty) = frame(q, &z[k..])?;
        let a = tx.transpose() * chord_dir(&x, &y)?;
        let b = ty.transpose() * chord_dir(&y, &x)?;
        let mut r = DVector::zeros(2 * k);
        r.rows_mut(0, k).copy_from(&a);
        r.rows_mut(k, k).copy_from(&b);
        Some((r, arc(&x, &y)))
    };
    let mut z = vec![0.0; 2 * k];
    let (mut r, mut len) = residual(&z)?;
    let mut mu = 1e-3;
    for _ in 0..60 {
        if r.norm() < DN_TOL {
            break;
        }
        let h = 1e-7;
        let mut jac = DMatrix::zeros(2 * k, 2 * k);
        for c in 0..2 * k {
            let mut zp = z.clone();
            zp[c] += h;
            let (rp, _) = residual(&zp)?;
            jac.set_column(c, &((rp - &r) / h));
        }
        let jt = jac.transpose();
        let mut improved = false;
        for _ in 0..20 {
            let lhs = &jt * &jac + DMatrix::identity(2 * k, 2 * k) * mu;
            let Some(step) = lhs.lu().solve(&(-(&jt * &r))) else { break };
            let zn: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if let Some((rn, ln)) = residual(&zn) {
                if rn.norm() < r.norm() {
                    z = zn;
                    r = rn;
                    len = ln;
                    mu = (mu * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved || z.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.5 {
            return None;
        }
    }
    (r.norm() < DN_TOL && len > 1e-3).then_some(len)
}

/// Lower estimate of the normal injectivity radius of the link in `S^N`:
/// the smaller of the focal distance `arccot κ_max` and half the shortest
/// double normal.
pub fn normal_radius(link: &ProductLink, opts: &SamplingOptions) -> Result<NormalRadius> {
    let (pts, curv) = point_curvatures(link, opts)?;
    let kappa = curv
        .iter()
        .filter(|pc| !pc.ops.is_empty())
        .map(|pc| kappa_max(&pc.ops).0)
        .fold(0.0f64, f64::max);
    let focal = (1.0f64).atan2(kappa);
    let root = link.as_factor();
    let mut lengths: Vec<f64> = Vec::new();

    if link.codim() > 0 {
        // structural partners first: each leaf sphere's antipodal map
        let flip_lengths: Vec<f64> = pts
            .par_iter()
            .flat_map_iter(|p| {
                root.flips(&p.data)
                    .into_iter()
                    .filter_map(|f| {
                        let q = link.point(f).ok()?;
                        if p.x.dot(&q.x) < -1.0 + 1e-12 {
                            return None;
                        }
                        match defect(&p.x, &p.tangent, &q.x, &q.tangent)? {
                            d if d < DN_TOL => Some(arc(&p.x, &q.x)),
                            _ => refine_double_normal(root, p, &q),
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        lengths.extend(flip_lengths);

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let (p, q) = (&pts[i], &pts[j]);
                if p.x.dot(&q.x) < -1.0 + 1e-12 {
                    continue;
                }
                if let Some(d) = defect(&p.x, &p.tangent, &q.x, &q.tangent) {
                    if d < 0.3 {
                        pairs.push((arc(&p.x, &q.x), i, j));
                    }
                }
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.truncate(opts.pair_candidates);
        let refined: Vec<f64> =
            pairs.par_iter().filter_map(|&(_, i, j)| refine_double_normal(root, &pts[i], &pts[j])).collect();
        lengths.extend(refined);
    }
    let shortest = lengths.iter().copied().fold(None, |m: Option<f64>, l| Some(m.map_or(l, |m| m.min(l))));
    let self_avoidance = shortest.map_or(FRAC_PI_2, |l| (0.5 * l).min(FRAC_PI_2));
    let (value, binding) = if focal <= self_avoidance {
        (focal, RadiusBound::Focal)
    } else {
        (self_avoidance, RadiusBound::SelfAvoidance)
    };
    Ok(NormalRadius {
        value,
        focal,
        self_avoidance,
        binding,
        kappa_max: kappa,
        double_normals: lengths.len(),
        shortest_double_normal: shortest,
        samples: pts.len(),
        flagged: !(value > 1e-6) || !kappa.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::product::{minimal_product, Factor};
    use std::f64::consts::FRAC_PI_4;

    fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn equator_is_totally_geodesic() {
        let link = minimal_product(vec![Factor::Equator { dim: 3 }]).unwrap();
        let opts = SamplingOptions::default();
        for p in link.sample_points(5, 2).unwrap() {
            let v = p.normals.column(0).into_owned();
            let h = numeric_second_fundamental_form(&link, &p, &v, &opts).unwrap();
            assert!(h.amax() < 1e-12);
        }
        let c = curvature_model(&link, &opts).unwrap();
        assert!(c.alpha == 0.0 && c.p2 == 0.0);
        assert!([0.0, 0.3, 1.0, 7.0].iter().all(|&t| c.model.p(t) == 1.0));
        let r = normal_radius(&link, &opts).unwrap();
        assert!((r.value - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn two_sphere_products_match_closed_forms() {
        let opts = SamplingOptions::default();
        for (k1, k2) in [(1, 1), (3, 3), (1, 2), (2, 5)] {
            let link = minimal_product(vec![Factor::Sphere { dim: k1 }, Factor::Sphere { dim: k2 }]).unwrap();
            let a = (k2 as f64 / k1 as f64).sqrt();
            let b = -(k1 as f64 / k2 as f64).sqrt();
            for p in link.sample_points(4, 11).unwrap() {
                let v = p.normals.column(0).into_owned();
                let e = sorted_eigs(&numeric_second_fundamental_form(&link, &p, &v, &opts).unwrap());
                // the distinguished normal (λ₂x̂₁, −λ₁x̂₂) gives −√(k₂/k₁) on the
                // first factor and √(k₁/k₂) on the second
                let mut want: Vec<f64> = std::iter::repeat(-a).take(k1).chain(std::iter::repeat(-b).take(k2)).collect();
                want.sort_by(|x, y| x.partial_cmp(y).unwrap());
                for (x, y) in e.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-4, "{k1}×{k2}: {e:?} vs {want:?}");
                }
                assert!(mean_curvature(&link, &p, &opts).unwrap() < 1e-4);
            }
        }
    }

    #[test]
    fn simons_link_data() {
        let link = minimal_product(vec![Factor::Sphere { dim: 3 }, Factor::Sphere { dim: 3 }]).unwrap();
        let opts = SamplingOptions::default();
        let c = curvature_model(&link, &opts).unwrap();
        assert!((c.alpha - 6f64.sqrt()).abs() < 1e-5, "{}", c.alpha);
        assert!((c.p2 + 3.0).abs() < 1e-5);
        for t in [0.1, 0.3, 0.5, 0.9] {
            assert!((c.model.p(t) - (1.0 - t * t).powi(3)).abs() < 1e-5);
        }
        let r = normal_radius(&link, &opts).unwrap();
        assert!((r.value - FRAC_PI_4).abs() < 1e-6, "{r:?}");
        assert!((r.focal - FRAC_PI_4).abs() < 1e-6 && (r.self_avoidance - FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn clifford_radius_and_torus_replicas() {
        let opts = SamplingOptions::default();
        let link = minimal_product(vec![Factor::Sphere { dim: 1 }, Factor::Sphere { dim: 1 }]).unwrap();
        let r = normal_radius(&link, &opts).unwrap();
        assert!((r.value - FRAC_PI_4).abs() < 1e-6, "{r:?}");
        // T^n in S^{2n−1}: α = √n, focal and double-normal bounds both
        // arctan(1/√(n−1))
        for n in [3usize, 5] {
            let link = minimal_product(vec![Factor::Sphere { dim: 1 }; n]).unwrap();
            let c = curvature_model(&link, &opts).unwrap();
            assert!((c.alpha - (n as f64).sqrt()).abs() < 1e-5);
            assert!((c.kappa_max - ((n - 1) as f64).sqrt()).abs() < 1e-5);
            let r = normal_radius(&link, &opts).unwrap();
            let want = (1.0 / ((n - 1) as f64).sqrt()).atan();
            assert!((r.focal - want).abs() < 1e-6 && (r.self_avoidance - want).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn rejects_non_normal_directions() {
        let link = minimal_product(vec![Factor::Sphere { dim: 1 }, Factor::Sphere { dim: 1 }]).unwrap();
        let p = &link.sample_points(1, 0).unwrap()[0];
        let t = p.tangent.column(0).into_owned();
        assert!(numeric_second_fundamental_form(&link, p, &t, &SamplingOptions::default()).is_err());
    }
}
