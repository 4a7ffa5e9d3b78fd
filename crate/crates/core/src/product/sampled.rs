use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-10;

/// A link in `S^N` known only through samples: points with tangent and
/// normal frames (normals inside the sphere, i.e. orthogonal to the point).
#[derive(Clone, Debug)]
pub struct SampledLink {
    pub dim: usize,
    pub sphere_dim: usize,
    pub points: Vec<DVector<f64>>,
    pub tangents: Vec<DMatrix<f64>>,
    pub normals: Vec<DMatrix<f64>>,
    fits: OnceLock<std::result::Result<Vec<LocalFit>, String>>,
}

/// Heights over the tangent plane, one polynomial per normal, in the
/// monomials of [`monomials`].
#[derive(Clone, Debug)]
struct LocalFit {
    coeffs: Vec<DVector<f64>>,
    cubic: bool,
}

/// Exponent lists of the degree-2 (and optionally degree-3) monomials.
fn monomials(k: usize, cubic: bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for i in 0..k {
        for j in i..k {
            out.push(vec![i, j]);
        }
    }
    if cubic {
        for i in 0..k {
            for j in i..k {
                for l in j..k {
                    out.push(vec![i, j, l]);
                }
            }
        }
    }
    out
}

fn eval_monomials(mons: &[Vec<usize>], u: &[f64]) -> Vec<f64> {
    mons.iter().map(|m| m.iter().map(|&i| u[i]).product()).collect()
}

impl SampledLink {
    pub fn new(
        dim: usize,
        sphere_dim: usize,
        points: Vec<DVector<f64>>,
        tangents: Vec<DMatrix<f64>>,
        normals: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let s = SampledLink { dim, sphere_dim, points, tangents, normals, fits: OnceLock::new() };
        s.check_shapes()?;
        Ok(s)
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.sphere_dim + 1;
        if self.dim == 0 || self.dim > self.sphere_dim {
            return Err(Error::invalid(format!("link dimension {} in S^{}", self.dim, self.sphere_dim)));
        }
        if self.points.is_empty() || self.points.len() != self.tangents.len() || self.points.len() != self.normals.len() {
            return Err(Error::invalid("sampled link needs equally many points, tangent frames and normal frames"));
        }
        for i in 0..self.points.len() {
            if self.points[i].len() != n
                || self.tangents[i].shape() != (n, self.dim)
                || self.normals[i].shape() != (n, self.sphere_dim - self.dim)
            {
                return Err(Error::invalid(format!("sample {i} has frames of the wrong shape")));
            }
        }
        Ok(())
    }

    /// Indices of samples violating unit length or frame orthonormality.
    pub fn diagnostics(&self) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        for i in 0..self.points.len() {
            let x = &self.points[i];
            if (x.norm() - 1.0).abs() > UNIT_TOL {
                out.push((i, format!("point has norm {}", x.norm())));
            }
            let mut cols = vec![x.clone()];
            cols.extend(self.tangents[i].column_iter().map(|c| c.into_owned()));
            cols.extend(self.normals[i].column_iter().map(|c| c.into_owned()));
            let f = DMatrix::from_columns(&cols);
            let err = (f.transpose() * &f - DMatrix::identity(f.ncols(), f.ncols())).abs().max();
            if err > UNIT_TOL {
                out.push((i, format!("frame deviates from orthonormal by {err:.3e}")));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        match self.diagnostics().first() {
            Some((i, msg)) => Err(Error::invalid(format!("sample {i}: {msg}"))),
            None => Ok(()),
        }
    }

    fn fits(&self) -> Result<&Vec<LocalFit>> {
        self.fits
            .get_or_init(|| (0..self.points.len()).into_par_iter().map(|i| self.fit_at(i)).collect())
            .as_ref()
            .map_err(|e| Error::precondition(e.clone()))
    }

    fn fit_at(&self, i: usize) -> std::result::Result<LocalFit, String> {
        let k = self.dim;
        let total = self.points.len();
        let n_cubic = monomials(k, true).len();
        let n_quad = monomials(k, false).len();
        let cubic = total > 2 * n_cubic + 4;
        let n_mono = if cubic { n_cubic } else { n_quad };
        let want = if cubic { 2 * n_cubic + 4 } else { 2 * n_quad + 2 };
        if total <= n_quad + 2 {
            return Err(format!("{total} samples are too few to fit curvature of a {k}-dimensional link"));
        }
        let x = &self.points[i];
        let mut near: Vec<(f64, usize)> =
            (0..total).filter(|&j| j != i).map(|j| ((&self.points[j] - x).norm_squared(), j)).collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        near.truncate(want.min(total - 1));
        let mons = monomials(k, cubic);
        let t = &self.tangents[i];
        let nu = &self.normals[i];
        let mut a = DMatrix::zeros(near.len(), n_mono);
        let mut z = DMatrix::zeros(near.len(), nu.ncols());
        for (r, &(_, j)) in near.iter().enumerate() {
            let d = &self.points[j] - x;
            let u: Vec<f64> = (t.transpose() * &d).iter().copied().collect();
            for (c, v) in eval_monomials(&mons, &u).into_iter().enumerate() {
                a[(r, c)] = v;
            }
            for c in 0..nu.ncols() {
                z[(r, c)] = nu.column(c).dot(&d);
            }
        }
        let svd = a.svd(true, true);
        let sol = svd.solve(&z, 1e-12).map_err(|e| e.to_string())?;
        Ok(LocalFit { coeffs: (0..nu.ncols()).map(|c| sol.column(c).into_owned()).collect(), cubic })
    }

    /// The graph chart over the tangent plane,
    /// `x√(1 − |u|² − |q|²) + T u + Σ q_ν(u) ν`.
    pub fn chart(&self, i: usize, u: &[f64]) -> Result<DVector<f64>> {
        let fit = &self.fits()?[i];
        let mons = monomials(self.dim, fit.cubic);
        let m = eval_monomials(&mons, u);
        let uu = DVector::from_column_slice(u);
        let mut v = &self.tangents[i] * &uu;
        let mut q2 = 0.0;
        for (c, coeffs) in fit.coeffs.iter().enumerate() {
            let q: f64 = coeffs.iter().zip(&m).map(|(a, b)| a * b).sum();
            q2 += q * q;
            v += self.normals[i].column(c) * q;
        }
        let r = 1.0 - uu.norm_squared() - q2;
        if r < 0.0 {
            return Err(Error::invalid("chart evaluated too far from its sample"));
        }
        Ok(v + &self.points[i] * r.sqrt())
    }
}
