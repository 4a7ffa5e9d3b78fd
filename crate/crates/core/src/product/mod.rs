//! Minimal products `(λ₁L₁, …, λₙLₙ) ⊂ S^{N₁+⋯+Nₙ+n−1}` with
//! `λᵢ = √(kᵢ/k)`, and their numerically estimated curvature data.
//!
//! Every factor exposes, at each of its points, an orthonormal tangent frame,
//! an orthonormal normal frame inside its sphere, and a chart whose
//! differential at the origin is the tangent frame. Second fundamental forms
//! are taken by central differences of the chart.

mod geometry;
mod replicate;
mod sampled;

pub use geometry::{
    curvature_model, mean_curvature, normal_radius, numeric_second_fundamental_form, CurvatureEstimate, NormalRadius,
    RadiusBound, SamplingOptions,
};
pub use replicate::{replication_search, ReplicationEntry, ReplicationResult};
pub use sampled::SampledLink;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::complete_basis;
use crate::rng::{unit_vector, SeededRng};
use rand::Rng;

#[derive(Clone, Debug)]
pub enum Factor {
    /// `S^k` as its own unit sphere (`N = k`).
    Sphere { dim: usize },
    /// The totally geodesic `S^k ⊂ S^{k+1}`.
    Equator { dim: usize },
    /// A minimal product of the children, used as a single factor.
    Product(Vec<Factor>),
    Sampled(Arc<SampledLink>),
}

/// A point of a factor, in the factor's own terms.
#[derive(Clone, Debug, PartialEq)]
pub enum PointData {
    Sphere(DVector<f64>),
    Equator(DVector<f64>),
    Product(Vec<PointData>),
    Sampled(usize),
}

/// Orthonormal basis of `x^⊥` with `det[x, T] = 1`, from the reflection
/// exchanging `x` with `∓e₀`.
fn sphere_tangent(x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let mut w = x.clone();
    let s = if x[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += s;
    let ww = w.norm_squared();
    let mut t = DMatrix::from_fn(n, n - 1, |i, j| {
        let e = if i == j + 1 { 1.0 } else { 0.0 };
        e - 2.0 * w[i] * w[j + 1] / ww
    });
    // the reflection has determinant −1 and sends e₀ to −s·x
    if s < 0.0 {
        t.column_mut(n - 2).neg_mut();
    }
    t
}

/// Orthonormal basis of `λ^⊥ ⊂ ℝⁿ` (n − 1 columns).
fn radial_mixing(lambdas: &[f64]) -> DMatrix<f64> {
    let l = DMatrix::from_column_slice(lambdas.len(), 1, lambdas);
    let full = complete_basis(&l, None);
    full.columns(1, lambdas.len() - 1).into_owned()
}

pub(crate) fn product_lambdas(children: &[Factor]) -> Vec<f64> {
    let k: usize = children.iter().map(Factor::dim).sum();
    children.iter().map(|c| (c.dim() as f64 / k as f64).sqrt()).collect()
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Sphere { dim } | Factor::Equator { dim } => *dim,
            Factor::Product(cs) => cs.iter().map(Factor::dim).sum(),
            Factor::Sampled(s) => s.dim,
        }
    }

    /// `N` for a factor living in `S^N`.
    pub fn sphere_dim(&self) -> usize {
        match self {
            Factor::Sphere { dim } => *dim,
            Factor::Equator { dim } => dim + 1,
            Factor::Product(cs) => cs.iter().map(Factor::sphere_dim).sum::<usize>() + cs.len() - 1,
            Factor::Sampled(s) => s.sphere_dim,
        }
    }

    pub fn codim(&self) -> usize {
        self.sphere_dim() - self.dim()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Factor::Sphere { dim } | Factor::Equator { dim } if *dim == 0 => {
                Err(Error::invalid("sphere factors need dimension ≥ 1"))
            }
            Factor::Product(cs) if cs.is_empty() => Err(Error::invalid("empty product")),
            Factor::Product(cs) => cs.iter().try_for_each(Factor::validate),
            Factor::Sampled(s) => s.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_sampled(&self) -> bool {
        match self {
            Factor::Sampled(_) => true,
            Factor::Product(cs) => cs.iter().any(Factor::is_sampled),
            _ => false,
        }
    }

    pub fn random_point(&self, rng: &mut SeededRng) -> PointData {
        match self {
            Factor::Sphere { dim } => PointData::Sphere(unit_vector(rng, dim + 1)),
            Factor::Equator { dim } => PointData::Equator(unit_vector(rng, dim + 1)),
            Factor::Product(cs) => PointData::Product(cs.iter().map(|c| c.random_point(rng)).collect()),
            Factor::Sampled(s) => PointData::Sampled(rng.random_range(0..s.points.len())),
        }
    }

    fn mismatch() -> Error {
        Error::invalid("point does not belong to this factor")
    }

    pub fn embed(&self, p: &PointData) -> Result<DVector<f64>> {
        match (self, p) {
            (Factor::Sphere { .. }, PointData::Sphere(x)) => Ok(x.clone()),
            (Factor::Equator { dim }, PointData::Equator(x)) => {
                let mut v = DVector::zeros(dim + 2);
                v.rows_mut(0, dim + 1).copy_from(x);
                Ok(v)
            }
            (Factor::Product(cs), PointData::Product(ps)) if cs.len() == ps.len() => {
                let lambdas = product_lambdas(cs);
                let blocks: Vec<DVector<f64>> = cs
                    .iter()
                    .zip(ps)
                    .zip(&lambdas)
                    .map(|((c, p), l)| c.embed(p).map(|v| v * *l))
                    .collect::<Result<_>>()?;
                Ok(concat(&blocks))
            }
            (Factor::Sampled(s), PointData::Sampled(i)) => s.points.get(*i).cloned().ok_or_else(Self::mismatch),
            _ => Err(Self::mismatch()),
        }
    }

    pub fn tangent(&self, p: &PointData) -> Result<DMatrix<f64>> {
        match (self, p) {
            (Factor::Sphere { .. }, PointData::Sphere(x)) => Ok(sphere_tangent(x)),
            (Factor::Equator { dim }, PointData::Equator(x)) => {
                let t = sphere_tangent(x);
                let mut m = DMatrix::zeros(dim + 2, *dim);
                m.view_mut((0, 0), (dim + 1, *dim)).copy_from(&t);
                Ok(m)
            }
            (Factor::Product(cs), PointData::Product(ps)) if cs.len() == ps.len() => {
                let blocks: Vec<DMatrix<f64>> = cs.iter().zip(ps).map(|(c, p)| c.tangent(p)).collect::<Result<_>>()?;
                Ok(block_diag(&blocks))
            }
            (Factor::Sampled(s), PointData::Sampled(i)) => s.tangents.get(*i).cloned().ok_or_else(Self::mismatch),
            _ => Err(Self::mismatch()),
        }
    }

    /// Orthonormal normal frame of the factor inside its own sphere.
    pub fn normals(&self, p: &PointData) -> Result<DMatrix<f64>> {
        match (self, p) {
            (Factor::Sphere { dim }, PointData::Sphere(_)) => Ok(DMatrix::zeros(dim + 1, 0)),
            (Factor::Equator { dim }, PointData::Equator(_)) => {
                let mut m = DMatrix::zeros(dim + 2, 1);
                m[(dim + 1, 0)] = 1.0;
                Ok(m)
            }
            (Factor::Product(cs), PointData::Product(ps)) if cs.len() == ps.len() => {
                let lambdas = product_lambdas(cs);
                let own: Vec<DMatrix<f64>> = cs.iter().zip(ps).map(|(c, p)| c.normals(p)).collect::<Result<_>>()?;
                let mut cols: Vec<DVector<f64>> = Vec::new();
                let inner = block_diag(&own);
                cols.extend(inner.column_iter().map(|c| c.into_owned()));
                let xs: Vec<DVector<f64>> = cs.iter().zip(ps).map(|(c, p)| c.embed(p)).collect::<Result<_>>()?;
                let mix = radial_mixing(&lambdas);
                for j in 0..mix.ncols() {
                    let blocks: Vec<DVector<f64>> = xs.iter().enumerate().map(|(i, x)| x * mix[(i, j)]).collect();
                    cols.push(concat(&blocks));
                }
                let n = self.sphere_dim() + 1;
                Ok(if cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&cols) })
            }
            (Factor::Sampled(s), PointData::Sampled(i)) => s.normals.get(*i).cloned().ok_or_else(Self::mismatch),
            _ => Err(Self::mismatch()),
        }
    }

    /// Chart around `p` in orthonormal tangent coordinates.
    pub fn chart(&self, p: &PointData, u: &[f64]) -> Result<DVector<f64>> {
        match (self, p) {
            (Factor::Sphere { .. }, PointData::Sphere(x)) => {
                let v = x + sphere_tangent(x) * DVector::from_column_slice(u);
                Ok(v.normalize())
            }
            (Factor::Equator { dim }, PointData::Equator(x)) => {
                let v = (x + sphere_tangent(x) * DVector::from_column_slice(u)).normalize();
                let mut out = DVector::zeros(dim + 2);
                out.rows_mut(0, dim + 1).copy_from(&v);
                Ok(out)
            }
            (Factor::Product(cs), PointData::Product(ps)) if cs.len() == ps.len() => {
                let lambdas = product_lambdas(cs);
                let mut off = 0;
                let mut blocks = Vec::with_capacity(cs.len());
                for ((c, p), l) in cs.iter().zip(ps).zip(&lambdas) {
                    let d = c.dim();
                    let scaled: Vec<f64> = u[off..off + d].iter().map(|x| x / l).collect();
                    blocks.push(c.chart(p, &scaled)? * *l);
                    off += d;
                }
                Ok(concat(&blocks))
            }
            (Factor::Sampled(s), PointData::Sampled(i)) => s.chart(*i, u),
            _ => Err(Self::mismatch()),
        }
    }

    /// Points obtained by the antipodal map of one leaf sphere factor; for
    /// sphere products these are the partners of the shortest double normals.
    pub fn flips(&self, p: &PointData) -> Vec<PointData> {
        match (self, p) {
            (Factor::Sphere { .. }, PointData::Sphere(x)) => vec![PointData::Sphere(-x)],
            (Factor::Equator { .. }, PointData::Equator(x)) => vec![PointData::Equator(-x)],
            (Factor::Product(cs), PointData::Product(ps)) => {
                let mut out = Vec::new();
                for (i, c) in cs.iter().enumerate() {
                    for f in c.flips(&ps[i]) {
                        let mut q = ps.clone();
                        q[i] = f;
                        out.push(PointData::Product(q));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

fn concat(blocks: &[DVector<f64>]) -> DVector<f64> {
    let n: usize = blocks.iter().map(|b| b.len()).sum();
    let mut v = DVector::zeros(n);
    let mut off = 0;
    for b in blocks {
        v.rows_mut(off, b.len()).copy_from(b);
        off += b.len();
    }
    v
}

fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = DMatrix::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        m.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    m
}

#[derive(Clone, Debug)]
pub struct ProductLink {
    pub factors: Vec<Factor>,
    pub lambdas: Vec<f64>,
    pub k: usize,
    /// `N` of the target sphere `S^N`.
    pub ambient_sphere_dim: usize,
    root: Factor,
}

/// A point of a link with its frames.
#[derive(Clone, Debug)]
pub struct LinkPoint {
    pub data: PointData,
    pub x: DVector<f64>,
    pub tangent: DMatrix<f64>,
    pub normals: DMatrix<f64>,
}

pub fn minimal_product(factors: Vec<Factor>) -> Result<ProductLink> {
    if factors.is_empty() {
        return Err(Error::invalid("a product needs at least one factor"));
    }
    for f in &factors {
        f.validate()?;
    }
    let root = if factors.len() == 1 { factors[0].clone() } else { Factor::Product(factors.clone()) };
    let lambdas = if factors.len() == 1 { vec![1.0] } else { product_lambdas(&factors) };
    Ok(ProductLink { k: root.dim(), ambient_sphere_dim: root.sphere_dim(), lambdas, factors, root })
}

impl ProductLink {
    pub fn as_factor(&self) -> &Factor {
        &self.root
    }

    pub fn codim(&self) -> usize {
        self.root.codim()
    }

    pub fn point(&self, data: PointData) -> Result<LinkPoint> {
        Ok(LinkPoint {
            x: self.root.embed(&data)?,
            tangent: self.root.tangent(&data)?,
            normals: self.root.normals(&data)?,
            data,
        })
    }

    /// `count` seeded random points; a link that is a single sampled factor
    /// contributes all of its samples instead.
    pub fn sample_points(&self, count: usize, seed: u64) -> Result<Vec<LinkPoint>> {
        if let Factor::Sampled(s) = &self.root {
            return (0..s.points.len()).map(|i| self.point(PointData::Sampled(i))).collect();
        }
        let mut rng = crate::rng::seeded(seed);
        (0..count).map(|_| self.point(self.root.random_point(&mut rng))).collect()
    }
}
