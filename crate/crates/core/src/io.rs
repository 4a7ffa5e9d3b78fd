//! JSON file formats for forms, metrics and links.
//!
//! Form indices are 1-based, as in `dx₁∧dx₂`:
//!
//! ```json
//! {"n": 4, "m": 2, "entries": [[[1, 2], 1.0], [[3, 4], 1.0]]}
//! ```
//!
//! Metrics list their matrix by rows: `{"n": 2, "matrix": [[2, 0], [0, 1]]}`.
//!
//! Links are trees of factors: `{"type": "sphere", "dim": 3}`,
//! `{"type": "equator", "dim": 2}`, `{"type": "product", "factors": [...]}`
//! or `{"type": "sampled", "path": "torus.json"}`. Relative paths resolve
//! against the directory of the file that names them.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{AlternatingForm, MetricTensor, MultiIndex};
use crate::product::{Factor, SampledLink};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormFile {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<(Vec<usize>, f64)>,
}

impl FormFile {
    pub fn from_form(phi: &AlternatingForm) -> Self {
        let entries = phi
            .terms()
            .into_iter()
            .map(|(idx, c)| (idx.as_slice().iter().map(|i| i + 1).collect(), c))
            .collect();
        FormFile { n: phi.dim(), m: phi.degree(), entries }
    }

    /// Indices may come in any order; repeated indices are rejected.
    pub fn to_form(&self) -> Result<AlternatingForm> {
        let mut terms = Vec::with_capacity(self.entries.len());
        for (raw, c) in &self.entries {
            if raw.len() != self.m {
                return Err(Error::DegreeMismatch { expected: self.m, found: raw.len() });
            }
            if let Some(&bad) = raw.iter().find(|&&i| i == 0 || i > self.n) {
                return Err(Error::invalid(format!("form index {bad} outside 1..={}", self.n)));
            }
            let mut idx: Vec<usize> = raw.iter().map(|i| i - 1).collect();
            let mut sign = 1.0;
            for i in 0..idx.len() {
                for j in 0..idx.len() - 1 - i {
                    if idx[j] > idx[j + 1] {
                        idx.swap(j, j + 1);
                        sign = -sign;
                    }
                }
            }
            if idx.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("repeated index in form entry {raw:?}")));
            }
            terms.push((MultiIndex::new(idx, self.n)?, sign * c));
        }
        AlternatingForm::from_terms(self.n, self.m, terms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricFile {
    pub n: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl MetricFile {
    pub fn from_metric(g: &MetricTensor) -> Self {
        let a = g.matrix();
        MetricFile { n: g.dim(), matrix: a.row_iter().map(|r| r.iter().copied().collect()).collect() }
    }

    pub fn to_metric(&self) -> Result<MetricTensor> {
        if self.matrix.len() != self.n || self.matrix.iter().any(|r| r.len() != self.n) {
            return Err(Error::invalid(format!("metric matrix must be {0}x{0}", self.n)));
        }
        MetricTensor::new(DMatrix::from_fn(self.n, self.n, |i, j| self.matrix[i][j]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkSpec {
    Sphere { dim: usize },
    Equator { dim: usize },
    Product { factors: Vec<LinkSpec> },
    Sampled { path: PathBuf },
}

/// One sample: a unit point with tangent and normal frames given as lists
/// of column vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub point: Vec<f64>,
    pub tangent: Vec<Vec<f64>>,
    pub normal: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledLinkFile {
    pub dim: usize,
    pub sphere_dim: usize,
    pub samples: Vec<SampleRow>,
}

fn columns(rows: &[Vec<f64>], n: usize, what: &str, i: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|c| c.len() != n) {
        return Err(Error::invalid(format!("sample {i}: {what} vectors must have length {n}")));
    }
    let cols: Vec<DVector<f64>> = rows.iter().map(|c| DVector::from_column_slice(c)).collect();
    Ok(if cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&cols) })
}

impl SampledLinkFile {
    /// Shapes are checked here; unit length and orthonormality are left to
    /// [`SampledLink::diagnostics`] so that they can be reported per sample.
    pub fn to_link(&self) -> Result<SampledLink> {
        let n = self.sphere_dim + 1;
        let mut points = Vec::with_capacity(self.samples.len());
        let mut tangents = Vec::with_capacity(self.samples.len());
        let mut normals = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            if s.point.len() != n {
                return Err(Error::invalid(format!("sample {i}: point must have length {n}")));
            }
            points.push(DVector::from_column_slice(&s.point));
            tangents.push(columns(&s.tangent, n, "tangent", i)?);
            normals.push(columns(&s.normal, n, "normal", i)?);
        }
        SampledLink::new(self.dim, self.sphere_dim, points, tangents, normals)
    }

    pub fn from_link(link: &SampledLink) -> Self {
        let cols = |m: &DMatrix<f64>| m.column_iter().map(|c| c.iter().copied().collect()).collect();
        let samples = (0..link.points.len())
            .map(|i| SampleRow {
                point: link.points[i].iter().copied().collect(),
                tangent: cols(&link.tangents[i]),
                normal: cols(&link.normals[i]),
            })
            .collect();
        SampledLinkFile { dim: link.dim, sphere_dim: link.sphere_dim, samples }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn read_form(path: &Path) -> Result<AlternatingForm> {
    read_json::<FormFile>(path)?.to_form()
}

pub fn read_metric(path: &Path) -> Result<MetricTensor> {
    read_json::<MetricFile>(path)?.to_metric()
}

pub fn read_sampled_link(path: &Path) -> Result<SampledLink> {
    read_json::<SampledLinkFile>(path)?.to_link()
}

impl LinkSpec {
    /// Build the factor, loading sampled links relative to `base`.
    /// Sampled links are not validated here.
    pub fn resolve(&self, base: &Path) -> Result<Factor> {
        Ok(match self {
            LinkSpec::Sphere { dim } => Factor::Sphere { dim: *dim },
            LinkSpec::Equator { dim } => Factor::Equator { dim: *dim },
            LinkSpec::Product { factors } => {
                Factor::Product(factors.iter().map(|f| f.resolve(base)).collect::<Result<_>>()?)
            }
            LinkSpec::Sampled { path } => Factor::Sampled(Arc::new(read_sampled_link(&base.join(path))?)),
        })
    }

    /// Top-level factors: the children of a product, or the link itself.
    pub fn resolve_factors(&self, base: &Path) -> Result<Vec<Factor>> {
        match self.resolve(base)? {
            Factor::Product(cs) => Ok(cs),
            f => Ok(vec![f]),
        }
    }

    /// Every sampled-link path in the tree, relative to `base`.
    pub fn sampled_paths(&self, base: &Path) -> Vec<PathBuf> {
        match self {
            LinkSpec::Sampled { path } => vec![base.join(path)],
            LinkSpec::Product { factors } => factors.iter().flat_map(|f| f.sampled_paths(base)).collect(),
            _ => Vec::new(),
        }
    }
}
