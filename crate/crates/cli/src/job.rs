//! The job file named by `--spec`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use calibra::exterior::{AlternatingForm, MetricTensor};
use calibra::io::{read_json, FormFile, LinkSpec, MetricFile};
use calibra::lawlor::{CurvatureModel, PFn};
use serde::Deserialize;

use crate::CliError;

/// Either a path to a file (relative to the job file) or the value inline.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: serde::de::DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: &Path) -> calibra::Result<T> {
        match self {
            Source::Path(p) => read_json(&base.join(p)),
            Source::Inline(v) => Ok(v.clone()),
        }
    }
}

/// Curvature data given directly rather than computed from a link.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub k: usize,
    #[serde(default)]
    pub ambient_dim: usize,
    pub alpha: f64,
    /// Coefficients of `p` in ascending powers of `t`.
    pub p_coeffs: Vec<f64>,
    pub normal_radius: f64,
}

impl ModelSpec {
    pub fn model(&self) -> calibra::Result<CurvatureModel> {
        let c = self.p_coeffs.clone();
        if c.get(1).is_some_and(|&a| a != 0.0) {
            return Err(calibra::Error::InvalidInput("p must have no linear term".into()));
        }
        let p2 = c.get(2).copied().unwrap_or(0.0);
        let p: PFn = Arc::new(move |t| c.iter().rev().fold(0.0, |acc, a| acc * t + a));
        CurvatureModel::custom(self.k, self.alpha, p, p2)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    /// If present, must match the subcommand.
    pub command: Option<String>,
    pub form: Option<Source<FormFile>>,
    pub metric: Option<Source<MetricFile>>,
    pub metric1: Option<Source<MetricFile>>,
    pub metric2: Option<Source<MetricFile>>,
    /// Rescale both gluing endpoints to unit comass first.
    #[serde(default)]
    pub normalize: bool,
    pub ks: Option<Vec<usize>>,
    pub alphas: Option<Vec<f64>>,
    pub link: Option<LinkSpec>,
    pub model: Option<ModelSpec>,
    pub base: Option<LinkSpec>,
    pub n_max: Option<usize>,
}

pub struct Job {
    pub file: JobFile,
    pub base: PathBuf,
}

impl Job {
    pub fn read(path: &Path) -> Result<Job, CliError> {
        let file: JobFile = read_json(path).map_err(CliError::from)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Job { file, base })
    }

    fn need<'a, T>(v: &'a Option<T>, field: &str, command: &str) -> Result<&'a T, CliError> {
        v.as_ref().ok_or_else(|| CliError::usage(format!("{command} needs `{field}` in the job file")))
    }

    pub fn form(&self, command: &str) -> Result<AlternatingForm, CliError> {
        Ok(Self::need(&self.file.form, "form", command)?.load(&self.base)?.to_form()?)
    }

    pub fn metric(&self, field: &str, command: &str) -> Result<MetricTensor, CliError> {
        let src = match field {
            "metric" => &self.file.metric,
            "metric1" => &self.file.metric1,
            _ => &self.file.metric2,
        };
        Ok(Self::need(src, field, command)?.load(&self.base)?.to_metric()?)
    }

    pub fn link(&self, command: &str) -> Result<&LinkSpec, CliError> {
        Self::need(&self.file.link, "link", command)
    }

    pub fn base_link(&self, command: &str) -> Result<&LinkSpec, CliError> {
        Self::need(&self.file.base, "base", command)
    }
}
