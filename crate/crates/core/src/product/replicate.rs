use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{curvature_model, minimal_product, normal_radius, Factor, NormalRadius, SamplingOptions};
use crate::error::{Error, Result};
use crate::lawlor::{check_area_minimizing, Control, CriterionVerdict, IntegrationOptions, LinkData};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicationEntry {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub normal_radius: NormalRadius,
    pub verdict: CriterionVerdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicationResult {
    /// Smallest `n` whose product the criterion certifies.
    pub n_pass: Option<usize>,
    /// One entry per `n = 2, …, n_max`, passing or not.
    pub entries: Vec<ReplicationEntry>,
}

/// Run the criterion on the minimal products of `n` copies of `base` for
/// every `n` in `2..=n_max`.
pub fn replication_search(
    base: &Factor,
    n_max: usize,
    control: Control,
    sampling: &SamplingOptions,
    integration: &IntegrationOptions,
) -> Result<ReplicationResult> {
    if n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    let entries: Vec<ReplicationEntry> = (2..=n_max)
        .into_par_iter()
        .map(|n| {
            let link = minimal_product(vec![base.clone(); n])?;
            let curvature = curvature_model(&link, sampling)?;
            let radius = normal_radius(&link, sampling)?;
            let data = LinkData {
                k: link.k,
                ambient_dim: link.ambient_sphere_dim + 1,
                alpha: curvature.alpha,
                curvature: Some(curvature.model.clone()),
                normal_radius: Some(radius.value),
            };
            let verdict = check_area_minimizing(&data, control, integration)?;
            Ok(ReplicationEntry { n, k: link.k, alpha: curvature.alpha, normal_radius: radius, verdict })
        })
        .collect::<Result<_>>()?;
    let n_pass = entries.iter().find(|e| e.verdict.passes).map(|e| e.n);
    Ok(ReplicationResult { n_pass, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clifford_alone_is_inconclusive() {
        let r = replication_search(
            &Factor::Sphere { dim: 1 },
            2,
            Control::F,
            &SamplingOptions::default(),
            &IntegrationOptions::default(),
        )
        .unwrap();
        assert_eq!(r.n_pass, None);
        assert_eq!(r.entries.len(), 1);
    }
}
