use serde::{Deserialize, Serialize};

use super::{ClonePBoWProfile, PBoWVector};
use crate::error::{Error, Result};

/// A patch's PBoW vector with the clone of the image it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPBoW {
    pub patch_id: String,
    pub clone: String,
    pub pbow: PBoWVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPatch {
    pub patch_id: String,
    pub clone: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representatives {
    pub first_clone: String,
    pub second_clone: String,
    pub features: Vec<usize>,
    pub first: Vec<ScoredPatch>,
    pub second: Vec<ScoredPatch>,
}

/// `sum_f |p[f] - toward[f]| - |p[f] - away[f]|`; lower is closer to `toward`
/// and farther from `away`.
pub fn representative_score(p: &[f64], toward: &[f64], away: &[f64], features: &[usize]) -> f64 {
    features.iter().map(|&f| (p[f] - toward[f]).abs() - (p[f] - away[f]).abs()).sum()
}

/// The `k` lowest-scoring patches of each clone, ties broken by patch id.
/// Patches of the first profile's clone are ranked toward it and away from the
/// second, and vice versa.
pub fn representative_patches(
    patches: &[PatchPBoW],
    first: &ClonePBoWProfile,
    second: &ClonePBoWProfile,
    features: &[usize],
    k: usize,
) -> Result<Representatives> {
    if features.is_empty() {
        return Err(Error::NoDiscriminativeBins);
    }
    let rank = |own: &ClonePBoWProfile, other: &ClonePBoWProfile| {
        let mut scored: Vec<ScoredPatch> = patches
            .iter()
            .filter(|p| p.clone == own.clone)
            .map(|p| ScoredPatch {
                patch_id: p.patch_id.clone(),
                clone: p.clone.clone(),
                score: representative_score(&p.pbow.as_f64(), &own.mean, &other.mean, features),
            })
            .collect();
        scored.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.patch_id.cmp(&b.patch_id)));
        scored.truncate(k);
        scored
    };
    Ok(Representatives {
        first_clone: first.clone.clone(),
        second_clone: second.clone.clone(),
        features: features.to_vec(),
        first: rank(first, second),
        second: rank(second, first),
    })
}
