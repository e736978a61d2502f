use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Bag;
use crate::error::{Error, Result};
use crate::manifest::ManifestRecord;

/// One cross-validation round: every isolate sends one whole preparation to
/// training and the other to test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded preparation-level splits for `folds` rounds. Image ids keep
/// manifest order within each side.
pub fn make_folds(records: &[ManifestRecord], folds: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if folds == 0 {
        return Err(Error::InvalidArgument("folds must be >= 1".into()));
    }
    let mut preparations: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        preparations.entry(&r.isolate).or_default().insert(&r.preparation);
    }
    if preparations.is_empty() {
        return Err(Error::NoBags);
    }
    if let Some((iso, preps)) = preparations.iter().find(|(_, p)| p.len() != 2) {
        return Err(Error::PreparationCount { isolate: iso.to_string(), found: preps.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..folds)
        .map(|fold| {
            let train_prep: BTreeMap<&str, &str> = preparations
                .iter()
                .map(|(&iso, preps)| {
                    let pick = rng.random_range(0..2);
                    (iso, *preps.iter().nth(pick).expect("two preparations"))
                })
                .collect();
            let (train, test): (Vec<_>, Vec<_>) =
                records.iter().partition(|r| train_prep[r.isolate.as_str()] == r.preparation);
            Ok(FoldSplit {
                fold,
                train: train.iter().map(|r| r.image_id()).collect(),
                test: test.iter().map(|r| r.image_id()).collect(),
            })
        })
        .collect()
}

/// Holds out about `fraction` of each class's isolates (at least one when the
/// class has two or more) for validation. Returns `(train, validation)`
/// indices into `bags`.
pub fn validation_split<T>(bags: &[Bag<T>], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut isolates: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    for b in bags {
        isolates.entry(b.label).or_default().insert(&b.isolate);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held: BTreeSet<&str> = BTreeSet::new();
    for set in isolates.values() {
        if set.len() < 2 {
            continue;
        }
        let mut list: Vec<&str> = set.iter().copied().collect();
        list.shuffle(&mut rng);
        let take = ((list.len() as f64 * fraction).round() as usize).clamp(1, list.len() - 1);
        held.extend(&list[..take]);
    }
    (0..bags.len()).partition(|&i| !held.contains(bags[i].isolate.as_str()))
}
