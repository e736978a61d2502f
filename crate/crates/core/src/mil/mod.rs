//! Multiple-instance classification of images from patch embeddings:
//! attention pooling, embedding and instance baselines, training,
//! cross-validation and metrics.

mod checkpoint;
mod cv;
mod emb1;
mod embed;
mod essential;
mod grad;
mod metrics;
mod model;
mod pool;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use cv::{make_folds, validation_split, FoldSplit};
pub use emb1::{bags_from_records, import_embeddings, read_emb1, write_emb1, EmbeddingRecord};
pub use embed::{embed_patch, EMBEDDING_DIM};
pub use essential::{essential_patches, EssentialPatches};
pub use grad::{loss_and_gradients, Gradients};
pub use metrics::{evaluate, metrics_from_predictions, MeanStd, MetricsReport, MetricsSummary};
pub use model::{AttentionHead, FeatureScaler, Linear, MilModel, ModelConfig};
pub use pool::{
    abmilp_pool, argmax, forward_image, instance_scores, pool_embedding_max, pool_embedding_mean, pool_instance,
    softmax, InstancePool, InstancePooled,
};
pub use train::{grid_search, train, BatchMode, GridCell, GridSearch, TrainOutcome, TrainParams};

/// Image-level classification strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Majority vote of per-patch predictions.
    Mv,
    /// Component-wise max of per-patch class probabilities.
    Imax,
    /// Mean of per-patch class probabilities.
    Imean,
    /// Max pooling of embeddings, then the classifier head.
    Emax,
    /// Mean pooling of embeddings, then the classifier head.
    Emean,
    /// Attention pooling of embeddings, then the classifier head.
    Abmilp,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Mv, Method::Imax, Method::Imean, Method::Emax, Method::Emean, Method::Abmilp];

    pub fn is_instance(self) -> bool {
        matches!(self, Method::Mv | Method::Imax | Method::Imean)
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::Mv => "mv",
            Method::Imax => "imax",
            Method::Imean => "imean",
            Method::Emax => "emax",
            Method::Emean => "emean",
            Method::Abmilp => "abmilp",
        }
    }

    /// Row label used in result tables.
    pub fn title(self) -> &'static str {
        match self {
            Method::Mv => "instance + mv",
            Method::Imax => "instance + max",
            Method::Imean => "instance + mean",
            Method::Emax => "embedding + max",
            Method::Emean => "embedding + mean",
            Method::Abmilp => "embedding + AbMILP",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}` (mv|imax|imean|emax|emean|abmilp)")))
    }
}

/// One image: its patch embeddings and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag<T> {
    pub image_id: String,
    pub patch_ids: Vec<String>,
    pub instances: Vec<Vec<T>>,
    pub clone: String,
    /// Index of `clone` in the sorted class list.
    pub label: usize,
    pub isolate: String,
    pub preparation: String,
}

impl<T> Bag<T> {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances.first().map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_keys_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.key().parse::<Method>().unwrap(), m);
        }
        assert!("sa-abmilp".parse::<Method>().is_err());
    }
}
