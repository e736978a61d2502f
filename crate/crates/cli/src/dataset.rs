//! Shared front half of the pipeline: load, tile, filter, normalize, embed.

use std::collections::HashSet;

use clonescope::manifest::{Manifest, ManifestRecord};
use clonescope::mil::{bags_from_records, embed_patch, read_emb1};
use clonescope::tiling::{compute_norm_stats, normalize_patch, tile_image, NormStats, Patch};
use clonescope::Bag;
use rayon::prelude::*;

use crate::config::{Embedder, ExperimentConfig};
use crate::exit::{CliError, CliResult};

/// Foreground patches of one image, in row-major grid order.
#[derive(Debug, Clone)]
pub struct TiledImage {
    pub record: ManifestRecord,
    pub image_id: String,
    pub patches: Vec<Patch>,
    /// Windows before foreground filtering.
    pub windows: usize,
    /// Population std of every window, grid order.
    pub stds: Vec<f64>,
}

pub fn tile_manifest(manifest: &Manifest, cfg: &ExperimentConfig) -> CliResult<Vec<TiledImage>> {
    manifest
        .records
        .par_iter()
        .map(|record| {
            let image = manifest.load(record)?;
            let tiling = tile_image(&image, &cfg.tiling)?;
            let windows = tiling.patches.len();
            let mut stds = Vec::with_capacity(windows);
            let mut patches = Vec::new();
            for mut p in tiling.patches {
                let d = cfg.foreground.apply(&mut p);
                stds.push(d.std);
                if d.keep {
                    patches.push(p);
                }
            }
            Ok(TiledImage { record: record.clone(), image_id: record.image_id(), patches, windows, stds })
        })
        .collect()
}

/// Normalization statistics from the foreground patches of `train` images.
pub fn norm_stats(images: &[TiledImage], train: &HashSet<String>, cfg: &ExperimentConfig, seed: u64) -> CliResult<NormStats> {
    let patches: Vec<&Patch> =
        images.iter().filter(|t| train.contains(&t.image_id)).flat_map(|t| t.patches.iter()).collect();
    Ok(compute_norm_stats(&patches, cfg.norm_samples, seed)?)
}

/// Built-in embeddings of every image with at least one foreground patch,
/// in manifest order.
pub fn embed_images(images: &[TiledImage], stats: &NormStats, classes: &[String]) -> CliResult<Vec<Bag>> {
    let bags: Vec<Option<Bag>> = images
        .par_iter()
        .map(|t| {
            if t.patches.is_empty() {
                return Ok(None);
            }
            let instances = t
                .patches
                .iter()
                .map(|p| Ok(embed_patch(&normalize_patch(p, stats)?)))
                .collect::<clonescope::Result<Vec<_>>>()?;
            let label = classes
                .binary_search(&t.record.clone)
                .map_err(|_| CliError::data(format!("unknown clone `{}`", t.record.clone)))?;
            Ok(Some(Bag {
                image_id: t.image_id.clone(),
                patch_ids: t.patches.iter().map(Patch::id).collect(),
                instances,
                clone: t.record.clone.clone(),
                label,
                isolate: t.record.isolate.clone(),
                preparation: t.record.preparation.clone(),
            }))
        })
        .collect::<CliResult<_>>()?;
    for t in images.iter().filter(|t| t.patches.is_empty()) {
        log::warn!("image `{}` has no foreground patches and is left out", t.image_id);
    }
    Ok(bags.into_iter().flatten().collect())
}

/// Bags from an EMB1 archive.
pub fn imported_bags(cfg: &ExperimentConfig, manifest: &Manifest) -> CliResult<Option<Vec<Bag>>> {
    match &cfg.embedder {
        Embedder::Builtin => Ok(None),
        Embedder::Import { path } => {
            let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            let (_, records) = read_emb1(&bytes)?;
            Ok(Some(bags_from_records(&records, manifest)?))
        }
    }
}
