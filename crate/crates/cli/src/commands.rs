//! Data preparation subcommands: `synth`, `tile`, `embed`, `import-embeddings`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clonescope::manifest::Manifest;
use clonescope::mil::{bags_from_records, embed_patch, read_emb1, write_emb1, EmbeddingRecord, EMBEDDING_DIM};
use clonescope::synth::{derive_seed, write_manifest};
use clonescope::tiling::{compute_norm_stats, normalize_patch, tile_image, write_patch_store, Patch};
use clonescope::Bag;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Embedder, ExperimentConfig};
use crate::dataset::tile_manifest;
use crate::exit::{CliError, CliResult};
use crate::io::{create_dir, write_json, write_jsonl};

const EMBED_NORM_STREAM: u32 = 21;
const SYNTH_TILING_SCALE: f64 = 1.0;

pub fn dataset_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.workdir.join("data")
}

/// Renders the synthetic dataset into `workdir/data` and writes
/// `workdir/config.json` pointing at its manifest. Synthetic images are
/// small, so that config tiles them at full resolution.
pub fn cmd_synth(cfg: &ExperimentConfig) -> CliResult<Manifest> {
    let jobs = cfg.synth.plan()?;
    let dir = dataset_dir(cfg);
    create_dir(&dir)?;
    let (w, h) = (cfg.synth.width, cfg.synth.height);
    jobs.par_iter().try_for_each(|job| job.write(&dir, &job.render(w, h)?))?;
    let manifest = write_manifest(&dir, &jobs)?;
    let mut out = cfg.clone();
    out.manifest = Some(dir.join("manifest.jsonl"));
    out.tiling.scale = SYNTH_TILING_SCALE;
    out.write(&dir.join("config.json"))?;
    out.write(&cfg.workdir.join("config.json"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TileSummary {
    pub images: usize,
    pub windows: usize,
    pub foreground: usize,
    pub per_image: BTreeMap<String, (usize, usize)>,
}

/// Tiles every manifest image into `workdir/patches`: one PNG per window
/// plus `index.jsonl` with the foreground decision.
pub fn cmd_tile(cfg: &ExperimentConfig) -> CliResult<TileSummary> {
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let dir = cfg.workdir.join("patches");
    if dir.join("index.jsonl").exists() {
        std::fs::remove_file(dir.join("index.jsonl")).map_err(|e| CliError::data(e.to_string()))?;
    }
    create_dir(&dir)?;
    cfg.write(&dir.join("config.json"))?;
    let tiled: Vec<_> = manifest
        .records
        .par_iter()
        .map(|r| {
            let image = manifest.load(r)?;
            let tiling = tile_image(&image, &cfg.tiling)?;
            if let Some(w) = &tiling.warning {
                log::warn!("{}: {w}", r.image_id());
            }
            Ok(tiling
                .patches
                .into_iter()
                .map(|mut p| {
                    let d = cfg.foreground.apply(&mut p);
                    (p, d)
                })
                .collect::<Vec<_>>())
        })
        .collect::<CliResult<_>>()?;
    let mut summary = TileSummary { images: tiled.len(), windows: 0, foreground: 0, per_image: BTreeMap::new() };
    for (r, entries) in manifest.records.iter().zip(&tiled) {
        write_patch_store(&dir, entries)?;
        let kept = entries.iter().filter(|(_, d)| d.keep).count();
        summary.windows += entries.len();
        summary.foreground += kept;
        summary.per_image.insert(r.image_id(), (entries.len(), kept));
    }
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Built-in embeddings of every foreground patch, normalized with
/// statistics over all images, written as `workdir/embed/embeddings.emb1`.
pub fn cmd_embed(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let tiled = tile_manifest(&manifest, cfg)?;
    let patches: Vec<&Patch> = tiled.iter().flat_map(|t| t.patches.iter()).collect();
    let stats = compute_norm_stats(&patches, cfg.norm_samples, derive_seed(cfg.seed, EMBED_NORM_STREAM, 0))?;
    let records: Vec<EmbeddingRecord> = patches
        .par_iter()
        .map(|p| {
            Ok(EmbeddingRecord {
                image_id: p.image_id.clone(),
                patch_id: p.id(),
                values: embed_patch(&normalize_patch(p, &stats)?).into_iter().map(|v| v as f32).collect(),
            })
        })
        .collect::<CliResult<_>>()?;
    let dir = cfg.workdir.join("embed");
    create_dir(&dir)?;
    cfg.write(&dir.join("config.json"))?;
    write_json(&dir.join("norm.json"), &stats)?;
    let path = dir.join("embeddings.emb1");
    let bytes = write_emb1(EMBEDDING_DIM, &records)?;
    std::fs::write(&path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    log::info!("{} patches of {} images embedded", records.len(), tiled.len());
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportSummary {
    pub path: PathBuf,
    pub dim: usize,
    pub images: usize,
    pub patches: usize,
    pub per_clone: BTreeMap<String, usize>,
}

#[derive(Serialize)]
struct BagRow<'a> {
    image_id: &'a str,
    clone: &'a str,
    isolate: &'a str,
    preparation: &'a str,
    patches: usize,
}

/// Validates an EMB1 archive against the manifest and writes
/// `workdir/import/summary.json` and `bags.jsonl`.
pub fn cmd_import(cfg: &ExperimentConfig) -> CliResult<ImportSummary> {
    let Embedder::Import { path } = &cfg.embedder else {
        return Err(CliError::usage("import-embeddings needs the archive path"));
    };
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let (dim, records) = read_emb1(&bytes)?;
    let bags: Vec<Bag> = bags_from_records(&records, &manifest)?;
    let mut per_clone = BTreeMap::new();
    for b in &bags {
        *per_clone.entry(b.clone.clone()).or_insert(0) += 1;
    }
    let summary = ImportSummary { path: path.clone(), dim, images: bags.len(), patches: records.len(), per_clone };
    let dir = cfg.workdir.join("import");
    create_dir(&dir)?;
    cfg.write(&dir.join("config.json"))?;
    write_json(&dir.join("summary.json"), &summary)?;
    let rows: Vec<BagRow> = bags
        .iter()
        .map(|b| BagRow {
            image_id: &b.image_id,
            clone: &b.clone,
            isolate: &b.isolate,
            preparation: &b.preparation,
            patches: b.len(),
        })
        .collect();
    write_jsonl(&dir.join("bags.jsonl"), &rows)?;
    Ok(summary)
}
