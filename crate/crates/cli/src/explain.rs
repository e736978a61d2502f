//! Explainability: `clonescope explain`.
//!
//! Essential patches of a trained attention model feed two analyses: the H0
//! persistence of cell centers summarized as PBoW vectors, and morphometry of
//! isolated, refined cells.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::path::Path;

use clonescope::mil::{essential_patches, make_folds, Checkpoint, EssentialPatches, Method};
use clonescope::segmentation::{
    identify_primary_objects, isolated_segments, refine_segment, region_properties, CellRecord, RegionProps,
};
use clonescope::stats::{mann_whitney_u, welch_t, TestResult};
use clonescope::tda::{
    average_pbow, bin_significance, centers_point_cloud, h0_persistence, pbow_with_bins, representative_patches,
    write_diagram_csv, write_pbow_csv, BinSignificance, ClonePBoWProfile, PBoWVector, PatchPBoW, Representatives,
};
use clonescope::tiling::Patch;
use clonescope::{MilModel, PersistenceDiagram};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::exit::{CliError, CliResult};
use crate::io::{create_dir, read_json, write_json, write_jsonl, write_text};
use crate::run::{fold_data, fold_dir, prepare, run_dir};
use crate::svg::{histogram_chart, profile_chart, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneCounts {
    pub clone: String,
    pub patches: usize,
    pub cells: usize,
    pub isolated_cells: usize,
}

/// Two-sample comparison of one cell property between two clones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyTest {
    pub property: String,
    pub first: String,
    pub second: String,
    pub first_mean: f64,
    pub second_mean: f64,
    pub mann_whitney: TestResult,
    pub welch: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PBoWComparison {
    pub first: String,
    pub second: String,
    pub significance: BinSignificance,
    pub significant_bins: Vec<usize>,
    /// Significant bins where `first` has the higher mean count.
    pub first_higher: Vec<usize>,
    pub representatives: Option<Representatives>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A significant ordering between two clones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    /// `size`, `roundness`, `intensity` or `pbow`.
    pub property: String,
    /// Clone with the larger value (for `pbow`, the larger mean count in `bins`).
    pub greater: String,
    pub lesser: String,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bins: Vec<usize>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainSummary {
    pub fold: usize,
    pub alpha: f64,
    pub correct_images: usize,
    pub essential_patches: usize,
    pub clones: Vec<CloneCounts>,
    pub properties: Vec<PropertyTest>,
    pub pbow: Vec<PBoWComparison>,
    pub findings: Vec<Finding>,
    /// Human-readable digest of the orderings.
    pub summary: String,
}

pub fn explain_dir(cfg: &ExperimentConfig) -> std::path::PathBuf {
    cfg.workdir.join("explain")
}

pub fn load_explain_summary(workdir: &Path) -> CliResult<ExplainSummary> {
    read_json(&workdir.join("explain").join("summary.json"))
}

/// Everything measured on one essential patch.
struct PatchAnalysis {
    patch_id: String,
    clone: String,
    diagram: PersistenceDiagram,
    pbow: PBoWVector,
    cells: Vec<CellRecord>,
    /// Refined properties of isolated cells.
    isolated: Vec<RegionProps>,
}

fn analyze_patch(patch: &Patch, clone: &str, cfg: &ExperimentConfig) -> CliResult<PatchAnalysis> {
    let seg = &cfg.explain.segmentation;
    let id = patch.id();
    let raster = &patch.pixels;
    let (labels, segments) = identify_primary_objects(raster, seg.min_diameter, seg.max_diameter);
    let props: Vec<RegionProps> = segments
        .iter()
        .map(|s| region_properties(&s.mask(raster.width(), raster.height()), raster))
        .collect::<clonescope::Result<_>>()?;
    let cloud = centers_point_cloud::<f64>(&id, &props);
    let diagram = h0_persistence(&cloud);
    let pbow = pbow_with_bins(&diagram, cfg.explain.bins);
    let isolated_labels: Vec<u32> = isolated_segments(&labels, &segments, seg.gap).iter().map(|s| s.label).collect();
    let mut cells = Vec::with_capacity(segments.len());
    let mut isolated = Vec::new();
    for (s, p) in segments.iter().zip(&props) {
        let is_isolated = isolated_labels.contains(&s.label);
        let (props, refined) = if is_isolated {
            let r = refine_segment(raster, s, seg.dilation);
            (region_properties(&r.mask, raster)?, !r.fallback)
        } else {
            (*p, false)
        };
        if is_isolated {
            isolated.push(props);
        }
        cells.push(CellRecord {
            patch_id: id.clone(),
            label: s.label,
            area: props.area,
            centroid: props.centroid,
            major: props.major,
            minor: props.minor,
            roundness: props.roundness,
            mean_intensity: props.mean_intensity,
            isolated: is_isolated,
            refined,
        });
    }
    Ok(PatchAnalysis { patch_id: id, clone: clone.to_string(), diagram, pbow, cells, isolated })
}

/// Run configuration recorded by `run`, with explain settings from `cfg`.
fn effective_config(cfg: &ExperimentConfig) -> CliResult<ExperimentConfig> {
    let path = run_dir(cfg).join("config.json");
    if !path.exists() {
        return Ok(cfg.clone());
    }
    let mut recorded = ExperimentConfig::load(&path)?;
    recorded.workdir = cfg.workdir.clone();
    recorded.explain = cfg.explain.clone();
    if cfg.manifest.is_some() {
        recorded.manifest = cfg.manifest.clone();
    }
    recorded.validate()?;
    Ok(recorded)
}

pub fn cmd_explain(cfg: &ExperimentConfig) -> CliResult<ExplainSummary> {
    let cfg = &effective_config(cfg)?;
    let fold = cfg.explain.fold;
    let ck_path = fold_dir(cfg, fold).join(Method::Abmilp.key()).join("checkpoint.json");
    if !ck_path.exists() {
        return Err(CliError::data(format!(
            "no trained attention model at {}; run `clonescope run --method abmilp` first",
            ck_path.display()
        )));
    }
    let model: MilModel = Checkpoint::load(&ck_path)?.to_model()?;
    let prep = prepare(cfg)?;
    if prep.imported.is_some() {
        return Err(CliError::usage("explain needs image patches; imported embeddings carry no pixels"));
    }
    let splits = make_folds(&prep.manifest.records, cfg.folds, cfg.seed)?;
    let data = fold_data(cfg, &prep, &splits[fold])?;
    let essential = essential_patches(&model, &data.test)?;
    if essential.is_empty() {
        return Err(clonescope::Error::NothingToExplain.into());
    }
    let by_id: HashMap<String, &Patch> =
        prep.tiled.iter().flat_map(|t| t.patches.iter()).map(|p| (p.id(), p)).collect();
    let jobs: Vec<(&Patch, &str)> = essential
        .iter()
        .flat_map(|e| e.patch_ids.iter().map(move |id| (id, e.clone.as_str())))
        .map(|(id, clone)| {
            by_id.get(id).map(|&p| (p, clone)).ok_or_else(|| CliError::data(format!("patch `{id}` not found")))
        })
        .collect::<CliResult<_>>()?;
    let analyses: Vec<PatchAnalysis> =
        jobs.par_iter().map(|&(p, clone)| analyze_patch(p, clone, cfg)).collect::<CliResult<_>>()?;

    let dir = explain_dir(cfg);
    create_dir(&dir.join("diagrams"))?;
    cfg.write(&dir.join("config.json"))?;
    write_jsonl(&dir.join("essential.jsonl"), &essential)?;
    let cells: Vec<&CellRecord> = analyses.iter().flat_map(|a| a.cells.iter()).collect();
    write_jsonl(&dir.join("cells.jsonl"), &cells)?;
    for a in &analyses {
        write_diagram_csv(&dir.join("diagrams").join(format!("{}.csv", a.patch_id)), &a.diagram)?;
    }
    let rows: Vec<(String, PBoWVector)> = analyses.iter().map(|a| (a.patch_id.clone(), a.pbow.clone())).collect();
    write_pbow_csv(&dir.join("pbow.csv"), &rows)?;

    let summary = summarize(cfg, &model.classes, &essential, &analyses, &dir)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_text(&dir.join("summary.txt"), &summary.summary)?;
    Ok(summary)
}

const PROPERTIES: [(&str, fn(&RegionProps) -> f64); 3] =
    [("size", |p| p.area), ("roundness", |p| p.roundness), ("intensity", |p| p.mean_intensity)];

fn summarize(
    cfg: &ExperimentConfig,
    classes: &[String],
    essential: &[EssentialPatches],
    analyses: &[PatchAnalysis],
    dir: &Path,
) -> CliResult<ExplainSummary> {
    let alpha = cfg.explain.alpha;
    let mut groups: BTreeMap<&str, Vec<&PatchAnalysis>> = classes.iter().map(|c| (c.as_str(), Vec::new())).collect();
    for a in analyses {
        groups.entry(a.clone.as_str()).or_default().push(a);
    }
    let clones: Vec<CloneCounts> = groups
        .iter()
        .map(|(c, g)| CloneCounts {
            clone: c.to_string(),
            patches: g.len(),
            cells: g.iter().map(|a| a.cells.len()).sum(),
            isolated_cells: g.iter().map(|a| a.isolated.len()).sum(),
        })
        .collect();

    // Persistence path.
    let mut profiles: Vec<ClonePBoWProfile> = Vec::new();
    let vectors: BTreeMap<&str, Vec<PBoWVector>> =
        groups.iter().map(|(c, g)| (*c, g.iter().map(|a| a.pbow.clone()).collect())).collect();
    for (c, v) in &vectors {
        if !v.is_empty() {
            profiles.push(average_pbow(c, v, cfg.explain.level)?);
        }
    }
    write_json(&dir.join("profiles.json"), &profiles)?;
    let patch_pbows: Vec<PatchPBoW> = analyses
        .iter()
        .map(|a| PatchPBoW { patch_id: a.patch_id.clone(), clone: a.clone.clone(), pbow: a.pbow.clone() })
        .collect();
    let mut pbow = Vec::new();
    let mut findings = Vec::new();
    for (i, first) in profiles.iter().enumerate() {
        for second in &profiles[i + 1..] {
            let (va, vb) = (&vectors[first.clone.as_str()], &vectors[second.clone.as_str()]);
            let sig = match bin_significance(va, vb, alpha) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("PBoW {} vs {}: {e}", first.clone, second.clone);
                    continue;
                }
            };
            let bins = sig.significant_bins.clone();
            let first_higher: Vec<usize> = bins.iter().copied().filter(|&k| first.mean[k] > second.mean[k]).collect();
            let (representatives, note) =
                match representative_patches(&patch_pbows, first, second, &bins, cfg.explain.representatives) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
            for (hi, lo, set) in [
                (&first.clone, &second.clone, first_higher.clone()),
                (&second.clone, &first.clone, bins.iter().copied().filter(|k| !first_higher.contains(k)).collect()),
            ] {
                if set.is_empty() {
                    continue;
                }
                let p = set.iter().map(|&k| sig.pvalues[k]).fold(1.0, f64::min);
                findings.push(Finding {
                    property: "pbow".into(),
                    greater: hi.clone(),
                    lesser: lo.clone(),
                    p,
                    text: format!("PBoW: {hi} has more deaths than {lo} in bins {} (min p = {p:.2e})", ranges(&set)),
                    bins: set,
                });
            }
            pbow.push(PBoWComparison {
                first: first.clone.clone(),
                second: second.clone.clone(),
                significant_bins: bins,
                first_higher,
                significance: sig,
                representatives,
                note,
            });
        }
    }
    write_json(&dir.join("significance.json"), &pbow)?;
    let series: Vec<Series> = profiles
        .iter()
        .map(|p| Series { label: &p.clone, mean: &p.mean, half_width: p.ci.as_deref() })
        .collect();
    let title = format!("Average PBoW per clone ({:.0}% CI)", 100.0 * cfg.explain.level);
    write_text(&dir.join("pbow_profiles.svg"), &profile_chart(&title, "death time", "mean count", &series, cfg.explain.bins))?;

    // Morphometry path.
    let values: BTreeMap<&str, [Vec<f64>; 3]> = groups
        .iter()
        .map(|(c, g)| {
            let props: Vec<&RegionProps> = g.iter().flat_map(|a| a.isolated.iter()).collect();
            (*c, PROPERTIES.map(|(_, f)| props.iter().map(|p| f(p)).collect()))
        })
        .collect();
    let mut properties = Vec::new();
    let names: Vec<&str> = values.keys().copied().collect();
    for (pi, (prop, _)) in PROPERTIES.iter().enumerate() {
        let groups_for_chart: Vec<(&str, &[f64])> = names.iter().map(|c| (*c, values[c][pi].as_slice())).collect();
        let label = match *prop {
            "size" => "cell area (px²)",
            "roundness" => "roundness (minor / major)",
            _ => "color intensity (mean gray level)",
        };
        write_text(&dir.join(format!("{prop}.svg")), &histogram_chart(&format!("Cell {prop} per clone"), label, &groups_for_chart, 30))?;
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let (xa, xb) = (&values[a][pi], &values[b][pi]);
                if xa.is_empty() || xb.is_empty() {
                    continue;
                }
                let mw = mann_whitney_u(xa, xb);
                let welch = welch_t(xa, xb).ok();
                let (ma, mb) = (mean(xa), mean(xb));
                if mw.p < alpha && ma != mb {
                    let (hi, lo) = if ma > mb { (*a, *b) } else { (*b, *a) };
                    let text = match *prop {
                        "size" => format!("size: {hi} larger than {lo} (p = {:.2e})", mw.p),
                        "roundness" => format!("roundness: {hi} rounder than {lo} (p = {:.2e})", mw.p),
                        _ => format!("intensity: {lo} darker than {hi} (p = {:.2e})", mw.p),
                    };
                    findings.push(Finding {
                        property: prop.to_string(),
                        greater: hi.into(),
                        lesser: lo.into(),
                        p: mw.p,
                        bins: Vec::new(),
                        text,
                    });
                }
                properties.push(PropertyTest {
                    property: prop.to_string(),
                    first: a.to_string(),
                    second: b.to_string(),
                    first_mean: ma,
                    second_mean: mb,
                    mann_whitney: mw,
                    welch,
                });
            }
        }
    }
    write_json(&dir.join("morphometry.json"), &properties)?;

    let correct_images = essential.len();
    let mut summary = ExplainSummary {
        fold: cfg.explain.fold,
        alpha,
        correct_images,
        essential_patches: analyses.len(),
        clones,
        properties,
        pbow,
        findings,
        summary: String::new(),
    };
    summary.summary = digest(&summary, &values, &names);
    Ok(summary)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `[1, 2, 3, 7]` as `"1-3, 7"`.
fn ranges(bins: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < bins.len() {
        let mut j = i;
        while j + 1 < bins.len() && bins[j + 1] == bins[j] + 1 {
            j += 1;
        }
        parts.push(if i == j { bins[i].to_string() } else { format!("{}-{}", bins[i], bins[j]) });
        i = j + 1;
    }
    parts.join(", ")
}

fn digest(s: &ExplainSummary, values: &BTreeMap<&str, [Vec<f64>; 3]>, names: &[&str]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Clone summary at alpha = {}", s.alpha);
    for (pi, (prop, _)) in PROPERTIES.iter().enumerate() {
        let mut order: Vec<(&str, f64)> =
            names.iter().filter(|c| !values[*c][pi].is_empty()).map(|c| (*c, mean(&values[c][pi]))).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        let listed: Vec<String> = order.iter().map(|(c, m)| format!("{c} ({m:.2})")).collect();
        let _ = writeln!(out, "  {prop} (mean, high to low): {}", listed.join(", "));
    }
    let _ = writeln!(out, "Significant orderings");
    if s.findings.is_empty() {
        let _ = writeln!(out, "  none");
    }
    for f in &s.findings {
        let _ = writeln!(out, "  {}", f.text);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_ranges() {
        assert_eq!(ranges(&[1, 2, 3, 7, 9, 10]), "1-3, 7, 9-10");
        assert_eq!(ranges(&[]), "");
    }
}
