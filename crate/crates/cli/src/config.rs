//! Experiment configuration. Precedence: defaults, then `--config` file, then
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clonescope::mil::{Method, ModelConfig, TrainParams};
use clonescope::segmentation::SegmentationParams;
use clonescope::synth::DatasetSpec;
use clonescope::tiling::{ForegroundFilter, TilingParams};
use serde::{Deserialize, Serialize};

use crate::exit::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Embedder {
    Builtin,
    /// Precomputed EMB1 archive; bags are fixed across folds.
    Import { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub enabled: bool,
    pub lr: Vec<f64>,
    pub wd: Vec<f64>,
    /// Share of each class's training isolates held out for validation.
    pub validation_fraction: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            lr: vec![5e-6, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3],
            wd: vec![1e-5, 1e-4, 1e-3, 1e-2, 5e-2],
            validation_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainParams {
    pub segmentation: SegmentationParams,
    pub alpha: f64,
    pub bins: usize,
    /// Confidence level of the PBoW profile intervals.
    pub level: f64,
    /// Representative patches kept per clone and comparison.
    pub representatives: usize,
    /// Cross-validation round whose AbMILP model and test images are explained.
    pub fold: usize,
}

impl Default for ExplainParams {
    fn default() -> Self {
        Self {
            segmentation: SegmentationParams::default(),
            alpha: 0.01,
            bins: 128,
            level: 0.99,
            representatives: 3,
            fold: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: Option<PathBuf>,
    pub workdir: PathBuf,
    pub tiling: TilingParams,
    pub foreground: ForegroundFilter,
    pub norm_samples: usize,
    pub embedder: Embedder,
    pub methods: Vec<Method>,
    pub model: ModelConfig,
    pub train: TrainParams,
    pub grid: GridConfig,
    pub folds: usize,
    pub seed: u64,
    pub explain: ExplainParams,
    pub synth: DatasetSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            workdir: PathBuf::from("clonescope-work"),
            tiling: TilingParams::default(),
            foreground: ForegroundFilter::default(),
            norm_samples: 10_000,
            embedder: Embedder::Builtin,
            methods: Method::ALL.to_vec(),
            model: ModelConfig::default(),
            train: TrainParams::default(),
            grid: GridConfig::default(),
            folds: 5,
            seed: 0,
            explain: ExplainParams::default(),
            synth: DatasetSpec::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
    pub method: Option<Method>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub wd: Option<f64>,
    pub grid: bool,
    pub alpha: Option<f64>,
    pub embeddings: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Defaults, then the optional file, then the flags.
    pub fn resolve(file: Option<&Path>, o: &Overrides) -> CliResult<Self> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = &o.manifest {
            c.manifest = Some(v.clone());
        }
        if let Some(v) = &o.workdir {
            c.workdir = v.clone();
        }
        if let Some(m) = o.method {
            c.methods = vec![m];
        }
        if let Some(v) = o.folds {
            c.folds = v;
        }
        if let Some(v) = o.seed {
            c.seed = v;
            c.synth.seed = v;
        }
        if let Some(v) = o.lr {
            c.train.lr = v;
        }
        if let Some(v) = o.wd {
            c.train.wd = v;
        }
        if o.grid {
            c.grid.enabled = true;
        }
        if let Some(v) = o.alpha {
            c.explain.alpha = v;
        }
        if let Some(p) = &o.embeddings {
            c.embedder = Embedder::Import { path: p.clone() };
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::usage(m));
        self.tiling.validate()?;
        if !(self.foreground.low < self.foreground.high) {
            return bad("foreground.low must be below foreground.high".into());
        }
        if self.norm_samples == 0 || self.folds == 0 {
            return bad("norm_samples and folds must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let t = &self.train;
        if !(t.lr.is_finite() && t.lr >= 0.0 && t.wd.is_finite() && t.wd >= 0.0) {
            return bad(format!("lr and wd must be finite and >= 0 (lr {}, wd {})", t.lr, t.wd));
        }
        if t.steps == 0 || !(t.decay > 0.0 && t.decay <= 1.0) {
            return bad("train.steps must be >= 1 and train.decay in (0, 1]".into());
        }
        if self.model.hidden == 0 || self.model.heads == 0 {
            return bad("model.hidden and model.heads must be >= 1".into());
        }
        let g = &self.grid;
        if g.enabled && (g.lr.is_empty() || g.wd.is_empty()) {
            return bad("grid search needs non-empty lr and wd lists".into());
        }
        if g.lr.iter().chain(&g.wd).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("grid values must be finite and >= 0".into());
        }
        if !(g.validation_fraction > 0.0 && g.validation_fraction < 1.0) {
            return bad("grid.validation_fraction must be in (0, 1)".into());
        }
        let e = &self.explain;
        if !(e.alpha > 0.0 && e.alpha < 1.0) || !(e.level > 0.0 && e.level < 1.0) {
            return bad("alpha and level must be in (0, 1)".into());
        }
        let s = &e.segmentation;
        if !(s.min_diameter < s.max_diameter) || s.dilation == 0 || s.gap == 0 {
            return bad("segmentation needs min_diameter < max_diameter, dilation >= 1, gap >= 1".into());
        }
        if e.bins == 0 || e.representatives == 0 {
            return bad("explain.bins and explain.representatives must be >= 1".into());
        }
        if e.fold >= self.folds {
            return bad(format!("explain.fold {} is outside 0..{}", e.fold, self.folds));
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> CliResult<&Path> {
        self.manifest.as_deref().ok_or_else(|| CliError::usage("--manifest is required"))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        crate::io::write_json(path, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let mut file = ExperimentConfig::default();
        file.folds = 3;
        file.train.lr = 0.5;
        file.write(&path).unwrap();
        let o = Overrides { lr: Some(0.01), ..Default::default() };
        let c = ExperimentConfig::resolve(Some(&path), &o).unwrap();
        assert_eq!((c.folds, c.train.lr), (3, 0.01));
    }

    #[test]
    fn partial_file_uses_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"folds": 2, "explain": {"alpha": 0.05}}"#).unwrap();
        let c = ExperimentConfig::resolve(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(c.folds, 2);
        assert_eq!(c.explain.alpha, 0.05);
        assert_eq!(c.explain.bins, 128);
    }

    #[test]
    fn rejects_out_of_domain() {
        let o = Overrides { lr: Some(-1.0), ..Default::default() };
        assert!(ExperimentConfig::resolve(None, &o).is_err());
        let o = Overrides { alpha: Some(1.5), ..Default::default() };
        assert!(ExperimentConfig::resolve(None, &o).is_err());
    }
}
