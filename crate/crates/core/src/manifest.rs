//! JSON-lines image manifest: one `{path, clone, isolate, preparation}` per line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_grayscale, ImageMeta, RawImage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub clone: String,
    pub isolate: String,
    pub preparation: String,
}

impl ManifestRecord {
    /// Image id: the file stem of `path`.
    pub fn image_id(&self) -> String {
        Path::new(&self.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records: Vec<ManifestRecord> = parse_jsonl(&text)?;
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if !seen.insert(r.image_id()) {
                return Err(Error::InvalidArgument(format!("duplicate image id `{}` in manifest", r.image_id())));
            }
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for r in &self.records {
            writeln!(f, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        let p = Path::new(&record.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn find(&self, image_id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.image_id() == image_id)
    }

    pub fn load(&self, record: &ManifestRecord) -> Result<RawImage> {
        let path = self.resolve(record);
        let (pixels, channels, depth) = load_grayscale(&path)?;
        Ok(RawImage {
            pixels,
            meta: ImageMeta {
                id: record.image_id(),
                source: path.display().to_string(),
                clone: record.clone.clone(),
                isolate: record.isolate.clone(),
                preparation: record.preparation.clone(),
                channels,
                depth,
            },
        })
    }

    /// Sorted distinct clone labels.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.records.iter().map(|r| r.clone.clone()).collect();
        c.sort();
        c.dedup();
        c
    }
}

pub fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
