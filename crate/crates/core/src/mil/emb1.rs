use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::Bag;
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub image_id: String,
    pub patch_id: String,
    pub values: Vec<f32>,
}

/// Serializes records in the little-endian EMB1 layout.
pub fn write_emb1(dim: usize, records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&u32_of(records.len(), "record count")?.to_le_bytes());
    out.extend_from_slice(&u32_of(dim, "dimension")?.to_le_bytes());
    for r in records {
        if r.values.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "patch `{}` has {} values, archive dimension is {dim}",
                r.patch_id,
                r.values.len()
            )));
        }
        for s in [&r.image_id, &r.patch_id] {
            let len = u16::try_from(s.len()).map_err(|_| Error::InvalidArgument(format!("id `{s}` too long")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for v in &r.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u32")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Truncated(format!("{what} at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Truncated(format!("{what} is not UTF-8")))
    }
}

/// Parses an EMB1 archive into `(dimension, records)`.
pub fn read_emb1(bytes: &[u8]) -> Result<(usize, Vec<EmbeddingRecord>)> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Truncated("missing EMB1 magic".into()));
    }
    let count = c.u32("record count")? as usize;
    let dim = c.u32("dimension")? as usize;
    if count == 0 {
        return Err(Error::NoBags);
    }
    if dim == 0 {
        return Err(Error::DimensionMismatch("archive declares zero-length embeddings".into()));
    }
    let mut records = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let image_id = c.string(&format!("record {i} image id"))?;
        let patch_id = c.string(&format!("record {i} patch id"))?;
        let raw = c.take(dim * 4, &format!("record {i} values"))?;
        let values: Vec<f32> =
            raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("patch `{patch_id}` has a non-finite component")));
        }
        records.push(EmbeddingRecord { image_id, patch_id, values });
    }
    if c.pos != bytes.len() {
        return Err(Error::Truncated(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok((dim, records))
}

/// Groups records into bags in manifest order, labelled by the manifest's
/// sorted class list.
pub fn bags_from_records<T: Real>(records: &[EmbeddingRecord], manifest: &Manifest) -> Result<Vec<Bag<T>>> {
    if records.is_empty() {
        return Err(Error::NoBags);
    }
    let classes = manifest.classes();
    let index: HashMap<String, usize> =
        manifest.records.iter().enumerate().map(|(i, r)| (r.image_id(), i)).collect();
    let mut grouped: Vec<Option<Bag<T>>> = vec![None; manifest.records.len()];
    for r in records {
        let &i = index.get(&r.image_id).ok_or_else(|| Error::UnknownImage(r.image_id.clone()))?;
        let meta = &manifest.records[i];
        let bag = grouped[i].get_or_insert_with(|| Bag {
            image_id: r.image_id.clone(),
            patch_ids: Vec::new(),
            instances: Vec::new(),
            clone: meta.clone.clone(),
            label: classes.binary_search(&meta.clone).expect("class list built from manifest"),
            isolate: meta.isolate.clone(),
            preparation: meta.preparation.clone(),
        });
        bag.patch_ids.push(r.patch_id.clone());
        bag.instances.push(r.values.iter().map(|&v| T::of(f64::from(v))).collect());
    }
    Ok(grouped.into_iter().flatten().collect())
}

/// Reads an EMB1 file and groups it into bags against `manifest`.
pub fn import_embeddings<T: Real>(path: &Path, manifest: &Manifest) -> Result<Vec<Bag<T>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (_, records) = read_emb1(&bytes)?;
    bags_from_records(&records, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ManifestRecord;

    fn manifest() -> Manifest {
        let rec = |p: &str, c: &str| ManifestRecord {
            path: p.into(),
            clone: c.into(),
            isolate: "i".into(),
            preparation: "p".into(),
        };
        Manifest { root: ".".into(), records: vec![rec("img1.png", "B"), rec("img0.png", "A")] }
    }

    fn records(dim: usize) -> Vec<EmbeddingRecord> {
        (0..6)
            .map(|i| EmbeddingRecord {
                image_id: format!("img{}", i % 2),
                patch_id: format!("img{}_r0_c{}", i % 2, i / 2),
                values: (0..dim).map(|d| (i * dim + d) as f32 * 0.5).collect(),
            })
            .collect()
    }

    #[test]
    fn roundtrip_and_grouping() {
        let bytes = write_emb1(512, &records(512)).unwrap();
        let (dim, back) = read_emb1(&bytes).unwrap();
        assert_eq!((dim, back.clone()), (512, records(512)));
        let bags: Vec<Bag<f64>> = bags_from_records(&back, &manifest()).unwrap();
        assert_eq!(bags.len(), 2);
        assert_eq!(bags[0].image_id, "img1");
        assert_eq!((bags[0].label, bags[1].label), (1, 0));
        assert!(bags.iter().all(|b| b.len() == 3 && b.dim() == 512));
    }

    #[test]
    fn unknown_image() {
        let mut recs = records(4);
        recs[3].image_id = "ghost".into();
        assert!(matches!(bags_from_records::<f64>(&recs, &manifest()), Err(Error::UnknownImage(id)) if id == "ghost"));
    }

    #[test]
    fn empty_and_truncated() {
        let empty = write_emb1(8, &[]).unwrap();
        assert!(matches!(read_emb1(&empty), Err(Error::NoBags)));
        let bytes = write_emb1(4, &records(4)).unwrap();
        assert!(matches!(read_emb1(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        assert!(matches!(read_emb1(b"EMB"), Err(Error::Truncated(_))));
        let mut bad = write_emb1(4, &records(4)[..1]).unwrap();
        bad[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(read_emb1(&bad), Err(Error::DimensionMismatch(_))));
    }
}
