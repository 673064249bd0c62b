//! Labelled motion samples and the plain-text manifest that indexes them.
//!
//! Manifest format: a `# affect-manifest 1` line, a header row, then one
//! tab-separated record per sample: `id origin label key_frame file`.
//! Originals have `origin == id`; `file` is relative to the manifest.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use crate::bvh::{read_bvh, write_bvh, Motion, Skeleton};
use crate::{AffectLabel, Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
const MANIFEST_MAGIC: &str = "# affect-manifest";
const MANIFEST_HEADER: &str = "id\torigin\tlabel\tkey_frame\tfile";

/// One labelled motion clip, original or synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// Id of the original this sample derives from; equal to `id` for originals.
    pub origin: String,
    pub label: AffectLabel,
    pub key_frame: usize,
    pub skeleton: Skeleton,
    pub motion: Motion,
}

impl Sample {
    pub fn original(
        id: impl Into<String>,
        label: AffectLabel,
        key_frame: usize,
        skeleton: Skeleton,
        motion: Motion,
    ) -> Sample {
        let id = id.into();
        Sample {
            origin: id.clone(),
            id,
            label,
            key_frame,
            skeleton,
            motion,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.id != self.origin
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub id: String,
    pub origin: String,
    pub label: AffectLabel,
    pub key_frame: usize,
    pub file: String,
}

pub fn write_manifest(records: &[ManifestRecord]) -> String {
    let mut out = format!("{MANIFEST_MAGIC} {MANIFEST_VERSION}\n{MANIFEST_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.id, r.origin, r.label, r.key_frame, r.file
        ));
    }
    out
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestRecord>> {
    let bad = |line: usize, m: &str| Error::format("manifest", format!("line {line}: {m}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == format!("{MANIFEST_MAGIC} {MANIFEST_VERSION}") => {}
        _ => return Err(bad(1, "missing `# affect-manifest 1` line")),
    }
    match lines.next() {
        Some((_, l)) if l.trim() == MANIFEST_HEADER => {}
        Some((i, _)) => return Err(bad(i + 1, "expected header row")),
        None => return Err(bad(2, "expected header row")),
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(i + 1, "expected 5 tab-separated fields"));
        }
        let label = f[2].parse().map_err(|_| bad(i + 1, "unknown label"))?;
        let key_frame = f[3].parse().map_err(|_| bad(i + 1, "bad key frame"))?;
        if !seen.insert(f[0].to_string()) {
            return Err(bad(i + 1, "duplicate id"));
        }
        records.push(ManifestRecord {
            id: f[0].into(),
            origin: f[1].into(),
            label,
            key_frame,
            file: f[4].into(),
        });
    }
    Ok(records)
}

/// Checks ids are unique, every synthetic resolves to an original with the
/// same label, and key frames lie inside their clips.
pub fn validate_samples(samples: &[Sample]) -> Result<()> {
    let mut originals = BTreeMap::new();
    for s in samples.iter().filter(|s| !s.is_synthetic()) {
        if originals.insert(s.id.as_str(), s.label).is_some() {
            return Err(Error::Config(format!("duplicate sample id `{}`", s.id)));
        }
    }
    let mut ids = HashSet::new();
    for s in samples {
        if !ids.insert(s.id.as_str()) {
            return Err(Error::Config(format!("duplicate sample id `{}`", s.id)));
        }
        if s.key_frame >= s.motion.frame_count() {
            return Err(Error::Config(format!(
                "{}: key frame {} outside {} frames",
                s.id,
                s.key_frame,
                s.motion.frame_count()
            )));
        }
        if s.motion.channel_count() != s.skeleton.channel_count() {
            return Err(Error::ShapeMismatch(format!("{}: motion does not fit skeleton", s.id)));
        }
        if s.is_synthetic() {
            match originals.get(s.origin.as_str()) {
                Some(&l) if l == s.label => {}
                Some(_) => {
                    return Err(Error::Config(format!(
                        "{}: label differs from origin `{}`",
                        s.id, s.origin
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "{}: origin `{}` is not an original sample",
                        s.id, s.origin
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Loads every sample listed in a manifest.
pub fn load_samples(manifest: &Path) -> Result<Vec<Sample>> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let samples = read_manifest(&text)?
        .into_iter()
        .map(|r| {
            let (skeleton, motion) = read_bvh(base.join(&r.file))?;
            Ok(Sample {
                id: r.id,
                origin: r.origin,
                label: r.label,
                key_frame: r.key_frame,
                skeleton,
                motion,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    validate_samples(&samples)?;
    Ok(samples)
}

/// File name used for a sample id; characters outside `[A-Za-z0-9._~-]`
/// become `_`.
pub fn file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._~-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.bvh")
}

/// Writes one BVH file per sample plus `manifest.tsv` into `dir`. Returns
/// every written path, manifest last.
pub fn save_samples(dir: &Path, samples: &[Sample]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(samples.len());
    let mut paths = Vec::with_capacity(samples.len() + 1);
    for s in samples {
        let file = file_name(&s.id);
        let path = dir.join(&file);
        std::fs::write(&path, write_bvh(&s.skeleton, &s.motion)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
        records.push(ManifestRecord {
            id: s.id.clone(),
            origin: s.origin.clone(),
            label: s.label,
            key_frame: s.key_frame,
            file,
        });
    }
    let manifest = dir.join("manifest.tsv");
    std::fs::write(&manifest, write_manifest(&records)).map_err(|e| Error::io(&manifest, e))?;
    paths.push(manifest);
    Ok(paths)
}

/// Number of originals per class, indexed by [`AffectLabel::index`].
pub fn class_counts<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> [usize; AffectLabel::COUNT] {
    let mut counts = [0; AffectLabel::COUNT];
    for s in samples {
        counts[s.label.index()] += 1;
    }
    counts
}
