//! Exhaustive nearest-neighbour ranking and dataset ingestion.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{CompareError, IngestError};
use crate::image::ImageFormat;
use crate::index::FeatureIndex;
use crate::metric::Metric;
use crate::pipeline::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f64,
}

impl Neighbor {
    /// Ascending distance, then ascending id.
    pub fn rank_order(&self, other: &Neighbor) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    /// Query id or path.
    pub query: String,
    pub neighbors: Vec<Neighbor>,
}

fn check_index(query: &FeatureVector, index: &FeatureIndex) -> Result<(), CompareError> {
    if query.fingerprint != index.fingerprint() {
        return Err(CompareError::Fingerprint {
            expected: index.fingerprint(),
            found: query.fingerprint,
        });
    }
    if query.dim() != index.dim() {
        return Err(CompareError::Dim(index.dim(), query.dim()));
    }
    Ok(())
}

/// Distances from `query` to every entry, in rank order.
pub fn rank_all(
    query: &FeatureVector,
    index: &FeatureIndex,
    metric: Metric,
) -> Result<Vec<Neighbor>, CompareError> {
    check_index(query, index)?;
    let mut all: Vec<Neighbor> = index
        .entries()
        .iter()
        .map(|e| Neighbor {
            id: e.id,
            distance: metric.eval(&query.values, &e.vector.values),
        })
        .collect();
    all.sort_unstable_by(Neighbor::rank_order);
    Ok(all)
}

/// The `k` closest entries by linear scan, sorted ascending with ties
/// broken by id. Returns everything when `k` exceeds the index size.
pub fn knn(
    query: &FeatureVector,
    index: &FeatureIndex,
    k: usize,
    metric: Metric,
) -> Result<Vec<Neighbor>, CompareError> {
    check_index(query, index)?;
    let mut all: Vec<Neighbor> = index
        .entries()
        .par_iter()
        .map(|e| Neighbor {
            id: e.id,
            distance: metric.eval(&query.values, &e.vector.values),
        })
        .collect();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, Neighbor::rank_order);
        all.truncate(k);
    }
    all.sort_unstable_by(Neighbor::rank_order);
    Ok(all)
}

/// How class labels are derived from a dataset tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Label is the name of the file's parent directory.
    ClassDirs,
    /// Numeric file stems; label is `stem / 100`.
    Wang,
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classdirs" | "folder-per-class" => Ok(Layout::ClassDirs),
            "wang" => Ok(Layout::Wang),
            other => Err(format!("unknown layout `{other}` (classdirs, wang)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPath {
    pub path: PathBuf,
    pub label: String,
}

/// Label for a Wang/Corel file name such as `342.jpg`.
pub fn wang_label(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    let n: u64 = stem.parse().ok()?;
    Some((n / 100).to_string())
}

/// Lists image files under `root` with their class labels, sorted by path.
pub fn ingest(root: &Path, layout: Layout) -> Result<Vec<LabeledPath>, IngestError> {
    std::fs::read_dir(root).map_err(|source| IngestError::Root {
        path: root.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| IngestError::Walk(e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let is_image = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .and_then(ImageFormat::from_extension)
            .is_some();
        if is_image {
            files.push(entry.into_path());
        }
    }
    files.sort();

    let mut out = Vec::with_capacity(files.len());
    let mut offenders = Vec::new();
    for path in files {
        let label = match layout {
            Layout::ClassDirs => path
                .parent()
                .and_then(Path::file_name)
                .map(|n| n.to_string_lossy().into_owned()),
            Layout::Wang => wang_label(&path),
        };
        match label {
            Some(label) => out.push(LabeledPath { path, label }),
            None => offenders.push(path.display().to_string()),
        }
    }
    if !offenders.is_empty() {
        return Err(IngestError::NonNumeric(offenders));
    }
    Ok(out)
}
