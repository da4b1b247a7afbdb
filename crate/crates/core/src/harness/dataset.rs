use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::multiset::WeightedPointSet;

#[derive(Debug, Serialize, Deserialize)]
struct DatasetFile {
    dimension: usize,
    items: Vec<ItemFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ItemFile {
    id: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    group: Option<String>,
    points: Vec<Vec<f64>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

/// A list of labelled point sets sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dimension: usize,
    pub items: Vec<WeightedPointSet>,
}

impl Dataset {
    /// Checks dimensions and id uniqueness.
    pub fn new(dimension: usize, items: Vec<WeightedPointSet>) -> Result<Self> {
        let mut seen = HashSet::new();
        for it in &items {
            if it.dim() != dimension {
                return Err(Error::DimensionMismatch(it.dim(), dimension));
            }
            if !seen.insert(it.id.as_str()) {
                return Err(domain(format!("duplicate item id {:?}", it.id)));
            }
        }
        Ok(Dataset { dimension, items })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(s)?;
        let items = file
            .items
            .into_iter()
            .enumerate()
            .map(|(k, it)| {
                WeightedPointSet::from_points(file.dimension, it.points, it.weights)
                    .map(|s| s.with_id(it.id).with_labels(it.label, it.group))
                    .map_err(|e| Error::Parse(format!("item {k}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(file.dimension, items)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = DatasetFile {
            dimension: self.dimension,
            items: self
                .items
                .iter()
                .map(|s| ItemFile {
                    id: s.id.clone(),
                    label: s.class_label.clone(),
                    group: s.group_label.clone(),
                    points: s.points().map(<[f64]>::to_vec).collect(),
                    weights: Some(s.masses().to_vec()),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.items.iter().map(|s| s.id.clone()).collect()
    }

    /// Class labels; every item must have one.
    pub fn labels(&self) -> Result<Vec<String>> {
        self.items
            .iter()
            .map(|s| s.class_label.clone().ok_or_else(|| domain(format!("item {:?} has no class label", s.id))))
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { dimension: self.dimension, items: idx.iter().map(|&i| self.items[i].clone()).collect() }
    }

    pub fn normalized(&self) -> Result<Dataset> {
        let items = self
            .items
            .iter()
            .map(|s| {
                let (id, c, g) = (s.id.clone(), s.class_label.clone(), s.group_label.clone());
                s.normalize().map(|n| n.with_id(id).with_labels(c, g))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { dimension: self.dimension, items })
    }
}

/// Fixed-length vectors for linear/Gaussian baselines: each instance's
/// support points in lexicographic order, concatenated, then zero-padded
/// to the longest instance. Masses are not encoded.
pub fn baseline_concat_vectors(ds: &Dataset) -> Vec<Vec<f64>> {
    let width = ds.items.iter().map(|s| s.len() * s.dim()).max().unwrap_or(0);
    ds.items
        .iter()
        .map(|s| {
            // canonical order is already lexicographic
            let mut v: Vec<f64> = s.points().flatten().copied().collect();
            v.resize(width, 0.0);
            v
        })
        .collect()
}

/// A `(class, group)` cell that had fewer items than requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shortfall {
    pub class: String,
    pub group: String,
    pub available: usize,
    pub requested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub selected: usize,
    pub shortfalls: Vec<Shortfall>,
}

/// Draws `per_cell` items without replacement from every `(class, group)`
/// cell. Cells with fewer items contribute all of them and are reported.
pub fn sample_balanced(ds: &Dataset, per_cell: usize, seed: u64) -> Result<(Dataset, SampleReport)> {
    let mut cells: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.items.iter().enumerate() {
        let class = s.class_label.clone().ok_or_else(|| domain(format!("item {:?} has no class label", s.id)))?;
        let group = s.group_label.clone().unwrap_or_default();
        cells.entry((class, group)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    let mut shortfalls = Vec::new();
    for ((class, group), mut idx) in cells {
        if idx.len() < per_cell {
            shortfalls.push(Shortfall { class, group, available: idx.len(), requested: per_cell });
        }
        idx.shuffle(&mut rng);
        idx.truncate(per_cell);
        idx.sort_unstable();
        chosen.extend(idx);
    }
    chosen.sort_unstable();
    for s in &shortfalls {
        log::warn!("class {} / group {}: {} of {} requested items", s.class, s.group, s.available, s.requested);
    }
    let report = SampleReport { selected: chosen.len(), shortfalls };
    Ok((ds.subset(&chosen), report))
}
