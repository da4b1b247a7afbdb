use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{domain, Result};

/// How a dataset is split into training and test folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protocol {
    /// Stratified k-fold cross validation.
    Kfold { k: usize, seed: u64 },
    /// One fold per distinct group label.
    LeaveOneGroupOut,
    /// Per repeat, `train_per_class` training and `test_per_class` test
    /// items drawn from every class.
    FixedSplit { train_per_class: usize, test_per_class: usize, repeats: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Split {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn by_class(labels: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        m.entry(l.as_str()).or_default().push(i);
    }
    m
}

impl Protocol {
    pub fn splits(&self, ds: &Dataset) -> Result<Vec<Split>> {
        let n = ds.len();
        match *self {
            Protocol::Kfold { k, seed } => {
                if k < 2 || k > n {
                    return Err(domain(format!("k-fold needs 2 <= k <= {n}, got {k}")));
                }
                let labels = ds.labels()?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // shuffle within classes, then deal round-robin: folds are
                // stratified and their sizes differ by at most one
                let mut order = Vec::with_capacity(n);
                for (_, mut idx) in by_class(&labels) {
                    idx.shuffle(&mut rng);
                    order.extend(idx);
                }
                let mut folds = vec![Vec::new(); k];
                for (pos, i) in order.into_iter().enumerate() {
                    folds[pos % k].push(i);
                }
                Ok(folds
                    .into_iter()
                    .enumerate()
                    .map(|(f, mut test)| {
                        test.sort_unstable();
                        let train = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
                        Split { name: format!("fold{f}"), train, test }
                    })
                    .collect())
            }
            Protocol::LeaveOneGroupOut => {
                let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
                for (i, s) in ds.items.iter().enumerate() {
                    let g = s.group_label.clone().ok_or_else(|| domain(format!("item {:?} has no group", s.id)))?;
                    groups.entry(g).or_default().push(i);
                }
                if groups.len() < 2 {
                    return Err(domain("leave-one-group-out needs at least two groups"));
                }
                Ok(groups
                    .into_iter()
                    .map(|(g, test)| {
                        let train = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
                        Split { name: format!("group {g}"), train, test }
                    })
                    .collect())
            }
            Protocol::FixedSplit { train_per_class, test_per_class, repeats, seed } => {
                let labels = ds.labels()?;
                let classes = by_class(&labels);
                for (c, idx) in &classes {
                    if idx.len() < train_per_class + test_per_class {
                        return Err(domain(format!(
                            "class {c} has {} items, split needs {}",
                            idx.len(),
                            train_per_class + test_per_class
                        )));
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(repeats);
                for r in 0..repeats {
                    let (mut train, mut test) = (Vec::new(), Vec::new());
                    for idx in classes.values() {
                        let mut idx = idx.clone();
                        idx.shuffle(&mut rng);
                        train.extend_from_slice(&idx[..train_per_class]);
                        test.extend_from_slice(&idx[train_per_class..train_per_class + test_per_class]);
                    }
                    train.sort_unstable();
                    test.sort_unstable();
                    out.push(Split { name: format!("repeat{r}"), train, test });
                }
                Ok(out)
            }
        }
    }
}
