use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{domain, Result};
use crate::multiset::WeightedPointSet;

/// How class templates relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TemplateSharing {
    /// Every class has its own template; all draw cardinalities from the
    /// full range.
    #[default]
    Distinct,
    /// Classes `2t` and `2t+1` share template `t` and differ only in their
    /// cardinality band (low end vs high end of the range); an unpaired
    /// last class uses the full range. Mass then carries class information
    /// that normalization (or Rubner scaling) discards.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    /// Inclusive cardinality range.
    pub cardinality: (usize, usize),
    pub dim: usize,
    /// Distance between neighbouring template centres, in units of `sigma`.
    pub separation: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    /// Per-instance jitter of template sites, in units of `sigma`.
    #[serde(default = "jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub sharing: TemplateSharing,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn jitter() -> f64 {
    0.1
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 3,
            per_class: 20,
            cardinality: (3, 12),
            dim: 2,
            separation: 5.0,
            sigma: 1.0,
            jitter: 0.1,
            sharing: TemplateSharing::Distinct,
            seed: 0,
        }
    }
}

/// Gaussian-template point sets. Template `t` has `max` sites drawn from
/// `N(c_t, σ²I)` with centres `c_t = t · separation · σ · e₀`; each
/// instance picks a random subset of sites of its cardinality and jitters
/// them. Masses are one per point. Labels are `c0, c1, ...`; groups are
/// unset.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if !(cfg.separation > 0.0) || !(cfg.sigma > 0.0) || !(cfg.jitter >= 0.0) {
        return Err(domain("separation and sigma must be positive, jitter non-negative"));
    }
    let (lo, hi) = cfg.cardinality;
    if lo == 0 || lo > hi {
        return Err(domain(format!("invalid cardinality range {lo}..={hi}")));
    }
    if cfg.dim == 0 || cfg.classes == 0 {
        return Err(domain("need at least one class and one dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let templates = match cfg.sharing {
        TemplateSharing::Distinct => cfg.classes,
        TemplateSharing::Paired => cfg.classes.div_ceil(2),
    };
    let sites: Vec<Vec<Vec<f64>>> = (0..templates)
        .map(|t| {
            (0..hi)
                .map(|_| {
                    (0..cfg.dim)
                        .map(|d| {
                            let c = if d == 0 { t as f64 * cfg.separation * cfg.sigma } else { 0.0 };
                            c + cfg.sigma * unit.sample(&mut rng)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let width = ((hi - lo + 1) / 5).max(1);
    let band = |class: usize| -> (usize, usize) {
        match cfg.sharing {
            TemplateSharing::Distinct => (lo, hi),
            TemplateSharing::Paired if class.is_multiple_of(2) && class + 1 < cfg.classes => (lo, lo + width - 1),
            TemplateSharing::Paired if class % 2 == 1 => (hi + 1 - width, hi),
            TemplateSharing::Paired => (lo, hi),
        }
    };

    let mut items = Vec::with_capacity(cfg.classes * cfg.per_class);
    for class in 0..cfg.classes {
        let t = match cfg.sharing {
            TemplateSharing::Distinct => class,
            TemplateSharing::Paired => class / 2,
        };
        let (blo, bhi) = band(class);
        for k in 0..cfg.per_class {
            let card = rng.random_range(blo..=bhi);
            let mut chosen = sample(&mut rng, hi, card).into_vec();
            chosen.sort_unstable();
            let pts = chosen
                .into_iter()
                .map(|s| sites[t][s].iter().map(|&x| x + cfg.jitter * cfg.sigma * unit.sample(&mut rng)).collect())
                .collect();
            let set = WeightedPointSet::from_points(cfg.dim, pts, None)?
                .with_id(format!("c{class}-{k}"))
                .with_labels(Some(format!("c{class}")), None);
            items.push(set);
        }
    }
    Dataset::new(cfg.dim, items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_within_range() {
        let cfg = SyntheticConfig { classes: 5, per_class: 10, seed: 3, sharing: TemplateSharing::Paired, ..Default::default() };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        for s in &a.items {
            let m = s.total_mass() as usize;
            assert!((3..=12).contains(&m));
            let class = s.class_label.as_deref().unwrap();
            match class {
                "c0" | "c2" => assert!(m <= 4),
                "c1" | "c3" => assert!(m >= 11),
                _ => {}
            }
        }
    }
}
