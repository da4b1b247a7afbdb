//! Finitely supported weighted multisets ("signatures").
//!
//! A [`WeightedPointSet`] is kept in canonical form: support points sorted
//! lexicographically, duplicate coordinates merged by summing masses and
//! zero-mass points dropped. Two sets built from the same `(point, mass)`
//! pairs in any order are therefore identical, which makes the pointwise
//! set algebra a simple merge of two sorted lists.

use std::cmp::Ordering;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    dim: usize,
    /// Row-major coordinates, `dim` per support point.
    coords: Vec<f64>,
    masses: Vec<f64>,
    pub id: String,
    pub class_label: Option<String>,
    pub group_label: Option<String>,
}

fn canonical_coord(x: f64) -> f64 {
    // -0.0 and 0.0 must merge.
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

pub(crate) fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl WeightedPointSet {
    /// The empty multiset in `dim` dimensions.
    pub fn empty(dim: usize) -> Self {
        WeightedPointSet {
            dim,
            coords: Vec::new(),
            masses: Vec::new(),
            id: String::new(),
            class_label: None,
            group_label: None,
        }
    }

    /// Builds a canonical set from points and masses.
    pub fn new(dim: usize, points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if points.len() != masses.len() {
            return Err(domain(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        let mut pairs = Vec::with_capacity(points.len());
        for (i, (p, m)) in points.into_iter().zip(masses).enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(dim, p.len()));
            }
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidMass { index: i, mass: m });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteCoordinate(i));
            }
            if m > 0.0 {
                pairs.push((p.into_iter().map(canonical_coord).collect::<Vec<_>>(), m));
            }
        }
        pairs.sort_by(|a, b| cmp_points(&a.0, &b.0));

        let mut coords = Vec::with_capacity(pairs.len() * dim);
        let mut out_masses: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut last: Option<Vec<f64>> = None;
        for (p, m) in pairs {
            if last.as_deref() == Some(p.as_slice()) {
                *out_masses.last_mut().unwrap() += m;
            } else {
                coords.extend_from_slice(&p);
                out_masses.push(m);
                last = Some(p);
            }
        }
        let set = WeightedPointSet {
            dim,
            coords,
            masses: out_masses,
            id: String::new(),
            class_label: None,
            group_label: None,
        };
        if !set.total_mass().is_finite() {
            return Err(domain("total mass is not finite"));
        }
        Ok(set)
    }

    /// Builds a set from points, using unit masses when `masses` is `None`.
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>, masses: Option<Vec<f64>>) -> Result<Self> {
        let masses = masses.unwrap_or_else(|| vec![1.0; points.len()]);
        Self::new(dim, points, masses)
    }

    /// Convenience for one-dimensional sets given as `(coordinate, mass)` pairs.
    pub fn from_1d(pairs: &[(f64, f64)]) -> Result<Self> {
        let (pts, ms): (Vec<_>, Vec<_>) = pairs.iter().map(|&(x, m)| (vec![x], m)).unzip();
        Self::new(1, pts, ms)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_labels(mut self, class_label: Option<String>, group_label: Option<String>) -> Self {
        self.class_label = class_label;
        self.group_label = group_label;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1)).take(self.masses.len())
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    /// Density at an arbitrary coordinate (0 off the support).
    pub fn density(&self, x: &[f64]) -> f64 {
        let mut lo = 0usize;
        let mut hi = self.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            match cmp_points(self.point(mid), x) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return self.masses[mid],
            }
        }
        0.0
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Rescales masses so that the total is 1.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(domain("cannot normalize a set with zero total mass"));
        }
        Ok(self.scale_masses(1.0 / total))
    }

    /// Multiplies every mass by `c > 0`.
    pub fn scale_masses(&self, c: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.masses {
            *m *= c;
        }
        out
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    /// Pointwise combination of densities over the union of supports.
    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_dim(other)?;
        let dim = self.dim;
        let mut coords = Vec::new();
        let mut masses = Vec::new();
        let (mut i, mut j) = (0, 0);
        let mut push = |p: &[f64], m: f64| {
            if m > 0.0 {
                coords.extend_from_slice(p);
                masses.push(m);
            }
        };
        while i < self.len() || j < other.len() {
            let ord = match (i < self.len(), j < other.len()) {
                (true, true) => cmp_points(self.point(i), other.point(j)),
                (true, false) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    push(self.point(i), f(self.masses[i], 0.0));
                    i += 1;
                }
                Ordering::Greater => {
                    push(other.point(j), f(0.0, other.masses[j]));
                    j += 1;
                }
                Ordering::Equal => {
                    push(self.point(i), f(self.masses[i], other.masses[j]));
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(WeightedPointSet {
            dim,
            coords,
            masses,
            id: String::new(),
            class_label: None,
            group_label: None,
        })
    }

    /// Pointwise minimum of densities.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::min)
    }

    /// Pointwise maximum of densities.
    pub fn unite(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::max)
    }

    /// Pointwise sum of densities.
    pub fn sum_sets(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    /// `true` when every density of `self` is at most that of `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self
                .points()
                .zip(&self.masses)
                .all(|(p, &m)| m <= other.density(p))
    }

    /// Same support and masses; ids and labels are ignored.
    pub fn same_measure(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coords == other.coords && self.masses == other.masses
    }
}
