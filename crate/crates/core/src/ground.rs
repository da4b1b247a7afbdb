//! Ground distances between individual points, excess-mass sinks and the
//! conversions between conditionally negative definite distances and
//! positive definite kernels.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{domain, Error, Result};

/// A cost between two points. Implemented by [`GroundDistance`] and by
/// [`FnGround`] for arbitrary closures.
pub trait GroundMetric: Sync {
    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// Supremum of the distance over its domain, when finite.
    fn upper_bound(&self) -> Option<f64> {
        None
    }
}

/// Wraps an infallible closure as a ground metric.
pub struct FnGround<F>(pub F);

impl<F> GroundMetric for FnGround<F>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok((self.0)(x, y))
    }
}

/// Symmetric distance matrix keyed by point index.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedDistances {
    pub ids: Vec<String>,
    n: usize,
    values: Vec<f64>,
}

impl PrecomputedDistances {
    /// Validates symmetry to `1e-9` relative and symmetrizes by averaging.
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if ids.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(domain("precomputed distances must be a square matrix matching its ids"));
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() {
                    return Err(domain(format!("non-finite distance at ({i}, {j})")));
                }
                if (a - b).abs() > 1e-9 * scale {
                    return Err(domain(format!("asymmetric distance at ({i}, {j}): {a} vs {b}")));
                }
                if a < 0.0 {
                    return Err(domain(format!("negative distance at ({i}, {j})")));
                }
                values[i * n + j] = 0.5 * (a + b);
            }
        }
        Ok(PrecomputedDistances { ids, n, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != 1 {
            return Err(Error::DimensionMismatch(1, x.len()));
        }
        let v = x[0];
        if v < 0.0 || v.fract() != 0.0 || v >= self.n as f64 {
            return Err(Error::IndexOutOfRange { index: v, size: self.n });
        }
        Ok(v as usize)
    }

    fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundKind {
    Euclidean,
    SquaredEuclidean,
    /// 0-1 distance.
    Discrete,
    /// Arc length on the unit circle; points are angles.
    CircleGeodesic,
    /// Points are 1-D indices into the matrix.
    Precomputed(Arc<PrecomputedDistances>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundDistance {
    pub kind: GroundKind,
    /// Wraps the base distance as `min(t, D(x, y))`.
    pub threshold: Option<f64>,
}

impl GroundDistance {
    pub fn new(kind: GroundKind) -> Self {
        GroundDistance { kind, threshold: None }
    }

    pub fn euclidean() -> Self {
        Self::new(GroundKind::Euclidean)
    }

    pub fn squared_euclidean() -> Self {
        Self::new(GroundKind::SquaredEuclidean)
    }

    pub fn discrete() -> Self {
        Self::new(GroundKind::Discrete)
    }

    pub fn circle() -> Self {
        Self::new(GroundKind::CircleGeodesic)
    }

    pub fn precomputed(d: PrecomputedDistances) -> Self {
        Self::new(GroundKind::Precomputed(Arc::new(d)))
    }

    pub fn thresholded(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(domain(format!("threshold must be positive and finite, got {t}")));
        }
        self.threshold = Some(t);
        Ok(self)
    }

    fn base(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.kind {
            GroundKind::Precomputed(m) => Ok(m.get(m.index(x)?, m.index(y)?)),
            _ if x.len() != y.len() => Err(Error::DimensionMismatch(x.len(), y.len())),
            GroundKind::Euclidean => Ok(squared_l2(x, y).sqrt()),
            GroundKind::SquaredEuclidean => Ok(squared_l2(x, y)),
            GroundKind::Discrete => Ok(if x == y { 0.0 } else { 1.0 }),
            GroundKind::CircleGeodesic => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch(1, x.len()));
                }
                Ok(circle_geodesic(x[0], y[0]))
            }
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.base(x, y)?;
        Ok(match self.threshold {
            Some(t) => d.min(t),
            None => d,
        })
    }
}

impl GroundMetric for GroundDistance {
    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.eval(x, y)
    }

    fn upper_bound(&self) -> Option<f64> {
        let base = match &self.kind {
            GroundKind::Euclidean | GroundKind::SquaredEuclidean => None,
            GroundKind::Discrete => Some(1.0),
            GroundKind::CircleGeodesic => Some(PI),
            GroundKind::Precomputed(m) => Some(m.max()),
        };
        match (base, self.threshold) {
            (Some(b), Some(t)) => Some(b.min(t)),
            (None, t) => t,
            (b, None) => b,
        }
    }
}

fn squared_l2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Geodesic distance between two angles on the unit circle.
pub fn circle_geodesic(x: f64, y: f64) -> f64 {
    let d = (x - y).abs().rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// The same distance via the arc-cosine of the dot product of the two unit vectors.
pub fn circle_geodesic_arccos(x: f64, y: f64) -> f64 {
    let dot = x.cos() * y.cos() + x.sin() * y.sin();
    dot.clamp(-1.0, 1.0).acos()
}

/// Destination of excess mass when two sets have different total mass.
#[derive(Debug, Clone, PartialEq)]
pub enum SinkSpec {
    /// A concrete point `p`; excess at `b` costs `D(b, p) - D(p, p) / 2`.
    Point(Vec<f64>),
    /// Every unit of excess costs `beta`, and `D(p, p) = 0`.
    FlatRate(f64),
}

impl SinkSpec {
    pub fn flat(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(domain(format!("flat sink rate must be positive, got {beta}")));
        }
        Ok(SinkSpec::FlatRate(beta))
    }

    pub fn point(p: Vec<f64>) -> Self {
        SinkSpec::Point(p)
    }

    /// `D(b, p)`.
    pub fn distance_to<G: GroundMetric + ?Sized>(&self, ground: &G, b: &[f64]) -> Result<f64> {
        match self {
            SinkSpec::Point(p) => ground.distance(b, p),
            SinkSpec::FlatRate(beta) => Ok(*beta),
        }
    }

    /// `D(p, p)`.
    pub fn self_cost<G: GroundMetric + ?Sized>(&self, ground: &G) -> Result<f64> {
        match self {
            SinkSpec::Point(p) => ground.distance(p, p),
            SinkSpec::FlatRate(_) => Ok(0.0),
        }
    }

    /// The ground kernel anchored at the sink,
    /// `K_p(a, b) = D(a, p) + D(b, p) - D(a, b) - D(p, p)`.
    pub fn ground_kernel<G: GroundMetric + ?Sized>(&self, ground: &G, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.distance_to(ground, a)? + self.distance_to(ground, b)?
            - ground.distance(a, b)?
            - self.self_cost(ground)?)
    }
}

/// `K(x, y) = D(x, x0) + D(y, x0) - D(x, y) - D(x0, x0)`.
///
/// Positive definite exactly when `dist` is conditionally negative definite.
pub fn kernel_from_distance<'a, T: ?Sized, F>(dist: F, x0: &'a T) -> impl Fn(&T, &T) -> f64 + 'a
where
    F: Fn(&T, &T) -> f64 + 'a,
{
    move |x, y| dist(x, x0) + dist(y, x0) - dist(x, y) - dist(x0, x0)
}

/// Induced squared feature-space distance `K(x, x) + K(y, y) - 2 K(x, y)`.
pub fn distance_from_kernel<T: ?Sized, F>(kernel: F) -> impl Fn(&T, &T) -> f64
where
    F: Fn(&T, &T) -> f64,
{
    move |x, y| kernel(x, x) + kernel(y, y) - 2.0 * kernel(x, y)
}
