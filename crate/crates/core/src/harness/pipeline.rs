use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::gram::{assemble_matrix, auto_scale, cross_matrix, idk, par_map, rbf_values, GramKind, GramMatrix};
use crate::ground::{GroundDistance, SinkSpec};
use crate::linalg::{max_abs, Matrix};
use crate::matrix_io::load_precomputed;
use crate::multiset::WeightedPointSet;
use crate::transform::{biotope, nested, ZERO_DIAGONAL_TOL};
use crate::transport::{emd, emd_rubner, emdhat_alpha, emdhat_p, emi};

/// Ground distance by name (`euclidean`, `sqeuclidean`, `discrete`,
/// `circle`, `file:PATH`) plus an optional threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundSpec {
    pub kind: String,
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl GroundSpec {
    pub fn build(&self) -> Result<GroundDistance> {
        let base = match self.kind.as_str() {
            "euclidean" => GroundDistance::euclidean(),
            "sqeuclidean" | "squared_euclidean" => GroundDistance::squared_euclidean(),
            "discrete" => GroundDistance::discrete(),
            "circle" => GroundDistance::circle(),
            other => match other.strip_prefix("file:") {
                Some(path) => GroundDistance::precomputed(load_precomputed(path)?),
                None => return Err(Error::Parse(format!("unknown ground distance {other:?}"))),
            },
        };
        match self.threshold {
            Some(t) => base.thresholded(t),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Emd,
    EmdRubner,
    EmdhatAlpha,
    EmdhatSink,
    /// Biotope transform of `emdhat-sink` anchored at the empty set.
    Emjd,
    Emi,
    Idk,
}

impl Variant {
    fn raw_kind(self) -> GramKind {
        match self {
            Variant::Emi | Variant::Idk => GramKind::Kernel,
            _ => GramKind::Distance,
        }
    }

    fn needs_sink(self) -> bool {
        matches!(self, Variant::EmdhatSink | Variant::Emjd | Variant::Emi)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Parse(format!("unknown variant {s:?} (emd|emd-rubner|emdhat-alpha|emdhat-sink|emjd|emi|idk)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SinkConfig {
    Flat(f64),
    Point(Vec<f64>),
}

impl SinkConfig {
    pub fn build(&self) -> Result<SinkSpec> {
        match self {
            SinkConfig::Flat(b) => SinkSpec::flat(*b),
            SinkConfig::Point(p) => Ok(SinkSpec::point(p.clone())),
        }
    }
}

/// Elementwise stage between the raw evaluations and the RBF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TransformStage {
    #[default]
    None,
    Tanimoto,
    Nested(u32),
    /// Biotope transform anchored at the empty set.
    Biotope,
}

impl FromStr for TransformStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TransformStage::None),
            "tanimoto" => Ok(TransformStage::Tanimoto),
            "biotope" => Ok(TransformStage::Biotope),
            other => other
                .strip_prefix("nested:")
                .and_then(|n| n.parse().ok())
                .map(TransformStage::Nested)
                .ok_or_else(|| Error::Parse(format!("unknown transform {other:?} (none|tanimoto|nested:N|biotope)"))),
        }
    }
}

impl TryFrom<String> for TransformStage {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for TransformStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformStage::None => write!(f, "none"),
            TransformStage::Tanimoto => write!(f, "tanimoto"),
            TransformStage::Nested(n) => write!(f, "nested:{n}"),
            TransformStage::Biotope => write!(f, "biotope"),
        }
    }
}

impl From<TransformStage> for String {
    fn from(t: TransformStage) -> String {
        t.to_string()
    }
}

/// `none`, `auto` (u from the training distances) or a fixed positive `u`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RbfStage {
    #[default]
    None,
    Auto,
    Fixed(f64),
}

impl FromStr for RbfStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RbfStage::None),
            "auto" => Ok(RbfStage::Auto),
            other => match other.parse::<f64>() {
                Ok(u) if u > 0.0 && u.is_finite() => Ok(RbfStage::Fixed(u)),
                _ => Err(Error::Parse(format!("rbf must be none, auto or a positive number, got {other:?}"))),
            },
        }
    }
}

impl TryFrom<String> for RbfStage {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for RbfStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RbfStage::None => write!(f, "none"),
            RbfStage::Auto => write!(f, "auto"),
            RbfStage::Fixed(u) => write!(f, "{u}"),
        }
    }
}

impl From<RbfStage> for String {
    fn from(r: RbfStage) -> String {
        r.to_string()
    }
}

/// Ground distance, set-level variant, transform and RBF stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub ground: GroundSpec,
    pub variant: Variant,
    /// Defaults to a flat rate equal to the ground threshold.
    #[serde(default)]
    pub sink: Option<SinkConfig>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub idk_u: Option<f64>,
    #[serde(default)]
    pub transform: TransformStage,
    #[serde(default)]
    pub rbf: RbfStage,
    /// Normalize every set to unit mass first.
    #[serde(default)]
    pub normalize: bool,
}

impl PipelineSpec {
    pub fn new(ground: GroundSpec, variant: Variant) -> Self {
        PipelineSpec {
            ground,
            variant,
            sink: None,
            alpha: None,
            idk_u: None,
            transform: TransformStage::None,
            rbf: RbfStage::None,
            normalize: false,
        }
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("pipeline spec serializes")))
    }
}

/// A validated, ready-to-evaluate [`PipelineSpec`].
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub spec: PipelineSpec,
    ground: Arc<GroundDistance>,
    sink: Option<SinkSpec>,
    biotope: bool,
}

impl Pipeline {
    pub fn new(spec: PipelineSpec) -> Result<Self> {
        let ground = spec.ground.build()?;
        let sink = if spec.variant.needs_sink() {
            Some(match (&spec.sink, spec.ground.threshold) {
                (Some(s), _) => s.build()?,
                (None, Some(t)) => SinkSpec::flat(t)?,
                (None, None) => {
                    return Err(domain("pipeline stage 'variant': needs a sink or a thresholded ground distance"))
                }
            })
        } else {
            None
        };
        if spec.variant == Variant::EmdhatAlpha && spec.alpha.is_none() {
            return Err(domain("pipeline stage 'variant': emdhat-alpha needs alpha"));
        }
        if spec.variant == Variant::Idk && !spec.idk_u.is_some_and(|u| u > 0.0) {
            return Err(domain("pipeline stage 'variant': idk needs a positive idk_u"));
        }
        let raw = spec.variant.raw_kind();
        match spec.transform {
            TransformStage::Tanimoto | TransformStage::Nested(_) if raw != GramKind::Kernel => {
                return Err(domain("pipeline stage 'transform': tanimoto/nested apply to kernel variants (emi, idk)"))
            }
            TransformStage::Biotope if raw != GramKind::Distance || spec.variant == Variant::Emjd => {
                return Err(domain("pipeline stage 'transform': biotope applies to distance variants other than emjd"))
            }
            _ => {}
        }
        if spec.rbf != RbfStage::None && raw != GramKind::Distance {
            return Err(domain("pipeline stage 'rbf': the RBF stage needs a distance"));
        }
        let biotope = spec.variant == Variant::Emjd || spec.transform == TransformStage::Biotope;
        Ok(Pipeline { spec, ground: Arc::new(ground), sink, biotope })
    }

    pub fn ground(&self) -> &GroundDistance {
        &self.ground
    }

    /// Kind of the matrix before the RBF stage.
    pub fn pre_rbf_kind(&self) -> GramKind {
        self.spec.variant.raw_kind()
    }

    /// Kind of the final matrix.
    pub fn output_kind(&self) -> GramKind {
        if self.spec.rbf == RbfStage::None {
            self.pre_rbf_kind()
        } else {
            GramKind::Kernel
        }
    }

    fn prepare(&self, items: &[WeightedPointSet]) -> Result<Vec<WeightedPointSet>> {
        if self.spec.normalize {
            items
                .iter()
                .map(|s| {
                    s.normalize()
                        .map(|n| n.with_id(s.id.clone()).with_labels(s.class_label.clone(), s.group_label.clone()))
                })
                .collect()
        } else {
            Ok(items.to_vec())
        }
    }

    /// The set-level value before any transform.
    pub fn raw_value(&self, a: &WeightedPointSet, b: &WeightedPointSet) -> Result<f64> {
        let g = self.ground.as_ref();
        match self.spec.variant {
            Variant::Emd => Ok(emd(a, b, g)?.cost),
            Variant::EmdRubner => emd_rubner(a, b, g),
            Variant::EmdhatAlpha => emdhat_alpha(a, b, g, self.spec.alpha.unwrap_or(0.0)),
            Variant::EmdhatSink | Variant::Emjd => emdhat_p(a, b, g, self.sink.as_ref().expect("validated")),
            Variant::Emi => emi(a, b, g, self.sink.as_ref().expect("validated")),
            Variant::Idk => idk(a, b, g, self.spec.idk_u.unwrap_or(1.0)),
        }
    }

    fn anchors(&self, items: &[WeightedPointSet]) -> Result<Vec<f64>> {
        if !self.biotope {
            return Ok(vec![0.0; items.len()]);
        }
        par_map(items, |s| self.raw_value(s, &WeightedPointSet::empty(s.dim()))).into_iter().collect()
    }

    fn diag(&self, items: &[WeightedPointSet]) -> Result<Vec<f64>> {
        match self.pre_rbf_kind() {
            GramKind::Distance => Ok(vec![0.0; items.len()]),
            GramKind::Kernel => par_map(items, |s| self.raw_value(s, s)).into_iter().collect(),
        }
    }

    /// Applies the transform stage to one entry.
    fn entry(&self, v: f64, dx: f64, dy: f64, ax: f64, ay: f64, zero_tol: f64) -> Result<f64> {
        if self.biotope {
            return biotope(v, 0.0, 0.0, ax, ay, 0.0);
        }
        match self.spec.transform {
            TransformStage::Tanimoto => nested(v, dx, dy, 1, zero_tol),
            TransformStage::Nested(n) => nested(v, dx, dy, n, zero_tol),
            _ => Ok(v),
        }
    }

    /// Square matrix over `items` after the transform stage, before the RBF.
    pub fn pre_rbf_matrix(&self, items: &[WeightedPointSet]) -> Result<Matrix> {
        let items = self.prepare(items)?;
        let raw = assemble_matrix(&items, |a, b| self.raw_value(a, b))?;
        let anchors = self.anchors(&items)?;
        let zt = ZERO_DIAGONAL_TOL * max_abs(&raw);
        let n = items.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self
                    .entry(raw[(i, j)], raw[(i, i)], raw[(j, j)], anchors[i], anchors[j], zt)
                    .map_err(|e| Error::Entry { i, j, source: Box::new(e) })?;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    /// `rows × cols` block after the transform stage, before the RBF.
    pub fn pre_rbf_cross(&self, rows: &[WeightedPointSet], cols: &[WeightedPointSet]) -> Result<Matrix> {
        let rows = self.prepare(rows)?;
        let cols = self.prepare(cols)?;
        let raw = cross_matrix(&rows, &cols, |a, b| self.raw_value(a, b))?;
        let (dr, dc) = (self.diag(&rows)?, self.diag(&cols)?);
        let (ar, ac) = (self.anchors(&rows)?, self.anchors(&cols)?);
        let scale = dr.iter().chain(&dc).fold(max_abs(&raw), |a, v| a.max(v.abs()));
        let zt = ZERO_DIAGONAL_TOL * scale;
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for i in 0..rows.len() {
            for j in 0..cols.len() {
                out[(i, j)] = self
                    .entry(raw[(i, j)], dr[i], dc[j], ar[i], ac[j], zt)
                    .map_err(|e| Error::Entry { i, j, source: Box::new(e) })?;
            }
        }
        Ok(out)
    }

    /// The RBF scale for a pre-RBF matrix, computed on `train` rows.
    pub fn rbf_scale(&self, pre: &Matrix, train: &[usize]) -> Result<Option<f64>> {
        match self.spec.rbf {
            RbfStage::None => Ok(None),
            RbfStage::Fixed(u) => Ok(Some(u)),
            RbfStage::Auto => auto_scale(pre, train).map(Some),
        }
    }

    pub fn apply_rbf(&self, pre: &Matrix, u: Option<f64>) -> Matrix {
        match u {
            Some(u) => rbf_values(pre, u),
            None => pre.clone(),
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "variant={} ground={}{} transform={} rbf={} spec={}",
            serde_json::to_value(self.spec.variant).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            self.spec.ground.kind,
            self.spec.ground.threshold.map(|t| format!("@{t}")).unwrap_or_default(),
            self.spec.transform,
            self.spec.rbf,
            self.spec.hash()
        )
    }

    /// Full Gram over `items`; an automatic RBF scale uses all rows.
    pub fn gram(&self, items: &[WeightedPointSet]) -> Result<(GramMatrix, Option<f64>)> {
        let pre = self.pre_rbf_matrix(items)?;
        let all: Vec<usize> = (0..items.len()).collect();
        let u = self.rbf_scale(&pre, &all)?;
        let m = self.apply_rbf(&pre, u);
        let mut prov = self.describe();
        if let Some(u) = u {
            prov.push_str(&format!(" u={u}"));
        }
        let g = GramMatrix::new(m, items.iter().map(|s| s.id.clone()).collect(), self.output_kind(), prov)?;
        Ok((g, u))
    }
}
