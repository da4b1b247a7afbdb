use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ingest_posture, sample_balanced, Dataset, Pipeline, PipelineSpec, Protocol, Split};
use crate::error::{domain, Error, Result};
use crate::gram::{diagnose, par_map, GramKind, GramMatrix, DEFAULT_TOL};
use crate::linalg::Matrix;
use crate::svm::{train_one_vs_all, CorrectionMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Json,
    /// Raw posture CSV, ingested on load.
    Posture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub path: String,
    #[serde(default)]
    pub format: DatasetFormat,
}

/// Balanced subsampling applied after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub per_class_per_group: usize,
    pub seed: u64,
}

fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub sample: Option<SampleSpec>,
    pub pipeline: PipelineSpec,
    #[serde(default)]
    pub correction: CorrectionMode,
    pub protocol: Protocol,
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
}

/// SHA-256 of the spec's JSON serialization.
pub fn spec_hash(spec: &ExperimentSpec) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(spec).expect("experiment spec serializes")))
}

/// `counts[actual][predicted]` over `classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

/// Definiteness of a training Gram, without the full spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSummary {
    pub size: usize,
    pub min_eig: f64,
    pub max_abs_eig: f64,
    pub is_psd: bool,
    pub negative_eigenvalues: usize,
    pub centered_max_eig: f64,
    pub is_cnd: bool,
    pub top1_fraction: f64,
    pub top10_fraction: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    /// Percent correct on the test items.
    pub accuracy: f64,
    pub confusion: Confusion,
    pub gram_diag: GramSummary,
    pub u: Option<f64>,
    pub train_size: usize,
    pub test_size: usize,
    /// Whether every SMO run reached tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub gram_seconds: f64,
    pub fold_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec_hash: String,
    pub provenance: String,
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over folds.
    pub std_accuracy: f64,
    pub timings: Timings,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| domain(format!("stage '{name}': {e}")))
}

/// Loads the dataset named in `spec` and runs it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    let ds = stage(
        "dataset",
        match spec.dataset.format {
            DatasetFormat::Json => Dataset::load(&spec.dataset.path),
            DatasetFormat::Posture => ingest_posture(&spec.dataset.path).map(|(d, _)| d),
        },
    )?;
    let ds = match &spec.sample {
        Some(s) => stage("sample", sample_balanced(&ds, s.per_class_per_group, s.seed))?.0,
        None => ds,
    };
    run_on_dataset(spec, &ds)
}

/// Runs `spec` on an already loaded dataset (the `dataset` and `sample`
/// fields are then only part of the hash).
pub fn run_on_dataset(spec: &ExperimentSpec, ds: &Dataset) -> Result<Report> {
    let start = Instant::now();
    let hash = spec_hash(spec);
    let pipeline = stage("pipeline", Pipeline::new(spec.pipeline.clone()))?;
    if pipeline.output_kind() != GramKind::Kernel {
        return Err(domain("stage 'pipeline': produces a distance; add an rbf stage to train an SVM"));
    }
    let labels = stage("labels", ds.labels())?;
    let mut classes = labels.clone();
    classes.sort();
    classes.dedup();
    let splits = stage("protocol", spec.protocol.splits(ds))?;

    let t_gram = Instant::now();
    let pre = stage("gram", pipeline.pre_rbf_matrix(&ds.items))?;
    let gram_seconds = t_gram.elapsed().as_secs_f64();
    let provenance = format!("{} experiment={hash}", pipeline.describe());

    let folds = par_map(&splits, |split| {
        let t = Instant::now();
        run_fold(spec, &pipeline, &pre, ds, &labels, &classes, split, &provenance).map(|r| (r, t.elapsed().as_secs_f64()))
    });
    let mut reports = Vec::with_capacity(folds.len());
    let mut fold_seconds = Vec::with_capacity(folds.len());
    for (split, f) in splits.iter().zip(folds) {
        let (r, secs) = f.map_err(|e| domain(format!("{}: {e}", split.name)))?;
        reports.push(r);
        fold_seconds.push(secs);
    }
    let accs: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let std = if accs.len() > 1 {
        (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (accs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Report {
        spec_hash: hash,
        provenance,
        folds: reports,
        mean_accuracy: mean,
        std_accuracy: std,
        timings: Timings { gram_seconds, fold_seconds, total_seconds: start.elapsed().as_secs_f64() },
    })
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    spec: &ExperimentSpec,
    pipeline: &Pipeline,
    pre: &Matrix,
    ds: &Dataset,
    labels: &[String],
    classes: &[String],
    split: &Split,
    provenance: &str,
) -> Result<FoldReport> {
    let u = stage("rbf", pipeline.rbf_scale(pre, &split.train))?;
    let block = |rows: &[usize], cols: &[usize]| Matrix::from_fn(rows.len(), cols.len(), |a, b| pre[(rows[a], cols[b])]);
    let train_pre = block(&split.train, &split.train);
    let test_pre = block(&split.test, &split.train);
    let train_ids = split.train.iter().map(|&i| ds.items[i].id.clone()).collect();
    let g = stage(
        "gram",
        GramMatrix::new(pipeline.apply_rbf(&train_pre, u), train_ids, GramKind::Kernel, provenance),
    )?;
    let report = stage("diagnose", diagnose(&g, DEFAULT_TOL))?;
    let train_labels: Vec<String> = split.train.iter().map(|&i| labels[i].clone()).collect();
    let model = stage("train", train_one_vs_all(&g, &train_labels, spec.c, spec.correction))?;
    let predicted = stage("predict", model.predict_block(&pipeline.apply_rbf(&test_pre, u)))?;

    let pos = |c: &str| classes.iter().position(|x| x == c).ok_or_else(|| Error::Parse(format!("unknown class {c}")));
    let mut counts = vec![vec![0usize; classes.len()]; classes.len()];
    let mut correct = 0;
    for (&i, p) in split.test.iter().zip(&predicted) {
        counts[pos(&labels[i])?][pos(p)?] += 1;
        if &labels[i] == p {
            correct += 1;
        }
    }
    let accuracy = if split.test.is_empty() { 0.0 } else { 100.0 * correct as f64 / split.test.len() as f64 };
    Ok(FoldReport {
        name: split.name.clone(),
        accuracy,
        confusion: Confusion { classes: classes.to_vec(), counts },
        gram_diag: GramSummary {
            size: g.size(),
            min_eig: report.min_eig,
            max_abs_eig: report.max_abs_eig,
            is_psd: report.is_psd,
            negative_eigenvalues: report.negative_count(),
            centered_max_eig: report.centered_max_eig,
            is_cnd: report.is_cnd,
            top1_fraction: report.top_k_fraction(1),
            top10_fraction: report.top_k_fraction(10),
            tolerance: report.tolerance,
        },
        u,
        train_size: split.train.len(),
        test_size: split.test.len(),
        converged: model.models.iter().all(|m| m.converged),
    })
}
