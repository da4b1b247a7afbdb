//! Model files: the trained machines plus everything needed to rebuild
//! kernel rows for new sets — the pipeline, the RBF scale and the training
//! sets themselves.

use anyhow::{bail, Result};
use emdkern::gram::{GramKind, GramMatrix};
use emdkern::harness::{Confusion, Dataset, Pipeline, PipelineSpec};
use emdkern::svm::{train_one_vs_all, CorrectionMode, OneVsAll};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub spec_hash: String,
    pub provenance: String,
    pub pipeline: PipelineSpec,
    pub u: Option<f64>,
    pub correction: CorrectionMode,
    #[serde(rename = "C")]
    pub c: f64,
    pub model: OneVsAll,
    /// Training sets in the dataset JSON format.
    pub train: serde_json::Value,
}

#[derive(Serialize)]
pub struct EvalReport {
    pub spec_hash: String,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub confusion: Confusion,
    pub predictions: Vec<(String, String)>,
}

impl ModelFile {
    pub fn train(ds: &Dataset, spec: PipelineSpec, correction: CorrectionMode, c: f64) -> Result<Self> {
        let pipeline = Pipeline::new(spec.clone())?;
        if pipeline.output_kind() != GramKind::Kernel {
            bail!("the pipeline produces distances; add an rbf stage to train");
        }
        let (g, u): (GramMatrix, _) = pipeline.gram(&ds.items)?;
        let model = train_one_vs_all(&g, &ds.labels()?, c, correction)?;
        Ok(ModelFile {
            spec_hash: spec.hash(),
            provenance: g.provenance().to_string(),
            pipeline: spec,
            u,
            correction,
            c,
            model,
            train: serde_json::from_str(&ds.to_json_string()?)?,
        })
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<EvalReport> {
        let train = Dataset::from_json_str(&self.train.to_string())?;
        if train.ids() != self.model.train_ids() {
            bail!("model file is inconsistent: embedded training ids differ from the machines'");
        }
        let pipeline = Pipeline::new(self.pipeline.clone())?;
        let block = pipeline.apply_rbf(&pipeline.pre_rbf_cross(&ds.items, &train.items)?, self.u);
        let predicted = self.model.predict_block(&block)?;
        let labels = ds.labels()?;

        let mut classes = self.model.classes.clone();
        for l in &labels {
            if !classes.contains(l) {
                classes.push(l.clone());
            }
        }
        let pos = |c: &str| classes.iter().position(|x| x == c).expect("class listed");
        let mut counts = vec![vec![0usize; classes.len()]; classes.len()];
        let mut correct = 0;
        for (actual, p) in labels.iter().zip(&predicted) {
            counts[pos(actual)][pos(p)] += 1;
            correct += usize::from(actual == p);
        }
        let total = labels.len();
        Ok(EvalReport {
            spec_hash: self.spec_hash.clone(),
            accuracy: if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 },
            correct,
            total,
            confusion: Confusion { classes: classes.clone(), counts },
            predictions: ds.ids().into_iter().zip(predicted).collect(),
        })
    }
}
