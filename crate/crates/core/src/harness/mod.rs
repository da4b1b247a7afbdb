//! Datasets, synthetic data, pipelines, evaluation protocols and the
//! experiment runner.

mod dataset;
mod experiment;
mod pipeline;
mod posture;
mod protocol;
mod synthetic;

pub use dataset::{baseline_concat_vectors, sample_balanced, Dataset, SampleReport, Shortfall};
pub use experiment::{
    run_experiment, run_on_dataset, spec_hash, Confusion, DatasetFormat, DatasetSource, ExperimentSpec, FoldReport, GramSummary,
    Report, SampleSpec, Timings,
};
pub use pipeline::{GroundSpec, Pipeline, PipelineSpec, RbfStage, SinkConfig, TransformStage, Variant};
pub use posture::{ingest_posture, ingest_posture_from, IngestReport};
pub use protocol::{Protocol, Split};
pub use synthetic::{generate_synthetic, SyntheticConfig, TemplateSharing};
