use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use emdkern::gram::{diagnose, ksvm_correct, shift_correct, GramKind, GramMatrix, DEFAULT_TOL};
use emdkern::harness::{
    generate_synthetic, ingest_posture, run_experiment, Dataset, ExperimentSpec, GroundSpec, Pipeline, PipelineSpec,
    SinkConfig, SyntheticConfig, TemplateSharing, TransformStage, Variant,
};
use emdkern::linalg::label_conjugate;
use emdkern::matrix_io::{gram_file_kind, read_gram, write_gram, write_gram_to};
use emdkern::multiset::WeightedPointSet;
use emdkern::svm::CorrectionMode;
use emdkern::transform::{biotope_gram, nested_gram};

mod model;

use model::ModelFile;

/// Id of the extra empty-set row added by `dist --include-empty`.
const EMPTY_ID: &str = "__empty__";

#[derive(Parser)]
#[command(name = "emdkern", version, about = "Earth mover's distance kernels, transforms and SVMs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise set distances of a dataset, as CSV.
    Dist(DistArgs),
    /// Elementwise transform of a Gram or distance CSV.
    Xform(XformArgs),
    /// Kernel or distance matrix of a dataset under a pipeline spec.
    Gram(GramArgs),
    /// Definiteness report of a matrix CSV, as JSON.
    Diag(DiagArgs),
    /// Shift or Krein correction of a kernel CSV.
    Correct(CorrectArgs),
    /// Train a one-vs-all SVM on a precomputed kernel.
    Train(TrainArgs),
    /// Accuracy and confusion matrix of a trained model on a dataset.
    Eval(EvalArgs),
    /// Run an experiment spec end to end.
    Run(RunArgs),
    /// Write a synthetic labelled point-set dataset.
    Synth(SynthArgs),
    /// Convert the raw posture CSV to the JSON dataset format.
    IngestPosture(IngestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DistVariant {
    Emd,
    EmdRubner,
    EmdhatAlpha,
    EmdhatSink,
}

impl From<DistVariant> for Variant {
    fn from(v: DistVariant) -> Self {
        match v {
            DistVariant::Emd => Variant::Emd,
            DistVariant::EmdRubner => Variant::EmdRubner,
            DistVariant::EmdhatAlpha => Variant::EmdhatAlpha,
            DistVariant::EmdhatSink => Variant::EmdhatSink,
        }
    }
}

#[derive(Args)]
struct DistArgs {
    /// JSON dataset.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "emd")]
    variant: DistVariant,
    /// euclidean | sqeuclidean | discrete | circle | file:PATH
    #[arg(long, default_value = "euclidean")]
    ground: String,
    #[arg(long)]
    threshold: Option<f64>,
    /// Penalty factor for emdhat-alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Flat sink rate for emdhat-sink (default: the threshold).
    #[arg(long, conflicts_with = "sink_point")]
    sink_flat: Option<f64>,
    /// Sink point for emdhat-sink, as "x,y,...".
    #[arg(long)]
    sink_point: Option<String>,
    /// Rescale every set to unit mass first.
    #[arg(long)]
    normalize: bool,
    /// Add a row for the empty set, usable as a biotope anchor.
    #[arg(long)]
    include_empty: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct XformArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// tanimoto | nested:N | biotope
    #[arg(long)]
    op: TransformStage,
    /// Row id anchoring the biotope transform; `empty` means the row
    /// written by `dist --include-empty`.
    #[arg(long)]
    anchor_row: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GramArgs {
    #[arg(long)]
    data: PathBuf,
    /// Pipeline spec JSON.
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Kernel,
    Distance,
}

impl From<KindArg> for GramKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Kernel => GramKind::Kernel,
            KindArg::Distance => GramKind::Distance,
        }
    }
}

#[derive(Args)]
struct DiagArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Overrides the kind recorded in the file (kernel if neither).
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Relative tolerance of the verdicts.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrectMode {
    Shift,
    Ksvm,
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: CorrectMode,
    /// `id,label` CSV; labels are +1/-1, or class names with --positive.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Class name mapped to +1; every other class becomes -1.
    #[arg(long)]
    positive: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long, default_value = "none")]
    correction: CorrectionMode,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SharingArg {
    Distinct,
    Paired,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    min_points: usize,
    #[arg(long, default_value_t = 12)]
    max_points: usize,
    /// Template spacing in standard deviations.
    #[arg(long, default_value_t = 5.0)]
    separation: f64,
    #[arg(long, value_enum, default_value = "distinct")]
    sharing: SharingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// A reader that closed the pipe early (`| head`) is not an error.
fn stdout_result(r: std::io::Result<()>) -> Result<()> {
    match r {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => stdout_result(writeln!(std::io::stdout().lock(), "{text}")),
    }
}

fn emit_gram(out: Option<&Path>, g: &GramMatrix) -> Result<()> {
    match out {
        Some(p) => write_gram(p, g).with_context(|| format!("writing {}", p.display())),
        None => match write_gram_to(std::io::stdout().lock(), g) {
            Err(emdkern::Error::Io(e)) => stdout_result(Err(e)),
            Err(emdkern::Error::Csv(e)) if e.is_io_error() => Ok(()),
            r => Ok(r?),
        },
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn dist(a: DistArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let mut spec = PipelineSpec::new(GroundSpec { kind: a.ground, threshold: a.threshold }, a.variant.into());
    spec.alpha = a.alpha;
    spec.normalize = a.normalize;
    spec.sink = match (a.sink_flat, a.sink_point) {
        (Some(b), _) => Some(SinkConfig::Flat(b)),
        (None, Some(p)) => Some(SinkConfig::Point(
            p.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| anyhow!("--sink-point {c:?}: {e}")))
                .collect::<Result<_>>()?,
        )),
        (None, None) => None,
    };
    let pipeline = Pipeline::new(spec)?;
    let mut items = ds.items;
    if a.include_empty {
        if items.iter().any(|s| s.id == EMPTY_ID) {
            bail!("dataset already has an item with id {EMPTY_ID}");
        }
        items.push(WeightedPointSet::empty(ds.dimension).with_id(EMPTY_ID));
    }
    let (g, _) = pipeline.gram(&items)?;
    emit_gram(a.out.as_deref(), &g)
}

fn xform(a: XformArgs) -> Result<()> {
    let kind = gram_file_kind(&a.input)?.unwrap_or(match a.op {
        TransformStage::Biotope => GramKind::Distance,
        _ => GramKind::Kernel,
    });
    let g = read_gram(&a.input, kind)?;
    let out = match a.op {
        TransformStage::None => g,
        TransformStage::Tanimoto | TransformStage::Nested(_) => {
            if kind != GramKind::Kernel {
                bail!("{} needs a kernel matrix, {} holds distances", a.op, a.input.display());
            }
            let n = match a.op {
                TransformStage::Nested(n) => n,
                _ => 1,
            };
            g.derive(nested_gram(g.values(), n)?, GramKind::Kernel, &a.op.to_string())?
        }
        TransformStage::Biotope => {
            if kind != GramKind::Distance {
                bail!("biotope needs a distance matrix, {} holds a kernel", a.input.display());
            }
            let anchor = match a.anchor_row.as_deref() {
                None => bail!("biotope needs --anchor-row ID|empty"),
                Some("empty") => EMPTY_ID,
                Some(id) => id,
            };
            let row = g.index_of(anchor).ok_or_else(|| anyhow!("no row with id {anchor:?}"))?;
            let ids = g.ids().iter().enumerate().filter(|&(i, _)| i != row).map(|(_, id)| id.clone()).collect();
            GramMatrix::new(
                biotope_gram(g.values(), row)?,
                ids,
                GramKind::Distance,
                format!("{} | biotope anchor={anchor}", g.provenance()),
            )?
        }
    };
    emit_gram(a.out.as_deref(), &out)
}

fn gram(a: GramArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let pipeline = Pipeline::new(load_json::<PipelineSpec>(&a.pipeline)?)?;
    let (g, u) = pipeline.gram(&ds.items)?;
    if let Some(u) = u {
        eprintln!("rbf scale u = {u}");
    }
    emit_gram(a.out.as_deref(), &g)
}

fn diag(a: DiagArgs) -> Result<()> {
    let kind = match a.kind {
        Some(k) => k.into(),
        None => gram_file_kind(&a.input)?.unwrap_or(GramKind::Kernel),
    };
    let g = read_gram(&a.input, kind)?;
    let r = diagnose(&g, a.tol)?;
    let json = serde_json::json!({
        "size": g.size(),
        "kind": g.kind(),
        "provenance": g.provenance(),
        "negative_eigenvalues": r.negative_count(),
        "top1_fraction": r.top_k_fraction(1),
        "top10_fraction": r.top_k_fraction(10),
        "report": r,
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&json)?)
}

fn read_labels(path: &Path, positive: Option<&str>, g: &GramMatrix) -> Result<Vec<f64>> {
    let (ids, values): (Vec<String>, Vec<String>) = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (id, v) = l.split_once(',').unwrap_or(("", l));
            (id.trim().to_string(), v.trim().to_string())
        })
        .unzip();
    let mut y = vec![None; g.size()];
    for (line, (id, v)) in ids.iter().zip(&values).enumerate() {
        let Some(i) = g.index_of(id) else {
            if line == 0 {
                continue; // header
            }
            bail!("{}:{}: id {id:?} is not in the matrix", path.display(), line + 1);
        };
        y[i] = Some(match positive {
            Some(p) => if v == p { 1.0 } else { -1.0 },
            None => match v.as_str() {
                "1" | "+1" => 1.0,
                "-1" => -1.0,
                other => bail!("{}:{}: label {other:?} is not +1/-1 (use --positive)", path.display(), line + 1),
            },
        });
    }
    y.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| anyhow!("no label for row {:?}", g.ids()[i])))
        .collect()
}

fn correct(a: CorrectArgs) -> Result<()> {
    let g = read_gram(&a.input, GramKind::Kernel)?;
    let (out, summary) = match a.mode {
        CorrectMode::Shift => {
            let (s, amount) = shift_correct(&g, None)?;
            (s, serde_json::json!({ "mode": "shift", "s": amount }))
        }
        CorrectMode::Ksvm => {
            let path = a.labels.as_deref().ok_or_else(|| anyhow!("ksvm needs --labels FILE"))?;
            let y = read_labels(path, a.positive.as_deref(), &g)?;
            let c = ksvm_correct(&g, &y)?;
            // Y Ḡ Y puts the corrected matrix back in the original sign frame
            let back = label_conjugate(&c.corrected, &y);
            (
                g.derive(back, GramKind::Kernel, "ksvm")?,
                serde_json::json!({ "mode": "ksvm", "flipped": c.flipped(), "eigenvalues": c.eigenvalues }),
            )
        }
    };
    eprintln!("{summary}");
    emit_gram(a.out.as_deref(), &out)
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let spec: PipelineSpec = load_json(&a.pipeline)?;
    let m = ModelFile::train(&ds, spec, a.correction, a.c)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&m)?).with_context(|| format!("writing {}", a.out.display()))?;
    let converged = m.model.models.iter().all(|m| m.converged);
    eprintln!("trained {} classes on {} items (converged: {converged})", m.model.classes.len(), ds.len());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let m: ModelFile = load_json(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let report = m.evaluate(&ds)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn run(a: RunArgs) -> Result<()> {
    let spec: ExperimentSpec = load_json(&a.spec)?;
    let report = run_experiment(&spec)?;
    eprintln!("mean accuracy {:.2}% ± {:.2}", report.mean_accuracy, report.std_accuracy);
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn synth(a: SynthArgs) -> Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        classes: a.classes,
        per_class: a.per_class,
        cardinality: (a.min_points, a.max_points),
        dim: a.dim,
        separation: a.separation,
        sharing: match a.sharing {
            SharingArg::Distinct => TemplateSharing::Distinct,
            SharingArg::Paired => TemplateSharing::Paired,
        },
        seed: a.seed,
        ..SyntheticConfig::default()
    })?;
    ds.save(&a.out)?;
    eprintln!("wrote {} sets to {}", ds.len(), a.out.display());
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (ds, report) = ingest_posture(&a.input)?;
    ds.save(&a.out)?;
    eprintln!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Command::Dist(a) => dist(a),
        Command::Xform(a) => xform(a),
        Command::Gram(a) => gram(a),
        Command::Diag(a) => diag(a),
        Command::Correct(a) => correct(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::IngestPosture(a) => ingest(a),
    }
}
