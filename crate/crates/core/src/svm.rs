//! Dual C-SVM over precomputed kernel matrices.
//!
//! The solver is SMO with maximal-violating-pair selection, following
//! LIBSVM's formulation: minimise `½ αᵀQα - Σα` subject to `yᵀα = 0`,
//! `0 ≤ α ≤ C`, where `Q = YKY` (or the corrected matrix in KSVM mode).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gram::{ksvm_correct, par_map, shift_correct, GramKind, GramMatrix, KreinCorrection, SpectralBasis};
use crate::linalg::{label_conjugate, Matrix};

/// Curvature used when a pair subproblem is flat or concave.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMode {
    #[default]
    None,
    Shift,
    Ksvm,
}

impl std::str::FromStr for CorrectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CorrectionMode::None),
            "shift" => Ok(CorrectionMode::Shift),
            "ksvm" => Ok(CorrectionMode::Ksvm),
            other => Err(Error::Parse(format!("unknown correction {other:?} (none|shift|ksvm)"))),
        }
    }
}

/// The correction actually applied when a model was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum AppliedCorrection {
    None,
    Shift { s: f64 },
    Ksvm { flipped: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct SmoOptions {
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Record the dual objective after every step.
    pub trace: bool,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions { tol: 1e-3, max_iter: None, trace: false }
    }
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective `Σα - ½ αᵀQα` after each step, when traced.
    pub objective: Vec<f64>,
}

/// Solves the dual for a given `Q` (`Q_ij = y_i y_j K_ij` for a plain SVM).
pub fn smo(q: &Matrix, y: &[f64], c: f64, opts: &SmoOptions) -> Result<SmoSolution> {
    let n = y.len();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(q.nrows(), n));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain(format!("C must be positive, got {c}")));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(domain("non-finite kernel entry"));
    }
    let max_iter = opts.max_iter.unwrap_or_else(|| (100 * n).max(1_000_000));
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut objective = Vec::new();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // maximal violating pair
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let yg = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if in_up && yg > gmax {
                gmax = yg;
                i = t;
            }
            if in_low && yg < gmin {
                gmin = yg;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q[(i, i)] + q[(j, j)] + 2.0 * q[(i, j)];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q[(i, i)] + q[(j, j)] - 2.0 * q[(i, j)];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q[(t, i)] * di + q[(t, j)] * dj;
        }
        if opts.trace {
            // f = ½ Σ α (g - 1) with g = Qα - 1
            let f: f64 = alpha.iter().zip(&grad).map(|(a, g)| 0.5 * a * (g - 1.0)).sum();
            objective.push(-f);
        }
    }
    if !converged {
        log::warn!("SMO stopped at the iteration cap ({max_iter}) before reaching tolerance {}", opts.tol);
    }

    // bias as in LIBSVM: average over free vectors, else midpoint of the bracket
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { 0.5 * (ub + lb) };
    Ok(SmoSolution { alpha, rho, iterations, converged, objective })
}

/// A trained binary machine: `score(x) = Σ alphas_i K(s_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Signed coefficients `γ_i`.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub train_ids: Vec<String>,
    pub class_name: String,
    pub correction: AppliedCorrection,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl SvmModel {
    /// `(score, label)`; a score of exactly zero is labelled `+1`.
    pub fn predict(&self, kernel_row: &[f64]) -> Result<(f64, f64)> {
        if kernel_row.len() != self.alphas.len() {
            return Err(Error::DimensionMismatch(kernel_row.len(), self.alphas.len()));
        }
        let score = self.alphas.iter().zip(kernel_row).map(|(a, k)| a * k).sum::<f64>() + self.bias;
        Ok((score, if score >= 0.0 { 1.0 } else { -1.0 }))
    }

    /// Scores for every row of a `test × train` kernel block.
    pub fn decision_values(&self, block: &Matrix) -> Result<Vec<f64>> {
        (0..block.nrows())
            .map(|r| self.predict(&block.row(r).iter().copied().collect::<Vec<_>>()).map(|p| p.0))
            .collect()
    }
}

fn check_binary(g: &GramMatrix, y: &[f64]) -> Result<()> {
    if g.kind() != GramKind::Kernel {
        return Err(domain("SVM training needs a kernel matrix"));
    }
    if y.len() != g.size() {
        return Err(Error::DimensionMismatch(y.len(), g.size()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(domain("labels must be +1 or -1"));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(domain("binary training needs both labels present"));
    }
    Ok(())
}

enum Prepared<'a> {
    Plain(Matrix, AppliedCorrection),
    Krein(&'a KreinCorrection),
}

fn fit(
    g: &GramMatrix,
    y: &[f64],
    c: f64,
    prepared: Prepared<'_>,
    class_name: &str,
    opts: &SmoOptions,
) -> Result<SvmModel> {
    let (sol, alphas, correction) = match prepared {
        Prepared::Plain(q, applied) => {
            let sol = smo(&q, y, c, opts)?;
            let gamma = sol.alpha.iter().zip(y).map(|(a, yi)| a * yi).collect();
            (sol, gamma, applied)
        }
        Prepared::Krein(corr) => {
            let sol = smo(&corr.corrected, y, c, opts)?;
            let mapped = corr.map_coefficients(&sol.alpha);
            let gamma = mapped.iter().zip(y).map(|(a, yi)| a * yi).collect();
            (sol, gamma, AppliedCorrection::Ksvm { flipped: corr.flipped() })
        }
    };
    Ok(SvmModel {
        alphas,
        bias: -sol.rho,
        train_ids: g.ids().to_vec(),
        class_name: class_name.to_string(),
        correction,
        converged: sol.converged,
        iterations: sol.iterations,
        objective_trace: sol.objective,
    })
}

/// Trains one binary machine on `g` with labels `y ∈ {-1, +1}ⁿ`.
pub fn train_binary(g: &GramMatrix, y: &[f64], c: f64, mode: CorrectionMode) -> Result<SvmModel> {
    train_binary_with(g, y, c, mode, &SmoOptions::default())
}

pub fn train_binary_with(
    g: &GramMatrix,
    y: &[f64],
    c: f64,
    mode: CorrectionMode,
    opts: &SmoOptions,
) -> Result<SvmModel> {
    check_binary(g, y)?;
    match mode {
        CorrectionMode::None => {
            let q = label_conjugate(g.values(), y);
            fit(g, y, c, Prepared::Plain(q, AppliedCorrection::None), "+1", opts)
        }
        CorrectionMode::Shift => {
            let (shifted, s) = shift_correct(g, None)?;
            let q = label_conjugate(shifted.values(), y);
            fit(g, y, c, Prepared::Plain(q, AppliedCorrection::Shift { s }), "+1", opts)
        }
        CorrectionMode::Ksvm => {
            let corr = ksvm_correct(g, y)?;
            fit(g, y, c, Prepared::Krein(&corr), "+1", opts)
        }
    }
}

/// One machine per class, `+1` for the class and `-1` for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsAll {
    /// Sorted class names, aligned with `models`.
    pub classes: Vec<String>,
    pub models: Vec<SvmModel>,
}

impl OneVsAll {
    /// Argmax over the per-class scores; ties go to the lexicographically
    /// smallest class name.
    pub fn predict(&self, kernel_row: &[f64]) -> Result<(String, Vec<f64>)> {
        let scores = self
            .models
            .iter()
            .map(|m| m.predict(kernel_row).map(|p| p.0))
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        Ok((self.classes[best].clone(), scores))
    }

    pub fn predict_block(&self, block: &Matrix) -> Result<Vec<String>> {
        (0..block.nrows())
            .map(|r| self.predict(&block.row(r).iter().copied().collect::<Vec<_>>()).map(|p| p.0))
            .collect()
    }

    pub fn train_ids(&self) -> &[String] {
        &self.models[0].train_ids
    }
}

pub fn train_one_vs_all(g: &GramMatrix, labels: &[String], c: f64, mode: CorrectionMode) -> Result<OneVsAll> {
    train_one_vs_all_with(g, labels, c, mode, &SmoOptions::default())
}

/// One-vs-all training. In KSVM mode `G` is decomposed once and each class
/// reuses the eigenvectors re-signed by its labels.
pub fn train_one_vs_all_with(
    g: &GramMatrix,
    labels: &[String],
    c: f64,
    mode: CorrectionMode,
    opts: &SmoOptions,
) -> Result<OneVsAll> {
    if labels.len() != g.size() {
        return Err(Error::DimensionMismatch(labels.len(), g.size()));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(domain(format!("one-vs-all needs at least 2 classes, found {}", classes.len())));
    }
    if g.kind() != GramKind::Kernel {
        return Err(domain("SVM training needs a kernel matrix"));
    }
    let ys: Vec<Vec<f64>> = classes
        .iter()
        .map(|cl| labels.iter().map(|l| if l == cl { 1.0 } else { -1.0 }).collect())
        .collect();
    let jobs: Vec<usize> = (0..classes.len()).collect();
    let models: Vec<Result<SvmModel>> = match mode {
        CorrectionMode::None => par_map(&jobs, |&k| {
            let q = label_conjugate(g.values(), &ys[k]);
            fit(g, &ys[k], c, Prepared::Plain(q, AppliedCorrection::None), &classes[k], opts)
        }),
        CorrectionMode::Shift => {
            let (shifted, s) = shift_correct(g, None)?;
            par_map(&jobs, |&k| {
                let q = label_conjugate(shifted.values(), &ys[k]);
                fit(g, &ys[k], c, Prepared::Plain(q, AppliedCorrection::Shift { s }), &classes[k], opts)
            })
        }
        CorrectionMode::Ksvm => {
            let basis = SpectralBasis::of(g.values())?;
            par_map(&jobs, |&k| {
                let corr = basis.for_labels(&ys[k])?;
                fit(g, &ys[k], c, Prepared::Krein(&corr), &classes[k], opts)
            })
        }
    };
    let models = models.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(OneVsAll { classes, models })
}
