//! Gram matrices: assembly, RBF and IDK kernels, definiteness diagnostics,
//! the Shift and Krein-space (KSVM) corrections, and PD-ization of
//! flow-derived Grams.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::ground::GroundMetric;
use crate::linalg::{centered, label_conjugate, max_abs, sym_eigen, sym_eigenvalues, Matrix};
use crate::multiset::WeightedPointSet;
use crate::transform::{check_admissible, nested_gram};
use crate::transport::max_kernel_flow;

/// Relative tolerance used for every definiteness verdict unless overridden.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative asymmetry accepted (and averaged away) on construction.
const SYMMETRY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GramKind {
    Distance,
    Kernel,
}

/// A labelled symmetric matrix of kernel or distance evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Matrix,
    ids: Vec<String>,
    kind: GramKind,
    provenance: String,
}

impl GramMatrix {
    /// Validates shape and finiteness, symmetrizes by averaging, and for
    /// distances checks the zero diagonal and non-negativity.
    pub fn new(values: Matrix, ids: Vec<String>, kind: GramKind, provenance: impl Into<String>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch(values.nrows(), values.ncols()));
        }
        let n = values.nrows();
        if ids.len() != n {
            return Err(Error::DimensionMismatch(ids.len(), n));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite Gram entry at ({}, {})", k % n, k / n)));
        }
        let scale = max_abs(&values);
        let mut sym = values.clone();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(domain(format!("matrix is not symmetric at ({i}, {j}): {a} vs {b}")));
                }
                let m = 0.5 * (a + b);
                sym[(i, j)] = m;
                sym[(j, i)] = m;
            }
        }
        if kind == GramKind::Distance {
            for i in 0..n {
                if sym[(i, i)].abs() > 1e-9 * scale {
                    return Err(domain(format!("distance matrix has non-zero diagonal at {i}: {}", sym[(i, i)])));
                }
                sym[(i, i)] = 0.0;
            }
            if let Some(k) = sym.iter().position(|&v| v < -1e-9 * scale) {
                return Err(domain(format!("negative distance at ({}, {})", k % n, k / n)));
            }
            sym.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(GramMatrix { values: sym, ids, kind, provenance: provenance.into() })
    }

    /// Convenience constructor with ids `"0".."n-1"`.
    pub fn from_rows(rows: Vec<Vec<f64>>, kind: GramKind) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(r.len(), n));
        }
        let values = Matrix::from_fn(n, n, |i, j| rows[i][j]);
        GramMatrix::new(values, (0..n).map(|i| i.to_string()).collect(), kind, "literal")
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn kind(&self) -> GramKind {
        self.kind
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = p.into();
        self
    }

    /// A matrix derived from this one, keeping ids and appending `step` to
    /// the provenance.
    pub fn derive(&self, values: Matrix, kind: GramKind, step: &str) -> Result<Self> {
        GramMatrix::new(values, self.ids.clone(), kind, format!("{} | {step}", self.provenance))
    }

    /// Principal submatrix on `idx`.
    pub fn select(&self, idx: &[usize]) -> Self {
        GramMatrix {
            values: self.cross(idx, idx),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            kind: self.kind,
            provenance: self.provenance.clone(),
        }
    }

    /// Rectangular block `rows × cols`.
    pub fn cross(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |a, b| self.values[(rows[a], cols[b])])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }
}

pub(crate) fn par_map<I, R, F>(items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Evaluates `eval` on every pair `i ≤ j` (diagonal included) and mirrors.
///
/// Each entry is computed exactly once and written to its own slot, so the
/// result does not depend on the thread count.
pub fn assemble_matrix<T, F>(items: &[T], eval: F) -> Result<Matrix>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync + Send,
{
    let n = items.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals = par_map(&pairs, |&(i, j)| eval(&items[i], &items[j]));
    let mut m = Matrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        let v = v.map_err(|e| Error::Entry { i, j, source: Box::new(e) })?;
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// `eval(rows[i], cols[j])` for every pair.
pub fn cross_matrix<T, F>(rows: &[T], cols: &[T], eval: F) -> Result<Matrix>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync + Send,
{
    let pairs: Vec<(usize, usize)> = (0..rows.len()).flat_map(|i| (0..cols.len()).map(move |j| (i, j))).collect();
    let vals = par_map(&pairs, |&(i, j)| eval(&rows[i], &cols[j]));
    let mut m = Matrix::zeros(rows.len(), cols.len());
    for (&(i, j), v) in pairs.iter().zip(vals) {
        m[(i, j)] = v.map_err(|e| Error::Entry { i, j, source: Box::new(e) })?;
    }
    Ok(m)
}

/// Gram over a list of point sets, ids taken from the sets.
pub fn assemble_gram<F>(items: &[WeightedPointSet], kind: GramKind, provenance: &str, eval: F) -> Result<GramMatrix>
where
    F: Fn(&WeightedPointSet, &WeightedPointSet) -> Result<f64> + Sync + Send,
{
    let m = assemble_matrix(items, eval)?;
    GramMatrix::new(m, items.iter().map(|s| s.id.clone()).collect(), kind, provenance)
}

/// Scale of the generalized RBF kernel `exp(-u D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RbfParams {
    /// `u = 1 / mean` of the training distances.
    Auto,
    Fixed(f64),
}

/// `1 / mean` of the strict upper triangle of `d` restricted to `train`.
pub fn auto_scale(d: &Matrix, train: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, &i) in train.iter().enumerate() {
        for &j in &train[a + 1..] {
            sum += d[(i, j)];
            count += 1;
        }
    }
    if count == 0 || !(sum > 0.0) {
        return Err(domain("automatic RBF scale needs a positive mean training distance"));
    }
    Ok(count as f64 / sum)
}

pub fn rbf_values(d: &Matrix, u: f64) -> Matrix {
    d.map(|v| (-u * v).exp())
}

/// `exp(-u d_ij)` with `u` fixed or derived from the rows in `train`
/// (all rows when `None`). Returns the kernel Gram and the `u` used.
pub fn rbf_from_distance(gd: &GramMatrix, params: RbfParams, train: Option<&[usize]>) -> Result<(GramMatrix, f64)> {
    if gd.kind() != GramKind::Distance {
        return Err(domain("RBF construction needs a distance matrix"));
    }
    let u = match params {
        RbfParams::Fixed(u) if u > 0.0 && u.is_finite() => u,
        RbfParams::Fixed(u) => return Err(domain(format!("RBF scale must be positive, got {u}"))),
        RbfParams::Auto => {
            let all: Vec<usize>;
            let idx = match train {
                Some(t) => t,
                None => {
                    all = (0..gd.size()).collect();
                    &all
                }
            };
            auto_scale(gd.values(), idx)?
        }
    };
    let k = gd.derive(rbf_values(gd.values(), u), GramKind::Kernel, &format!("rbf(u={u})"))?;
    Ok((k, u))
}

/// `exp(-u Σ_a Σ_b χ_A(a) χ_B(b) D(a, b))`.
pub fn idk<G: GroundMetric + ?Sized>(a: &WeightedPointSet, b: &WeightedPointSet, ground: &G, u: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let mut s = 0.0;
    for (pa, ma) in a.points().zip(a.masses()) {
        for (pb, mb) in b.points().zip(b.masses()) {
            s += ma * mb * ground.distance(pa, pb)?;
        }
    }
    Ok((-u * s).exp())
}

/// Spectrum and PSD / CND verdicts of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefinitenessReport {
    pub eigenvalues: Vec<f64>,
    pub min_eig: f64,
    pub max_abs_eig: f64,
    pub is_psd: bool,
    /// Largest eigenvalue of `P G P`, `P` the zero-sum projector.
    pub centered_max_eig: f64,
    pub is_cnd: bool,
    pub tolerance: f64,
}

impl DefinitenessReport {
    /// Fraction of `Σ|λ|` carried by the `k` largest `|λ|`.
    pub fn top_k_fraction(&self, k: usize) -> f64 {
        let mut abs: Vec<f64> = self.eigenvalues.iter().map(|v| v.abs()).collect();
        abs.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = abs.iter().sum();
        if total == 0.0 {
            return 1.0;
        }
        abs.iter().take(k).sum::<f64>() / total
    }

    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v < -self.tolerance * self.max_abs_eig).count()
    }
}

/// Definiteness report of a bare symmetric matrix.
pub fn eigen_verdict(m: &Matrix, tol: f64) -> Result<DefinitenessReport> {
    let eigenvalues = sym_eigenvalues(m)?;
    let min_eig = eigenvalues.first().copied().unwrap_or(0.0);
    let max_abs_eig = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let centered_max_eig = sym_eigenvalues(&centered(m))?.last().copied().unwrap_or(0.0);
    Ok(DefinitenessReport {
        is_psd: min_eig >= -tol * max_abs_eig,
        is_cnd: centered_max_eig <= tol * max_abs_eig,
        eigenvalues,
        min_eig,
        max_abs_eig,
        centered_max_eig,
        tolerance: tol,
    })
}

pub fn diagnose(g: &GramMatrix, tol: f64) -> Result<DefinitenessReport> {
    eigen_verdict(g.values(), tol)
}

/// `G + sI` with `s = max(0, -min_eig)` unless given. Returns the shift used.
pub fn shift_correct(g: &GramMatrix, s: Option<f64>) -> Result<(GramMatrix, f64)> {
    if g.kind() != GramKind::Kernel {
        return Err(domain("Shift correction applies to kernel matrices"));
    }
    let s = match s {
        Some(s) => s,
        None => (-diagnose(g, DEFAULT_TOL)?.min_eig).max(0.0),
    };
    let mut v = g.values().clone();
    for i in 0..v.nrows() {
        v[(i, i)] += s;
    }
    Ok((g.derive(v, GramKind::Kernel, &format!("shift(s={s})"))?, s))
}

/// Eigenvalues below `-KSVM_SIGN_TOL · max|λ|` are flipped; smaller
/// negative values are treated as round-off.
pub const KSVM_SIGN_TOL: f64 = 1e-8;

/// Eigendecomposition `G = V D Vᵀ`, shared by every one-vs-all machine.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
    source: Matrix,
}

impl SpectralBasis {
    pub fn of(g: &Matrix) -> Result<Self> {
        let (eigenvalues, vectors) = sym_eigen(g)?;
        Ok(SpectralBasis { eigenvalues, vectors, source: g.clone() })
    }

    fn signs(&self) -> Vec<f64> {
        let scale = self.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.eigenvalues.iter().map(|&l| if l < -KSVM_SIGN_TOL * scale { -1.0 } else { 1.0 }).collect()
    }

    /// The correction for labels `y`, from `U = Y V` (no new
    /// eigendecomposition): `YGY = U D Uᵀ`.
    pub fn for_labels(&self, y: &[f64]) -> Result<KreinCorrection> {
        let n = self.vectors.nrows();
        check_labels(y, n)?;
        let u = Matrix::from_fn(n, n, |i, k| y[i] * self.vectors[(i, k)]);
        let ygy = label_conjugate(&self.source, y);
        Ok(KreinCorrection::from_parts(self.eigenvalues.clone(), u, self.signs(), Some(&ygy)))
    }
}

fn check_labels(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch(y.len(), n));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(domain("labels must be +1 or -1"));
    }
    Ok(())
}

/// `Ḡ = U |D| Uᵀ` for `YGY = U D Uᵀ`, plus what is needed to map the dual
/// coefficients back.
#[derive(Debug, Clone)]
pub struct KreinCorrection {
    pub eigenvalues: Vec<f64>,
    pub u: Matrix,
    /// `S = sign(D)` after the round-off tolerance.
    pub signs: Vec<f64>,
    pub corrected: Matrix,
}

impl KreinCorrection {
    fn from_parts(eigenvalues: Vec<f64>, u: Matrix, signs: Vec<f64>, exact: Option<&Matrix>) -> Self {
        let corrected = match exact {
            // nothing flipped: keep YGY itself rather than its reconstruction
            Some(ygy) if signs.iter().all(|&s| s > 0.0) => ygy.clone(),
            _ => {
                let mut scaled = u.clone();
                for (k, (&l, &s)) in eigenvalues.iter().zip(&signs).enumerate() {
                    scaled.column_mut(k).scale_mut(l * s);
                }
                let m = &scaled * u.transpose();
                (&m + m.transpose()) * 0.5
            }
        };
        KreinCorrection { eigenvalues, u, signs, corrected }
    }

    pub fn flipped(&self) -> usize {
        self.signs.iter().filter(|&&s| s < 0.0).count()
    }

    /// `α = U S Uᵀ ᾱ`.
    pub fn map_coefficients(&self, abar: &[f64]) -> Vec<f64> {
        if self.flipped() == 0 {
            return abar.to_vec();
        }
        let a = nalgebra::DVector::from_column_slice(abar);
        let mut t = self.u.transpose() * a;
        for (k, s) in self.signs.iter().enumerate() {
            t[k] *= s;
        }
        (&self.u * t).iter().copied().collect()
    }
}

/// KSVM correction of `G` for labels `y` by a direct eigendecomposition
/// of `YGY`.
pub fn ksvm_correct(g: &GramMatrix, y: &[f64]) -> Result<KreinCorrection> {
    check_labels(y, g.size())?;
    let ygy = label_conjugate(g.values(), y);
    let basis = SpectralBasis::of(&ygy)?;
    let signs = basis.signs();
    Ok(KreinCorrection::from_parts(basis.eigenvalues, basis.vectors, signs, Some(&ygy)))
}

/// `|G| = V |D| Vᵀ`; equals `Y Ḡ Y` for every label vector.
pub fn absolute_gram(basis: &SpectralBasis) -> Matrix {
    KreinCorrection::from_parts(basis.eigenvalues.clone(), basis.vectors.clone(), basis.signs(), None).corrected
}

/// Which matrix the nested transform is applied to in [`flow_gram_pdize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdizeTarget {
    /// The set-level EMI Gram.
    Emi,
    /// The point-level block matrix of flow-weighted kernel values.
    Flow,
}

#[derive(Debug, Clone)]
pub struct FlowGramOutcome {
    /// Number of nested transforms applied (0: input already PSD).
    pub iterations: usize,
    /// Set-level Gram after the transform (block sums in `Flow` mode).
    pub gram: Matrix,
    /// Untransformed EMI Gram.
    pub emi: Matrix,
    /// Point-level block matrix `G_H` (transformed in `Flow` mode).
    pub blocks: Matrix,
    /// Start offset of each set's rows in `blocks`.
    pub offsets: Vec<usize>,
}

/// Assembles the flow Gram of pairwise-disjoint sets under a strictly
/// admissible ground kernel and applies the nested transform until the
/// chosen matrix is PSD at `tol` (at most `cap` times).
///
/// Block `(i, j)` of `G_H` holds `f*(x, y) K(x, y)` for the maximum-kernel
/// flow between `X_i` and `X_j`, so that its entry sum is `EMI(X_i, X_j)`.
pub fn flow_gram_pdize<K>(
    sets: &[WeightedPointSet],
    kernel: K,
    target: PdizeTarget,
    tol: f64,
    cap: usize,
) -> Result<FlowGramOutcome>
where
    K: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
{
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if !sets[i].intersect(&sets[j])?.is_empty() {
                return Err(domain(format!("sets {i} and {j} share support points")));
            }
        }
    }
    let all: Vec<&[f64]> = sets.iter().flat_map(|s| s.points()).collect();
    let kscale = all
        .iter()
        .flat_map(|x| all.iter().map(|y| kernel(x, y).abs()))
        .fold(f64::MIN_POSITIVE, f64::max);
    for (a, x) in all.iter().enumerate() {
        for y in &all[a + 1..] {
            if !(2.0 * kernel(x, y) < kernel(x, x) + kernel(y, y) - 1e-12 * kscale) {
                return Err(domain("ground kernel violates 2K(x,y) < K(x,x) + K(y,y) on distinct points"));
            }
        }
    }

    let mut offsets = Vec::with_capacity(sets.len());
    let mut total = 0;
    for s in sets {
        offsets.push(total);
        total += s.len();
    }
    let pairs: Vec<(usize, usize)> = (0..sets.len()).flat_map(|i| (i..sets.len()).map(move |j| (i, j))).collect();
    let plans = par_map(&pairs, |&(i, j)| max_kernel_flow(&sets[i], &sets[j], &kernel));
    let mut blocks = Matrix::zeros(total, total);
    let mut emi = Matrix::zeros(sets.len(), sets.len());
    for (&(i, j), plan) in pairs.iter().zip(plans) {
        let plan = plan.map_err(|e| Error::Entry { i, j, source: Box::new(e) })?;
        let mut sum = 0.0;
        for &(a, b, f) in &plan.flows {
            let h = f * kernel(sets[i].point(a), sets[j].point(b));
            blocks[(offsets[i] + a, offsets[j] + b)] = h;
            blocks[(offsets[j] + b, offsets[i] + a)] = h;
            sum += h;
        }
        if (sum - plan.cost).abs() > 1e-9 * plan.cost.abs().max(1.0) {
            return Err(Error::Solver(format!("flow block ({i}, {j}) sums to {sum}, EMI is {}", plan.cost)));
        }
        emi[(i, j)] = sum;
        emi[(j, i)] = sum;
    }

    let block_sums = |b: &Matrix| {
        Matrix::from_fn(sets.len(), sets.len(), |i, j| {
            b.view((offsets[i], offsets[j]), (sets[i].len(), sets[j].len())).sum()
        })
    };
    match target {
        PdizeTarget::Emi => {
            check_admissible(&emi)?;
            for n in 0..=cap {
                let g = if n == 0 { emi.clone() } else { nested_gram(&emi, n as u32)? };
                if eigen_verdict(&g, tol)?.is_psd {
                    return Ok(FlowGramOutcome { iterations: n, gram: g, emi, blocks, offsets });
                }
            }
        }
        PdizeTarget::Flow => {
            check_admissible(&blocks)?;
            for n in 0..=cap {
                let b = if n == 0 { blocks.clone() } else { nested_gram(&blocks, n as u32)? };
                if eigen_verdict(&b, tol)?.is_psd {
                    let gram = block_sums(&b);
                    return Ok(FlowGramOutcome { iterations: n, gram, emi, blocks: b, offsets });
                }
            }
        }
    }
    Err(Error::CapExceeded(cap))
}
