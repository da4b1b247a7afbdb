//! The definite-preserving transform `T_K(x, y) = K(x, y) / (K(x, x) + K(y, y) - K(x, y))`,
//! its nested closed form, and the biotope transform of a distance.
//!
//! Every transform comes in two shapes: over kernel closures, and over a
//! dense Gram matrix whose diagonal carries the self-evaluations.

use crate::error::{domain, Error, Result};
use crate::gram::eigen_verdict;
use crate::linalg::{max_abs, Matrix};

/// Relative magnitude below which a self-similarity counts as zero in the
/// matrixwise transforms.
pub const ZERO_DIAGONAL_TOL: f64 = 1e-12;

/// Default iteration cap for [`pd_ization_order`].
pub const DEFAULT_CAP: usize = 64;

/// `T_K` on scalars. Both self-similarities within `zero_tol` of zero give 1.
pub fn tanimoto(kxy: f64, kxx: f64, kyy: f64, zero_tol: f64) -> Result<f64> {
    if kxx.abs() <= zero_tol && kyy.abs() <= zero_tol {
        return Ok(1.0);
    }
    let den = kxx + kyy - kxy;
    if den == 0.0 {
        return Err(domain(format!("zero denominator in T_K (K(x,x)={kxx}, K(y,y)={kyy}, K(x,y)={kxy})")));
    }
    Ok(kxy / den)
}

/// `n`-fold nesting of [`tanimoto`] in closed form,
/// `K / (2^(n-1) (K(x,x) + K(y,y) - 2K(x,y)) + K(x,y))`.
///
/// `n = 0` is the F-measure-like `2K / (K(x,x) + K(y,y))`; `n = 1` is `T_K`.
pub fn nested(kxy: f64, kxx: f64, kyy: f64, n: u32, zero_tol: f64) -> Result<f64> {
    if kxx.abs() <= zero_tol && kyy.abs() <= zero_tol {
        return Ok(1.0);
    }
    let den = if n == 0 {
        0.5 * (kxx + kyy)
    } else {
        // grouped this way the gap term is exactly zero on the diagonal
        2f64.powi(n as i32 - 1) * (kxx + kyy - 2.0 * kxy) + kxy
    };
    if den == 0.0 || !den.is_finite() {
        return Err(domain(format!("degenerate denominator in nested transform (n={n})")));
    }
    Ok(kxy / den)
}

/// `N_{D,p}(x, y) = (2D(x,y) - D(x,x) - D(y,y)) / (D(x,p) + D(y,p) + D(x,y) - D(x,x) - D(y,y) - D(p,p))`.
pub fn biotope(dxy: f64, dxx: f64, dyy: f64, dxp: f64, dyp: f64, dpp: f64) -> Result<f64> {
    let den = dxp + dyp + dxy - dxx - dyy - dpp;
    if den == 0.0 {
        return Err(domain("zero denominator in biotope transform: degenerate anchor"));
    }
    Ok((2.0 * dxy - dxx - dyy) / den)
}

/// `T_K` as a kernel on any domain.
pub fn transform_pd<T: ?Sized, K>(k: K) -> impl Fn(&T, &T) -> Result<f64>
where
    K: Fn(&T, &T) -> f64,
{
    move |x, y| tanimoto(k(x, y), k(x, x), k(y, y), 0.0)
}

/// `K_T^n` as a kernel on any domain.
pub fn transform_pd_nested<T: ?Sized, K>(k: K, n: u32) -> impl Fn(&T, &T) -> Result<f64>
where
    K: Fn(&T, &T) -> f64,
{
    move |x, y| nested(k(x, y), k(x, x), k(y, y), n, 0.0)
}

/// `N_{D,p}` as a function on any domain.
pub fn biotope_transform<'a, T: ?Sized, D>(d: D, p: &'a T) -> impl Fn(&T, &T) -> Result<f64> + 'a
where
    D: Fn(&T, &T) -> f64 + 'a,
{
    move |x, y| biotope(d(x, y), d(x, x), d(y, y), d(x, p), d(y, p), d(p, p))
}

fn check_square(g: &Matrix) -> Result<()> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch(g.nrows(), g.ncols()));
    }
    Ok(())
}

/// Elementwise `T_K` over a Gram matrix.
pub fn tanimoto_gram(g: &Matrix) -> Result<Matrix> {
    nested_gram(g, 1)
}

/// Elementwise `K_T^n` over a Gram matrix.
pub fn nested_gram(g: &Matrix, n: u32) -> Result<Matrix> {
    check_square(g)?;
    let zt = ZERO_DIAGONAL_TOL * max_abs(g);
    let size = g.nrows();
    let mut out = Matrix::zeros(size, size);
    for i in 0..size {
        for j in i..size {
            let v = nested(g[(i, j)], g[(i, i)], g[(j, j)], n, zt)
                .map_err(|e| Error::Entry { i, j, source: Box::new(e) })?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Elementwise `N_{D,p}` over a distance matrix, anchored at row `anchor`.
///
/// The anchor is a reference element rather than a data item, so its row
/// and column are left out of the result.
pub fn biotope_gram(d: &Matrix, anchor: usize) -> Result<Matrix> {
    check_square(d)?;
    let size = d.nrows();
    if anchor >= size {
        return Err(domain(format!("anchor row {anchor} out of range for {size} rows")));
    }
    let keep: Vec<usize> = (0..size).filter(|&k| k != anchor).collect();
    let p = anchor;
    let mut out = Matrix::zeros(keep.len(), keep.len());
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate().skip(a) {
            let v = biotope(d[(i, j)], d[(i, i)], d[(j, j)], d[(i, p)], d[(j, p)], d[(p, p)])
                .map_err(|e| Error::Entry { i, j, source: Box::new(e) })?;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Smallest `n ≤ cap` for which `K_T^n` is PSD at relative tolerance `tol`
/// (`n = 0` meaning the untransformed Gram).
///
/// Requires `2K(x, y) ≠ K(x, x) + K(y, y)` for every pair of distinct
/// rows; under that condition such an `n` always exists.
pub fn pd_ization_order(g: &Matrix, tol: f64, cap: usize) -> Result<usize> {
    check_admissible(g)?;
    for n in 0..=cap {
        let gn = if n == 0 { g.clone() } else { nested_gram(g, n as u32)? };
        if eigen_verdict(&gn, tol)?.is_psd {
            return Ok(n);
        }
    }
    Err(Error::CapExceeded(cap))
}

/// The strict-inequality hypothesis of the nesting argument, checked up to
/// `1e-12` of the matrix scale.
pub fn check_admissible(g: &Matrix) -> Result<()> {
    check_square(g)?;
    let eps = 1e-12 * max_abs(g);
    for i in 0..g.nrows() {
        for j in i + 1..g.nrows() {
            if (2.0 * g[(i, j)] - g[(i, i)] - g[(j, j)]).abs() <= eps {
                return Err(domain(format!(
                    "rows {i} and {j} violate 2K(x,y) != K(x,x) + K(y,y); the nested transform cannot separate them"
                )));
            }
        }
    }
    Ok(())
}
