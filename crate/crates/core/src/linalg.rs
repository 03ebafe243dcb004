//! Small dense helpers on top of nalgebra. The Cholesky routine is hand-rolled
//! so failures can name the offending leading minor.

use crate::{Error, Matrix, Result, Vector};

/// Lower-triangular `L` with `L Lᵀ = a`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

pub fn is_positive_definite(a: &Matrix) -> bool {
    cholesky(a).is_ok()
}

pub fn log_det_pd(a: &Matrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inverse_pd(a: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    let n = a.nrows();
    let linv = l
        .solve_lower_triangular(&Matrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite { minor: n })?;
    let mut inv = linv.transpose() * linv;
    symmetrize_in_place(&mut inv);
    Ok(inv)
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize_in_place(a: &mut Matrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// `tr(a b)` for square matrices of equal size.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    a.component_mul(&b.transpose()).sum()
}

/// Quadratic form `xᵀ a x`.
pub fn quad_form(a: &Matrix, x: &Vector) -> f64 {
    x.dot(&(a * x))
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
