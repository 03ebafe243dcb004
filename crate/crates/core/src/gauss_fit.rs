//! Gaussian-side estimation: sample covariance, the profile loss
//! `log det Θ − tr(Σ̂Θ)`, an entrywise-weighted graphical lasso and the
//! support-constrained Gaussian MLE.
//!
//! The graphical lasso is the column-wise block coordinate scheme of Friedman,
//! Hastie and Tibshirani run on the covariance iterate `W ≈ Θ⁻¹`, with one
//! penalty `λ·ω_ij` per off-diagonal entry and an unpenalized diagonal.

use crate::graphs::{DoublyStochastic, EdgeSet, UnipartiteGraph};
use crate::models::BipartiteData;
use crate::{linalg, Error, Matrix, Result, Vector};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 200;
/// Off-support weight multiplier (times `max |Σ̂|`) for the constrained MLE.
pub const OFF_SUPPORT_WEIGHT: f64 = 1e6;

const INNER_TOL: f64 = 1e-13;
const INNER_MAX_PASSES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    /// `(1/m) Σ_k (B_k − μ̂)(B_k − μ̂)ᵀ`.
    pub sigma_hat: Matrix,
    pub m: usize,
    pub mu_hat: Vector,
}

impl CovarianceEstimate {
    pub fn n(&self) -> usize {
        self.sigma_hat.nrows()
    }

    /// Wraps a known covariance matrix (e.g. a correlation matrix).
    pub fn from_matrix(sigma_hat: Matrix, m: usize) -> Result<Self> {
        if sigma_hat.nrows() != sigma_hat.ncols() {
            return Err(Error::Dimension {
                expected: sigma_hat.nrows(),
                got: sigma_hat.ncols(),
            });
        }
        if linalg::max_asymmetry(&sigma_hat) > 1e-10 {
            return Err(Error::Domain("covariance must be symmetric".into()));
        }
        let n = sigma_hat.nrows();
        Ok(CovarianceEstimate {
            sigma_hat,
            m,
            mu_hat: Vector::zeros(n),
        })
    }
}

pub fn sample_covariance(data: &BipartiteData) -> Result<CovarianceEstimate> {
    let m = data.m();
    if m < 2 {
        return Err(Error::InsufficientData(format!("sample covariance needs m >= 2, got {m}")));
    }
    let b = data.matrix();
    let mu_hat = b.column_mean();
    let mut centered = b.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mu_hat;
    }
    // Constant rows get exactly zero variance despite round-off in the mean.
    for i in 0..data.n() {
        let row = b.row(i);
        if row.iter().all(|&v| v == row[0]) {
            centered.row_mut(i).fill(0.0);
        }
    }
    let mut sigma_hat = (&centered * centered.transpose()) / m as f64;
    linalg::symmetrize_in_place(&mut sigma_hat);
    Ok(CovarianceEstimate { sigma_hat, m, mu_hat })
}

/// `log det Θ − tr(Σ̂Θ)`.
pub fn gaussian_profile_loss(theta: &Matrix, cov: &CovarianceEstimate) -> Result<f64> {
    if theta.nrows() != cov.n() {
        return Err(Error::Dimension {
            expected: cov.n(),
            got: theta.nrows(),
        });
    }
    let log_det = linalg::log_det_pd(theta).map_err(|_| Error::Domain("precision matrix is not positive definite".into()))?;
    Ok(log_det - linalg::trace_product(&cov.sigma_hat, theta))
}

/// Non-negative symmetric off-diagonal penalty multipliers `ω_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyWeights {
    omega: Matrix,
}

impl PenaltyWeights {
    /// Validates `omega`; the diagonal is ignored and stored as zero.
    pub fn new(mut omega: Matrix) -> Result<Self> {
        if omega.nrows() != omega.ncols() {
            return Err(Error::Dimension {
                expected: omega.nrows(),
                got: omega.ncols(),
            });
        }
        let n = omega.nrows();
        for i in 0..n {
            omega[(i, i)] = 0.0;
            for j in 0..n {
                let w = omega[(i, j)];
                if w.is_nan() || w < 0.0 {
                    return Err(Error::Domain(format!("penalty weight {w} at ({i}, {j})")));
                }
                if w != omega[(j, i)] {
                    return Err(Error::Domain(format!("asymmetric penalty weight at ({i}, {j})")));
                }
            }
        }
        Ok(PenaltyWeights { omega })
    }

    pub fn uniform(n: usize) -> Self {
        let mut omega = Matrix::from_element(n, n, 1.0);
        omega.fill_diagonal(0.0);
        PenaltyWeights { omega }
    }

    /// `ω_ij = max(0, 1 − (DᵀAD)_ij)`.
    pub fn from_alignment(a: &UnipartiteGraph, d: &DoublyStochastic) -> Self {
        let dm = d.matrix();
        let aligned = dm.transpose() * a.adj() * dm;
        let n = aligned.nrows();
        let mut omega = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    // Averaging the two triangles removes round-off asymmetry.
                    let v = 0.5 * (aligned[(i, j)] + aligned[(j, i)]);
                    omega[(i, j)] = (1.0 - v).max(0.0);
                }
            }
        }
        PenaltyWeights { omega }
    }

    /// `on` for pairs in `support`, `off` elsewhere.
    pub fn from_support(support: &EdgeSet, on: f64, off: f64) -> Self {
        let n = support.n();
        let omega = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else if support.contains(i, j) {
                on
            } else {
                off
            }
        });
        PenaltyWeights { omega }
    }

    pub fn n(&self) -> usize {
        self.omega.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.omega
    }

    fn min_positive(&self) -> Option<f64> {
        self.omega.iter().copied().filter(|&w| w > 0.0).reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub theta_hat: Matrix,
    /// Penalized objective at `theta_hat`.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Penalized objective after every outer sweep.
    pub objective_trace: Vec<f64>,
    /// Covariance iterate `W`, reused for warm starts.
    pub(crate) covariance: Matrix,
    pub(crate) coefficients: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassoOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        GlassoOptions {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Penalized objective `log det Θ − tr(Σ̂Θ) − λ Σ_{i≠j} ω_ij |Θ_ij|`.
pub fn penalized_objective(theta: &Matrix, cov: &CovarianceEstimate, weights: &PenaltyWeights, lambda: f64) -> f64 {
    let base = match gaussian_profile_loss(theta, cov) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    let n = theta.nrows();
    let mut penalty = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && theta[(i, j)] != 0.0 {
                penalty += weights.omega[(i, j)] * theta[(i, j)].abs();
            }
        }
    }
    base - lambda * penalty
}

/// Largest violation of the weighted graphical lasso optimality conditions.
pub fn glasso_kkt_residual(theta: &Matrix, cov: &CovarianceEstimate, weights: &PenaltyWeights, lambda: f64) -> f64 {
    let inv = match linalg::inverse_pd(theta) {
        Ok(inv) => inv,
        Err(_) => return f64::INFINITY,
    };
    let s = &cov.sigma_hat;
    let n = theta.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((inv[(i, i)] - s[(i, i)]).abs());
        for j in 0..n {
            if i == j {
                continue;
            }
            let pen = lambda * weights.omega[(i, j)];
            let gap = s[(i, j)] - inv[(i, j)];
            let v = if theta[(i, j)] == 0.0 {
                (gap.abs() - pen).max(0.0)
            } else {
                (gap + pen * theta[(i, j)].signum()).abs()
            };
            worst = worst.max(v);
        }
    }
    worst
}

pub fn weighted_graphical_lasso(
    cov: &CovarianceEstimate,
    weights: &PenaltyWeights,
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<PrecisionEstimate> {
    weighted_graphical_lasso_with(cov, weights, lambda, GlassoOptions { tol, max_sweeps }, None)
}

/// As [`weighted_graphical_lasso`], optionally warm-started from an earlier fit
/// on the same covariance.
pub fn weighted_graphical_lasso_with(
    cov: &CovarianceEstimate,
    weights: &PenaltyWeights,
    lambda: f64,
    opts: GlassoOptions,
    warm: Option<&PrecisionEstimate>,
) -> Result<PrecisionEstimate> {
    let n = cov.n();
    if weights.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: weights.n(),
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let s = &cov.sigma_hat;
    if let Some(i) = (0..n).find(|&i| !(s[(i, i)] > 0.0)) {
        return Err(Error::Domain(format!(
            "variable {i} has zero sample variance; the likelihood is unbounded"
        )));
    }
    if !linalg::is_positive_definite(s) && !(lambda * weights.min_positive().unwrap_or(0.0) > 0.0) {
        return Err(Error::Domain(
            "sample covariance is singular and the penalty is zero; the likelihood is unbounded".into(),
        ));
    }
    let penalty = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { lambda * weights.omega[(i, j)] });

    let (mut w, mut coef) = match warm {
        Some(prev) if prev.covariance.nrows() == n => (prev.covariance.clone(), prev.coefficients.clone()),
        _ => (s.clone(), Matrix::zeros(n, n)),
    };
    for i in 0..n {
        w[(i, i)] = s[(i, i)];
    }

    if n == 1 {
        let theta_hat = Matrix::from_element(1, 1, 1.0 / s[(0, 0)]);
        let objective = penalized_objective(&theta_hat, cov, weights, lambda);
        return Ok(PrecisionEstimate {
            theta_hat,
            objective,
            iterations: 0,
            kkt_residual: 0.0,
            converged: true,
            objective_trace: vec![objective],
            covariance: w,
            coefficients: coef,
        });
    }

    let mut trace = Vec::new();
    let mut best: Option<(Matrix, f64, f64)> = None;
    let mut wb = Vector::zeros(n);
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        for j in 0..n {
            solve_column(&w, s, &penalty, j, &mut coef, &mut wb);
            for i in 0..n {
                if i != j {
                    w[(i, j)] = wb[i];
                    w[(j, i)] = wb[i];
                }
            }
        }
        let theta = assemble_precision(&w, &coef);
        let objective = penalized_objective(&theta, cov, weights, lambda);
        let kkt = glasso_kkt_residual(&theta, cov, weights, lambda);
        trace.push(objective);
        if !objective.is_finite() && !w.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(
                "graphical lasso diverged; the penalized likelihood is unbounded".into(),
            ));
        }
        let improves = best.as_ref().is_none_or(|(_, _, k)| kkt < *k);
        if improves {
            best = Some((theta, objective, kkt));
        }
        if kkt <= opts.tol {
            converged = true;
            break;
        }
    }
    let (theta_hat, objective, kkt_residual) = best.expect("at least one sweep");
    if !converged {
        log::warn!("graphical lasso stopped after {sweeps} sweeps with KKT residual {kkt_residual:.3e}");
    }
    Ok(PrecisionEstimate {
        theta_hat,
        objective,
        iterations: sweeps,
        kkt_residual,
        converged,
        objective_trace: trace,
        covariance: w,
        coefficients: coef,
    })
}

/// Lasso `min ½βᵀW₁₁β − s₁₂ᵀβ + Σ_k pen_kj |β_k|` for column `j` by cyclic
/// coordinate descent. Leaves `W₁₁β` in `wb` (entry `j` unused).
fn solve_column(w: &Matrix, s: &Matrix, penalty: &Matrix, j: usize, coef: &mut Matrix, wb: &mut Vector) {
    let n = w.nrows();
    wb.fill(0.0);
    for k in 0..n {
        let bk = coef[(k, j)];
        if k != j && bk != 0.0 {
            for i in 0..n {
                if i != j {
                    wb[i] += w[(i, k)] * bk;
                }
            }
        }
    }
    for _ in 0..INNER_MAX_PASSES {
        let mut max_change = 0.0f64;
        for k in 0..n {
            if k == j {
                continue;
            }
            let old = coef[(k, j)];
            let wkk = w[(k, k)];
            let r = s[(k, j)] - (wb[k] - wkk * old);
            let new = soft_threshold(r, penalty[(k, j)]) / wkk;
            let delta = new - old;
            if delta != 0.0 {
                coef[(k, j)] = new;
                for i in 0..n {
                    if i != j {
                        wb[i] += w[(i, k)] * delta;
                    }
                }
                max_change = max_change.max(delta.abs() * wkk.sqrt());
            }
        }
        if max_change < INNER_TOL {
            break;
        }
    }
}

/// `Θ` from the column regressions: `θ_jj = 1/(w_jj − w₁₂ᵀβ)`, `θ₁₂ = −β θ_jj`.
fn assemble_precision(w: &Matrix, coef: &Matrix) -> Matrix {
    let n = w.nrows();
    let mut theta = Matrix::zeros(n, n);
    for j in 0..n {
        let mut dot = 0.0;
        for k in 0..n {
            if k != j {
                dot += w[(k, j)] * coef[(k, j)];
            }
        }
        let tjj = 1.0 / (w[(j, j)] - dot);
        theta[(j, j)] = tjj;
        for k in 0..n {
            if k != j {
                theta[(k, j)] = -coef[(k, j)] * tjj;
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if coef[(i, j)] == 0.0 || coef[(j, i)] == 0.0 {
                0.0
            } else {
                0.5 * (theta[(i, j)] + theta[(j, i)])
            };
            theta[(i, j)] = v;
            theta[(j, i)] = v;
        }
    }
    theta
}

pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Gaussian MLE of `Θ` subject to `Θ_ij = 0` off `support` (diagonal free).
///
/// Computed as the weighted graphical lasso with zero weight on the support
/// and a prohibitive weight elsewhere, followed by exact zeroing and a
/// diagonal repair if the result is not numerically positive definite.
pub fn constrained_gaussian_mle(cov: &CovarianceEstimate, support: &EdgeSet, tol: f64) -> Result<PrecisionEstimate> {
    let n = cov.n();
    if support.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: support.n(),
        });
    }
    let off = OFF_SUPPORT_WEIGHT * linalg::max_abs(&cov.sigma_hat).max(f64::MIN_POSITIVE);
    let weights = PenaltyWeights::from_support(support, 0.0, off);
    let opts = GlassoOptions {
        tol,
        max_sweeps: DEFAULT_MAX_SWEEPS,
    };
    let mut fit = weighted_graphical_lasso_with(cov, &weights, 1.0, opts, None)?;
    for i in 0..n {
        for j in 0..n {
            if i != j && !support.contains(i, j) {
                fit.theta_hat[(i, j)] = 0.0;
            }
        }
    }
    if !linalg::is_positive_definite(&fit.theta_hat) {
        for i in 0..n {
            fit.theta_hat[(i, i)] += 1e-8;
        }
    }
    fit.kkt_residual = constrained_stationarity(&fit.theta_hat, cov, support);
    fit.converged = fit.kkt_residual <= tol;
    fit.objective = gaussian_profile_loss(&fit.theta_hat, cov).unwrap_or(f64::NEG_INFINITY);
    if !fit.converged {
        log::warn!("constrained Gaussian MLE did not converge: gradient norm {:.3e}", fit.kkt_residual);
    }
    Ok(fit)
}

/// `max |(Θ⁻¹ − Σ̂)_ij|` over the support and the diagonal.
pub fn constrained_stationarity(theta: &Matrix, cov: &CovarianceEstimate, support: &EdgeSet) -> f64 {
    let inv = match linalg::inverse_pd(theta) {
        Ok(inv) => inv,
        Err(_) => return f64::INFINITY,
    };
    let n = theta.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j || support.contains(i, j) {
                worst = worst.max((inv[(i, j)] - cov.sigma_hat[(i, j)]).abs());
            }
        }
    }
    worst
}
