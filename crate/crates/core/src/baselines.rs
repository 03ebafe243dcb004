//! Collapse-then-match baselines and the evaluation metrics.
//!
//! A baseline first reduces the bipartite data to an `n × n` weighted graph
//! (co-occurrence, covariance, correlation, graphical lasso or nodewise lasso
//! edges) and then aligns `A` to that graph with the same Frank-Wolfe
//! machinery the likelihood matchers use.

use serde::{Deserialize, Serialize};

use crate::assign::{self, QapStepResult};
use crate::gauss_fit::{self, CovarianceEstimate, PenaltyWeights};
use crate::graphs::{self, DoublyStochastic, EdgeSet, Permutation, SeedSet, UnipartiteGraph};
use crate::models::{self, BipartiteData, ModelFamily, MrfParams};
use crate::{ising_fit, linalg, matcher, rng, Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollapseMethod {
    Omp,
    Cov,
    Corr,
    Glasso,
    Mb,
}

impl CollapseMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CollapseMethod::Omp => "omp",
            CollapseMethod::Cov => "cov",
            CollapseMethod::Corr => "corr",
            CollapseMethod::Glasso => "glasso",
            CollapseMethod::Mb => "mb",
        }
    }

    /// Methods that come with an edge estimate.
    pub fn estimates_edges(self) -> bool {
        matches!(self, CollapseMethod::Glasso | CollapseMethod::Mb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedGraph {
    pub matrix: Matrix,
    pub method: CollapseMethod,
    /// Penalty used by the glasso and nodewise estimators.
    pub lambda: Option<f64>,
}

impl CollapsedGraph {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Nonzero off-diagonal pattern.
    pub fn edges(&self) -> EdgeSet {
        EdgeSet::from_matrix(&self.matrix, 0.0)
    }
}

/// `BBᵀ/m`.
pub fn one_mode_projection(data: &BipartiteData) -> CollapsedGraph {
    CollapsedGraph {
        matrix: data.co_occurrence(),
        method: CollapseMethod::Omp,
        lambda: None,
    }
}

pub fn covariance(data: &BipartiteData) -> Result<CollapsedGraph> {
    let cov = gauss_fit::sample_covariance(data)?;
    Ok(CollapsedGraph {
        matrix: cov.sigma_hat,
        method: CollapseMethod::Cov,
        lambda: None,
    })
}

pub fn correlation_matrix(data: &BipartiteData) -> Result<CollapsedGraph> {
    let cov = gauss_fit::sample_covariance(data)?;
    let r = correlation_from(&cov.sigma_hat)?;
    Ok(CollapsedGraph {
        matrix: r,
        method: CollapseMethod::Corr,
        lambda: None,
    })
}

fn correlation_from(sigma: &Matrix) -> Result<Matrix> {
    let n = sigma.nrows();
    let bad: Vec<usize> = (0..n).filter(|&i| !(sigma[(i, i)] > 0.0)).collect();
    if !bad.is_empty() {
        return Err(Error::DegenerateRows(bad));
    }
    let sd: Vec<f64> = (0..n).map(|i| sigma[(i, i)].sqrt()).collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (sigma[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
        }
    }))
}

fn correlation_estimate(data: &BipartiteData) -> Result<CovarianceEstimate> {
    let cov = gauss_fit::sample_covariance(data)?;
    let r = correlation_from(&cov.sigma_hat)?;
    Ok(CovarianceEstimate {
        sigma_hat: r,
        m: cov.m,
        mu_hat: cov.mu_hat,
    })
}

/// Nodewise lasso selection, combined with the OR rule. Gaussian data uses a
/// linear lasso on the standardized rows, binary data the logistic lasso.
pub fn mb_edges(data: &BipartiteData, lambda: f64) -> Result<CollapsedGraph> {
    check_lambda(lambda)?;
    let n = data.n();
    let mut e = Matrix::zeros(n, n);
    match data.family() {
        ModelFamily::Gaussian => {
            let r = correlation_estimate(data)?.sigma_hat;
            for j in 0..n {
                let coef = standardized_lasso(&r, j, lambda);
                for (k, c) in coef.iter().enumerate() {
                    if *c != 0.0 {
                        e[(j, k)] = 1.0;
                        e[(k, j)] = 1.0;
                    }
                }
            }
        }
        ModelFamily::Ising => {
            data.require_binary()?;
            let fit = ising_fit::fit_pseudo_all_nodes_with(
                data,
                &PenaltyWeights::uniform(n),
                lambda,
                ising_fit::LogisticOptions::default(),
                None,
            )?;
            for node in &fit.nodes {
                let j = node.node;
                for k in 0..n {
                    if k != j && node.theta_col[k] != 0.0 {
                        e[(j, k)] = 1.0;
                        e[(k, j)] = 1.0;
                    }
                }
            }
        }
    }
    Ok(CollapsedGraph {
        matrix: e,
        method: CollapseMethod::Mb,
        lambda: Some(lambda),
    })
}

/// Coordinate descent for `½βᵀR₋ⱼβ − r₋ⱼᵀβ + λ‖β‖₁`; entry `j` stays zero.
fn standardized_lasso(r: &Matrix, j: usize, lambda: f64) -> Vec<f64> {
    let n = r.nrows();
    let mut beta = vec![0.0; n];
    for _ in 0..1000 {
        let mut delta = 0.0f64;
        for k in 0..n {
            if k == j {
                continue;
            }
            let mut partial = r[(k, j)];
            for l in 0..n {
                if l != k && l != j {
                    partial -= r[(k, l)] * beta[l];
                }
            }
            let next = gauss_fit::soft_threshold(partial, lambda) / r[(k, k)];
            delta = delta.max((next - beta[k]).abs());
            beta[k] = next;
        }
        if delta < 1e-10 {
            break;
        }
    }
    beta
}

/// `|Θ̂|` off the diagonal from a uniform-weight graphical lasso on the
/// correlation matrix.
pub fn glasso_edges(data: &BipartiteData, lambda: f64) -> Result<CollapsedGraph> {
    check_lambda(lambda)?;
    let cov = correlation_estimate(data)?;
    let fit = gauss_fit::weighted_graphical_lasso(
        &cov,
        &PenaltyWeights::uniform(cov.n()),
        lambda,
        gauss_fit::DEFAULT_TOL,
        gauss_fit::DEFAULT_MAX_SWEEPS,
    )?;
    let mut m = fit.theta_hat.abs();
    m.fill_diagonal(0.0);
    Ok(CollapsedGraph {
        matrix: m,
        method: CollapseMethod::Glasso,
        lambda: Some(lambda),
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("penalty must be positive, got {lambda}")));
    }
    Ok(())
}

/// Penalty path used when a baseline has to pick its own λ.
pub fn baseline_lambda_grid() -> Vec<f64> {
    matcher::log_grid(-2.5, -0.5, 10)
}

/// Refit log-likelihood of `data` on a fixed edge set: Gaussian likelihood on
/// the correlation scale, or the pseudo-likelihood for binary data.
pub fn support_loglik(data: &BipartiteData, support: &EdgeSet) -> Result<f64> {
    match data.family() {
        ModelFamily::Gaussian => {
            let cov = correlation_estimate(data)?;
            let fit = gauss_fit::constrained_gaussian_mle(&cov, support, gauss_fit::DEFAULT_TOL)?;
            Ok(0.5 * cov.m as f64 * gauss_fit::gaussian_profile_loss(&fit.theta_hat, &cov)?)
        }
        ModelFamily::Ising => {
            let params = ising_fit::constrained_pseudo_mle(data, support)?;
            ising_fit::pseudo_loglik(data, &params)
        }
    }
}

/// `loglik − log(m)·|E|/2`.
pub fn ebic_score(data: &BipartiteData, support: &EdgeSet) -> Result<f64> {
    Ok(support_loglik(data, support)? - (data.m() as f64).ln() * support.len() as f64 / 2.0)
}

/// Runs `estimator` over `grid` and keeps the best-scoring estimate. Ties go
/// to the earlier grid point; failed grid points are skipped.
pub fn select_lambda<F>(data: &BipartiteData, grid: &[f64], estimator: F) -> Result<CollapsedGraph>
where
    F: Fn(&BipartiteData, f64) -> Result<CollapsedGraph>,
{
    let mut best: Option<(f64, CollapsedGraph)> = None;
    let mut first_error = None;
    for &lambda in grid {
        let scored = estimator(data, lambda).and_then(|g| Ok((ebic_score(data, &g.edges())?, g)));
        match scored {
            Ok((score, g)) => {
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, g));
                }
            }
            Err(e) => {
                log::debug!("baseline lambda {lambda:.4e} failed: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match (best, first_error) {
        (Some((_, g)), _) => Ok(g),
        (None, Some(e)) => Err(Error::AllLambdasFailed(e.to_string())),
        (None, None) => Err(Error::InvalidParameter("empty penalty grid".into())),
    }
}

/// Collapses `data` with `method`; penalized methods choose λ on
/// [`baseline_lambda_grid`].
pub fn collapse(data: &BipartiteData, method: CollapseMethod) -> Result<CollapsedGraph> {
    match method {
        CollapseMethod::Omp => Ok(one_mode_projection(data)),
        CollapseMethod::Cov => covariance(data),
        CollapseMethod::Corr => correlation_matrix(data),
        CollapseMethod::Glasso => select_lambda(data, &baseline_lambda_grid(), glasso_edges),
        CollapseMethod::Mb => select_lambda(data, &baseline_lambda_grid(), mb_edges),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollapseMatchOptions {
    pub fw_max: usize,
    pub fw_tol: f64,
    /// Extra Frank-Wolfe runs from random interior points.
    pub fw_restarts: usize,
    pub rng_seed: u64,
}

impl Default for CollapseMatchOptions {
    fn default() -> Self {
        CollapseMatchOptions {
            fw_max: assign::DEFAULT_FW_MAX,
            fw_tol: assign::DEFAULT_FW_TOL,
            fw_restarts: matcher::DEFAULT_FW_RESTARTS,
            rng_seed: 0,
        }
    }
}

/// Aligns `A` to a collapsed graph by maximizing `Tr(DᵀAD·C)` from the
/// barycenter (plus random restarts). Among the projected runs the one with
/// the highest `Tr(PᵀAP·C)` wins, earlier runs on ties.
pub fn collapse_and_match(
    a: &UnipartiteGraph,
    collapsed: &CollapsedGraph,
    seeds: Option<&SeedSet>,
    opts: &CollapseMatchOptions,
) -> Result<Permutation> {
    let n = a.n();
    if collapsed.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: collapsed.n(),
        });
    }
    let mut c = collapsed.matrix.clone();
    c.fill_diagonal(0.0);
    let seeds = seeds.cloned().unwrap_or_default();
    seeds.validate_for(n)?;
    let (free_a, free_b) = assign::free_vertices(&seeds, n);
    let align = |start: &DoublyStochastic| -> Result<QapStepResult> {
        if seeds.is_empty() {
            assign::faq_step(a, &c, start, opts.fw_max, opts.fw_tol)
        } else {
            let j0 = DoublyStochastic::new_unchecked(matcher::free_block(start.matrix(), &free_a, &free_b));
            assign::seeded_faq_step(a, &c, &seeds, &j0, opts.fw_max, opts.fw_tol)
        }
    };
    let fresh = matcher::initial_alignment(n, &seeds);
    let mut best = align(&fresh)?.projected;
    let mut best_value = matched_value(a, &best, &c)?;
    for r in 0..opts.fw_restarts {
        let start = matcher::perturbed_start(&fresh, &free_a, &free_b, rng::derive(opts.rng_seed, r as u64));
        let p = align(&start)?.projected;
        let v = matched_value(a, &p, &c)?;
        if v > best_value {
            best = p;
            best_value = v;
        }
    }
    Ok(best)
}

fn matched_value(a: &UnipartiteGraph, p: &Permutation, c: &Matrix) -> Result<f64> {
    Ok(linalg::trace_product(&graphs::permute_matrix(a.adj(), p)?, c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseBruteForce {
    pub permutation: Permutation,
    /// `Tr(PᵀAP·C)` at the optimum.
    pub value: f64,
}

/// Exhaustive `argmax_P Tr(PᵀAP·C)`, equivalently `argmin_P ‖PᵀAP − C‖²_F`.
/// The first optimum in lexicographic order wins.
pub fn brute_force_collapse_match(a: &UnipartiteGraph, collapsed: &CollapsedGraph) -> Result<CollapseBruteForce> {
    let n = a.n();
    if collapsed.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: collapsed.n(),
        });
    }
    if n > models::MAX_BRUTE_FORCE_N {
        return Err(Error::Capacity {
            what: "brute-force matching",
            max: models::MAX_BRUTE_FORCE_N,
            got: n,
        });
    }
    let mut c = collapsed.matrix.clone();
    c.fill_diagonal(0.0);
    let tol = 1e-12 * (1.0 + linalg::max_abs(&c)) * (n * n) as f64;
    let mut best: Option<CollapseBruteForce> = None;
    for p in Permutation::all(n) {
        let v = matched_value(a, &p, &c)?;
        if best.as_ref().is_none_or(|b| v > b.value + tol) {
            best = Some(CollapseBruteForce { permutation: p, value: v });
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Fraction of vertices with `p_hat(i) ≠ p_star(i)`.
pub fn vertex_error(p_hat: &Permutation, p_star: &Permutation) -> Result<f64> {
    if p_hat.len() != p_star.len() {
        return Err(Error::Dimension {
            expected: p_star.len(),
            got: p_hat.len(),
        });
    }
    if p_hat.is_empty() {
        return Ok(0.0);
    }
    let wrong = p_hat.map().iter().zip(p_star.map()).filter(|(x, y)| x != y).count();
    Ok(wrong as f64 / p_hat.len() as f64)
}

/// `‖P*ᵀAP* − P̂ᵀAP̂‖²_F / (2‖A‖²_F)`.
pub fn edge_error(a: &UnipartiteGraph, p_hat: &Permutation, p_star: &Permutation) -> Result<f64> {
    let norm = a.adj().norm_squared();
    if norm == 0.0 {
        return Err(Error::Degenerate("edge error is undefined for an empty graph".into()));
    }
    let diff = graphs::permute_matrix(a.adj(), p_star)? - graphs::permute_matrix(a.adj(), p_hat)?;
    Ok(diff.norm_squared() / (2.0 * norm))
}

/// False positive and false negative rates over pairs `i > j`. A rate is
/// `None` when its denominator is empty.
pub fn edge_confusion(w_hat: &EdgeSet, w_true: &EdgeSet) -> Result<(Option<f64>, Option<f64>)> {
    let n = w_true.n();
    if w_hat.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: w_hat.n(),
        });
    }
    let (mut fp, mut neg, mut fneg, mut pos) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        for j in 0..i {
            let est = w_hat.contains(i, j);
            if w_true.contains(i, j) {
                pos += 1;
                if !est {
                    fneg += 1;
                }
            } else {
                neg += 1;
                if est {
                    fp += 1;
                }
            }
        }
    }
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok((rate(fp, neg), rate(fneg, pos)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub vertex_error: f64,
    pub edge_error: f64,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

/// All metrics for one estimate. `w_hat` is the method's edge estimate in B's
/// labeling, if it has one; the truth is the support of `P*ᵀAP*`.
pub fn error_report(a: &UnipartiteGraph, p_hat: &Permutation, p_star: &Permutation, w_hat: Option<&EdgeSet>) -> Result<ErrorReport> {
    let vertex_error = vertex_error(p_hat, p_star)?;
    let edge_error = edge_error(a, p_hat, p_star)?;
    let (fpr, fnr) = match w_hat {
        Some(w) => edge_confusion(w, &EdgeSet::support_of(a, p_star)?)?,
        None => (None, None),
    };
    Ok(ErrorReport {
        vertex_error,
        edge_error,
        fpr,
        fnr,
    })
}

/// Relabels MRF parameters from A's vertex order into B's: vertex `i` of A
/// becomes vertex `p(i)`.
pub fn permute_params(params: &MrfParams, p: &Permutation) -> Result<MrfParams> {
    let theta = graphs::permute_matrix(params.theta(), p)?;
    let mut beta = Vector::zeros(params.n());
    for i in 0..params.n() {
        beta[p.get(i)] = params.beta()[i];
    }
    match params.family() {
        ModelFamily::Ising => MrfParams::ising(theta, beta),
        ModelFamily::Gaussian => MrfParams::gaussian(theta, beta),
    }
}

/// A four-vertex chain with equal couplings whose two even vertices are far
/// more active than the odd ones. Co-occurrence then links the two active
/// vertices, which are not adjacent.
pub fn fig2_beta_scenario() -> Result<(UnipartiteGraph, MrfParams)> {
    let a = graphs::chain_graph(4)?;
    let theta = a.adj() * 0.8;
    let beta = Vector::from_row_slice(&[1.5, -1.5, 1.5, -1.5]);
    Ok((a, MrfParams::ising(theta, beta)?))
}

/// Six vertices in two components: a strongly coupled path on {0, 1, 2} and a
/// weakly coupled triangle on {3, 4, 5}. Marginal association fills in the
/// path's missing edge, so the strong block looks like the triangle.
pub fn fig2_theta_scenario() -> Result<(UnipartiteGraph, MrfParams)> {
    let a = UnipartiteGraph::from_edges(6, &[(0, 1), (1, 2), (3, 4), (3, 5), (4, 5)])?;
    let mut theta = Matrix::zeros(6, 6);
    for (i, j) in a.edges() {
        let w = if i < 3 { 1.5 } else { 0.2 };
        theta[(i, j)] = w;
        theta[(j, i)] = w;
    }
    let beta = Vector::from_iterator(6, (0..6).map(|i| -theta.row(i).sum()));
    Ok((a, MrfParams::ising(theta, beta)?))
}

/// `β_i = −½ Σ_j Θ_ij`.
pub fn centered_beta(theta: &Matrix) -> Vector {
    Vector::from_iterator(theta.nrows(), (0..theta.nrows()).map(|i| -0.5 * theta.row(i).sum()))
}
