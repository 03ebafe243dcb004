//! The alternating matchers. For every penalty level the relaxed alignment `D`
//! and the field parameters are updated in turn, starting from the barycenter:
//! a weighted sparse fit of `Θ` with weights `1 − (DᵀAD)_ij`, then a
//! Frank-Wolfe step on `Tr(DᵀAD|Θ|)`. Every projected permutation becomes a
//! candidate and the final choice maximizes the refitted profile likelihood.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{self, QapStepResult, DEFAULT_FW_MAX, DEFAULT_FW_TOL};
use crate::gauss_fit::{self, CovarianceEstimate, GlassoOptions, PenaltyWeights, PrecisionEstimate};
use crate::graphs::{DoublyStochastic, EdgeSet, Permutation, SeedSet, UnipartiteGraph};
use crate::ising_fit::{self, LogisticOptions, NodewiseFit};
use crate::models::{BipartiteData, ModelFamily};
use crate::{rng, Error, Matrix, Result, Vector};
use rand::Rng;

pub const DEFAULT_MAX_OUTER: usize = 20;
pub const DEFAULT_CONV_TOL: f64 = 1e-4;
/// Allowed decrease of the penalized objective between half-steps.
pub const MONOTONE_SLACK: f64 = 1e-6;
pub const DEFAULT_FW_RESTARTS: usize = 10;

/// Ten log-spaced values from 10^-2.5 to 10^-0.5.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(-2.5, -0.5, 10)
}

/// `count` values with log10 evenly spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..count)
            .map(|s| 10f64.powf(lo + (hi - lo) * s as f64 / (count - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub lambda_grid: Vec<f64>,
    /// Alternations per penalty level.
    pub max_outer: usize,
    pub fw_max: usize,
    pub fw_tol: f64,
    pub conv_tol: f64,
    pub seeds: Option<SeedSet>,
    pub fw_start: FwStart,
    /// Extra alignment runs per step from random points near the barycenter.
    pub fw_restarts: usize,
    pub rng_seed: u64,
}

/// Starting point of each alignment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FwStart {
    /// The previous relaxed alignment.
    Current,
    /// The barycenter (or seeds plus barycenter).
    Barycenter,
    /// Both of the above, keeping the higher relaxed objective.
    #[default]
    Best,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            lambda_grid: default_lambda_grid(),
            max_outer: DEFAULT_MAX_OUTER,
            fw_max: DEFAULT_FW_MAX,
            fw_tol: DEFAULT_FW_TOL,
            conv_tol: DEFAULT_CONV_TOL,
            seeds: None,
            fw_start: FwStart::default(),
            fw_restarts: DEFAULT_FW_RESTARTS,
            rng_seed: 0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config("lambda grid values must be finite and positive".into()));
        }
        if self.lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("lambda grid must be strictly ascending".into()));
        }
        if self.max_outer == 0 || self.fw_max == 0 {
            return Err(Error::Config("max_outer and fw_max must be positive".into()));
        }
        if !(self.fw_tol >= 0.0) || !(self.conv_tol >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// One alternation `t` at penalty level `lambda_index`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub lambda_index: usize,
    pub lambda: f64,
    pub t: usize,
    /// Penalized objective after the alignment half-step.
    pub objective: f64,
    /// Unpenalized loss used for the convergence test.
    pub profile_loss: f64,
    pub permutation: Permutation,
    pub converged: bool,
    /// The penalized objective did not drop by more than the slack.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaFailure {
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub permutation: Permutation,
    pub score: f64,
    /// Position of first discovery in the candidate list.
    pub discovered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub p_hat: Permutation,
    /// Refitted profile estimate at `p_hat`.
    pub theta_hat: Matrix,
    pub beta_hat: Option<Vector>,
    pub lambda_star: f64,
    pub selection_score: f64,
    pub trace: Vec<TraceRecord>,
    pub failures: Vec<LambdaFailure>,
    /// Unique candidates, best first.
    pub ranking: Vec<ScoredCandidate>,
}

impl MatchResult {
    pub fn any_nonmonotone(&self) -> bool {
        self.trace.iter().any(|r| !r.monotone)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    InvCov,
    Pseudo,
}

/// Penalized Gaussian matcher.
pub fn match_invcov(a: &UnipartiteGraph, data: &BipartiteData, cfg: &MatchConfig) -> Result<MatchResult> {
    run(a, data, cfg, Variant::InvCov)
}

/// Penalized pseudolikelihood matcher for binary data.
pub fn match_pseudo(a: &UnipartiteGraph, data: &BipartiteData, cfg: &MatchConfig) -> Result<MatchResult> {
    data.require_binary()?;
    run(a, data, cfg, Variant::Pseudo)
}

fn abs_offdiag(theta: &Matrix) -> Matrix {
    let mut m = theta.abs();
    m.fill_diagonal(0.0);
    // Exact symmetry keeps the alignment step's input check happy.
    crate::linalg::symmetrize_in_place(&mut m);
    m
}

fn weighted_penalty(theta: &Matrix, w: &PenaltyWeights) -> f64 {
    let n = theta.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += w.matrix()[(i, j)] * theta[(i, j)].abs();
            }
        }
    }
    total
}

/// Free block of `D` (unseeded rows and columns, ascending).
pub(crate) fn free_block(d: &Matrix, free_a: &[usize], free_b: &[usize]) -> Matrix {
    Matrix::from_fn(free_a.len(), free_b.len(), |r, c| d[(free_a[r], free_b[c])])
}

pub(crate) fn initial_alignment(n: usize, seeds: &SeedSet) -> DoublyStochastic {
    if seeds.is_empty() {
        return DoublyStochastic::barycenter(n);
    }
    let (free_a, free_b) = assign::free_vertices(seeds, n);
    let mut d = Matrix::zeros(n, n);
    for &(x, y) in seeds.pairs() {
        d[(x, y)] = 1.0;
    }
    let k = free_a.len() as f64;
    for &x in &free_a {
        for &y in &free_b {
            d[(x, y)] = 1.0 / k;
        }
    }
    DoublyStochastic::new_unchecked(d)
}

/// `(J + K)/2` on the free block, with `K` a Sinkhorn-balanced random matrix.
pub(crate) fn perturbed_start(base: &DoublyStochastic, free_a: &[usize], free_b: &[usize], seed: u64) -> DoublyStochastic {
    let k = free_a.len();
    let mut r = rng::from_seed(seed);
    let mut kmat = Matrix::from_fn(k, k, |_, _| r.random::<f64>() + 1e-3);
    for _ in 0..500 {
        for mut row in kmat.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        for mut col in kmat.column_iter_mut() {
            let s = col.sum();
            col /= s;
        }
    }
    let mut d = base.matrix().clone();
    for (ri, &x) in free_a.iter().enumerate() {
        for (ci, &y) in free_b.iter().enumerate() {
            d[(x, y)] = 0.5 * d[(x, y)] + 0.5 * kmat[(ri, ci)];
        }
    }
    DoublyStochastic::new_unchecked(d)
}

enum FitState {
    Gauss(Option<PrecisionEstimate>),
    Pseudo(Option<Vec<NodewiseFit>>),
}

struct LambdaRun {
    candidates: Vec<Permutation>,
    trace: Vec<TraceRecord>,
}

fn run_lambda(
    a: &UnipartiteGraph,
    data: &BipartiteData,
    cov: Option<&CovarianceEstimate>,
    cfg: &MatchConfig,
    variant: Variant,
    lambda_index: usize,
) -> Result<LambdaRun> {
    let n = a.n();
    let lambda = cfg.lambda_grid[lambda_index];
    let seeds = cfg.seeds.clone().unwrap_or_default();
    let (free_a, free_b) = assign::free_vertices(&seeds, n);
    let mut d = initial_alignment(n, &seeds);
    let mut state = match variant {
        Variant::InvCov => FitState::Gauss(None),
        Variant::Pseudo => FitState::Pseudo(None),
    };
    let m = data.m() as f64;
    let mut out = LambdaRun {
        candidates: Vec::new(),
        trace: Vec::new(),
    };
    let mut last_loss: Option<f64> = None;
    let mut last_objective = f64::NEG_INFINITY;

    for t in 1..=cfg.max_outer {
        let weights = PenaltyWeights::from_alignment(a, &d);
        // Parameter half-step.
        let (theta, loss) = match &mut state {
            FitState::Gauss(warm) => {
                let cov = cov.expect("covariance for the Gaussian matcher");
                let fit = gauss_fit::weighted_graphical_lasso_with(cov, &weights, lambda, GlassoOptions::default(), warm.as_ref())?;
                let loss = gauss_fit::gaussian_profile_loss(&fit.theta_hat, cov)?;
                let theta = fit.theta_hat.clone();
                *warm = Some(fit);
                (theta, loss)
            }
            FitState::Pseudo(warm) => {
                let fit = ising_fit::fit_pseudo_all_nodes_with(data, &weights, lambda, LogisticOptions::default(), warm.as_deref())?;
                let loss = ising_fit::pseudo_loglik(data, &fit.params)? / m;
                let theta = fit.params.theta.clone();
                *warm = Some(fit.nodes);
                (theta, loss)
            }
        };
        let after_fit = loss - lambda * weighted_penalty(&theta, &weights);

        // Alignment half-step.
        let mabs = abs_offdiag(&theta);
        let align = |start: &DoublyStochastic| -> Result<QapStepResult> {
            if seeds.is_empty() {
                assign::faq_step(a, &mabs, start, cfg.fw_max, cfg.fw_tol)
            } else {
                let j0 = DoublyStochastic::new_unchecked(free_block(start.matrix(), &free_a, &free_b));
                assign::seeded_faq_step(a, &mabs, &seeds, &j0, cfg.fw_max, cfg.fw_tol)
            }
        };
        let fresh = initial_alignment(n, &seeds);
        let mut runs = match cfg.fw_start {
            FwStart::Current => vec![align(&d)?],
            FwStart::Barycenter => vec![align(&fresh)?],
            FwStart::Best => vec![align(&d)?, align(&fresh)?],
        };
        for r in 0..cfg.fw_restarts {
            let stream = rng::derive(rng::derive(cfg.rng_seed, lambda_index as u64), (t * 1000 + r) as u64);
            runs.push(align(&perturbed_start(&fresh, &free_a, &free_b, stream))?);
        }
        // The first run is the warm start when there is one; later runs only
        // replace it on a strictly higher relaxed objective.
        let value = |r: &QapStepResult| *r.objective_trace.last().expect("non-empty trace");
        let mut best = 0;
        for (i, r) in runs.iter().enumerate() {
            if value(r) > value(&runs[best]) {
                best = i;
            }
        }
        for (i, r) in runs.iter().enumerate() {
            if i != best {
                out.candidates.push(r.projected.clone());
            }
            out.candidates.push(assign::swap_local_search(a, &mabs, &r.projected, &free_a)?);
        }
        let step = runs.swap_remove(best);
        d = step.d;
        let after_align = loss - lambda * weighted_penalty(&theta, &PenaltyWeights::from_alignment(a, &d));

        let scale = 1.0 + after_fit.abs();
        let monotone = variant == Variant::Pseudo
            || (after_fit >= last_objective - MONOTONE_SLACK * scale && after_align >= after_fit - MONOTONE_SLACK * scale);
        if !monotone {
            log::warn!(
                "lambda {lambda:.4e}, t = {t}: penalized objective decreased ({last_objective:.6} -> {after_fit:.6} -> {after_align:.6})"
            );
        }
        last_objective = after_align;

        let converged = last_loss.is_some_and(|prev| (loss - prev).abs() < cfg.conv_tol);
        last_loss = Some(loss);
        out.candidates.push(step.projected.clone());
        out.trace.push(TraceRecord {
            lambda_index,
            lambda,
            t,
            objective: after_align,
            profile_loss: loss,
            permutation: step.projected,
            converged,
            monotone,
        });
        if converged {
            break;
        }
    }
    Ok(out)
}

fn run(a: &UnipartiteGraph, data: &BipartiteData, cfg: &MatchConfig, variant: Variant) -> Result<MatchResult> {
    cfg.validate()?;
    let n = a.n();
    if data.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: data.n(),
        });
    }
    if let Some(seeds) = &cfg.seeds {
        seeds.validate_for(n)?;
    }
    let cov = match variant {
        Variant::InvCov => Some(gauss_fit::sample_covariance(data)?),
        Variant::Pseudo => None,
    };

    let runs: Vec<Result<LambdaRun>> = (0..cfg.lambda_grid.len())
        .into_par_iter()
        .map(|s| run_lambda(a, data, cov.as_ref(), cfg, variant, s))
        .collect();

    let mut trace = Vec::new();
    let mut failures = Vec::new();
    let mut candidates = Vec::new();
    let mut origin = Vec::new();
    for (s, r) in runs.into_iter().enumerate() {
        match r {
            Ok(run) => {
                for p in run.candidates {
                    candidates.push(p);
                    origin.push(cfg.lambda_grid[s]);
                }
                trace.extend(run.trace);
            }
            Err(e) => {
                log::warn!("lambda {:.4e} failed: {e}", cfg.lambda_grid[s]);
                failures.push(LambdaFailure {
                    lambda: cfg.lambda_grid[s],
                    message: e.to_string(),
                });
            }
        }
    }
    if candidates.is_empty() {
        let first = failures.first().map(|f| f.message.clone()).unwrap_or_default();
        return Err(Error::AllLambdasFailed(first));
    }

    let family = match variant {
        Variant::InvCov => ModelFamily::Gaussian,
        Variant::Pseudo => ModelFamily::Ising,
    };
    let ranking = evaluate_candidates(a, data, &candidates, family)?;
    let best = ranking[0].clone();
    let (theta_hat, beta_hat) = profile_fit(a, data, &best.permutation, family)?;
    Ok(MatchResult {
        p_hat: best.permutation,
        theta_hat,
        beta_hat,
        lambda_star: origin[best.discovered],
        selection_score: best.score,
        trace,
        failures,
        ranking,
    })
}

/// Refitted profile estimate for the support of `PᵀAP`.
fn profile_fit(a: &UnipartiteGraph, data: &BipartiteData, p: &Permutation, family: ModelFamily) -> Result<(Matrix, Option<Vector>)> {
    let support = EdgeSet::support_of(a, p)?;
    match family {
        ModelFamily::Gaussian => {
            let cov = gauss_fit::sample_covariance(data)?;
            Ok((
                gauss_fit::constrained_gaussian_mle(&cov, &support, gauss_fit::DEFAULT_TOL)?.theta_hat,
                None,
            ))
        }
        ModelFamily::Ising => {
            let params = ising_fit::constrained_pseudo_mle(data, &support)?;
            Ok((params.theta, Some(params.beta)))
        }
    }
}

/// Profile score of one permutation: the Gaussian profile loss of the
/// support-constrained MLE, or the pseudolikelihood of the support-constrained
/// nodewise fit.
pub fn profile_score(a: &UnipartiteGraph, data: &BipartiteData, p: &Permutation, family: ModelFamily) -> Result<f64> {
    let support = EdgeSet::support_of(a, p)?;
    score_support(data, &support, family, None)
}

fn score_support(data: &BipartiteData, support: &EdgeSet, family: ModelFamily, cov: Option<&CovarianceEstimate>) -> Result<f64> {
    match family {
        ModelFamily::Gaussian => {
            let owned;
            let cov = match cov {
                Some(c) => c,
                None => {
                    owned = gauss_fit::sample_covariance(data)?;
                    &owned
                }
            };
            let fit = gauss_fit::constrained_gaussian_mle(cov, support, gauss_fit::DEFAULT_TOL)?;
            gauss_fit::gaussian_profile_loss(&fit.theta_hat, cov)
        }
        ModelFamily::Ising => ising_fit::pseudo_loglik(data, &ising_fit::constrained_pseudo_mle(data, support)?),
    }
}

/// Scores unique candidates, best first; equal scores keep discovery order.
/// Candidates whose refit fails score `-inf`.
pub fn evaluate_candidates(
    a: &UnipartiteGraph,
    data: &BipartiteData,
    candidates: &[Permutation],
    family: ModelFamily,
) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate permutations".into()));
    }
    let cov = match family {
        ModelFamily::Gaussian => Some(gauss_fit::sample_covariance(data)?),
        ModelFamily::Ising => {
            data.require_binary()?;
            None
        }
    };
    let mut unique: Vec<(usize, &Permutation)> = Vec::new();
    let mut seen: HashMap<&Permutation, ()> = HashMap::new();
    for (i, p) in candidates.iter().enumerate() {
        if seen.insert(p, ()).is_none() {
            unique.push((i, p));
        }
    }
    let supports: Vec<EdgeSet> = unique.iter().map(|(_, p)| EdgeSet::support_of(a, p)).collect::<Result<_>>()?;
    let mut distinct: Vec<&EdgeSet> = Vec::new();
    let mut index: HashMap<&EdgeSet, usize> = HashMap::new();
    for s in &supports {
        if !index.contains_key(s) {
            index.insert(s, distinct.len());
            distinct.push(s);
        }
    }
    let scores: Vec<f64> = distinct
        .par_iter()
        .map(|s| match score_support(data, s, family, cov.as_ref()) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("candidate refit failed: {e}");
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut ranked: Vec<ScoredCandidate> = unique
        .iter()
        .zip(&supports)
        .map(|(&(i, p), s)| ScoredCandidate {
            permutation: p.clone(),
            score: scores[index[s]],
            discovered: i,
        })
        .collect();
    ranked.sort_by(|x, y| y.score.total_cmp(&x.score));
    Ok(ranked)
}
