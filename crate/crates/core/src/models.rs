//! Generative Markov random field models for the columns of `B`, plus
//! exact-enumeration oracles for small Ising models.
//!
//! Ising states live in `{0,1}ⁿ` with joint
//! `p(x) ∝ exp(βᵀx + Σ_{i≠j} Θ_ij x_i x_j)`. The double sum runs over ordered
//! pairs, so each edge contributes `2Θ_ij x_i x_j` and the Gibbs conditional
//! logit is `β_i + 2 Σ_j Θ_ij x_j`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gauss_fit::{self, CovarianceEstimate};
use crate::graphs::{permute_matrix, EdgeSet, Permutation, UnipartiteGraph};
use crate::{linalg, rng, Error, Matrix, Result, Vector};

/// Largest state space enumerated by the exact Ising routines.
pub const MAX_ENUMERATION_N: usize = 20;
/// Largest `n` for exhaustive search over permutations.
pub const MAX_BRUTE_FORCE_N: usize = 7;
/// Natural-parameter magnitude beyond which an estimate is reported at the boundary.
pub const THETA_CAP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    /// Binary entries, `C(x) = 0`.
    Ising,
    /// Real entries, `C(x) = x²`.
    Gaussian,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelFamily::Ising => "ising",
            ModelFamily::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ising" => Ok(ModelFamily::Ising),
            "gaussian" => Ok(ModelFamily::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown model family `{other}`"))),
        }
    }
}

/// Interaction matrix `Θ` and node effects `β` of a pairwise field.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfParams {
    family: ModelFamily,
    theta: Matrix,
    beta: Vector,
}

impl MrfParams {
    pub fn ising(theta: Matrix, beta: Vector) -> Result<Self> {
        Self::check_shapes(&theta, &beta)?;
        if (0..theta.nrows()).any(|i| theta[(i, i)] != 0.0) {
            return Err(Error::Model("Ising interaction matrix must have a zero diagonal".into()));
        }
        Ok(MrfParams {
            family: ModelFamily::Ising,
            theta,
            beta,
        })
    }

    /// Gaussian field with precision `theta` and linear term `beta` (mean `Θ⁻¹β`).
    pub fn gaussian(theta: Matrix, beta: Vector) -> Result<Self> {
        Self::check_shapes(&theta, &beta)?;
        linalg::cholesky(&theta)?;
        Ok(MrfParams {
            family: ModelFamily::Gaussian,
            theta,
            beta,
        })
    }

    pub fn gaussian_with_mean(theta: Matrix, mu: Vector) -> Result<Self> {
        let beta = &theta * &mu;
        Self::gaussian(theta, beta)
    }

    fn check_shapes(theta: &Matrix, beta: &Vector) -> Result<()> {
        if theta.nrows() != theta.ncols() || theta.nrows() != beta.len() {
            return Err(Error::Dimension {
                expected: theta.nrows(),
                got: beta.len(),
            });
        }
        if linalg::max_asymmetry(theta) > 0.0 {
            return Err(Error::Model("interaction matrix must be symmetric".into()));
        }
        Ok(())
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn beta(&self) -> &Vector {
        &self.beta
    }

    /// Gaussian mean `μ = Θ⁻¹β`.
    pub fn mean(&self) -> Result<Vector> {
        self.require(ModelFamily::Gaussian)?;
        Ok(linalg::inverse_pd(&self.theta)? * &self.beta)
    }

    fn require(&self, family: ModelFamily) -> Result<()> {
        if self.family == family {
            Ok(())
        } else {
            Err(Error::Model(format!("expected {family} parameters, got {}", self.family)))
        }
    }
}

/// `n × m` incidence matrix; column `k` is one bipartite-only vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteData {
    b: Matrix,
    family: ModelFamily,
}

impl BipartiteData {
    pub fn new(b: Matrix, family: ModelFamily) -> Result<Self> {
        if b.ncols() == 0 {
            return Err(Error::InsufficientData("bipartite matrix has no columns".into()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("bipartite matrix has non-finite entries".into()));
        }
        if family == ModelFamily::Ising && b.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain("Ising data must be binary".into()));
        }
        Ok(BipartiteData { b, family })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.b
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn require_binary(&self) -> Result<()> {
        if self.b.iter().all(|&v| v == 0.0 || v == 1.0) {
            Ok(())
        } else {
            Err(Error::Domain("operation requires binary bipartite data".into()))
        }
    }

    /// Rows restricted to `keep`, in order.
    pub fn select_rows(&self, keep: &[usize]) -> BipartiteData {
        let b = Matrix::from_fn(keep.len(), self.m(), |r, c| self.b[(keep[r], c)]);
        BipartiteData { b, family: self.family }
    }

    /// Co-occurrence matrix `BBᵀ/m`.
    pub fn co_occurrence(&self) -> Matrix {
        (&self.b * self.b.transpose()) / self.m() as f64
    }
}

/// Gibbs sampler settings. Each run of `columns_per_chain` consecutive columns
/// comes from one chain: `burn_in` sweeps, then a column every `thin` sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub columns_per_chain: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            burn_in: 500,
            thin: 5,
            columns_per_chain: 1,
        }
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Draws `m` columns from the Ising model by systematic-scan Gibbs sampling.
pub fn ising_gibbs_sample(params: &MrfParams, m: usize, cfg: GibbsConfig, seed: u64) -> Result<BipartiteData> {
    params.require(ModelFamily::Ising)?;
    if m == 0 {
        return Err(Error::InvalidSize("need at least one column".into()));
    }
    if cfg.burn_in == 0 {
        log::info!("Gibbs sampler running without burn-in");
    }
    let n = params.n();
    let per_chain = cfg.columns_per_chain.max(1);
    let thin = cfg.thin.max(1);
    let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && params.theta[(i, j)] != 0.0)
                .map(|j| (j, 2.0 * params.theta[(i, j)]))
                .collect()
        })
        .collect();

    let mut b = Matrix::zeros(n, m);
    let mut state = vec![0.0f64; n];
    let sweep = |state: &mut [f64], rng: &mut rng::Rng| {
        for i in 0..n {
            let eta = params.beta[i] + neighbors[i].iter().map(|&(j, w)| w * state[j]).sum::<f64>();
            state[i] = if rng.random::<f64>() < logistic(eta) { 1.0 } else { 0.0 };
        }
    };
    for (chain, start) in (0..m).step_by(per_chain).enumerate() {
        let mut rng = rng::from_seed(rng::derive(seed, chain as u64));
        for s in state.iter_mut() {
            *s = if rng.random::<bool>() { 1.0 } else { 0.0 };
        }
        for _ in 0..cfg.burn_in {
            sweep(&mut state, &mut rng);
        }
        for col in start..(start + per_chain).min(m) {
            if col > start {
                for _ in 0..thin {
                    sweep(&mut state, &mut rng);
                }
            }
            for i in 0..n {
                b[(i, col)] = state[i];
            }
        }
    }
    BipartiteData::new(b, ModelFamily::Ising)
}

/// Draws `m` i.i.d. columns from `N(Θ⁻¹β, Θ⁻¹)` through the Cholesky factor of `Θ`.
pub fn gaussian_sample(params: &MrfParams, m: usize, seed: u64) -> Result<BipartiteData> {
    params.require(ModelFamily::Gaussian)?;
    if m == 0 {
        return Err(Error::InvalidSize("need at least one column".into()));
    }
    let n = params.n();
    let l = linalg::cholesky(&params.theta)?;
    let mu = params.mean()?;
    let lt = l.transpose();
    let mut rng = rng::from_seed(seed);
    let mut b = Matrix::zeros(n, m);
    let mut z = Vector::zeros(n);
    for k in 0..m {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        // Lᵀ y = z gives Cov(y) = (L Lᵀ)⁻¹ = Θ⁻¹.
        let y = lt.solve_upper_triangular(&z).ok_or(Error::NotPositiveDefinite { minor: n })?;
        b.set_column(k, &(&y + &mu));
    }
    BipartiteData::new(b, ModelFamily::Gaussian)
}

/// Exact Ising distribution over `{0,1}ⁿ`; bit `i` of a state index is `x_i`.
#[derive(Debug, Clone)]
pub struct IsingTable {
    n: usize,
    log_probs: Vec<f64>,
    log_partition: f64,
}

impl IsingTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn partition(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn log_prob(&self, state: usize) -> f64 {
        self.log_probs[state]
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.log_probs[state].exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    /// `E[x_i x_j]` (with `E[x_i]` on the diagonal).
    pub fn second_moments(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n, n);
        for (s, lp) in self.log_probs.iter().enumerate() {
            let p = lp.exp();
            for i in 0..n {
                if s >> i & 1 == 1 {
                    for j in i..n {
                        if s >> j & 1 == 1 {
                            out[(i, j)] += p;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }
}

pub fn state_index(x: impl IntoIterator<Item = f64>) -> usize {
    x.into_iter()
        .enumerate()
        .fold(0, |acc, (i, v)| if v != 0.0 { acc | (1 << i) } else { acc })
}

/// Unnormalized log-weight of every state, visited in Gray-code order so each
/// step updates the energy in `O(n)`.
fn ising_energies(theta: &Matrix, beta: &Vector) -> Vec<f64> {
    let n = beta.len();
    let mut energies = vec![0.0; 1 << n];
    let mut x = vec![false; n];
    let mut energy = 0.0;
    let mut gray = 0usize;
    for step in 1..(1usize << n) {
        let i = step.trailing_zeros() as usize;
        let field = beta[i] + 2.0 * (0..n).filter(|&j| j != i && x[j]).map(|j| theta[(i, j)]).sum::<f64>();
        if x[i] {
            energy -= field;
        } else {
            energy += field;
        }
        x[i] = !x[i];
        gray ^= 1 << i;
        energies[gray] = energy;
    }
    energies
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Enumerates all `2ⁿ` states of an Ising model.
pub fn exact_ising_distribution(params: &MrfParams) -> Result<IsingTable> {
    params.require(ModelFamily::Ising)?;
    let n = params.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::Capacity {
            what: "exact Ising enumeration",
            max: MAX_ENUMERATION_N,
            got: n,
        });
    }
    let energies = ising_energies(&params.theta, &params.beta);
    let log_partition = log_sum_exp(energies.iter().copied());
    let log_probs = energies.into_iter().map(|e| e - log_partition).collect();
    Ok(IsingTable {
        n,
        log_probs,
        log_partition,
    })
}

fn ising_energy(params: &MrfParams, x: impl Fn(usize) -> f64) -> f64 {
    let n = params.n();
    let mut e = 0.0;
    for i in 0..n {
        let xi = x(i);
        if xi == 0.0 {
            continue;
        }
        e += params.beta[i] * xi;
        for j in (i + 1)..n {
            e += 2.0 * params.theta[(i, j)] * xi * x(j);
        }
    }
    e
}

/// Mean per-column log-likelihood of `B`.
pub fn exact_loglik(data: &BipartiteData, params: &MrfParams) -> Result<f64> {
    let n = params.n();
    if data.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: data.n(),
        });
    }
    let b = data.matrix();
    let m = data.m() as f64;
    match params.family {
        ModelFamily::Ising => {
            data.require_binary()?;
            if n > MAX_ENUMERATION_N {
                return Err(Error::Capacity {
                    what: "exact Ising likelihood",
                    max: MAX_ENUMERATION_N,
                    got: n,
                });
            }
            let log_z = log_sum_exp(ising_energies(&params.theta, &params.beta).into_iter());
            let total: f64 = (0..data.m()).map(|k| ising_energy(params, |i| b[(i, k)])).sum();
            Ok(total / m - log_z)
        }
        ModelFamily::Gaussian => {
            let log_det = linalg::log_det_pd(&params.theta)?;
            let mu = params.mean()?;
            let mut quad = 0.0;
            for k in 0..data.m() {
                let d = b.column(k) - &mu;
                quad += linalg::quad_form(&params.theta, &d.into_owned());
            }
            let ln_2pi = (2.0 * std::f64::consts::PI).ln();
            Ok(-0.5 * n as f64 * ln_2pi + 0.5 * log_det - 0.5 * quad / m)
        }
    }
}

/// The one-parameter Ising family `Θ = θ·W`, `β = 0`, for a fixed binary `W`.
///
/// The log-partition `Ψ(θ) = log Σ_y exp(θ·yᵀWy)` depends on `W` only through
/// the distribution of `u = yᵀWy`, which is the same for every relabeling of
/// `A`; it is tabulated once.
#[derive(Debug, Clone)]
pub struct RestrictedIsing {
    /// Distinct values of `u` (ascending) with their multiplicities.
    levels: Vec<(f64, f64)>,
}

/// Profile fit of the restricted model at one permutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedFit {
    /// Profile MLE of `θ`; `±∞` when the sufficient statistic sits on the boundary.
    pub theta_hat: f64,
    /// Mean per-column log-likelihood at `theta_hat`.
    pub loglik: f64,
    /// `tr(PᵀAP · BBᵀ/m)`.
    pub statistic: f64,
}

impl RestrictedIsing {
    pub fn new(a: &UnipartiteGraph) -> Result<Self> {
        let n = a.n();
        if n > MAX_ENUMERATION_N {
            return Err(Error::Capacity {
                what: "restricted Ising enumeration",
                max: MAX_ENUMERATION_N,
                got: n,
            });
        }
        if !a.has_edges() {
            return Err(Error::Degenerate("restricted model needs a non-empty graph".into()));
        }
        // With Θ = A and β = 0 the energy is Σ_{i≠j} A_ij y_i y_j = u.
        let energies = ising_energies(a.adj(), &Vector::zeros(n));
        let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
        for u in energies {
            *counts.entry(u.to_bits()).or_insert(0.0) += 1.0;
        }
        let levels = counts.into_iter().map(|(bits, c)| (f64::from_bits(bits), c)).collect();
        Ok(RestrictedIsing { levels })
    }

    fn u_min(&self) -> f64 {
        self.levels[0].0
    }

    fn u_max(&self) -> f64 {
        self.levels[self.levels.len() - 1].0
    }

    /// `(Ψ, Ψ′, Ψ″)` at `theta`.
    pub fn log_partition_derivatives(&self, theta: f64) -> (f64, f64, f64) {
        let shift = self.levels.iter().map(|&(u, _)| theta * u).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for &(u, c) in &self.levels {
            let w = c * (theta * u - shift).exp();
            z += w;
            s1 += w * u;
            s2 += w * u * u;
        }
        let mean = s1 / z;
        (shift + z.ln(), mean, (s2 / z - mean * mean).max(0.0))
    }

    pub fn log_partition(&self, theta: f64) -> f64 {
        self.log_partition_derivatives(theta).0
    }

    fn boundary_loglik(&self, level: f64) -> f64 {
        let count = self.levels.iter().find(|&&(u, _)| u == level).map_or(1.0, |&(_, c)| c);
        -count.ln()
    }

    /// Solves `Ψ′(θ) = statistic` by bracketing and bisection.
    pub fn fit(&self, statistic: f64) -> RestrictedFit {
        let scale = self.u_max().max(1.0);
        let at_bound = |level: f64| (statistic - level).abs() <= 1e-12 * scale;
        if statistic <= self.u_min() || at_bound(self.u_min()) {
            let loglik = self.boundary_loglik(self.u_min());
            return RestrictedFit {
                theta_hat: f64::NEG_INFINITY,
                loglik,
                statistic,
            };
        }
        if statistic >= self.u_max() || at_bound(self.u_max()) {
            let loglik = self.boundary_loglik(self.u_max());
            return RestrictedFit {
                theta_hat: f64::INFINITY,
                loglik,
                statistic,
            };
        }
        let slope = |t: f64| self.log_partition_derivatives(t).1;
        let loglik_at = |t: f64| t * statistic - self.log_partition(t);
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        while slope(lo) > statistic {
            lo *= 2.0;
            if lo < -THETA_CAP {
                return RestrictedFit {
                    theta_hat: f64::NEG_INFINITY,
                    loglik: loglik_at(-THETA_CAP),
                    statistic,
                };
            }
        }
        while slope(hi) < statistic {
            hi *= 2.0;
            if hi > THETA_CAP {
                return RestrictedFit {
                    theta_hat: f64::INFINITY,
                    loglik: loglik_at(THETA_CAP),
                    statistic,
                };
            }
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < statistic {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        RestrictedFit {
            theta_hat: theta,
            loglik: loglik_at(theta),
            statistic,
        }
    }
}

/// `tr(PᵀAP · BBᵀ/m)`.
pub fn restricted_statistic(a: &UnipartiteGraph, p: &Permutation, co_occurrence: &Matrix) -> Result<f64> {
    let w = permute_matrix(a.adj(), p)?;
    Ok(linalg::trace_product(&w, co_occurrence))
}

/// Profile MLE of `θ` in the model `Θ = θ·PᵀAP`, `β = 0`.
pub fn restricted_profile_theta(a: &UnipartiteGraph, p: &Permutation, data: &BipartiteData) -> Result<RestrictedFit> {
    data.require_binary()?;
    if data.n() != a.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            got: data.n(),
        });
    }
    let model = RestrictedIsing::new(a)?;
    Ok(model.fit(restricted_statistic(a, p, &data.co_occurrence())?))
}

/// Exact Ising MLE with `Θ` supported on `support` and free `β`, by damped
/// Newton ascent on the enumerated log-likelihood.
#[derive(Debug, Clone)]
pub struct ExactIsingFit {
    pub params: MrfParams,
    /// Mean per-column log-likelihood.
    pub loglik: f64,
    pub converged: bool,
}

pub fn ising_constrained_mle(data: &BipartiteData, support: &EdgeSet) -> Result<ExactIsingFit> {
    const MAX_N: usize = 16;
    data.require_binary()?;
    let n = data.n();
    if n > MAX_N {
        return Err(Error::Capacity {
            what: "exact constrained Ising MLE",
            max: MAX_N,
            got: n,
        });
    }
    if support.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: support.n(),
        });
    }
    let pairs = support.pairs();
    let dim = n + pairs.len();
    let states = 1usize << n;
    let stats_of = |s: usize| -> Vec<f64> {
        let bit = |i: usize| (s >> i & 1) as f64;
        let mut v: Vec<f64> = (0..n).map(bit).collect();
        v.extend(pairs.iter().map(|&(i, j)| 2.0 * bit(i) * bit(j)));
        v
    };
    let table: Vec<Vec<f64>> = (0..states).map(stats_of).collect();
    let b = data.matrix();
    let mut mean_stats = vec![0.0; dim];
    for k in 0..data.m() {
        let s = state_index((0..n).map(|i| b[(i, k)]));
        for (acc, v) in mean_stats.iter_mut().zip(&table[s]) {
            *acc += v;
        }
    }
    mean_stats.iter_mut().for_each(|v| *v /= data.m() as f64);

    let evaluate = |eta: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let energies: Vec<f64> = table.iter().map(|t| t.iter().zip(eta).map(|(a, b)| a * b).sum()).collect();
        let log_z = log_sum_exp(energies.iter().copied());
        let mut mean = vec![0.0; dim];
        let mut cov = vec![0.0; dim * dim];
        for (t, e) in table.iter().zip(&energies) {
            let p = (e - log_z).exp();
            for a in 0..dim {
                mean[a] += p * t[a];
                for c in a..dim {
                    cov[a * dim + c] += p * t[a] * t[c];
                }
            }
        }
        for a in 0..dim {
            for c in a..dim {
                let v = cov[a * dim + c] - mean[a] * mean[c];
                cov[a * dim + c] = v;
                cov[c * dim + a] = v;
            }
        }
        let ll = mean_stats.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>() - log_z;
        (ll, mean, cov)
    };

    let mut eta = vec![0.0; dim];
    let (mut ll, mut mean, mut cov) = evaluate(&eta);
    let mut converged = false;
    for _ in 0..500 {
        let grad: Vec<f64> = mean_stats.iter().zip(&mean).map(|(a, b)| a - b).collect();
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < 1e-10 {
            converged = true;
            break;
        }
        let h = Matrix::from_fn(dim, dim, |a, c| cov[a * dim + c] + if a == c { 1e-12 } else { 0.0 });
        let g = Vector::from_vec(grad.clone());
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand: Vec<f64> = eta
                .iter()
                .zip(step.iter())
                .map(|(e, s)| (e + t * s).clamp(-THETA_CAP, THETA_CAP))
                .collect();
            let (cll, cmean, ccov) = evaluate(&cand);
            if cll >= ll + 1e-4 * t * slope {
                eta = cand;
                ll = cll;
                mean = cmean;
                cov = ccov;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let beta = Vector::from_iterator(n, eta[..n].iter().copied());
    let mut theta = Matrix::zeros(n, n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        theta[(i, j)] = eta[n + k];
        theta[(j, i)] = eta[n + k];
    }
    Ok(ExactIsingFit {
        params: MrfParams::ising(theta, beta)?,
        loglik: ll,
        converged,
    })
}

/// Profile likelihood used to rank permutations in exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileModel {
    /// `Θ = θ·PᵀAP`, `β = 0`, exact likelihood.
    IsingRestricted,
    /// `Θ` free on the support of `PᵀAP`, `β` free, exact likelihood.
    IsingExact,
    /// Support-constrained Gaussian MLE, profile loss `log det Θ − tr(Σ̂Θ)`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceMatch {
    pub permutation: Permutation,
    pub score: f64,
    /// `θ̂` at the optimum (restricted Ising model only).
    pub theta_hat: Option<f64>,
}

/// Exhaustive profile-likelihood matching with the model implied by `family`.
pub fn brute_force_match(a: &UnipartiteGraph, data: &BipartiteData, family: ModelFamily) -> Result<BruteForceMatch> {
    let model = match family {
        ModelFamily::Ising => ProfileModel::IsingRestricted,
        ModelFamily::Gaussian => ProfileModel::Gaussian,
    };
    brute_force_match_with(a, data, model)
}

/// Exhaustive search over all `n!` permutations; ties go to the
/// lexicographically smallest map.
pub fn brute_force_match_with(a: &UnipartiteGraph, data: &BipartiteData, model: ProfileModel) -> Result<BruteForceMatch> {
    let n = a.n();
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::Capacity {
            what: "brute-force matching",
            max: MAX_BRUTE_FORCE_N,
            got: n,
        });
    }
    if data.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: data.n(),
        });
    }
    let mut scorer = ProfileScorer::new(a, data, model)?;
    let mut best: Option<(Permutation, f64)> = None;
    for p in Permutation::all(n) {
        let score = scorer.score(&p)?;
        let better = match &best {
            None => true,
            Some((_, s)) => score > *s + 1e-12 * s.abs().max(1.0),
        };
        if better {
            best = Some((p, score));
        }
    }
    let (permutation, score) = best.expect("at least one permutation");
    let theta_hat = match model {
        ProfileModel::IsingRestricted => Some(restricted_profile_theta(a, &permutation, data)?.theta_hat),
        _ => None,
    };
    Ok(BruteForceMatch {
        permutation,
        score,
        theta_hat,
    })
}

/// Scores permutations under one profile model, caching by support pattern.
pub struct ProfileScorer<'a> {
    a: &'a UnipartiteGraph,
    data: &'a BipartiteData,
    model: ProfileModel,
    restricted: Option<(RestrictedIsing, Matrix)>,
    cov: Option<CovarianceEstimate>,
    cache: HashMap<EdgeSet, f64>,
}

impl<'a> ProfileScorer<'a> {
    pub fn new(a: &'a UnipartiteGraph, data: &'a BipartiteData, model: ProfileModel) -> Result<Self> {
        let mut restricted = None;
        let mut cov = None;
        match model {
            ProfileModel::IsingRestricted => {
                data.require_binary()?;
                restricted = Some((RestrictedIsing::new(a)?, data.co_occurrence()));
            }
            ProfileModel::IsingExact => data.require_binary()?,
            ProfileModel::Gaussian => cov = Some(gauss_fit::sample_covariance(data)?),
        }
        Ok(ProfileScorer {
            a,
            data,
            model,
            restricted,
            cov,
            cache: HashMap::new(),
        })
    }

    pub fn score(&mut self, p: &Permutation) -> Result<f64> {
        if let Some((model, co)) = &self.restricted {
            return Ok(model.fit(restricted_statistic(self.a, p, co)?).loglik);
        }
        let support = EdgeSet::support_of(self.a, p)?;
        if let Some(&s) = self.cache.get(&support) {
            return Ok(s);
        }
        let s = match self.model {
            ProfileModel::IsingExact => ising_constrained_mle(self.data, &support)?.loglik,
            ProfileModel::Gaussian => {
                let cov = self.cov.as_ref().expect("covariance computed for Gaussian model");
                let fit = gauss_fit::constrained_gaussian_mle(cov, &support, gauss_fit::DEFAULT_TOL)?;
                gauss_fit::gaussian_profile_loss(&fit.theta_hat, cov)?
            }
            ProfileModel::IsingRestricted => unreachable!(),
        };
        self.cache.insert(support, s);
        Ok(s)
    }
}
