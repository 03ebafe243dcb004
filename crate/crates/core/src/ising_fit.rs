//! Ising-side estimation: the log-pseudolikelihood of binary data and
//! weighted-lasso nodewise logistic regressions.
//!
//! Responses are coded in {0,1}. Node `j` is regressed on the other rows of
//! `B` with conditional logit `β_j + Σ_i Θ_ij B_ik`. The nodewise objective is
//! the per-column average log-likelihood minus `λ Σ_i ω_ij |Θ_ij|`.

use rayon::prelude::*;

use crate::gauss_fit::{soft_threshold, PenaltyWeights};
use crate::graphs::EdgeSet;
use crate::models::{BipartiteData, THETA_CAP};
use crate::{Error, Matrix, Result, Vector};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_PASSES: usize = 200;

/// Symmetric couplings with zero diagonal plus per-node intercepts.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoParams {
    pub theta: Matrix,
    pub beta: Vector,
}

impl PseudoParams {
    pub fn new(theta: Matrix, beta: Vector) -> Result<Self> {
        let n = theta.nrows();
        if theta.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: theta.ncols(),
            });
        }
        if beta.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: beta.len(),
            });
        }
        if (0..n).any(|i| theta[(i, i)] != 0.0) {
            return Err(Error::Model("pseudolikelihood couplings need a zero diagonal".into()));
        }
        Ok(PseudoParams { theta, beta })
    }

    pub fn zeros(n: usize) -> Self {
        PseudoParams {
            theta: Matrix::zeros(n, n),
            beta: Vector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }
}

/// One penalized logistic regression of node `node` on the others.
#[derive(Debug, Clone, PartialEq)]
pub struct NodewiseFit {
    pub node: usize,
    /// Coefficients on the other nodes; entry `node` is exactly 0.
    pub theta_col: Vector,
    pub beta_j: f64,
    /// Penalized average log-likelihood at the solution.
    pub objective: f64,
    pub kkt_residual: f64,
    pub passes: usize,
    pub converged: bool,
    /// Some coefficient hit the ±50 cap (separable data).
    pub capped: bool,
    /// Objective after every coordinate pass.
    pub objective_trace: Vec<f64>,
}

/// All nodewise fits together with their symmetrized combination.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoFit {
    pub params: PseudoParams,
    pub nodes: Vec<NodewiseFit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log P(y | logit η)` for `y ∈ {0,1}`.
fn bernoulli_loglik(y: f64, eta: f64) -> f64 {
    if y == 1.0 {
        -log1p_exp(-eta)
    } else {
        -log1p_exp(eta)
    }
}

/// `Σ_j Σ_k log P(B_jk | B_{−j,k})` under the {0,1} logistic conditionals.
pub fn pseudo_loglik(data: &BipartiteData, params: &PseudoParams) -> Result<f64> {
    data.require_binary()?;
    let n = data.n();
    if params.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: params.n(),
        });
    }
    let b = data.matrix();
    // Column k of the logits is β + Θᵀ B_k.
    let mut eta = params.theta.transpose() * b;
    let mut total = 0.0;
    for k in 0..data.m() {
        for j in 0..n {
            eta[(j, k)] += params.beta[j];
            total += bernoulli_loglik(b[(j, k)], eta[(j, k)]);
        }
    }
    Ok(total)
}

/// Column-sparse view of `Bᵀ`: for each node, the columns where it is non-zero.
pub(crate) struct Design {
    m: usize,
    rows: Vec<Vec<f64>>,
    support: Vec<Vec<u32>>,
}

impl Design {
    pub(crate) fn new(data: &BipartiteData) -> Self {
        let b = data.matrix();
        let rows: Vec<Vec<f64>> = (0..data.n()).map(|i| b.row(i).iter().copied().collect()).collect();
        let support = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(k, _)| k as u32).collect())
            .collect();
        Design {
            m: data.m(),
            rows,
            support,
        }
    }

    fn n(&self) -> usize {
        self.rows.len()
    }
}

/// Coordinate status: free with a penalty, or fixed at zero.
fn penalties(n: usize, j: usize, weights: &PenaltyWeights, lambda: f64) -> Vec<Option<f64>> {
    (0..n)
        .map(|i| {
            let w = weights.matrix()[(i, j)];
            if i == j || w.is_infinite() {
                None
            } else {
                Some(lambda * w)
            }
        })
        .collect()
}

struct NodeSolver<'a> {
    design: &'a Design,
    j: usize,
    pen: Vec<Option<f64>>,
    inv_m: f64,
    eta: Vec<f64>,
    loglik: f64,
    theta: Vec<f64>,
    beta: f64,
}

impl<'a> NodeSolver<'a> {
    fn y(&self) -> &[f64] {
        &self.design.rows[self.j]
    }

    fn penalty(&self) -> f64 {
        self.theta
            .iter()
            .zip(&self.pen)
            .map(|(t, p)| p.map_or(0.0, |p| if *t != 0.0 { p * t.abs() } else { 0.0 }))
            .sum()
    }

    fn objective(&self) -> f64 {
        self.loglik * self.inv_m - self.penalty()
    }

    fn recompute(&mut self) {
        let m = self.design.m;
        self.eta = vec![self.beta; m];
        for (i, t) in self.theta.iter().enumerate() {
            if *t != 0.0 {
                let x = &self.design.rows[i];
                for &k in &self.design.support[i] {
                    self.eta[k as usize] += t * x[k as usize];
                }
            }
        }
        let y = self.y();
        self.loglik = self.eta.iter().zip(y).map(|(&e, &yk)| bernoulli_loglik(yk, e)).sum();
    }

    /// Average gradient and curvature of the log-likelihood along a coordinate,
    /// with `None` for the intercept.
    fn grad_curv(&self, coord: Option<usize>) -> (f64, f64, f64) {
        let y = self.y();
        let (mut g, mut h, mut x2) = (0.0, 0.0, 0.0);
        match coord {
            None => {
                for (e, yk) in self.eta.iter().zip(y) {
                    let p = sigmoid(*e);
                    g += yk - p;
                    h += p * (1.0 - p);
                }
                x2 = self.design.m as f64;
            }
            Some(i) => {
                let x = &self.design.rows[i];
                for &k in &self.design.support[i] {
                    let k = k as usize;
                    let p = sigmoid(self.eta[k]);
                    g += x[k] * (y[k] - p);
                    h += x[k] * x[k] * p * (1.0 - p);
                    x2 += x[k] * x[k];
                }
            }
        }
        (g * self.inv_m, h * self.inv_m, x2 * self.inv_m)
    }

    /// Log-likelihood after shifting the coordinate by `delta`.
    fn shifted_loglik(&self, coord: Option<usize>, delta: f64) -> f64 {
        let y = self.y();
        match coord {
            None => self.eta.iter().zip(y).map(|(&e, &yk)| bernoulli_loglik(yk, e + delta)).sum(),
            Some(i) => {
                let x = &self.design.rows[i];
                let mut ll = self.loglik;
                for &k in &self.design.support[i] {
                    let k = k as usize;
                    ll += bernoulli_loglik(y[k], self.eta[k] + delta * x[k]) - bernoulli_loglik(y[k], self.eta[k]);
                }
                ll
            }
        }
    }

    fn apply(&mut self, coord: Option<usize>, delta: f64, new_loglik: f64) {
        match coord {
            None => {
                self.beta += delta;
                self.eta.iter_mut().for_each(|e| *e += delta);
            }
            Some(i) => {
                self.theta[i] += delta;
                let x = &self.design.rows[i];
                for &k in &self.design.support[i] {
                    self.eta[k as usize] += delta * x[k as usize];
                }
            }
        }
        self.loglik = new_loglik;
    }

    /// One coordinate update; returns the absolute change.
    fn update(&mut self, coord: Option<usize>) -> f64 {
        let (current, pen) = match coord {
            None => (self.beta, 0.0),
            Some(i) => (self.theta[i], self.pen[i].expect("free coordinate")),
        };
        let (g, h, x2) = self.grad_curv(coord);
        if x2 == 0.0 {
            return 0.0;
        }
        let value = |s: &Self, candidate: f64, ll: f64| ll * s.inv_m - pen * candidate.abs();
        let before = value(self, current, self.loglik);
        let step = |curv: f64| (soft_threshold(curv * current + g, pen) / curv).clamp(-THETA_CAP, THETA_CAP);

        let mut target = if h > 1e-300 { step(h) } else { current };
        let mut ll = self.shifted_loglik(coord, target - current);
        if !(value(self, target, ll) >= before) {
            // The 1/4 curvature bound majorizes the loss, so this step never
            // decreases the objective.
            target = step(0.25 * x2);
            ll = self.shifted_loglik(coord, target - current);
            if !(value(self, target, ll) >= before) {
                return 0.0;
            }
        }
        let delta = target - current;
        if delta != 0.0 {
            self.apply(coord, delta, ll);
        }
        delta.abs()
    }

    fn pass(&mut self, active_only: bool) -> f64 {
        let mut max_change = self.update(None);
        for i in 0..self.theta.len() {
            if self.pen[i].is_none() || (active_only && self.theta[i] == 0.0) {
                continue;
            }
            max_change = max_change.max(self.update(Some(i)));
        }
        max_change
    }

    /// Gradient of the average log-likelihood for every free coordinate
    /// (`None` entries stay `0`) and for the intercept.
    fn full_gradient(&self) -> (f64, Vec<f64>) {
        let g0 = self.grad_curv(None).0;
        let g = (0..self.theta.len())
            .map(|i| if self.pen[i].is_some() { self.grad_curv(Some(i)).0 } else { 0.0 })
            .collect();
        (g0, g)
    }

    /// Proximal Newton step on the intercept plus `active`: the lasso on the
    /// local quadratic model is solved by coordinate descent, then a
    /// backtracking line search keeps the objective from decreasing.
    /// Returns false when no improving step was found.
    fn newton_step(&mut self, active: &[usize]) -> bool {
        let m = self.design.m;
        let y = self.y();
        let k = active.len() + 1;
        let p: Vec<f64> = self.eta.iter().map(|&e| sigmoid(e)).collect();
        let wts: Vec<f64> = p.iter().map(|&q| q * (1.0 - q)).collect();
        // Coordinate 0 is the intercept.
        let col = |c: usize| -> Option<usize> {
            if c == 0 {
                None
            } else {
                Some(active[c - 1])
            }
        };
        let mut g = vec![0.0; k];
        let mut h = Matrix::zeros(k, k);
        for kk in 0..m {
            g[0] += y[kk] - p[kk];
            h[(0, 0)] += wts[kk];
        }
        for a in 1..k {
            let ia = active[a - 1];
            let xa = &self.design.rows[ia];
            for &t in &self.design.support[ia] {
                let t = t as usize;
                let v = xa[t];
                g[a] += v * (y[t] - p[t]);
                h[(0, a)] += v * wts[t];
                h[(a, a)] += v * v * wts[t];
                for b in (a + 1)..k {
                    let xb = self.design.rows[active[b - 1]][t];
                    if xb != 0.0 {
                        h[(a, b)] += v * xb * wts[t];
                    }
                }
            }
        }
        for a in 0..k {
            g[a] *= self.inv_m;
            for b in a..k {
                h[(a, b)] *= self.inv_m;
                h[(b, a)] = h[(a, b)];
            }
        }
        let current: Vec<f64> = (0..k).map(|c| col(c).map_or(self.beta, |i| self.theta[i])).collect();
        let pen: Vec<f64> = (0..k)
            .map(|c| col(c).map_or(0.0, |i| self.pen[i].expect("free coordinate")))
            .collect();

        let mut z = current.clone();
        if pen.iter().all(|&q| q == 0.0) {
            // Plain Newton direction; a tiny ridge keeps H invertible when a
            // coordinate is nearly separated.
            let ridge = 1e-12 * (1.0 + h.trace());
            let reg = &h + Matrix::identity(k, k) * ridge;
            if let Some(ch) = reg.cholesky() {
                let d = ch.solve(&Vector::from_column_slice(&g));
                for c in 0..k {
                    z[c] = (current[c] + d[c]).clamp(-THETA_CAP, THETA_CAP);
                }
            }
        }
        // Coordinate descent on −gᵀd + ½dᵀHd + Σ pen|z|, d = z − current,
        // started from the Newton point when there is one.
        let mut hd: Vec<f64> = (0..k).map(|r| (0..k).map(|c| h[(r, c)] * (z[c] - current[c])).sum()).collect();
        for _ in 0..500 {
            let mut change = 0.0f64;
            for c in 0..k {
                let hcc = h[(c, c)];
                if !(hcc > 1e-14) {
                    continue;
                }
                let grad = -g[c] + hd[c];
                let next = (soft_threshold(hcc * z[c] - grad, pen[c]) / hcc).clamp(-THETA_CAP, THETA_CAP);
                let delta = next - z[c];
                if delta != 0.0 {
                    for r in 0..k {
                        hd[r] += h[(r, c)] * delta;
                    }
                    z[c] = next;
                    change = change.max(delta.abs());
                }
            }
            if change < 1e-13 {
                break;
            }
        }
        let dir: Vec<f64> = z.iter().zip(&current).map(|(a, b)| a - b).collect();
        if dir.iter().all(|d| *d == 0.0) {
            return false;
        }
        let before = self.objective();
        let penalty_at = |vals: &[f64]| vals.iter().zip(&pen).map(|(v, q)| q * v.abs()).sum::<f64>();
        let predicted = g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() - (penalty_at(&z) - penalty_at(&current));
        let (saved_theta, saved_beta) = (self.theta.clone(), self.beta);
        let mut t = 1.0;
        for _ in 0..40 {
            for c in 0..k {
                let v = current[c] + t * dir[c];
                match col(c) {
                    None => self.beta = v,
                    Some(i) => self.theta[i] = v,
                }
            }
            self.recompute();
            let after = self.objective();
            if after >= before + 1e-4 * t * predicted.max(0.0) {
                return after > before;
            }
            t *= 0.5;
        }
        self.theta = saved_theta;
        self.beta = saved_beta;
        self.recompute();
        false
    }

    fn kkt_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        if self.beta.abs() < THETA_CAP {
            worst = self.grad_curv(None).0.abs();
        }
        for i in 0..self.theta.len() {
            let Some(pen) = self.pen[i] else { continue };
            let t = self.theta[i];
            if t.abs() >= THETA_CAP {
                continue;
            }
            let g = self.grad_curv(Some(i)).0;
            let v = if t == 0.0 {
                (g.abs() - pen).max(0.0)
            } else {
                (g - pen * t.signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

fn logit_of_mean(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean <= 0.0 {
        -THETA_CAP
    } else if mean >= 1.0 {
        THETA_CAP
    } else {
        (mean / (1.0 - mean)).ln().clamp(-THETA_CAP, THETA_CAP)
    }
}

fn fit_node(
    design: &Design,
    j: usize,
    weights: &PenaltyWeights,
    lambda: f64,
    opts: LogisticOptions,
    warm: Option<&NodewiseFit>,
) -> NodewiseFit {
    let n = design.n();
    let pen = penalties(n, j, weights, lambda);
    let y = &design.rows[j];
    let (mut theta, beta) = match warm {
        Some(w) if w.node == j && w.theta_col.len() == n => (w.theta_col.iter().copied().collect(), w.beta_j),
        _ => (vec![0.0; n], logit_of_mean(y)),
    };
    for (t, p) in theta.iter_mut().zip(&pen) {
        if p.is_none() {
            *t = 0.0;
        }
    }
    let mut solver = NodeSolver {
        design,
        j,
        pen,
        inv_m: 1.0 / design.m as f64,
        eta: Vec::new(),
        loglik: 0.0,
        theta,
        beta,
    };

    let constant = y.iter().all(|&v| v == y[0]);
    if constant {
        // The intercept runs off to infinity; pin it at the cap and leave the
        // couplings at zero.
        solver.theta.iter_mut().for_each(|t| *t = 0.0);
        solver.beta = if y[0] == 1.0 { THETA_CAP } else { -THETA_CAP };
        solver.recompute();
        log::warn!("node {j}: response is constant; intercept capped at {}", solver.beta);
        let objective = solver.objective();
        return NodewiseFit {
            node: j,
            theta_col: Vector::zeros(n),
            beta_j: solver.beta,
            objective,
            kkt_residual: solver.kkt_residual(),
            passes: 0,
            converged: true,
            capped: true,
            objective_trace: vec![objective],
        };
    }

    solver.recompute();
    let mut trace = vec![solver.objective()];
    let mut converged = false;
    let mut passes = 0;
    let mut active: Vec<usize> = (0..n).filter(|&i| solver.pen[i].is_some() && solver.theta[i] != 0.0).collect();
    while passes < opts.max_passes {
        passes += 1;
        // Grow the working set with the coordinates violating optimality at zero.
        let (_, grad) = solver.full_gradient();
        for (i, g) in grad.iter().enumerate().take(n) {
            if let Some(p) = solver.pen[i] {
                if solver.theta[i] == 0.0 && g.abs() > p && !active.contains(&i) {
                    active.push(i);
                }
            }
        }
        active.sort_unstable();
        let before = solver.objective();
        if !solver.newton_step(&active) {
            // The majorized coordinate pass never decreases the objective.
            solver.pass(false);
        }
        active.retain(|&i| solver.theta[i] != 0.0);
        trace.push(solver.objective());
        if solver.kkt_residual() <= opts.tol {
            converged = true;
            break;
        }
        if solver.objective() <= before && passes > 1 {
            break;
        }
        // Quasi-separated data: a coefficient drifts off while the objective
        // creeps towards its supremum.
        let f = solver.objective();
        if trace.len() > 10 && f - trace[trace.len() - 11] <= 1e-8 * (1.0 + f.abs()) {
            log::debug!(
                "node {j}: objective stalled after {passes} iterations (kkt {:.2e})",
                solver.kkt_residual()
            );
            break;
        }
    }
    // Drift guard: the incremental log-likelihood is refreshed once at the end.
    solver.recompute();
    let capped = solver.beta.abs() >= THETA_CAP || solver.theta.iter().any(|t| t.abs() >= THETA_CAP);
    if capped {
        log::warn!("node {j}: coefficients reached the ±{THETA_CAP} cap; the data look separable");
    }
    if !converged {
        log::debug!("node {j}: logistic lasso stopped after {passes} iterations without meeting the tolerance");
    }
    NodewiseFit {
        node: j,
        theta_col: Vector::from_vec(solver.theta.clone()),
        beta_j: solver.beta,
        objective: solver.objective(),
        kkt_residual: solver.kkt_residual(),
        passes,
        converged,
        capped,
        objective_trace: trace,
    }
}

fn check_inputs(data: &BipartiteData, weights: &PenaltyWeights, lambda: f64) -> Result<()> {
    data.require_binary()?;
    if weights.n() != data.n() {
        return Err(Error::Dimension {
            expected: data.n(),
            got: weights.n(),
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

pub fn lasso_logistic_node(data: &BipartiteData, j: usize, weights: &PenaltyWeights, lambda: f64, tol: f64) -> Result<NodewiseFit> {
    lasso_logistic_node_with(data, j, weights, lambda, LogisticOptions { tol, ..Default::default() }, None)
}

pub fn lasso_logistic_node_with(
    data: &BipartiteData,
    j: usize,
    weights: &PenaltyWeights,
    lambda: f64,
    opts: LogisticOptions,
    warm: Option<&NodewiseFit>,
) -> Result<NodewiseFit> {
    check_inputs(data, weights, lambda)?;
    if j >= data.n() {
        return Err(Error::InvalidParameter(format!("node {j} out of range for n = {}", data.n())));
    }
    Ok(fit_node(&Design::new(data), j, weights, lambda, opts, warm))
}

/// `Θ_ij ← (Θ_ij + Θ_ji)/2` on the stacked nodewise coefficients.
pub fn symmetrize_nodewise(nodes: &[NodewiseFit]) -> PseudoParams {
    let n = nodes.len();
    let raw = Matrix::from_fn(n, n, |i, j| nodes[j].theta_col[i]);
    let theta = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.5 * (raw[(i, j)] + raw[(j, i)]) });
    let beta = Vector::from_iterator(n, nodes.iter().map(|f| f.beta_j));
    PseudoParams { theta, beta }
}

pub fn fit_pseudo_all_nodes(data: &BipartiteData, weights: &PenaltyWeights, lambda: f64) -> Result<PseudoParams> {
    Ok(fit_pseudo_all_nodes_with(data, weights, lambda, LogisticOptions::default(), None)?.params)
}

/// Every nodewise fit, optionally warm-started from an earlier run.
pub fn fit_pseudo_all_nodes_with(
    data: &BipartiteData,
    weights: &PenaltyWeights,
    lambda: f64,
    opts: LogisticOptions,
    warm: Option<&[NodewiseFit]>,
) -> Result<PseudoFit> {
    check_inputs(data, weights, lambda)?;
    let design = Design::new(data);
    let nodes: Vec<NodewiseFit> = (0..data.n())
        .into_par_iter()
        .map(|j| {
            let w = warm.and_then(|w| w.get(j));
            let fit = fit_node(&design, j, weights, lambda, opts, w);
            if fit.objective.is_finite() {
                Ok(fit)
            } else {
                Err(Error::Node {
                    node: j,
                    source: Box::new(Error::Domain("non-finite nodewise objective".into())),
                })
            }
        })
        .collect::<Result<_>>()?;
    Ok(PseudoFit {
        params: symmetrize_nodewise(&nodes),
        nodes,
    })
}

/// Unpenalized nodewise fits with couplings restricted to `support`.
pub fn constrained_pseudo_mle(data: &BipartiteData, support: &EdgeSet) -> Result<PseudoParams> {
    Ok(constrained_pseudo_fit(data, support)?.params)
}

pub fn constrained_pseudo_fit(data: &BipartiteData, support: &EdgeSet) -> Result<PseudoFit> {
    if support.n() != data.n() {
        return Err(Error::Dimension {
            expected: data.n(),
            got: support.n(),
        });
    }
    let weights = PenaltyWeights::from_support(support, 0.0, f64::INFINITY);
    fit_pseudo_all_nodes_with(data, &weights, 0.0, LogisticOptions::default(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{chain_graph, Permutation};
    use crate::models::{ising_gibbs_sample, GibbsConfig, ModelFamily, MrfParams};
    use crate::rng;
    use rand::Rng;

    fn binary(b: Matrix) -> BipartiteData {
        BipartiteData::new(b, ModelFamily::Ising).unwrap()
    }

    fn random_binary(n: usize, m: usize, p: f64, seed: u64) -> BipartiteData {
        let mut r = rng::from_seed(seed);
        binary(Matrix::from_fn(n, m, |_, _| if r.random::<f64>() < p { 1.0 } else { 0.0 }))
    }

    fn chain_data(n: usize, theta: f64, m: usize, seed: u64) -> BipartiteData {
        let a = chain_graph(n).unwrap();
        let t = a.adj() * theta;
        let beta = Vector::from_iterator(n, a.degrees().iter().map(|&d| -theta * d as f64));
        let params = MrfParams::ising(t, beta).unwrap();
        let cfg = GibbsConfig {
            burn_in: 200,
            thin: 2,
            columns_per_chain: 50,
        };
        ising_gibbs_sample(&params, m, cfg, seed).unwrap()
    }

    /// Independent oracle: proximal gradient ascent on the full node objective.
    fn proximal_reference(data: &BipartiteData, j: usize, lambda: f64, weights: &PenaltyWeights) -> (Vec<f64>, f64) {
        let b = data.matrix();
        let (n, m) = (data.n(), data.m());
        let mut norm2 = 0.0;
        for k in 0..m {
            norm2 += 1.0 + (0..n).filter(|&i| i != j).map(|i| b[(i, k)] * b[(i, k)]).sum::<f64>();
        }
        let step = 1.0 / (0.25 * norm2 / m as f64);
        let mut theta = vec![0.0; n];
        let mut beta = 0.0;
        for _ in 0..200_000 {
            let mut g = vec![0.0; n];
            let mut g0 = 0.0;
            for k in 0..m {
                let eta = beta + (0..n).filter(|&i| i != j).map(|i| theta[i] * b[(i, k)]).sum::<f64>();
                let r = b[(j, k)] - 1.0 / (1.0 + (-eta).exp());
                g0 += r;
                for i in 0..n {
                    if i != j {
                        g[i] += r * b[(i, k)];
                    }
                }
            }
            let mut change = (step * g0 / m as f64).abs();
            beta += step * g0 / m as f64;
            for i in 0..n {
                if i == j {
                    continue;
                }
                let z = theta[i] + step * g[i] / m as f64;
                let t = step * lambda * weights.matrix()[(i, j)];
                let new = z.signum() * (z.abs() - t).max(0.0);
                change = change.max((new - theta[i]).abs());
                theta[i] = new;
            }
            if change < 1e-9 {
                break;
            }
        }
        (theta, beta)
    }

    #[test]
    fn pseudo_loglik_examples() {
        let data = random_binary(3, 7, 0.5, 1);
        let ll = pseudo_loglik(&data, &PseudoParams::zeros(3)).unwrap();
        assert!((ll - 21.0 * 0.5f64.ln()).abs() < 1e-12);

        let ones = binary(Matrix::from_element(2, 4, 1.0));
        let mut params = PseudoParams::zeros(2);
        let mut last = f64::NEG_INFINITY;
        for b in [1.0, 5.0, 20.0, 40.0] {
            params.beta.fill(b);
            let v = pseudo_loglik(&ones, &params).unwrap();
            assert!(v < 0.0 && v > last);
            last = v;
        }
        assert!(last > -1e-15);
    }

    #[test]
    fn pseudo_loglik_matches_direct_conditionals() {
        let mut r = rng::from_seed(3);
        let data = random_binary(3, 1, 0.5, 4);
        let mut theta = Matrix::from_fn(3, 3, |_, _| r.random::<f64>() * 2.0 - 1.0);
        crate::linalg::symmetrize_in_place(&mut theta);
        theta.fill_diagonal(0.0);
        let beta = Vector::from_fn(3, |_, _| r.random::<f64>() - 0.5);
        let params = PseudoParams::new(theta.clone(), beta.clone()).unwrap();
        let x = data.matrix().column(0);
        let mut expected = 0.0;
        for j in 0..3 {
            let logit: f64 = beta[j] + (0..3).filter(|&i| i != j).map(|i| theta[(i, j)] * x[i]).sum::<f64>();
            let p1 = logit.exp() / (1.0 + logit.exp());
            expected += if x[j] == 1.0 { p1.ln() } else { (1.0 - p1).ln() };
        }
        assert!((pseudo_loglik(&data, &params).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn non_binary_is_rejected() {
        let data = BipartiteData::new(Matrix::from_element(2, 3, 0.5), ModelFamily::Gaussian).unwrap();
        assert!(matches!(pseudo_loglik(&data, &PseudoParams::zeros(2)), Err(Error::Domain(_))));
        assert!(lasso_logistic_node(&data, 0, &PenaltyWeights::uniform(2), 0.1, 1e-7).is_err());
    }

    #[test]
    fn constant_response_caps_intercept() {
        let mut b = random_binary(3, 50, 0.5, 5).matrix().clone();
        b.row_mut(1).fill(1.0);
        let fit = lasso_logistic_node(&binary(b), 1, &PenaltyWeights::uniform(3), 0.1, 1e-7).unwrap();
        assert_eq!(fit.theta_col, Vector::zeros(3));
        assert_eq!(fit.beta_j, THETA_CAP);
        assert!(fit.capped);
    }

    #[test]
    fn huge_penalty_gives_intercept_only_fit() {
        let data = random_binary(4, 200, 0.3, 6);
        for j in 0..4 {
            let fit = lasso_logistic_node(&data, j, &PenaltyWeights::uniform(4), 1e6, 1e-9).unwrap();
            assert_eq!(fit.theta_col, Vector::zeros(4));
            let mean = data.matrix().row(j).mean();
            assert!((fit.beta_j - (mean / (1.0 - mean)).ln()).abs() < 1e-7);
        }
    }

    #[test]
    fn matches_proximal_gradient_reference() {
        let data = chain_data(4, 0.8, 200, 7);
        let w = PenaltyWeights::uniform(4);
        for j in 0..4 {
            let fit = lasso_logistic_node(&data, j, &w, 0.01, 1e-9).unwrap();
            let (theta, beta) = proximal_reference(&data, j, 0.01, &w);
            for (i, t) in theta.iter().enumerate() {
                assert!((fit.theta_col[i] - t).abs() < 1e-4, "node {j} coord {i}");
            }
            assert!((fit.beta_j - beta).abs() < 1e-4);
        }
    }

    #[test]
    fn kkt_and_monotone_passes() {
        for seed in 0..20u64 {
            let n = 3 + (seed as usize % 5);
            let data = random_binary(n, 80 + 10 * seed as usize, 0.4, 100 + seed);
            let mut r = rng::from_seed(seed);
            let mut omega = Matrix::from_fn(n, n, |_, _| r.random::<f64>());
            crate::linalg::symmetrize_in_place(&mut omega);
            let w = PenaltyWeights::new(omega).unwrap();
            let pf = fit_pseudo_all_nodes_with(&data, &w, 0.02, LogisticOptions::default(), None).unwrap();
            for fit in &pf.nodes {
                assert!(fit.kkt_residual <= 1e-6, "seed {seed}: {}", fit.kkt_residual);
                assert_eq!(fit.theta_col[fit.node], 0.0);
                for pair in fit.objective_trace.windows(2) {
                    assert!(pair[1] >= pair[0] - 1e-12);
                }
            }
            let t = &pf.params.theta;
            assert_eq!(t, &t.transpose());
            assert!((0..n).all(|i| t[(i, i)] == 0.0));
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let data = chain_data(5, 0.6, 400, 9);
        let w = PenaltyWeights::uniform(5);
        let cold = fit_pseudo_all_nodes_with(&data, &w, 0.05, LogisticOptions::default(), None).unwrap();
        let first = fit_pseudo_all_nodes_with(&data, &w, 0.2, LogisticOptions::default(), None).unwrap();
        let warm = fit_pseudo_all_nodes_with(&data, &w, 0.05, LogisticOptions::default(), Some(&first.nodes)).unwrap();
        assert!((cold.params.theta - warm.params.theta).amax() < 1e-5);
    }

    #[test]
    fn unpenalized_fit_beats_intercepts() {
        let data = chain_data(4, 0.8, 500, 10);
        let pf = fit_pseudo_all_nodes_with(&data, &PenaltyWeights::uniform(4), 0.0, LogisticOptions::default(), None).unwrap();
        let intercepts = PseudoParams {
            theta: Matrix::zeros(4, 4),
            beta: pf.params.beta.clone(),
        };
        let nodewise_total: f64 = pf.nodes.iter().map(|f| f.objective).sum::<f64>() * 500.0;
        let null = pseudo_loglik(&data, &intercepts).unwrap();
        assert!(nodewise_total >= null - 1e-9);
    }

    #[test]
    fn null_model_gives_small_couplings() {
        for seed in 0..3u64 {
            let data = random_binary(5, 5000, 0.5, 200 + seed);
            let p = fit_pseudo_all_nodes(&data, &PenaltyWeights::uniform(5), 0.1).unwrap();
            assert!(p.theta.amax() <= 0.15);
        }
    }

    #[test]
    fn chain_signal_separates_from_null() {
        let a = chain_graph(4).unwrap();
        let data = chain_data(4, 0.8, 5000, 11);
        let p = fit_pseudo_all_nodes(&data, &PenaltyWeights::uniform(4), 0.05).unwrap();
        let on: Vec<f64> = a.edges().iter().map(|&(i, j)| p.theta[(i, j)].abs()).collect();
        let mut off = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                if a.adj()[(i, j)] == 0.0 {
                    off.push(p.theta[(i, j)].abs());
                }
            }
        }
        let min_on = on.iter().copied().fold(f64::INFINITY, f64::min);
        let max_off = off.iter().copied().fold(0.0, f64::max);
        assert!(min_on > max_off, "{on:?} vs {off:?}");
    }

    #[test]
    fn constrained_examples() {
        let data = random_binary(4, 300, 0.3, 12);
        let empty = constrained_pseudo_mle(&data, &EdgeSet::empty(4)).unwrap();
        assert_eq!(empty.theta, Matrix::zeros(4, 4));
        for j in 0..4 {
            let mean = data.matrix().row(j).mean();
            assert!((empty.beta[j] - (mean / (1.0 - mean)).ln()).abs() < 1e-7);
        }

        let a = chain_graph(4).unwrap();
        let mut wins = 0;
        for seed in 0..20u64 {
            let data = chain_data(4, 0.8, 10_000, 300 + seed);
            let truth = EdgeSet::from_matrix(a.adj(), 0.0);
            let mut shuffled = EdgeSet::support_of(&a, &Permutation::random(4, seed)).unwrap();
            if shuffled == truth {
                shuffled = EdgeSet::support_of(&a, &Permutation::new(vec![1, 3, 0, 2]).unwrap()).unwrap();
            }
            let good = pseudo_loglik(&data, &constrained_pseudo_mle(&data, &truth).unwrap()).unwrap();
            let bad = pseudo_loglik(&data, &constrained_pseudo_mle(&data, &shuffled).unwrap()).unwrap();
            if good > bad {
                wins += 1;
            }
        }
        assert!(wins >= 18, "{wins}/20");
    }
}
