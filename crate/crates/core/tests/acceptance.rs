//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per check; exits non-zero if any check fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use bipmatch::assign::{self, Sense};
use bipmatch::experiment::{self, BetaRule, ExperimentConfig, ExperimentOutput, Method, ResultRow, Scenario};
use bipmatch::gauss_fit::{self, PenaltyWeights};
use bipmatch::graphs::{er_graph, permute_matrix};
use bipmatch::{ising_fit, models, rng, BipartiteData, DoublyStochastic, Matrix, ModelFamily, MrfParams, Permutation, Vector};
use rand::Rng;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean of `metric` over the rows of one method/m/seed-fraction cell.
fn cell_mean(rows: &[ResultRow], method: Method, m: usize, fraction: f64, metric: fn(&ResultRow) -> Option<f64>) -> f64 {
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method.as_str() && r.m == m && r.seed_fraction == fraction)
        .map(|r| metric(r).unwrap_or(f64::NAN))
        .collect();
    assert!(!values.is_empty(), "no rows for {} at m = {m}", method.as_str());
    mean(values)
}

fn ve(r: &ResultRow) -> Option<f64> {
    r.vertex_error
}
fn ee(r: &ResultRow) -> Option<f64> {
    r.edge_error
}
fn fpr(r: &ResultRow) -> Option<f64> {
    r.fpr
}
fn fnr(r: &ResultRow) -> Option<f64> {
    r.fnr
}

fn run(cfg: &ExperimentConfig) -> (ExperimentOutput, Duration) {
    let t = Instant::now();
    let out = experiment::run_experiment(cfg).expect("experiment runs");
    for r in &out.rows {
        if let Some(e) = &r.error {
            println!("  note: {} r{} m={}: {e}", r.method, r.replicate, r.m);
        }
    }
    (out, t.elapsed())
}

fn equivalence(report: &mut Report) {
    let cfg = ExperimentConfig {
        scenario: Scenario::Thm2Check,
        n: 5,
        family: ModelFamily::Ising,
        theta: 0.6,
        beta_rule: BetaRule::Zero,
        m_grid: vec![5000],
        replicates: 20,
        methods: vec![Method::BfRestricted, Method::BfOmp],
        master_seed: 11,
        ..Default::default()
    };
    let t = Instant::now();
    let mut applicable = 0;
    let mut agree = 0;
    for r in 0..cfg.replicates {
        let inst = experiment::simulate_instance(&cfg, r).unwrap();
        let fit = models::brute_force_match_with(&inst.a, &inst.data, models::ProfileModel::IsingRestricted).unwrap();
        if fit.theta_hat.is_none_or(|t| t.is_nan() || t <= 0.0) {
            continue;
        }
        applicable += 1;
        // Second enumeration: Frobenius distance to the one-mode projection.
        let b = inst.data.co_occurrence();
        let dist = |p: &Permutation| (permute_matrix(inst.a.adj(), p).unwrap() - &b).norm_squared();
        let best = Permutation::all(5).map(|p| dist(&p)).fold(f64::INFINITY, f64::min);
        if dist(&fit.permutation) <= best + 1e-9 * (1.0 + best) {
            agree += 1;
        }
    }
    let elapsed = t.elapsed();
    report.line(
        "restricted-likelihood and projection brute force agree",
        applicable == 20 && agree == applicable && elapsed < Duration::from_secs(60),
        format!(
            "{agree}/{applicable} agree with positive coupling estimate, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn gaussian_er_config() -> ExperimentConfig {
    ExperimentConfig {
        scenario: Scenario::Er,
        n: 8,
        er_p: 0.3,
        asymmetric_graph: true,
        family: ModelFamily::Gaussian,
        theta: 0.4,
        gaussian_min_eigenvalue: 0.5,
        replicates: 20,
        methods: vec![Method::BInvcov],
        master_seed: 21,
        ..Default::default()
    }
}

fn consistency(report: &mut Report) {
    let cfg = ExperimentConfig {
        m_grid: vec![100, 500, 5000],
        ..gaussian_er_config()
    };
    let (out, elapsed) = run(&cfg);
    let means: Vec<f64> = cfg
        .m_grid
        .iter()
        .map(|&m| cell_mean(&out.rows, Method::BInvcov, m, 0.0, ee))
        .collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    report.line(
        "inverse-covariance matching is consistent",
        means[2] <= 0.05 && decreasing && elapsed < Duration::from_secs(600),
        format!("mean edge_error {means:.4?} at m = {:?}, {:.1}s", cfg.m_grid, elapsed.as_secs_f64()),
    );
}

fn qualitative_config(scenario: Scenario) -> ExperimentConfig {
    ExperimentConfig {
        scenario,
        n: 20,
        theta: 0.4,
        er_p: 0.15,
        beta_rule: BetaRule::Centered,
        m_grid: vec![200, 1000, 4000],
        replicates: 10,
        methods: vec![Method::BInvcov, Method::BPseudo, Method::COmp, Method::CCov],
        master_seed: 1,
        ..Default::default()
    }
}

fn qualitative(report: &mut Report) -> Vec<(ExperimentConfig, ExperimentOutput)> {
    let mut runs = Vec::new();
    let mut total = Duration::ZERO;
    for scenario in [Scenario::Chain, Scenario::Er] {
        let cfg = qualitative_config(scenario);
        let (out, elapsed) = run(&cfg);
        total += elapsed;
        runs.push((cfg, out));
    }
    let b_methods = [Method::BInvcov, Method::BPseudo];
    let (mut a_ok, mut b_ok, mut c_ok) = (true, true, true);
    let (mut a_detail, mut b_detail, mut c_detail) = (Vec::new(), Vec::new(), Vec::new());
    for (cfg, out) in &runs {
        let name = cfg.scenario.as_str();
        let m_max = *cfg.m_grid.last().unwrap();
        let collapsed = cell_mean(&out.rows, Method::COmp, m_max, 0.0, ve).min(cell_mean(&out.rows, Method::CCov, m_max, 0.0, ve));
        for method in b_methods {
            let v = cell_mean(&out.rows, method, m_max, 0.0, ve);
            a_ok &= v <= collapsed;
            a_detail.push(format!("{name} {} {v:.3} vs {collapsed:.3}", method.as_str()));
            let fprs: Vec<f64> = cfg.m_grid.iter().map(|&m| cell_mean(&out.rows, method, m, 0.0, fpr)).collect();
            b_ok &= fprs.iter().all(|&f| f <= 0.1);
            b_detail.push(format!("{name} {} {fprs:.3?}", method.as_str()));
            let fnrs: Vec<f64> = cfg.m_grid.iter().map(|&m| cell_mean(&out.rows, method, m, 0.0, fnr)).collect();
            c_ok &= fnrs.windows(2).all(|w| w[1] <= w[0]);
            c_detail.push(format!("{name} {} {fnrs:.3?}", method.as_str()));
        }
    }
    let in_time = total < Duration::from_secs(1800);
    report.line(
        "bipartite methods match at least as well as collapsing at the largest m",
        a_ok && in_time,
        format!("vertex_error {}; {:.0}s", a_detail.join(", "), total.as_secs_f64()),
    );
    report.line(
        "bipartite methods keep FPR <= 0.1",
        b_ok && in_time,
        format!("FPR by m {}", b_detail.join(", ")),
    );
    report.line(
        "bipartite FNR non-increasing in m",
        c_ok && in_time,
        format!("FNR by m {}", c_detail.join(", ")),
    );
    runs
}

fn counterexamples(report: &mut Report) {
    let t = Instant::now();
    let mut detail = Vec::new();
    let mut ok = true;
    for scenario in [Scenario::Fig2Beta, Scenario::Fig2Theta] {
        let cfg = ExperimentConfig {
            scenario,
            m_grid: vec![2000],
            replicates: 20,
            methods: vec![Method::BfOmp, Method::BfExact],
            master_seed: 31,
            ..Default::default()
        };
        let out = experiment::run_experiment(&cfg).unwrap();
        let mut by_rep: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
        for r in &out.rows {
            let e = by_rep.entry(r.replicate).or_default();
            if r.method == Method::BfOmp.as_str() {
                e.0 = r.edge_error;
            } else {
                e.1 = r.edge_error;
            }
        }
        let hits = by_rep
            .values()
            .filter(|(omp, exact)| omp.is_some_and(|v| v > 0.0) && *exact == Some(0.0))
            .count();
        ok &= hits >= 16;
        detail.push(format!("{} {hits}/20", scenario.as_str()));
    }
    report.line(
        "projection matching fails where exact likelihood matching succeeds",
        ok,
        format!("{}, {:.1}s", detail.join(", "), t.elapsed().as_secs_f64()),
    );
}

fn brute_lap(cost: &Matrix) -> f64 {
    Permutation::all(cost.nrows())
        .map(|p| (0..cost.nrows()).map(|i| cost[(i, p.map()[i])]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn random_symmetric_weights(n: usize, r: &mut impl Rng) -> Matrix {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = r.random_range(0.5..1.5);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

fn glasso_objective(theta: &Matrix, s: &Matrix, omega: &Matrix, lambda: f64) -> f64 {
    let Some(ch) = theta.clone().cholesky() else {
        return f64::NEG_INFINITY;
    };
    let logdet = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mut pen = 0.0;
    for i in 0..theta.nrows() {
        for j in 0..theta.nrows() {
            if i != j {
                pen += omega[(i, j)] * theta[(i, j)].abs();
            }
        }
    }
    logdet - (s * theta).trace() - lambda * pen
}

fn glasso_kkt(theta: &Matrix, s: &Matrix, omega: &Matrix, lambda: f64) -> f64 {
    let w = theta.clone().try_inverse().unwrap();
    let mut worst = 0.0f64;
    for i in 0..theta.nrows() {
        for j in 0..theta.nrows() {
            let g = w[(i, j)] - s[(i, j)];
            let v = if i == j {
                g.abs()
            } else if theta[(i, j)] == 0.0 {
                (g.abs() - lambda * omega[(i, j)]).max(0.0)
            } else {
                (g - lambda * omega[(i, j)] * theta[(i, j)].signum()).abs()
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Proximal gradient ascent with backtracking, run to a tight tolerance.
fn glasso_reference(s: &Matrix, omega: &Matrix, lambda: f64) -> f64 {
    let n = s.nrows();
    let smooth = |t: &Matrix| glasso_objective(t, s, &Matrix::zeros(n, n), 0.0);
    let mut theta = Matrix::from_diagonal(&Vector::from_iterator(n, (0..n).map(|i| 1.0 / s[(i, i)])));
    let mut f = glasso_objective(&theta, s, omega, lambda);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let grad = theta.clone().try_inverse().unwrap() - s;
        let f0 = smooth(&theta);
        loop {
            let mut cand = &theta + &grad * step;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let t = step * lambda * omega[(i, j)];
                        let v = cand[(i, j)];
                        cand[(i, j)] = v.signum() * (v.abs() - t).max(0.0);
                    }
                }
            }
            let d = &cand - &theta;
            let fc = smooth(&cand);
            if fc.is_finite() && fc >= f0 + grad.dot(&d) - d.norm_squared() / (2.0 * step) {
                theta = cand;
                break;
            }
            step *= 0.5;
        }
        let next = glasso_objective(&theta, s, omega, lambda);
        let gain = next - f;
        f = next;
        step *= 1.5;
        if gain.abs() < 1e-14 {
            break;
        }
    }
    f
}

fn logistic_kkt(data: &BipartiteData, j: usize, theta: &Vector, beta: f64, omega: &Matrix, lambda: f64) -> f64 {
    let b = data.matrix();
    let (n, m) = (data.n(), data.m());
    let mut grad = vec![0.0; n];
    let mut grad_b = 0.0;
    for k in 0..m {
        let eta = beta + (0..n).filter(|&i| i != j).map(|i| theta[i] * b[(i, k)]).sum::<f64>();
        let resid = b[(j, k)] - 1.0 / (1.0 + (-eta).exp());
        grad_b += resid / m as f64;
        for i in 0..n {
            grad[i] += resid * b[(i, k)] / m as f64;
        }
    }
    let mut worst = grad_b.abs();
    for i in (0..n).filter(|&i| i != j) {
        let pen = lambda * omega[(i, j)];
        let v = if theta[i] == 0.0 {
            (grad[i].abs() - pen).max(0.0)
        } else {
            (grad[i] - pen * theta[i].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn random_ising(n: usize, r: &mut impl Rng) -> MrfParams {
    let mut theta = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            if r.random_bool(0.5) {
                let v = r.random_range(-0.6..0.6);
                theta[(i, j)] = v;
                theta[(j, i)] = v;
            }
        }
    }
    let beta = Vector::from_iterator(n, (0..n).map(|_| r.random_range(-0.5..0.5)));
    MrfParams::ising(theta, beta).unwrap()
}

/// Pairwise moments by direct enumeration of `p(x) ∝ exp(βᵀx + Σ_{i≠j} Θ_ij x_i x_j)`.
fn enumerated_moments(params: &MrfParams) -> Matrix {
    let n = params.n();
    let (theta, beta) = (params.theta(), params.beta());
    let mut moments = Matrix::zeros(n, n);
    let mut z = 0.0;
    for s in 0..1usize << n {
        let x: Vec<f64> = (0..n).map(|i| (s >> i & 1) as f64).collect();
        let mut e = 0.0;
        for i in 0..n {
            e += beta[i] * x[i];
            for j in 0..n {
                if i != j {
                    e += theta[(i, j)] * x[i] * x[j];
                }
            }
        }
        let w = e.exp();
        z += w;
        for i in 0..n {
            for j in 0..n {
                moments[(i, j)] += w * x[i] * x[j];
            }
        }
    }
    moments / z
}

fn solvers(report: &mut Report) {
    let t = Instant::now();
    let mut r = rng::from_seed(41);

    let mut lap_ok = 0;
    for _ in 0..100 {
        let cost = Matrix::from_fn(7, 7, |_, _| r.random_range(-5.0..5.0));
        let p = assign::lap_solve(&cost, Sense::Min).unwrap();
        if (assign::assignment_value(&cost, &p) - brute_lap(&cost)).abs() < 1e-9 {
            lap_ok += 1;
        }
    }

    let (mut glasso_kkt_ok, mut glasso_ref_ok) = (0, 0);
    for inst in 0..50 {
        let n = 3 + inst % 8;
        let truth = random_ising(n, &mut r);
        let pd = truth.theta().abs() + Matrix::identity(n, n) * (1.0 + n as f64 * 0.6);
        let params = MrfParams::gaussian_with_mean(pd, Vector::zeros(n)).unwrap();
        let data = models::gaussian_sample(&params, 200, r.random()).unwrap();
        let cov = gauss_fit::sample_covariance(&data).unwrap();
        let omega = random_symmetric_weights(n, &mut r);
        let lambda = r.random_range(0.01..0.2);
        let weights = PenaltyWeights::new(omega.clone()).unwrap();
        let fit =
            gauss_fit::weighted_graphical_lasso(&cov, &weights, lambda, gauss_fit::DEFAULT_TOL, gauss_fit::DEFAULT_MAX_SWEEPS).unwrap();
        if glasso_kkt(&fit.theta_hat, &cov.sigma_hat, &omega, lambda) <= 1e-6 {
            glasso_kkt_ok += 1;
        }
        let reference = glasso_reference(&cov.sigma_hat, &omega, lambda);
        if (glasso_objective(&fit.theta_hat, &cov.sigma_hat, &omega, lambda) - reference).abs() <= 1e-5 {
            glasso_ref_ok += 1;
        }
    }

    let mut logistic_ok = 0;
    for inst in 0..50 {
        let n = 3 + inst % 8;
        let params = random_ising(n, &mut r);
        let data = models::ising_gibbs_sample(&params, 500, Default::default(), r.random()).unwrap();
        let omega = random_symmetric_weights(n, &mut r);
        let lambda = r.random_range(0.005..0.1);
        let j = inst % n;
        let fit = ising_fit::lasso_logistic_node(
            &data,
            j,
            &PenaltyWeights::new(omega.clone()).unwrap(),
            lambda,
            ising_fit::DEFAULT_TOL,
        )
        .unwrap();
        if logistic_kkt(&data, j, &fit.theta_col, fit.beta_j, &omega, lambda) <= 1e-6 {
            logistic_ok += 1;
        }
    }

    let mut fw_ok = 0;
    for inst in 0..100u64 {
        let n = 5 + (inst % 8) as usize;
        let a = er_graph(n, 0.4, rng::derive(41, inst)).unwrap();
        let mut m = random_symmetric_weights(n, &mut r);
        if inst % 2 == 1 {
            m *= -1.0;
        }
        let start = if inst % 3 == 0 {
            DoublyStochastic::barycenter(n)
        } else {
            DoublyStochastic::from_permutation(&Permutation::random(n, inst))
        };
        let step = assign::faq_step(&a, &m, &start, 30, 1e-9).unwrap();
        let scale = 1.0 + step.objective_trace.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if step.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * scale) {
            fw_ok += 1;
        }
    }

    let mut gibbs_worst = 0.0f64;
    for inst in 0..4 {
        let n = 3 + inst;
        let params = random_ising(n, &mut r);
        let data = models::ising_gibbs_sample(&params, 20_000, Default::default(), r.random()).unwrap();
        let b = data.matrix();
        let empirical = b * b.transpose() / data.m() as f64;
        gibbs_worst = gibbs_worst.max((empirical - enumerated_moments(&params)).abs().max());
    }

    let elapsed = t.elapsed();
    let ok = lap_ok == 100
        && glasso_kkt_ok == 50
        && glasso_ref_ok == 50
        && logistic_ok == 50
        && fw_ok == 100
        && gibbs_worst <= 0.02
        && elapsed < Duration::from_secs(600);
    report.line(
        "solver suite",
        ok,
        format!(
            "LAP {lap_ok}/100, glasso KKT {glasso_kkt_ok}/50, glasso reference {glasso_ref_ok}/50, logistic KKT {logistic_ok}/50, FW monotone {fw_ok}/100, Gibbs moment error {gibbs_worst:.4}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn seeded(report: &mut Report) {
    let fractions = vec![0.0, 0.25, 0.5, 1.0];
    let cfg = ExperimentConfig {
        m_grid: vec![100],
        seed_fractions: fractions.clone(),
        ..gaussian_er_config()
    };
    let (out, elapsed) = run(&cfg);
    let means: Vec<f64> = fractions
        .iter()
        .map(|&f| cell_mean(&out.rows, Method::BInvcov, 100, f, ve))
        .collect();
    let ok = means.windows(2).all(|w| w[1] <= w[0]) && means[3] == 0.0 && elapsed < Duration::from_secs(600);
    report.line(
        "seeds never hurt and full seeds are exact",
        ok,
        format!(
            "mean vertex_error {means:.3?} at fractions {fractions:?}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn determinism(report: &mut Report, first: &[(ExperimentConfig, ExperimentOutput)]) {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for (k, (cfg, out)) in first.iter().enumerate() {
        let (again, _) = run(cfg);
        let a = dir.path().join(format!("a{k}"));
        let b = dir.path().join(format!("b{k}"));
        experiment::emit_outputs(cfg, out, &a).unwrap();
        experiment::emit_outputs(cfg, &again, &b).unwrap();
        identical &= std::fs::read(a.join("results.csv")).unwrap() == std::fs::read(b.join("results.csv")).unwrap();
    }
    report.line(
        "repeated runs give byte-identical results.csv",
        identical,
        format!("{} configs compared", first.len()),
    );
}

fn main() {
    let mut report = Report { failed: 0 };
    equivalence(&mut report);
    consistency(&mut report);
    let runs = qualitative(&mut report);
    counterexamples(&mut report);
    solvers(&mut report);
    seeded(&mut report);
    determinism(&mut report, &runs);
    if report.failed > 0 {
        println!("{} check(s) failed", report.failed);
        std::process::exit(1);
    }
}
