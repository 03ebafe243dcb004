//! Monte-Carlo experiment runner: configuration, replicate generation, method
//! dispatch, summary tables and static SVG charts.
//!
//! A run is fully determined by its [`ExperimentConfig`]. Replicate `r` uses
//! the seed `master_seed ^ r`, so any subset of replicates can be reproduced
//! on its own. Data for the m-grid are nested prefixes of one sample and seed
//! sets for the seed-fraction grid are nested prefixes of one vertex order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, CollapseMatchOptions, CollapseMethod};
use crate::graphs::{self, EdgeSet, Permutation, SeedSet, UnipartiteGraph};
use crate::io::{self, Preprocess};
use crate::matcher::{self, MatchConfig};
use crate::models::{self, BipartiteData, GibbsConfig, ModelFamily, MrfParams, ProfileModel};
use crate::{linalg, rng, Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Chain,
    Er,
    Thm2Check,
    Fig2Beta,
    Fig2Theta,
    ExternalData,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Chain => "chain",
            Scenario::Er => "er",
            Scenario::Thm2Check => "thm2-check",
            Scenario::Fig2Beta => "fig2-beta",
            Scenario::Fig2Theta => "fig2-theta",
            Scenario::ExternalData => "external-data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BInvcov,
    BPseudo,
    COmp,
    CCov,
    CCorr,
    CGlasso,
    CMb,
    /// Exhaustive profile likelihood with free parameters on the matched support.
    BfExact,
    /// Exhaustive profile likelihood under the single-parameter Ising model.
    BfRestricted,
    /// Exhaustive alignment of `A` to the co-occurrence matrix.
    BfOmp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::BInvcov => "b-invcov",
            Method::BPseudo => "b-pseudo",
            Method::COmp => "c-omp",
            Method::CCov => "c-cov",
            Method::CCorr => "c-corr",
            Method::CGlasso => "c-glasso",
            Method::CMb => "c-mb",
            Method::BfExact => "bf-exact",
            Method::BfRestricted => "bf-restricted",
            Method::BfOmp => "bf-omp",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| Error::Config(format!("unknown method {s:?}")))
    }

    pub fn uses_seeds(self) -> bool {
        !matches!(self, Method::BfExact | Method::BfRestricted | Method::BfOmp)
    }

    fn collapse(self) -> Option<CollapseMethod> {
        match self {
            Method::COmp => Some(CollapseMethod::Omp),
            Method::CCov => Some(CollapseMethod::Cov),
            Method::CCorr => Some(CollapseMethod::Corr),
            Method::CGlasso => Some(CollapseMethod::Glasso),
            Method::CMb => Some(CollapseMethod::Mb),
            _ => None,
        }
    }
}

/// Node parameters of simulated Ising data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaRule {
    /// `β_i = −½ Σ_j Θ_ij`.
    #[default]
    Centered,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalSource {
    pub graph: PathBuf,
    pub bipartite: PathBuf,
    pub preprocess: Preprocess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    /// Sample sizes, strictly increasing.
    pub m_grid: Vec<usize>,
    pub family: ModelFamily,
    /// Coupling on the edges of `A`.
    pub theta: f64,
    pub beta_rule: BetaRule,
    /// Edge probability for the `er` scenario.
    pub er_p: f64,
    /// Redraw random graphs until they have no nontrivial automorphism.
    pub asymmetric_graph: bool,
    /// Smallest eigenvalue of the Gaussian precision `θW + δI`.
    pub gaussian_min_eigenvalue: f64,
    pub replicates: usize,
    pub seed_fractions: Vec<f64>,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub gibbs: GibbsConfig,
    /// Matcher settings for the B-methods; seeds and RNG seed are set per run.
    pub matcher: MatchConfig,
    pub external: Option<ExternalSource>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Chain,
            n: 10,
            m_grid: vec![200, 1000, 4000],
            family: ModelFamily::Ising,
            theta: 0.4,
            beta_rule: BetaRule::Centered,
            er_p: 0.15,
            asymmetric_graph: false,
            gaussian_min_eigenvalue: 0.5,
            replicates: 10,
            seed_fractions: vec![0.0],
            methods: vec![Method::BInvcov, Method::BPseudo, Method::COmp, Method::CCov],
            master_seed: 1,
            output_dir: None,
            gibbs: GibbsConfig::default(),
            matcher: MatchConfig::default(),
            external: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.m_grid.is_empty() || self.m_grid[0] == 0 {
            return bad("m_grid must be non-empty with positive entries".into());
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("m_grid must be strictly increasing".into());
        }
        if self.seed_fractions.is_empty() || self.seed_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("seed fractions must lie in [0, 1]".into());
        }
        if self.seed_fractions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("seed fractions must be strictly increasing".into());
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        if !self.theta.is_finite() || !(self.gaussian_min_eigenvalue > 0.0) {
            return bad("theta must be finite and the Gaussian eigenvalue floor positive".into());
        }
        if !(0.0..=1.0).contains(&self.er_p) {
            return bad(format!("er_p {} outside [0, 1]", self.er_p));
        }
        match self.scenario {
            Scenario::Chain | Scenario::Er | Scenario::Thm2Check if self.n < 2 => {
                return bad("n must be at least 2".into());
            }
            Scenario::ExternalData if self.external.is_none() => {
                return bad("external-data scenario needs an `external` block".into());
            }
            Scenario::Thm2Check | Scenario::Fig2Beta | Scenario::Fig2Theta if self.family != ModelFamily::Ising => {
                return bad(format!("scenario {} is binary only", self.scenario.as_str()));
            }
            _ => {}
        }
        self.matcher.validate()
    }
}

/// One method on one replicate at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub replicate: usize,
    pub seed_fraction: f64,
    pub vertex_error: Option<f64>,
    pub edge_error: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub lambda_star: Option<f64>,
    /// Brute-force likelihood and co-occurrence optima coincide in objective
    /// (set by the `thm2-check` scenario when the fitted coupling is positive).
    pub agreement: Option<bool>,
    pub error: Option<String>,
}

/// Wall time of one result row, kept apart from the results so they stay
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub m: usize,
    pub replicate: usize,
    pub seed_fraction: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
}

/// A simulated (or loaded) problem: `data` rows follow `p_star` applied to A.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: UnipartiteGraph,
    pub params: Option<MrfParams>,
    pub p_star: Permutation,
    pub data: BipartiteData,
}

fn replicate_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    cfg.master_seed ^ r as u64
}

fn draw_graph(cfg: &ExperimentConfig, seed: u64) -> Result<UnipartiteGraph> {
    match cfg.scenario {
        Scenario::Chain | Scenario::Thm2Check => graphs::chain_graph(cfg.n),
        Scenario::Er => {
            for attempt in 0..10_000u64 {
                let g = graphs::er_graph(cfg.n, cfg.er_p, rng::derive(seed, attempt))?;
                if g.has_edges() && !(cfg.asymmetric_graph && g.has_nontrivial_automorphism()) {
                    return Ok(g);
                }
            }
            Err(Error::Config("could not draw a suitable random graph".into()))
        }
        _ => unreachable!("graph scenarios only"),
    }
}

/// Model parameters on `A` for the configured family and β rule.
pub fn scenario_params(cfg: &ExperimentConfig, a: &UnipartiteGraph) -> Result<MrfParams> {
    let n = a.n();
    let w = a.adj() * cfg.theta;
    match cfg.family {
        ModelFamily::Ising => {
            let beta = match cfg.beta_rule {
                BetaRule::Centered => baselines::centered_beta(&w),
                BetaRule::Zero => Vector::zeros(n),
            };
            MrfParams::ising(w, beta)
        }
        ModelFamily::Gaussian => {
            let delta = cfg.gaussian_min_eigenvalue - linalg::min_eigenvalue(&w);
            MrfParams::gaussian(w + Matrix::identity(n, n) * delta, Vector::zeros(n))
        }
    }
}

fn sample(params: &MrfParams, m: usize, gibbs: GibbsConfig, seed: u64) -> Result<BipartiteData> {
    match params.family() {
        ModelFamily::Ising => models::ising_gibbs_sample(params, m, gibbs, seed),
        ModelFamily::Gaussian => models::gaussian_sample(params, m, seed),
    }
}

/// Replicate `r` at the largest sample size; smaller sizes use column prefixes.
pub fn simulate_instance(cfg: &ExperimentConfig, r: usize) -> Result<Instance> {
    let seed = replicate_seed(cfg, r);
    let m_max = *cfg.m_grid.last().ok_or_else(|| Error::Config("empty m_grid".into()))?;
    if cfg.scenario == Scenario::ExternalData {
        let ext = cfg
            .external
            .as_ref()
            .ok_or_else(|| Error::Config("missing external block".into()))?;
        let (a, data) = io::load_external(&ext.graph, &ext.bipartite, &ext.preprocess)?;
        let p_star = Permutation::identity(a.n());
        return Ok(Instance {
            a,
            params: None,
            p_star,
            data,
        });
    }
    let (a, params) = match cfg.scenario {
        Scenario::Fig2Beta => baselines::fig2_beta_scenario()?,
        Scenario::Fig2Theta => baselines::fig2_theta_scenario()?,
        _ => {
            let a = draw_graph(cfg, rng::derive(seed, 1))?;
            let params = scenario_params(cfg, &a)?;
            (a, params)
        }
    };
    let p_star = Permutation::random(a.n(), rng::derive(seed, 2));
    let data = sample(
        &baselines::permute_params(&params, &p_star)?,
        m_max,
        cfg.gibbs,
        rng::derive(seed, 3),
    )?;
    Ok(Instance {
        a,
        params: Some(params),
        p_star,
        data,
    })
}

fn prefix(data: &BipartiteData, m: usize) -> Result<BipartiteData> {
    if m > data.m() {
        return Err(Error::InsufficientData(format!(
            "only {} columns available, {m} requested",
            data.m()
        )));
    }
    BipartiteData::new(data.matrix().columns(0, m).into_owned(), data.family())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub p_hat: Permutation,
    /// Edge estimate in B's labeling, for methods that produce one.
    pub w_hat: Option<EdgeSet>,
    pub lambda_star: Option<f64>,
    /// Fitted coupling of the restricted model at the optimum.
    pub restricted_theta: Option<f64>,
}

/// Runs one matching method. `matcher` configures both the likelihood
/// matchers and the Frank-Wolfe step of the collapsing baselines; its seeds
/// and RNG seed are replaced by `seeds` and `stream`.
pub fn run_method(
    method: Method,
    a: &UnipartiteGraph,
    data: &BipartiteData,
    seeds: &SeedSet,
    matcher: &MatchConfig,
    stream: u64,
) -> Result<MethodOutcome> {
    let seed_opt = (!seeds.is_empty()).then(|| seeds.clone());
    match method {
        Method::BInvcov | Method::BPseudo => {
            let mcfg = MatchConfig {
                seeds: seed_opt,
                rng_seed: stream,
                ..matcher.clone()
            };
            let res = if method == Method::BInvcov {
                matcher::match_invcov(a, data, &mcfg)?
            } else {
                matcher::match_pseudo(a, data, &mcfg)?
            };
            Ok(MethodOutcome {
                w_hat: Some(EdgeSet::from_matrix(&res.theta_hat, 0.0)),
                p_hat: res.p_hat,
                lambda_star: Some(res.lambda_star),
                restricted_theta: None,
            })
        }
        Method::BfExact | Method::BfRestricted => {
            let model = match (method, data.family()) {
                (Method::BfRestricted, _) => ProfileModel::IsingRestricted,
                (_, ModelFamily::Ising) => ProfileModel::IsingExact,
                (_, ModelFamily::Gaussian) => ProfileModel::Gaussian,
            };
            let bf = models::brute_force_match_with(a, data, model)?;
            Ok(MethodOutcome {
                p_hat: bf.permutation,
                w_hat: None,
                lambda_star: None,
                restricted_theta: bf.theta_hat,
            })
        }
        Method::BfOmp => {
            let bf = baselines::brute_force_collapse_match(a, &baselines::one_mode_projection(data))?;
            Ok(MethodOutcome {
                p_hat: bf.permutation,
                w_hat: None,
                lambda_star: None,
                restricted_theta: None,
            })
        }
        _ => {
            let cm = method.collapse().expect("collapsing method");
            let collapsed = baselines::collapse(data, cm)?;
            let opts = CollapseMatchOptions {
                fw_max: matcher.fw_max,
                fw_tol: matcher.fw_tol,
                fw_restarts: matcher.fw_restarts,
                rng_seed: stream,
            };
            let p_hat = baselines::collapse_and_match(a, &collapsed, seed_opt.as_ref(), &opts)?;
            Ok(MethodOutcome {
                p_hat,
                w_hat: cm.estimates_edges().then(|| collapsed.edges()),
                lambda_star: collapsed.lambda,
                restricted_theta: None,
            })
        }
    }
}

/// Seeds for each fraction: prefixes of one random vertex order.
fn seed_sets(cfg: &ExperimentConfig, inst: &Instance, seed: u64) -> Result<Vec<SeedSet>> {
    let n = inst.a.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::from_seed(rng::derive(seed, 4)));
    cfg.seed_fractions
        .iter()
        .map(|&f| {
            let k = ((f * n as f64).round() as usize).min(n);
            SeedSet::from_truth(&inst.p_star, &order[..k])
        })
        .collect()
}

fn run_replicate(cfg: &ExperimentConfig, r: usize) -> ExperimentOutput {
    let seed = replicate_seed(cfg, r);
    let mut out = ExperimentOutput::default();
    let base_row = |method: Method, n: usize, m: usize, f: f64| ResultRow {
        scenario: cfg.scenario.as_str().to_string(),
        method: method.as_str().to_string(),
        n,
        m,
        replicate: r,
        seed_fraction: f,
        vertex_error: None,
        edge_error: None,
        fpr: None,
        fnr: None,
        lambda_star: None,
        agreement: None,
        error: None,
    };
    let inst = match simulate_instance(cfg, r).and_then(|inst| seed_sets(cfg, &inst, seed).map(|s| (inst, s))) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("replicate {r}: {e}");
            for &m in &cfg.m_grid {
                for &f in &cfg.seed_fractions {
                    for &method in &cfg.methods {
                        out.rows.push(ResultRow {
                            error: Some(e.to_string()),
                            ..base_row(method, cfg.n, m, f)
                        });
                    }
                }
            }
            return out;
        }
    };
    let (inst, seeds) = inst;
    let n = inst.a.n();
    for (mi, &m) in cfg.m_grid.iter().enumerate() {
        let data = prefix(&inst.data, m);
        for (fi, &f) in cfg.seed_fractions.iter().enumerate() {
            let mut outcomes: Vec<(Method, Result<MethodOutcome>)> = Vec::new();
            for (k, &method) in cfg.methods.iter().enumerate() {
                let stream = rng::derive(rng::derive(seed, 100 + mi as u64), (fi * 64 + k) as u64);
                let empty = SeedSet::empty();
                let s = if method.uses_seeds() { &seeds[fi] } else { &empty };
                let start = Instant::now();
                let res = match &data {
                    Ok(d) => run_method(method, &inst.a, d, s, &cfg.matcher, stream),
                    Err(e) => Err(Error::InsufficientData(e.to_string())),
                };
                out.timings.push(TimingRow {
                    method: method.as_str().to_string(),
                    m,
                    replicate: r,
                    seed_fraction: f,
                    seconds: start.elapsed().as_secs_f64(),
                });
                outcomes.push((method, res));
            }
            let agreement = thm2_agreement(cfg, &inst, data.as_ref().ok(), &outcomes);
            for (method, res) in outcomes {
                let mut row = base_row(method, n, m, f);
                match res.and_then(|o| {
                    let rep = baselines::error_report(&inst.a, &o.p_hat, &inst.p_star, o.w_hat.as_ref())?;
                    Ok((o, rep))
                }) {
                    Ok((o, rep)) => {
                        row.vertex_error = Some(rep.vertex_error);
                        row.edge_error = Some(rep.edge_error);
                        row.fpr = rep.fpr;
                        row.fnr = rep.fnr;
                        row.lambda_star = o.lambda_star;
                        row.agreement = agreement;
                    }
                    Err(e) => {
                        log::warn!("replicate {r}, m = {m}, {}: {e}", method.as_str());
                        row.error = Some(e.to_string());
                    }
                }
                out.rows.push(row);
            }
        }
    }
    out
}

/// Objective equivalence of the two brute-force optima, when both ran and the
/// fitted restricted coupling is positive.
fn thm2_agreement(
    cfg: &ExperimentConfig,
    inst: &Instance,
    data: Option<&BipartiteData>,
    outcomes: &[(Method, Result<MethodOutcome>)],
) -> Option<bool> {
    if cfg.scenario != Scenario::Thm2Check {
        return None;
    }
    let find = |m: Method| outcomes.iter().find(|(k, _)| *k == m).and_then(|(_, r)| r.as_ref().ok());
    let (ml, omp, data) = (find(Method::BfRestricted)?, find(Method::BfOmp)?, data?);
    if !(ml.restricted_theta? > 0.0) {
        return None;
    }
    let b = data.co_occurrence();
    let s_ml = models::restricted_statistic(&inst.a, &ml.p_hat, &b).ok()?;
    let s_omp = models::restricted_statistic(&inst.a, &omp.p_hat, &b).ok()?;
    Some((s_ml - s_omp).abs() <= 1e-9 * (1.0 + s_ml.abs()))
}

/// Runs every replicate; rows come back in (replicate, m, seed fraction,
/// method) order whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let parts: Vec<ExperimentOutput> = (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, r)).collect();
    let mut out = ExperimentOutput::default();
    for p in parts {
        out.rows.extend(p.rows);
        out.timings.extend(p.timings);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: String,
    pub m: usize,
    pub seed_fraction: f64,
    pub metric: String,
    /// Rows contributing a value.
    pub count: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    /// Standard error of the mean; absent with fewer than two values.
    pub se: Option<f64>,
}

pub const METRICS: [&str; 4] = ["vertex_error", "edge_error", "fpr", "fnr"];

fn metric(row: &ResultRow, name: &str) -> Option<f64> {
    match name {
        "vertex_error" => row.vertex_error,
        "edge_error" => row.edge_error,
        "fpr" => row.fpr,
        "fnr" => row.fnr,
        _ => None,
    }
}

/// `(mean, se)` with the `k − 1` variance.
pub fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (Some(mean), Some((var / k as f64).sqrt()))
}

/// Per (method, m, seed fraction, metric) statistics, in first-appearance
/// order of the groups.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, usize, f64)> = Vec::new();
    for r in rows {
        let key = (r.scenario.clone(), r.method.clone(), r.m, r.seed_fraction);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::new();
    for (scenario, method, m, f) in keys {
        let group: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.scenario == scenario && r.method == method && r.m == m && r.seed_fraction == f)
            .collect();
        let failures = group.iter().filter(|r| r.error.is_some()).count();
        for name in METRICS {
            let values: Vec<f64> = group.iter().filter_map(|r| metric(r, name)).collect();
            let (mean, se) = mean_se(&values);
            out.push(SummaryRow {
                scenario: scenario.clone(),
                method: method.clone(),
                m,
                seed_fraction: f,
                metric: name.to_string(),
                count: values.len(),
                failures,
                mean,
                se,
            });
        }
    }
    out
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const RESULT_HEADER: [&str; 13] = [
    "scenario",
    "method",
    "n",
    "m",
    "replicate",
    "seed_fraction",
    "vertex_error",
    "edge_error",
    "fpr",
    "fnr",
    "lambda_star",
    "agreement",
    "error",
];
const SUMMARY_HEADER: [&str; 9] = [
    "scenario",
    "method",
    "m",
    "seed_fraction",
    "metric",
    "count",
    "failures",
    "mean",
    "se",
];
const TIMING_HEADER: [&str; 5] = ["method", "m", "replicate", "seed_fraction", "seconds"];

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    rd.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Writes results.csv, summary.csv, timings.csv, config.json and, when there
/// are rows, one SVG chart per metric.
pub fn emit_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let results = dir.join("results.csv");
    write_csv(&results, &out.rows, &RESULT_HEADER)?;
    written.push(results);
    let summary = summarize(&out.rows);
    let sp = dir.join("summary.csv");
    write_csv(&sp, &summary, &SUMMARY_HEADER)?;
    written.push(sp);
    let tp = dir.join("timings.csv");
    write_csv(&tp, &out.timings, &TIMING_HEADER)?;
    written.push(tp);
    let cp = dir.join("config.json");
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    fs::write(&cp, json + "\n").map_err(|e| Error::io(&cp, e))?;
    written.push(cp);
    if !out.rows.is_empty() {
        for name in METRICS {
            if let Some(svg) = metric_chart(&summary, name) {
                let path = dir.join(format!("{name}.svg"));
                fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

struct Series {
    label: String,
    points: Vec<(f64, f64, Option<f64>)>,
}

/// Mean ± 2se against m (or against the seed fraction when m is fixed and
/// the fraction varies), one polyline per method.
pub fn metric_chart(summary: &[SummaryRow], name: &str) -> Option<String> {
    let rows: Vec<&SummaryRow> = summary.iter().filter(|s| s.metric == name && s.mean.is_some()).collect();
    if rows.is_empty() {
        return None;
    }
    let mut ms: Vec<usize> = rows.iter().map(|s| s.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let mut fs_: Vec<f64> = rows.iter().map(|s| s.seed_fraction).collect();
    fs_.sort_by(f64::total_cmp);
    fs_.dedup();
    let by_fraction = ms.len() == 1 && fs_.len() > 1;
    let xs: Vec<f64> = if by_fraction {
        fs_.clone()
    } else {
        ms.iter().map(|&m| m as f64).collect()
    };

    let mut series: Vec<Series> = Vec::new();
    for s in &rows {
        let label = if by_fraction || fs_.len() == 1 {
            s.method.clone()
        } else {
            format!("{} f={}", s.method, s.seed_fraction)
        };
        let x = if by_fraction { s.seed_fraction } else { s.m as f64 };
        let point = (x, s.mean.expect("filtered"), s.se);
        match series.iter_mut().find(|t| t.label == label) {
            Some(t) => t.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 150.0, 30.0, 50.0);
    let y_max = rows
        .iter()
        .map(|s| s.mean.unwrap_or(0.0) + 2.0 * s.se.unwrap_or(0.0))
        .fold(0.05f64, f64::max)
        * 1.05;
    let px = |x: f64| {
        let i = xs.iter().position(|v| *v == x).unwrap_or(0) as f64;
        let span = (xs.len().max(2) - 1) as f64;
        left + (w - left - right) * if xs.len() == 1 { 0.5 } else { i / span }
    };
    let py = |y: f64| top + (h - top - bottom) * (1.0 - y / y_max);
    let colors = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    ];

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>"#,
        (w - right + left) / 2.0,
        name
    );
    let (x0, x1, y0, y1) = (left, w - right, py(0.0), py(y_max));
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for &x in &xs {
        let label = if by_fraction { format!("{x}") } else { format!("{}", x as usize) };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{label}</text>"#,
            px(x),
            y0 + 16.0
        );
    }
    for k in 0..=4 {
        let y = y_max * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{y:.3}</text>"#,
            x0 - 6.0,
            py(y) + 4.0
        );
    }
    let x_name = if by_fraction { "seed fraction" } else { "m" };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{x_name}</text>"#,
        (x0 + x1) / 2.0,
        h - 10.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-series="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            xml_escape(&s.label),
            pts.join(" ")
        );
        for &(x, y, se) in &s.points {
            if let Some(se) = se {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                    px(x),
                    py((y - 2.0 * se).max(0.0)),
                    py(y + 2.0 * se)
                );
            }
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = top + 16.0 * k as f64 + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            x1 + 35.0,
            ly + 4.0,
            xml_escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Loads a graph and bipartite file pair (rows indexed like the graph).
pub fn load_external(graph: &Path, bipartite: &Path, prep: &Preprocess) -> Result<(UnipartiteGraph, BipartiteData)> {
    io::load_external(graph, bipartite, prep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, m: usize, v: Option<f64>) -> ResultRow {
        ResultRow {
            scenario: "chain".into(),
            method: method.into(),
            n: 6,
            m,
            replicate: 0,
            seed_fraction: 0.0,
            vertex_error: v,
            edge_error: v.map(|x| x / 2.0),
            fpr: None,
            fnr: Some(0.25),
            lambda_star: Some(0.01),
            agreement: None,
            error: if v.is_none() { Some("boom, \"quoted\"".into()) } else { None },
        }
    }

    #[test]
    fn mean_se_examples() {
        assert_eq!(mean_se(&[0.3]), (Some(0.3), None));
        assert_eq!(mean_se(&[0.2, 0.2]), (Some(0.2), Some(0.0)));
        let values: Vec<f64> = (0..30).map(|k| ((k * 7) % 11) as f64 / 10.0).collect();
        let (mean, se) = mean_se(&values);
        let mut s = 0.0;
        for v in &values {
            s += v;
        }
        let mu = s / 30.0;
        let mut ss = 0.0;
        for v in &values {
            ss += (v - mu).powi(2);
        }
        assert!((mean.unwrap() - mu).abs() < 1e-12);
        assert!((se.unwrap() - (ss / 29.0 / 30.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn summary_counts_failures() {
        let rows = vec![row("c-omp", 100, Some(0.5)), row("c-omp", 100, None), row("c-omp", 100, Some(0.25))];
        let s = summarize(&rows);
        let v = s.iter().find(|r| r.metric == "vertex_error").unwrap();
        assert_eq!((v.count, v.failures), (2, 1));
        assert_eq!(v.mean, Some(0.375));
        let fpr = s.iter().find(|r| r.metric == "fpr").unwrap();
        assert_eq!((fpr.count, fpr.mean, fpr.se), (0, None, None));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("b-invcov", 100, Some(0.1 + 0.2)), row("c-omp", 200, None)];
        let dir = tempfile::tempdir().unwrap();
        let out = ExperimentOutput {
            rows: rows.clone(),
            timings: Vec::new(),
        };
        emit_outputs(&ExperimentConfig::default(), &out, dir.path()).unwrap();
        assert_eq!(read_results(&dir.path().join("results.csv")).unwrap(), rows);
    }

    #[test]
    fn empty_rows_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&ExperimentConfig::default(), &ExperimentOutput::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(files.iter().all(|f| f.extension().unwrap() != "svg"));
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            ExperimentConfig {
                replicates: 0,
                ..ok.clone()
            },
            ExperimentConfig {
                m_grid: vec![100, 100],
                ..ok.clone()
            },
            ExperimentConfig {
                seed_fractions: vec![1.5],
                ..ok.clone()
            },
            ExperimentConfig {
                methods: vec![],
                ..ok.clone()
            },
            ExperimentConfig {
                scenario: Scenario::ExternalData,
                ..ok.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
        assert!(ExperimentConfig::from_json(r#"{"scenario": "chain", "bogus": 1}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"scenario": "fig2-beta", "methods": ["bf-exact", "bf-omp"]}"#).unwrap();
        assert_eq!(cfg.methods, vec![Method::BfExact, Method::BfOmp]);
    }

    #[test]
    fn single_gaussian_row() {
        let cfg = ExperimentConfig {
            scenario: Scenario::Chain,
            n: 6,
            m_grid: vec![2000],
            family: ModelFamily::Gaussian,
            replicates: 1,
            methods: vec![Method::BInvcov],
            ..Default::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 1);
        let v = out.rows[0].vertex_error.unwrap();
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn full_seeds_give_zero_error_and_failures_are_tagged() {
        let cfg = ExperimentConfig {
            scenario: Scenario::Er,
            n: 8,
            er_p: 0.3,
            m_grid: vec![300],
            family: ModelFamily::Gaussian,
            replicates: 2,
            seed_fractions: vec![1.0],
            methods: vec![Method::BInvcov, Method::BPseudo, Method::COmp, Method::CCorr],
            ..Default::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2 * 4);
        for r in &out.rows {
            if r.method == "b-pseudo" {
                assert!(r.error.is_some(), "binary-only method on Gaussian data");
            } else {
                assert_eq!(r.vertex_error, Some(0.0), "{r:?}");
            }
        }
    }

    #[test]
    fn rows_are_deterministic() {
        let cfg = ExperimentConfig {
            scenario: Scenario::Chain,
            n: 5,
            m_grid: vec![100, 300],
            replicates: 3,
            methods: vec![Method::BPseudo, Method::COmp],
            ..Default::default()
        };
        assert_eq!(run_experiment(&cfg).unwrap().rows, run_experiment(&cfg).unwrap().rows);
    }

    #[test]
    fn svg_has_one_polyline_per_method() {
        let rows = vec![
            row("b-invcov", 100, Some(0.4)),
            row("b-invcov", 200, Some(0.2)),
            row("c-omp", 100, Some(0.5)),
        ];
        let svg = metric_chart(&summarize(&rows), "vertex_error").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(metric_chart(&summarize(&rows), "fpr").is_none());
    }
}
