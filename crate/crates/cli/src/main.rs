use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bipmatch::experiment::{self, ExperimentConfig, Method, Scenario};
use bipmatch::matcher::MatchConfig;
use bipmatch::{io, Error, ModelFamily, SeedSet};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bipmatch",
    version,
    about = "Match a unipartite graph to the vertices of a bipartite network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match one graph against one bipartite matrix.
    Match {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        bipartite: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Matcher settings as JSON (same schema as the `matcher` config block).
        #[arg(long)]
        matcher_config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
    },
    /// Write a simulated instance: graph.tsv, bipartite.csv and truth.tsv.
    Simulate {
        #[arg(long, value_enum)]
        scenario: SimScenario,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long, value_enum, default_value_t = Family::Ising)]
        family: Family,
        #[arg(long, default_value_t = 0.4)]
        theta: f64,
        #[arg(long, default_value_t = 0.15)]
        er_p: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimScenario {
    Chain,
    Er,
    Thm2Check,
    Fig2Beta,
    Fig2Theta,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Ising,
    Gaussian,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, out } => run(&config, out),
        Command::Match {
            graph,
            bipartite,
            method,
            seeds,
            out,
            matcher_config,
            rng_seed,
        } => match_one(
            &graph,
            &bipartite,
            method,
            seeds.as_deref(),
            out.as_deref(),
            matcher_config.as_deref(),
            rng_seed,
        ),
        Command::Simulate {
            scenario,
            n,
            m,
            family,
            theta,
            er_p,
            seed,
            out,
        } => {
            let scenario = match scenario {
                SimScenario::Chain => Scenario::Chain,
                SimScenario::Er => Scenario::Er,
                SimScenario::Thm2Check => Scenario::Thm2Check,
                SimScenario::Fig2Beta => Scenario::Fig2Beta,
                SimScenario::Fig2Theta => Scenario::Fig2Theta,
            };
            let family = match family {
                Family::Ising => ModelFamily::Ising,
                Family::Gaussian => ModelFamily::Gaussian,
            };
            simulate(scenario, n, m, family, theta, er_p, seed, &out)
        }
    }
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let output = experiment::run_experiment(&cfg)?;
    let failed = output.rows.iter().filter(|r| r.error.is_some()).count();
    let files = experiment::emit_outputs(&cfg, &output, &dir)?;
    println!("{} rows ({failed} failed) written to {}", output.rows.len(), dir.display());
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn match_one(
    graph: &Path,
    bipartite: &Path,
    method: Method,
    seeds: Option<&Path>,
    out: Option<&Path>,
    matcher_config: Option<&Path>,
    rng_seed: u64,
) -> Result<(), Error> {
    let matcher: MatchConfig = match matcher_config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let cfg: MatchConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            cfg.validate()?;
            cfg
        }
        None => MatchConfig::default(),
    };
    let a = io::read_graph(graph)?;
    let data = io::read_bipartite(bipartite)?;
    if data.n() != a.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            got: data.n(),
        });
    }
    let seeds = match seeds {
        Some(p) => io::read_seeds(p)?,
        None => SeedSet::empty(),
    };
    let outcome = experiment::run_method(method, &a, &data, &seeds, &matcher, rng_seed)?;
    let summary = serde_json::json!({
        "method": method.as_str(),
        "permutation": outcome.p_hat.map(),
        "lambda_star": outcome.lambda_star,
        "edges": outcome.w_hat.as_ref().map(|w| w.pairs()),
    });
    let text = serde_json::to_string_pretty(&summary).expect("json");
    println!("{text}");
    if let Some(dir) = out {
        create_dir(dir)?;
        let perm: String = outcome.p_hat.map().iter().enumerate().map(|(i, j)| format!("{i}\t{j}\n")).collect();
        write(&dir.join("permutation.tsv"), &perm)?;
        write(&dir.join("match.json"), &(text + "\n"))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    scenario: Scenario,
    n: usize,
    m: usize,
    family: ModelFamily,
    theta: f64,
    er_p: f64,
    seed: u64,
    out: &Path,
) -> Result<(), Error> {
    let (family, beta_rule) = match scenario {
        Scenario::Thm2Check => (ModelFamily::Ising, experiment::BetaRule::Zero),
        _ => (family, experiment::BetaRule::Centered),
    };
    let cfg = ExperimentConfig {
        scenario,
        n,
        m_grid: vec![m],
        family,
        theta,
        beta_rule,
        er_p,
        replicates: 1,
        master_seed: seed,
        ..Default::default()
    };
    cfg.validate()?;
    let inst = experiment::simulate_instance(&cfg, 0)?;
    create_dir(out)?;
    io::write_graph(&out.join("graph.tsv"), &inst.a)?;
    io::write_bipartite(&out.join("bipartite.csv"), &inst.data)?;
    let truth: String = inst.p_star.map().iter().enumerate().map(|(i, j)| format!("{i}\t{j}\n")).collect();
    write(&out.join("truth.tsv"), &truth)?;
    println!(
        "wrote n = {}, m = {} ({} edges in A) to {}",
        inst.a.n(),
        inst.data.m(),
        inst.a.edge_count(),
        out.display()
    );
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}
