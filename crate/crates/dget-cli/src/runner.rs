//! Config resolution, single-run execution, and persistence.

use crate::config::{
    AlphaSpec, BatchSpec, ExperimentConfig, OutputFormat, TopologySpec, WeightScheme,
};
use dget::engine::{self, AlgorithmConfig, InitialPoint, Mode};
use dget::problems::{FiniteSumProblem, OnlineProblem, Problem};
use dget::theory::{
    choose_beta, finite_sum_batch_plan, online_batch_plan, potential_constants, theorem1_stepsize,
    PotentialConstants, StepsizePlan,
};
use dget::topology::{
    laplacian_weights, max_degree_weights, metropolis_weights, Graph, MixingMatrix,
};
use dget::trace::RunTrace;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("problem error: {0}")]
    Problem(#[from] dget::problems::ProblemError),
    #[error("graph error: {0}")]
    Topology(#[from] dget::topology::TopologyError),
    #[error("theory error: {0}")]
    Theory(#[from] dget::theory::TheoryError),
    #[error("engine error: {0}")]
    Engine(#[from] dget::engine::EngineError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 config, 3 divergence, 4 mixing validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Engine(dget::engine::EngineError::Diverged { .. }) => 3,
            HarnessError::Topology(dget::topology::TopologyError::SpectralGapViolation {
                ..
            }) => 4,
            HarnessError::Config(_)
            | HarnessError::Problem(_)
            | HarnessError::Topology(_)
            | HarnessError::Theory(_)
            | HarnessError::Engine(_) => 2,
            HarnessError::Io(_) => 1,
        }
    }
}

/// Theory quantities resolved for a run (reported in the summary).
#[derive(Debug, Clone)]
pub struct TheoryInfo {
    pub plan: StepsizePlan,
    pub alpha: f64,
    /// `None` when the chosen stepsize is outside the guaranteed range.
    pub constants: Option<PotentialConstants>,
}

/// Everything needed to execute one run.
pub struct PreparedRun {
    pub problem: Problem,
    pub mixing: MixingMatrix,
    pub engine_config: AlgorithmConfig,
    pub theory: TheoryInfo,
}

fn build_graph_from(config: &ExperimentConfig) -> Result<Graph, HarnessError> {
    let m = config.problem.m;
    let g = match &config.graph.topology {
        TopologySpec::Ring => Graph::ring(m)?,
        TopologySpec::Path => Graph::path(m)?,
        TopologySpec::Star => Graph::star(m)?,
        TopologySpec::Complete => Graph::complete(m)?,
        TopologySpec::ErdosRenyi => Graph::erdos_renyi(
            m,
            config.graph.er_prob,
            config.graph.seed.unwrap_or(config.problem.seed),
        )?,
        TopologySpec::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let g = Graph::from_edge_list_str(&text)?;
            if g.m() != m {
                return Err(crate::config::ConfigError::Inconsistent(format!(
                    "graph file has {} nodes but problem.m = {m}",
                    g.m()
                ))
                .into());
            }
            g
        }
    };
    Ok(g)
}

pub fn build_mixing(
    graph: &Graph,
    scheme: WeightScheme,
    gamma: Option<f64>,
) -> Result<MixingMatrix, HarnessError> {
    let w = match scheme {
        WeightScheme::Metropolis => metropolis_weights(graph),
        WeightScheme::MaxDegree => max_degree_weights(graph)?,
        WeightScheme::Laplacian => laplacian_weights(graph, gamma)?,
    };
    Ok(w)
}

fn build_problem(config: &ExperimentConfig, seed: u64) -> Result<Problem, HarnessError> {
    let p = &config.problem;
    Ok(match config.algorithm.mode {
        Mode::FiniteSum => Problem::FiniteSum(FiniteSumProblem::new(
            p.kind,
            p.m,
            p.n.expect("validated by parse_config"),
            p.d,
            seed,
            p.lambda,
        )?),
        Mode::Online => Problem::Online(OnlineProblem::new(
            p.kind, p.m, p.d, seed, p.lambda, p.sigma2,
        )?),
    })
}

/// Resolves the config into a problem instance, mixing matrix, stepsize,
/// and batch plan. `seed_override` substitutes the master seed (used by
/// multi-seed comparisons).
pub fn prepare(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
) -> Result<PreparedRun, HarnessError> {
    let seed = seed_override.unwrap_or(config.problem.seed);
    let problem = build_problem(config, seed)?;
    let graph = build_graph_from(config)?;
    let mixing = build_mixing(&graph, config.graph.scheme, config.graph.gamma)?;

    let beta = choose_beta(mixing.eta())?;
    let plan = theorem1_stepsize(
        problem.lipschitz(),
        mixing.eta(),
        beta,
        config.algorithm.safety,
    )?;
    let alpha = match config.algorithm.alpha {
        AlphaSpec::Theorem1 => plan.alpha,
        AlphaSpec::Fixed(a) => a,
    };
    let constants =
        potential_constants(alpha, problem.lipschitz(), beta, mixing.eta(), problem.m()).ok();

    let (q, s1, s2) = resolve_batches(config, alpha, beta, constants.as_ref())?;

    let mut engine_config = AlgorithmConfig::new(
        config.algorithm.name,
        config.algorithm.mode,
        alpha,
        config.algorithm.horizon,
    );
    engine_config.q = q;
    engine_config.s1 = s1;
    engine_config.s2 = s2;
    engine_config.seed = seed;
    engine_config.diag_every = config.algorithm.diag_every;
    engine_config.init = if config.algorithm.x0 == 0.0 {
        InitialPoint::Zeros
    } else {
        InitialPoint::Constant(config.algorithm.x0)
    };

    Ok(PreparedRun {
        problem,
        mixing,
        engine_config,
        theory: TheoryInfo {
            plan,
            alpha,
            constants,
        },
    })
}

fn resolve_batches(
    config: &ExperimentConfig,
    alpha: f64,
    beta: f64,
    constants: Option<&PotentialConstants>,
) -> Result<(usize, usize, usize), HarnessError> {
    match config.algorithm.mode {
        Mode::FiniteSum => {
            let n = config.problem.n.expect("validated by parse_config");
            let (auto_q, auto_s2) = finite_sum_batch_plan(n);
            let q = match config.algorithm.q {
                BatchSpec::Auto => auto_q,
                BatchSpec::Fixed(v) => v,
            };
            let s2 = match config.algorithm.s2 {
                BatchSpec::Auto => auto_s2,
                BatchSpec::Fixed(v) => v,
            };
            Ok((q, 1, s2))
        }
        Mode::Online => {
            let (mut q, s1, mut s2) = match config.algorithm.s1 {
                BatchSpec::Auto => {
                    let c0 = constants
                        .ok_or_else(|| {
                            crate::config::ConfigError::Inconsistent(format!(
                                "algorithm.s1 = auto needs the descent constants, but alpha = \
                                 {alpha} is outside the guaranteed range; lower alpha or set \
                                 batches explicitly"
                            ))
                        })?
                        .c0;
                    let (s1, s2, q) = online_batch_plan(
                        config.algorithm.epsilon,
                        config.problem.sigma2,
                        c0,
                        alpha,
                        beta,
                    )?;
                    (q, s1, s2)
                }
                BatchSpec::Fixed(v) => {
                    let side = dget::theory::ceil_sqrt(v);
                    (side, v, side)
                }
            };
            if let BatchSpec::Fixed(v) = config.algorithm.q {
                q = v;
            }
            if let BatchSpec::Fixed(v) = config.algorithm.s2 {
                s2 = v;
            }
            Ok((q, s1, s2))
        }
    }
}

/// Summary of a single run; serialized as the summary JSON.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub best_h: f64,
    pub best_h_iter: usize,
    pub first_hit_iter: Option<usize>,
    pub first_hit_ifo: Option<u64>,
    pub first_hit_comm: Option<u64>,
    pub beta: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub alpha: f64,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub wall_ms: u64,
}

pub fn summarize(trace: &RunTrace, theory: &TheoryInfo, epsilon: f64, wall_ms: u64) -> RunSummary {
    let (best_h, best_h_iter) = trace.best_h();
    let first = trace.first_hit(epsilon);
    RunSummary {
        best_h,
        best_h_iter,
        first_hit_iter: first.map(|r| r.r),
        first_hit_ifo: first.map(|r| r.ifo_total),
        first_hit_comm: first.map(|r| r.comm_rounds),
        beta: theory.plan.beta,
        k1: theory.plan.k1,
        k2: theory.plan.k2,
        k3: theory.plan.k3,
        alpha: theory.alpha,
        c0: theory.constants.as_ref().map(|c| c.c0),
        c1: theory.constants.as_ref().map(|c| c.c1),
        c2: theory.constants.as_ref().map(|c| c.c2),
        c3: theory.constants.as_ref().map(|c| c.c3),
        wall_ms,
    }
}

/// Runs the configured experiment once.
pub fn execute(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
) -> Result<(RunTrace, RunSummary), HarnessError> {
    let prepared = prepare(config, seed_override)?;
    let start = Instant::now();
    let trace = engine::run(&prepared.problem, &prepared.mixing, &prepared.engine_config)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    let summary = summarize(&trace, &prepared.theory, config.algorithm.epsilon, wall_ms);
    Ok((trace, summary))
}

/// Writes `content` to `dir/name` atomically (temp file + rename).
pub fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<PathBuf, std::io::Error> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

/// Executes a run and persists `trace.csv` / `summary.json` according to
/// the configured formats. Returns the written paths.
pub fn run_to_files(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<(Vec<PathBuf>, RunSummary), HarnessError> {
    let (trace, summary) = execute(config, seed_override)?;
    let dir = out_override.unwrap_or(&config.output.dir);
    let mut written = Vec::new();
    if config.output.formats.contains(&OutputFormat::Csv) {
        written.push(write_atomic(dir, "trace.csv", &trace.to_csv())?);
    }
    if config.output.formats.contains(&OutputFormat::Json) {
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        written.push(write_atomic(dir, "summary.json", &json)?);
    }
    Ok((written, summary))
}

/// Finite-difference verification of the configured problem's gradients.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Compares analytic gradients against central finite differences of the
/// loss at seeded random points (step 1e-5, pass at relative error 1e-6).
pub fn gradcheck(config: &ExperimentConfig) -> Result<GradCheckReport, HarnessError> {
    let problem = build_problem(config, config.problem.seed)?;
    let d = problem.d();
    let mut max_rel: f64 = 0.0;
    let probes = 10;
    // deterministic probe points spread over [-1, 1]^d
    let point = |p: usize, c: usize| -> f64 {
        let t = ((p * d + c) as f64 * 0.7391) % 2.0;
        t - 1.0
    };
    for p in 0..probes {
        let x: Vec<f64> = (0..d).map(|c| point(p, c)).collect();
        let i = p % problem.m();
        let (analytic, fd) = match &problem {
            Problem::FiniteSum(fs) => {
                let j = p % fs.n();
                let analytic = fs.sample_gradient(i, j, &x);
                let fd = fd_gradient(|pt| fs.sample_loss(i, j, pt), &x, 1e-5);
                (analytic, fd)
            }
            Problem::Online(on) => {
                let analytic = on.true_local_gradient(i, &x);
                let fd = fd_gradient(|pt| on.local_loss(i, pt), &x, 1e-5);
                (analytic, fd)
            }
        };
        let dist: f64 = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        max_rel = max_rel.max(dist / scale);
    }
    Ok(GradCheckReport {
        probes,
        max_rel_err: max_rel,
        pass: max_rel <= 1e-6,
    })
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for c in 0..x.len() {
        probe[c] = x[c] + step;
        let up = f(&probe);
        probe[c] = x[c] - step;
        let down = f(&probe);
        probe[c] = x[c];
        grad[c] = (up - down) / (2.0 * step);
    }
    grad
}
