//! Iteration loops for D-GET and the baselines.
//!
//! All algorithms share the stacked state `(x, y, v)`:
//!
//! - D-GET: `x <- W x - alpha y`, then the local estimator `v` is either
//!   refreshed from scratch (every `q`-th iteration, including iteration 0)
//!   or updated recursively with a fresh per-node minibatch of gradient
//!   differences, then `y <- W y + v - v_prev`. Two broadcasts per
//!   iteration (`x` and `y`).
//! - GNSD: same `x` and `y` updates, but `v` is a fresh minibatch gradient
//!   every iteration (no recursion, no refresh loop).
//! - DGD / DSGD: `x <- W x - alpha g` with `g` the local full gradient
//!   (DGD) or a minibatch gradient (DSGD); one broadcast per iteration.
//!   `y` and `v` mirror `g` so diagnostics read uniformly.
//!
//! Per-node gradient work runs on the rayon pool behind the `parallel`
//! feature. Each node draws from its own `(seed, node, iteration)` stream
//! and writes its own block, so the schedule cannot affect results.

use crate::diagnostics;
use crate::problems::Problem;
use crate::stacked::{l2_norm_sq, Stacked};
use crate::stream::{keyed_rng, StreamDomain};
use crate::topology::MixingMatrix;
use crate::trace::{RunTrace, TraceRow};
use rand::Rng;
use std::str::FromStr;
use thiserror::Error;

/// Iterates are declared divergent past this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(
        "iterates diverged at iteration {iter}: non-finite value or magnitude above {limit:e}"
    )]
    Diverged {
        iter: usize,
        limit: f64,
        trace: Box<RunTrace>,
    },
    #[error("invalid algorithm configuration: {0}")]
    InvalidConfig(String),
    #[error("config is in {config} mode but the problem is {problem}")]
    ModeMismatch { config: Mode, problem: Mode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dget,
    Gnsd,
    Dgd,
    Dsgd,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dget" => Ok(Algorithm::Dget),
            "gnsd" => Ok(Algorithm::Gnsd),
            "dgd" => Ok(Algorithm::Dgd),
            "dsgd" => Ok(Algorithm::Dsgd),
            other => Err(format!(
                "unknown algorithm `{other}` (expected dget|gnsd|dgd|dsgd)"
            )),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Dget => "dget",
            Algorithm::Gnsd => "gnsd",
            Algorithm::Dgd => "dgd",
            Algorithm::Dsgd => "dsgd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FiniteSum,
    Online,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "finite-sum" => Ok(Mode::FiniteSum),
            "online" => Ok(Mode::Online),
            other => Err(format!(
                "unknown mode `{other}` (expected finite-sum|online)"
            )),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::FiniteSum => "finite-sum",
            Mode::Online => "online",
        })
    }
}

/// How inner minibatches are realized. `FullBatch` replaces the sampled
/// batch with one pass over all `n` samples and exists as a deterministic
/// oracle configuration for tests and baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    #[default]
    WithReplacement,
    FullBatch,
}

/// Starting point for all nodes.
#[derive(Debug, Clone, Default)]
pub enum InitialPoint {
    /// All nodes at the origin (consensus error starts at zero).
    #[default]
    Zeros,
    /// All nodes at the same constant vector.
    Constant(f64),
    /// Explicit stacked start, one row per node.
    Given(Stacked),
}

#[derive(Debug, Clone)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub mode: Mode,
    /// Stepsize. Zero is allowed and yields consensus-only dynamics.
    pub alpha: f64,
    /// Refresh period for D-GET (ignored by the baselines).
    pub q: usize,
    /// Refresh batch size, online mode only.
    pub s1: usize,
    /// Inner minibatch size.
    pub s2: usize,
    /// Iteration horizon `T`.
    pub horizon: usize,
    pub seed: u64,
    /// Record every `diag_every`-th iteration (iteration 0 always).
    pub diag_every: usize,
    pub init: InitialPoint,
    pub sampling: SamplingMode,
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm, mode: Mode, alpha: f64, horizon: usize) -> Self {
        AlgorithmConfig {
            algorithm,
            mode,
            alpha,
            q: 1,
            s1: 1,
            s2: 1,
            horizon,
            seed: 0,
            diag_every: 1,
            init: InitialPoint::default(),
            sampling: SamplingMode::default(),
        }
    }

    fn validate(&self, problem: &Problem) -> Result<(), EngineError> {
        let problem_mode = match problem {
            Problem::FiniteSum(_) => Mode::FiniteSum,
            Problem::Online(_) => Mode::Online,
        };
        if self.mode != problem_mode {
            return Err(EngineError::ModeMismatch {
                config: self.mode,
                problem: problem_mode,
            });
        }
        if self.algorithm == Algorithm::Dgd && self.mode == Mode::Online {
            return Err(EngineError::InvalidConfig(
                "dgd needs full local gradients, which online mode cannot supply; use dsgd".into(),
            ));
        }
        if self.q == 0 {
            return Err(EngineError::InvalidConfig(
                "loop period q must be >= 1".into(),
            ));
        }
        if self.s2 == 0 {
            return Err(EngineError::InvalidConfig(
                "inner batch s2 must be >= 1".into(),
            ));
        }
        if self.mode == Mode::Online && self.s1 < self.s2 {
            return Err(EngineError::InvalidConfig(format!(
                "online mode requires s1 >= s2, got s1 = {}, s2 = {}",
                self.s1, self.s2
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(EngineError::InvalidConfig(format!(
                "stepsize alpha must be finite and nonnegative, got {}",
                self.alpha
            )));
        }
        if self.diag_every == 0 {
            return Err(EngineError::InvalidConfig("diag_every must be >= 1".into()));
        }
        if let InitialPoint::Given(x0) = &self.init {
            if x0.m() != problem.m() || x0.d() != problem.d() {
                return Err(EngineError::InvalidConfig(format!(
                    "initial point is {}x{}, problem needs {}x{}",
                    x0.m(),
                    x0.d(),
                    problem.m(),
                    problem.d()
                )));
            }
        }
        Ok(())
    }

    fn initial_x(&self, m: usize, d: usize) -> Stacked {
        match &self.init {
            InitialPoint::Zeros => Stacked::zeros(m, d),
            InitialPoint::Constant(c) => Stacked::constant(m, d, *c),
            InitialPoint::Given(x0) => x0.clone(),
        }
    }
}

/// Stacked state of one run: current and previous iterates, the tracker,
/// and the local estimator with its previous value.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub r: usize,
    pub x: Stacked,
    pub x_prev: Stacked,
    pub y: Stacked,
    pub v: Stacked,
    pub v_prev: Stacked,
    pub comm_rounds: u64,
}

impl IterateState {
    pub fn new(x0: Stacked) -> Self {
        let (m, d) = (x0.m(), x0.d());
        IterateState {
            r: 0,
            x_prev: x0.clone(),
            x: x0,
            y: Stacked::zeros(m, d),
            v: Stacked::zeros(m, d),
            v_prev: Stacked::zeros(m, d),
            comm_rounds: 0,
        }
    }

    pub fn x_bar(&self) -> Vec<f64> {
        self.x.mean()
    }

    pub fn y_bar(&self) -> Vec<f64> {
        self.y.mean()
    }

    pub fn v_bar(&self) -> Vec<f64> {
        self.v.mean()
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.v.is_finite()
            && self.x.max_abs() <= DIVERGENCE_LIMIT
    }
}

/// Runs `f(node, block)` over the per-node blocks of `buf`, on the rayon
/// pool when the `parallel` feature is enabled.
fn for_each_node(buf: &mut Stacked, f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    let d = buf.d();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        buf.data_mut()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, block)| f(i, block));
    }
    #[cfg(not(feature = "parallel"))]
    {
        buf.data_mut()
            .chunks_mut(d)
            .enumerate()
            .for_each(|(i, block)| f(i, block));
    }
}

/// Consensus step plus descent along the tracker:
/// `x_i <- sum_k w[i][k] x_k - alpha y_i`. One broadcast.
pub fn x_update(state: &mut IterateState, w: &MixingMatrix, alpha: f64) {
    let mixed = w.mix(&state.x);
    state.x_prev = std::mem::replace(&mut state.x, mixed);
    for (xv, yv) in state.x.data_mut().iter_mut().zip(state.y.data()) {
        *xv -= alpha * yv;
    }
    state.comm_rounds += 1;
}

/// Estimator refresh: exact local gradient in finite-sum mode, a mean of
/// `s1` fresh draws in online mode.
pub fn v_refresh(state: &mut IterateState, problem: &Problem, s1: usize, seed: u64) {
    std::mem::swap(&mut state.v, &mut state.v_prev);
    let iter = state.r as u64;
    let x = &state.x;
    match problem {
        Problem::FiniteSum(p) => for_each_node(&mut state.v, |i, out| {
            out.copy_from_slice(&p.local_full_gradient(i, x.node(i)));
        }),
        Problem::Online(p) => for_each_node(&mut state.v, |i, out| {
            let mut rng = keyed_rng(seed, StreamDomain::Sampling, i as u64, iter);
            out.copy_from_slice(&p.draw_mean_gradient(i, x.node(i), s1, &mut rng));
        }),
    }
}

/// Recursive estimator step: each node draws its own with-replacement
/// minibatch and adds the mean gradient difference between the current and
/// previous iterate to its previous estimate.
pub fn v_recursive(
    state: &mut IterateState,
    problem: &Problem,
    s2: usize,
    sampling: SamplingMode,
    seed: u64,
) {
    std::mem::swap(&mut state.v, &mut state.v_prev);
    let iter = state.r as u64;
    let x = &state.x;
    let x_prev = &state.x_prev;
    let v_prev = &state.v_prev;
    match problem {
        Problem::FiniteSum(p) => for_each_node(&mut state.v, |i, out| {
            let n = p.n();
            let idxs: Vec<usize> = match sampling {
                SamplingMode::WithReplacement => {
                    let mut rng = keyed_rng(seed, StreamDomain::Sampling, i as u64, iter);
                    (0..s2).map(|_| rng.random_range(0..n)).collect()
                }
                SamplingMode::FullBatch => (0..n).collect(),
            };
            let diff = p.minibatch_mean_gradient_diff(i, &idxs, x.node(i), x_prev.node(i));
            for ((o, dv), pv) in out.iter_mut().zip(&diff).zip(v_prev.node(i)) {
                *o = dv + pv;
            }
        }),
        Problem::Online(p) => for_each_node(&mut state.v, |i, out| {
            let mut rng = keyed_rng(seed, StreamDomain::Sampling, i as u64, iter);
            let diff = p.draw_mean_gradient_diff(i, x.node(i), x_prev.node(i), s2, &mut rng);
            for ((o, dv), pv) in out.iter_mut().zip(&diff).zip(v_prev.node(i)) {
                *o = dv + pv;
            }
        }),
    }
}

/// Tracker step: `y_i <- sum_k w[i][k] y_k + v_i - v_prev_i`. One broadcast.
pub fn y_update(state: &mut IterateState, w: &MixingMatrix) {
    let mut mixed = w.mix(&state.y);
    for ((yv, vv), pv) in mixed
        .data_mut()
        .iter_mut()
        .zip(state.v.data())
        .zip(state.v_prev.data())
    {
        *yv += vv - pv;
    }
    state.y = mixed;
    state.comm_rounds += 1;
}

/// Fresh minibatch gradient into `v` (the GNSD estimator and the DSGD
/// descent direction).
fn v_fresh_batch(
    state: &mut IterateState,
    problem: &Problem,
    s2: usize,
    sampling: SamplingMode,
    seed: u64,
) {
    std::mem::swap(&mut state.v, &mut state.v_prev);
    let iter = state.r as u64;
    let x = &state.x;
    match problem {
        Problem::FiniteSum(p) => for_each_node(&mut state.v, |i, out| match sampling {
            SamplingMode::WithReplacement => {
                let n = p.n();
                let mut rng = keyed_rng(seed, StreamDomain::Sampling, i as u64, iter);
                let idxs: Vec<usize> = (0..s2).map(|_| rng.random_range(0..n)).collect();
                out.copy_from_slice(&p.minibatch_mean_gradient(i, &idxs, x.node(i)));
            }
            SamplingMode::FullBatch => {
                out.copy_from_slice(&p.local_full_gradient(i, x.node(i)));
            }
        }),
        Problem::Online(p) => for_each_node(&mut state.v, |i, out| {
            let mut rng = keyed_rng(seed, StreamDomain::Sampling, i as u64, iter);
            out.copy_from_slice(&p.draw_mean_gradient(i, x.node(i), s2, &mut rng));
        }),
    }
}

struct RunRecorder {
    rows: Vec<TraceRow>,
    max_tracking_residual: f64,
    max_xbar_residual: f64,
    ifo_start: u64,
    evals_start: u64,
}

impl RunRecorder {
    fn new(problem: &Problem, horizon: usize) -> Self {
        RunRecorder {
            rows: Vec::with_capacity(horizon + 1),
            max_tracking_residual: 0.0,
            max_xbar_residual: 0.0,
            ifo_start: problem.counter().total(),
            evals_start: problem.counter().grad_evals(),
        }
    }

    fn record(&mut self, problem: &Problem, state: &IterateState, alpha: f64, refresh: bool) {
        let snap = diagnostics::snapshot(problem, &state.x, &state.y, &state.v, alpha);
        self.rows.push(TraceRow {
            r: state.r,
            f_bar: snap.f_bar,
            h: snap.stationarity.h,
            grad_term: snap.stationarity.grad_term,
            consensus_term: snap.stationarity.consensus_term,
            tracking_err: snap.row.tracking_err,
            estimator_err: snap.row.estimator_err,
            y_consensus: snap.row.y_consensus,
            potential_h: snap.row.potential_h,
            ifo_total: problem.counter().total() - self.ifo_start,
            comm_rounds: state.comm_rounds,
            refresh,
            ybar_norm_sq: snap.ybar_norm_sq,
            grad_evals: problem.counter().grad_evals() - self.evals_start,
        });
    }

    fn update_residuals(
        &mut self,
        state: &IterateState,
        alpha: f64,
        xbar_prev: &[f64],
        ybar_prev: &[f64],
    ) {
        let xbar = state.x.mean();
        let mut recursion_sq = 0.0;
        for c in 0..xbar.len() {
            let expected = xbar_prev[c] - alpha * ybar_prev[c];
            recursion_sq += (xbar[c] - expected) * (xbar[c] - expected);
        }
        let xbar_resid = recursion_sq.sqrt() / (1.0 + l2_norm_sq(&xbar).sqrt());
        self.max_xbar_residual = self.max_xbar_residual.max(xbar_resid);

        let ybar = state.y.mean();
        let vbar = state.v.mean();
        let mut diff_sq = 0.0;
        for c in 0..ybar.len() {
            diff_sq += (ybar[c] - vbar[c]) * (ybar[c] - vbar[c]);
        }
        let tracking = diff_sq.sqrt() / (1.0 + l2_norm_sq(&vbar).sqrt());
        self.max_tracking_residual = self.max_tracking_residual.max(tracking);
    }

    fn finish(
        self,
        problem: &Problem,
        state: &IterateState,
        horizon: usize,
        diag_every: usize,
    ) -> RunTrace {
        RunTrace {
            rows: self.rows,
            m: state.x.m(),
            horizon,
            diag_every,
            max_tracking_residual: self.max_tracking_residual,
            max_xbar_residual: self.max_xbar_residual,
            final_x_bar: state.x.mean(),
            final_ifo_total: problem.counter().total() - self.ifo_start,
            final_comm_rounds: state.comm_rounds,
        }
    }
}

fn check_finite(
    problem: &Problem,
    state: &IterateState,
    recorder: &RunRecorder,
    horizon: usize,
    diag_every: usize,
) -> Result<(), EngineError> {
    if state.is_finite() {
        return Ok(());
    }
    let trace = RunTrace {
        rows: recorder.rows.clone(),
        m: state.x.m(),
        horizon,
        diag_every,
        max_tracking_residual: recorder.max_tracking_residual,
        max_xbar_residual: recorder.max_xbar_residual,
        final_x_bar: vec![f64::NAN; state.x.d()],
        final_ifo_total: problem.counter().total() - recorder.ifo_start,
        final_comm_rounds: state.comm_rounds,
    };
    Err(EngineError::Diverged {
        iter: state.r,
        limit: DIVERGENCE_LIMIT,
        trace: Box::new(trace),
    })
}

/// Dispatches on `config.algorithm`.
pub fn run(
    problem: &Problem,
    w: &MixingMatrix,
    config: &AlgorithmConfig,
) -> Result<RunTrace, EngineError> {
    match config.algorithm {
        Algorithm::Dget => run_dget(problem, w, config),
        Algorithm::Gnsd => run_gnsd(problem, w, config),
        Algorithm::Dgd | Algorithm::Dsgd => run_dgd(problem, w, config),
    }
}

fn check_dims(problem: &Problem, w: &MixingMatrix) -> Result<(), EngineError> {
    if w.m() != problem.m() {
        return Err(EngineError::InvalidConfig(format!(
            "mixing matrix has {} nodes, problem has {}",
            w.m(),
            problem.m()
        )));
    }
    Ok(())
}

/// D-GET: gradient estimation (refresh + recursion) and tracking.
pub fn run_dget(
    problem: &Problem,
    w: &MixingMatrix,
    config: &AlgorithmConfig,
) -> Result<RunTrace, EngineError> {
    assert_eq!(
        config.algorithm,
        Algorithm::Dget,
        "run_dget requires algorithm = dget"
    );
    config.validate(problem)?;
    check_dims(problem, w)?;
    let mut state = IterateState::new(config.initial_x(problem.m(), problem.d()));
    let mut recorder = RunRecorder::new(problem, config.horizon);

    v_refresh(&mut state, problem, config.s1, config.seed);
    state.y = state.v.clone();
    recorder.record(problem, &state, config.alpha, true);
    check_finite(
        problem,
        &state,
        &recorder,
        config.horizon,
        config.diag_every,
    )?;

    for r in 1..=config.horizon {
        state.r = r;
        let xbar_prev = state.x.mean();
        let ybar_prev = state.y.mean();
        x_update(&mut state, w, config.alpha);
        let refresh = r % config.q == 0;
        if refresh {
            v_refresh(&mut state, problem, config.s1, config.seed);
        } else {
            v_recursive(&mut state, problem, config.s2, config.sampling, config.seed);
        }
        y_update(&mut state, w);
        recorder.update_residuals(&state, config.alpha, &xbar_prev, &ybar_prev);
        check_finite(
            problem,
            &state,
            &recorder,
            config.horizon,
            config.diag_every,
        )?;
        if r % config.diag_every == 0 {
            recorder.record(problem, &state, config.alpha, refresh);
        }
    }
    Ok(recorder.finish(problem, &state, config.horizon, config.diag_every))
}

/// GNSD baseline: tracking fed by fresh minibatch gradients every
/// iteration.
pub fn run_gnsd(
    problem: &Problem,
    w: &MixingMatrix,
    config: &AlgorithmConfig,
) -> Result<RunTrace, EngineError> {
    assert_eq!(
        config.algorithm,
        Algorithm::Gnsd,
        "run_gnsd requires algorithm = gnsd"
    );
    config.validate(problem)?;
    check_dims(problem, w)?;
    let mut state = IterateState::new(config.initial_x(problem.m(), problem.d()));
    let mut recorder = RunRecorder::new(problem, config.horizon);

    v_fresh_batch(&mut state, problem, config.s2, config.sampling, config.seed);
    state.y = state.v.clone();
    recorder.record(problem, &state, config.alpha, true);
    check_finite(
        problem,
        &state,
        &recorder,
        config.horizon,
        config.diag_every,
    )?;

    for r in 1..=config.horizon {
        state.r = r;
        let xbar_prev = state.x.mean();
        let ybar_prev = state.y.mean();
        x_update(&mut state, w, config.alpha);
        v_fresh_batch(&mut state, problem, config.s2, config.sampling, config.seed);
        y_update(&mut state, w);
        recorder.update_residuals(&state, config.alpha, &xbar_prev, &ybar_prev);
        check_finite(
            problem,
            &state,
            &recorder,
            config.horizon,
            config.diag_every,
        )?;
        if r % config.diag_every == 0 {
            recorder.record(problem, &state, config.alpha, false);
        }
    }
    Ok(recorder.finish(problem, &state, config.horizon, config.diag_every))
}

/// DGD (full local gradients) and DSGD (minibatch gradients): plain
/// decentralized descent without tracking; one broadcast per iteration.
pub fn run_dgd(
    problem: &Problem,
    w: &MixingMatrix,
    config: &AlgorithmConfig,
) -> Result<RunTrace, EngineError> {
    assert!(
        matches!(config.algorithm, Algorithm::Dgd | Algorithm::Dsgd),
        "run_dgd requires algorithm = dgd or dsgd"
    );
    config.validate(problem)?;
    check_dims(problem, w)?;
    let full = config.algorithm == Algorithm::Dgd;
    let mut state = IterateState::new(config.initial_x(problem.m(), problem.d()));
    let mut recorder = RunRecorder::new(problem, config.horizon);

    let sampling = if full {
        SamplingMode::FullBatch
    } else {
        config.sampling
    };
    v_fresh_batch(&mut state, problem, config.s2, sampling, config.seed);
    state.y = state.v.clone();
    recorder.record(problem, &state, config.alpha, true);
    check_finite(
        problem,
        &state,
        &recorder,
        config.horizon,
        config.diag_every,
    )?;

    for r in 1..=config.horizon {
        state.r = r;
        let xbar_prev = state.x.mean();
        let ybar_prev = state.y.mean();
        // x <- W x - alpha g with g the previous iteration's gradient,
        // mirrored in y
        x_update(&mut state, w, config.alpha);
        v_fresh_batch(&mut state, problem, config.s2, sampling, config.seed);
        state.y = state.v.clone();
        recorder.update_residuals(&state, config.alpha, &xbar_prev, &ybar_prev);
        check_finite(
            problem,
            &state,
            &recorder,
            config.horizon,
            config.diag_every,
        )?;
        if r % config.diag_every == 0 {
            recorder.record(problem, &state, config.alpha, false);
        }
    }
    Ok(recorder.finish(problem, &state, config.horizon, config.diag_every))
}
