//! Run-time quality measures.
//!
//! Everything here reads immutable snapshots through the uncounted
//! diagnostic oracle, so measuring a run never changes its sample
//! complexity.

use crate::problems::{OnlineProblem, Problem};
use crate::stacked::{l2_dist_sq, l2_norm_sq, Stacked};
use crate::stream::{keyed_rng, StreamDomain};
use crate::theory::PotentialConstants;
use crate::trace::RunTrace;

/// The stationarity measure `h` and its exact decomposition.
#[derive(Debug, Clone, Copy)]
pub struct StationarityReport {
    /// `grad_term + consensus_term`.
    pub h: f64,
    /// `|| (1/m) sum_i grad f^i(x_i) ||^2`.
    pub grad_term: f64,
    /// `(1/m) sum_i || x_i - x_bar ||^2`.
    pub consensus_term: f64,
}

/// Tracker and estimator error decomposition at one iterate.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticRow {
    /// `|| y_bar - (1/m) sum_i grad f^i(x_i) ||^2`.
    pub tracking_err: f64,
    /// `|| v - grad f(x) ||^2` summed over the stack.
    pub estimator_err: f64,
    /// `f(x_bar) + (1/m)||x - 1 x_bar||^2 + (alpha/m)||y - 1 y_bar||^2`.
    pub potential_h: f64,
    /// `|| y - 1 y_bar ||^2`.
    pub y_consensus: f64,
}

/// Everything required for one trace row, sharing the expensive oracle
/// evaluations between the stationarity and diagnostic pieces.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub stationarity: StationarityReport,
    pub row: DiagnosticRow,
    pub f_bar: f64,
    pub ybar_norm_sq: f64,
}

/// Stationarity measure at stacked iterates `x`.
pub fn stationarity(problem: &Problem, x: &Stacked) -> StationarityReport {
    let avg_grad = problem.global_average_gradient(x);
    stationarity_from(problem, x, &avg_grad)
}

fn stationarity_from(problem: &Problem, x: &Stacked, avg_grad: &[f64]) -> StationarityReport {
    let grad_term = l2_norm_sq(avg_grad);
    let consensus_term = x.spread_sq(&x.mean()) / problem.m() as f64;
    StationarityReport {
        h: grad_term + consensus_term,
        grad_term,
        consensus_term,
    }
}

/// Diagnostic quantities at one state `(x, y, v)`.
pub fn diagnostic_row(
    problem: &Problem,
    x: &Stacked,
    y: &Stacked,
    v: &Stacked,
    alpha: f64,
) -> DiagnosticRow {
    let avg_grad = problem.global_average_gradient(x);
    diagnostic_row_from(problem, x, y, v, alpha, &avg_grad).0
}

fn diagnostic_row_from(
    problem: &Problem,
    x: &Stacked,
    y: &Stacked,
    v: &Stacked,
    alpha: f64,
    avg_grad: &[f64],
) -> (DiagnosticRow, f64) {
    let m = problem.m() as f64;
    let y_bar = y.mean();
    let tracking_err = l2_dist_sq(&y_bar, avg_grad);
    let mut estimator_err = 0.0;
    for i in 0..problem.m() {
        let truth = problem.true_local_gradient(i, x.node(i));
        estimator_err += l2_dist_sq(v.node(i), &truth);
    }
    let y_consensus = y.spread_sq(&y_bar);
    let x_bar = x.mean();
    let f_bar = problem.global_loss(&x_bar);
    let potential_h = f_bar + x.spread_sq(&x_bar) / m + alpha * y_consensus / m;
    (
        DiagnosticRow {
            tracking_err,
            estimator_err,
            potential_h,
            y_consensus,
        },
        f_bar,
    )
}

/// One-pass computation of all per-row diagnostics.
pub fn snapshot(problem: &Problem, x: &Stacked, y: &Stacked, v: &Stacked, alpha: f64) -> Snapshot {
    let avg_grad = problem.global_average_gradient(x);
    let stationarity = stationarity_from(problem, x, &avg_grad);
    let (row, f_bar) = diagnostic_row_from(problem, x, y, v, alpha, &avg_grad);
    let ybar_norm_sq = l2_norm_sq(&y.mean());
    Snapshot {
        stationarity,
        row,
        f_bar,
        ybar_norm_sq,
    }
}

/// Monte-Carlo check of the refresh-estimator variance bound
/// `E || v - grad f(x) ||^2 <= m sigma^2 / s1`.
#[derive(Debug, Clone, Copy)]
pub struct VarianceCheck {
    pub mean_sq_err: f64,
    pub bound: f64,
    pub trials: usize,
    pub pass: bool,
}

/// Draws `trials` independent refreshes of size `s1` at fixed `x` and
/// compares the mean squared error against the bound with Monte-Carlo
/// slack `1 + 5/sqrt(trials) + 0.05`.
pub fn variance_bound_check(
    problem: &OnlineProblem,
    x: &Stacked,
    s1: usize,
    trials: usize,
    seed: u64,
) -> VarianceCheck {
    assert!(trials >= 1_000, "variance check needs at least 1e3 trials");
    assert!(s1 >= 1);
    let m = problem.m();
    let truths: Vec<Vec<f64>> = (0..m)
        .map(|i| problem.true_local_gradient(i, x.node(i)))
        .collect();
    let mut total = 0.0;
    for trial in 0..trials {
        let mut err = 0.0;
        for (i, truth) in truths.iter().enumerate() {
            let mut rng = keyed_rng(seed, StreamDomain::Sampling, i as u64, trial as u64);
            let v = problem.draw_mean_gradient(i, x.node(i), s1, &mut rng);
            err += l2_dist_sq(&v, truth);
        }
        total += err;
    }
    let mean_sq_err = total / trials as f64;
    let bound = m as f64 * problem.sigma2() / s1 as f64;
    let slack = 1.0 + 5.0 / (trials as f64).sqrt() + 0.05;
    VarianceCheck {
        mean_sq_err,
        bound,
        trials,
        pass: mean_sq_err <= bound * slack,
    }
}

/// Outcome of the potential-descent check.
#[derive(Debug, Clone, PartialEq)]
pub enum DescentCheck {
    /// One of `C1..C3` is nonpositive; the inequality gives no guarantee.
    ConstantsInvalid,
    /// Fewer than two rows: nothing to verify.
    Vacuous,
    /// The trace skips iterations; the cumulative sums cannot be formed.
    NeedsDenseTrace,
    Holds {
        iterations: usize,
        /// Largest value of `lhs - rhs` seen (negative when comfortably
        /// satisfied).
        max_margin: f64,
    },
    ViolatedAt {
        iter: usize,
        lhs: f64,
        rhs: f64,
    },
}

/// Verifies the per-iteration descent of the potential
/// `H = f(x_bar) + (1/m)||x - 1 x_bar||^2 + (alpha/m)||y - 1 y_bar||^2`:
///
/// `H(r+1) - H(0) <= -C1 sum ||y_bar||^2 - C2 sum (1/m)||x - 1 x_bar||^2
///                   - C3 sum (1/m)||y - 1 y_bar||^2 + slack`
///
/// with per-iteration slack `1e-6 * (1 + |H(0)|)`. Requires a dense trace.
/// Pass `None` when the stepsize is outside the guaranteed range (the
/// constants do not exist there) to get the skipped status.
pub fn potential_descent_check(
    trace: &RunTrace,
    constants: Option<&PotentialConstants>,
) -> DescentCheck {
    let Some(constants) = constants else {
        return DescentCheck::ConstantsInvalid;
    };
    if !(constants.c1 > 0.0 && constants.c2 > 0.0 && constants.c3 > 0.0) {
        return DescentCheck::ConstantsInvalid;
    }
    if trace.diag_every != 1 {
        return DescentCheck::NeedsDenseTrace;
    }
    if trace.rows.len() < 2 {
        return DescentCheck::Vacuous;
    }
    let m = trace.m as f64;
    let h0 = trace.rows[0].potential_h;
    let slack_unit = 1e-6 * (1.0 + h0.abs());
    let mut sum_ybar = 0.0;
    let mut sum_x_consensus = 0.0;
    let mut sum_y_consensus = 0.0;
    let mut max_margin = f64::NEG_INFINITY;
    for k in 0..trace.rows.len() - 1 {
        let row = &trace.rows[k];
        sum_ybar += row.ybar_norm_sq;
        // consensus_term already carries its 1/m factor; y_consensus is raw
        sum_x_consensus += row.consensus_term;
        sum_y_consensus += row.y_consensus / m;
        let lhs = trace.rows[k + 1].potential_h - h0;
        let rhs = -constants.c1 * sum_ybar
            - constants.c2 * sum_x_consensus
            - constants.c3 * sum_y_consensus
            + (k + 1) as f64 * slack_unit;
        max_margin = max_margin.max(lhs - rhs);
        if lhs > rhs {
            return DescentCheck::ViolatedAt {
                iter: trace.rows[k + 1].r,
                lhs,
                rhs,
            };
        }
    }
    DescentCheck::Holds {
        iterations: trace.rows.len() - 1,
        max_margin,
    }
}
