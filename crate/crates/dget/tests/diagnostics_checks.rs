//! Monte-Carlo variance checks and the potential-descent verifier.

use dget::diagnostics::{potential_descent_check, variance_bound_check, DescentCheck};
use dget::engine::{run_dget, Algorithm, AlgorithmConfig, Mode};
use dget::problems::{FiniteSumProblem, OnlineProblem, Problem, ProblemKind};
use dget::stacked::Stacked;
use dget::theory::{choose_beta, finite_sum_batch_plan, potential_constants, theorem1_stepsize};
use dget::topology::{metropolis_weights, Graph};

fn online_quadratic(m: usize, d: usize, sigma2: f64, seed: u64) -> OnlineProblem {
    OnlineProblem::new(ProblemKind::ShiftedQuadratic, m, d, seed, 0.0, sigma2).unwrap()
}

#[test]
fn refresh_variance_respects_the_bound() {
    let problem = online_quadratic(4, 6, 1.5, 3);
    let x = Stacked::constant(4, 6, 0.3);
    let check = variance_bound_check(&problem, &x, 1, 10_000, 11);
    assert!(
        check.pass,
        "mean {} vs bound {}",
        check.mean_sq_err, check.bound
    );
    // s1 = 1 draws have mean squared error close to m * sigma2
    assert!(check.mean_sq_err >= check.bound * 0.9);
}

#[test]
fn zero_variance_draws_are_exact() {
    let problem = online_quadratic(3, 4, 0.0, 5);
    let x = Stacked::constant(3, 4, -0.2);
    let check = variance_bound_check(&problem, &x, 2, 1_000, 1);
    assert_eq!(check.mean_sq_err, 0.0);
    assert!(check.pass);
}

#[test]
fn doubling_the_refresh_batch_halves_the_error() {
    let problem = online_quadratic(4, 5, 2.0, 7);
    let x = Stacked::constant(4, 5, 0.1);
    let small = variance_bound_check(&problem, &x, 4, 10_000, 21);
    let large = variance_bound_check(&problem, &x, 8, 10_000, 22);
    let ratio = large.mean_sq_err / small.mean_sq_err;
    assert!((ratio - 0.5).abs() <= 0.075, "ratio {ratio}");
}

fn quadratic_descent_trace(horizon: usize) -> (dget::trace::RunTrace, f64, f64, f64) {
    let m = 8;
    let problem = Problem::FiniteSum(
        FiniteSumProblem::new(ProblemKind::ShiftedQuadratic, m, 64, 5, 31, 0.0).unwrap(),
    );
    let w = metropolis_weights(&Graph::ring(m).unwrap());
    let beta = choose_beta(w.eta()).unwrap();
    let plan = theorem1_stepsize(problem.lipschitz(), w.eta(), beta, 0.5).unwrap();
    let (q, s2) = finite_sum_batch_plan(64);
    let mut config = AlgorithmConfig::new(Algorithm::Dget, Mode::FiniteSum, plan.alpha, horizon);
    config.q = q;
    config.s2 = s2;
    config.seed = 4;
    let trace = run_dget(&problem, &w, &config).unwrap();
    (trace, plan.alpha, beta, w.eta())
}

#[test]
fn potential_descends_on_the_exact_estimator_instance() {
    let (trace, alpha, beta, eta) = quadratic_descent_trace(400);
    let constants = potential_constants(alpha, 1.0, beta, eta, 8).unwrap();
    match potential_descent_check(&trace, Some(&constants)) {
        DescentCheck::Holds {
            iterations,
            max_margin,
        } => {
            assert_eq!(iterations, 400);
            assert!(max_margin <= 0.0, "margin {max_margin}");
        }
        other => panic!("expected descent to hold, got {other:?}"),
    }
}

#[test]
fn oversized_stepsizes_skip_the_check() {
    let (trace, _, beta, eta) = quadratic_descent_trace(10);
    let constants = potential_constants(10.0, 1.0, beta, eta, 8).ok();
    assert!(constants.is_none());
    assert_eq!(
        potential_descent_check(&trace, constants.as_ref()),
        DescentCheck::ConstantsInvalid
    );
}

#[test]
fn zero_horizon_checks_are_vacuous() {
    let (trace, alpha, beta, eta) = quadratic_descent_trace(0);
    let constants = potential_constants(alpha, 1.0, beta, eta, 8).unwrap();
    assert_eq!(
        potential_descent_check(&trace, Some(&constants)),
        DescentCheck::Vacuous
    );
}

#[test]
fn thinned_traces_are_rejected() {
    let m = 4;
    let problem = Problem::FiniteSum(
        FiniteSumProblem::new(ProblemKind::ShiftedQuadratic, m, 16, 3, 31, 0.0).unwrap(),
    );
    let w = metropolis_weights(&Graph::ring(m).unwrap());
    let beta = choose_beta(w.eta()).unwrap();
    let plan = theorem1_stepsize(1.0, w.eta(), beta, 0.5).unwrap();
    let mut config = AlgorithmConfig::new(Algorithm::Dget, Mode::FiniteSum, plan.alpha, 50);
    config.q = 4;
    config.s2 = 4;
    config.diag_every = 5;
    let trace = run_dget(&problem, &w, &config).unwrap();
    let constants = potential_constants(plan.alpha, 1.0, beta, w.eta(), m).unwrap();
    assert_eq!(
        potential_descent_check(&trace, Some(&constants)),
        DescentCheck::NeedsDenseTrace
    );
}
