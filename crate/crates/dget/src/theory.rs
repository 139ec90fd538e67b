//! Stepsize rules, potential-function constants, batch plans, and
//! closed-form sample/communication predictions.
//!
//! The `theorem1` stepsize rule produces three candidates `K1, K2, K3`,
//! each the largest stepsize keeping one of the potential-descent
//! constants `C1, C2, C3` positive, and takes `alpha = safety * min(K)`.
//! At `safety = 1` the binding constant is exactly zero, which degenerates
//! the complexity constant `C0`; the default safety factor is 0.5.

use crate::engine::Algorithm;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("eta must lie in [0, 1), got {0}")]
    EtaOutOfRange(f64),
    #[error("(1 + beta) * eta^2 must be < 1, got beta = {beta}, eta = {eta}")]
    BetaConstraintViolated { beta: f64, eta: f64 },
    #[error("Lipschitz constant must be positive, got {0}")]
    NonpositiveLipschitz(f64),
    #[error("safety factor must lie in (0, 1], got {0}")]
    SafetyOutOfRange(f64),
    #[error(
        "stepsize too large for the descent guarantees: C1 = {c1}, C2 = {c2}, C3 = {c3} \
         (all must be positive)"
    )]
    StepsizeTooLarge { c1: f64, c2: f64, c3: f64 },
    #[error("target accuracy epsilon must be positive, got {0}")]
    NonpositiveEpsilon(f64),
}

/// Stepsize candidates and the chosen `alpha = safety * min(K1, K2, K3)`.
#[derive(Debug, Clone, Copy)]
pub struct StepsizePlan {
    pub beta: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub alpha: f64,
    pub safety: f64,
}

/// Constants of the per-iteration potential descent inequality.
#[derive(Debug, Clone, Copy)]
pub struct PotentialConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Default contraction trade-off constant: `(1 - eta^2) / (2 eta^2)`
/// clamped to `[1e-3, 10]`, with `beta = 1` for `eta = 0`.
///
/// The result always satisfies `(1 + beta) eta^2 <= (1 + eta^2) / 2 < 1`;
/// when the lower clamp would break that inequality (eta extremely close
/// to 1) the unclamped value wins.
pub fn choose_beta(eta: f64) -> Result<f64, TheoryError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(TheoryError::EtaOutOfRange(eta));
    }
    if eta == 0.0 {
        return Ok(1.0);
    }
    let formula = (1.0 - eta * eta) / (2.0 * eta * eta);
    let clamped = formula.clamp(1e-3, 10.0);
    if (1.0 + clamped) * eta * eta <= (1.0 + eta * eta) / 2.0 {
        Ok(clamped)
    } else {
        Ok(formula.min(10.0))
    }
}

/// Shared grouping for the `K2`/`C2` pieces so that `alpha = K2` makes
/// `C2` vanish exactly.
fn k2_parts(lipschitz: f64, eta: f64, beta: f64) -> (f64, f64) {
    let ll = lipschitz * lipschitz;
    let gap = 1.0 - (1.0 + beta) * eta * eta;
    let denom = 48.0 * (1.0 + 1.0 / beta) * ll + 9.0 * ll;
    (gap, denom)
}

fn validate_beta_eta(lipschitz: f64, eta: f64, beta: f64) -> Result<(), TheoryError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(TheoryError::EtaOutOfRange(eta));
    }
    if lipschitz <= 0.0 || !lipschitz.is_finite() {
        return Err(TheoryError::NonpositiveLipschitz(lipschitz));
    }
    if beta <= 0.0 || (1.0 + beta) * eta * eta >= 1.0 {
        return Err(TheoryError::BetaConstraintViolated { beta, eta });
    }
    Ok(())
}

/// The `theorem1` stepsize rule.
pub fn theorem1_stepsize(
    lipschitz: f64,
    eta: f64,
    beta: f64,
    safety: f64,
) -> Result<StepsizePlan, TheoryError> {
    validate_beta_eta(lipschitz, eta, beta)?;
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(TheoryError::SafetyOutOfRange(safety));
    }
    let l = lipschitz;
    let ll = l * l;
    let b = 1.0 + 1.0 / beta;
    let den18 = 48.0 * b * ll + 8.0 * ll;
    let k1 = (-l / 2.0 + ((l / 2.0) * (l / 2.0) + den18).sqrt()) / den18;
    let (gap, den29) = k2_parts(l, eta, beta);
    let k2 = gap / den29;
    let k3 = (-b + (b * b + 4.0 * gap * (24.0 * b + 4.0 * ll)).sqrt()) / den18;
    let alpha = safety * k1.min(k2).min(k3);
    Ok(StepsizePlan {
        beta,
        k1,
        k2,
        k3,
        alpha,
        safety,
    })
}

/// Potential-descent constants at a given stepsize.
///
/// Errors when any constant is nonpositive, i.e. the stepsize is outside
/// the guaranteed-descent range.
pub fn potential_constants(
    alpha: f64,
    lipschitz: f64,
    beta: f64,
    eta: f64,
    m: usize,
) -> Result<PotentialConstants, TheoryError> {
    validate_beta_eta(lipschitz, eta, beta)?;
    assert!(m > 0, "node count must be positive");
    assert!(alpha > 0.0, "alpha must be positive");
    let l = lipschitz;
    let ll = l * l;
    let a2 = alpha * alpha;
    let b = 1.0 + 1.0 / beta;
    let c1 = (0.5 - alpha * l / 2.0 - 4.0 * a2 * ll - 24.0 * b * a2 * ll) * alpha;
    // evaluated as (K2 - alpha) * denom so that alpha = K2 gives exactly 0
    let (gap, den29) = k2_parts(l, eta, beta);
    let c2 = (gap / den29 - alpha) * den29;
    let c3 = (gap - b * alpha - 24.0 * b * a2 * ll - 4.0 * a2 * ll) * alpha;
    if c1 <= 0.0 || c2 <= 0.0 || c3 <= 0.0 {
        return Err(TheoryError::StepsizeTooLarge { c1, c2, c3 });
    }
    let mf = m as f64;
    let c0 = (8.0 * a2 * ll + 2.0) / c1 + (16.0 * ll + 1.0) / (mf * c2) + 8.0 * a2 * ll / (mf * c3);
    Ok(PotentialConstants { c0, c1, c2, c3 })
}

/// Smallest `r` with `r*r >= n`.
pub fn ceil_sqrt(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt().round() as usize;
    while r * r >= n && r > 0 {
        r -= 1;
    }
    // r is now the largest value with r*r < n
    r + 1
}

/// Finite-sum batch plan: `q = |S2| = ceil(sqrt(n))`.
pub fn finite_sum_batch_plan(n: usize) -> (usize, usize) {
    let q = ceil_sqrt(n.max(1));
    (q, q)
}

/// Online batch plan: `|S1| = (4 C0 alpha (7 + 6/beta) sigma^2 + 8 sigma^2)
/// / epsilon` (at least 1), with `q = |S2| = ceil(sqrt(|S1|))`.
///
/// Returns `(s1, s2, q)`.
pub fn online_batch_plan(
    epsilon: f64,
    sigma2: f64,
    c0: f64,
    alpha: f64,
    beta: f64,
) -> Result<(usize, usize, usize), TheoryError> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(TheoryError::NonpositiveEpsilon(epsilon));
    }
    let raw = (4.0 * c0 * alpha * (7.0 + 6.0 / beta) * sigma2 + 8.0 * sigma2) / epsilon;
    let s1 = (raw.ceil() as usize).max(1);
    let s2 = ceil_sqrt(s1);
    Ok((s1, s2, s2))
}

/// Exact and loose sample-complexity predictions for a D-GET run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IfoPrediction {
    /// Exact total for this refresh schedule, including the initialization
    /// refresh at iteration 0.
    pub exact: u64,
    /// The loose closed-form bound `m * (ceil(T/q) * refresh + T * s2)`.
    pub upper_bound: u64,
}

/// Predicted oracle total after `t` iterations with refreshes at
/// `0, q, 2q, ...`. `refresh_size` is `n` in finite-sum mode and `|S1|`
/// in online mode.
pub fn predicted_ifo(
    t: usize,
    q: usize,
    refresh_size: usize,
    s2: usize,
    m: usize,
) -> IfoPrediction {
    assert!(q >= 1, "loop period q must be at least 1");
    let (t64, q64) = (t as u64, q as u64);
    let (m64, refresh64, s264) = (m as u64, refresh_size as u64, s2 as u64);
    let refreshes = t64 / q64 + 1;
    let inner = t64 - t64 / q64;
    let exact = refreshes * m64 * refresh64 + inner * m64 * s264;
    let upper_bound = m64 * (t64.div_ceil(q64) * refresh64 + t64 * s264);
    // the initialization refresh is the only part the loose bound omits
    assert!(exact <= upper_bound + m64 * refresh64);
    IfoPrediction { exact, upper_bound }
}

/// Communication rounds after `t` iterations: trackers broadcast both `x`
/// and `y` (two rounds per iteration), plain descent broadcasts only `x`.
pub fn predicted_comm_rounds(t: usize, algorithm: Algorithm) -> u64 {
    match algorithm {
        Algorithm::Dget | Algorithm::Gnsd => 2 * t as u64,
        Algorithm::Dgd | Algorithm::Dsgd => t as u64,
    }
}
