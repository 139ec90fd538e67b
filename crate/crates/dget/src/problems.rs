//! Synthetic objectives with exact gradients and oracle accounting.
//!
//! Two problem families are built in:
//!
//! - `shifted-quadratic`: per-sample loss `0.5 * ||x - a_ij||^2`. Gradients
//!   are linear, so the recursive estimator is exact and the global
//!   minimizer (the mean of all targets) is known in closed form. `L = 1`.
//! - `nonconvex-logistic`: per-sample loss
//!   `log(1 + exp(-y_ij <z_ij, x>)) + lambda * sum_k x_k^2 / (1 + x_k^2)`,
//!   a genuinely non-convex objective with the analytic bound
//!   `L = max ||z_ij||^2 / 4 + 2 lambda`.
//!
//! Counting contract: every access to a single sample's gradient costs one
//! oracle unit, a local full gradient costs `n`. The recursive estimator
//! evaluates each drawn sample at two points; that is charged as one sample
//! access, with raw gradient evaluations tracked separately. Diagnostic
//! oracles (true gradients, losses) never touch the counter.
//!
//! All data is regenerated from the seed; nothing is read from disk. Online
//! draws realize the node distribution as the true gradient field plus
//! Gaussian noise with variance `sigma^2 / d` per coordinate, so draws are
//! unbiased with per-draw variance exactly `sigma^2`.

use crate::stacked::Stacked;
use crate::stream::{keyed_rng, StreamDomain};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem kind `{0}` (expected `shifted-quadratic` or `nonconvex-logistic`)")]
    UnknownKind(String),
    #[error("{what} must be positive, got 0")]
    NonpositiveSize { what: &'static str },
    #[error("{what} must be nonnegative, got {value}")]
    NegativeParameter { what: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    ShiftedQuadratic,
    NonconvexLogistic,
}

impl FromStr for ProblemKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shifted-quadratic" => Ok(ProblemKind::ShiftedQuadratic),
            "nonconvex-logistic" => Ok(ProblemKind::NonconvexLogistic),
            other => Err(ProblemError::UnknownKind(other.to_string())),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::ShiftedQuadratic => "shifted-quadratic",
            ProblemKind::NonconvexLogistic => "nonconvex-logistic",
        })
    }
}

/// Network-wide count of sample-gradient accesses.
///
/// `total` follows the one-unit-per-sample-access convention used by the
/// complexity accounting; `grad_evals` counts raw gradient evaluations
/// (two per drawn sample in the recursive estimator) and is informational.
#[derive(Debug, Default)]
pub struct IfoCounter {
    samples: AtomicU64,
    grad_evals: AtomicU64,
}

impl IfoCounter {
    pub fn total(&self) -> u64 {
        self.samples.load(Ordering::Relaxed)
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals.load(Ordering::Relaxed)
    }

    fn charge(&self, samples: u64, evals: u64) {
        self.samples.fetch_add(samples, Ordering::Relaxed);
        self.grad_evals.fetch_add(evals, Ordering::Relaxed);
    }
}

/// `log(1 + exp(u))` without overflow.
fn ln_1p_exp(u: f64) -> f64 {
    if u > 35.0 {
        u
    } else if u < -35.0 {
        u.exp()
    } else {
        u.exp().ln_1p()
    }
}

fn logistic_sample_gradient(z: &[f64], y: f64, lambda: f64, x: &[f64], out: &mut [f64]) {
    let margin: f64 = y * z.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    // d/dx log(1 + exp(-y<z,x>)) = -y z / (1 + exp(y<z,x>))
    let scale = -y / (1.0 + margin.exp());
    for ((o, &zk), &xk) in out.iter_mut().zip(z).zip(x) {
        let denom = 1.0 + xk * xk;
        *o = scale * zk + lambda * 2.0 * xk / (denom * denom);
    }
}

fn logistic_sample_loss(z: &[f64], y: f64, lambda: f64, x: &[f64]) -> f64 {
    let margin: f64 = y * z.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let reg: f64 = x.iter().map(|&xk| xk * xk / (1.0 + xk * xk)).sum();
    ln_1p_exp(-margin) + lambda * reg
}

fn quadratic_sample_gradient(a: &[f64], x: &[f64], out: &mut [f64]) {
    for ((o, &ak), &xk) in out.iter_mut().zip(a).zip(x) {
        *o = xk - ak;
    }
}

fn quadratic_sample_loss(a: &[f64], x: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .zip(a)
        .map(|(&xk, &ak)| (xk - ak) * (xk - ak))
        .sum::<f64>()
}

#[derive(Debug, Clone)]
enum FiniteSumData {
    /// Per-(node, sample) shift targets `a_ij`, flattened `[i][j][coord]`.
    Quadratic { targets: Vec<f64> },
    /// Per-(node, sample) features `z_ij` (flattened) and labels `y_ij`.
    Logistic {
        features: Vec<f64>,
        labels: Vec<f64>,
    },
}

/// Finite-sum objective: node `i` averages `n` stored samples.
#[derive(Debug)]
pub struct FiniteSumProblem {
    kind: ProblemKind,
    m: usize,
    n: usize,
    d: usize,
    lambda: f64,
    data: FiniteSumData,
    lipschitz: f64,
    f_lower: f64,
    counter: IfoCounter,
}

impl FiniteSumProblem {
    pub fn new(
        kind: ProblemKind,
        m: usize,
        n: usize,
        d: usize,
        seed: u64,
        lambda: f64,
    ) -> Result<Self, ProblemError> {
        check_positive(m, "node count m")?;
        check_positive(n, "samples per node n")?;
        check_positive(d, "dimension d")?;
        check_nonneg(lambda, "regularizer weight lambda")?;
        let problem = match kind {
            ProblemKind::ShiftedQuadratic => {
                let mut targets = vec![0.0; m * n * d];
                for i in 0..m {
                    let mut rng = keyed_rng(seed, StreamDomain::Data, i as u64, 0);
                    for v in &mut targets[i * n * d..(i + 1) * n * d] {
                        *v = StandardNormal.sample(&mut rng);
                    }
                }
                FiniteSumProblem {
                    kind,
                    m,
                    n,
                    d,
                    lambda,
                    data: FiniteSumData::Quadratic { targets },
                    lipschitz: 1.0,
                    f_lower: 0.0,
                    counter: IfoCounter::default(),
                }
            }
            ProblemKind::NonconvexLogistic => {
                let mut features = vec![0.0; m * n * d];
                let mut labels = vec![0.0; m * n];
                let feature_scale = 1.0 / (d as f64).sqrt();
                for i in 0..m {
                    let mut rng = keyed_rng(seed, StreamDomain::Data, i as u64, 0);
                    for v in &mut features[i * n * d..(i + 1) * n * d] {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        *v = g * feature_scale;
                    }
                    // labels follow a hidden separator (the first feature
                    // coordinate): the data term drives a slow
                    // margin-growing tail instead of a strongly convex one
                    for (s, l) in labels[i * n..(i + 1) * n].iter_mut().enumerate() {
                        let z0 = features[(i * n + s) * d];
                        *l = if z0 >= 0.0 { 1.0 } else { -1.0 };
                    }
                }
                let max_feature_sq = (0..m * n)
                    .map(|s| {
                        features[s * d..(s + 1) * d]
                            .iter()
                            .map(|v| v * v)
                            .sum::<f64>()
                    })
                    .fold(0.0f64, f64::max);
                FiniteSumProblem {
                    kind,
                    m,
                    n,
                    d,
                    lambda,
                    data: FiniteSumData::Logistic { features, labels },
                    lipschitz: 0.25 * max_feature_sq + 2.0 * lambda,
                    f_lower: 0.0,
                    counter: IfoCounter::default(),
                }
            }
        };
        Ok(problem)
    }

    /// Shifted-quadratic instance with caller-supplied targets, flattened
    /// `[node][sample][coord]`. Useful for closed-form fixtures.
    pub fn with_quadratic_targets(
        m: usize,
        n: usize,
        d: usize,
        targets: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        check_positive(m, "node count m")?;
        check_positive(n, "samples per node n")?;
        check_positive(d, "dimension d")?;
        assert_eq!(targets.len(), m * n * d, "targets length must equal m*n*d");
        Ok(FiniteSumProblem {
            kind: ProblemKind::ShiftedQuadratic,
            m,
            n,
            d,
            lambda: 0.0,
            data: FiniteSumData::Quadratic { targets },
            lipschitz: 1.0,
            f_lower: 0.0,
            counter: IfoCounter::default(),
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn f_lower(&self) -> f64 {
        self.f_lower
    }

    pub fn counter(&self) -> &IfoCounter {
        &self.counter
    }

    fn check_indices(&self, i: usize, j: usize) {
        assert!(
            i < self.m,
            "node index {i} out of range for {} nodes",
            self.m
        );
        assert!(
            j < self.n,
            "sample index {j} out of range for {} samples",
            self.n
        );
    }

    fn sample_gradient_into(&self, i: usize, j: usize, x: &[f64], out: &mut [f64]) {
        match &self.data {
            FiniteSumData::Quadratic { targets } => {
                let a = &targets[(i * self.n + j) * self.d..(i * self.n + j + 1) * self.d];
                quadratic_sample_gradient(a, x, out);
            }
            FiniteSumData::Logistic { features, labels } => {
                let z = &features[(i * self.n + j) * self.d..(i * self.n + j + 1) * self.d];
                logistic_sample_gradient(z, labels[i * self.n + j], self.lambda, x, out);
            }
        }
    }

    /// Gradient of sample `j` at node `i`. Charges one oracle unit.
    pub fn sample_gradient(&self, i: usize, j: usize, x: &[f64]) -> Vec<f64> {
        self.check_indices(i, j);
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        let mut out = vec![0.0; self.d];
        self.sample_gradient_into(i, j, x, &mut out);
        self.counter.charge(1, 1);
        out
    }

    /// Loss of sample `j` at node `i` (diagnostic; uncounted).
    pub fn sample_loss(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        self.check_indices(i, j);
        match &self.data {
            FiniteSumData::Quadratic { targets } => {
                let a = &targets[(i * self.n + j) * self.d..(i * self.n + j + 1) * self.d];
                quadratic_sample_loss(a, x)
            }
            FiniteSumData::Logistic { features, labels } => {
                let z = &features[(i * self.n + j) * self.d..(i * self.n + j + 1) * self.d];
                logistic_sample_loss(z, labels[i * self.n + j], self.lambda, x)
            }
        }
    }

    /// Exact local gradient `(1/n) sum_j grad f_j^i(x)`. Charges `n` units.
    pub fn local_full_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let out = self.local_gradient_uncounted(i, x);
        self.counter.charge(self.n as u64, self.n as u64);
        out
    }

    /// Mean gradient over an explicit index multiset. Charges `idxs.len()`.
    pub fn minibatch_mean_gradient(&self, i: usize, idxs: &[usize], x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        let mut g = vec![0.0; self.d];
        for &j in idxs {
            self.check_indices(i, j);
            self.sample_gradient_into(i, j, x, &mut g);
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
        }
        let inv = 1.0 / idxs.len() as f64;
        for a in &mut acc {
            *a *= inv;
        }
        self.counter.charge(idxs.len() as u64, idxs.len() as u64);
        acc
    }

    /// Mean of per-sample gradient differences between two points, the
    /// recursive-estimator increment. Each drawn sample is touched at both
    /// points: charged as one sample access, two gradient evaluations.
    pub fn minibatch_mean_gradient_diff(
        &self,
        i: usize,
        idxs: &[usize],
        x_new: &[f64],
        x_old: &[f64],
    ) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        let mut g_new = vec![0.0; self.d];
        let mut g_old = vec![0.0; self.d];
        for &j in idxs {
            self.check_indices(i, j);
            self.sample_gradient_into(i, j, x_new, &mut g_new);
            self.sample_gradient_into(i, j, x_old, &mut g_old);
            for ((a, n), o) in acc.iter_mut().zip(&g_new).zip(&g_old) {
                *a += n - o;
            }
        }
        let inv = 1.0 / idxs.len() as f64;
        for a in &mut acc {
            *a *= inv;
        }
        self.counter
            .charge(idxs.len() as u64, 2 * idxs.len() as u64);
        acc
    }

    /// True local gradient (diagnostic; uncounted).
    pub fn true_local_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.local_gradient_uncounted(i, x)
    }

    fn local_gradient_uncounted(&self, i: usize, x: &[f64]) -> Vec<f64> {
        assert!(
            i < self.m,
            "node index {i} out of range for {} nodes",
            self.m
        );
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        let mut acc = vec![0.0; self.d];
        let mut g = vec![0.0; self.d];
        for j in 0..self.n {
            self.sample_gradient_into(i, j, x, &mut g);
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
        }
        let inv = 1.0 / self.n as f64;
        for a in &mut acc {
            *a *= inv;
        }
        acc
    }

    /// Local objective value (diagnostic; uncounted).
    pub fn local_loss(&self, i: usize, x: &[f64]) -> f64 {
        (0..self.n).map(|j| self.sample_loss(i, j, x)).sum::<f64>() / self.n as f64
    }

    /// Global minimizer when it is known in closed form (shifted-quadratic:
    /// the mean of all targets).
    pub fn minimizer(&self) -> Option<Vec<f64>> {
        match &self.data {
            FiniteSumData::Quadratic { targets } => {
                let mut mean = vec![0.0; self.d];
                for s in 0..self.m * self.n {
                    for c in 0..self.d {
                        mean[c] += targets[s * self.d + c];
                    }
                }
                let inv = 1.0 / (self.m * self.n) as f64;
                for v in &mut mean {
                    *v *= inv;
                }
                Some(mean)
            }
            FiniteSumData::Logistic { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
enum OnlineData {
    /// Per-node quadratic centers `b_i`.
    Quadratic { centers: Vec<f64> },
    /// Per-node feature/label prototypes.
    Logistic {
        features: Vec<f64>,
        labels: Vec<f64>,
    },
}

/// Online objective: node `i` samples unbiased noisy gradients of a known
/// mean field, with per-draw variance exactly `sigma^2`.
#[derive(Debug)]
pub struct OnlineProblem {
    kind: ProblemKind,
    m: usize,
    d: usize,
    lambda: f64,
    sigma2: f64,
    data: OnlineData,
    lipschitz: f64,
    f_lower: f64,
    counter: IfoCounter,
}

impl OnlineProblem {
    pub fn new(
        kind: ProblemKind,
        m: usize,
        d: usize,
        seed: u64,
        lambda: f64,
        sigma2: f64,
    ) -> Result<Self, ProblemError> {
        check_positive(m, "node count m")?;
        check_positive(d, "dimension d")?;
        check_nonneg(lambda, "regularizer weight lambda")?;
        check_nonneg(sigma2, "variance bound sigma2")?;
        let problem = match kind {
            ProblemKind::ShiftedQuadratic => {
                let mut centers = vec![0.0; m * d];
                for i in 0..m {
                    let mut rng = keyed_rng(seed, StreamDomain::Data, i as u64, 0);
                    for v in &mut centers[i * d..(i + 1) * d] {
                        *v = StandardNormal.sample(&mut rng);
                    }
                }
                OnlineProblem {
                    kind,
                    m,
                    d,
                    lambda,
                    sigma2,
                    data: OnlineData::Quadratic { centers },
                    lipschitz: 1.0,
                    f_lower: 0.0,
                    counter: IfoCounter::default(),
                }
            }
            ProblemKind::NonconvexLogistic => {
                let mut features = vec![0.0; m * d];
                let mut labels = vec![0.0; m];
                let feature_scale = 1.0 / (d as f64).sqrt();
                for i in 0..m {
                    let mut rng = keyed_rng(seed, StreamDomain::Data, i as u64, 0);
                    for v in &mut features[i * d..(i + 1) * d] {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        *v = g * feature_scale;
                    }
                    labels[i] = if features[i * d] >= 0.0 { 1.0 } else { -1.0 };
                }
                let max_feature_sq = (0..m)
                    .map(|i| {
                        features[i * d..(i + 1) * d]
                            .iter()
                            .map(|v| v * v)
                            .sum::<f64>()
                    })
                    .fold(0.0f64, f64::max);
                OnlineProblem {
                    kind,
                    m,
                    d,
                    lambda,
                    sigma2,
                    data: OnlineData::Logistic { features, labels },
                    lipschitz: 0.25 * max_feature_sq + 2.0 * lambda,
                    f_lower: 0.0,
                    counter: IfoCounter::default(),
                }
            }
        };
        Ok(problem)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn f_lower(&self) -> f64 {
        self.f_lower
    }

    pub fn counter(&self) -> &IfoCounter {
        &self.counter
    }

    fn true_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        assert!(
            i < self.m,
            "node index {i} out of range for {} nodes",
            self.m
        );
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        match &self.data {
            OnlineData::Quadratic { centers } => {
                quadratic_sample_gradient(&centers[i * self.d..(i + 1) * self.d], x, out);
            }
            OnlineData::Logistic { features, labels } => {
                let z = &features[i * self.d..(i + 1) * self.d];
                logistic_sample_gradient(z, labels[i], self.lambda, x, out);
            }
        }
    }

    fn noise_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let sd = (self.sigma2 / self.d as f64).sqrt();
        for v in out {
            let g: f64 = StandardNormal.sample(rng);
            *v = g * sd;
        }
    }

    /// One i.i.d. stochastic gradient at `x`. Charges one oracle unit.
    pub fn draw_gradient(&self, i: usize, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.true_gradient_into(i, x, &mut out);
        let mut noise = vec![0.0; self.d];
        self.noise_into(rng, &mut noise);
        for (o, n) in out.iter_mut().zip(&noise) {
            *o += n;
        }
        self.counter.charge(1, 1);
        out
    }

    /// Mean of `s1` i.i.d. draws at `x` (the estimator refresh). Charges
    /// `s1` units.
    pub fn draw_mean_gradient(
        &self,
        i: usize,
        x: &[f64],
        s1: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        assert!(s1 > 0, "refresh batch must be positive");
        let mut truth = vec![0.0; self.d];
        self.true_gradient_into(i, x, &mut truth);
        let mut acc = vec![0.0; self.d];
        let mut noise = vec![0.0; self.d];
        for _ in 0..s1 {
            self.noise_into(rng, &mut noise);
            for ((a, &t), n) in acc.iter_mut().zip(&truth).zip(&noise) {
                *a += t + n;
            }
        }
        let inv = 1.0 / s1 as f64;
        for a in &mut acc {
            *a *= inv;
        }
        self.counter.charge(s1 as u64, s1 as u64);
        acc
    }

    /// Mean over `s2` draws of the same sample evaluated at two points,
    /// the recursive-estimator increment. The additive noise of a draw is
    /// shared between the two points, as the same sample function is
    /// differentiated at both. Charged as `s2` sample accesses and `2*s2`
    /// gradient evaluations.
    pub fn draw_mean_gradient_diff(
        &self,
        i: usize,
        x_new: &[f64],
        x_old: &[f64],
        s2: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        assert!(s2 > 0, "inner batch must be positive");
        let mut g_new = vec![0.0; self.d];
        let mut g_old = vec![0.0; self.d];
        self.true_gradient_into(i, x_new, &mut g_new);
        self.true_gradient_into(i, x_old, &mut g_old);
        let mut acc = vec![0.0; self.d];
        let mut noise = vec![0.0; self.d];
        for _ in 0..s2 {
            self.noise_into(rng, &mut noise);
            for (((a, &gn), &go), &nz) in acc.iter_mut().zip(&g_new).zip(&g_old).zip(&noise) {
                *a += (gn + nz) - (go + nz);
            }
        }
        let inv = 1.0 / s2 as f64;
        for a in &mut acc {
            *a *= inv;
        }
        self.counter.charge(s2 as u64, 2 * s2 as u64);
        acc
    }

    /// True local gradient of the mean field (diagnostic; uncounted).
    pub fn true_local_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.true_gradient_into(i, x, &mut out);
        out
    }

    /// Local objective value (diagnostic; uncounted).
    pub fn local_loss(&self, i: usize, x: &[f64]) -> f64 {
        match &self.data {
            OnlineData::Quadratic { centers } => {
                quadratic_sample_loss(&centers[i * self.d..(i + 1) * self.d], x)
            }
            OnlineData::Logistic { features, labels } => {
                let z = &features[i * self.d..(i + 1) * self.d];
                logistic_sample_loss(z, labels[i], self.lambda, x)
            }
        }
    }
}

/// A finite-sum or online objective behind one dispatching surface.
#[derive(Debug)]
pub enum Problem {
    FiniteSum(FiniteSumProblem),
    Online(OnlineProblem),
}

impl Problem {
    pub fn m(&self) -> usize {
        match self {
            Problem::FiniteSum(p) => p.m(),
            Problem::Online(p) => p.m(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Problem::FiniteSum(p) => p.d(),
            Problem::Online(p) => p.d(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Problem::FiniteSum(p) => p.lipschitz(),
            Problem::Online(p) => p.lipschitz(),
        }
    }

    pub fn f_lower(&self) -> f64 {
        match self {
            Problem::FiniteSum(p) => p.f_lower(),
            Problem::Online(p) => p.f_lower(),
        }
    }

    pub fn counter(&self) -> &IfoCounter {
        match self {
            Problem::FiniteSum(p) => p.counter(),
            Problem::Online(p) => p.counter(),
        }
    }

    pub fn true_local_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        match self {
            Problem::FiniteSum(p) => p.true_local_gradient(i, x),
            Problem::Online(p) => p.true_local_gradient(i, x),
        }
    }

    pub fn local_loss(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            Problem::FiniteSum(p) => p.local_loss(i, x),
            Problem::Online(p) => p.local_loss(i, x),
        }
    }

    /// `(1/m) sum_i grad f^i(x_i)` over stacked iterates (diagnostic;
    /// uncounted, so counted complexity stays honest).
    pub fn global_average_gradient(&self, x: &Stacked) -> Vec<f64> {
        assert_eq!(x.m(), self.m(), "node count mismatch");
        assert_eq!(x.d(), self.d(), "dimension mismatch");
        let mut acc = vec![0.0; self.d()];
        for i in 0..self.m() {
            let g = self.true_local_gradient(i, x.node(i));
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
        }
        let inv = 1.0 / self.m() as f64;
        for a in &mut acc {
            *a *= inv;
        }
        acc
    }

    /// `f(point) = (1/m) sum_i f^i(point)` (diagnostic; uncounted).
    pub fn global_loss(&self, point: &[f64]) -> f64 {
        (0..self.m())
            .map(|i| self.local_loss(i, point))
            .sum::<f64>()
            / self.m() as f64
    }
}

fn check_positive(v: usize, what: &'static str) -> Result<(), ProblemError> {
    if v == 0 {
        Err(ProblemError::NonpositiveSize { what })
    } else {
        Ok(())
    }
}

fn check_nonneg(v: f64, what: &'static str) -> Result<(), ProblemError> {
    if v < 0.0 || !v.is_finite() {
        Err(ProblemError::NegativeParameter { what, value: v })
    } else {
        Ok(())
    }
}
