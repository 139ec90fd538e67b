//! Communication graphs and mixing matrices.
//!
//! A mixing matrix `W` is symmetric, has unit row sums, and is supported on
//! the edges of a connected undirected graph (plus the diagonal). Its
//! contraction factor `eta` is the largest eigenvalue magnitude on the
//! subspace orthogonal to the all-ones vector; consensus requires `eta < 1`.
//!
//! Three standard weight recipes are provided: Metropolis-Hastings,
//! maximum-degree, and Laplacian weights. Maximum-degree weights can fail
//! the contraction requirement on bipartite regular graphs (e.g. even
//! rings), which surfaces as [`TopologyError::SpectralGapViolation`].

use crate::stacked::Stacked;
use crate::stream::{keyed_rng, StreamDomain};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

/// Symmetry tolerance accepted by [`spectral_eta`] and matrix validation.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Row-sum tolerance accepted by [`spectral_eta`] and matrix validation.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Matrices with `eta >= 1 - ETA_MARGIN` are treated as non-contracting;
/// the eigensolver resolves a true eigenvalue of 1 only to within a few ulps.
pub const ETA_MARGIN: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge endpoint {node} out of range for {m} nodes")]
    EndpointOutOfRange { node: usize, m: usize },
    #[error("graph is disconnected: node {unreached} is not reachable from node 0")]
    Disconnected { unreached: usize },
    #[error("{fixture} graph needs at least {min} nodes, got {got}")]
    FixtureTooSmall {
        fixture: &'static str,
        min: usize,
        got: usize,
    },
    #[error("no connected draw found for edge probability {p} after {attempts} attempts")]
    RandomGraphDisconnected { p: f64, attempts: usize },
    #[error("mixing matrix violates the contraction requirement: eta = {eta}")]
    SpectralGapViolation { eta: f64 },
    #[error("matrix is not symmetric: max |w[i][k] - w[k][i]| = {max_dev:e}")]
    Asymmetric { max_dev: f64 },
    #[error("matrix rows do not sum to 1: max deviation {max_dev:e}")]
    NonStochastic { max_dev: f64 },
    #[error("matrix has {len} entries, expected {expected} for {m} nodes")]
    ShapeMismatch {
        len: usize,
        expected: usize,
        m: usize,
    },
    #[error("edge list parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Undirected, unweighted, connected communication graph on `m` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    m: usize,
    /// Normalized so that `i < k`, sorted, no duplicates.
    edges: Vec<(usize, usize)>,
}

/// Validates node count, endpoints, self-loops, duplicates, connectivity.
pub fn build_graph(m: usize, edges: &[(usize, usize)]) -> Result<Graph, TopologyError> {
    if m == 0 {
        return Err(TopologyError::EmptyGraph);
    }
    let mut normalized = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        if a == b {
            return Err(TopologyError::SelfLoop(a));
        }
        for node in [a, b] {
            if node >= m {
                return Err(TopologyError::EndpointOutOfRange { node, m });
            }
        }
        normalized.push((a.min(b), a.max(b)));
    }
    normalized.sort_unstable();
    if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
        return Err(TopologyError::DuplicateEdge(w[0].0, w[0].1));
    }
    let graph = Graph {
        m,
        edges: normalized,
    };
    graph.check_connected()?;
    Ok(graph)
}

impl Graph {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.m];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    fn check_connected(&self) -> Result<(), TopologyError> {
        let adj = self.adjacency_lists();
        let mut seen = vec![false; self.m];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(node) = queue.pop() {
            for &next in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    queue.push(next);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(unreached) => Err(TopologyError::Disconnected { unreached }),
            None => Ok(()),
        }
    }

    /// Cycle 0-1-...-(m-1)-0.
    pub fn ring(m: usize) -> Result<Graph, TopologyError> {
        if m < 3 {
            return Err(TopologyError::FixtureTooSmall {
                fixture: "ring",
                min: 3,
                got: m,
            });
        }
        let edges: Vec<_> = (0..m).map(|i| (i, (i + 1) % m)).collect();
        build_graph(m, &edges)
    }

    /// Chain 0-1-...-(m-1).
    pub fn path(m: usize) -> Result<Graph, TopologyError> {
        let edges: Vec<_> = (1..m).map(|i| (i - 1, i)).collect();
        build_graph(m, &edges)
    }

    /// Node 0 connected to every other node.
    pub fn star(m: usize) -> Result<Graph, TopologyError> {
        let edges: Vec<_> = (1..m).map(|i| (0, i)).collect();
        build_graph(m, &edges)
    }

    pub fn complete(m: usize) -> Result<Graph, TopologyError> {
        let mut edges = Vec::new();
        for i in 0..m {
            for k in i + 1..m {
                edges.push((i, k));
            }
        }
        build_graph(m, &edges)
    }

    /// Erdős–Rényi draw with edge probability `p`. Retries on derived seeds
    /// (deterministically) until a connected draw appears.
    pub fn erdos_renyi(m: usize, p: f64, seed: u64) -> Result<Graph, TopologyError> {
        assert!(
            (0.0..=1.0).contains(&p),
            "edge probability must be in [0, 1]"
        );
        const ATTEMPTS: usize = 64;
        for attempt in 0..ATTEMPTS {
            let mut rng = keyed_rng(seed, StreamDomain::Data, u64::MAX, attempt as u64);
            let mut edges = Vec::new();
            for i in 0..m {
                for k in i + 1..m {
                    if rng.random::<f64>() < p {
                        edges.push((i, k));
                    }
                }
            }
            match build_graph(m, &edges) {
                Ok(g) => return Ok(g),
                Err(TopologyError::Disconnected { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(TopologyError::RandomGraphDisconnected {
            p,
            attempts: ATTEMPTS,
        })
    }

    /// Parses the plain-text edge list format: a header line `m=<count>`
    /// followed by one `i k` pair per line. `#` starts a comment.
    pub fn from_edge_list_str(text: &str) -> Result<Graph, TopologyError> {
        let mut m: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if m.is_none() {
                let rest = line
                    .strip_prefix("m")
                    .map(|r| r.trim_start())
                    .and_then(|r| r.strip_prefix('='))
                    .ok_or_else(|| TopologyError::Parse {
                        line: line_no,
                        reason: format!("expected header `m=<count>`, got `{line}`"),
                    })?;
                let count: usize = rest.trim().parse().map_err(|_| TopologyError::Parse {
                    line: line_no,
                    reason: format!("invalid node count `{}`", rest.trim()),
                })?;
                m = Some(count);
                continue;
            }
            let mut parts = line.split_whitespace();
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(TopologyError::Parse {
                        line: line_no,
                        reason: format!("expected `i k`, got `{line}`"),
                    });
                }
            };
            let parse = |s: &str| -> Result<usize, TopologyError> {
                s.parse().map_err(|_| TopologyError::Parse {
                    line: line_no,
                    reason: format!("invalid node index `{s}`"),
                })
            };
            edges.push((parse(a)?, parse(b)?));
        }
        let m = m.ok_or(TopologyError::Parse {
            line: 0,
            reason: "missing `m=<count>` header".into(),
        })?;
        build_graph(m, &edges)
    }
}

/// Symmetric doubly stochastic consensus weights with contraction factor
/// `eta < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    m: usize,
    w: Vec<f64>,
    eta: f64,
}

impl MixingMatrix {
    /// Validates an arbitrary dense matrix and computes its `eta`.
    pub fn from_raw(m: usize, w: Vec<f64>) -> Result<Self, TopologyError> {
        let eta = spectral_eta(m, &w)?;
        if eta >= 1.0 - ETA_MARGIN {
            return Err(TopologyError::SpectralGapViolation { eta });
        }
        Ok(MixingMatrix { m, w, eta })
    }

    /// Measures this matrix against the consensus requirements.
    pub fn validate(&self) -> MixingReport {
        validate_mixing(self.m, &self.w)
    }

    /// The no-communication matrix `W = I`. Degenerate on purpose: it has
    /// `eta = 1`, so it fails [`validate_mixing`], but it is the natural
    /// fixture for decoupled-node baselines and tests.
    pub fn identity(m: usize) -> Self {
        let mut w = vec![0.0; m * m];
        for i in 0..m {
            w[i * m + i] = 1.0;
        }
        MixingMatrix {
            m,
            w,
            eta: if m == 1 { 0.0 } else { 1.0 },
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.w[i * self.m + k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.w
    }

    /// One consensus round: `dst[i] = sum_k w[i][k] * src[k]`, blockwise over
    /// the `d` coordinates.
    pub fn mix_into(&self, src: &Stacked, dst: &mut Stacked) {
        assert_eq!(src.m(), self.m, "node count mismatch");
        assert_eq!(dst.m(), self.m, "node count mismatch");
        assert_eq!(src.d(), dst.d(), "dimension mismatch");
        let d = src.d();
        for i in 0..self.m {
            let out = dst.node_mut(i);
            out.fill(0.0);
            for k in 0..self.m {
                let w = self.w[i * self.m + k];
                if w == 0.0 {
                    continue;
                }
                let row = src.node(k);
                for c in 0..d {
                    out[c] += w * row[c];
                }
            }
        }
    }

    pub fn mix(&self, src: &Stacked) -> Stacked {
        let mut dst = Stacked::zeros(src.m(), src.d());
        self.mix_into(src, &mut dst);
        dst
    }
}

fn degree_checked(g: &Graph) -> (Vec<usize>, usize) {
    let deg = g.degrees();
    let max = deg.iter().copied().max().unwrap_or(0);
    (deg, max)
}

fn single_node_identity() -> MixingMatrix {
    // the subspace orthogonal to the all-ones vector is empty, so eta = 0
    MixingMatrix {
        m: 1,
        w: vec![1.0],
        eta: 0.0,
    }
}

/// Metropolis-Hastings weights: `w[i][k] = 1 / (1 + max(d_i, d_k))` on
/// edges, with the diagonal absorbing the remainder. Always satisfies
/// `eta < 1` on a connected graph.
pub fn metropolis_weights(g: &Graph) -> MixingMatrix {
    if g.m() == 1 {
        return single_node_identity();
    }
    let m = g.m();
    let (deg, _) = degree_checked(g);
    let mut w = vec![0.0; m * m];
    for &(a, b) in g.edges() {
        let weight = 1.0 / (1.0 + deg[a].max(deg[b]) as f64);
        w[a * m + b] = weight;
        w[b * m + a] = weight;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&k| k != i).map(|k| w[i * m + k]).sum();
        w[i * m + i] = 1.0 - off;
    }
    let eta = spectral_eta(m, &w).expect("constructed matrix is symmetric stochastic");
    assert!(
        eta < 1.0,
        "Metropolis weights on a connected graph must contract, got eta = {eta}"
    );
    MixingMatrix { m, w, eta }
}

/// Maximum-degree weights: `w[i][k] = 1/d_max` on edges, diagonal
/// `1 - d_i/d_max`. Fails with [`TopologyError::SpectralGapViolation`] when
/// the result does not contract (bipartite regular graphs).
pub fn max_degree_weights(g: &Graph) -> Result<MixingMatrix, TopologyError> {
    if g.m() == 1 {
        return Ok(single_node_identity());
    }
    let m = g.m();
    let (deg, d_max) = degree_checked(g);
    let mut w = vec![0.0; m * m];
    let weight = 1.0 / d_max as f64;
    for &(a, b) in g.edges() {
        w[a * m + b] = weight;
        w[b * m + a] = weight;
    }
    for i in 0..m {
        w[i * m + i] = 1.0 - deg[i] as f64 / d_max as f64;
    }
    MixingMatrix::from_raw(m, w)
}

/// Laplacian weights: `w[i][k] = gamma` on edges, diagonal `1 - gamma*d_i`.
///
/// When `gamma` is omitted it defaults to `2 / (lambda_max(L) + lambda_2(L))`
/// computed from the exact graph-Laplacian eigenvalues.
pub fn laplacian_weights(g: &Graph, gamma: Option<f64>) -> Result<MixingMatrix, TopologyError> {
    if g.m() == 1 {
        return Ok(single_node_identity());
    }
    let m = g.m();
    let (deg, _) = degree_checked(g);
    let gamma = match gamma {
        Some(v) => v,
        None => {
            let mut lap = DMatrix::zeros(m, m);
            for &(a, b) in g.edges() {
                lap[(a, b)] = -1.0;
                lap[(b, a)] = -1.0;
            }
            for i in 0..m {
                lap[(i, i)] = deg[i] as f64;
            }
            let mut eigs: Vec<f64> = SymmetricEigen::new(lap)
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // connected graph: eigs[0] ~ 0, eigs[1] is the algebraic connectivity
            2.0 / (eigs[m - 1] + eigs[1])
        }
    };
    let mut w = vec![0.0; m * m];
    for &(a, b) in g.edges() {
        w[a * m + b] = gamma;
        w[b * m + a] = gamma;
    }
    for i in 0..m {
        w[i * m + i] = 1.0 - gamma * deg[i] as f64;
    }
    MixingMatrix::from_raw(m, w)
}

/// Largest eigenvalue magnitude of `w` on the subspace orthogonal to the
/// all-ones vector, computed by deflating the rank-one consensus projector
/// and taking the spectral radius of the remainder.
pub fn spectral_eta(m: usize, w: &[f64]) -> Result<f64, TopologyError> {
    if w.len() != m * m {
        return Err(TopologyError::ShapeMismatch {
            len: w.len(),
            expected: m * m,
            m,
        });
    }
    let mut max_asym: f64 = 0.0;
    for i in 0..m {
        for k in i + 1..m {
            max_asym = max_asym.max((w[i * m + k] - w[k * m + i]).abs());
        }
    }
    if max_asym > SYMMETRY_TOL {
        return Err(TopologyError::Asymmetric { max_dev: max_asym });
    }
    let mut max_row_dev: f64 = 0.0;
    for i in 0..m {
        let sum: f64 = w[i * m..(i + 1) * m].iter().sum();
        max_row_dev = max_row_dev.max((sum - 1.0).abs());
    }
    if max_row_dev > ROW_SUM_TOL {
        return Err(TopologyError::NonStochastic {
            max_dev: max_row_dev,
        });
    }
    if m == 1 {
        return Ok(0.0);
    }
    let uniform = 1.0 / m as f64;
    let deflated = DMatrix::from_fn(m, m, |i, k| w[i * m + k] - uniform);
    let eigs = SymmetricEigen::new(deflated).eigenvalues;
    Ok(eigs.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Validation report for a candidate mixing matrix.
#[derive(Debug, Clone)]
pub struct MixingReport {
    pub m: usize,
    pub symmetry_residual: f64,
    pub max_row_sum_deviation: f64,
    /// `None` when the matrix is too malformed for an eigendecomposition.
    pub eta: Option<f64>,
    pub symmetric_ok: bool,
    pub stochastic_ok: bool,
    pub contraction_ok: bool,
}

impl MixingReport {
    pub fn pass(&self) -> bool {
        self.symmetric_ok && self.stochastic_ok && self.contraction_ok
    }
}

impl std::fmt::Display for MixingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "nodes:                {}", self.m)?;
        writeln!(
            f,
            "symmetry residual:    {:e} ({})",
            self.symmetry_residual,
            if self.symmetric_ok { "ok" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "row-sum deviation:    {:e} ({})",
            self.max_row_sum_deviation,
            if self.stochastic_ok { "ok" } else { "FAIL" }
        )?;
        match self.eta {
            Some(eta) => writeln!(
                f,
                "eta:                  {} ({})",
                eta,
                if self.contraction_ok {
                    "ok"
                } else {
                    "FAIL: eta >= 1"
                }
            )?,
            None => writeln!(f, "eta:                  not computable")?,
        }
        write!(
            f,
            "verdict:              {}",
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

/// Measures symmetry, row sums, and `eta` of a dense matrix without
/// rejecting it; failures are carried in the report.
pub fn validate_mixing(m: usize, w: &[f64]) -> MixingReport {
    assert_eq!(w.len(), m * m, "matrix shape mismatch");
    let mut symmetry_residual: f64 = 0.0;
    for i in 0..m {
        for k in i + 1..m {
            symmetry_residual = symmetry_residual.max((w[i * m + k] - w[k * m + i]).abs());
        }
    }
    let mut max_row_sum_deviation: f64 = 0.0;
    for i in 0..m {
        let sum: f64 = w[i * m..(i + 1) * m].iter().sum();
        max_row_sum_deviation = max_row_sum_deviation.max((sum - 1.0).abs());
    }
    let symmetric_ok = symmetry_residual <= SYMMETRY_TOL;
    let stochastic_ok = max_row_sum_deviation <= ROW_SUM_TOL;
    let eta = if symmetric_ok && stochastic_ok {
        spectral_eta(m, w).ok()
    } else {
        None
    };
    let contraction_ok = matches!(eta, Some(e) if e < 1.0 - ETA_MARGIN);
    MixingReport {
        m,
        symmetry_residual,
        max_row_sum_deviation,
        eta,
        symmetric_ok,
        stochastic_ok,
        contraction_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stacked::l2_norm_sq;

    fn ring4_metropolis() -> MixingMatrix {
        metropolis_weights(&Graph::ring(4).unwrap())
    }

    #[test]
    fn build_graph_examples() {
        let ring = build_graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(ring.degrees(), vec![2, 2, 2, 2]);
        assert!(build_graph(1, &[]).is_ok());
        assert!(matches!(
            build_graph(2, &[]),
            Err(TopologyError::Disconnected { unreached: 1 })
        ));
        assert!(matches!(
            build_graph(3, &[(0, 0)]),
            Err(TopologyError::SelfLoop(0))
        ));
        assert!(matches!(
            build_graph(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(TopologyError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            build_graph(3, &[(0, 5)]),
            Err(TopologyError::EndpointOutOfRange { node: 5, m: 3 })
        ));
        assert!(matches!(
            build_graph(0, &[]),
            Err(TopologyError::EmptyGraph)
        ));
    }

    #[test]
    fn metropolis_complete3_is_uniform() {
        let w = metropolis_weights(&Graph::complete(3).unwrap());
        for i in 0..3 {
            for k in 0..3 {
                assert!((w.entry(i, k) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(w.eta().abs() <= 1e-12);
    }

    #[test]
    fn metropolis_path2() {
        let w = metropolis_weights(&Graph::path(2).unwrap());
        for i in 0..2 {
            for k in 0..2 {
                assert!((w.entry(i, k) - 0.5).abs() < 1e-15);
            }
        }
        assert!(w.eta().abs() <= 1e-12);
    }

    #[test]
    fn metropolis_ring4_eta_matches_circulant_formula() {
        // independent oracle: eigenvalues of the circulant are
        // 1/3 + (2/3) cos(2 pi k / 4), k = 0..3 -> {1, 1/3, -1/3, 1/3}
        let expected: f64 = (0..4)
            .map(|k| 1.0 / 3.0 + 2.0 / 3.0 * (2.0 * std::f64::consts::PI * k as f64 / 4.0).cos())
            .filter(|l| (l - 1.0).abs() > 1e-9)
            .fold(0.0f64, |acc, l| acc.max(l.abs()));
        assert!((expected - 1.0 / 3.0).abs() < 1e-15);
        let w = ring4_metropolis();
        for &(i, k) in Graph::ring(4).unwrap().edges() {
            assert!((w.entry(i, k) - 1.0 / 3.0).abs() < 1e-15);
        }
        for i in 0..4 {
            assert!((w.entry(i, i) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((w.eta() - expected).abs() <= 1e-12);
    }

    #[test]
    fn max_degree_star3() {
        let w = max_degree_weights(&Graph::star(3).unwrap()).unwrap();
        assert!((w.entry(0, 1) - 0.5).abs() < 1e-15);
        assert!((w.entry(0, 2) - 0.5).abs() < 1e-15);
        assert!(w.entry(0, 0).abs() < 1e-15);
        assert!((w.entry(1, 1) - 0.5).abs() < 1e-15);
        assert!((w.entry(2, 2) - 0.5).abs() < 1e-15);
        assert!(w.eta() < 1.0);
    }

    #[test]
    fn max_degree_ring4_rejected() {
        // eigenvalues {1, 0, -1, 0}: no contraction on the even ring
        match max_degree_weights(&Graph::ring(4).unwrap()) {
            Err(TopologyError::SpectralGapViolation { eta }) => {
                assert!((eta - 1.0).abs() <= 1e-12)
            }
            other => panic!("expected spectral gap violation, got {other:?}"),
        }
    }

    #[test]
    fn max_degree_complete3() {
        let w = max_degree_weights(&Graph::complete(3).unwrap()).unwrap();
        for i in 0..3 {
            assert!(w.entry(i, i).abs() < 1e-15);
            for k in 0..3 {
                if i != k {
                    assert!((w.entry(i, k) - 0.5).abs() < 1e-15);
                }
            }
        }
        // eigenvalues {1, -1/2, -1/2}
        assert!((w.eta() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn laplacian_ring4_default_gamma_matches_metropolis() {
        // ring-4 Laplacian eigenvalues {0, 2, 2, 4} -> gamma = 2/(4+2) = 1/3
        let lap = laplacian_weights(&Graph::ring(4).unwrap(), None).unwrap();
        let met = ring4_metropolis();
        for i in 0..4 {
            for k in 0..4 {
                assert!(
                    (lap.entry(i, k) - met.entry(i, k)).abs() < 1e-12,
                    "entry ({i},{k}): {} vs {}",
                    lap.entry(i, k),
                    met.entry(i, k)
                );
            }
        }
        assert!((lap.eta() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_path2_default_gamma() {
        // eigenvalues {0, 2} -> gamma = 1/2
        let w = laplacian_weights(&Graph::path(2).unwrap(), None).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert!((w.entry(i, k) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_gamma_zero_rejected() {
        // gamma = 0 gives the identity, eta = 1
        match laplacian_weights(&Graph::ring(5).unwrap(), Some(0.0)) {
            Err(TopologyError::SpectralGapViolation { eta }) => {
                assert!((eta - 1.0).abs() <= 1e-12)
            }
            other => panic!("expected spectral gap violation, got {other:?}"),
        }
    }

    #[test]
    fn spectral_eta_closed_forms() {
        let m = 5;
        let uniform = vec![1.0 / m as f64; m * m];
        assert!(spectral_eta(m, &uniform).unwrap().abs() <= 1e-12);

        let mut identity = vec![0.0; m * m];
        for i in 0..m {
            identity[i * m + i] = 1.0;
        }
        assert!((spectral_eta(m, &identity).unwrap() - 1.0).abs() <= 1e-12);

        let ring = ring4_metropolis();
        assert!((spectral_eta(4, ring.entries()).unwrap() - 1.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn spectral_eta_rejects_malformed_input() {
        let asym = vec![0.5, 0.5, 0.4, 0.6];
        assert!(matches!(
            spectral_eta(2, &asym),
            Err(TopologyError::Asymmetric { .. })
        ));
        let nonstoch = vec![0.5, 0.4, 0.4, 0.5];
        assert!(matches!(
            spectral_eta(2, &nonstoch),
            Err(TopologyError::NonStochastic { .. })
        ));
        assert!(matches!(
            spectral_eta(2, &[1.0]),
            Err(TopologyError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn single_node_conventions() {
        let g = build_graph(1, &[]).unwrap();
        for w in [
            metropolis_weights(&g),
            max_degree_weights(&g).unwrap(),
            laplacian_weights(&g, None).unwrap(),
        ] {
            assert_eq!(w.entries(), &[1.0]);
            assert_eq!(w.eta(), 0.0);
        }
    }

    #[test]
    fn validate_mixing_reports() {
        let ring = ring4_metropolis();
        let report = validate_mixing(4, ring.entries());
        assert!(report.pass());
        assert!((report.eta.unwrap() - 1.0 / 3.0).abs() <= 1e-12);

        // max-degree ring-4 built by hand: edges 1/2, diagonal 0
        let g = Graph::ring(4).unwrap();
        let mut w = vec![0.0; 16];
        for &(a, b) in g.edges() {
            w[a * 4 + b] = 0.5;
            w[b * 4 + a] = 0.5;
        }
        let report = validate_mixing(4, &w);
        assert!(!report.pass());
        assert!((report.eta.unwrap() - 1.0).abs() <= 1e-12);

        let mut identity = vec![0.0; 16];
        for i in 0..4 {
            identity[i * 4 + i] = 1.0;
        }
        let report = validate_mixing(4, &identity);
        assert!(!report.pass());
        assert!((report.eta.unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn constructed_matrices_are_exactly_symmetric_and_stochastic() {
        for g in [
            Graph::ring(7).unwrap(),
            Graph::path(5).unwrap(),
            Graph::star(6).unwrap(),
            Graph::complete(5).unwrap(),
            Graph::erdos_renyi(10, 0.4, 3).unwrap(),
        ] {
            let m = g.m();
            for w in [
                Some(metropolis_weights(&g)),
                max_degree_weights(&g).ok(),
                laplacian_weights(&g, None).ok(),
            ]
            .into_iter()
            .flatten()
            {
                for i in 0..m {
                    let sum: f64 = (0..m).map(|k| w.entry(i, k)).sum();
                    assert!((sum - 1.0).abs() <= 1e-12);
                    for k in 0..m {
                        assert_eq!(w.entry(i, k), w.entry(k, i));
                        if i != k && w.entry(i, k) != 0.0 {
                            assert!(g.edges().contains(&(i.min(k), i.max(k))));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn contraction_on_mean_zero_vectors() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for g in [
            Graph::ring(8).unwrap(),
            Graph::star(5).unwrap(),
            Graph::erdos_renyi(12, 0.3, 9).unwrap(),
        ] {
            let w = metropolis_weights(&g);
            let m = g.m();
            for _ in 0..100 {
                let mut z: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
                let mean = z.iter().sum::<f64>() / m as f64;
                for v in &mut z {
                    *v -= mean;
                }
                let zs = Stacked::from_raw(m, 1, z.clone());
                let wz = w.mix(&zs);
                let lhs = l2_norm_sq(wz.data()).sqrt();
                let rhs = (w.eta() + 1e-10) * l2_norm_sq(&z).sqrt();
                assert!(lhs <= rhs, "contraction violated: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "# ring on four nodes\nm = 4\n0 1\n1 2\n2 3\n3 0  # closing edge\n";
        let g = Graph::from_edge_list_str(text).unwrap();
        assert_eq!(g, Graph::ring(4).unwrap());

        assert!(matches!(
            Graph::from_edge_list_str("0 1\n"),
            Err(TopologyError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list_str("m=3\n0\n"),
            Err(TopologyError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list_str("# nothing\n"),
            Err(TopologyError::Parse { line: 0, .. })
        ));
    }

    #[test]
    fn erdos_renyi_is_deterministic() {
        let a = Graph::erdos_renyi(10, 0.35, 11).unwrap();
        let b = Graph::erdos_renyi(10, 0.35, 11).unwrap();
        assert_eq!(a, b);
    }
}
