//! Stacked per-node vectors.
//!
//! An `m x d` block of per-node iterates stored row-major: node `i` owns the
//! contiguous slice `[i*d, (i+1)*d)`. All cross-node reductions (means,
//! norms) run in fixed node order so results do not depend on scheduling.

/// `m` vectors of dimension `d`, one per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Stacked {
    m: usize,
    d: usize,
    data: Vec<f64>,
}

impl Stacked {
    pub fn zeros(m: usize, d: usize) -> Self {
        Self::constant(m, d, 0.0)
    }

    pub fn constant(m: usize, d: usize, value: f64) -> Self {
        assert!(m > 0 && d > 0, "stacked dimensions must be positive");
        Stacked {
            m,
            d,
            data: vec![value; m * d],
        }
    }

    /// Builds from `f(node, coordinate)`.
    pub fn from_fn(m: usize, d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Stacked::zeros(m, d);
        for i in 0..m {
            for c in 0..d {
                s.data[i * d + c] = f(i, c);
            }
        }
        s
    }

    pub fn from_raw(m: usize, d: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), m * d, "raw data length must equal m*d");
        Stacked { m, d, data }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Node average, summed in node order.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for i in 0..self.m {
            let row = self.node(i);
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let inv = 1.0 / self.m as f64;
        for o in &mut out {
            *o *= inv;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Squared Frobenius norm of the whole stack.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `sum_i ||row_i - center||^2`.
    pub fn spread_sq(&self, center: &[f64]) -> f64 {
        assert_eq!(center.len(), self.d);
        let mut total = 0.0;
        for i in 0..self.m {
            total += self
                .node(i)
                .iter()
                .zip(center)
                .map(|(v, c)| (v - c) * (v - c))
                .sum::<f64>();
        }
        total
    }
}

pub fn l2_norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn l2_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
