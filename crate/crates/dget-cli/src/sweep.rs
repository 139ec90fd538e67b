//! Accuracy sweeps: first-hit cost as a function of the target accuracy.

use crate::config::{ConfigError, ExperimentConfig};
use crate::runner::{execute, HarnessError};

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon: f64,
    pub hit: bool,
    pub first_hit_iter: Option<usize>,
    pub first_hit_comm: Option<u64>,
    pub first_hit_ifo: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log(first-hit comm)` against `log(1/eps)`
    /// over the rows that reached their target with nonzero cost; `None`
    /// with fewer than two usable rows.
    pub slope: Option<f64>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,hit,first_hit_iter,first_hit_comm,first_hit_ifo\n");
        for row in &self.rows {
            let fmt_u64 = |v: Option<u64>| v.map_or(String::new(), |x| x.to_string());
            out.push_str(&format!(
                "{:e},{},{},{},{}\n",
                row.epsilon,
                u8::from(row.hit),
                row.first_hit_iter.map_or(String::new(), |x| x.to_string()),
                fmt_u64(row.first_hit_comm),
                fmt_u64(row.first_hit_ifo),
            ));
        }
        out
    }
}

/// Runs the configured experiment once per target accuracy. Requires at
/// least three targets spanning at least one decade. In online mode each
/// target re-derives its own batch plan.
pub fn sweep(config: &ExperimentConfig, epsilons: &[f64]) -> Result<SweepResult, HarnessError> {
    if epsilons.len() < 3 {
        return Err(ConfigError::Inconsistent(format!(
            "sweep needs at least 3 accuracy targets, got {}",
            epsilons.len()
        ))
        .into());
    }
    if epsilons.iter().any(|&e| e <= 0.0 || !e.is_finite()) {
        return Err(ConfigError::Inconsistent("sweep targets must be positive".into()).into());
    }
    let max = epsilons.iter().cloned().fold(f64::MIN, f64::max);
    let min = epsilons.iter().cloned().fold(f64::MAX, f64::min);
    if max / min < 10.0 {
        return Err(ConfigError::Inconsistent(format!(
            "sweep targets must span at least one decade, got [{min:e}, {max:e}]"
        ))
        .into());
    }

    let mut ordered = epsilons.to_vec();
    ordered.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut rows = Vec::with_capacity(ordered.len());
    for &epsilon in &ordered {
        let mut cfg = config.clone();
        cfg.algorithm.epsilon = epsilon;
        let (_, summary) = execute(&cfg, None)?;
        rows.push(SweepRow {
            epsilon,
            hit: summary.first_hit_iter.is_some(),
            first_hit_iter: summary.first_hit_iter,
            first_hit_comm: summary.first_hit_comm,
            first_hit_ifo: summary.first_hit_ifo,
        });
    }
    let slope = fit_slope(&rows);
    Ok(SweepResult { rows, slope })
}

/// `log(comm)` against `log(1/eps)` over usable rows.
fn fit_slope(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| match r.first_hit_comm {
            Some(c) if c > 0 => Some(((1.0 / r.epsilon).ln(), (c as f64).ln())),
            _ => None,
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
