//! Multi-algorithm comparisons over a shared seed set.

use crate::config::{ConfigError, ExperimentConfig};
use crate::runner::{execute, HarnessError};
use dget::engine::Algorithm;

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub algorithm: Algorithm,
    pub seeds: usize,
    /// Seeds whose run reached the target accuracy.
    pub hits: usize,
    /// Mean first-hit cost over the hitting seeds.
    pub mean_first_hit_ifo: Option<f64>,
    pub mean_first_hit_comm: Option<f64>,
    /// Set when at least one seed never reached the target.
    pub flagged: bool,
}

pub fn to_csv(rows: &[CompareRow]) -> String {
    let mut out =
        String::from("algorithm,seeds,hits,mean_first_hit_ifo,mean_first_hit_comm,flagged\n");
    for row in rows {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.algorithm,
            row.seeds,
            row.hits,
            fmt(row.mean_first_hit_ifo),
            fmt(row.mean_first_hit_comm),
            u8::from(row.flagged),
        ));
    }
    out
}

/// Runs every algorithm on the same seed set (`base seed .. base seed +
/// seeds`) and averages first-hit counters at the configured accuracy.
/// Problem data is identical across algorithms for a given seed.
pub fn compare(
    config: &ExperimentConfig,
    algorithms: &[Algorithm],
    seeds: usize,
) -> Result<Vec<CompareRow>, HarnessError> {
    if algorithms.is_empty() {
        return Err(
            ConfigError::Inconsistent("compare needs at least one algorithm".into()).into(),
        );
    }
    if seeds == 0 {
        return Err(ConfigError::Inconsistent("compare needs at least one seed".into()).into());
    }
    let mut rows = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        let mut cfg = config.clone();
        cfg.algorithm.name = algorithm;
        let mut hits = 0usize;
        let mut sum_ifo = 0.0;
        let mut sum_comm = 0.0;
        for offset in 0..seeds {
            let seed = config.problem.seed + offset as u64;
            let (_, summary) = execute(&cfg, Some(seed))?;
            if let (Some(ifo), Some(comm)) = (summary.first_hit_ifo, summary.first_hit_comm) {
                hits += 1;
                sum_ifo += ifo as f64;
                sum_comm += comm as f64;
            }
        }
        rows.push(CompareRow {
            algorithm,
            seeds,
            hits,
            mean_first_hit_ifo: (hits > 0).then(|| sum_ifo / hits as f64),
            mean_first_hit_comm: (hits > 0).then(|| sum_comm / hits as f64),
            flagged: hits < seeds,
        });
    }
    Ok(rows)
}
