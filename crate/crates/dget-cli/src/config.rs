//! Line-oriented `section.key = value` experiment configuration.
//!
//! The format is flat on purpose: one assignment per line, `#` comments,
//! unknown keys rejected with their line number. See the README for the
//! full key list and defaults.

use dget::engine::{Algorithm, Mode};
use dget::problems::ProblemKind;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` set twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{key} = {value}` is invalid ({expected})")]
    Invalid {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("missing required key `{key}`")]
    Missing { key: &'static str },
    #[error("{0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologySpec {
    Ring,
    Path,
    Star,
    Complete,
    ErdosRenyi,
    /// Edge-list file (header `m=<count>`, one `i k` pair per line).
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Metropolis,
    MaxDegree,
    Laplacian,
}

impl std::str::FromStr for WeightScheme {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "metropolis" => Ok(WeightScheme::Metropolis),
            "maxdegree" => Ok(WeightScheme::MaxDegree),
            "laplacian" => Ok(WeightScheme::Laplacian),
            _ => Err(()),
        }
    }
}

/// `algorithm.alpha`: a literal stepsize or the `theorem1` sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Theorem1,
    Fixed(f64),
}

/// Batch-size entries accept `auto` or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSpec {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct ProblemBlock {
    pub kind: ProblemKind,
    pub m: usize,
    pub n: Option<usize>,
    pub d: usize,
    pub lambda: f64,
    pub sigma2: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct GraphBlock {
    pub topology: TopologySpec,
    pub scheme: WeightScheme,
    pub gamma: Option<f64>,
    /// Edge probability for the Erdős–Rényi topology.
    pub er_prob: f64,
    /// Seed for random topologies; defaults to the problem seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct AlgorithmBlock {
    pub name: Algorithm,
    pub mode: Mode,
    pub alpha: AlphaSpec,
    pub safety: f64,
    pub q: BatchSpec,
    pub s1: BatchSpec,
    pub s2: BatchSpec,
    pub horizon: usize,
    pub epsilon: f64,
    pub diag_every: usize,
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemBlock,
    pub graph: GraphBlock,
    pub algorithm: AlgorithmBlock,
    pub output: OutputBlock,
}

#[derive(Default)]
struct RawConfig {
    entries: Vec<(usize, String, String)>,
}

fn parse_value<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Invalid {
        line,
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

/// Parses and validates a configuration, applying documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: line_no,
            text: line.to_string(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Malformed {
                line: line_no,
                text: line.to_string(),
            });
        }
        if seen.contains(&key) {
            return Err(ConfigError::Duplicate { line: line_no, key });
        }
        seen.push(key.clone());
        raw.entries.push((line_no, key, value));
    }

    let mut kind: Option<ProblemKind> = None;
    let mut m: Option<usize> = None;
    let mut n: Option<usize> = None;
    let mut d: Option<usize> = None;
    let mut lambda = 0.1;
    let mut sigma2 = 1.0;
    let mut seed = 0u64;
    let mut topology: Option<TopologySpec> = None;
    let mut graph_file: Option<PathBuf> = None;
    let mut scheme = WeightScheme::Metropolis;
    let mut gamma: Option<f64> = None;
    let mut er_prob = 0.3;
    let mut graph_seed: Option<u64> = None;
    let mut name: Option<Algorithm> = None;
    let mut mode = Mode::FiniteSum;
    let mut alpha = AlphaSpec::Theorem1;
    let mut safety = 0.5;
    let mut q = BatchSpec::Auto;
    let mut s1 = BatchSpec::Auto;
    let mut s2 = BatchSpec::Auto;
    let mut horizon: Option<usize> = None;
    let mut epsilon = 1e-3;
    let mut diag_every = 1usize;
    let mut x0 = 0.0;
    let mut dir = PathBuf::from("out");
    let mut formats = vec![OutputFormat::Csv, OutputFormat::Json];

    for (line, key, value) in &raw.entries {
        let (line, value) = (*line, value.as_str());
        match key.as_str() {
            "problem.kind" => {
                kind = Some(value.parse().map_err(|_| ConfigError::Invalid {
                    line,
                    key: key.clone(),
                    value: value.to_string(),
                    expected: "shifted-quadratic or nonconvex-logistic",
                })?)
            }
            "problem.m" => m = Some(parse_value(line, key, value, "a positive integer")?),
            "problem.n" => n = Some(parse_value(line, key, value, "a positive integer")?),
            "problem.d" => d = Some(parse_value(line, key, value, "a positive integer")?),
            "problem.lambda" => lambda = parse_value(line, key, value, "a nonnegative real")?,
            "problem.sigma2" => sigma2 = parse_value(line, key, value, "a nonnegative real")?,
            "problem.seed" => seed = parse_value(line, key, value, "an unsigned integer")?,
            "graph.topology" => {
                topology = Some(match value {
                    "ring" => TopologySpec::Ring,
                    "path" => TopologySpec::Path,
                    "star" => TopologySpec::Star,
                    "complete" => TopologySpec::Complete,
                    "erdos-renyi" => TopologySpec::ErdosRenyi,
                    _ => {
                        return Err(ConfigError::Invalid {
                            line,
                            key: key.clone(),
                            value: value.to_string(),
                            expected: "ring|path|star|complete|erdos-renyi",
                        });
                    }
                })
            }
            "graph.file" => graph_file = Some(PathBuf::from(value)),
            "graph.scheme" => {
                scheme = value.parse().map_err(|_| ConfigError::Invalid {
                    line,
                    key: key.clone(),
                    value: value.to_string(),
                    expected: "metropolis|maxdegree|laplacian",
                })?
            }
            "graph.gamma" => gamma = Some(parse_value(line, key, value, "a positive real")?),
            "graph.er_prob" => er_prob = parse_value(line, key, value, "a real in [0, 1]")?,
            "graph.seed" => {
                graph_seed = Some(parse_value(line, key, value, "an unsigned integer")?)
            }
            "algorithm.name" => {
                name = Some(value.parse().map_err(|_| ConfigError::Invalid {
                    line,
                    key: key.clone(),
                    value: value.to_string(),
                    expected: "dget|gnsd|dgd|dsgd",
                })?)
            }
            "algorithm.mode" => {
                mode = value.parse().map_err(|_| ConfigError::Invalid {
                    line,
                    key: key.clone(),
                    value: value.to_string(),
                    expected: "finite-sum|online",
                })?
            }
            "algorithm.alpha" => {
                alpha = if value == "theorem1" {
                    AlphaSpec::Theorem1
                } else {
                    AlphaSpec::Fixed(parse_value(line, key, value, "a real or `theorem1`")?)
                }
            }
            "algorithm.safety" => safety = parse_value(line, key, value, "a real in (0, 1]")?,
            "algorithm.q" => q = parse_batch(line, key, value)?,
            "algorithm.s1" => s1 = parse_batch(line, key, value)?,
            "algorithm.s2" => s2 = parse_batch(line, key, value)?,
            "algorithm.t" => {
                horizon = Some(parse_value(line, key, value, "a nonnegative integer")?)
            }
            "algorithm.epsilon" => epsilon = parse_value(line, key, value, "a positive real")?,
            "algorithm.diag_every" => {
                diag_every = parse_value(line, key, value, "a positive integer")?
            }
            "algorithm.x0" => x0 = parse_value(line, key, value, "a real")?,
            "output.dir" => dir = PathBuf::from(value),
            "output.formats" => {
                formats = value
                    .split(',')
                    .map(|f| match f.trim() {
                        "csv" => Ok(OutputFormat::Csv),
                        "json" => Ok(OutputFormat::Json),
                        _ => Err(ConfigError::Invalid {
                            line,
                            key: key.clone(),
                            value: value.to_string(),
                            expected: "comma-separated subset of csv,json",
                        }),
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.clone(),
                })
            }
        }
    }

    let kind = kind.ok_or(ConfigError::Missing {
        key: "problem.kind",
    })?;
    let m = m.ok_or(ConfigError::Missing { key: "problem.m" })?;
    let d = d.ok_or(ConfigError::Missing { key: "problem.d" })?;
    let name = name.ok_or(ConfigError::Missing {
        key: "algorithm.name",
    })?;
    let horizon = horizon.ok_or(ConfigError::Missing { key: "algorithm.t" })?;

    let topology = match (topology, graph_file) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Inconsistent(
                "graph.topology and graph.file are mutually exclusive".into(),
            ));
        }
        (None, Some(path)) => TopologySpec::File(path),
        (Some(t), None) => t,
        (None, None) => TopologySpec::Ring,
    };

    match mode {
        Mode::FiniteSum => {
            if n.is_none() {
                return Err(ConfigError::Missing { key: "problem.n" });
            }
            if s1 != BatchSpec::Auto {
                return Err(ConfigError::Inconsistent(
                    "algorithm.s1 only applies to online mode".into(),
                ));
            }
        }
        Mode::Online => {
            if n.is_some() {
                return Err(ConfigError::Inconsistent(
                    "problem.n only applies to finite-sum mode".into(),
                ));
            }
        }
    }
    if gamma.is_some() && scheme != WeightScheme::Laplacian {
        return Err(ConfigError::Inconsistent(
            "graph.gamma only applies to the laplacian scheme".into(),
        ));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(ConfigError::Inconsistent(format!(
            "algorithm.safety must lie in (0, 1], got {safety}"
        )));
    }
    if epsilon <= 0.0 {
        return Err(ConfigError::Inconsistent(format!(
            "algorithm.epsilon must be positive, got {epsilon}"
        )));
    }
    if diag_every == 0 {
        return Err(ConfigError::Inconsistent(
            "algorithm.diag_every must be >= 1".into(),
        ));
    }

    Ok(ExperimentConfig {
        problem: ProblemBlock {
            kind,
            m,
            n,
            d,
            lambda,
            sigma2,
            seed,
        },
        graph: GraphBlock {
            topology,
            scheme,
            gamma,
            er_prob,
            seed: graph_seed,
        },
        algorithm: AlgorithmBlock {
            name,
            mode,
            alpha,
            safety,
            q,
            s1,
            s2,
            horizon,
            epsilon,
            diag_every,
            x0,
        },
        output: OutputBlock { dir, formats },
    })
}

fn parse_batch(line: usize, key: &str, value: &str) -> Result<BatchSpec, ConfigError> {
    if value == "auto" {
        return Ok(BatchSpec::Auto);
    }
    let v: usize = parse_value(line, key, value, "a positive integer or `auto`")?;
    if v == 0 {
        return Err(ConfigError::Invalid {
            line,
            key: key.to_string(),
            value: value.to_string(),
            expected: "a positive integer or `auto`",
        });
    }
    Ok(BatchSpec::Fixed(v))
}
