//! `dget` command-line interface.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 configuration
//! error, 3 divergence, 4 mixing-matrix validation failure.

use clap::{Parser, Subcommand};
use dget::engine::Algorithm;
use dget::topology::Graph;
use dget_cli::config::WeightScheme;
use dget_cli::runner::{build_mixing, write_atomic};
use dget_cli::{compare, sweep, HarnessError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dget",
    version,
    about = "Decentralized gradient estimation and tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run; writes trace.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run once per accuracy target and fit the communication-cost slope.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated accuracy targets, e.g. 1e-2,1e-3,1e-4.
        #[arg(long)]
        epsilons: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare algorithms over a shared seed set at the configured accuracy.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of dget,gnsd,dgd,dsgd.
        #[arg(long)]
        algorithms: String,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build mixing weights for a graph file and report the validation.
    ValidateMixing {
        /// Edge-list file: header `m=<count>`, one `i k` pair per line.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        scheme: String,
        /// Edge weight for the laplacian scheme (default: spectral choice).
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<dget_cli::ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    Ok(dget_cli::parse_config(&text)?)
}

fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>, String> {
    list.split(',')
        .map(|s| s.trim().parse::<Algorithm>())
        .collect()
}

fn parse_epsilons(list: &str) -> Result<Vec<f64>, String> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad epsilon `{s}`: {e}"))
        })
        .collect()
}

fn run_command(command: Command) -> Result<(), (i32, String)> {
    match command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(&config).map_err(stringify)?;
            let (paths, summary) =
                dget_cli::run_to_files(&cfg, seed, out.as_deref()).map_err(stringify)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            println!(
                "best h = {:e} at iteration {}; first hit {}",
                summary.best_h,
                summary.best_h_iter,
                summary
                    .first_hit_iter
                    .map_or("never".to_string(), |r| format!("at iteration {r}")),
            );
            Ok(())
        }
        Command::Sweep {
            config,
            epsilons,
            out,
        } => {
            let cfg = load_config(&config).map_err(stringify)?;
            let eps = parse_epsilons(&epsilons).map_err(|e| (2, e))?;
            let result = sweep::sweep(&cfg, &eps).map_err(stringify)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let path = write_atomic(&dir, "sweep.csv", &result.to_csv())
                .map_err(|e| (1, e.to_string()))?;
            println!("wrote {}", path.display());
            match result.slope {
                Some(s) => println!("slope of log(first-hit comm) vs log(1/eps): {s:.4}"),
                None => println!("slope not estimable (fewer than two reached targets)"),
            }
            Ok(())
        }
        Command::Compare {
            config,
            algorithms,
            seeds,
            out,
        } => {
            let cfg = load_config(&config).map_err(stringify)?;
            let algos = parse_algorithms(&algorithms).map_err(|e| (2, e))?;
            let rows = compare::compare(&cfg, &algos, seeds).map_err(stringify)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let csv = compare::to_csv(&rows);
            let path = write_atomic(&dir, "compare.csv", &csv).map_err(|e| (1, e.to_string()))?;
            println!("wrote {}", path.display());
            print!("{csv}");
            Ok(())
        }
        Command::ValidateMixing {
            graph,
            scheme,
            gamma,
        } => {
            let scheme: WeightScheme = scheme.parse().map_err(|_| {
                (
                    2,
                    "unknown scheme (expected metropolis|maxdegree|laplacian)".to_string(),
                )
            })?;
            let text = std::fs::read_to_string(&graph).map_err(|e| (1, e.to_string()))?;
            let g = Graph::from_edge_list_str(&text).map_err(|e| (2, e.to_string()))?;
            match build_mixing(&g, scheme, gamma) {
                Ok(w) => {
                    let report = w.validate();
                    println!("{report}");
                    if report.pass() {
                        Ok(())
                    } else {
                        Err((4, "mixing matrix failed validation".to_string()))
                    }
                }
                Err(e) => {
                    println!("construction failed: {e}");
                    Err((e.exit_code(), e.to_string()))
                }
            }
        }
        Command::Gradcheck { config } => {
            let cfg = load_config(&config).map_err(stringify)?;
            let report = dget_cli::gradcheck(&cfg).map_err(stringify)?;
            println!(
                "gradcheck: {} probes, max relative error {:e} -> {}",
                report.probes,
                report.max_rel_err,
                if report.pass { "PASS" } else { "FAIL" }
            );
            if report.pass {
                Ok(())
            } else {
                Err((1, "gradient check failed".to_string()))
            }
        }
    }
}

fn stringify(e: HarnessError) -> (i32, String) {
    (e.exit_code(), e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
