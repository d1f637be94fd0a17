//! Command-line front end.
//!
//! Exit codes: 0 on success and positive verdicts, 1 on negative mathematical
//! verdicts (criterion not met, UNSAT, invalid certificate), 2 on input
//! errors. All randomness flows from `--seed`.

use clap::{Parser, Subcommand};
use lfhtc::census::{census, rows_to_csv, CensusConfig, LatentPattern};
use lfhtc::cnf::CnfFormula;
use lfhtc::criterion::{lfhtc_identifiable, Certificate};
use lfhtc::dimension::dim_report;
use lfhtc::graph::{parse_graph, LatentFactorGraph};
use lfhtc::identify::recover_all;
use lfhtc::model::{sample_params, sigma, SampleMode};
use lfhtc::rmatrix::RMatrix;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lfhtc", version, about = "Identifiability of direct effects in latent-factor models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide identifiability of a latent-factor graph and emit a certificate.
    Check {
        /// Graph file (JSON).
        graph: PathBuf,
        /// Bound on the latent subset size in the search.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Verify a previously emitted certificate instead of searching.
        #[arg(long)]
        verify_cert: Option<PathBuf>,
    },
    /// Sample parameters for a graph and write the covariance matrix.
    Simulate {
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `primes` or `small-rationals`.
        #[arg(long, default_value = "primes")]
        mode: String,
        #[arg(long, default_value = "params.json")]
        params_out: PathBuf,
        #[arg(long, default_value = "sigma.json")]
        sigma_out: PathBuf,
    },
    /// Recover the parameter matrices from a covariance matrix.
    Identify {
        graph: PathBuf,
        sigma: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value = "lambda.json")]
        lambda_out: PathBuf,
        #[arg(long, default_value = "omega.json")]
        omega_out: PathBuf,
        #[arg(long, default_value = "certificate.json")]
        cert_out: PathBuf,
    },
    /// Project the latent nodes away, producing a mixed graph.
    Project {
        graph: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the dimension report of the parametrization.
    Dim {
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        trials: usize,
    },
    /// Decide satisfiability of a DIMACS CNF formula via the reduction.
    Sat { formula: PathBuf },
    /// Classify unlabeled DAG classes over a latent pattern, printing CSV.
    Census {
        /// `global6`, `twofactor6`, or a path to a graph file whose latent
        /// structure defines the pattern.
        #[arg(long)]
        pattern: String,
        #[arg(long, default_value_t = 9)]
        max_edges: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Also classify the latent projections.
        #[arg(long)]
        htc: bool,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; defaults to `LFHTC_JOBS` or all cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

enum Failure {
    /// Malformed input: exit code 2.
    Input(String),
    /// Negative mathematical verdict: exit code 1.
    Negative,
}

macro_rules! input_failure_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure::Input(e.to_string())
            }
        }
    )*};
}

input_failure_from!(
    lfhtc::model::ModelError,
    lfhtc::identify::IdentifyError,
    lfhtc::dimension::DimensionError,
    lfhtc::cnf::CnfError,
    lfhtc::census::CensusError
);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<LatentFactorGraph, Failure> {
    parse_graph(&read_file(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { graph, k, verify_cert } => {
            let g = load_graph(&graph)?;
            if let Some(cert_path) = verify_cert {
                let value: serde_json::Value = serde_json::from_str(&read_file(&cert_path)?)
                    .map_err(|e| Failure::Input(format!("{}: {e}", cert_path.display())))?;
                let cert = Certificate::from_json(&g, &value)
                    .map_err(|e| Failure::Input(format!("{}: {e}", cert_path.display())))?;
                return match cert.verify(&g) {
                    Ok(()) => {
                        println!("certificate valid");
                        Ok(())
                    }
                    Err(e) => {
                        println!("certificate invalid: {e}");
                        Err(Failure::Negative)
                    }
                };
            }
            let (identifiable, cert) = lfhtc_identifiable(&g, k);
            let out = serde_json::json!({
                "identifiable": identifiable,
                "k": k,
                "certificate": cert.to_json(&g),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            if identifiable {
                Ok(())
            } else {
                Err(Failure::Negative)
            }
        }
        Command::Simulate { graph, seed, mode, params_out, sigma_out } => {
            let g = load_graph(&graph)?;
            let mode = match mode.as_str() {
                "primes" => SampleMode::Primes,
                "small-rationals" => SampleMode::SmallRationals,
                other => {
                    return Err(Failure::Input(format!(
                        "unknown mode {other:?}; expected primes or small-rationals"
                    )))
                }
            };
            let params = sample_params(&g, seed, mode)?;
            let cov = sigma(&params)?;
            write_json(&params_out, &params.to_json())?;
            write_json(&sigma_out, &cov.to_json())?;
            println!("wrote {} and {}", params_out.display(), sigma_out.display());
            Ok(())
        }
        Command::Identify { graph, sigma, k, lambda_out, omega_out, cert_out } => {
            let g = load_graph(&graph)?;
            let value: serde_json::Value = serde_json::from_str(&read_file(&sigma)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", sigma.display())))?;
            let cov = RMatrix::from_json(&value)
                .map_err(|e| Failure::Input(format!("{}: {e}", sigma.display())))?;
            let (identifiable, cert) = lfhtc_identifiable(&g, k);
            if !identifiable {
                println!("graph is not identifiable at k = {k}");
                return Err(Failure::Negative);
            }
            let (lambda, omega) = recover_all(&g, &cert, &cov)?;
            write_json(&lambda_out, &lambda.to_json())?;
            write_json(&omega_out, &omega.to_json())?;
            write_json(&cert_out, &cert.to_json(&g))?;
            println!(
                "wrote {}, {}, {}",
                lambda_out.display(),
                omega_out.display(),
                cert_out.display()
            );
            Ok(())
        }
        Command::Project { graph, out } => {
            let g = load_graph(&graph)?;
            let projection = g.latent_projection().to_json();
            match out {
                Some(path) => write_json(&path, &projection)?,
                None => println!("{}", serde_json::to_string_pretty(&projection).expect("serializable")),
            }
            Ok(())
        }
        Command::Dim { graph, seed, trials } => {
            let g = load_graph(&graph)?;
            let report = dim_report(&g, seed, trials)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(())
        }
        Command::Sat { formula } => {
            let f = CnfFormula::parse_dimacs(&read_file(&formula)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", formula.display())))?;
            if lfhtc::cnf::sat_via_lfhtc(&f)? {
                println!("SAT");
                Ok(())
            } else {
                println!("UNSAT");
                Err(Failure::Negative)
            }
        }
        Command::Census { pattern, max_edges, k, htc, trials, seed, jobs } => {
            let pattern = match pattern.as_str() {
                "global6" => LatentPattern::global(6),
                "twofactor6" => LatentPattern::two_factor_six(),
                path => LatentPattern::from_graph(&load_graph(Path::new(path))?),
            };
            let jobs = jobs.or_else(|| {
                std::env::var("LFHTC_JOBS").ok().and_then(|v| v.parse().ok())
            });
            let cfg = CensusConfig { max_edges, k, with_htc: htc, trials, seed };
            let rows = match jobs {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| Failure::Input(e.to_string()))?;
                    pool.install(|| census(&pattern, &cfg))?
                }
                None => census(&pattern, &cfg)?,
            };
            print!("{}", rows_to_csv(&rows));
            Ok(())
        }
    }
}
