//! `otk`: the operator-tuple toolkit from the command line.
//!
//! Exit codes: 0 success, 1 invariant violation, 2 a solver did not converge,
//! 3 bad arguments, configuration or I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use otk_core::geometry::{sample_v, sample_w};
use otk_core::io::{read_tuple, to_json_pretty, write_tuple};
use otk_core::parallel::with_threads;
use otk_core::solvers::{dist_to_scalars, max_variance, SolverOptions};
use otk_core::tuple::{gallery, gen_doubly, gen_toeplitz, Conjugation, FactorSpec, GalleryName, OperatorTuple, ToeplitzSymbol};
use otk_core::verify::{check_equality, run_suite, ExpectedClass, SuiteConfig};
use otk_core::OtkError;

const EXIT_VIOLATION: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "otk", version, about = "Operator-tuple toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance to the scalar tuples and its minimizer.
    Dist {
        tuple: PathBuf,
        /// Accepted relative duality gap when the solver stalls.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Largest variance over unit vectors.
    Maxvar {
        tuple: PathBuf,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Samples the joint numerical range W or its maximal part V to CSV.
    Vrange {
        tuple: PathBuf,
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        #[arg(long, default_value_t = 512)]
        boundary: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "V")]
        kind: Kind,
    },
    /// Compares maxvar with dist² and certifies the centered tuple.
    Check {
        tuple: PathBuf,
        /// doubly, toeplitz, normal, small, d1 or general.
        #[arg(long, default_value = "general")]
        class: ExpectedClass,
    },
    /// Writes a generated tuple.
    #[command(subcommand)]
    Gen(Gen),
    /// Writes a named example tuple.
    Gallery {
        name: GalleryName,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the verification suite.
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Gen {
    /// Doubly commuting tuple from Gaussian tensor factors.
    Doubly {
        /// Factor sizes per component, blocks separated by `;`, e.g. `2,2;2,2`.
        #[arg(long)]
        factors: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Conjugate by a seeded random unitary.
        #[arg(long)]
        conjugate: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite Toeplitz sections, one `--symbol` per component.
    Toeplitz {
        /// Coefficients like `c-1=0.5,c0=1,c1=2-1i`.
        #[arg(long = "symbol", required = true)]
        symbols: Vec<String>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    #[value(name = "W", alias = "w")]
    W,
    #[value(name = "V", alias = "v")]
    V,
}

/// Failure carrying the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<OtkError> for Failure {
    fn from(e: OtkError) -> Self {
        let code = match e {
            OtkError::ConvergenceFailure { .. } => EXIT_NO_CONVERGENCE,
            OtkError::InternalConsistency(_) => EXIT_VIOLATION,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn parse_factors(s: &str) -> Result<FactorSpec, Failure> {
    let blocks = s
        .split(';')
        .map(|block| {
            block
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| config_error(format!("bad factor list {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let d = blocks[0].len();
    if blocks.iter().any(|b| b.len() != d || b.contains(&0)) {
        return Err(config_error(format!("every block needs {d} positive factor sizes in {s:?}")));
    }
    Ok(FactorSpec::gaussian(&blocks))
}

fn load(path: &Path) -> Result<OperatorTuple, Failure> {
    read_tuple(path).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn wrote(path: &Path, a: &OperatorTuple) {
    println!("wrote d={} n={} to {}", a.d(), a.n(), path.display());
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Dist { tuple, tol, json } => {
            if tol.is_nan() || tol <= 0.0 {
                return Err(config_error("--tol must be positive"));
            }
            let a = load(&tuple)?;
            let opts = SolverOptions {
                tol_accept: tol,
                ..SolverOptions::default()
            };
            let r = dist_to_scalars(&a, &opts)?;
            if json {
                println!("{}", to_json_pretty(&r));
            } else {
                println!("dist2        {:.16e}", r.dist2);
                println!("dist         {:.16e}", r.dist);
                println!("lower_bound  {:.16e}", r.lower_bound);
                for (j, z) in r.z0.0.iter().enumerate() {
                    println!("z0[{j}]        {:.16e} {:+.16e}i", z.re, z.im);
                }
                println!("converged    {}", r.converged);
            }
            Ok(if r.converged { 0 } else { EXIT_NO_CONVERGENCE })
        }
        Command::Maxvar { tuple, restarts, seed, json } => {
            if restarts == 0 {
                return Err(config_error("--restarts must be at least 1"));
            }
            let a = load(&tuple)?;
            let opts = SolverOptions {
                restarts,
                seed,
                ..SolverOptions::default()
            };
            let r = max_variance(&a, &opts)?;
            if json {
                println!("{}", to_json_pretty(&r));
            } else {
                println!("maxvar        {:.16e}", r.value);
                println!("best_restart  {} of {}", r.best_restart, r.restarts_used);
            }
            Ok(0)
        }
        Command::Vrange {
            tuple,
            samples,
            boundary,
            seed,
            out,
            kind,
        } => {
            let a = load(&tuple)?;
            let s = match kind {
                Kind::W => sample_w(&a, samples, seed, boundary)?,
                Kind::V => sample_v(&a, samples, seed, boundary)?,
            };
            s.write_csv(&out)?;
            println!("wrote {} points to {}", s.len(), out.display());
            Ok(0)
        }
        Command::Check { tuple, class } => {
            let a = load(&tuple)?;
            let r = check_equality(&a, class, &SolverOptions::default())?;
            println!("{}", to_json_pretty(&r));
            let violations = r.violations();
            for v in &violations {
                eprintln!("violation: {v}");
            }
            Ok(if !r.dist_converged {
                EXIT_NO_CONVERGENCE
            } else if !violations.is_empty() {
                EXIT_VIOLATION
            } else {
                0
            })
        }
        Command::Gen(Gen::Doubly {
            factors,
            seed,
            conjugate,
            out,
        }) => {
            let mut spec = parse_factors(&factors)?;
            if conjugate {
                spec = spec.with_conjugation(Conjugation::Random);
            }
            let (a, _) = gen_doubly(&spec, seed)?;
            write_tuple(&out, &a)?;
            wrote(&out, &a);
            Ok(0)
        }
        Command::Gen(Gen::Toeplitz { symbols, n, out }) => {
            let symbols = symbols
                .iter()
                .map(|s| s.parse::<ToeplitzSymbol>())
                .collect::<Result<Vec<_>, _>>()?;
            let a = gen_toeplitz(&symbols, n)?;
            write_tuple(&out, &a)?;
            wrote(&out, &a);
            Ok(0)
        }
        Command::Gallery { name, out } => {
            let a = gallery(name);
            write_tuple(&out, &a)?;
            wrote(&out, &a);
            Ok(0)
        }
        Command::Suite { config, out } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                    SuiteConfig::from_json(&text)?
                }
                None => SuiteConfig::default(),
            };
            if out.is_some() {
                cfg.output = out;
            }
            let summary = run_suite(&cfg)?;
            for c in &summary.criteria {
                println!("{}", c.line());
                for note in &c.notes {
                    println!("        {note}");
                }
            }
            if let Some(x) = &summary.exploratory {
                println!(
                    "exploratory {}: {} instances, largest gap {:.3e}",
                    x.label, x.instances, x.max_gap
                );
            }
            Ok(summary.exit_code as u8)
        }
    }
}

fn threads_from_env() -> Result<usize, Failure> {
    match std::env::var("OTK_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| config_error(format!("OTK_THREADS must be a non-negative integer, got {v:?}"))),
        _ => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let outcome = threads_from_env()
        .and_then(|n| with_threads(n, || run(cli)).map_err(Failure::from))
        .and_then(|r| r);
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("otk: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
