use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invmean::experiment::{self, Overrides};
use invmean::Discretization;

#[derive(Parser)]
#[command(
    name = "invmean",
    version,
    about = "Invariant means of families of quasiarithmetic means"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate a family on a measure; writes a trace CSV and a result JSON.
    Iterate {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (defaults to the spec's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Sample the contraction curve of a generator set as `t,d` CSV.
    Separation {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the invariant mean of ½(δ_a + δ_b) with Gauss's AGM.
    DemoAgm {
        #[arg(allow_negative_numbers = true)]
        a: f64,
        #[arg(allow_negative_numbers = true)]
        b: f64,
        /// Use the arithmetic-harmonic family; the reference becomes √(ab).
        #[arg(long)]
        harmonic: bool,
        #[arg(long, default_value_t = 2)]
        nodes: usize,
    },
}

/// `IM_THREADS`: unset uses every core, 0 runs sequentially, n caps the pool.
fn thread_setting() -> Result<Option<usize>, String> {
    match std::env::var("IM_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("IM_THREADS: expected a non-negative integer, got {s:?}")),
    }
}

fn run(cli: Cli, parallel: bool) -> ExitCode {
    match cli.command {
        Command::Iterate {
            spec,
            out,
            nodes,
            tol,
            max_iter,
        } => {
            let ov = Overrides {
                nodes,
                tol,
                max_iter,
                out,
                parallel,
            };
            match experiment::run_iterate(&spec, &ov) {
                Ok(outcome) => {
                    println!("{}", outcome.summary());
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Separation { spec, out } => {
            match experiment::run_separation(&spec, out.as_deref()) {
                Ok(outcome) => {
                    println!(
                        "wrote {} rows to {}",
                        outcome.curve.t_grid.len(),
                        outcome.path.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::DemoAgm {
            a,
            b,
            harmonic,
            nodes,
        } => {
            let disc = match Discretization::new(nodes) {
                Ok(d) => d.parallel(parallel),
                Err(e) => {
                    eprintln!("error: nodes: {e}");
                    return ExitCode::from(1);
                }
            };
            match experiment::demo_agm(a, b, harmonic, &disc) {
                Ok(d) => {
                    let name = if harmonic { "GM" } else { "AGM" };
                    println!("K={:.16e}", d.k_value);
                    println!("{name}={:.16e}", d.reference);
                    println!("diff={:.16e}", (d.k_value - d.reference).abs());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1; 2 is reserved for unconverged runs.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    let threads = match thread_setting() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match threads {
        None => run(cli, true),
        Some(n) => {
            let pool = match rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
            {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: IM_THREADS: {e}");
                    return ExitCode::from(1);
                }
            };
            pool.install(|| run(cli, n > 0))
        }
    }
}
