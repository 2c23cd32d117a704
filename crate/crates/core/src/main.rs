use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nanorc::cli::{cmd_run, cmd_sweep, cmd_trace, DEFAULT_TRACE_STRIDE};
use nanorc::config::ReservoirKind;
use nanorc::experiment::StageError;

#[derive(Parser)]
#[command(
    name = "nanorc",
    version,
    about = "Nanomagnet array reservoir computer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report, states, weights and config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Same as `run` with the echo state network reservoir.
    Esn {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a dense m_z trace of selected magnets over the input stream.
    Trace {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated magnet indices; all magnets when omitted.
        #[arg(long, value_delimiter = ',')]
        indices: Vec<usize>,
        /// Integrator steps between trace rows.
        #[arg(long, default_value_t = DEFAULT_TRACE_STRIDE)]
        stride: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per grid point and write summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// e.g. "task.seed=1..=10;material.ku_j_per_m3=*0.5,*1,*2"
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: StageError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::FAILURE
}

fn run(config: PathBuf, out: Option<PathBuf>, kind: Option<ReservoirKind>) -> ExitCode {
    match cmd_run(&config, out.as_deref(), kind) {
        Ok((exp, dir)) => {
            let r = exp.report();
            println!("run {} ({:?}) -> {}", r.run_id, r.reservoir, dir.display());
            println!(
                "train accuracy {:.4}  test accuracy {:.4} ({} / {} test errors)",
                r.train_accuracy, r.test_accuracy, r.test_errors, r.n_test
            );
            if let Some(q) = r.quantized {
                println!(
                    "{}-bit crossbar: train {:.4}  test {:.4}",
                    q.bits, q.train_accuracy, q.test_accuracy
                );
            }
            if let Some(c) = r.coupling {
                println!("coupling ratio {:.3} ({})", c.ratio, c.regime);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => run(config, out, None),
        Command::Esn { config, out } => run(config, out, Some(ReservoirKind::Esn)),
        Command::Trace {
            config,
            indices,
            stride,
            out,
        } => match cmd_trace(&config, &indices, stride, out.as_deref()) {
            Ok(path) => {
                println!("trace -> {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Sweep {
            config,
            grid,
            workers,
            out,
        } => match cmd_sweep(&config, &grid, workers, out.as_deref()) {
            Ok((rows, path)) => {
                let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
                println!(
                    "{} points ({failed} failed) -> {}",
                    rows.len(),
                    path.display()
                );
                if failed == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => fail(e),
        },
    }
}
