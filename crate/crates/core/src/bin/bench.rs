//! Command-line front end of the benchmark harness.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmae::bench::{grid_search_ab, report_dir, run_grid, CellStatus, RunConfig};
use pmae::data::{load_dataset, preprocess};
use pmae::eval::ReportFormat;
use pmae::missingness::MaskMatrix;
use pmae::nn::{load_checkpoint, token_mixing_magnitudes, write_magnitudes};

// Activation buffers are freed and reallocated every step; the system
// allocator returns them to the OS each time.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "bench", about = "Run and report imputation benchmark grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a grid config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Cells run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Search the logit masking parameters over a full (a, b) factorial.
    GridAb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        a: Vec<f64>,
        #[arg(long, num_args = 1.., required = true)]
        b: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Re-emit the results of a finished run.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
    /// Model diagnostics.
    Diag {
        #[command(subcommand)]
        what: Diag,
    },
}

#[derive(Subcommand)]
enum Diag {
    /// Token-mixing magnitudes per block and column, as CSV on stdout.
    Mixing(MixingArgs),
}

#[derive(Args)]
struct MixingArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Table to evaluate on; a synthetic batch is used when absent.
    #[arg(long, requires = "schema")]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    schema: Option<PathBuf>,
    /// Rows evaluated.
    #[arg(long, default_value_t = 256)]
    rows: usize,
}

fn mixing(args: MixingArgs) -> pmae::Result<()> {
    let params = load_checkpoint(&args.checkpoint)?;
    let d = params.arch.d;
    let (x, names): (ndarray::Array2<f64>, Vec<String>) = match (&args.data, &args.schema) {
        (Some(data), Some(schema)) => {
            let ds = preprocess(&load_dataset(data, schema)?)?;
            if ds.n_cols() != d {
                return Err(pmae::Error::Shape {
                    expected: format!("{d} columns"),
                    got: format!("{}", ds.n_cols()),
                });
            }
            let rows = args.rows.min(ds.n_rows());
            let names = ds.schema.iter().map(|c| c.name.clone()).collect();
            (ds.values.slice(ndarray::s![..rows, ..]).to_owned(), names)
        }
        _ => {
            let x = ndarray::Array2::from_shape_fn((args.rows, d), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0);
            (x, (0..d).map(|j| format!("x{j}")).collect())
        }
    };
    let rows = token_mixing_magnitudes(&params, x.view(), &MaskMatrix::ones(x.nrows(), d));
    write_magnitudes(io::stdout().lock(), &rows, &names)
}

fn run(cli: Cli) -> pmae::Result<()> {
    match cli.command {
        Command::Run { config, jobs } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = run_grid(&cfg, jobs)?;
            let failed = outcome
                .manifest
                .cells
                .iter()
                .filter(|c| matches!(c.status, CellStatus::Failed { .. }))
                .count();
            eprintln!(
                "{} cells, {} failed; results in {}",
                outcome.manifest.cells.len(),
                failed,
                cfg.output_dir.display()
            );
            io::stdout()
                .write_all(pmae::eval::report::markdown_table(&outcome.summary).as_bytes())
                .map_err(|e| pmae::Error::Config(e.to_string()))
        }
        Command::GridAb { config, a, b, jobs } => {
            let cfg = RunConfig::load(&config)?;
            let surface = grid_search_ab(&cfg, &a, &b, jobs)?;
            let mut out = io::stdout().lock();
            for p in surface {
                let _ = writeln!(out, "a={} b={} imp_acc={:.4} ± {:.4} (runs {})", p.a, p.b, p.imp_acc_mean, p.imp_acc_std, p.runs);
            }
            Ok(())
        }
        Command::Report { dir, format } => report_dir(dir, format, io::stdout().lock()),
        Command::Diag { what: Diag::Mixing(args) } => mixing(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
