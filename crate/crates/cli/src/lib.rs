//! Command-line front end for unique component analysis: CSV ingestion,
//! fitting, transforming, synthetic fixtures and the backend benchmark.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod model_file;
pub mod synth;

pub use cli::{Cli, Command};
pub use error::{CliError, Result};

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(args) => {
            for out in commands::fit(args)? {
                log::info!("wrote {}", out.dir.display());
            }
        }
        Command::Transform(args) => {
            let scores = commands::transform_cmd(args)?;
            log::info!(
                "wrote {} score rows to {}",
                scores.nrows(),
                args.out.display()
            );
        }
        Command::Synth(args) => {
            commands::synth_cmd(args)?;
            log::info!("wrote fixture to {}", args.out.display());
        }
        Command::Bench(args) => {
            let report = commands::bench_cmd(args)?;
            for cell in &report.cells {
                match (&cell.skipped, cell.speedup()) {
                    (Some(reason), _) => println!("p={}: skipped ({reason})", cell.p),
                    (None, Some(s)) => println!(
                        "p={}: median dense {:.4}s, product-svd {:.4}s, speedup {:.2}",
                        cell.p,
                        cell.median_dense().unwrap_or(f64::NAN),
                        cell.median_product().unwrap_or(f64::NAN),
                        s
                    ),
                    (None, None) => println!("p={}: no samples", cell.p),
                }
            }
        }
    }
    Ok(())
}
