use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use intrasplit::experiment::{self, Manifest, SweepParam};
use intrasplit::Error;

/// One-class feature learning by intra-class splitting.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every (class, method, seed) cell; writes results.csv and aggregate.csv.
    Run { manifest: PathBuf },
    /// Sweep the atypical ratio ρ (percent); writes rho_curve.csv.
    SweepRho {
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0, 10.0, 20.0, 30.0, 50.0])]
        values: Vec<f64>,
    },
    /// Sweep β₁ = β₂; writes beta_curve.csv.
    SweepBeta {
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1])]
        values: Vec<f64>,
    },
    /// Render a curve CSV as an SVG line chart with error bars.
    ExportPlot {
        curve: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write the typical/atypical split of one class's training set.
    SplitReport {
        manifest: PathBuf,
        #[arg(long)]
        class: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How many lowest and highest scoring samples to print.
        #[arg(long, default_value_t = 10)]
        extremes: usize,
    },
}

/// 2 for problems with the configuration or input files, 1 otherwise.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Io { .. }
        | Error::Format(_)
        | Error::Csv(_)
        | Error::Shape(_)
        | Error::Empty(_)
        | Error::InsufficientSamples { .. } => 2,
        _ => 1,
    }
}

fn load(path: &Path) -> Result<Manifest, Error> {
    Manifest::load(path)
}

fn report_sweep(points: &[experiment::CurvePoint], param: SweepParam) -> u8 {
    let mut failures = 0;
    for p in points {
        failures += p.summary.failures;
        match p.summary.overall {
            Some((m, s)) => println!("{} = {}: {:.2} ± {:.2}", param.as_str(), p.value, 100.0 * m, 100.0 * s),
            None => println!("{} = {}: no successful runs", param.as_str(), p.value),
        }
    }
    u8::from(failures > 0)
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Run { manifest } => {
            let m = load(&manifest)?;
            let report = experiment::cmd_run(&m)?;
            for &method in &report.methods {
                match report.summary(method).overall {
                    Some((mean, std)) => println!("{method:>9}: {:.2} ± {:.2}", 100.0 * mean, 100.0 * std),
                    None => println!("{method:>9}: no successful runs"),
                }
            }
            for c in report.cells.iter().filter(|c| c.bacc.is_err()) {
                eprintln!(
                    "class {} {} seed {}: {}",
                    c.normal_class,
                    c.method,
                    c.seed,
                    c.bacc.as_ref().unwrap_err()
                );
            }
            println!("wrote {}", m.output_dir.display());
            Ok(u8::from(report.failures() > 0))
        }
        Command::SweepRho { manifest, values } => {
            let m = load(&manifest)?;
            Ok(report_sweep(&experiment::cmd_sweep(&m, SweepParam::Rho, &values)?, SweepParam::Rho))
        }
        Command::SweepBeta { manifest, values } => {
            let m = load(&manifest)?;
            Ok(report_sweep(&experiment::cmd_sweep(&m, SweepParam::Beta, &values)?, SweepParam::Beta))
        }
        Command::ExportPlot { curve, output } => {
            experiment::cmd_export_plot(&curve, &output)?;
            println!("wrote {}", output.display());
            Ok(0)
        }
        Command::SplitReport {
            manifest,
            class,
            seed,
            extremes,
        } => {
            let m = load(&manifest)?;
            let r = experiment::cmd_split_report(&m, class, seed, extremes)?;
            println!("lowest similarity:");
            for (i, s) in &r.lowest {
                println!("  {i:>6}  {s:.6}");
            }
            println!("highest similarity:");
            for (i, s) in &r.highest {
                println!("  {i:>6}  {s:.6}");
            }
            println!("wrote {}", r.path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
