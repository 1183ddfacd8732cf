use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mimalloc::MiMalloc;
use monopole_lab::{configure_threads, resolve, run, CliError, RunReport, KEYS, THREADS_ENV};

#[global_allocator]
static GLOBAL: MiMalloc = MiMalloc;

#[derive(Debug, Parser)]
#[command(
    name = "monopole-lab",
    version,
    about = "Monopole simulations and estimate-verification sweeps",
    after_help = after_help()
)]
struct Args {
    /// simulate, residuals, verify-null, verify-cone, verify-norms,
    /// scaling or probe-bilinear
    command: String,

    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// `key=value` overrides, applied after the file.
    overrides: Vec<String>,
}

fn after_help() -> String {
    let mut s = String::from("Configuration keys:\n");
    for (k, doc) in KEYS {
        s.push_str(&format!("  {k:<18} {doc}\n"));
    }
    s.push_str(&format!(
        "\n{THREADS_ENV} caps the number of worker threads."
    ));
    s
}

fn drive(args: &Args) -> Result<RunReport, CliError> {
    configure_threads()?;
    let cfg = resolve(
        &args.command,
        args.config.as_deref(),
        args.seed,
        args.out.as_deref(),
        &args.overrides,
    )?;
    run(&cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match drive(&args) {
        Ok(report) => {
            for c in &report.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {}: {}", c.name, c.detail);
            }
            println!(
                "wrote {} files in {:.2} s",
                report.files.len(),
                report.wall.as_secs_f64()
            );
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("monopole-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
