use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lagphase::verify::DEFAULT_SEED;
use lagphase::NewtonConfig;
use lagphase_cli::{run, Command, RunConfig};

/// Dirichlet solver for the Lagrangian phase operator.
#[derive(Debug, Parser)]
#[command(name = "lagphase", version)]
struct Args {
    /// Problem file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory for report.json and CSV fields.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Newton residual tolerance on the scaled G-form.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Newton iterations per continuity step.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum, default_value_t = Command::Solve)]
    command: Command,
    /// Grid CSV input for `forward` and `check-cone`.
    #[arg(long)]
    field: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut newton = NewtonConfig::default();
    if let Some(tol) = args.tol {
        newton.residual_tol = tol;
    }
    if let Some(n) = args.max_iters {
        newton.max_iters = n;
    }
    let config = RunConfig {
        command: args.command,
        spec_path: args.spec,
        output_dir: args.out,
        newton,
        seed: args.seed,
        field_path: args.field,
    };
    let report = run(&config);
    match &report.error {
        Some(e) => eprintln!("lagphase {}: {e}", config.command.name()),
        None => eprintln!(
            "lagphase {}: {:?}, report in {}",
            config.command.name(),
            report.status,
            config.output_dir.join(lagphase_cli::run::REPORT_FILE).display()
        ),
    }
    ExitCode::from(report.exit_code as u8)
}
