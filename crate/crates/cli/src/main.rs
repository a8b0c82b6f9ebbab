use std::process::ExitCode;

use clap::Parser;
use mfkg_cli::cli::{thread_count, Cli};
use mfkg_cli::{run_experiment, CliError};

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = thread_count()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }
    let cfg = cli.command.resolve()?;
    let report = run_experiment(&cfg)?;
    println!(
        "{}: wrote {} files to {}",
        report.experiment.name(),
        report.manifest.files.len() + 1,
        report.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
