use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qobserver_cli::{Overrides, Run, RunError, RunReport};

/// Analyse linear quantum plants, synthesise direct-coupling coherent
/// observers and simulate the coupled system.
///
/// Exit status: 0 when every check passes, 1 when the plant fails the
/// observer conditions or the observer does not converge, 2 for input errors.
#[derive(Parser)]
#[command(name = "qobs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Output {
    /// Also write the JSON run report here
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Print the JSON run report instead of the summary
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the plant conditions and decompose the plant
    Analyze {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Design the observer and write its matrices as CSV
    Synthesize {
        config: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Simulate plant and observer; writes zp.csv, zo.csv, zo_avg.csv,
    /// observer.csv and report.json
    Simulate {
        config: PathBuf,
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Run the bundled six-mode example end to end
    Demo {
        /// Write the simulation outputs here
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

fn execute(command: Command) -> Result<(RunReport, Output), RunError> {
    Ok(match command {
        Command::Analyze {
            config,
            overrides,
            output,
        } => (Run::load(&config, &overrides)?.analyze()?, output),
        Command::Synthesize {
            config,
            out,
            overrides,
            output,
        } => (Run::load(&config, &overrides)?.synthesize(&out)?, output),
        Command::Simulate {
            config,
            out_dir,
            overrides,
            output,
        } => (Run::load(&config, &overrides)?.simulate(&out_dir)?, output),
        Command::Demo { out_dir, output } => (Run::demo(out_dir.as_deref())?, output),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(cli.command).and_then(|(report, output)| {
        if let Some(path) = &output.report {
            report.write(path)?;
        }
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        let mut out = std::io::stdout().lock();
        if output.json {
            let _ = writeln!(out, "{}", report.to_json());
        } else {
            let _ = writeln!(out, "{}", report.summary());
            for f in &report.failures {
                eprintln!("condition failed: {f}");
            }
        }
        Ok(report.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
