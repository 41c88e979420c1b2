use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use emenclose::config::parse_config;
use emenclose::pipeline::{run_forward, run_indicator, run_sweep, RunReport};
use emenclose::validate::run_validate;
use emenclose::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Forward,
    Indicator,
    Sweep,
    Validate,
}

/// Enclosure-method obstacle reconstruction from synthetic impedance data.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Configuration file (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownStrategy { .. } => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn run(cli: &Cli) -> Result<RunReport, Error> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(out) = &cli.out {
        config.output_dir = out.display().to_string();
    }
    let out = PathBuf::from(&config.output_dir);
    match cli.command {
        Command::Forward => run_forward(&config, &out),
        Command::Indicator => run_indicator(&config, &out),
        Command::Sweep => run_sweep(&config, &out),
        Command::Validate => {
            let (report, validation) = run_validate(&config, &out)?;
            for c in &validation.criteria {
                println!("{c}");
            }
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(report) => {
            log::info!("finished in {:.2} s", start.elapsed().as_secs_f64());
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("validation failed");
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
