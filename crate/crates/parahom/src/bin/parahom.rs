use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parahom::harness::{render_report, run, validate, ExperimentConfig, PipelineKind};
use parahom::Error;

/// Higher-order periodic homogenization experiments.
#[derive(Parser)]
#[command(name = "parahom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file and print the cost estimate without solving.
    Validate { config: PathBuf },
    /// Tabulate the effective operator of a config's operator.
    CellTable {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a rates CSV as plot data.
    Report {
        rates: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
    ExperimentConfig::from_json(&text)
}

fn execute(mut cfg: ExperimentConfig, workers: Option<usize>, out: Option<PathBuf>) -> Result<bool, Error> {
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let m = run(&cfg, &dir)?;
    for line in &m.summary {
        println!("{line}");
    }
    println!("{} ({})", if m.pass { "PASS" } else { "FAIL" }, dir.join("manifest.json").display());
    Ok(m.pass)
}

fn main_inner(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { config, workers, out } => execute(load(&config)?, workers, out),
        Command::CellTable { config, workers, out } => {
            let mut cfg = load(&config)?;
            cfg.pipeline.kind = PipelineKind::CellTable;
            execute(cfg, workers, out)
        }
        Command::Validate { config } => {
            let r = validate(&load(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            Ok(true)
        }
        Command::Report { rates, out } => {
            let csv = std::fs::read_to_string(&rates)
                .map_err(|e| Error::config(rates.display().to_string(), format!("cannot read rates: {e}")))?;
            let data = render_report(&csv)?;
            match out {
                Some(p) => std::fs::write(p, data)?,
                None => print!("{data}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
