use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mechkit::scenario::{self, ScenarioConfig, ScenarioOutcome};

mod bundled;

#[derive(Parser)]
#[command(
    name = "mechkit",
    version,
    about = "Envelope, screening and Blackwell-order experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its reports.
    Run {
        /// Path to a scenario JSON file, or the name of a bundled scenario.
        config: String,
        /// Override the grid size.
        #[arg(long)]
        grid: Option<usize>,
        /// Output directory (default: the config's output_dir, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// List bundled scenarios.
    List,
    /// Run every bundled scenario and summarise the verdicts.
    CheckBundled {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

fn load(config: &str) -> Result<ScenarioConfig> {
    let text = if Path::new(config).exists() {
        fs::read_to_string(config).with_context(|| format!("reading {config}"))?
    } else if let Some((_, text)) = bundled::BUNDLED.iter().find(|(name, _)| *name == config) {
        text.to_string()
    } else {
        anyhow::bail!("no such file or bundled scenario: {config}");
    };
    ScenarioConfig::from_json(&text).with_context(|| format!("parsing {config}"))
}

fn write_reports(outcome: &ScenarioOutcome, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if format != Format::Csv {
        let mut text = serde_json::to_string_pretty(outcome)?;
        text.push('\n');
        fs::write(dir.join("report.json"), text)?;
    }
    if format != Format::Json {
        for table in &outcome.tables {
            let path = dir.join(format!("{}.csv", table.name));
            let mut w = csv::Writer::from_path(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn run(
    config: &str,
    grid: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    format: Format,
) -> Result<bool> {
    let mut cfg = load(config)?;
    if let Some(n) = grid {
        cfg.grid = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let outcome = scenario::run_scenario(&cfg).with_context(|| format!("running {}", cfg.name))?;
    write_reports(&outcome, &dir, format)?;
    println!(
        "{}: expected {}, observed {} [{}] -> {}",
        outcome.name,
        outcome.expected,
        outcome.observed,
        if outcome.passed { "ok" } else { "MISMATCH" },
        dir.display()
    );
    Ok(outcome.passed)
}

fn list() -> Result<()> {
    println!("{:<32} {:<15} {:<40}", "name", "expected", "reference");
    for (name, text) in bundled::BUNDLED {
        let cfg = ScenarioConfig::from_json(text).with_context(|| format!("bundled {name}"))?;
        println!("{:<32} {:<15} {}", cfg.name, cfg.expected, cfg.reference);
    }
    Ok(())
}

fn check_bundled(out: Option<PathBuf>) -> Result<bool> {
    let root = out.unwrap_or_else(|| PathBuf::from("out"));
    let mut all = true;
    for (name, _) in bundled::BUNDLED {
        all &= run(name, None, Some(root.join(name)), None, Format::Both)?;
    }
    Ok(all)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            grid,
            out,
            seed,
            format,
        } => run(&config, grid, out, seed, format),
        Command::List => list().map(|_| true),
        Command::CheckBundled { out } => check_bundled(out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
