use clap::{Args, Parser, Subcommand};
use fadingmac::scenario::{apply_overrides, parse_document, parse_scenario, sweep_csv, Engine, SweepSpec};
use fadingmac::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

/// Analytic and simulated performance of unslotted 802.15.4 CSMA/CA over fading channels.
#[derive(Parser)]
#[command(name = "fadingmac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the analytic model.
    Analyze(Common),
    /// Run the Monte Carlo simulator.
    Simulate(Common),
    /// Run both engines side by side.
    Compare(Common),
    /// Run the `[sweep]` table of the scenario file.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a scenario field, e.g. `--set channel.sigma=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write `<id>_<command>.csv` here instead of printing to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed of the simulator.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulator replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Sweep points evaluated concurrently (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn run(cli: Cli) -> Result<()> {
    let (name, common, engine) = match &cli.command {
        Command::Analyze(c) => ("analyze", c, Some(Engine::Analytic)),
        Command::Simulate(c) => ("simulate", c, Some(Engine::Simulate)),
        Command::Compare(c) => ("compare", c, Some(Engine::Compare)),
        Command::Sweep(c) => ("sweep", c, None),
    };
    let text = std::fs::read_to_string(&common.config)?;
    let mut overrides = common.set.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("sim.master_seed={s}"));
    }
    if let Some(r) = common.reps {
        overrides.push(format!("sim.replications={r}"));
    }
    // fail fast, with line numbers, on a bad base scenario
    let scenario = parse_scenario(&text, &overrides)?;
    for w in &scenario.warnings {
        eprintln!("warning: {w}");
    }
    let mut doc = parse_document(&text)?;
    apply_overrides(&mut doc, &overrides)?;

    let spec = match engine {
        Some(engine) => SweepSpec {
            engine,
            params: Vec::new(),
            max_points: 1,
        },
        None => SweepSpec::from_document(&doc)?
            .ok_or_else(|| Error::Validation("the scenario has no [sweep] table".into()))?,
    };
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let csv = sweep_csv(&doc, &spec, workers)?;
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}_{name}.csv", scenario.id));
            std::fs::write(&path, csv)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = match &e {
                Error::Parse { line, .. } => *line,
                _ => None,
            };
            let summary = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string(), "line": line }
            });
            eprintln!("{summary}");
            ExitCode::FAILURE
        }
    }
}
