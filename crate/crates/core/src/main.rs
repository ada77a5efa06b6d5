use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use tes_core::harness::{compare_models, dump_graph, run_scenario, sweep_csv, sweep_grid, write_outputs, write_report};
use tes_core::scenario::Scenario;
use tes_core::{Result, TesError};

/// Fixed-grid and moving-boundary simulation of a phase-change thermal
/// energy storage device.
#[derive(Parser)]
#[command(name = "tes-sim", version)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's selected models and write trajectories.
    Simulate { scenario: PathBuf },
    /// Run both models and write the comparison report.
    Compare { scenario: PathBuf },
    /// Grid-convergence and timing sweep over FG section counts.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated section counts; defaults to the scenario's list.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Repetitions per configuration.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Write incidence matrix, input map and edge table.
    DumpGraph { scenario: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    let out = &cli.out_dir;
    match cli.command {
        Command::Simulate { scenario } => {
            let scn = Scenario::load(&scenario)?;
            let runs = run_scenario(&scn)?;
            for p in write_outputs(out, &scn, &runs)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Compare { scenario } => {
            let scn = Scenario::load(&scenario)?;
            let (runs, report) = compare_models(&scn)?;
            write_outputs(out, &scn, &runs)?;
            write_report(out, &report)?;
            print!("{}", report.to_text());
        }
        Command::Sweep { scenario, n, reps } => {
            let scn = Scenario::load(&scenario)?;
            let defaults = scn.sweep.clone();
            let sections = n
                .or_else(|| defaults.as_ref().map(|s| s.sections.clone()))
                .ok_or_else(|| TesError::invalid("--n", "no section list given and none in the scenario"))?;
            let reps = reps.or_else(|| defaults.map(|s| s.repetitions)).unwrap_or(1);
            let rows = sweep_grid(&scn, &sections, reps)?;
            let csv = sweep_csv(&rows);
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join(format!("{}_sweep.csv", scn.name)), &csv)?;
            print!("{csv}");
        }
        Command::DumpGraph { scenario } => {
            let scn = Scenario::load(&scenario)?;
            for p in dump_graph(out, &scn)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
