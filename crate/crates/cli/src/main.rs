//! `hts`: sampling-rate curves, stratified augment plans, representativeness
//! audits, O-D analysis and Monte Carlo checks for household travel surveys.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{FixtureCmd, OdArgs, PlanArgs, RatesArgs, RmseArgs, SimulateArgs, SmithArgs, SweepArgs};

#[derive(Parser)]
#[command(name = "hts", version, about = "Household travel survey sample-size toolkit")]
struct Cli {
    /// Directory for JSON and CSV outputs.
    #[arg(long, global = true, env = "HTS_OUT_DIR", default_value = "hts-out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Required sampling rate against interchange size, per CV and confidence.
    Rates(RatesArgs),
    /// Stratified augment-sample plan from household microdata.
    Smith(SmithArgs),
    /// Percent RMSE of survey marginals against reference marginals.
    Rmse(RmseArgs),
    /// O-D matrix and per-cell required sampling rates.
    Od(OdArgs),
    /// Required rate at every time/mode/purpose disaggregation level.
    Sweep(SweepArgs),
    /// Core-augment survey plan across regions.
    Plan(PlanArgs),
    /// Monte Carlo sampling from a synthetic population.
    Simulate(SimulateArgs),
    /// Emit bundled or generated data sets.
    #[command(subcommand)]
    Fixture(FixtureCmd),
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let body = json!({
        "schema_version": report::SCHEMA_VERSION,
        "error": { "kind": kind, "message": message, "exit_code": code },
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion)
                || e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            {
                e.exit();
            }
            return fail("usage", e.to_string().trim().to_string(), EXIT_CONFIG);
        }
    };
    let sink = report::Sink::new(&cli.out_dir);
    let result = match cli.command {
        Command::Rates(a) => commands::rates(a, &sink),
        Command::Smith(a) => commands::smith(a, &sink),
        Command::Rmse(a) => commands::rmse(a, &sink),
        Command::Od(a) => commands::od(a, &sink),
        Command::Sweep(a) => commands::sweep(a, &sink),
        Command::Plan(a) => commands::plan(a, &sink),
        Command::Simulate(a) => commands::simulate(a, &sink),
        Command::Fixture(c) => commands::fixture(c, &sink),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}");
            match err.chain().find_map(|e| e.downcast_ref::<hts_core::Error>()) {
                Some(e) if e.is_config() => fail(e.kind(), message, EXIT_CONFIG),
                Some(e) => fail(e.kind(), message, EXIT_DATA),
                None if err.chain().any(|e| e.is::<std::io::Error>()) => fail("io", message, EXIT_DATA),
                None => fail("internal", message, EXIT_INTERNAL),
            }
        }
    }
}
