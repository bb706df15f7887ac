use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use darboux_core::pipeline::{exit_code_for, run, Command, Outcome};
use darboux_core::scenario::{Overrides, Scenario};

/// Scenario-driven checks of generalized Darboux transformations.
#[derive(Parser, Debug)]
#[command(name = "darboux", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Scenario file (JSON); the bundled oscillation scenario when omitted
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory; overrides the scenario's `output`, default `out`
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the randomized identity samples
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    grid_points: Option<usize>,

    #[arg(long, global = true)]
    hbar: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Special-function, Crum and Hermiticity identities
    Identities,
    /// Schrodinger residuals of original and transformed states
    Residuals,
    /// Potential correction samples and the extremum track
    Potential,
    /// Crank-Nicolson cross-check of the exact solution
    Evolve,
    /// All of the above in one report
    Report,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Identities => Command::Identities,
            Sub::Residuals => Command::Residuals,
            Sub::Potential => Command::Potential,
            Sub::Evolve => Command::Evolve,
            Sub::Report => Command::Report,
        }
    }
}

const CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match load(&cli) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(CONFIG);
        }
    };
    let command = Command::from(cli.command);
    let outcome = match run(command, &scenario) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e) as u8);
        }
    };
    let dir = cli.out.clone().or_else(|| scenario.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| "out".into());
    if let Err(e) = write(&dir, &outcome) {
        eprintln!("error: cannot write {}: {e}", dir.display());
        return ExitCode::from(CONFIG);
    }
    summarize(&outcome, &dir);
    ExitCode::from(outcome.exit_code() as u8)
}

fn load(cli: &Cli) -> Result<Scenario, String> {
    let mut sc = match &cli.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            Scenario::from_json(&text).map_err(|e| e.to_string())?
        }
        None => Scenario::default_scenario(),
    };
    let overrides = Overrides { seed: cli.seed, grid_points: cli.grid_points, hbar: cli.hbar, output: None };
    sc.apply(&overrides).map_err(|e| e.to_string())?;
    Ok(sc)
}

fn write(dir: &Path, outcome: &Outcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

fn summarize(outcome: &Outcome, dir: &Path) {
    let r = &outcome.report;
    for c in &r.checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        let op = match c.bound {
            darboux_core::pipeline::Bound::Below => "<",
            darboux_core::pipeline::Bound::Above => ">",
        };
        println!("{mark}  {:<44} {:>12.3e} {op} {:.1e}", c.name, c.value, c.tolerance);
    }
    if r.passed {
        println!("{}: all {} checks passed; files in {}", r.command.name(), r.checks.len(), dir.display());
    } else {
        eprintln!("{}: {} of {} checks failed", r.command.name(), r.failures.len(), r.checks.len());
        for f in &r.failures {
            eprintln!("  {f}");
        }
    }
}
