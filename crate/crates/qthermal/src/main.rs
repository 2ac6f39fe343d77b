use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qthermal::config::{ScenarioConfig, ScenarioKind};
use qthermal::{emit, scenarios};

/// Exact-diagonalization experiments on equilibration and thermalization.
#[derive(Debug, Parser)]
#[command(name = "qthermal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground state of one Hamiltonian evolved under another.
    Quench(RunArgs),
    /// Local channel applied to a thermal state.
    Rethermalize(RunArgs),
    /// Thermal state of one Hamiltonian evolved under a perturbed one.
    Perturb(RunArgs),
    /// Frontier of the cube-average certifier over a parameter grid.
    Certify(RunArgs),
    /// Spectral, correlation and transport diagnostics of one state.
    Diagnostics(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the size sweep, e.g. `6,8,10`.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

fn run(kind: ScenarioKind, args: RunArgs) -> qthermal::Result<ExitCode> {
    qthermal::configure_threads()?;
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if cfg.scenario != kind {
        return Err(qthermal::Error::Config(format!(
            "subcommand {} given a {} configuration",
            kind.name(),
            cfg.scenario.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.analysis.seed = Some(seed);
    }
    if let Some(sizes) = args.sizes {
        cfg.analysis.size_sweep = sizes;
    }
    let record = scenarios::run(&cfg)?;
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    let written = emit::emit_reports(&record, &args.out)?;
    for p in written {
        println!("{}", p.display());
    }
    let status = record.status();
    if status != qthermal::record::RunStatus::AllHeld {
        eprintln!("{status:?}");
    }
    Ok(ExitCode::from(status.exit_code() as u8))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, args) = match cli.command {
        Command::Quench(a) => (ScenarioKind::Quench, a),
        Command::Rethermalize(a) => (ScenarioKind::Rethermalize, a),
        Command::Perturb(a) => (ScenarioKind::Perturb, a),
        Command::Certify(a) => (ScenarioKind::Certify, a),
        Command::Diagnostics(a) => (ScenarioKind::Diagnostics, a),
    };
    match run(kind, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
