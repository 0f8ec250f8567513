use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use so3_track::controllers::{roa_membership, validate_gains};
use so3_track::harness::{
    reproduce_set, run_scenario, write_csv_file, HarnessError, RunSummary, Scenario,
    TrajectoryRecord,
};

#[derive(Parser)]
#[command(name = "so3-track", version, about = "Rigid-body attitude tracking simulations on SO(3)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and emit its trajectory CSV.
    ///
    /// Without --out the CSV goes to stdout and the summary to stderr;
    /// with --out the CSV goes to the file and the summary to stdout.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a bundled scenario set (fig1, fig2, or exp) as CSV files.
    Reproduce {
        target: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Check a config's gains against every stability inequality.
    ValidateGains {
        #[arg(long)]
        config: PathBuf,
    },
    /// Report basin membership for a config's initial condition.
    Roa {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Simulate { config, out } => simulate(&config, out.as_deref()),
        Command::Reproduce { target, out_dir } => reproduce(&target, &out_dir),
        Command::ValidateGains { config } => check_gains(&config),
        Command::Roa { config } => report_roa(&config),
    }
}

fn simulate(config: &Path, out: Option<&Path>) -> Result<(), HarnessError> {
    let scenario = Scenario::from_toml_file(config)?;
    let (records, summary) = run_scenario(&scenario)?;
    match out {
        Some(path) => {
            write_csv_file(path, &records)?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        None => {
            print!("{}", so3_track::harness::render_csv(&records));
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn reproduce(target: &str, out_dir: &Path) -> Result<(), HarnessError> {
    let set = reproduce_set(target)?;
    std::fs::create_dir_all(out_dir)?;
    type RunOutput = Result<(Vec<TrajectoryRecord>, RunSummary), HarnessError>;
    let results: Vec<RunOutput> = std::thread::scope(|scope| {
        let handles: Vec<_> = set
            .iter()
            .map(|(_, scenario)| scope.spawn(move || run_scenario(scenario)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for ((stem, _), result) in set.iter().zip(results) {
        let (records, summary) = result?;
        let path = out_dir.join(format!("{stem}.csv"));
        write_csv_file(&path, &records)?;
        println!("wrote {}", path.display());
        println!("{summary}");
        println!();
    }
    Ok(())
}

fn check_gains(config: &Path) -> Result<(), HarnessError> {
    let scenario = Scenario::from_toml_file(config)?;
    let report = validate_gains(&scenario.gains(), scenario.mode);
    println!("{report}");
    if report.is_valid() {
        Ok(())
    } else {
        Err(HarnessError::Config(report.summary()))
    }
}

fn report_roa(config: &Path) -> Result<(), HarnessError> {
    let scenario = Scenario::from_toml_file(config)?;
    let base = scenario.build_reference()?;
    let refs0 = base.sample(0.0);
    let initial = scenario.initial_state(&refs0.rd)?;
    let report = roa_membership(&initial, &refs0, &scenario.gains(), scenario.mode);
    println!("{report}");
    Ok(())
}
