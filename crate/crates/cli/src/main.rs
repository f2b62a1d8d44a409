use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trafficmap::map_io::{load_occupancy_map, load_scenario, Occupancy};
use trafficmap::sim::suite::{write_scenario, SuiteScenario};
use trafficmap::sim::{run_scenario, validate_scenario, RunOptions, SimError};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "trafficmap", version, about = "Multi-robot traffic management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report.
    Run {
        scenario: PathBuf,
        /// Directory for per-robot master cost map snapshots.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Steps between snapshots.
        #[arg(long, default_value_t = 10)]
        snapshot_every: u64,
        /// Trajectory log, one JSON record per robot per step.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's step limit.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Check a scenario and every file it references.
    Validate { scenario: PathBuf },
    /// Print size and cell counts of an occupancy map.
    InspectMap { image: PathBuf, meta: PathBuf },
    /// Write one of the reference scenarios (or `all`) into a directory.
    Scaffold { name: String, dir: PathBuf },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn sim_fail(e: SimError) -> ExitCode {
    fail(if e.is_config() { EXIT_CONFIG } else { EXIT_FAILURE }, e)
}

fn run(scenario: &Path, opts: RunOptions) -> ExitCode {
    let scenario = match load_scenario(scenario) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match run_scenario(&scenario, &opts) {
        Ok(out) => {
            print!("{}", out.report.to_text());
            eprintln!("runtime: {:.3} s", out.report.wall_clock_s);
            if out.report.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
        Err(e) => sim_fail(e),
    }
}

fn validate(path: &Path) -> ExitCode {
    let scenario = match load_scenario(path) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match validate_scenario(&scenario) {
        Ok(()) => {
            println!("{}: ok ({} robots)", path.display(), scenario.robots.len());
            ExitCode::SUCCESS
        }
        Err(e) => sim_fail(e),
    }
}

fn inspect_map(image: &Path, meta: &Path) -> ExitCode {
    let grid = match load_occupancy_map(image, meta) {
        Ok(g) => g,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let count = |o: Occupancy| grid.cells.iter().filter(|&&c| c == o).count();
    let m = grid.meta;
    println!("width: {}", m.width);
    println!("height: {}", m.height);
    println!("resolution: {}", m.resolution);
    println!("origin: [{}, {}]", m.origin_x, m.origin_y);
    println!("free: {}", count(Occupancy::Free));
    println!("occupied: {}", count(Occupancy::Occupied));
    println!("unknown: {}", count(Occupancy::Unknown));
    ExitCode::SUCCESS
}

fn scaffold(name: &str, dir: &Path) -> ExitCode {
    let kinds: Vec<SuiteScenario> = if name == "all" {
        SuiteScenario::ALL.to_vec()
    } else {
        match SuiteScenario::from_name(name) {
            Some(k) => vec![k],
            None => {
                let known: Vec<_> = SuiteScenario::ALL.iter().map(|k| k.name()).collect();
                return fail(EXIT_CONFIG, format!("unknown scenario {name:?}; known: {}", known.join(", ")));
            }
        }
    };
    for kind in kinds {
        let target = if name == "all" { dir.join(kind.name()) } else { dir.to_path_buf() };
        match write_scenario(kind, &target) {
            Ok(p) => println!("{}", p.display()),
            Err(e) => return fail(EXIT_FAILURE, e),
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, snapshots, snapshot_every, log, seed, steps } => run(
            &scenario,
            RunOptions {
                snapshot_dir: snapshots,
                snapshot_every,
                log_path: log,
                max_steps: steps,
                seed,
            },
        ),
        Command::Validate { scenario } => validate(&scenario),
        Command::InspectMap { image, meta } => inspect_map(&image, &meta),
        Command::Scaffold { name, dir } => scaffold(&name, &dir),
    }
}
