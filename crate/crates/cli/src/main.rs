//! `swarmsim`: validate, run and plot swarm transport scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmsim_core::engine::{self, EngineError};
use swarmsim_core::phase1::Phase1Error;
use swarmsim_core::plot::{self, PlotKind};
use swarmsim_core::scenario::{ScenarioError, ScenarioFile};
use swarmsim_core::sensing::SensingError;
use swarmsim_core::trace::{self, TraceData};

mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const NO_FREE_REGION: u8 = 3;
    pub const CAPACITY: u8 = 4;
    pub const DIVERGED: u8 = 5;
    pub const TICK_LIMIT: u8 = 6;
    pub const AGENT_IN_OBSTACLE: u8 = 7;
}

#[derive(Parser)]
#[command(
    name = "swarmsim",
    version,
    about = "Swarm formation and object transport simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print each invariant.
    Validate { file: PathBuf },
    /// Run a scenario and write trace, events, summary and plots.
    Run {
        file: PathBuf,
        /// Output directory [default: scenario `output.directory`, else `out`]
        #[arg(long, env = "SWARMSIM_OUT")]
        out: Option<PathBuf>,
        /// Override the election seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the tick limit.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        ticks: Option<u64>,
        /// Comma-separated: trajectories, formation-error, distance, regions, all.
        #[arg(long)]
        plot: Option<String>,
    },
    /// Render plots from an existing trace.csv.
    Plot {
        trace: PathBuf,
        #[arg(long, default_value = "all")]
        plot: String,
        /// Directory for the SVG files [default: next to the trace]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Run {
            file,
            out,
            seed,
            ticks,
            plot,
        } => run(&file, out, seed, ticks, plot.as_deref()),
        Command::Plot { trace, plot, out } => plot_cmd(&trace, &plot, out),
    };
    ExitCode::from(code)
}

fn load_error(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Io { .. } => exit::IO,
        ScenarioError::Parse { .. } | ScenarioError::Invalid(_) => exit::INVALID,
    }
}

fn validate(path: &Path) -> u8 {
    let file = match ScenarioFile::load(path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return load_error(&e);
        }
    };
    let checks = file.checks();
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().all(|c| c.passed) {
        println!("{}: ok", path.display());
        exit::OK
    } else {
        println!(
            "{}: {} check(s) failed",
            path.display(),
            checks.iter().filter(|c| !c.passed).count()
        );
        exit::INVALID
    }
}

fn engine_exit(e: &EngineError) -> u8 {
    match e {
        EngineError::Phase1(Phase1Error::NoFreeRegion { .. }) => exit::NO_FREE_REGION,
        EngineError::Phase1(Phase1Error::InsufficientCapacity { .. }) => exit::CAPACITY,
        EngineError::Phase1(_) => exit::INVALID,
        EngineError::Dynamics { .. } => exit::DIVERGED,
        EngineError::Sensing {
            source: SensingError::AgentInObstacle { .. },
            ..
        } => exit::AGENT_IN_OBSTACLE,
        EngineError::Sensing { .. } => exit::INVALID,
        EngineError::TickLimit { .. } => exit::TICK_LIMIT,
    }
}

fn run(
    path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    ticks: Option<u64>,
    plots: Option<&str>,
) -> u8 {
    let mut scenario = match ScenarioFile::load(path).and_then(ScenarioFile::into_scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            if let ScenarioError::Invalid(checks) = &e {
                for c in checks.iter().filter(|c| !c.passed) {
                    eprintln!("{c}");
                }
            }
            return load_error(&e);
        }
    };
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if let Some(t) = ticks {
        scenario.max_ticks = t;
    }
    let kinds = match plots {
        Some(list) => PlotKind::parse_list(list),
        None => PlotKind::parse_list(&scenario.output.plots.join(",")),
    };
    let kinds = match kinds {
        Ok(k) => k,
        Err(e) => {
            eprintln!("{e}");
            return exit::INVALID;
        }
    };
    let dir = out
        .or_else(|| scenario.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let sim = engine::run(&scenario);
    let files = match trace::write_run(&sim, &dir) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return exit::IO;
        }
    };
    if !kinds.is_empty() && !sim.rows.is_empty() {
        if let Err(code) = write_plots(&TraceData::from_trace(&sim), &kinds, &dir) {
            return code;
        }
    }
    print!("{}", sim.summary());
    println!("trace: {}", files.trace.display());
    match &sim.error {
        None => exit::OK,
        Some(e) => {
            eprintln!("error: {e}");
            engine_exit(e)
        }
    }
}

fn write_plots(data: &TraceData, kinds: &[PlotKind], dir: &Path) -> Result<(), u8> {
    if let Err(e) = fs::create_dir_all(dir) {
        eprintln!("{}: {e}", dir.display());
        return Err(exit::IO);
    }
    for kind in kinds {
        let svg = plot::render(*kind, data).map_err(|e| {
            eprintln!("{e}");
            exit::INVALID
        })?;
        let path = dir.join(kind.file_name());
        fs::write(&path, svg).map_err(|e| {
            eprintln!("{}: {e}", path.display());
            exit::IO
        })?;
    }
    Ok(())
}

fn plot_cmd(path: &Path, list: &str, out: Option<PathBuf>) -> u8 {
    let kinds = match PlotKind::parse_list(list) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("{e}");
            return exit::INVALID;
        }
    };
    let data = match trace::read_trace(path) {
        Ok(d) => d,
        Err(e @ trace::TraceError::Io { .. }) => {
            eprintln!("{e}");
            return exit::IO;
        }
        Err(e) => {
            eprintln!("{e}");
            return exit::INVALID;
        }
    };
    let dir = out.unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    match write_plots(&data, &kinds, &dir) {
        Ok(()) => exit::OK,
        Err(code) => code,
    }
}
