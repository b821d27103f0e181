use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holecover::detection::StartPolicy;
use holecover::harness::{self, Method, ScenarioConfig};
use holecover::scheduling::{abs_count_bounds, Mode};
use holecover::Seed;

#[derive(Parser)]
#[command(
    name = "holecover",
    version,
    about = "Coverage-hole detection and recovery with aerial base stations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its outputs.
    Simulate {
        /// JSON scenario file. Built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        start_policy: Option<StartArg>,
        /// Path-length constant of the delay model.
        #[arg(long)]
        beta: Option<f64>,
        /// Fly every deployment with the swarm controller.
        #[arg(long)]
        fly: bool,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print coverage radii and fleet-size bounds for the scenario region.
    Bounds {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare start policies on one scene.
    StudyOrder {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trial index whose scene is studied.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Also write order_study.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Proposed,
    Bsl,
    Grid,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StartArg {
    LeftMost,
    RightMost,
    TopMost,
    BottomMost,
    /// Seeded by the master seed.
    Random,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Offline,
    Online,
}

fn load(path: &Option<PathBuf>) -> holecover::Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::from_path(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn run(cli: Cli) -> holecover::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            method,
            mode,
            trials,
            seed,
            start_policy,
            beta,
            fly,
            workers,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(m) = method {
                cfg.method = match m {
                    MethodArg::Proposed => Method::Proposed,
                    MethodArg::Bsl => Method::Bsl,
                    MethodArg::Grid => Method::Grid,
                };
            }
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Offline => Mode::Offline,
                    ModeArg::Online => Mode::Online,
                };
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = start_policy {
                cfg.start_policy = match p {
                    StartArg::LeftMost => StartPolicy::LeftMost,
                    StartArg::RightMost => StartPolicy::RightMost,
                    StartArg::TopMost => StartPolicy::TopMost,
                    StartArg::BottomMost => StartPolicy::BottomMost,
                    StartArg::Random => StartPolicy::Random(Seed(cfg.seed)),
                };
            }
            if let Some(b) = beta {
                cfg.beta = b;
            }
            cfg.fly |= fly;
            cfg.validate()?;
            let report = match workers {
                Some(w) => harness::monte_carlo_with_workers(&cfg, w)?,
                None => harness::monte_carlo(&cfg)?,
            };
            let files = harness::write_outputs(&report, &out)?;
            let s = &report.summary;
            println!(
                "{} trials, method {}, coverage {:.4} -> {:.4} (median), ABS count median {}",
                s.trials,
                cfg.method.as_str(),
                s.coverage_before.median,
                s.coverage_after.median,
                s.abs_count.median
            );
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Bounds { config } => {
            let cfg = load(&config)?;
            let (r1, r2) = cfg.fleet_radii()?;
            let b = abs_count_bounds(&cfg.region, r1, r2)?;
            let v = serde_json::json!({
                "r1": r1,
                "r2": r2,
                "min": b.min,
                "max": b.max,
                "min_int": b.min_int,
                "max_int": b.max_int,
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Command::StudyOrder { config, trial, out } => {
            let cfg = load(&config)?;
            let seed = harness::trial_seed(&cfg, trial);
            let scene = harness::build_scenario(&cfg, seed)?;
            let rows =
                harness::visiting_order_study(&scene, &cfg, &StartPolicy::all(seed.derive(7)))?;
            let mut table = String::from(
                "policy,config1_units,config2_units,abs_count,coverage_after,path_length\n",
            );
            for r in &rows {
                let m = &r.metrics;
                table.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.policy,
                    m.config1_units,
                    m.config2_units,
                    m.abs_count,
                    m.coverage_after,
                    m.path_length
                ));
            }
            print!("{table}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("order_study.csv"), table)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
