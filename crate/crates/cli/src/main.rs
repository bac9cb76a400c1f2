//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver or simulation
//! failure, 4 stability (grid) rejection, 5 failed reproduction check.
//! Errors are emitted as one-line JSON on standard error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use regime_impact::config::{Config, PolicySpec};
use regime_impact::error::Error;
use regime_impact::{experiments, full_info, output, partial_info, simulate};

#[derive(Parser)]
#[command(name = "regime-impact", version, about = "Optimal portfolios for an investor whose position sways a hidden market regime")]
struct Cli {
    /// Worker threads (default: hardware parallelism; REGIME_IMPACT_THREADS
    /// is used when the flag is absent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the observed-regime problem and write its tables as CSV.
    SolveFull {
        #[arg(long)]
        config: PathBuf,
        /// Freeze the switching intensities at their h = 0 values.
        #[arg(long)]
        no_impact: bool,
    },
    /// Solve the belief-space problem (two states) and write its table as CSV.
    SolvePartial {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        no_impact: bool,
    },
    /// Estimate the expected terminal utility of a policy by Monte Carlo.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// full-opt | partial-opt | averaged | flat:H
        #[arg(long)]
        policy: String,
        /// Path count (default: the config's simulation.paths).
        #[arg(long)]
        paths: Option<usize>,
        /// RNG seed (default: the config's simulation.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Dump the first path's event log and reporting grid as
        /// <PREFIX>_events.csv and <PREFIX>_grid.csv.
        #[arg(long, value_name = "PREFIX")]
        dump: Option<PathBuf>,
    },
    /// Run the full study and emit figure CSVs; exit 0 only if every
    /// embedded check passes.
    Reproduce {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(error: &Error) -> u8 {
    match error.root() {
        Error::Config(_)
        | Error::InvalidParameter { .. }
        | Error::UnsupportedStateCount { .. }
        | Error::Json(_) => 2,
        Error::CflViolation { .. } => 4,
        Error::CheckFailed { .. } => 5,
        _ => 3,
    }
}

fn emit_error(error: &Error) {
    let code = exit_code(error);
    let kind = match error.root() {
        Error::CflViolation { .. } => "stability",
        Error::CheckFailed { .. } => "check",
        _ if code == 2 => "config",
        _ => "solver",
    };
    let mut payload = serde_json::json!({
        "code": code,
        "kind": kind,
        "error": error.to_string(),
    });
    if let Error::CflViolation {
        cfl,
        suggested_time_steps,
    } = error.root()
    {
        payload["cfl"] = serde_json::json!(cfl);
        payload["suggested_time_steps"] = serde_json::json!(suggested_time_steps);
    }
    if let Error::CheckFailed { name, .. } = error.root() {
        payload["check"] = serde_json::json!(name);
    }
    eprintln!("{payload}");
}

fn configure_threads(flag: Option<usize>) {
    let from_env = std::env::var("REGIME_IMPACT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        // A second initialization in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_config(path: &Path) -> Result<Config, Error> {
    let config = Config::load(path)?;
    for warning in config.model_params()?.coefficient_warnings() {
        eprintln!("{}", serde_json::json!({ "warning": warning }));
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads(cli.threads);
    match cli.command {
        Command::SolveFull { config, no_impact } => {
            let config = load_config(&config)?;
            let params = config.model_params()?;
            let opts = full_info::FullSolveOptions {
                time_steps: config.solver.full_time_steps,
                control_points: config.solver.full_control_points,
                refine_tolerance: config.solver.refine_tolerance,
            };
            let solution = full_info::solve_full(&params, &opts, !no_impact)?;
            let name = if no_impact {
                "full_info_no_impact.csv"
            } else {
                "full_info_impact.csv"
            };
            let path = Path::new(&config.output.directory).join(name);
            output::write_full_table_csv(&solution.value, &solution.strategy, &path)?;
            println!(
                "{}",
                serde_json::json!({ "written": path.display().to_string() })
            );
            Ok(())
        }
        Command::SolvePartial { config, no_impact } => {
            let config = load_config(&config)?;
            let params = config.model_params()?;
            let grid = partial_info::BeliefGrid::new(
                &params,
                config.solver.partial_time_steps,
                config.solver.partial_belief_points,
            )?;
            let opts = partial_info::PartialSolveOptions {
                control_points: config.solver.partial_control_points,
                refine_tolerance: config.solver.refine_tolerance,
            };
            let table = partial_info::solve_partial(&params, &grid, &opts, !no_impact)?;
            let name = if no_impact {
                "partial_info_no_impact.csv"
            } else {
                "partial_info_impact.csv"
            };
            let path = Path::new(&config.output.directory).join(name);
            output::write_partial_table_csv(&table, &path)?;
            println!(
                "{}",
                serde_json::json!({ "written": path.display().to_string() })
            );
            Ok(())
        }
        Command::Simulate {
            config,
            policy,
            paths,
            seed,
            dump,
        } => {
            let config = load_config(&config)?;
            let params = config.model_params()?;
            let spec = PolicySpec::parse(&policy)?;
            let n_paths = paths.unwrap_or(config.simulation.paths);
            let seed = seed.unwrap_or(config.simulation.seed);
            let belief = config.simulation.initial_belief.clone();

            // Solve on the fly where the policy needs tables.
            let full_solution = match spec {
                PolicySpec::FullOpt => {
                    let opts = full_info::FullSolveOptions {
                        time_steps: config.solver.full_time_steps,
                        control_points: config.solver.full_control_points,
                        refine_tolerance: config.solver.refine_tolerance,
                    };
                    Some(full_info::solve_full(&params, &opts, true)?)
                }
                _ => None,
            };
            let partial_table = match spec {
                PolicySpec::PartialOpt => {
                    let grid = partial_info::BeliefGrid::new(
                        &params,
                        config.solver.partial_time_steps,
                        config.solver.partial_belief_points,
                    )?;
                    let opts = partial_info::PartialSolveOptions {
                        control_points: config.solver.partial_control_points,
                        refine_tolerance: config.solver.refine_tolerance,
                    };
                    Some(partial_info::solve_partial(&params, &grid, &opts, true)?)
                }
                _ => None,
            };
            let (policy_impl, mode) = match spec {
                PolicySpec::Flat(h) => {
                    if h.abs() > params.position_limit() {
                        return Err(Error::invalid(
                            "policy",
                            "flat position must satisfy |H| <= position_limit",
                            h,
                        ));
                    }
                    (
                        simulate::Policy::Flat(h),
                        simulate::InfoMode::Full {
                            initial: simulate::InitialState::Sampled(belief),
                        },
                    )
                }
                PolicySpec::Averaged => {
                    let avg = partial_info::averaged_parameter_strategy(&params)?;
                    (
                        simulate::Policy::Flat(avg.control),
                        simulate::InfoMode::Full {
                            initial: simulate::InitialState::Sampled(belief),
                        },
                    )
                }
                PolicySpec::FullOpt => (
                    simulate::Policy::FullTable(&full_solution.as_ref().unwrap().strategy),
                    simulate::InfoMode::Full {
                        initial: simulate::InitialState::Fixed(config.initial_state_index()),
                    },
                ),
                PolicySpec::PartialOpt => (
                    simulate::Policy::PartialTable(partial_table.as_ref().unwrap()),
                    simulate::InfoMode::Partial {
                        initial_belief: belief,
                    },
                ),
            };
            let (mean, se) = simulate::estimate_value(&params, &policy_impl, &mode, n_paths, seed)?;
            if let Some(prefix) = dump {
                let path = simulate::simulate_path(
                    &params,
                    &policy_impl,
                    &mode,
                    seed,
                    0,
                    &simulate::SimOptions {
                        report_points: config.simulation.report_points,
                    },
                )?;
                let name = |suffix: &str| {
                    let mut s = prefix.as_os_str().to_os_string();
                    s.push(suffix);
                    PathBuf::from(s)
                };
                output::write_path_events_csv(&path, &name("_events.csv"))?;
                output::write_path_grid_csv(&path, &name("_grid.csv"))?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "policy": policy,
                    "paths": n_paths,
                    "seed": seed,
                    "mean": mean,
                    "standard_error": se,
                })
            );
            Ok(())
        }
        Command::Reproduce { config } => {
            let config = load_config(&config)?;
            let report = experiments::run_study(&config)?;
            for check in &report.checks {
                println!("PASS {}: {}", check.name, check.detail);
            }
            println!(
                "{}",
                serde_json::json!({
                    "output_directory": config.output.directory,
                    "checks_passed": report.checks.len(),
                })
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_error(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}
