//! The end-to-end two-state study: solves all four problems (observed /
//! filtered regime, with / without impact), evaluates the regime-blind
//! averaged-parameter benchmark under the true filtered dynamics, runs
//! the Monte Carlo consistency checks, and emits figure-ready CSV plus a
//! machine-readable summary.
//!
//! Reporting is fail-closed: every consistency check runs before any file
//! is written, and a failing check aborts the run with the check named.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::full_info::{self, FullSolveOptions, FullSolution};
use crate::model::ModelParams;
use crate::output;
use crate::partial_info::{self, BeliefGrid, PartialSolveOptions, ValueTablePartial};
use crate::simulate::{self, InfoMode, InitialState, Policy};

/// Numerical slack for sign checks on value orderings.
const ORDERING_SLACK: f64 = 1e-6;

/// Absolute slack for the information-ordering comparison.
const INFORMATION_SLACK: f64 = 1e-2;

/// Terminal convergence threshold: last-step strategy gap relative to the
/// no-impact level.
const CONVERGENCE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateValueSummary {
    pub state: usize,
    pub value_impact: f64,
    pub value_no_impact: f64,
    pub strategy_t0_impact: f64,
    pub strategy_t0_no_impact: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSummary {
    pub max_gain: f64,
    pub at_time: f64,
    pub at_belief: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub policy: String,
    pub mean: f64,
    pub standard_error: f64,
    pub solver_value: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub full_info_t0: Vec<StateValueSummary>,
    /// Partial-information values at t = 0 and the configured belief.
    pub partial_value_impact: f64,
    pub partial_value_no_impact: f64,
    pub benchmark_value: f64,
    pub averaged_control: f64,
    pub gains: GainSummary,
    pub monte_carlo: Vec<McSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub full_time_steps: usize,
    pub partial_time_steps: usize,
    pub partial_belief_points: usize,
    pub cfl: f64,
    pub cfl_margin: f64,
    pub transform_deviation: Option<f64>,
    pub seed: u64,
    pub paths: usize,
    pub threads: usize,
    pub runtimes_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub diagnostics: Diagnostics,
    pub checks: Vec<CheckResult>,
}

struct Solves {
    params: ModelParams,
    params_rigid: ModelParams,
    full_impact: FullSolution,
    full_no_impact: FullSolution,
    grid: BeliefGrid,
    partial_impact: ValueTablePartial,
    partial_no_impact: ValueTablePartial,
    averaged: partial_info::AveragedStrategy,
    benchmark: ValueTablePartial,
}

/// The same market with the impact slopes removed; used to simulate the
/// no-impact problems under the dynamics they assume.
fn rigid_market(config: &Config) -> Result<ModelParams> {
    let mut c = config.clone();
    for p in &mut c.model.switch_up {
        p.impact_slope = 0.0;
    }
    for p in &mut c.model.switch_down {
        p.impact_slope = 0.0;
    }
    c.model_params()
}

fn run_solves(config: &Config, runtimes: &mut BTreeMap<String, f64>) -> Result<Solves> {
    let params = config.model_params()?;
    let params_rigid = rigid_market(config)?;
    let s = &config.solver;
    let full_opts = FullSolveOptions {
        time_steps: s.full_time_steps,
        control_points: s.full_control_points,
        refine_tolerance: s.refine_tolerance,
    };
    let partial_opts = PartialSolveOptions {
        control_points: s.partial_control_points,
        refine_tolerance: s.refine_tolerance,
    };

    let t0 = Instant::now();
    let full_impact =
        full_info::solve_full(&params, &full_opts, true).map_err(|e| e.in_stage("solve-full-impact"))?;
    runtimes.insert("solve_full_impact".into(), t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let full_no_impact = full_info::solve_full(&params, &full_opts, false)
        .map_err(|e| e.in_stage("solve-full-no-impact"))?;
    runtimes.insert("solve_full_no_impact".into(), t0.elapsed().as_secs_f64());

    let grid = BeliefGrid::new(&params, s.partial_time_steps, s.partial_belief_points)
        .map_err(|e| e.in_stage("belief-grid"))?;

    let t0 = Instant::now();
    let partial_impact = partial_info::solve_partial(&params, &grid, &partial_opts, true)
        .map_err(|e| e.in_stage("solve-partial-impact"))?;
    runtimes.insert("solve_partial_impact".into(), t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let partial_no_impact = partial_info::solve_partial(&params, &grid, &partial_opts, false)
        .map_err(|e| e.in_stage("solve-partial-no-impact"))?;
    runtimes.insert("solve_partial_no_impact".into(), t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let averaged =
        partial_info::averaged_parameter_strategy(&params).map_err(|e| e.in_stage("benchmark"))?;
    let h_bar = averaged.control;
    let benchmark = partial_info::evaluate_fixed_strategy(&params, &grid, &|_, _| h_bar, true)
        .map_err(|e| e.in_stage("benchmark"))?;
    runtimes.insert("benchmark".into(), t0.elapsed().as_secs_f64());

    Ok(Solves {
        params,
        params_rigid,
        full_impact,
        full_no_impact,
        grid,
        partial_impact,
        partial_no_impact,
        averaged,
        benchmark,
    })
}

struct McOutcome {
    summaries: Vec<McSummary>,
    checks: Vec<CheckResult>,
}

fn run_monte_carlo(
    config: &Config,
    s: &Solves,
    runtimes: &mut BTreeMap<String, f64>,
) -> Result<McOutcome> {
    let sim = &config.simulation;
    let n = sim.paths;
    let seed = sim.seed;
    let w0 = s.params.initial_wealth();
    let state = config.initial_state_index();
    let belief = sim.initial_belief.clone();
    let pi0 = belief[0];

    let t0 = Instant::now();
    let mut summaries = Vec::new();
    let mut checks = Vec::new();

    let consistency = |name: &str,
                           mean: f64,
                           se: f64,
                           value: f64,
                           checks: &mut Vec<CheckResult>,
                           summaries: &mut Vec<McSummary>| {
        summaries.push(McSummary {
            policy: name.to_string(),
            mean,
            standard_error: se,
            solver_value: value,
            paths: n,
        });
        let gap = (mean - value).abs();
        checks.push(CheckResult {
            name: format!("mc-consistency-{name}"),
            passed: gap <= 3.0 * se,
            detail: format!("|{mean:.6} - {value:.6}| = {gap:.2e} vs 3 SE = {:.2e}", 3.0 * se),
        });
    };

    // Observed regime, impact market.
    let policy = Policy::FullTable(&s.full_impact.strategy);
    let mode = InfoMode::Full {
        initial: InitialState::Fixed(state),
    };
    let (mean, se) = simulate::estimate_value(&s.params, &policy, &mode, n, seed)
        .map_err(|e| e.in_stage("mc-full-impact"))?;
    let value = full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, state)?;
    consistency("full-impact", mean, se, value, &mut checks, &mut summaries);

    // Observed regime, rigid market.
    let policy = Policy::FullTable(&s.full_no_impact.strategy);
    let (mean, se) = simulate::estimate_value(&s.params_rigid, &policy, &mode, n, seed)
        .map_err(|e| e.in_stage("mc-full-no-impact"))?;
    let value = full_info::value_full(&s.params, &s.full_no_impact.value, 0.0, w0, state)?;
    consistency("full-no-impact", mean, se, value, &mut checks, &mut summaries);

    // Filtered regime, impact market.
    let policy = Policy::PartialTable(&s.partial_impact);
    let mode_partial = InfoMode::Partial {
        initial_belief: belief.clone(),
    };
    let opt_utilities =
        simulate::path_utilities(&s.params, &policy, &mode_partial, n, seed)
            .map_err(|e| e.in_stage("mc-partial-impact"))?;
    let (mean, se) = simulate::mean_and_se(&opt_utilities);
    let value = partial_info::value_partial(&s.params, &s.partial_impact, 0.0, w0, pi0)?;
    consistency("partial-impact", mean, se, value, &mut checks, &mut summaries);

    // Filtered regime, rigid market.
    let policy = Policy::PartialTable(&s.partial_no_impact);
    let (mean, se) = simulate::estimate_value(&s.params_rigid, &policy, &mode_partial, n, seed)
        .map_err(|e| e.in_stage("mc-partial-no-impact"))?;
    let value = partial_info::value_partial(&s.params, &s.partial_no_impact, 0.0, w0, pi0)?;
    consistency("partial-no-impact", mean, se, value, &mut checks, &mut summaries);

    // Gains ordering under common random numbers: the filter-using optimal
    // policy against the regime-blind benchmark in the same impact market.
    let avg_policy = Policy::Flat(s.averaged.control);
    let avg_mode = InfoMode::Full {
        initial: InitialState::Sampled(belief.clone()),
    };
    let avg_utilities = simulate::path_utilities(&s.params, &avg_policy, &avg_mode, n, seed)
        .map_err(|e| e.in_stage("mc-averaged"))?;
    let diffs: Vec<f64> = opt_utilities
        .iter()
        .zip(&avg_utilities)
        .map(|(a, b)| a - b)
        .collect();
    let (diff_mean, diff_se) = simulate::mean_and_se(&diffs);
    checks.push(CheckResult {
        name: "mc-gains-ordering".to_string(),
        passed: diff_mean >= -3.0 * diff_se,
        detail: format!(
            "paired mean(optimal - averaged) = {diff_mean:.6} vs -3 SE = {:.2e}",
            -3.0 * diff_se
        ),
    });
    let (avg_mean, avg_se) = simulate::mean_and_se(&avg_utilities);
    summaries.push(McSummary {
        policy: "averaged".to_string(),
        mean: avg_mean,
        standard_error: avg_se,
        solver_value: partial_info::value_partial(&s.params, &s.benchmark, 0.0, w0, pi0)?,
        paths: n,
    });

    runtimes.insert("monte_carlo".into(), t0.elapsed().as_secs_f64());
    Ok(McOutcome { summaries, checks })
}

fn strategy_checks(s: &Solves) -> Vec<CheckResult> {
    let mut checks = Vec::new();
    let limit = s.params.position_limit();

    // All strategies strictly inside (-L, L).
    let mut extreme: f64 = 0.0;
    for table in [&s.full_impact.strategy, &s.full_no_impact.strategy] {
        for row in &table.controls {
            for &h in row {
                extreme = extreme.max(h.abs());
            }
        }
    }
    for table in [&s.partial_impact, &s.partial_no_impact] {
        for row in &table.controls {
            for &h in row {
                extreme = extreme.max(h.abs());
            }
        }
    }
    checks.push(CheckResult {
        name: "strategy-bounds".to_string(),
        passed: extreme < limit,
        detail: format!("max |h*| = {extreme} vs limit {limit}"),
    });

    // Impact strategies rejoin the no-impact ones at the last time step.
    let n = s.full_impact.strategy.times.len() - 1;
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();
    let mut passed = true;
    for state in 0..s.params.states() {
        let with = s.full_impact.strategy.controls[n - 1][state];
        let without = s.full_no_impact.strategy.controls[n - 1][state];
        let rel = (with - without).abs() / without.abs().max(1e-12);
        if rel > worst {
            worst = rel;
            detail = format!("state {}: last-step gap {:.3}% of no-impact level", state + 1, 100.0 * rel);
        }
        passed &= rel < CONVERGENCE_FRACTION;
    }
    let grid = &s.grid;
    for k in [0, grid.n_pi / 2, grid.n_pi] {
        let with = s.partial_impact.controls[grid.n_t - 1][k];
        let without = s.partial_no_impact.controls[grid.n_t - 1][k];
        let rel = (with - without).abs() / without.abs().max(1e-12);
        if rel > worst {
            worst = rel;
            detail = format!(
                "belief {:.2}: last-step gap {:.3}% of no-impact level",
                grid.belief(k),
                100.0 * rel
            );
        }
        passed &= rel < CONVERGENCE_FRACTION;
    }
    checks.push(CheckResult {
        name: "strategy-impact-convergence".to_string(),
        passed,
        detail,
    });

    // Far from maturity the impact investor short-sells in the bull state
    // while the no-impact one buys; the bear state is always short and
    // more aggressively so with impact.
    let h0_bull_impact = s.full_impact.strategy.controls[0][0];
    let h0_bull_plain = s.full_no_impact.strategy.controls[0][0];
    let bear_always_short = s
        .full_impact
        .strategy
        .controls
        .iter()
        .chain(&s.full_no_impact.strategy.controls)
        .all(|row| row[1] < 0.0);
    let h0_bear_impact = s.full_impact.strategy.controls[0][1];
    let h0_bear_plain = s.full_no_impact.strategy.controls[0][1];
    let partial_bull_short = s.partial_impact.controls[0][s.grid.n_pi] < 0.0;
    let passed = h0_bull_impact < 0.0
        && h0_bull_plain > 0.0
        && bear_always_short
        && h0_bear_impact < h0_bear_plain
        && partial_bull_short;
    checks.push(CheckResult {
        name: "strategy-shortsell-far-from-maturity".to_string(),
        passed,
        detail: format!(
            "bull t=0: impact {h0_bull_impact:.3} vs plain {h0_bull_plain:.3}; \
             bear t=0: impact {h0_bear_impact:.3} vs plain {h0_bear_plain:.3}; \
             bear always short: {bear_always_short}; belief-corner short: {partial_bull_short}"
        ),
    });
    checks
}

fn value_checks(s: &Solves) -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    let w0 = s.params.initial_wealth();

    // Impact value dominates at t = 0 in both observed states.
    let mut worst_gap = f64::INFINITY;
    for state in 0..s.params.states() {
        let with = full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, state)?;
        let without = full_info::value_full(&s.params, &s.full_no_impact.value, 0.0, w0, state)?;
        worst_gap = worst_gap.min(with - without);
    }
    // ... and node-wise on the whole belief grid at t = 0.
    let grid = &s.grid;
    for k in 0..=grid.n_pi {
        let x = grid.belief(k);
        let with = partial_info::value_partial(&s.params, &s.partial_impact, 0.0, w0, x)?;
        let without = partial_info::value_partial(&s.params, &s.partial_no_impact, 0.0, w0, x)?;
        worst_gap = worst_gap.min(with - without);
    }
    checks.push(CheckResult {
        name: "value-impact-ordering".to_string(),
        passed: worst_gap >= -ORDERING_SLACK,
        detail: format!("min(value_impact - value_no_impact) = {worst_gap:.3e}"),
    });

    let bull = full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, 0)?;
    let bear = full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, 1)?;
    checks.push(CheckResult {
        name: "value-bear-exceeds-bull".to_string(),
        passed: bear > bull,
        detail: format!("bear {bear:.6} vs bull {bull:.6}"),
    });

    // Information ordering: the filtered value can never beat the mixture
    // of observed-regime values at the same belief.
    let mut worst = f64::NEG_INFINITY;
    let mut where_ = 0.0;
    for k in 0..=grid.n_pi {
        let x = grid.belief(k);
        let partial = partial_info::value_partial(&s.params, &s.partial_impact, 0.0, w0, x)?;
        let mixture = x * full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, 0)?
            + (1.0 - x) * full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, 1)?;
        let excess = partial - mixture;
        if excess > worst {
            worst = excess;
            where_ = x;
        }
    }
    checks.push(CheckResult {
        name: "information-ordering".to_string(),
        passed: worst <= INFORMATION_SLACK,
        detail: format!("max(partial - mixture) = {worst:.3e} at belief {where_:.2}"),
    });

    Ok(checks)
}

/// Gains surface at the configured wealth: filtered optimum minus the
/// averaged-parameter benchmark, node by node.
fn gains_surface(s: &Solves, w0: f64) -> Result<(Vec<Vec<f64>>, GainSummary)> {
    let grid = &s.grid;
    let mut gains = vec![vec![0.0; grid.n_pi + 1]; grid.n_t + 1];
    let mut best = GainSummary {
        max_gain: f64::NEG_INFINITY,
        at_time: 0.0,
        at_belief: 0.0,
    };
    for n in 0..=grid.n_t {
        let t = grid.time(n);
        for k in 0..=grid.n_pi {
            let x = grid.belief(k);
            let filtered = partial_info::value_partial(&s.params, &s.partial_impact, t, w0, x)?;
            let averaged = partial_info::value_partial(&s.params, &s.benchmark, t, w0, x)?;
            let g = filtered - averaged;
            gains[n][k] = g;
            if g > best.max_gain {
                best = GainSummary {
                    max_gain: g,
                    at_time: t,
                    at_belief: x,
                };
            }
        }
    }
    Ok((gains, best))
}

fn gains_check(gains: &[Vec<f64>]) -> CheckResult {
    let mut min = f64::INFINITY;
    for row in gains {
        for &g in row {
            min = min.min(g);
        }
    }
    CheckResult {
        name: "gains-nonnegative".to_string(),
        passed: min >= -ORDERING_SLACK,
        detail: format!("min gain = {min:.3e}"),
    }
}

fn figure_time_indices(n_t: usize, points: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points)
        .map(|j| ((j as f64 / (points - 1) as f64) * n_t as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

fn write_figures(config: &Config, s: &Solves, gains: &[Vec<f64>]) -> Result<()> {
    let dir = Path::new(&config.output.directory);
    let w0 = s.params.initial_wealth();

    // Observed-regime strategy and value curves, full table resolution.
    let full_rows = |impact: bool| {
        let sol = if impact { &s.full_impact } else { &s.full_no_impact };
        sol.strategy
            .times
            .iter()
            .enumerate()
            .flat_map(|(n, &t)| {
                (0..s.params.states())
                    .map(|i| {
                        format!(
                            "{},{},{},{}",
                            output::real(t),
                            i + 1,
                            u8::from(impact),
                            output::real(sol.strategy.controls[n][i])
                        )
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let mut rows = full_rows(true);
    rows.extend(full_rows(false));
    output::write_csv(&dir.join("fig1_strategy_full.csv"), "t,state,impact,h_star", rows)?;

    let value_rows = |impact: bool| -> Result<Vec<String>> {
        let sol = if impact { &s.full_impact } else { &s.full_no_impact };
        sol.value
            .times
            .iter()
            .map(|&t| -> Result<Vec<String>> {
                (0..s.params.states())
                    .map(|i| -> Result<String> {
                        let v = full_info::value_full(&s.params, &sol.value, t, w0, i)?;
                        Ok(format!(
                            "{},{},{},{}",
                            output::real(t),
                            i + 1,
                            u8::from(impact),
                            output::real(v)
                        ))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
            .map(|nested| nested.into_iter().flatten().collect())
    };
    let mut rows = value_rows(true)?;
    rows.extend(value_rows(false)?);
    output::write_csv(&dir.join("fig2_value_full.csv"), "t,state,impact,value", rows)?;

    // Belief-space curves on the reporting time subgrid.
    let grid = &s.grid;
    let times = figure_time_indices(grid.n_t, config.output.figure_time_points);
    let partial_rows = |table: &ValueTablePartial, impact: bool, values: bool| -> Result<Vec<String>> {
        let mut rows = Vec::new();
        for &n in &times {
            let t = grid.time(n);
            for k in 0..=grid.n_pi {
                let x = grid.belief(k);
                let payload = if values {
                    partial_info::value_partial(&s.params, table, t, w0, x)?
                } else {
                    table.controls[n][k]
                };
                rows.push(format!(
                    "{},{},{},{}",
                    output::real(t),
                    output::real(x),
                    u8::from(impact),
                    output::real(payload)
                ));
            }
        }
        Ok(rows)
    };
    let mut rows = partial_rows(&s.partial_impact, true, false)?;
    rows.extend(partial_rows(&s.partial_no_impact, false, false)?);
    output::write_csv(&dir.join("fig3_strategy_partial.csv"), "t,pi,impact,h_star", rows)?;

    let mut rows = partial_rows(&s.partial_impact, true, true)?;
    rows.extend(partial_rows(&s.partial_no_impact, false, true)?);
    output::write_csv(&dir.join("fig4_value_partial.csv"), "t,pi,impact,value", rows)?;

    let mut rows = Vec::new();
    for &n in &times {
        let t = grid.time(n);
        for k in 0..=grid.n_pi {
            let x = grid.belief(k);
            let filtered = partial_info::value_partial(&s.params, &s.partial_impact, t, w0, x)?;
            let averaged = partial_info::value_partial(&s.params, &s.benchmark, t, w0, x)?;
            rows.push(format!(
                "{},{},{},{},{}",
                output::real(t),
                output::real(x),
                output::real(filtered),
                output::real(averaged),
                output::real(gains[n][k])
            ));
        }
    }
    output::write_csv(
        &dir.join("fig5_gains.csv"),
        "t,pi,value_filtered,value_averaged,gain",
        rows,
    )?;
    Ok(())
}

/// Run the whole study from a validated configuration. Fails without
/// emitting anything if any consistency check fails.
pub fn run_study(config: &Config) -> Result<ExperimentReport> {
    config.validate()?;
    let mut runtimes = BTreeMap::new();
    let s = run_solves(config, &mut runtimes)?;
    let w0 = s.params.initial_wealth();

    let mut checks = strategy_checks(&s);
    checks.extend(value_checks(&s)?);
    let (gains, gain_summary) = gains_surface(&s, w0)?;
    checks.push(gains_check(&gains));
    let mc = run_monte_carlo(config, &s, &mut runtimes)?;
    checks.extend(mc.checks);

    // Fail closed before writing anything.
    if let Some(failed) = checks.iter().find(|c| !c.passed) {
        return Err(Error::CheckFailed {
            name: failed.name.clone(),
            detail: failed.detail.clone(),
        });
    }

    let pi0 = config.simulation.initial_belief[0];
    let summary = Summary {
        full_info_t0: (0..s.params.states())
            .map(|i| -> Result<StateValueSummary> {
                Ok(StateValueSummary {
                    state: i + 1,
                    value_impact: full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, i)?,
                    value_no_impact: full_info::value_full(
                        &s.params,
                        &s.full_no_impact.value,
                        0.0,
                        w0,
                        i,
                    )?,
                    strategy_t0_impact: s.full_impact.strategy.controls[0][i],
                    strategy_t0_no_impact: s.full_no_impact.strategy.controls[0][i],
                })
            })
            .collect::<Result<Vec<_>>>()?,
        partial_value_impact: partial_info::value_partial(&s.params, &s.partial_impact, 0.0, w0, pi0)?,
        partial_value_no_impact: partial_info::value_partial(
            &s.params,
            &s.partial_no_impact,
            0.0,
            w0,
            pi0,
        )?,
        benchmark_value: partial_info::value_partial(&s.params, &s.benchmark, 0.0, w0, pi0)?,
        averaged_control: s.averaged.control,
        gains: gain_summary,
        monte_carlo: mc.summaries,
    };
    let diagnostics = Diagnostics {
        full_time_steps: config.solver.full_time_steps,
        partial_time_steps: s.grid.n_t,
        partial_belief_points: s.grid.n_pi,
        cfl: s.grid.cfl,
        cfl_margin: 0.9 / s.grid.cfl,
        transform_deviation: s.full_impact.transform_deviation,
        seed: config.simulation.seed,
        paths: config.simulation.paths,
        threads: rayon::current_num_threads(),
        runtimes_seconds: runtimes,
    };

    write_figures(config, &s, &gains)?;
    let dir = Path::new(&config.output.directory);
    output::write_json_pretty(&dir.join("summary.json"), &summary)?;
    output::write_json_pretty(&dir.join("diagnostics.json"), &diagnostics)?;
    // Echo the configuration the outputs were generated from.
    output::atomic_write(
        &dir.join("config_echo.json"),
        format!("{}\n", config.to_json_pretty()).as_bytes(),
    )?;

    Ok(ExperimentReport {
        summary,
        diagnostics,
        checks,
    })
}
