//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.
//!
//! The tests share one set of study-resolution solves and serialize on a
//! gate so the wall-clock bounds are measured without contention.

use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use regime_impact::config::{Config, UtilityConfig};
use regime_impact::full_info::{self, FullSolution, FullSolveOptions};
use regime_impact::model::ModelParams;
use regime_impact::partial_info::{self, BeliefGrid, PartialSolveOptions, ValueTablePartial};
use regime_impact::simulate::{self, InfoMode, InitialState, Policy};

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn study_config() -> Config {
    Config::study()
}

fn params_with(utility: UtilityConfig, rho: f64) -> ModelParams {
    let mut c = study_config();
    c.model.utility = utility;
    c.model.risk_free_rate = rho;
    c.model_params().unwrap()
}

fn rigid_params() -> ModelParams {
    let mut c = study_config();
    c.model.switch_up[0].impact_slope = 0.0;
    c.model.switch_down[0].impact_slope = 0.0;
    c.model_params().unwrap()
}

struct Shared {
    params: ModelParams,
    params_rigid: ModelParams,
    full_impact: FullSolution,
    full_no_impact: FullSolution,
    grid: BeliefGrid,
    partial_impact: ValueTablePartial,
    partial_no_impact: ValueTablePartial,
    benchmark: ValueTablePartial,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let config = study_config();
        let params = config.model_params().unwrap();
        let params_rigid = rigid_params();
        let full_opts = FullSolveOptions::default();
        let full_impact = full_info::solve_full(&params, &full_opts, true).unwrap();
        let full_no_impact = full_info::solve_full(&params, &full_opts, false).unwrap();
        let grid = BeliefGrid::new(&params, 4000, 200).unwrap();
        let opts = PartialSolveOptions::default();
        let partial_impact = partial_info::solve_partial(&params, &grid, &opts, true).unwrap();
        let partial_no_impact = partial_info::solve_partial(&params, &grid, &opts, false).unwrap();
        let averaged = partial_info::averaged_parameter_strategy(&params).unwrap();
        let h_bar = averaged.control;
        let benchmark =
            partial_info::evaluate_fixed_strategy(&params, &grid, &|_, _| h_bar, true).unwrap();
        Shared {
            params,
            params_rigid,
            full_impact,
            full_no_impact,
            grid,
            partial_impact,
            partial_no_impact,
            benchmark,
        }
    })
}

/// Independent bisection oracle for the pointwise log first-order
/// condition on the effective control set.
fn log_foc_bisection(params: &ModelParams, state: usize) -> f64 {
    let atoms = &params.jump_measure().atoms;
    let foc = |h: f64| -> f64 {
        let mut s = -params.risk_free_rate();
        for a in atoms {
            s += a.size * a.intensities[state] / (1.0 + h * a.size);
        }
        s
    };
    let l = params.effective_bound();
    let (mut lo, mut hi) = (-l, l);
    assert!(foc(lo) > 0.0 && foc(hi) < 0.0, "no interior root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if foc(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn acceptance_1_log_strategy_closed_form_zero_rate() {
    let _g = gate();
    let params = params_with(UtilityConfig::Log, 0.0);

    let mut best = f64::INFINITY;
    let mut h = [0.0; 2];
    for _ in 0..100 {
        let t0 = Instant::now();
        h = [
            full_info::log_no_impact_strategy(&params, 0, 0.0),
            full_info::log_no_impact_strategy(&params, 1, 0.0),
        ];
        best = best.min(t0.elapsed().as_secs_f64());
    }
    let expected = [50.0 / 3.0, -30.0];
    for i in 0..2 {
        assert!(
            (h[i] - expected[i]).abs() <= 1e-6,
            "state {i}: {} vs {}",
            h[i],
            expected[i]
        );
        let oracle = log_foc_bisection(&params, i);
        assert!((h[i] - oracle).abs() <= 1e-6, "oracle gap {}", h[i] - oracle);
    }
    assert!(best < 1e-3, "strategy evaluation took {best:.2e} s");
    println!(
        "ACCEPTANCE 1 log closed form (rho=0): PASS: h*(bull) = {:.7}, h*(bear) = {:.7}, {:.1} us",
        h[0],
        h[1],
        best * 1e6
    );
}

#[test]
fn acceptance_2_log_strategy_closed_form_vs_root_finder() {
    let _g = gate();
    let mut c = study_config();
    c.model.utility = UtilityConfig::Log;
    c.model.risk_free_rate = 0.05;
    c.model.jump_atoms[0].intensities = vec![10.0, 10.0];
    c.model.jump_atoms[1].intensities = vec![10.0, 10.0];
    let params = c.model_params().unwrap();

    let root = full_info::log_no_impact_strategy(&params, 0, 0.0);
    let closed = full_info::log_two_point_closed_form(&params, 0).unwrap();
    let simplified = 10.0 / 0.05 - ((10.0f64 / 0.05).powi(2) + (1.0f64 / 0.02).powi(2)).sqrt();
    assert!((root + 6.1553).abs() <= 1e-4, "root {root}");
    assert!((closed + 6.1553).abs() <= 1e-4, "closed {closed}");
    assert!((root - closed).abs() <= 1e-8);
    assert!((root - simplified).abs() <= 1e-8);
    println!(
        "ACCEPTANCE 2 closed form vs root finder (rho=0.05): PASS: {:.6} vs {:.6}"
        , closed, root
    );
}

#[test]
fn acceptance_3_observed_regime_strategy_figures() {
    let _g = gate();
    let params = study_config().model_params().unwrap();
    let opts = FullSolveOptions::default();

    let t0 = Instant::now();
    let with = full_info::solve_full(&params, &opts, true).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let without = full_info::solve_full(&params, &opts, false).unwrap();

    let n = opts.time_steps;
    // Bull state short-sells far from maturity and is positive near it.
    assert!(with.strategy.controls[0][0] < 0.0);
    assert!(with.strategy.controls[n - 1][0] > 0.0);
    // Last recorded step before the horizon: within 5% of the no-impact level.
    for state in 0..2 {
        let a = with.strategy.controls[n - 1][state];
        let b = without.strategy.controls[n - 1][state];
        assert!(
            (a - b).abs() < 0.05 * b.abs(),
            "state {state}: {a} vs {b}"
        );
    }
    // Bear state short throughout, more aggressively with impact.
    for row in with.strategy.controls.iter().chain(&without.strategy.controls) {
        assert!(row[1] < 0.0);
    }
    assert!(with.strategy.controls[0][1] < without.strategy.controls[0][1]);
    assert!(elapsed < 5.0, "solve took {elapsed:.2} s");
    println!(
        "ACCEPTANCE 3 observed-regime strategies: PASS: h(0) = ({:.3}, {:.3}) with impact, \
         ({:.3}, {:.3}) without, solve {elapsed:.2} s",
        with.strategy.controls[0][0],
        with.strategy.controls[0][1],
        without.strategy.controls[0][0],
        without.strategy.controls[0][1]
    );
}

#[test]
fn acceptance_4_value_orderings() {
    let _g = gate();
    let s = shared();
    let w0 = s.params.initial_wealth();

    let mut min_gap = f64::INFINITY;
    for state in 0..2 {
        let with = full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, state).unwrap();
        let without =
            full_info::value_full(&s.params, &s.full_no_impact.value, 0.0, w0, state).unwrap();
        min_gap = min_gap.min(with - without);
    }
    for k in 0..=s.grid.n_pi {
        let x = s.grid.belief(k);
        let with = partial_info::value_partial(&s.params, &s.partial_impact, 0.0, w0, x).unwrap();
        let without =
            partial_info::value_partial(&s.params, &s.partial_no_impact, 0.0, w0, x).unwrap();
        min_gap = min_gap.min(with - without);
    }
    assert!(min_gap >= -1e-6, "impact ordering margin {min_gap:.3e}");

    let bull = full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, 0).unwrap();
    let bear = full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, 1).unwrap();
    assert!(bear > bull, "bear {bear} vs bull {bull}");
    println!(
        "ACCEPTANCE 4 value orderings: PASS: min(impact - no-impact) = {min_gap:.3e}, \
         bear {bear:.3} > bull {bull:.3}"
    );
}

#[test]
fn acceptance_5_gains_surface_nonnegative() {
    let _g = gate();
    let s = shared();
    let w0 = s.params.initial_wealth();

    // Timed fresh solve at the study grid.
    let t0 = Instant::now();
    let grid = BeliefGrid::new(&s.params, 4000, 200).unwrap();
    let fresh =
        partial_info::solve_partial(&s.params, &grid, &PartialSolveOptions::default(), true)
            .unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "partial solve took {elapsed:.1} s");
    drop(fresh);

    let mut min_gain = f64::INFINITY;
    for n in 0..=s.grid.n_t {
        let t = s.grid.time(n);
        for k in 0..=s.grid.n_pi {
            let x = s.grid.belief(k);
            let filtered =
                partial_info::value_partial(&s.params, &s.partial_impact, t, w0, x).unwrap();
            let averaged = partial_info::value_partial(&s.params, &s.benchmark, t, w0, x).unwrap();
            min_gain = min_gain.min(filtered - averaged);
        }
    }
    assert!(min_gain >= -1e-6, "min gain {min_gain:.3e}");
    println!(
        "ACCEPTANCE 5 filtering gains: PASS: min gain {min_gain:.3e} on the full grid, \
         solve {elapsed:.1} s"
    );
}

#[test]
fn acceptance_6_information_ordering_at_corners() {
    let _g = gate();
    let mut worst: f64 = f64::NEG_INFINITY;
    for utility in [UtilityConfig::Power { exponent: 0.5 }, UtilityConfig::Log] {
        let params = params_with(utility, 0.0);
        let w0 = params.initial_wealth();
        let grid = BeliefGrid::new(&params, 4000, 200).unwrap();
        for impact in [true, false] {
            let full =
                full_info::solve_full(&params, &FullSolveOptions::default(), impact).unwrap();
            let partial =
                partial_info::solve_partial(&params, &grid, &PartialSolveOptions::default(), impact)
                    .unwrap();
            // Belief corners: certainty of the bull (x = 1) or bear (x = 0)
            // state; the filtered investor can never beat the observer.
            for (x, state) in [(1.0, 0), (0.0, 1)] {
                let v_partial =
                    partial_info::value_partial(&params, &partial, 0.0, w0, x).unwrap();
                let v_full = full_info::value_full(&params, &full.value, 0.0, w0, state).unwrap();
                worst = worst.max(v_partial - v_full);
                assert!(
                    v_partial <= v_full + 1e-2,
                    "utility {utility:?} impact {impact} corner {x}: {v_partial} vs {v_full}"
                );
            }
        }
    }
    println!(
        "ACCEPTANCE 6 information ordering: PASS: max(partial - full) at corners = {worst:.3e}"
    );
}

#[test]
fn acceptance_7_monte_carlo_consistency() {
    let _g = gate();
    let s = shared();
    let c = study_config();
    let n = 100_000;
    let seed = c.simulation.seed;
    let w0 = s.params.initial_wealth();
    let belief = c.simulation.initial_belief.clone();
    let pi0 = belief[0];
    let state = c.initial_state_index();

    let t0 = Instant::now();
    let mut lines = Vec::new();

    let full_mode = InfoMode::Full {
        initial: InitialState::Fixed(state),
    };
    let partial_mode = InfoMode::Partial {
        initial_belief: belief,
    };

    let cases: [(&str, &ModelParams, Policy, &InfoMode, f64); 4] = [
        (
            "full-impact",
            &s.params,
            Policy::FullTable(&s.full_impact.strategy),
            &full_mode,
            full_info::value_full(&s.params, &s.full_impact.value, 0.0, w0, state).unwrap(),
        ),
        (
            "full-no-impact",
            &s.params_rigid,
            Policy::FullTable(&s.full_no_impact.strategy),
            &full_mode,
            full_info::value_full(&s.params, &s.full_no_impact.value, 0.0, w0, state).unwrap(),
        ),
        (
            "partial-impact",
            &s.params,
            Policy::PartialTable(&s.partial_impact),
            &partial_mode,
            partial_info::value_partial(&s.params, &s.partial_impact, 0.0, w0, pi0).unwrap(),
        ),
        (
            "partial-no-impact",
            &s.params_rigid,
            Policy::PartialTable(&s.partial_no_impact),
            &partial_mode,
            partial_info::value_partial(&s.params, &s.partial_no_impact, 0.0, w0, pi0).unwrap(),
        ),
    ];
    for (name, params, policy, mode, value) in cases {
        let (mean, se) = simulate::estimate_value(params, &policy, mode, n, seed).unwrap();
        let gap = (mean - value).abs();
        assert!(
            gap <= 3.0 * se,
            "{name}: |{mean:.5} - {value:.5}| = {gap:.2e} > 3 SE = {:.2e}",
            3.0 * se
        );
        lines.push(format!("{name} gap {gap:.2e} (3 SE = {:.2e})", 3.0 * se));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "simulation took {elapsed:.1} s");
    println!(
        "ACCEPTANCE 7 Monte Carlo consistency: PASS: {}; total {elapsed:.1} s",
        lines.join("; ")
    );
}

#[test]
fn acceptance_8_grid_convergence() {
    let _g = gate();
    let s = shared();

    // Doubling the belief-space grid moves the t = 0 factor by < 1%.
    let fine_grid = BeliefGrid::new(&s.params, 8000, 400).unwrap();
    let fine =
        partial_info::solve_partial(&s.params, &fine_grid, &PartialSolveOptions::default(), true)
            .unwrap();
    let mut worst_rel: f64 = 0.0;
    for k in 0..=s.grid.n_pi {
        let coarse_v = s.partial_impact.values[0][k];
        let fine_v = fine.values[0][2 * k];
        worst_rel = worst_rel.max((coarse_v - fine_v).abs() / fine_v.abs());
    }
    assert!(worst_rel < 0.01, "belief-grid refinement moved {worst_rel:.4}");

    // Halving the observed-regime step moves the t = 0 coefficients by
    // < 1e-3 relative, for the power and the log sweep alike.
    let mut worst_full: f64 = 0.0;
    for utility in [UtilityConfig::Power { exponent: 0.5 }, UtilityConfig::Log] {
        let params = params_with(utility, 0.0);
        let coarse = if matches!(utility, UtilityConfig::Power { .. }) {
            s.full_impact.clone()
        } else {
            full_info::solve_full(&params, &FullSolveOptions::default(), true).unwrap()
        };
        let fine = full_info::solve_full(
            &params,
            &FullSolveOptions {
                time_steps: 4000,
                ..Default::default()
            },
            true,
        )
        .unwrap();
        for i in 0..2 {
            let a = coarse.value.coeffs[0][i];
            let b = fine.value.coeffs[0][i];
            worst_full = worst_full.max((a - b).abs() / b.abs());
        }
    }
    assert!(worst_full < 1e-3, "time refinement moved {worst_full:.2e}");
    println!(
        "ACCEPTANCE 8 grid convergence: PASS: belief-grid change {worst_rel:.2e}, \
         time-step change {worst_full:.2e}"
    );
}

#[test]
fn acceptance_9_property_suites() {
    let _g = gate();
    let s = shared();
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);

    // Simplex preservation over 1e4 random propagations.
    for _ in 0..10_000 {
        let x: f64 = rng.gen();
        let h: f64 = rng.gen_range(-49.9..49.9);
        let dt: f64 = rng.gen_range(0.0..1.0);
        let state = regime_impact::filter::FilterState::new(vec![x, 1.0 - x]).unwrap();
        let out = regime_impact::filter::propagate(&s.params, &state, &|_| h, 0.0, dt).unwrap();
        let sum: f64 = out.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert!(out.probs().iter().all(|&p| p >= 0.0));
    }

    // Generator rows sum to zero for 1e3 random parameter draws.
    for _ in 0..1_000 {
        let a1: f64 = rng.gen_range(0.01..20.0);
        let a2: f64 = rng.gen_range(0.01..20.0);
        let b1 = rng.gen_range(0.0..1.0) * a1 / 50.0;
        let b2 = rng.gen_range(0.0..1.0) * a2 / 50.0;
        let h = rng.gen_range(-50.0..50.0);
        let mut c = study_config();
        c.model.switch_up[0] = regime_impact::config::ImpactPairConfig {
            base: a1,
            impact_slope: b1,
        };
        c.model.switch_down[0] = regime_impact::config::ImpactPairConfig {
            base: a2,
            impact_slope: b2,
        };
        let params = c.model_params().unwrap();
        let q = params.generator_matrix(h).unwrap();
        for row in &q {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    // Direct vs transformed power sweeps agree to 1e-6 relative.
    let dev = s.full_impact.transform_deviation.unwrap();
    assert!(dev <= 1e-6, "transform deviation {dev:.2e}");

    // Argmax stability: the maximizer varies along the belief grid
    // without endpoint oscillation; total variation at t = 0 within 4L.
    let tv: f64 = s.partial_impact.controls[0]
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum();
    assert!(
        tv <= 4.0 * s.params.position_limit(),
        "total variation of h*(0, .) is {tv:.1}"
    );

    // Twenty random fixed strategies never beat the node-wise supremum.
    let grid = BeliefGrid::new(&s.params, 1500, 60).unwrap();
    let solved =
        partial_info::solve_partial(&s.params, &grid, &PartialSolveOptions::default(), true)
            .unwrap();
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..20 {
        let a0: f64 = rng.gen_range(-30.0..30.0);
        let a1: f64 = rng.gen_range(-20.0..20.0);
        let w1: f64 = rng.gen_range(0.5..8.0);
        let p1: f64 = rng.gen_range(0.0..6.28);
        let a2: f64 = rng.gen_range(-20.0..20.0);
        let w2: f64 = rng.gen_range(0.5..8.0);
        let p2: f64 = rng.gen_range(0.0..6.28);
        let strategy = move |t: f64, x: f64| {
            (a0 + a1 * (w1 * t + p1).sin() + a2 * (w2 * x + p2).sin()).clamp(-49.9, 49.9)
        };
        let fixed =
            partial_info::evaluate_fixed_strategy(&s.params, &grid, &strategy, true).unwrap();
        for (vs, vf) in solved.values.iter().flatten().zip(fixed.values.iter().flatten()) {
            worst_excess = worst_excess.max(vf - vs);
        }
    }
    assert!(worst_excess <= 1e-6, "a fixed strategy beat the sup by {worst_excess:.2e}");

    // Deterministic replay of simulated paths by seed.
    let mode = InfoMode::Partial {
        initial_belief: vec![0.5, 0.5],
    };
    let policy = Policy::PartialTable(&s.partial_impact);
    let a = simulate::simulate_path(&s.params, &policy, &mode, 9, 1, &Default::default()).unwrap();
    let b = simulate::simulate_path(&s.params, &policy, &mode, 9, 1, &Default::default()).unwrap();
    assert_eq!(a, b);

    println!(
        "ACCEPTANCE 9 property suites: PASS: simplex x1e4, generator x1e3, transform dev \
         {dev:.2e}, 20 dominated strategies (max excess {worst_excess:.2e}), replay exact"
    );
}
