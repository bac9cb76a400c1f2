//! Exact simulation of the controlled system by thinning.
//!
//! Candidate event times arrive at the constant dominating rate
//! `bound = max_i (total jump intensity(i) + max_h total switch rate(i, h))`;
//! each candidate is accepted as a price jump or a chain transition with
//! the exact current sub-intensities, which depend on the running control
//! and therefore on the chain state (observed-regime policies) or on the
//! filtered belief (partial-information policies). Between candidates the
//! wealth accrues `(1-h) rho` and, in partial mode, the belief follows the
//! filter drift; at an accepted price jump the wealth is multiplied by
//! `1 + h z` and the belief gets the Bayes update. The chain always moves
//! physically; partial-information policies never read it.
//!
//! Every path owns a counter-seeded stream: path p of a run with seed s
//! draws from stream (s, p), so results are reproducible bit-for-bit and
//! independent of scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{self, FilterState};
use crate::full_info::StrategyTableFull;
use crate::model::ModelParams;
use crate::partial_info::ValueTablePartial;

/// Substep ceiling for the deterministic flow, as a fraction of the horizon.
const FLOW_STEP_FRACTION: f64 = 1e-3;

/// Hard cap on thinning candidates per path.
const MAX_CANDIDATES: usize = 50_000_000;

/// Where a simulated path starts.
#[derive(Debug, Clone)]
pub enum InfoMode {
    /// The policy observes the chain; the path starts in a fixed state or
    /// with a state drawn from the given distribution.
    Full { initial: InitialState },
    /// The policy observes prices only; the chain starts from the belief
    /// and the filter starts at the belief.
    Partial { initial_belief: Vec<f64> },
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Fixed(usize),
    Sampled(Vec<f64>),
}

/// A simulation policy. Table-backed policies interpolate linearly in
/// time (observed-regime) or bilinearly in (time, belief); all controls
/// are clamped to the effective set.
pub enum Policy<'a> {
    Flat(f64),
    FullTable(&'a StrategyTableFull),
    PartialTable(&'a ValueTablePartial),
}

impl<'a> Policy<'a> {
    fn control(&self, params: &ModelParams, t: f64, state: usize, belief: Option<&[f64]>) -> f64 {
        let l = params.effective_bound();
        let raw = match self {
            Policy::Flat(h) => *h,
            Policy::FullTable(table) => table.control_at(t, state),
            Policy::PartialTable(table) => {
                let b = belief.expect("belief-based policy needs a belief");
                table.control_at(t, b[0])
            }
        };
        raw.clamp(-l, l)
    }

    fn needs_belief(&self) -> bool {
        matches!(self, Policy::PartialTable(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    ChainTransition { from: usize, to: usize },
    PriceJump { atom: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// One realized path: the event log plus state/belief/wealth samples on
/// an even reporting grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPath {
    pub events: Vec<Event>,
    pub wealth_terminal: f64,
    pub report_times: Vec<f64>,
    pub chain_states: Vec<usize>,
    pub wealth_samples: Vec<f64>,
    /// Belief rows at the report times (partial mode only).
    pub filter_probs: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub report_points: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { report_points: 11 }
    }
}

/// Dominating rate for the thinning proposals.
pub fn thinning_bound(params: &ModelParams) -> f64 {
    let l = params.effective_bound();
    (0..params.states())
        .map(|i| {
            let switch = params.rate_up(i, -l).max(params.rate_up(i, l))
                + params.rate_down(i, -l).max(params.rate_down(i, l));
            params.jump_measure().total_intensity(i) + switch
        })
        .fold(0.0, f64::max)
}

struct PathState<'a> {
    params: &'a ModelParams,
    policy: &'a Policy<'a>,
    t: f64,
    state: usize,
    belief: Option<FilterState>,
    wealth: f64,
    /// Next report index and the report grid.
    report_times: Vec<f64>,
    next_report: usize,
    chain_states: Vec<usize>,
    wealth_samples: Vec<f64>,
    filter_probs: Option<Vec<Vec<f64>>>,
}

impl<'a> PathState<'a> {
    fn control_now(&self) -> f64 {
        self.policy.control(
            self.params,
            self.t,
            self.state,
            self.belief.as_ref().map(|b| b.probs()),
        )
    }

    fn record_if_due(&mut self) {
        while self.next_report < self.report_times.len()
            && self.t >= self.report_times[self.next_report] - 1e-12
        {
            self.chain_states.push(self.state);
            self.wealth_samples.push(self.wealth);
            if let (Some(rows), Some(b)) = (self.filter_probs.as_mut(), self.belief.as_ref()) {
                rows.push(b.probs().to_vec());
            }
            self.next_report += 1;
        }
    }

    /// Advance the deterministic flow to `target`, stopping at report
    /// times. Returns an error only from the filter integrator.
    fn advance(&mut self, target: f64) -> Result<()> {
        while self.t < target {
            let stop = if self.next_report < self.report_times.len() {
                self.report_times[self.next_report].min(target)
            } else {
                target
            };
            self.flow_segment(stop)?;
            self.t = stop;
            self.record_if_due();
        }
        Ok(())
    }

    fn flow_segment(&mut self, stop: f64) -> Result<()> {
        let span = stop - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let rho = self.params.risk_free_rate();
        match &self.belief {
            None => {
                // Observed-regime flow: only the wealth drift matters.
                if rho > 0.0 {
                    let n = (span / (FLOW_STEP_FRACTION * self.params.horizon()))
                        .ceil()
                        .max(1.0) as usize;
                    let dt = span / n as f64;
                    let mut integral = 0.0;
                    let mut h_prev = self.control_now();
                    for j in 1..=n {
                        let tj = self.t + j as f64 * dt;
                        let h = self.policy.control(self.params, tj, self.state, None);
                        integral += 0.5 * (h_prev + h) * dt;
                        h_prev = h;
                    }
                    self.wealth *= (rho * (span - integral)).exp();
                }
            }
            Some(belief) => {
                let n = (span / (FLOW_STEP_FRACTION * self.params.horizon()))
                    .ceil()
                    .max(1.0) as usize;
                let dt = span / n as f64;
                let mut current = belief.clone();
                let mut integral = 0.0;
                let mut h_prev =
                    self.policy
                        .control(self.params, self.t, self.state, Some(current.probs()));
                for j in 1..=n {
                    let a = self.t + (j - 1) as f64 * dt;
                    let b = self.t + j as f64 * dt;
                    let policy = self.policy;
                    let params = self.params;
                    let state = self.state;
                    current = filter::propagate_with(
                        self.params,
                        &current,
                        &|s, probs| policy.control(params, s, state, Some(probs)),
                        a,
                        b,
                    )?;
                    let h = self
                        .policy
                        .control(self.params, b, self.state, Some(current.probs()));
                    integral += 0.5 * (h_prev + h) * dt;
                    h_prev = h;
                }
                if rho > 0.0 {
                    self.wealth *= (rho * (span - integral)).exp();
                }
                self.belief = Some(current);
            }
        }
        Ok(())
    }
}

/// Simulate one path. `seed` identifies the run, `stream` the path within
/// the run; identical arguments reproduce the path bit for bit.
pub fn simulate_path(
    params: &ModelParams,
    policy: &Policy,
    mode: &InfoMode,
    seed: u64,
    stream: u64,
    opts: &SimOptions,
) -> Result<SimulationPath> {
    if opts.report_points < 2 {
        return Err(Error::invalid("report_points", "must be >= 2", opts.report_points));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let horizon = params.horizon();
    let bound = thinning_bound(params);
    let report_times: Vec<f64> = (0..opts.report_points)
        .map(|j| horizon * j as f64 / (opts.report_points - 1) as f64)
        .collect();

    let sample_state = |rng: &mut ChaCha8Rng, probs: &[f64]| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    };

    let (state, belief) = match mode {
        InfoMode::Full { initial } => {
            let s = match initial {
                InitialState::Fixed(i) => {
                    if *i >= params.states() {
                        return Err(Error::invalid(
                            "initial_state",
                            "must name an existing state",
                            i,
                        ));
                    }
                    *i
                }
                InitialState::Sampled(probs) => {
                    // Reuse the filter-state validation of the distribution.
                    let checked = FilterState::new(probs.clone())?;
                    sample_state(&mut rng, checked.probs())
                }
            };
            (s, None)
        }
        InfoMode::Partial { initial_belief } => {
            let b = FilterState::new(initial_belief.clone())?;
            let s = sample_state(&mut rng, b.probs());
            (s, Some(b))
        }
    };
    if let Policy::FullTable(table) = policy {
        if belief.is_some() {
            return Err(Error::invalid(
                "policy",
                "an observed-regime policy cannot run in partial mode",
                "full-table policy",
            ));
        }
        if table.controls[0].len() != params.states() {
            return Err(Error::invalid(
                "policy",
                "strategy table and model disagree on the state count",
                table.controls[0].len(),
            ));
        }
    }
    if policy.needs_belief() && belief.is_none() {
        return Err(Error::invalid(
            "policy",
            "a belief-based policy needs partial mode",
            "partial-table policy",
        ));
    }

    let track_filter = belief.is_some();
    let mut path = PathState {
        params,
        policy,
        t: 0.0,
        state,
        belief,
        wealth: params.initial_wealth(),
        report_times: report_times.clone(),
        next_report: 0,
        chain_states: Vec::with_capacity(opts.report_points),
        wealth_samples: Vec::with_capacity(opts.report_points),
        filter_probs: if track_filter {
            Some(Vec::with_capacity(opts.report_points))
        } else {
            None
        },
    };
    path.record_if_due();

    let mut events = Vec::new();
    if bound > 0.0 {
        let mut exhausted = true;
        for _ in 0..MAX_CANDIDATES {
            let u: f64 = rng.gen();
            let wait = -(1.0 - u).ln() / bound;
            let candidate = path.t + wait;
            if candidate >= horizon {
                exhausted = false;
                break;
            }
            path.advance(candidate)?;
            let h = path.control_now();

            let accept: f64 = rng.gen::<f64>() * bound;
            let mut acc = 0.0;
            let mut total = 0.0;
            let mut chosen: Option<EventKind> = None;
            for (m, atom) in params.jump_measure().atoms.iter().enumerate() {
                let lam = atom.intensities[path.state];
                total += lam;
                if chosen.is_none() {
                    acc += lam;
                    if accept < acc {
                        chosen = Some(EventKind::PriceJump { atom: m });
                    }
                }
            }
            let up = params.rate_up(path.state, h);
            total += up;
            if chosen.is_none() {
                acc += up;
                if accept < acc {
                    chosen = Some(EventKind::ChainTransition {
                        from: path.state,
                        to: path.state + 1,
                    });
                }
            }
            let down = params.rate_down(path.state, h);
            total += down;
            if chosen.is_none() {
                acc += down;
                if accept < acc {
                    chosen = Some(EventKind::ChainTransition {
                        from: path.state,
                        to: path.state - 1,
                    });
                }
            }
            if total > bound * (1.0 + 1e-12) {
                return Err(Error::ThinningBound {
                    intensity: total,
                    bound,
                    time: candidate,
                });
            }
            match chosen {
                Some(EventKind::PriceJump { atom }) => {
                    let z = params.jump_measure().atoms[atom].size;
                    path.wealth = params.wealth_after_jump(path.wealth, h, z)?;
                    if let Some(b) = path.belief.take() {
                        path.belief = Some(filter::bayes_update(params, &b, atom)?);
                    }
                    events.push(Event {
                        time: candidate,
                        kind: EventKind::PriceJump { atom },
                    });
                }
                Some(EventKind::ChainTransition { from, to }) => {
                    path.state = to;
                    events.push(Event {
                        time: candidate,
                        kind: EventKind::ChainTransition { from, to },
                    });
                }
                None => {}
            }
        }
        if exhausted {
            return Err(Error::numerical(
                "thinning simulation",
                format!("candidate budget exhausted before t = {horizon}"),
            ));
        }
    }
    path.advance(horizon)?;
    path.record_if_due();

    Ok(SimulationPath {
        events,
        wealth_terminal: path.wealth,
        report_times,
        chain_states: path.chain_states,
        wealth_samples: path.wealth_samples,
        filter_probs: path.filter_probs,
        seed,
        stream,
    })
}

/// Numerically stable deterministic reduction.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Terminal utilities of `n_paths` independent paths.
pub fn path_utilities(
    params: &ModelParams,
    policy: &Policy,
    mode: &InfoMode,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let opts = SimOptions { report_points: 2 };
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = simulate_path(params, policy, mode, seed, p, &opts)?;
            params.utility_value(path.wealth_terminal)
        })
        .collect()
}

/// Sample mean and standard error of the terminal utility.
pub fn estimate_value(
    params: &ModelParams,
    policy: &Policy,
    mode: &InfoMode,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "must be >= 2 (standard error undefined)", n_paths));
    }
    let utilities = path_utilities(params, policy, mode, n_paths, seed)?;
    Ok(mean_and_se(&utilities))
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}
