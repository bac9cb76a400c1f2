//! Explicit upwind finite-difference solver for the belief-space
//! dynamic-programming equation of the two-state model.
//!
//! The belief coordinate is the probability of the first (bull) state. On
//! the (time, belief) rectangle the value separates as `log(w) + B(t, x)`
//! or `(w^theta/theta) G(t, x)` and the node-wise right-hand side is
//!
//! ```text
//! rhs(h) = rate_term(h) + drift(x, h) * D_x + sum_m mean_m(x) * jump_m(h)
//! ```
//!
//! where `drift` is the filter drift of the bull probability, `D_x` the
//! one-sided belief derivative chosen against the drift direction
//! (forward when the drift is nonnegative, backward otherwise; this
//! keeps the explicit scheme positive), and the nonlocal term evaluates
//! the later-time row at the Bayes-updated belief of each jump atom by
//! linear interpolation. The scheme is stepped backward from the
//! terminal row (zeros for log, ones for power) under the stability
//! bound enforced at grid construction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::full_info;
use crate::model::{pow_theta, ModelParams, Utility};
use crate::opt;

/// Stability headroom: `dt * (jump + drift/dpi + switch rates) <= 0.9`.
const CFL_LIMIT: f64 = 0.9;

/// Uniform grid on `[0, horizon] x [0, 1]`; construction enforces the
/// explicit-scheme stability bound.
#[derive(Debug, Clone, Copy)]
pub struct BeliefGrid {
    pub n_t: usize,
    pub n_pi: usize,
    pub dt: f64,
    pub dpi: f64,
    /// The stability number actually attained.
    pub cfl: f64,
}

/// Worst-case magnitude of the belief drift over grid and control set.
fn drift_bound(params: &ModelParams) -> f64 {
    let l = params.effective_bound();
    let chain = params
        .rate_up(0, -l)
        .max(params.rate_up(0, l))
        .max(params.rate_down(1, -l))
        .max(params.rate_down(1, l));
    let observation: f64 = params
        .jump_measure()
        .atoms
        .iter()
        .map(|a| a.intensities[0] - a.intensities[1])
        .sum::<f64>()
        .abs()
        / 4.0;
    chain + observation
}

impl BeliefGrid {
    pub fn new(params: &ModelParams, n_t: usize, n_pi: usize) -> Result<BeliefGrid> {
        if params.states() != 2 {
            return Err(Error::UnsupportedStateCount {
                states: params.states(),
            });
        }
        if n_t == 0 {
            return Err(Error::invalid("n_t", "must be >= 1", n_t));
        }
        if n_pi < 2 {
            return Err(Error::invalid("n_pi", "must be >= 2", n_pi));
        }
        let dt = params.horizon() / n_t as f64;
        let dpi = 1.0 / n_pi as f64;
        let rate = params.max_total_jump_intensity()
            + drift_bound(params) / dpi
            + params.max_total_switch_rate();
        let cfl = dt * rate;
        if cfl > CFL_LIMIT {
            let suggested = (params.horizon() * rate / CFL_LIMIT).ceil() as usize;
            return Err(Error::CflViolation {
                cfl,
                suggested_time_steps: suggested,
            });
        }
        Ok(BeliefGrid { n_t, n_pi, dt, dpi, cfl })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn belief(&self, k: usize) -> f64 {
        (k as f64 * self.dpi).min(1.0)
    }
}

/// Value and maximizer tables on a [`BeliefGrid`]; `values[n][k]` is the
/// additive log term or the power factor at `(time(n), belief(k))`.
#[derive(Debug, Clone)]
pub struct ValueTablePartial {
    pub grid: BeliefGrid,
    pub values: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub utility: Utility,
}

impl ValueTablePartial {
    /// Bilinear interpolation of the recorded controls.
    pub fn control_at(&self, t: f64, belief: f64) -> f64 {
        bilinear(&self.grid, &self.controls, t, belief)
    }
}

fn bilinear(grid: &BeliefGrid, rows: &[Vec<f64>], t: f64, belief: f64) -> f64 {
    let tx = (t / grid.dt).clamp(0.0, grid.n_t as f64);
    let bx = (belief / grid.dpi).clamp(0.0, grid.n_pi as f64);
    let (ti, bi) = (tx.floor() as usize, bx.floor() as usize);
    let (ti, bi) = (ti.min(grid.n_t - 1), bi.min(grid.n_pi - 1));
    let (wt, wb) = (tx - ti as f64, bx - bi as f64);
    let r0 = rows[ti][bi] * (1.0 - wb) + rows[ti][bi + 1] * wb;
    let r1 = rows[ti + 1][bi] * (1.0 - wb) + rows[ti + 1][bi + 1] * wb;
    r0 * (1.0 - wt) + r1 * wt
}

#[derive(Debug, Clone, Copy)]
pub struct PartialSolveOptions {
    pub control_points: usize,
    pub refine_tolerance: f64,
}

impl Default for PartialSolveOptions {
    fn default() -> Self {
        PartialSolveOptions {
            control_points: 201,
            refine_tolerance: 1e-6,
        }
    }
}

/// Per-node quantities that do not depend on time or position.
struct NodePre {
    /// Mean intensity per atom under this belief.
    mean: Vec<f64>,
    /// Bayes-updated belief per atom as (lower index, upper weight).
    bayes: Vec<(usize, f64)>,
    /// Belief drift as `c0 + c1 * h`.
    c0: f64,
    c1: f64,
}

fn precompute_nodes(params: &ModelParams, grid: &BeliefGrid, impact: bool) -> Vec<NodePre> {
    let atoms = &params.jump_measure().atoms;
    let obs_gap: f64 = atoms.iter().map(|a| a.intensities[0] - a.intensities[1]).sum();
    (0..=grid.n_pi)
        .map(|k| {
            let x = grid.belief(k);
            let mean: Vec<f64> = atoms
                .iter()
                .map(|a| x * a.intensities[0] + (1.0 - x) * a.intensities[1])
                .collect();
            let bayes = atoms
                .iter()
                .zip(&mean)
                .map(|(a, &mb)| {
                    if mb <= 0.0 {
                        return (0, 0.0);
                    }
                    let target = (x * a.intensities[0] / mb).clamp(0.0, 1.0);
                    let pos = target / grid.dpi;
                    let j = (pos.floor() as usize).min(grid.n_pi - 1);
                    (j, pos - j as f64)
                })
                .collect();
            // Chain part of the drift: (1-x) rate_down(1, h) - x rate_up(0, h),
            // affine in h; frozen at h = 0 without impact. The observation
            // part is position-free.
            let up = params.switch_up()[0];
            let down = params.switch_down()[0];
            let c0 = (1.0 - x) * down.base - x * up.base - x * (1.0 - x) * obs_gap;
            let c1 = if impact {
                (1.0 - x) * down.slope + x * up.slope
            } else {
                0.0
            };
            NodePre { mean, bayes, c0, c1 }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn node_rhs(
    params: &ModelParams,
    grid: &BeliefGrid,
    row: &[f64],
    k: usize,
    pre: &NodePre,
    h: f64,
) -> f64 {
    let rho = params.risk_free_rate();
    let drift = pre.c0 + pre.c1 * h;
    let diff = if k == 0 {
        (row[1] - row[0]) / grid.dpi
    } else if k == grid.n_pi {
        (row[k] - row[k - 1]) / grid.dpi
    } else if drift >= 0.0 {
        (row[k + 1] - row[k]) / grid.dpi
    } else {
        (row[k] - row[k - 1]) / grid.dpi
    };
    let mut s = drift * diff;
    match params.utility() {
        Utility::Log => {
            s += (1.0 - h) * rho;
            for (m, atom) in params.jump_measure().atoms.iter().enumerate() {
                let mean = pre.mean[m];
                if mean <= 0.0 {
                    continue;
                }
                let (j, w) = pre.bayes[m];
                let target = row[j] * (1.0 - w) + row[j + 1] * w;
                s += mean * ((1.0 + h * atom.size).ln() + target - row[k]);
            }
        }
        Utility::Power { exponent } => {
            s += row[k] * exponent * (1.0 - h) * rho;
            for (m, atom) in params.jump_measure().atoms.iter().enumerate() {
                let mean = pre.mean[m];
                if mean <= 0.0 {
                    continue;
                }
                let (j, w) = pre.bayes[m];
                let target = row[j] * (1.0 - w) + row[j + 1] * w;
                s += mean * (pow_theta(1.0 + h * atom.size, exponent) * target - row[k]);
            }
        }
    }
    s
}

fn terminal_row(utility: Utility, n_pi: usize) -> Vec<f64> {
    match utility {
        Utility::Log => vec![0.0; n_pi + 1],
        Utility::Power { .. } => vec![1.0; n_pi + 1],
    }
}

/// For negative power exponents the wealth factor in front of the value
/// is negative, so the node-wise optimization flips to a minimum.
fn optimization_sign(utility: Utility) -> f64 {
    match utility {
        Utility::Power { exponent } if exponent < 0.0 => -1.0,
        _ => 1.0,
    }
}

fn check_node(utility: Utility, value: f64, t: f64, x: f64, h: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::numerical(
            "belief-space sweep",
            format!("non-finite node at t = {t:.6}, belief = {x:.4}, control = {h}"),
        ));
    }
    if matches!(utility, Utility::Power { .. }) && value <= 0.0 {
        return Err(Error::numerical(
            "belief-space sweep",
            format!("positivity lost at t = {t:.6}, belief = {x:.4}, control = {h}"),
        ));
    }
    Ok(())
}

/// Backward sweep with the node-wise supremum over the effective control
/// set. `impact = false` freezes the switching intensities at their h = 0
/// values inside the chain part of the belief drift.
pub fn solve_partial(
    params: &ModelParams,
    grid: &BeliefGrid,
    opts: &PartialSolveOptions,
    impact: bool,
) -> Result<ValueTablePartial> {
    sweep(params, grid, opts, impact, None)
}

/// Value of following a fixed belief-measurable strategy under the true
/// filtered dynamics: the same sweep without the supremum.
pub fn evaluate_fixed_strategy(
    params: &ModelParams,
    grid: &BeliefGrid,
    strategy: &(dyn Fn(f64, f64) -> f64 + Sync),
    impact: bool,
) -> Result<ValueTablePartial> {
    sweep(
        params,
        grid,
        &PartialSolveOptions::default(),
        impact,
        Some(strategy),
    )
}

fn sweep(
    params: &ModelParams,
    grid: &BeliefGrid,
    opts: &PartialSolveOptions,
    impact: bool,
    fixed: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
) -> Result<ValueTablePartial> {
    if params.states() != 2 {
        return Err(Error::UnsupportedStateCount {
            states: params.states(),
        });
    }
    let l = params.effective_bound();
    let sign = optimization_sign(params.utility());
    let pre = precompute_nodes(params, grid, impact);
    let n_t = grid.n_t;
    let n_pi = grid.n_pi;

    let mut values = vec![Vec::new(); n_t + 1];
    values[n_t] = terminal_row(params.utility(), n_pi);

    // Maximizer tables follow the backward algorithm's convention: the
    // control recorded at a node is computed from that node's own row,
    // and the step from row n+1 down to row n uses row n+1's control.
    let mut controls: Vec<Vec<f64>> = match fixed {
        Some(strategy) => (0..=n_t)
            .map(|n| {
                let t = grid.time(n);
                (0..=n_pi)
                    .map(|k| strategy(t, grid.belief(k)).clamp(-l, l))
                    .collect()
            })
            .collect(),
        None => vec![vec![0.0; n_pi + 1]; n_t + 1],
    };

    // Supremum (or fixed-control evaluation) of the right-hand side over
    // one row; returns per-node (rhs, control).
    let row_opt = |row: &[f64], row_controls: &[f64], fix: bool| -> Vec<(f64, f64)> {
        (0..=n_pi)
            .into_par_iter()
            .map(|k| {
                let p = &pre[k];
                if fix {
                    let h = row_controls[k];
                    (node_rhs(params, grid, row, k, p, h), h)
                } else {
                    let f = |h: f64| sign * node_rhs(params, grid, row, k, p, h);
                    let mut kinks: [f64; 1] = [0.0];
                    let n_kinks = if k > 0 && k < n_pi && p.c1 != 0.0 {
                        kinks[0] = -p.c0 / p.c1;
                        1
                    } else {
                        0
                    };
                    let m = opt::maximize(
                        &f,
                        -l,
                        l,
                        &kinks[..n_kinks],
                        opts.control_points,
                        opts.refine_tolerance,
                    );
                    (sign * m.value, m.arg)
                }
            })
            .collect()
    };

    let fix = fixed.is_some();
    let mut current = row_opt(&values[n_t], &controls[n_t], fix);
    if !fix {
        for (k, &(_, h)) in current.iter().enumerate() {
            controls[n_t][k] = h;
        }
    }
    for n in (0..n_t).rev() {
        let mut new_row = vec![0.0; n_pi + 1];
        for (k, &(rhs, h)) in current.iter().enumerate() {
            let v = values[n + 1][k] + grid.dt * rhs;
            check_node(params.utility(), v, grid.time(n), grid.belief(k), h)?;
            new_row[k] = v;
        }
        values[n] = new_row;
        current = row_opt(&values[n], &controls[n], fix);
        if !fix {
            for (k, &(_, h)) in current.iter().enumerate() {
                controls[n][k] = h;
            }
        }
    }

    Ok(ValueTablePartial {
        grid: *grid,
        values,
        controls,
        utility: params.utility(),
    })
}

/// The regime-blind benchmark position: the optimal static control of the
/// one-state problem whose intensities mix the per-state ones with the
/// stationary weights of the uncontrolled chain.
#[derive(Debug, Clone)]
pub struct AveragedStrategy {
    pub control: f64,
    pub stationary: Vec<f64>,
    pub mixed_intensities: Vec<f64>,
}

pub fn averaged_parameter_strategy(params: &ModelParams) -> Result<AveragedStrategy> {
    let k = params.states();
    // Stationary weights of the h = 0 birth-death chain.
    let mut weights = vec![1.0; k];
    for i in 0..k - 1 {
        let up = params.rate_up(i, 0.0);
        let down = params.rate_down(i + 1, 0.0);
        if down <= 0.0 {
            return Err(Error::invalid(
                "switch_down.base",
                "stationary mixing requires positive base switching rates",
                down,
            ));
        }
        weights[i + 1] = weights[i] * up / down;
    }
    let total: f64 = weights.iter().sum();
    let stationary: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
    let mixed: Vec<f64> = params
        .jump_measure()
        .atoms
        .iter()
        .map(|a| {
            a.intensities
                .iter()
                .zip(&stationary)
                .map(|(lam, p)| lam * p)
                .sum()
        })
        .collect();
    let control = full_info::optimal_static_control(params, &mixed);
    Ok(AveragedStrategy {
        control,
        stationary,
        mixed_intensities: mixed,
    })
}

/// Assemble the value function from the table; bilinear interpolation.
pub fn value_partial(
    params: &ModelParams,
    table: &ValueTablePartial,
    t: f64,
    wealth: f64,
    belief: f64,
) -> Result<f64> {
    if !(wealth > 0.0) {
        return Err(Error::invalid("wealth", "must be > 0", wealth));
    }
    if !(0.0..=params.horizon() + 1e-12).contains(&t) {
        return Err(Error::invalid("t", "must lie in [0, horizon]", t));
    }
    if !(0.0..=1.0).contains(&belief) {
        return Err(Error::invalid("belief", "must lie in [0, 1]", belief));
    }
    let v = bilinear(&table.grid, &table.values, t, belief);
    Ok(match table.utility {
        Utility::Log => wealth.ln() + v,
        Utility::Power { exponent } => wealth.powf(exponent) / exponent * v,
    })
}
