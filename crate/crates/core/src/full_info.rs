//! Solvers for the investor who observes the regime.
//!
//! Log utility without impact reduces to a pointwise first-order
//! condition: the position solves
//!
//! ```text
//! sum_m z_m lambda_{i,m} / (1 + h z_m) = rho
//! ```
//!
//! on the effective control set, with an endpoint fallback when no
//! interior root exists. With impact the value function separates as
//! `log(w) + c(t, state)` (log) or `(w^theta/theta) e^{theta c(t, state)}`
//! (power) and `c` solves a coupled ODE system with a node-wise supremum
//! on the right-hand side, swept backward from the zero terminal row:
//!
//! ```text
//! -dc/dt (t, i) = sup_h { (1-h) rho
//!                 + coupling(i, i+1) rate_up(i, h) + coupling(i, i-1) rate_down(i, h)
//!                 + jump_term(i, h) }
//! ```
//!
//! where `coupling(i, j)` is `c_j - c_i` (log) or `(e^{theta (c_j - c_i)} - 1)/theta`
//! (power). The power sweep is also run in the transformed variable
//! `F = e^{theta c}`, whose fixed-position dynamics are linear; both
//! routes must agree to 1e-6 relative and the solver fails otherwise.

use crate::error::{Error, Result};
use crate::model::{pow_theta, ModelParams, Utility};
use crate::opt;

/// Defaults for the backward sweep.
#[derive(Debug, Clone, Copy)]
pub struct FullSolveOptions {
    pub time_steps: usize,
    pub control_points: usize,
    pub refine_tolerance: f64,
}

impl Default for FullSolveOptions {
    fn default() -> Self {
        FullSolveOptions {
            time_steps: 2000,
            control_points: 501,
            refine_tolerance: 1e-6,
        }
    }
}

/// Value-coefficient table on (time x state): the additive log term or the
/// power exponent, zero at the horizon.
#[derive(Debug, Clone)]
pub struct ValueTableFull {
    pub times: Vec<f64>,
    /// `coeffs[n][i]` at `times[n]`, state i.
    pub coeffs: Vec<Vec<f64>>,
    pub utility: Utility,
}

/// Optimal-position table on the same grid.
#[derive(Debug, Clone)]
pub struct StrategyTableFull {
    pub times: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
}

impl StrategyTableFull {
    /// Piecewise-linear interpolation in time for one state.
    pub fn control_at(&self, t: f64, state: usize) -> f64 {
        interp_rows(&self.times, &self.controls, t, state)
    }
}

#[derive(Debug, Clone)]
pub struct FullSolution {
    pub value: ValueTableFull,
    pub strategy: StrategyTableFull,
    /// Power only: worst relative disagreement between the direct sweep
    /// and the transformed linear-variable sweep.
    pub transform_deviation: Option<f64>,
}

fn interp_rows(times: &[f64], rows: &[Vec<f64>], t: f64, col: usize) -> f64 {
    let n = times.len() - 1;
    let t_end = times[n];
    let dt = times[1] - times[0];
    let x = (t / dt).clamp(0.0, n as f64);
    let lo = x.floor() as usize;
    if lo >= n {
        return rows[n][col];
    }
    let w = x - lo as f64;
    debug_assert!(t <= t_end + 1e-9);
    rows[lo][col] * (1.0 - w) + rows[lo + 1][col] * w
}

/// First-order condition of the pointwise log problem for the
/// per-atom intensity vector `lambda` (one entry per jump atom).
fn log_foc(params: &ModelParams, lambda: &[f64], h: f64) -> f64 {
    let mut s = -params.risk_free_rate();
    for (atom, &lam) in params.jump_measure().atoms.iter().zip(lambda) {
        s += atom.size * lam / (1.0 + h * atom.size);
    }
    s
}

fn log_objective(params: &ModelParams, lambda: &[f64], h: f64) -> f64 {
    let mut s = (1.0 - h) * params.risk_free_rate();
    for (atom, &lam) in params.jump_measure().atoms.iter().zip(lambda) {
        s += lam * (1.0 + h * atom.size).ln();
    }
    s
}

/// Detect a two-point +/- measure; returns (jump size, lambda of the
/// upward atom, lambda of the downward atom).
fn two_point_shape(params: &ModelParams, lambda: &[f64]) -> Option<(f64, f64, f64)> {
    let atoms = &params.jump_measure().atoms;
    if atoms.len() != 2 || atoms[0].size != -atoms[1].size {
        return None;
    }
    let (plus, minus) = if atoms[0].size > 0.0 { (0, 1) } else { (1, 0) };
    Some((atoms[plus].size, lambda[plus], lambda[minus]))
}

/// Log-optimal position for the pointwise problem with the given per-atom
/// intensities: the FOC root on the effective control set, or the better
/// endpoint when no interior root exists.
fn log_pointwise_optimum(params: &ModelParams, lambda: &[f64]) -> f64 {
    let l = params.effective_bound();
    if params.risk_free_rate() < 1e-12 {
        if let Some((size, lam_plus, lam_minus)) = two_point_shape(params, lambda) {
            if lam_plus + lam_minus > 0.0 {
                let h = (lam_plus - lam_minus) / (size * (lam_plus + lam_minus));
                return h.clamp(-l, l);
            }
            return 0.0;
        }
    }
    let f = |h: f64| log_foc(params, lambda, h);
    let (f_lo, f_hi) = (f(-l), f(l));
    if f_lo <= 0.0 || f_hi >= 0.0 {
        // Monotone decreasing FOC with no sign change: compare endpoints.
        return if log_objective(params, lambda, -l) >= log_objective(params, lambda, l) {
            -l
        } else {
            l
        };
    }
    let (mut lo, mut hi) = (-l, l);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut h = 0.5 * (lo + hi);
    // Newton polish; the FOC derivative is strictly negative.
    for _ in 0..4 {
        let mut fp = 0.0;
        for (atom, &lam) in params.jump_measure().atoms.iter().zip(lambda) {
            let d = 1.0 + h * atom.size;
            fp -= atom.size * atom.size * lam / (d * d);
        }
        if fp == 0.0 {
            break;
        }
        let next = h - f(h) / fp;
        if next.is_finite() && next > -l && next < l {
            h = next;
        }
    }
    h
}

/// Optimal log strategy when the generator does not feel the position
/// (no market impact). Time enters only through time-varying measures,
/// which the current model does not use.
pub fn log_no_impact_strategy(params: &ModelParams, state: usize, t: f64) -> f64 {
    let _ = t;
    let lambda: Vec<f64> = params
        .jump_measure()
        .atoms
        .iter()
        .map(|a| a.intensities[state])
        .collect();
    log_pointwise_optimum(params, &lambda)
}

/// Closed form of the log no-impact position for a two-point +/- measure
/// and a positive risk-free rate.
pub fn log_two_point_closed_form(params: &ModelParams, state: usize) -> Option<f64> {
    let lambda: Vec<f64> = params
        .jump_measure()
        .atoms
        .iter()
        .map(|a| a.intensities[state])
        .collect();
    let (size, lam_plus, lam_minus) = two_point_shape(params, &lambda)?;
    let rho = params.risk_free_rate();
    if rho <= 0.0 {
        return None;
    }
    let a = (lam_plus + lam_minus) / (2.0 * rho);
    let rad = (a + 1.0 / size).powi(2) - 2.0 * lam_plus / (size * rho);
    if rad < 0.0 {
        return None;
    }
    Some(a - rad.sqrt())
}

/// Optimal position of the static one-state problem with the given
/// per-atom intensities (used by regime-blind benchmarks).
pub fn optimal_static_control(params: &ModelParams, lambda: &[f64]) -> f64 {
    match params.utility() {
        Utility::Log => log_pointwise_optimum(params, lambda),
        Utility::Power { exponent } => {
            let l = params.effective_bound();
            let rho = params.risk_free_rate();
            let atoms = &params.jump_measure().atoms;
            let f = |h: f64| {
                let mut s = (1.0 - h) * rho;
                for (atom, &lam) in atoms.iter().zip(lambda) {
                    s += lam * (pow_theta(1.0 + h * atom.size, exponent) - 1.0) / exponent;
                }
                s
            };
            opt::maximize(&f, -l, l, &[], 501, 1e-9).arg
        }
    }
}

/// Per-state supremum of the sweep right-hand side at coefficient row `y`.
/// Returns (sup values, maximizers).
fn row_suprema(
    params: &ModelParams,
    y: &[f64],
    impact: bool,
    opts: &FullSolveOptions,
) -> (Vec<f64>, Vec<f64>) {
    let k = params.states();
    let l = params.effective_bound();
    let rho = params.risk_free_rate();
    let atoms = &params.jump_measure().atoms;
    let mut sups = vec![0.0; k];
    let mut args = vec![0.0; k];
    for i in 0..k {
        // Coupling coefficients are position-free given the row.
        let coupling = |j: usize| -> f64 {
            match params.utility() {
                Utility::Log => y[j] - y[i],
                Utility::Power { exponent } => {
                    ((exponent * (y[j] - y[i])).exp() - 1.0) / exponent
                }
            }
        };
        let cu = if i + 1 < k { coupling(i + 1) } else { 0.0 };
        let cd = if i > 0 { coupling(i - 1) } else { 0.0 };
        let objective = |h: f64| {
            let hq = if impact { h } else { 0.0 };
            let mut s = (1.0 - h) * rho + cu * params.rate_up(i, hq) + cd * params.rate_down(i, hq);
            match params.utility() {
                Utility::Log => {
                    for atom in atoms.iter() {
                        s += atom.intensities[i] * (1.0 + h * atom.size).ln();
                    }
                }
                Utility::Power { exponent } => {
                    for atom in atoms.iter() {
                        s += atom.intensities[i]
                            * (pow_theta(1.0 + h * atom.size, exponent) - 1.0)
                            / exponent;
                    }
                }
            }
            s
        };
        let m = opt::maximize(&objective, -l, l, &[], opts.control_points, opts.refine_tolerance);
        sups[i] = m.value;
        args[i] = m.arg;
    }
    (sups, args)
}

fn rk4_step<F>(y: &mut [f64], dt: f64, deriv: F)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = y.len();
    let k1 = deriv(y);
    let mut stage: Vec<f64> = (0..n).map(|i| y[i] + 0.5 * dt * k1[i]).collect();
    let k2 = deriv(&stage);
    for i in 0..n {
        stage[i] = y[i] + 0.5 * dt * k2[i];
    }
    let k3 = deriv(&stage);
    for i in 0..n {
        stage[i] = y[i] + dt * k3[i];
    }
    let k4 = deriv(&stage);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Backward sweep of the coupled per-state ODE system from the zero
/// terminal row. `impact = false` freezes the switching intensities at
/// their h = 0 values inside the coupling term.
pub fn solve_full(
    params: &ModelParams,
    opts: &FullSolveOptions,
    impact: bool,
) -> Result<FullSolution> {
    let k = params.states();
    let n = opts.time_steps;
    if n == 0 {
        return Err(Error::invalid("time_steps", "must be >= 1", n));
    }
    let dt = params.horizon() / n as f64;
    let times: Vec<f64> = (0..=n).map(|j| j as f64 * dt).collect();

    let mut coeffs = vec![vec![0.0; k]; n + 1];
    let mut controls = vec![vec![0.0; k]; n + 1];

    let sup = |y: &[f64]| row_suprema(params, y, impact, opts);

    let mut y = vec![0.0; k];
    let (s, args) = sup(&y);
    check_finite_row(&times[n], &s, &args)?;
    controls[n] = args;

    // Integrate in time-to-go so the step direction is forward.
    for step in 1..=n {
        rk4_step(&mut y, dt, |row| sup(row).0);
        let idx = n - step;
        let (s, args) = sup(&y);
        check_finite_row(&times[idx], &s, &args)?;
        for (dst, src) in coeffs[idx].iter_mut().zip(&y) {
            *dst = *src;
        }
        controls[idx] = args;
    }

    // Dual route for power utility: sweep the transformed variable, whose
    // fixed-position dynamics are linear, and compare.
    let transform_deviation = if let Utility::Power { exponent } = params.utility() {
        let mut f_row = vec![1.0; k];
        let mut worst: f64 = 0.0;
        for step in 1..=n {
            rk4_step(&mut f_row, dt, |fv| {
                let gamma: Vec<f64> = fv.iter().map(|&v| v.ln() / exponent).collect();
                let (s, _) = sup(&gamma);
                (0..k).map(|i| exponent * fv[i] * s[i]).collect()
            });
            let idx = n - step;
            for i in 0..k {
                if !(f_row[i].is_finite() && f_row[i] > 0.0) {
                    return Err(Error::numerical(
                        "full-information transformed sweep",
                        format!("non-positive node at t = {:.6}, state = {i}", times[idx]),
                    ));
                }
                let direct = (exponent * coeffs[idx][i]).exp();
                let rel = (direct - f_row[i]).abs() / f_row[i].abs();
                worst = worst.max(rel);
            }
        }
        if worst > 1e-6 {
            return Err(Error::numerical(
                "full-information sweep",
                format!("direct and transformed sweeps disagree by {worst:.3e} relative"),
            ));
        }
        Some(worst)
    } else {
        None
    };

    Ok(FullSolution {
        value: ValueTableFull {
            times: times.clone(),
            coeffs,
            utility: params.utility(),
        },
        strategy: StrategyTableFull { times, controls },
        transform_deviation,
    })
}

fn check_finite_row(t: &f64, sups: &[f64], args: &[f64]) -> Result<()> {
    for (i, (s, a)) in sups.iter().zip(args).enumerate() {
        if !s.is_finite() || !a.is_finite() {
            return Err(Error::numerical(
                "full-information sweep",
                format!("non-finite supremum at t = {t:.6}, state = {i}, control = {a}"),
            ));
        }
    }
    Ok(())
}

/// Assemble the value function from the coefficient table; linear
/// interpolation between time nodes.
pub fn value_full(
    params: &ModelParams,
    table: &ValueTableFull,
    t: f64,
    wealth: f64,
    state: usize,
) -> Result<f64> {
    if !(wealth > 0.0) {
        return Err(Error::invalid("wealth", "must be > 0", wealth));
    }
    if !(0.0..=params.horizon() + 1e-12).contains(&t) {
        return Err(Error::invalid("t", "must lie in [0, horizon]", t));
    }
    let c = interp_rows(&table.times, &table.coeffs, t, state);
    Ok(match table.utility {
        Utility::Log => wealth.ln() + c,
        Utility::Power { exponent } => {
            wealth.powf(exponent) / exponent * (exponent * c).exp()
        }
    })
}
