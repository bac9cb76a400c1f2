//! Regime-probability filter driven by price-jump observations.
//!
//! Between price jumps the conditional state probabilities follow a
//! deterministic drift: the chain part moves them with the (controlled)
//! generator, the observation part rewards states whose jump intensities
//! match the silence,
//!
//! ```text
//! d pi_i / dt = sum_j q_ji(h) pi_j  -  pi_i * sum_m (lambda_{i,m} - mean_m(pi))
//! ```
//!
//! with `mean_m(pi) = sum_j pi_j lambda_{j,m}`. At an observed jump of
//! atom m the probabilities update by Bayes' rule,
//! `pi_i <- pi_i lambda_{i,m} / mean_m(pi)`.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// How small a negative component may get before it is treated as a bug
/// rather than round-off.
const NEGATIVE_TOLERANCE: f64 = 1e-14;

/// Simplex-sum tolerance accepted at construction.
const SIMPLEX_TOLERANCE: f64 = 1e-10;

/// Integrator step ceiling as a fraction of the horizon.
const MAX_STEP_FRACTION: f64 = 1e-3;

/// A probability vector over the chain states.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    probs: Vec<f64>,
}

impl FilterState {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invalid("probs", "needs >= 2 states", probs.len()));
        }
        let mut probs = probs;
        for p in &mut probs {
            if !p.is_finite() || *p < -NEGATIVE_TOLERANCE {
                return Err(Error::invalid("probs", "entries must be >= 0", *p));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid("probs", "must sum to 1 within 1e-10", sum));
        }
        for p in &mut probs {
            *p /= sum;
        }
        Ok(FilterState { probs })
    }

    pub fn uniform(states: usize) -> Self {
        FilterState {
            probs: vec![1.0 / states as f64; states],
        }
    }

    pub fn degenerate(states: usize, state: usize) -> Self {
        let mut probs = vec![0.0; states];
        probs[state] = 1.0;
        FilterState { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Mean intensity of atom m under belief `probs`.
pub fn mean_intensity(params: &ModelParams, probs: &[f64], atom: usize) -> f64 {
    let lam = &params.jump_measure().atoms[atom].intensities;
    probs.iter().zip(lam).map(|(p, l)| p * l).sum()
}

/// The between-jump drift of the conditional probabilities. `t` is
/// accepted for forward-compatibility with time-varying jump measures.
pub fn filter_drift(params: &ModelParams, probs: &[f64], control: f64, t: f64) -> Vec<f64> {
    let _ = t;
    let k = params.states();
    let mut out = vec![0.0; k];
    // Chain part: transpose(Q(h)) * pi, assembled from adjacent rates.
    for j in 0..k {
        let up = params.rate_up(j, control);
        let down = params.rate_down(j, control);
        out[j] -= (up + down) * probs[j];
        if j + 1 < k {
            out[j + 1] += up * probs[j];
        }
        if j > 0 {
            out[j - 1] += down * probs[j];
        }
    }
    // Observation part: silence drags belief toward low-intensity states.
    let n_atoms = params.jump_measure().n_atoms();
    let mut means = vec![0.0; n_atoms];
    for (m, mean) in means.iter_mut().enumerate() {
        *mean = mean_intensity(params, probs, m);
    }
    for i in 0..k {
        let mut excess = 0.0;
        for (m, mean) in means.iter().enumerate() {
            excess += params.jump_measure().atoms[m].intensities[i] - mean;
        }
        out[i] -= probs[i] * excess;
    }
    out
}

/// Bayes update at an observed jump of atom m.
pub fn bayes_update(params: &ModelParams, state: &FilterState, atom: usize) -> Result<FilterState> {
    let mean = mean_intensity(params, state.probs(), atom);
    if mean <= 0.0 {
        return Err(Error::ImpossibleObservation { atom });
    }
    let lam = &params.jump_measure().atoms[atom].intensities;
    let probs = state
        .probs()
        .iter()
        .zip(lam)
        .map(|(p, l)| p * l / mean)
        .collect();
    Ok(FilterState { probs })
}

fn clamp_and_renormalize(probs: &mut [f64], t: f64) -> Result<()> {
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        if !p.is_finite() || *p < -NEGATIVE_TOLERANCE {
            return Err(Error::numerical(
                "filter propagation",
                format!("probability {} at t = {t}", *p),
            ));
        }
        if *p < 0.0 {
            *p = 0.0;
        }
        sum += *p;
    }
    if sum <= 0.0 {
        return Err(Error::numerical(
            "filter propagation",
            format!("belief collapsed to zero mass at t = {t}"),
        ));
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

/// Integrate the drift from t0 to t1 with a classical 4th-order one-step
/// method, the control depending on time and on the running belief. Each
/// step clamps round-off negatives and renormalizes.
pub fn propagate_with(
    params: &ModelParams,
    state: &FilterState,
    control: &dyn Fn(f64, &[f64]) -> f64,
    t0: f64,
    t1: f64,
) -> Result<FilterState> {
    if t1 < t0 {
        return Err(Error::invalid("t1", "must be >= t0", t1));
    }
    if t1 == t0 {
        return Ok(state.clone());
    }
    let k = params.states();
    let max_step = MAX_STEP_FRACTION * params.horizon();
    let n_steps = ((t1 - t0) / max_step).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / n_steps as f64;

    let mut y = state.probs().to_vec();
    let mut t = t0;
    let mut stage = vec![0.0; k];
    for _ in 0..n_steps {
        let k1 = filter_drift(params, &y, control(t, &y), t);
        for i in 0..k {
            stage[i] = y[i] + 0.5 * dt * k1[i];
        }
        let tm = t + 0.5 * dt;
        let k2 = filter_drift(params, &stage, control(tm, &stage), tm);
        for i in 0..k {
            stage[i] = y[i] + 0.5 * dt * k2[i];
        }
        let k3 = filter_drift(params, &stage, control(tm, &stage), tm);
        for i in 0..k {
            stage[i] = y[i] + dt * k3[i];
        }
        let te = t + dt;
        let k4 = filter_drift(params, &stage, control(te, &stage), te);
        for i in 0..k {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = te;
        clamp_and_renormalize(&mut y, t)?;
    }
    Ok(FilterState { probs: y })
}

/// Integrate the drift under a control that is a function of time only.
pub fn propagate(
    params: &ModelParams,
    state: &FilterState,
    control: &dyn Fn(f64) -> f64,
    t0: f64,
    t1: f64,
) -> Result<FilterState> {
    propagate_with(params, state, &|t, _| control(t), t0, t1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::model::{DiscreteCompensator, ImpactPair, JumpAtom, ModelParams, Utility};
    use proptest::prelude::*;

    fn params() -> ModelParams {
        Config::study().model_params().unwrap()
    }

    #[test]
    fn drift_matches_hand_computation() {
        // Chain part cancels at the symmetric belief, the observation part
        // is -pi(1-pi) * (sum of state-0 intensities - state-1 intensities).
        let p = params();
        let d = filter_drift(&p, &[0.5, 0.5], 0.0, 0.0);
        assert!((d[0] - 2.5).abs() < 1e-12, "drift = {:?}", d);
        assert!((d[0] + d[1]).abs() < 1e-12);
    }

    #[test]
    fn drift_observation_part_vanishes_for_identical_intensities() {
        let p = ModelParams::two_state(
            ImpactPair::new(5.0, 0.1),
            ImpactPair::new(3.0, 0.05),
            DiscreteCompensator::new(vec![JumpAtom {
                size: 0.02,
                intensities: vec![7.0, 7.0],
            }]),
            0.0,
            Utility::Log,
            1.0,
            1.0,
            50.0,
        )
        .unwrap();
        // With identical intensities only the chain part remains; check
        // against the transpose-generator product directly.
        for &pi0 in &[0.1, 0.4, 0.9] {
            let probs = [pi0, 1.0 - pi0];
            let h = 3.0;
            let d = filter_drift(&p, &probs, h, 0.0);
            let q = p.generator_matrix(h).unwrap();
            let chain0 = q[0][0] * probs[0] + q[1][0] * probs[1];
            assert!((d[0] - chain0).abs() < 1e-12);
            assert!((d[0] + d[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_update_two_hypotheses() {
        let p = params();
        // Upward atom intensities (10, 5) from the even prior.
        let s = FilterState::new(vec![0.5, 0.5]).unwrap();
        let post = bayes_update(&p, &s, 0).unwrap();
        assert!((post.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((post.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bayes_update_degenerate_prior_is_fixed() {
        let p = params();
        let s = FilterState::degenerate(2, 0);
        let post = bayes_update(&p, &s, 0).unwrap();
        assert_eq!(post.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn bayes_update_uninformative_atom_is_identity() {
        let p = ModelParams::two_state(
            ImpactPair::new(5.0, 0.1),
            ImpactPair::new(5.0, 0.1),
            DiscreteCompensator::new(vec![JumpAtom {
                size: 0.02,
                intensities: vec![4.0, 4.0],
            }]),
            0.0,
            Utility::Log,
            1.0,
            1.0,
            50.0,
        )
        .unwrap();
        let s = FilterState::new(vec![0.3, 0.7]).unwrap();
        let post = bayes_update(&p, &s, 0).unwrap();
        assert!((post.probs()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bayes_update_rejects_impossible_observation() {
        let p = params();
        let s = FilterState::degenerate(2, 1);
        // Make an observation the degenerate belief rules out.
        let zeroed = ModelParams::two_state(
            ImpactPair::new(5.0, 0.1),
            ImpactPair::new(5.0, 0.1),
            DiscreteCompensator::new(vec![JumpAtom {
                size: 0.02,
                intensities: vec![10.0, 0.0],
            }]),
            0.0,
            p.utility(),
            1.0,
            1.0,
            50.0,
        )
        .unwrap();
        assert!(matches!(
            bayes_update(&zeroed, &s, 0),
            Err(Error::ImpossibleObservation { atom: 0 })
        ));
    }

    #[test]
    fn propagate_zero_interval_is_identity() {
        let p = params();
        let s = FilterState::new(vec![0.25, 0.75]).unwrap();
        let out = propagate(&p, &s, &|_| 0.0, 0.3, 0.3).unwrap();
        assert_eq!(out, s);
    }

    /// Independent fine-step explicit-Euler integration used as oracle.
    fn euler_oracle(p: &ModelParams, start: &[f64], h: f64, t0: f64, t1: f64, dt: f64) -> Vec<f64> {
        let mut y = start.to_vec();
        let n = ((t1 - t0) / dt).round() as usize;
        let mut t = t0;
        for _ in 0..n {
            let d = filter_drift(p, &y, h, t);
            for i in 0..y.len() {
                y[i] += dt * d[i];
            }
            let s: f64 = y.iter().sum();
            for v in &mut y {
                *v /= s;
            }
            t += dt;
        }
        y
    }

    #[test]
    fn propagate_matches_fine_euler_oracle() {
        let p = params();
        let s = FilterState::new(vec![0.5, 0.5]).unwrap();
        let out = propagate(&p, &s, &|_| 0.0, 0.0, 0.01).unwrap();
        let oracle = euler_oracle(&p, &[0.5, 0.5], 0.0, 0.0, 0.01, 1e-6);
        // The first-order oracle itself carries O(1e-6) error.
        assert!(
            (out.probs()[0] - oracle[0]).abs() < 1e-6,
            "rk4 {} vs euler {}",
            out.probs()[0],
            oracle[0]
        );
        // First-order sanity: drift 2.5 over 0.01 lands near 0.525.
        assert!((out.probs()[0] - 0.525).abs() < 2e-3);
    }

    #[test]
    fn stationary_belief_stays_fixed() {
        let p = params();
        // Root-find the drift zero of the first component along the
        // one-dimensional belief slice (independent bisection).
        let drift0 = |x: f64| filter_drift(&p, &[x, 1.0 - x], 0.0, 0.0)[0];
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        assert!(drift0(lo) > 0.0 && drift0(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if drift0(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let fixed = 0.5 * (lo + hi);
        let s = FilterState::new(vec![fixed, 1.0 - fixed]).unwrap();
        let out = propagate(&p, &s, &|_| 0.0, 0.0, p.horizon()).unwrap();
        assert!(
            (out.probs()[0] - fixed).abs() < 1e-8,
            "moved from {} to {}",
            fixed,
            out.probs()[0]
        );
    }

    proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(10_000))]
        #[test]
        fn propagation_preserves_the_simplex(
            x in 0.0f64..=1.0,
            h in -49.9f64..49.9,
            dt in 0.0f64..1.0,
        ) {
            let p = params();
            let s = FilterState::new(vec![x, 1.0 - x]).unwrap();
            let out = propagate(&p, &s, &|_| h, 0.0, dt).unwrap();
            let sum: f64 = out.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
            prop_assert!(out.probs().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn bayes_update_is_projective_on_degenerate_beliefs(
            state in 0usize..2,
            atom in 0usize..2,
        ) {
            let p = params();
            let s = FilterState::degenerate(2, state);
            let post = bayes_update(&p, &s, atom).unwrap();
            prop_assert_eq!(post.probs(), s.probs());
        }
    }
}
