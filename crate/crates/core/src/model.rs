//! Market, impact and utility parameters.
//!
//! The market sentiment is a K-state chain with next-neighbour dynamics.
//! State index 0 is the best ("bull") sentiment; higher indices are worse.
//! The investor's position h moves the switching intensities linearly:
//!
//! ```text
//! rate(i -> i+1) = base - slope * h      (buying suppresses downgrades)
//! rate(i -> i-1) = base + slope * h      (buying promotes upgrades)
//! ```
//!
//! The risky-asset return is pure-jump: while the chain sits in state i,
//! a jump of size `z_m` arrives with intensity `lambda[i][m]`. Wealth
//! follows `dW = W ((1-h) rho dt + h dR)`.

use crate::error::{Error, Result};

/// Optimizers search the closed interval `[-L(1-margin), L(1-margin)]`
/// so that every wealth-jump factor stays strictly positive.
pub const EFFECTIVE_CONTROL_MARGIN: f64 = 1e-3;

/// `x^theta` with the half-exponent fast path; the study exponent is 0.5
/// and this sits in every solver's inner loop.
#[inline]
pub(crate) fn pow_theta(x: f64, theta: f64) -> f64 {
    if theta == 0.5 {
        x.sqrt()
    } else {
        x.powf(theta)
    }
}

/// Terminal-wealth utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Log,
    /// `U(w) = w^theta / theta`, `theta < 1`, `theta != 0`.
    Power { exponent: f64 },
}

impl Utility {
    pub fn is_power(&self) -> bool {
        matches!(self, Utility::Power { .. })
    }
}

/// One affine switching intensity `base +/- slope * h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactPair {
    pub base: f64,
    pub slope: f64,
}

impl ImpactPair {
    pub fn new(base: f64, slope: f64) -> Self {
        ImpactPair { base, slope }
    }
}

/// One jump size with its per-state arrival intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpAtom {
    pub size: f64,
    /// `intensities[i]` is the arrival rate of this jump size while the
    /// chain sits in state i.
    pub intensities: Vec<f64>,
}

/// The jump compensator as a finite list of atoms. An empty atom list is
/// a deliberately jump-free market (useful for degenerate checks); a
/// listed atom must carry positive intensity in at least one state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteCompensator {
    pub atoms: Vec<JumpAtom>,
}

impl DiscreteCompensator {
    pub fn new(atoms: Vec<JumpAtom>) -> Self {
        DiscreteCompensator { atoms }
    }

    /// Total jump intensity in state i.
    pub fn total_intensity(&self, state: usize) -> f64 {
        self.atoms.iter().map(|a| a.intensities[state]).sum()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }
}

/// Full parameterization of the controlled market.
#[derive(Debug, Clone)]
pub struct ModelParams {
    states: usize,
    /// `switch_up[i]`: intensity pair for i -> i+1, i = 0..K-2.
    switch_up: Vec<ImpactPair>,
    /// `switch_down[i]`: intensity pair for i+1 -> i, i = 0..K-2.
    switch_down: Vec<ImpactPair>,
    jump_measure: DiscreteCompensator,
    risk_free_rate: f64,
    utility: Utility,
    horizon: f64,
    initial_wealth: f64,
    position_limit: f64,
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(name, "must be finite", value));
    }
    Ok(())
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        states: usize,
        switch_up: Vec<ImpactPair>,
        switch_down: Vec<ImpactPair>,
        jump_measure: DiscreteCompensator,
        risk_free_rate: f64,
        utility: Utility,
        horizon: f64,
        initial_wealth: f64,
        position_limit: f64,
    ) -> Result<Self> {
        if states < 2 {
            return Err(Error::invalid("states", "must be >= 2", states));
        }
        if switch_up.len() != states - 1 || switch_down.len() != states - 1 {
            return Err(Error::invalid(
                "switch_up/switch_down",
                "must each list states-1 adjacent transitions",
                format!("{}/{}", switch_up.len(), switch_down.len()),
            ));
        }
        check_finite("position_limit", position_limit)?;
        if position_limit <= 0.0 {
            return Err(Error::invalid("position_limit", "must be > 0", position_limit));
        }
        for (name, pairs) in [("switch_up", &switch_up), ("switch_down", &switch_down)] {
            for (i, p) in pairs.iter().enumerate() {
                check_finite(&format!("{name}[{i}].base"), p.base)?;
                check_finite(&format!("{name}[{i}].impact_slope"), p.slope)?;
                if p.base < 0.0 {
                    return Err(Error::invalid(
                        &format!("{name}[{i}].base"),
                        "must be >= 0",
                        p.base,
                    ));
                }
                // Positivity of every intensity over the full control set.
                if p.slope.abs() * position_limit > p.base {
                    return Err(Error::invalid(
                        &format!("{name}[{i}].impact_slope"),
                        &format!(
                            "|impact_slope| * position_limit must be <= base (= {}) so intensities stay >= 0 on [-L, L]",
                            p.base
                        ),
                        p.slope,
                    ));
                }
            }
        }
        check_finite("risk_free_rate", risk_free_rate)?;
        if risk_free_rate < 0.0 {
            return Err(Error::invalid("risk_free_rate", "must be >= 0", risk_free_rate));
        }
        if let Utility::Power { exponent } = utility {
            check_finite("utility.exponent", exponent)?;
            if exponent >= 1.0 || exponent == 0.0 {
                return Err(Error::invalid(
                    "utility.exponent",
                    "must satisfy exponent < 1 and exponent != 0",
                    exponent,
                ));
            }
        }
        check_finite("horizon", horizon)?;
        if horizon <= 0.0 {
            return Err(Error::invalid("horizon", "must be > 0", horizon));
        }
        check_finite("initial_wealth", initial_wealth)?;
        if initial_wealth <= 0.0 {
            return Err(Error::invalid("initial_wealth", "must be > 0", initial_wealth));
        }

        let effective = position_limit * (1.0 - EFFECTIVE_CONTROL_MARGIN);
        for (m, atom) in jump_measure.atoms.iter().enumerate() {
            check_finite(&format!("jump_atoms[{m}].size"), atom.size)?;
            if atom.size == 0.0 {
                return Err(Error::invalid(
                    &format!("jump_atoms[{m}].size"),
                    "must be nonzero",
                    atom.size,
                ));
            }
            if atom.intensities.len() != states {
                return Err(Error::invalid(
                    &format!("jump_atoms[{m}].intensities"),
                    "must list one intensity per state",
                    atom.intensities.len(),
                ));
            }
            let mut any_positive = false;
            for (i, &lam) in atom.intensities.iter().enumerate() {
                check_finite(&format!("jump_atoms[{m}].intensities[{i}]"), lam)?;
                if lam < 0.0 {
                    return Err(Error::invalid(
                        &format!("jump_atoms[{m}].intensities[{i}]"),
                        "must be >= 0",
                        lam,
                    ));
                }
                any_positive |= lam > 0.0;
            }
            if !any_positive {
                return Err(Error::invalid(
                    &format!("jump_atoms[{m}].intensities"),
                    "at least one state must have positive intensity",
                    "all zero",
                ));
            }
            // Admissibility: 1 + h*z > 0 on the effective control set.
            if effective * atom.size.abs() >= 1.0 {
                return Err(Error::invalid(
                    &format!("jump_atoms[{m}].size"),
                    &format!(
                        "position_limit * (1 - {EFFECTIVE_CONTROL_MARGIN}) * |size| must be < 1 \
                         so wealth stays positive"
                    ),
                    atom.size,
                ));
            }
        }

        Ok(ModelParams {
            states,
            switch_up,
            switch_down,
            jump_measure,
            risk_free_rate,
            utility,
            horizon,
            initial_wealth,
            position_limit,
        })
    }

    /// Convenience constructor for the two-state model.
    #[allow(clippy::too_many_arguments)]
    pub fn two_state(
        up: ImpactPair,
        down: ImpactPair,
        jump_measure: DiscreteCompensator,
        risk_free_rate: f64,
        utility: Utility,
        horizon: f64,
        initial_wealth: f64,
        position_limit: f64,
    ) -> Result<Self> {
        ModelParams::new(
            2,
            vec![up],
            vec![down],
            jump_measure,
            risk_free_rate,
            utility,
            horizon,
            initial_wealth,
            position_limit,
        )
    }

    pub fn states(&self) -> usize {
        self.states
    }
    pub fn jump_measure(&self) -> &DiscreteCompensator {
        &self.jump_measure
    }
    pub fn risk_free_rate(&self) -> f64 {
        self.risk_free_rate
    }
    pub fn utility(&self) -> Utility {
        self.utility
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn initial_wealth(&self) -> f64 {
        self.initial_wealth
    }
    pub fn position_limit(&self) -> f64 {
        self.position_limit
    }
    pub fn switch_up(&self) -> &[ImpactPair] {
        &self.switch_up
    }
    pub fn switch_down(&self) -> &[ImpactPair] {
        &self.switch_down
    }

    /// Half-width of the interval optimizers actually search.
    pub fn effective_bound(&self) -> f64 {
        self.position_limit * (1.0 - EFFECTIVE_CONTROL_MARGIN)
    }

    /// Intensity of i -> i+1 at position h (zero off the last state).
    pub fn rate_up(&self, state: usize, control: f64) -> f64 {
        if state + 1 >= self.states {
            return 0.0;
        }
        let p = self.switch_up[state];
        p.base - p.slope * control
    }

    /// Intensity of i -> i-1 at position h (zero off state 0).
    pub fn rate_down(&self, state: usize, control: f64) -> f64 {
        if state == 0 {
            return 0.0;
        }
        let p = self.switch_down[state - 1];
        p.base + p.slope * control
    }

    /// The controlled generator matrix Q(h). Rows sum to zero; entries
    /// vanish beyond next neighbours.
    pub fn generator_matrix(&self, control: f64) -> Result<Vec<Vec<f64>>> {
        if !control.is_finite() || control.abs() > self.position_limit {
            return Err(Error::invalid(
                "control",
                &format!("must lie in [-{0}, {0}]", self.position_limit),
                control,
            ));
        }
        let k = self.states;
        let mut q = vec![vec![0.0; k]; k];
        for i in 0..k {
            let up = self.rate_up(i, control);
            let down = self.rate_down(i, control);
            if i + 1 < k {
                q[i][i + 1] = up;
            }
            if i > 0 {
                q[i][i - 1] = down;
            }
            q[i][i] = -(up + down);
        }
        Ok(q)
    }

    /// Wealth after a jump of size z taken with position h.
    pub fn wealth_after_jump(&self, wealth: f64, control: f64, jump_size: f64) -> Result<f64> {
        let factor = 1.0 + control * jump_size;
        if factor <= 0.0 {
            return Err(Error::Inadmissible {
                control,
                jump_size,
                factor,
            });
        }
        Ok(wealth * factor)
    }

    /// U(w).
    pub fn utility_value(&self, wealth: f64) -> Result<f64> {
        if !(wealth > 0.0) {
            return Err(Error::invalid("wealth", "must be > 0", wealth));
        }
        Ok(match self.utility {
            Utility::Log => wealth.ln(),
            Utility::Power { exponent } => wealth.powf(exponent) / exponent,
        })
    }

    /// Largest total switching intensity out of any state over the
    /// effective control set (affine in h, so attained at an endpoint).
    pub fn max_total_switch_rate(&self) -> f64 {
        let l = self.effective_bound();
        (0..self.states)
            .map(|i| {
                let up = self.rate_up(i, -l).max(self.rate_up(i, l));
                let down = self.rate_down(i, -l).max(self.rate_down(i, l));
                up + down
            })
            .fold(0.0, f64::max)
    }

    /// Largest total price-jump intensity over the states.
    pub fn max_total_jump_intensity(&self) -> f64 {
        (0..self.states)
            .map(|i| self.jump_measure.total_intensity(i))
            .fold(0.0, f64::max)
    }

    /// Human-readable warnings about accepted coefficients whose sign
    /// reverses the conventional impact direction. Intensities stay
    /// nonnegative either way; the constructor already rejected anything
    /// that could go negative.
    pub fn coefficient_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for (name, pairs) in [("switch_up", &self.switch_up), ("switch_down", &self.switch_down)] {
            for (i, p) in pairs.iter().enumerate() {
                if p.slope < 0.0 {
                    warnings.push(format!(
                        "{name}[{i}].impact_slope = {} is negative: buying promotes downgrades \
                         (the conventional direction is reversed)",
                        p.slope
                    ));
                }
            }
        }
        warnings
    }
}
