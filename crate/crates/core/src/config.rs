//! JSON configuration: schema-checked parsing, range validation, policy
//! specs. The published schema lives in `schema/config.schema.json`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteCompensator, ImpactPair, JumpAtom, ModelParams, Utility};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of chain states; state 1 is the best sentiment.
    pub states: usize,
    /// Affine intensities for i -> i+1, one entry per adjacent pair.
    pub switch_up: Vec<ImpactPairConfig>,
    /// Affine intensities for i+1 -> i, one entry per adjacent pair.
    pub switch_down: Vec<ImpactPairConfig>,
    pub jump_atoms: Vec<JumpAtomConfig>,
    pub risk_free_rate: f64,
    pub utility: UtilityConfig,
    /// Horizon in years.
    pub horizon: f64,
    pub initial_wealth: f64,
    /// Position bound L: controls live in [-L, L].
    pub position_limit: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactPairConfig {
    pub base: f64,
    pub impact_slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpAtomConfig {
    pub size: f64,
    pub intensities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum UtilityConfig {
    Log,
    Power { exponent: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Backward time steps for the observed-regime ODE sweep.
    pub full_time_steps: usize,
    /// Backward time steps for the belief-space PDE sweep.
    pub partial_time_steps: usize,
    /// Belief-grid intervals on [0, 1].
    pub partial_belief_points: usize,
    /// Coarse control candidates per node-wise supremum.
    pub full_control_points: usize,
    pub partial_control_points: usize,
    /// Golden-section refinement tolerance on the control.
    pub refine_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            full_time_steps: 2000,
            partial_time_steps: 4000,
            partial_belief_points: 200,
            full_control_points: 501,
            partial_control_points: 201,
            refine_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub paths: usize,
    pub seed: u64,
    /// Initial chain state for observed-regime simulations (1-based).
    pub initial_state: usize,
    /// Initial regime probabilities for belief-based simulations.
    pub initial_belief: Vec<f64>,
    /// Rows in the per-path reporting grid.
    pub report_points: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            paths: 100_000,
            seed: 42,
            initial_state: 1,
            initial_belief: vec![0.5, 0.5],
            report_points: 11,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    /// Time samples per state/belief column in the figure CSVs.
    pub figure_time_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".to_string(),
            figure_time_points: 101,
        }
    }
}

impl Config {
    /// The pinned two-state study configuration (same content as
    /// `configs/study.json`).
    pub fn study() -> Config {
        Config {
            model: ModelConfig {
                states: 2,
                switch_up: vec![ImpactPairConfig {
                    base: 5.0,
                    impact_slope: 0.1,
                }],
                switch_down: vec![ImpactPairConfig {
                    base: 5.0,
                    impact_slope: 0.1,
                }],
                jump_atoms: vec![
                    JumpAtomConfig {
                        size: 0.02,
                        intensities: vec![10.0, 5.0],
                    },
                    JumpAtomConfig {
                        size: -0.02,
                        intensities: vec![5.0, 20.0],
                    },
                ],
                risk_free_rate: 0.0,
                utility: UtilityConfig::Power { exponent: 0.5 },
                horizon: 1.0,
                initial_wealth: 1.0,
                position_limit: 50.0,
            },
            solver: SolverConfig::default(),
            simulation: SimulationConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Config> {
        let config: Config = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::from_json_str(&text)
    }

    /// Build the validated model parameters.
    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let utility = match m.utility {
            UtilityConfig::Log => Utility::Log,
            UtilityConfig::Power { exponent } => Utility::Power { exponent },
        };
        ModelParams::new(
            m.states,
            m.switch_up
                .iter()
                .map(|p| ImpactPair::new(p.base, p.impact_slope))
                .collect(),
            m.switch_down
                .iter()
                .map(|p| ImpactPair::new(p.base, p.impact_slope))
                .collect(),
            DiscreteCompensator::new(
                m.jump_atoms
                    .iter()
                    .map(|a| JumpAtom {
                        size: a.size,
                        intensities: a.intensities.clone(),
                    })
                    .collect(),
            ),
            m.risk_free_rate,
            utility,
            m.horizon,
            m.initial_wealth,
            m.position_limit,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.model_params()?;
        if self.model.jump_atoms.is_empty() {
            return Err(Error::Config(
                "model.jump_atoms must list at least one atom".to_string(),
            ));
        }
        let s = &self.solver;
        for (name, v) in [
            ("solver.full_time_steps", s.full_time_steps),
            ("solver.partial_time_steps", s.partial_time_steps),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        for (name, v) in [
            ("solver.partial_belief_points", s.partial_belief_points),
            ("solver.full_control_points", s.full_control_points),
            ("solver.partial_control_points", s.partial_control_points),
        ] {
            if v < 2 {
                return Err(Error::Config(format!("{name} must be >= 2")));
            }
        }
        if !(s.refine_tolerance > 0.0) || !s.refine_tolerance.is_finite() {
            return Err(Error::Config(
                "solver.refine_tolerance must be a positive real".to_string(),
            ));
        }
        let sim = &self.simulation;
        if sim.paths < 2 {
            return Err(Error::Config("simulation.paths must be >= 2".to_string()));
        }
        if sim.initial_state < 1 || sim.initial_state > params.states() {
            return Err(Error::Config(format!(
                "simulation.initial_state must be in 1..={}",
                params.states()
            )));
        }
        if sim.initial_belief.len() != params.states() {
            return Err(Error::Config(format!(
                "simulation.initial_belief must list {} probabilities",
                params.states()
            )));
        }
        let mut sum = 0.0;
        for &p in &sim.initial_belief {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Config(
                    "simulation.initial_belief entries must be finite and >= 0".to_string(),
                ));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Config(
                "simulation.initial_belief must sum to 1".to_string(),
            ));
        }
        if sim.report_points < 2 {
            return Err(Error::Config(
                "simulation.report_points must be >= 2".to_string(),
            ));
        }
        if self.output.figure_time_points < 2 {
            return Err(Error::Config(
                "output.figure_time_points must be >= 2".to_string(),
            ));
        }
        if self.output.directory.is_empty() {
            return Err(Error::Config("output.directory must be nonempty".to_string()));
        }
        Ok(())
    }

    /// 0-based index of the configured initial state.
    pub fn initial_state_index(&self) -> usize {
        self.simulation.initial_state - 1
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Simulation policy selector, parsed from `full-opt`, `partial-opt`,
/// `averaged` or `flat:H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    FullOpt,
    PartialOpt,
    Averaged,
    Flat(f64),
}

impl PolicySpec {
    pub fn parse(text: &str) -> Result<PolicySpec> {
        match text {
            "full-opt" => Ok(PolicySpec::FullOpt),
            "partial-opt" => Ok(PolicySpec::PartialOpt),
            "averaged" => Ok(PolicySpec::Averaged),
            _ => {
                if let Some(rest) = text.strip_prefix("flat:") {
                    let h: f64 = rest.parse().map_err(|_| {
                        Error::Config(format!("flat policy needs a real position, got `{rest}`"))
                    })?;
                    if !h.is_finite() {
                        return Err(Error::Config("flat policy position must be finite".into()));
                    }
                    Ok(PolicySpec::Flat(h))
                } else {
                    Err(Error::Config(format!(
                        "unknown policy `{text}`; expected full-opt | partial-opt | averaged | flat:H"
                    )))
                }
            }
        }
    }
}

impl std::str::FromStr for PolicySpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicySpec::parse(s)
    }
}
