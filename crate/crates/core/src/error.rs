//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument violates a model constraint. `constraint`
    /// names the violated condition so callers can surface it verbatim.
    #[error("invalid parameter `{name}`: {constraint} (got {value})")]
    InvalidParameter {
        name: String,
        constraint: String,
        value: String,
    },

    /// A wealth-jump factor 1 + h*z would be nonpositive.
    #[error("inadmissible position: 1 + h*z = {factor} <= 0 at h = {control}, z = {jump_size}")]
    Inadmissible {
        control: f64,
        jump_size: f64,
        factor: f64,
    },

    /// A price jump of a size that has zero conditional intensity under
    /// the current belief cannot be conditioned on.
    #[error("impossible observation: atom {atom} has zero intensity under the current belief")]
    ImpossibleObservation { atom: usize },

    /// Explicit-scheme stability bound violated by the requested grid.
    #[error(
        "explicit-scheme stability violated: dt*(jump + drift/dpi + switch rates) = {cfl:.6} > 0.9; \
         use at least {suggested_time_steps} time steps"
    )]
    CflViolation {
        cfl: f64,
        suggested_time_steps: usize,
    },

    /// The belief-space PDE grid is only implemented for two regimes.
    #[error("partial-information PDE supports K=2 only (model has {states} states)")]
    UnsupportedStateCount { states: usize },

    /// A sweep produced a non-finite or sign-violating node value.
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },

    /// The thinning upper bound was exceeded; indicates a model bug.
    #[error("thinning bound violated: total intensity {intensity} > bound {bound} at t = {time}")]
    ThinningBound {
        intensity: f64,
        bound: f64,
        time: f64,
    },

    /// A fail-closed consistency check in the experiment suite failed.
    #[error("check `{name}` failed: {detail}")]
    CheckFailed { name: String, detail: String },

    /// An error propagated out of a named pipeline stage.
    #[error("stage `{stage}`: {source}")]
    Staged {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &str, constraint: &str, value: impl std::fmt::Display) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            constraint: constraint.to_string(),
            value: value.to_string(),
        }
    }

    pub fn numerical(context: &str, detail: impl std::fmt::Display) -> Self {
        Error::Numerical {
            context: context.to_string(),
            detail: detail.to_string(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Staged {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Staged { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
