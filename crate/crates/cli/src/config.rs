use std::path::{Path, PathBuf};

use anyhow::Context;
use handfit_core::fitting::{DoglegOptions, FitOptions, FitWeights, LossWeights};
use serde::{Deserialize, Serialize};

/// Settings shared by the commands; read from a TOML file and overridden by
/// command-line flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub solver: DoglegOptions,
    pub weights: LossWeights,
    pub alpha_theta: Option<f64>,
    pub two_stage: Option<bool>,
    pub rigid_iterations: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = crate::io::read_text(path)?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn fit_options(&self) -> FitOptions {
        let defaults = FitOptions::default();
        FitOptions {
            solver: self.solver.clone(),
            weights: FitWeights {
                alpha_beta: self.weights.alpha_beta,
                alpha_theta: self.alpha_theta.unwrap_or(defaults.weights.alpha_theta),
            },
            two_stage: self.two_stage.unwrap_or(defaults.two_stage),
            rigid_iterations: self.rigid_iterations.unwrap_or(defaults.rigid_iterations),
        }
    }
}
