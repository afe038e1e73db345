//! Run configuration shared by the command line and the validation checks.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bridge::{BridgeConfig, BridgeOptions, TimeScale};
use crate::error::{Error, Result};
use crate::rvfun::{check_dim, RVFunction, RVParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: RVParams,
    pub dim: usize,
    pub bridge: BridgeSection,
    pub numerics: NumericsSection,
    pub sampling: SamplingSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeSection {
    pub epsilon: f64,
    /// `r_ε = ε^{-ρ}`; ignored when `r_eps` is set.
    pub rho: f64,
    pub r_eps: Option<f64>,
    pub horizon: f64,
    pub endpoint: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    /// Minimum number of nodes of convolution grids.
    pub nodes: usize,
    /// Overrides the automatically chosen mixture truncation order.
    pub m_cap: Option<usize>,
    /// Slack `δ` of two-sided estimates; each check has its own default.
    pub delta: Option<f64>,
    /// Radius up to which densities are tabulated; chosen per check when absent.
    pub r_max: Option<f64>,
    /// Largest `|x|/ε` served by a convolution grid; beyond it the Laplace
    /// expansion is used.
    pub grid_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Jsonl,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Format of the main output; each subcommand has a natural default.
    pub format: Option<OutputFormat>,
    /// Output file; standard output when absent.
    pub path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: RVFunction::power(2.0).expect("valid").into(),
            dim: 1,
            bridge: BridgeSection::default(),
            numerics: NumericsSection::default(),
            sampling: SamplingSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for BridgeSection {
    fn default() -> Self {
        BridgeSection {
            epsilon: 0.02,
            rho: 0.0,
            r_eps: None,
            horizon: 1.0,
            endpoint: vec![1.0],
        }
    }
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            nodes: 256,
            m_cap: None,
            delta: None,
            r_max: None,
            grid_limit: 400.0,
        }
    }
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            samples: 100_000,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn fun(&self) -> Result<RVFunction> {
        RVFunction::try_from(self.model)
    }

    /// Checks every field against the domain of the module that consumes it.
    pub fn validate(&self) -> Result<()> {
        self.fun().map_err(|e| Error::Config(format!("model: {e}")))?;
        check_dim(self.dim).map_err(|e| Error::Config(format!("dim: {e}")))?;
        if self.numerics.nodes < 16 {
            return Err(Error::Config("numerics.nodes must be at least 16".into()));
        }
        if matches!(self.numerics.m_cap, Some(0)) {
            return Err(Error::Config("numerics.m_cap must be positive".into()));
        }
        if let Some(d) = self.numerics.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config("numerics.delta must lie in (0, 1)".into()));
            }
        }
        if let Some(r) = self.numerics.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config("numerics.r_max must be positive".into()));
            }
        }
        if !(self.numerics.grid_limit > 0.0) {
            return Err(Error::Config("numerics.grid_limit must be positive".into()));
        }
        if !(self.bridge.epsilon > 0.0) {
            return Err(Error::Config("bridge.epsilon must be positive".into()));
        }
        self.bridge_config().map(|_| ()).map_err(|e| Error::Config(format!("bridge: {e}")))
    }

    pub fn time_scale(&self) -> TimeScale {
        match self.bridge.r_eps {
            Some(r) => TimeScale::Explicit(r),
            None => TimeScale::Rho(self.bridge.rho),
        }
    }

    pub fn bridge_config(&self) -> Result<BridgeConfig> {
        BridgeConfig::new(
            self.fun()?,
            self.dim,
            self.bridge.epsilon.ln(),
            self.time_scale(),
            self.bridge.horizon,
            self.bridge.endpoint.clone(),
            self.sampling.seed,
        )
    }

    pub fn bridge_options(&self) -> BridgeOptions {
        BridgeOptions {
            nodes: self.numerics.nodes,
            m_cap: self.numerics.m_cap,
            grid_limit: self.numerics.grid_limit,
            ..BridgeOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"dim": 2, "bridge": {"endpoint": [1.0, 0.5]}}"#).unwrap();
        assert_eq!(cfg.dim, 2);
        assert_eq!(cfg.bridge.epsilon, 0.02);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_and_invalid_fields_rejected() {
        assert!(RunConfig::from_json(r#"{"dimension": 2}"#).is_err());
        let cfg = RunConfig {
            dim: 2,
            ..RunConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
