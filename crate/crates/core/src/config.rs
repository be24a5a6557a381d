//! Experiment configuration files.

use serde::{Deserialize, Serialize};

use crate::bandit::BanditParams;
use crate::error::{invalid, Error, Result};
use crate::montecarlo::ClassifierConfig;
use crate::operator::{DEFAULT_GRID_POINTS, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Mc,
    Bounds,
    Solve,
    Polya,
    Stop,
    Classify,
    Accept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrnConfig {
    pub r: u64,
    pub b: u64,
}

/// Everything an experiment run depends on. Together with the crate
/// version it fixes every output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub params: BanditParams,
    pub schedule: StepSchedule,
    #[serde(rename = "N")]
    pub horizon: u64,
    #[serde(rename = "M")]
    pub paths: u64,
    pub seed: u64,
    pub output: Option<String>,
    pub format: Option<OutputFormat>,
    pub classifier: ClassifierConfig,
    /// Confidence level of Monte Carlo intervals.
    pub level: f64,
    /// Stopping-rule level.
    pub epsilon: f64,
    /// Sampling stride for path output; default ceil(N / 1000).
    pub thin: Option<u64>,
    /// Constant step for `bounds` and `solve`.
    pub gamma: Option<f64>,
    pub grid_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub urn: UrnConfig,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            params: BanditParams {
                p_a: 0.6,
                p_b: 0.4,
                x0: 0.5,
            },
            schedule: StepSchedule::PowerI { c: 1.0, alpha: 1.0 },
            horizon: 1000,
            paths: 1000,
            seed: 0,
            output: None,
            format: None,
            classifier: ClassifierConfig::default(),
            level: 0.99,
            epsilon: 0.05,
            thin: None,
            gamma: None,
            grid_points: DEFAULT_GRID_POINTS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            urn: UrnConfig { r: 1, b: 1 },
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        self.classifier.validate()?;
        if self.horizon == 0 {
            return Err(invalid("N", "horizon must be >= 1"));
        }
        if self.paths == 0 {
            return Err(invalid("M", "need at least one path"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level", format!("{} is outside (0, 1)", self.level)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid("epsilon", format!("{} is outside (0, 1]", self.epsilon)));
        }
        if self.thin == Some(0) {
            return Err(invalid("thin", "stride must be >= 1"));
        }
        if let Some(g) = self.gamma {
            crate::error::check_open_unit("gamma", g)?;
        }
        if self.grid_points < 3 {
            return Err(invalid("grid_points", "need at least 3 points"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if self.urn.r == 0 || self.urn.b == 0 {
            return Err(invalid("urn", "ball counts must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "need at least one worker"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"command":"mc","schedule":{"kind":"constant","gamma":0.5},"N":100,"M":10,"seed":7}"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Some(Command::Mc));
        assert_eq!(cfg.horizon, 100);
        assert_eq!(cfg.level, 0.99);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"N":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"params":{"p_a":2,"p_b":0,"x0":0.5}}"#).is_err());
        assert!(ExperimentConfig::from_json("[").is_err());
    }
}
