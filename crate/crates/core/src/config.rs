//! Run configuration: one flat JSON object, every key optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FidError, Result};

pub const CONFIG_ENV: &str = "FIDLAB_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub psd_tol: f64,
    pub trace_tol: f64,
    /// Agreement required of the variational routes.
    pub opt_tol: f64,
    /// A sweep passes when its minimum margin is at least `-margin_tol`.
    pub margin_tol: f64,
    /// Bound on `|ΔF|` below which a channel counts as fidelity preserving.
    pub classify_tol: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub car_max_level: usize,
    pub block_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            psd_tol: 1e-10,
            trace_tol: 1e-9,
            opt_tol: 1e-6,
            margin_tol: 1e-9,
            classify_tol: 1e-8,
            seed: 0,
            max_iterations: 500,
            car_max_level: 10,
            block_samples: 64,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|e| FidError::Parse(format!("config: {e}")))?;
        if !v.is_object() {
            return Err(FidError::Parse("config: expected a JSON object".into()));
        }
        let cfg: Self = serde_json::from_value(v).map_err(|e| FidError::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FidError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Reads the file named by `FIDLAB_CONFIG`, or the defaults when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::from_path(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("psd_tol", self.psd_tol),
            ("trace_tol", self.trace_tol),
            ("opt_tol", self.opt_tol),
            ("margin_tol", self.margin_tol),
            ("classify_tol", self.classify_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(FidError::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(FidError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(1..=14).contains(&self.car_max_level) {
            return Err(FidError::InvalidConfig(format!(
                "car_max_level must be in 1..=14, got {}",
                self.car_max_level
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_objects_fill_defaults() {
        let cfg = RunConfig::from_json_str(r#"{"psd_tol": 1e-8, "seed": 9}"#).unwrap();
        assert_eq!(cfg.psd_tol, 1e-8);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.margin_tol, 1e-9);
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(RunConfig::from_json_str(r#"{"psd_tol": -1}"#), Err(FidError::InvalidConfig(_))));
        assert!(matches!(RunConfig::from_json_str(r#"{"max_iterations": 0}"#), Err(FidError::InvalidConfig(_))));
        assert!(matches!(RunConfig::from_json_str(r#"{"unknown": 1}"#), Err(FidError::Parse(_))));
        assert!(matches!(RunConfig::from_json_str("[1]"), Err(FidError::Parse(_))));
    }
}
