//! Checked-in run configurations.

use serde::{Deserialize, Serialize};

use crate::error::{BnlsError, Result};
use crate::srm::SrmSettings;
use crate::timestepper::SimulationConfig;

const SIMULATIONS: &[(&str, &str)] = &[
    ("crit-1d", include_str!("../presets/crit-1d.toml")),
    ("crit-2d", include_str!("../presets/crit-2d.toml")),
    ("super-1d", include_str!("../presets/super-1d.toml")),
    ("super-2d", include_str!("../presets/super-2d.toml")),
    ("universality-1d", include_str!("../presets/universality-1d.toml")),
    ("universality-2d", include_str!("../presets/universality-2d.toml")),
    ("sharpness-1d", include_str!("../presets/sharpness-1d.toml")),
    ("sharpness-2d", include_str!("../presets/sharpness-2d.toml")),
    ("subcrit-1d", include_str!("../presets/subcrit-1d.toml")),
];

const GROUND_STATES: &[(&str, &str)] = &[
    ("gs-1d", include_str!("../presets/gs-1d.toml")),
    ("gs-2d", include_str!("../presets/gs-2d.toml")),
    ("gs-3d", include_str!("../presets/gs-3d.toml")),
];

/// Input of a ground-state computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateConfig {
    pub dim: usize,
    pub sigma: f64,
    /// Defaults depend on the dimension.
    #[serde(default)]
    pub srm: Option<SrmSettings>,
}

impl GroundStateConfig {
    pub fn settings(&self) -> SrmSettings {
        self.srm.unwrap_or_else(|| SrmSettings::for_dimension(self.dim))
    }

    /// Rejects dimensions outside 1..=3 and `σ ≤ 0`, before any computation.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(BnlsError::UnsupportedDimension(self.dim));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(BnlsError::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BnlsError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BnlsError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn lookup(table: &[(&str, &'static str)], name: &str) -> Result<&'static str> {
    table
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| BnlsError::InvalidConfig(format!("unknown preset {name:?}")))
}

pub fn simulation_names() -> impl Iterator<Item = &'static str> {
    SIMULATIONS.iter().map(|(n, _)| *n)
}

pub fn ground_state_names() -> impl Iterator<Item = &'static str> {
    GROUND_STATES.iter().map(|(n, _)| *n)
}

pub fn simulation_preset(name: &str) -> Result<SimulationConfig> {
    SimulationConfig::from_toml(lookup(SIMULATIONS, name)?)
}

pub fn ground_state_preset(name: &str) -> Result<GroundStateConfig> {
    GroundStateConfig::from_toml(lookup(GROUND_STATES, name)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::InitialCondition;

    #[test]
    fn every_preset_parses_and_validates() {
        for name in simulation_names() {
            let cfg = simulation_preset(name).unwrap();
            assert_eq!(cfg.name, name);
        }
        for name in ground_state_names() {
            let cfg = ground_state_preset(name).unwrap();
            assert!((cfg.sigma * cfg.dim as f64 - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn preset_contents() {
        let c = simulation_preset("super-1d").unwrap();
        assert_eq!((c.dim, c.sigma), (1, 6.0));
        assert_eq!(c.initial, InitialCondition::gaussian(1.6, 2.0));
        let u = simulation_preset("universality-1d").unwrap();
        assert_eq!(u.initial, InitialCondition::gaussian(2.0, 4.0));
        assert!(matches!(simulation_preset("sharpness-2d").unwrap().initial, InitialCondition::GroundState { scale, .. } if scale == 1.001));
        assert!(simulation_preset("nope").is_err());
    }

    #[test]
    fn invalid_sigma_is_rejected() {
        assert!(GroundStateConfig::from_toml("dim = 1\nsigma = -1.0\n").is_err());
        assert!(GroundStateConfig::from_toml("dim = 4\nsigma = 1.0\n").is_err());
        assert!(GroundStateConfig::from_toml("dim = 1\nsigma = 4.0\nbogus = 1\n").is_err());
    }
}
