//! Scenario files: TOML with units spelled out in the key names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::antenna_sim::{AntennaConfig, AntennaState, ReceiverConfig};
use crate::error::{Error, Result};
use crate::orbit_sim::OrbitConfig;
use crate::simulation::{run_scenario, ParabolaConfig, ScenarioReport};
use crate::telemetry::TelemetrySink;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    /// Seeds the receiver noise.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub orbit: OrbitConfig,
    pub antenna: AntennaConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    pub parabola: ParabolaConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.receiver.rng_seed = scenario.seed;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn plant(&self) -> Result<AntennaState> {
        AntennaState::new(&self.antenna)
    }

    pub fn run<S: TelemetrySink>(&self, sink: &mut S) -> Result<ScenarioReport> {
        let plant = self.plant()?;
        let mut rx = self.receiver;
        rx.rng_seed = self.seed;
        run_scenario(
            &self.orbit,
            &plant,
            &rx,
            &self.parabola,
            &self.tracker,
            self.duration_s,
            sink,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
duration_s = 60.0
seed = 3

[orbit]
center_azimuth_deg = 120.0
center_elevation_deg = 60.0
azimuth_amplitude_deg = 0.0
elevation_amplitude_deg = 0.0

[antenna]
initial_azimuth_deg = 120.1
initial_elevation_deg = 60.02

[parabola]
k_y_db_per_deg2 = -11.4
"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.receiver.rng_seed, 3);
        assert_eq!(s.receiver.floor_db, -24.0);
        assert_eq!(s.tracker, TrackerConfig::default());
        assert_eq!(s.parabola.l_pq, 6.0);
        let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("k_y_db_per_deg2 = -11.4", "");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("k_y_db_per_deg2"), "{err}");
    }

    #[test]
    fn unknown_field_reports_line() {
        let text = MINIMAL.replace("seed = 3", "seed = 3\nsede = 4");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("sede") && err.contains("line"), "{err}");
    }
}
