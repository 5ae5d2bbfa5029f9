//! Scenario configuration, read from TOML.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attitude::AttitudeGains;
use crate::contact::GroundParams;
use crate::erg::ErgParams;
use crate::gait::{GaitSchedule, JointGains};
use crate::model::ModelParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Integration and control step [s].
    pub dt: f64,
    /// Simulated time [s].
    pub duration: f64,
    /// Desired body velocity x_r [m/s].
    pub desired_velocity: Vector3<f64>,
    /// Roll, pitch, yaw reference [rad].
    pub attitude_reference: Vector3<f64>,
    /// Initial body height above the ground plane [m].
    pub initial_height: f64,
    /// Log every n-th step.
    pub log_decimation: usize,
    /// Log every step, overriding `log_decimation`.
    pub full_rate: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dt: 5e-4,
            duration: 10.0,
            desired_velocity: Vector3::new(0.2, 0.0, 0.0),
            attitude_reference: Vector3::zeros(),
            initial_height: 0.30,
            log_decimation: 10,
            full_rate: false,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn effective_decimation(&self) -> usize {
        if self.full_rate {
            1
        } else {
            self.log_decimation
        }
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverConfig {
    /// Per-axis observer gain K_O [1/s].
    pub gain: Vector6<f64>,
    /// Standard deviation of additive noise on the velocities the observer
    /// sees [m/s, rad/s]. Zero disables noise.
    pub velocity_noise: f64,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            gain: Vector6::repeat(1000.0),
            velocity_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub model: ModelParams,
    pub ground: GroundParams,
    pub gait: GaitSchedule,
    pub joints: JointGains,
    pub attitude: AttitudeGains,
    pub erg: ErgParams,
    pub observer: ObserverConfig,
    pub output: OutputConfig,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: SimConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Hex SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest.iter() {
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        let mut checks: Vec<Result<(), String>> = Vec::new();
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            checks.push(Err(format!("dt must be positive, got {}", s.dt)));
        }
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            checks.push(Err(format!("duration must be positive, got {}", s.duration)));
        }
        if s.log_decimation == 0 {
            checks.push(Err("log_decimation must be at least 1".into()));
        }
        if !s.desired_velocity.iter().chain(s.attitude_reference.iter()).all(|v| v.is_finite()) {
            checks.push(Err("scenario references must be finite".into()));
        }
        if !(s.initial_height > 0.0) {
            checks.push(Err(format!("initial_height must be positive, got {}", s.initial_height)));
        }
        if !self.observer.gain.iter().all(|k| *k > 0.0 && k.is_finite()) {
            checks.push(Err("observer gains must be positive".into()));
        }
        if !(self.observer.velocity_noise >= 0.0) {
            checks.push(Err("observer velocity_noise must be nonnegative".into()));
        }
        if !(self.joints.kp >= 0.0 && self.joints.kd >= 0.0) {
            checks.push(Err("joint gains must be nonnegative".into()));
        }
        checks.push(self.model.validate());
        checks.push(self.ground.validate());
        checks.push(self.gait.validate());
        checks.push(self.attitude.validate());
        checks.push(self.erg.validate());
        let reach = self.scenario.initial_height - self.ground.height;
        if reach < self.model.leg_length_min || reach > self.model.leg_length_max {
            checks.push(Err(format!(
                "initial_height {} puts the feet out of leg range [{}, {}]",
                s.initial_height, self.model.leg_length_min, self.model.leg_length_max
            )));
        }
        let errors: Vec<String> = checks.into_iter().filter_map(Result::err).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors.join("; ")))
        }
    }
}
