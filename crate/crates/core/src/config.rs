//! Run configuration, read from and written to TOML.
//!
//! All quantities are SI: angular frequencies in rad/s, times in s, lengths
//! in m, temperatures and trap depth in K. Every field has a default and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{Setup, DEFAULT_CALIBRATION_SAMPLES, DEFAULT_TARGET_BLOCKADE};
use crate::noise::NoiseConfig;
use crate::params::PhysicalParams;
use crate::thermal::{Axis, TrapConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockadeConfig {
    /// Effective blockade shift the thermal average is matched to, rad/s.
    pub target: f64,
    pub calibration_samples: usize,
    /// Rydberg-beam axis used for the Doppler projection.
    pub doppler_axis: Axis,
}

impl Default for BlockadeConfig {
    fn default() -> Self {
        Self {
            target: DEFAULT_TARGET_BLOCKADE,
            calibration_samples: DEFAULT_CALIBRATION_SAMPLES,
            doppler_axis: Axis::Z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Shots per data point and readout setting.
    pub shots: u64,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    pub out: PathBuf,
    /// Gaps of the parity scan: `parity_points` values evenly spaced over `[0, parity_span]` s.
    pub parity_points: usize,
    pub parity_span: f64,
    /// Durations of the Rabi scans: `rabi_points` values over `[0, rabi_span]` s.
    pub rabi_points: usize,
    pub rabi_span: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            shots: 10_000,
            workers: 0,
            out: PathBuf::from("out"),
            parity_points: 25,
            parity_span: 8e-6,
            rabi_points: 41,
            rabi_span: 4e-6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physical: PhysicalParams,
    pub trap: TrapConfig,
    pub noise: NoiseConfig,
    pub blockade: BlockadeConfig,
    pub run: RunSection,
}

const HEADER: &str = "\
# rydberg-cnot run configuration
# SI units throughout: rad/s for (angular) frequencies, s, m, K, kg.
";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(self).expect("config always serializes");
        format!("{HEADER}{body}")
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.trap.validate()?;
        self.noise.validate()?;
        if !(self.blockade.target > 0.0) || self.blockade.calibration_samples == 0 {
            return Err(Error::Config("blockade.target and blockade.calibration_samples must be > 0".into()));
        }
        if self.run.shots == 0 {
            return Err(Error::Config("run.shots must be > 0".into()));
        }
        if !(self.run.parity_span > 0.0 && self.run.rabi_span > 0.0)
            || self.run.parity_points < 2
            || self.run.rabi_points < 2
        {
            return Err(Error::Config("scan spans must be > 0 with at least 2 points".into()));
        }
        Ok(())
    }

    pub fn setup(&self) -> Result<Setup> {
        let mut s = Setup::calibrated(
            self.physical.clone(),
            self.trap.clone(),
            self.noise.clone(),
            self.blockade.target,
            self.blockade.calibration_samples,
            self.run.seed,
        )?;
        s.doppler_axis = self.blockade.doppler_axis;
        Ok(s)
    }
}
