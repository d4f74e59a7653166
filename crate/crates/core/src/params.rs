//! Laser, atom and timing constants of the experiment.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Mass of a ⁸⁷Rb atom, kg.
pub const RB87_MASS: f64 = 86.909_180_527 * 1.660_539_066_60e-27;

/// All physical constants used by the pulse sequences and noise models.
///
/// Frequencies are angular (rad/s), times in seconds, lengths in metres.
/// `delta_f1` is not stored: it is always recomputed from `delta_f2` and
/// `omega_10`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Two-photon ground-Rydberg Rabi frequency.
    pub omega_ryd: f64,
    /// Ground-state Raman Rabi frequency.
    pub omega_g: f64,
    /// Qubit hyperfine splitting.
    pub omega_10: f64,
    /// Radiative lifetime of the Rydberg level.
    pub tau_ryd: f64,
    /// One-photon Rabi frequency of the 780 nm Rydberg beam.
    pub omega_780: f64,
    /// One-photon Rabi frequency of the 480 nm Rydberg beam.
    pub omega_480: f64,
    /// Detuning of the 780 nm beam from the f=2 intermediate transition.
    pub delta_f2: f64,
    pub lambda_780: f64,
    pub lambda_480: f64,
    pub lambda_trap: f64,
    /// AC Stark shift from the Raman beams that sets the analysis-pulse phase ramp.
    pub omega_ac: f64,
    pub mass: f64,
    /// Linewidth of the 5p intermediate state.
    pub gamma_5p: f64,
    /// Total wait inserted between Rydberg pulses 2 and 4 of the CNOT.
    pub t24: f64,
    /// Rabi frequency seen by the neighbouring site, as a fraction of the targeted one.
    pub crosstalk_ratio: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            omega_ryd: TAU * 0.81e6,
            // ~900 ns ground-state pi time
            omega_g: std::f64::consts::PI / 900e-9,
            omega_10: TAU * 6.83e9,
            tau_ryd: 300e-6,
            omega_780: TAU * 118e6,
            omega_480: TAU * 39e6,
            delta_f2: -TAU * 2.0e9,
            lambda_780: 780e-9,
            lambda_480: 480e-9,
            lambda_trap: 1064e-9,
            omega_ac: TAU * 0.125e6,
            mass: RB87_MASS,
            gamma_5p: TAU * 6.07e6,
            t24: 2.2e-6,
            crosstalk_ratio: 0.02,
        }
    }
}

impl PhysicalParams {
    /// Detuning of the 780 nm beam from the f=1 intermediate transition.
    pub fn delta_f1(&self) -> f64 {
        self.delta_f2 - self.omega_10
    }

    /// Effective two-photon wavenumber `2π(1/λ480 − 1/λ780)`, rad/m.
    pub fn k_eff(&self) -> f64 {
        TAU * (1.0 / self.lambda_480 - 1.0 / self.lambda_780)
    }

    pub fn rydberg_pi_time(&self) -> f64 {
        std::f64::consts::PI / self.omega_ryd
    }

    pub fn ground_pi_time(&self) -> f64 {
        std::f64::consts::PI / self.omega_g
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_ryd", self.omega_ryd),
            ("omega_g", self.omega_g),
            ("omega_10", self.omega_10),
            ("tau_ryd", self.tau_ryd),
            ("lambda_780", self.lambda_780),
            ("lambda_480", self.lambda_480),
            ("lambda_trap", self.lambda_trap),
            ("mass", self.mass),
            ("gamma_5p", self.gamma_5p),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("physical.{name} must be > 0, got {value}")));
            }
        }
        let non_negative = [
            ("omega_780", self.omega_780),
            ("omega_480", self.omega_480),
            ("omega_ac", self.omega_ac),
            ("t24", self.t24),
            ("crosstalk_ratio", self.crosstalk_ratio),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("physical.{name} must be >= 0, got {value}")));
            }
        }
        if !self.delta_f2.is_finite() {
            return Err(Error::Config("physical.delta_f2 must be finite".into()));
        }
        Ok(())
    }
}
