//! Analytic gate-error formulas and the per-shot stochastic noise channels.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, K_B};
use crate::qcore::{AtomLevel, TwoAtomState};
use crate::sequence::{PulseSpec, Transition};

/// Switches for the individual noise channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Channels {
    pub background_loss: bool,
    pub optical_pumping: bool,
    pub spontaneous_emission: bool,
    /// Random phase `k_eff·v·t` picked up by Rydberg population during the
    /// waits between pulses.
    pub doppler_dephasing: bool,
    /// Doppler detuning of a driven atom during its Rydberg pulses.
    pub doppler_broadening: bool,
    /// Thermal spread of atom positions, and hence of the blockade shift.
    pub position_spread: bool,
}

impl Channels {
    pub const ALL: Channels = Channels {
        background_loss: true,
        optical_pumping: true,
        spontaneous_emission: true,
        doppler_dephasing: true,
        doppler_broadening: true,
        position_spread: true,
    };

    pub const NONE: Channels = Channels {
        background_loss: false,
        optical_pumping: false,
        spontaneous_emission: false,
        doppler_dephasing: false,
        doppler_broadening: false,
        position_spread: false,
    };

    pub const NAMES: [&'static str; 6] = [
        "background_loss",
        "optical_pumping",
        "spontaneous_emission",
        "doppler_dephasing",
        "doppler_broadening",
        "position_spread",
    ];

    pub fn get(&self, name: &str) -> Option<bool> {
        Some(match name {
            "background_loss" => self.background_loss,
            "optical_pumping" => self.optical_pumping,
            "spontaneous_emission" => self.spontaneous_emission,
            "doppler_dephasing" => self.doppler_dephasing,
            "doppler_broadening" => self.doppler_broadening,
            "position_spread" => self.position_spread,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, on: bool) -> Option<()> {
        let slot = match name {
            "background_loss" => &mut self.background_loss,
            "optical_pumping" => &mut self.optical_pumping,
            "spontaneous_emission" => &mut self.spontaneous_emission,
            "doppler_dephasing" => &mut self.doppler_dephasing,
            "doppler_broadening" => &mut self.doppler_broadening,
            "position_spread" => &mut self.position_spread,
            _ => return None,
        };
        *slot = on;
        Some(())
    }
}

impl Default for Channels {
    fn default() -> Self {
        Channels::ALL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Probability that one atom survives background collisions over the
    /// whole preparation-to-readout gap.
    pub p_bg_single: f64,
    /// Fraction of background-loss events that happen before the gate pulses.
    pub loss_before_fraction: f64,
    /// Per-atom probability of ending optical pumping outside `m_f = 0`.
    pub p_pump_err: f64,
    /// Spontaneous-emission probability summed over the CNOT's Rydberg pulses.
    pub p_se_total: f64,
    /// Put the whole Doppler detuning on `|r⟩` during pulses, so that the
    /// pulses add to the stochastic phase. Off: the detuning is split
    /// symmetrically between `|1⟩` and `|r⟩`, which gives the same
    /// excitation error but leaves the phase to the waits alone.
    pub doppler_pulse_phase: bool,
    pub channels: Channels,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            p_bg_single: 0.90,
            loss_before_fraction: 0.1,
            p_pump_err: 0.01,
            p_se_total: 0.04,
            doppler_pulse_phase: false,
            channels: Channels::ALL,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self { channels: Channels::NONE, ..Self::default() }
    }

    /// Only the listed channel switched on.
    pub fn only(channel: &str) -> Result<Self> {
        let mut cfg = Self::noiseless();
        cfg.channels.set(channel, true).ok_or_else(|| Error::Config(format!("unknown noise channel `{channel}`")))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_bg_single", self.p_bg_single),
            ("loss_before_fraction", self.loss_before_fraction),
            ("p_pump_err", self.p_pump_err),
            ("p_se_total", self.p_se_total),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("noise.{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// Two-atom probability that neither atom is lost to background collisions.
    pub fn pair_retention(&self) -> f64 {
        if self.channels.background_loss {
            self.p_bg_single * self.p_bg_single
        } else {
            1.0
        }
    }

    pub fn single_retention(&self) -> f64 {
        if self.channels.background_loss {
            self.p_bg_single
        } else {
            1.0
        }
    }
}

/// Intrinsic error of the blockade controlled-phase operation.
///
/// `E = (7π/4Ωτ)(1 + Ω²/ω₁₀² + Ω²/7B²) + (Ω²/8B²)(1 + 6B²/ω₁₀²)`.
pub fn intrinsic_gate_error(omega: f64, tau: f64, blockade: f64, omega_10: f64) -> Result<f64> {
    if !(omega > 0.0 && tau > 0.0 && blockade > 0.0 && omega_10 > 0.0) {
        return Err(Error::domain(format!(
            "intrinsic_gate_error needs positive arguments (omega={omega}, tau={tau}, blockade={blockade}, omega_10={omega_10})"
        )));
    }
    let o2 = omega * omega;
    let b2 = blockade * blockade;
    let w2 = omega_10 * omega_10;
    let decay = 7.0 * PI / (4.0 * omega * tau) * (1.0 + o2 / w2 + o2 / (7.0 * b2));
    let leakage = o2 / (8.0 * b2) * (1.0 + 6.0 * b2 / w2);
    Ok(decay + leakage)
}

/// Doppler phase `k_eff · v · t` of a Rydberg excitation, radians.
pub fn doppler_phase(velocity: f64, t_gap: f64, params: &PhysicalParams) -> f64 {
    params.k_eff() * velocity * t_gap
}

/// Thermal average `⟨e^{iφ}⟩` of the Doppler phase for a 1-D Maxwell-Boltzmann
/// velocity distribution.
pub fn dephasing_factor(temperature: f64, t_gap: f64, params: &PhysicalParams) -> f64 {
    let k = params.k_eff();
    let var_v = K_B * temperature.max(0.0) / params.mass;
    (-k * k * var_v * t_gap * t_gap / 2.0).exp()
}

/// Bell fidelity when the stochastic phase is the only error.
pub fn max_fidelity_from_dephasing(factor: f64) -> f64 {
    (1.0 + factor) / 2.0
}

/// Differential AC Stark phase between `|00⟩` and `|11⟩` accumulated over
/// the three Rydberg pulses: `ξ = −2π (Ω₇₈₀/Ω₄₈₀)(ω₁₀/Δ_{f=1})`.
pub fn ac_stark_phase(params: &PhysicalParams) -> Result<f64> {
    let d1 = params.delta_f1();
    if d1 == 0.0 {
        return Err(Error::domain("ac_stark_phase is singular for delta_f1 = 0"));
    }
    if params.omega_480 == 0.0 {
        return Err(Error::domain("ac_stark_phase needs omega_480 > 0"));
    }
    Ok(-2.0 * PI * (params.omega_780 / params.omega_480) * (params.omega_10 / d1))
}

/// Shift of the addressed atom's `|0⟩` level during a Rydberg pulse, rad/s.
///
/// Fixed so that the phase collected over the CNOT's `4π` of Rydberg pulse
/// area equals [`ac_stark_phase`].
pub fn light_shift_rate(params: &PhysicalParams) -> f64 {
    // |00⟩ collects −rate·t relative to |11⟩; C₁ = ψ₀₀ψ₁₁* therefore rotates by −rate·t
    ac_stark_phase(params).map_or(0.0, |xi| -xi * params.omega_ryd / (4.0 * PI))
}

/// Spontaneous-emission rate (per unit time an atom spends under Rydberg
/// light) that spreads `p_se_total` over the CNOT's `4π` of pulse area.
pub fn scattering_rate(params: &PhysicalParams, cfg: &NoiseConfig) -> f64 {
    if !cfg.channels.spontaneous_emission {
        return 0.0;
    }
    cfg.p_se_total * params.omega_ryd / (4.0 * PI)
}

/// Per-atom scattering probability for one pulse (zero for Raman pulses).
pub fn spontaneous_emission_prob(params: &PhysicalParams, cfg: &NoiseConfig, pulse: &PulseSpec) -> f64 {
    match pulse.transition {
        Transition::Ground => 0.0,
        Transition::Rydberg => (scattering_rate(params, cfg) * pulse.duration(params)).min(1.0),
    }
}

/// Quantum-jump update for a scattering event on `atom`, whose bare
/// probability for the pulse is `p`.
///
/// The jump fires with probability `p·w`, `w` being the atom's population in
/// `{|1⟩, |r⟩}` (the levels that couple to the intermediate state). A jump
/// projects the atom onto that manifold and leaves it in `|0⟩` or `|1⟩`
/// with equal odds; otherwise the manifold amplitudes are damped by
/// `√(1−p)`. Returns whether a jump fired.
pub fn scatter<R: Rng + ?Sized>(state: &mut TwoAtomState, atom: usize, p: f64, rng: &mut R) -> bool {
    if p <= 0.0 || state.is_lost(atom) {
        return false;
    }
    let norm = state.norm_sqr();
    let p1 = state.atom_population(atom, AtomLevel::G1) / norm;
    let pr = state.atom_population(atom, AtomLevel::R) / norm;
    let w = p1 + pr;
    if rng.gen::<f64>() < p * w {
        let from = if rng.gen::<f64>() * w < p1 { AtomLevel::G1 } else { AtomLevel::R };
        state.project_atom(atom, from);
        let to = if rng.gen::<bool>() { AtomLevel::G0 } else { AtomLevel::G1 };
        state.relabel_atom(atom, from, to);
        true
    } else {
        state.scale_atom_levels(atom, &[AtomLevel::G1, AtomLevel::R], (1.0 - p).sqrt());
        state.normalize();
        false
    }
}

/// When (if at all) an atom is lost to a background collision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossTiming {
    Kept,
    BeforePulses,
    AfterPulses,
}

/// Draws the background-loss fate of both atoms.
pub fn sample_losses<R: Rng + ?Sized>(cfg: &NoiseConfig, rng: &mut R) -> [LossTiming; 2] {
    std::array::from_fn(|_| {
        if !cfg.channels.background_loss {
            return LossTiming::Kept;
        }
        if rng.gen::<f64>() < cfg.p_bg_single {
            LossTiming::Kept
        } else if rng.gen::<f64>() < cfg.loss_before_fraction {
            LossTiming::BeforePulses
        } else {
            LossTiming::AfterPulses
        }
    })
}

/// Flags each atom lost independently with probability `1 − p_bg_single`.
pub fn apply_losses<R: Rng + ?Sized>(state: &TwoAtomState, cfg: &NoiseConfig, rng: &mut R) -> TwoAtomState {
    let mut out = state.clone();
    for (atom, fate) in sample_losses(cfg, rng).into_iter().enumerate() {
        if fate != LossTiming::Kept {
            out.set_lost(atom);
        }
    }
    out
}

/// Two-qubit error contributions to the CNOT, as tabulated per source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorContributions {
    pub optical_pumping: f64,
    pub atom_loss_before_pulses: f64,
    pub blockade_error: f64,
    pub spontaneous_emission: f64,
    pub doppler_broadening: f64,
}

impl ErrorContributions {
    /// Budget of the present experiment.
    pub const CURRENT: ErrorContributions = ErrorContributions {
        optical_pumping: 0.02,
        atom_loss_before_pulses: 0.02,
        blockade_error: 0.01,
        spontaneous_emission: 0.04,
        doppler_broadening: 0.04,
    };

    /// Budget of the earlier CNOT experiment.
    pub const PREVIOUS: ErrorContributions = ErrorContributions {
        optical_pumping: 0.1,
        atom_loss_before_pulses: 0.09,
        blockade_error: 0.01,
        spontaneous_emission: 0.04,
        doppler_broadening: 0.04,
    };

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("optical_pumping", self.optical_pumping),
            ("atom_loss_before_pulses", self.atom_loss_before_pulses),
            ("blockade_error", self.blockade_error),
            ("spontaneous_emission", self.spontaneous_emission),
            ("doppler_broadening", self.doppler_broadening),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub contributions: ErrorContributions,
    /// Quadrature sum of the contributions.
    pub total: f64,
}

pub fn quadrature_budget(contributions: ErrorContributions) -> Result<ErrorBudget> {
    for (name, c) in contributions.named() {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("error contribution {name} = {c} outside [0, 1]")));
        }
    }
    let total = quadrature_sum(contributions.named().iter().map(|(_, c)| *c));
    Ok(ErrorBudget { contributions, total })
}

pub fn quadrature_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(|c| c * c).sum::<f64>().sqrt()
}
