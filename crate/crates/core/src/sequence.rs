//! Pulse sequences: the H-C_Z CNOT, Bell-state preparation, parity analysis
//! pulses and Rabi-flopping scans.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::light_shift_rate;
use crate::params::PhysicalParams;
use crate::qcore::{AtomLevel, CONTROL, TARGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    /// Raman `|0⟩ ↔ |1⟩`.
    Ground,
    /// Two-photon `|1⟩ ↔ |r⟩`.
    Rydberg,
}

/// One square pulse, preceded by a free-evolution wait.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub transition: Transition,
    pub targets: [bool; 2],
    /// Pulse area on the targeted atoms, radians.
    pub area: f64,
    /// Optical phase per atom, radians.
    pub phase: [f64; 2],
    /// Wait before the pulse starts, seconds.
    pub pre_gap: f64,
    /// Rydberg pulses imprint Doppler phases, Raman pulses do not.
    pub doppler_sensitive: bool,
    /// Rabi frequency on untargeted atoms as a fraction of the targeted one.
    pub crosstalk: f64,
}

impl PulseSpec {
    pub fn ground(targets: [bool; 2], area: f64, phase: f64) -> Self {
        Self {
            transition: Transition::Ground,
            targets,
            area,
            phase: [phase; 2],
            pre_gap: 0.0,
            doppler_sensitive: false,
            crosstalk: 0.0,
        }
    }

    pub fn rydberg(targets: [bool; 2], area: f64) -> Self {
        Self {
            transition: Transition::Rydberg,
            targets,
            area,
            phase: [0.0; 2],
            pre_gap: 0.0,
            doppler_sensitive: true,
            crosstalk: 0.0,
        }
    }

    pub fn with_pre_gap(mut self, gap: f64) -> Self {
        self.pre_gap = gap;
        self
    }

    pub fn with_crosstalk(mut self, ratio: f64) -> Self {
        self.crosstalk = ratio;
        self
    }

    /// Rabi frequency of the targeted atoms, rad/s.
    pub fn rabi_frequency(&self, params: &PhysicalParams) -> f64 {
        match self.transition {
            Transition::Ground => params.omega_g,
            Transition::Rydberg => params.omega_ryd,
        }
    }

    pub fn duration(&self, params: &PhysicalParams) -> f64 {
        self.area / self.rabi_frequency(params)
    }

    /// Per-atom Rabi frequency including crosstalk on untargeted atoms.
    pub fn drive(&self, params: &PhysicalParams) -> [f64; 2] {
        let omega = self.rabi_frequency(params);
        std::array::from_fn(|a| if self.targets[a] { omega } else { omega * self.crosstalk })
    }

    pub fn addressed_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        [CONTROL, TARGET].into_iter().filter(|&a| self.targets[a])
    }
}

const CONTROL_ONLY: [bool; 2] = [true, false];
const TARGET_ONLY: [bool; 2] = [false, true];
const BOTH: [bool; 2] = [true, true];

/// The five-pulse H-C_Z CNOT.
///
/// Raman π/2 on the target, Rydberg π on the control, Rydberg 2π on the
/// target, Rydberg π on the control, Raman π/2 on the target. The wait `t24`
/// is split evenly before and after the target 2π pulse. The last pulse is π
/// out of phase with the first in the frame that follows the light shift the
/// target picked up during its Rydberg pulse.
pub fn cnot_sequence(params: &PhysicalParams) -> Vec<PulseSpec> {
    let half_gap = params.t24 / 2.0;
    let target_2pi = PulseSpec::rydberg(TARGET_ONLY, 2.0 * PI).with_pre_gap(half_gap);
    let frame = light_shift_rate(params) * target_2pi.duration(params);
    vec![
        PulseSpec::ground(TARGET_ONLY, PI / 2.0, 0.0),
        PulseSpec::rydberg(CONTROL_ONLY, PI),
        target_2pi,
        PulseSpec::rydberg(CONTROL_ONLY, PI).with_pre_gap(half_gap),
        PulseSpec::ground(TARGET_ONLY, PI / 2.0, PI + frame),
    ]
}

/// Initial control level used for Bell-state preparation.
pub const BELL_CONTROL_INPUT: AtomLevel = AtomLevel::G1;

/// Control π/2 pulse followed by the CNOT.
///
/// Starting from `|1, target_input⟩` the control pulse makes
/// `(|0⟩ + i|1⟩)/√2` up to a global phase; the CNOT then gives
/// `(|00⟩ + |11⟩)/√2` for a `G1` target and `(|01⟩ + |10⟩)/√2` for `G0`,
/// up to single-qubit phases.
pub fn bell_prep_sequence(params: &PhysicalParams, target_input: AtomLevel) -> Result<Vec<PulseSpec>> {
    if !target_input.is_qubit() {
        return Err(Error::domain("Bell preparation needs a qubit target input"));
    }
    let mut seq = vec![PulseSpec::ground(CONTROL_ONLY, PI / 2.0, 0.0)];
    seq.extend(cnot_sequence(params));
    Ok(seq)
}

/// Wait `gap`, then π/2 analysis pulses on both atoms with phase `omega_ac · gap`.
pub fn parity_analysis_pulses(params: &PhysicalParams, gap: f64) -> Result<Vec<PulseSpec>> {
    if gap < 0.0 {
        return Err(Error::domain(format!("negative analysis gap {gap}")));
    }
    Ok(vec![PulseSpec::ground(BOTH, PI / 2.0, params.omega_ac * gap).with_pre_gap(gap)])
}

/// One Rabi-flopping sequence per duration.
///
/// The scan pulse drives `atom`; the other atom sees `crosstalk_ratio` of the
/// Rabi frequency. With `neighbor_blocked` a Rydberg π pulse on the other
/// atom comes first.
pub fn rabi_scan(
    params: &PhysicalParams,
    transition: Transition,
    atom: usize,
    durations: &[f64],
    neighbor_blocked: bool,
) -> Result<Vec<Vec<PulseSpec>>> {
    if atom > TARGET {
        return Err(Error::domain(format!("no atom with index {atom}")));
    }
    let mut targets = [false; 2];
    targets[atom] = true;
    let mut neighbor = [false; 2];
    neighbor[1 - atom] = true;
    durations
        .iter()
        .map(|&t| {
            if t < 0.0 {
                return Err(Error::domain(format!("negative scan duration {t}")));
            }
            let mut seq = Vec::with_capacity(2);
            if neighbor_blocked {
                seq.push(PulseSpec::rydberg(neighbor, PI));
            }
            let base = match transition {
                Transition::Ground => PulseSpec::ground(targets, 0.0, 0.0),
                Transition::Rydberg => PulseSpec::rydberg(targets, 0.0),
            };
            let area = base.rabi_frequency(params) * t;
            seq.push(PulseSpec { area, ..base }.with_crosstalk(params.crosstalk_ratio));
            Ok(seq)
        })
        .collect()
}

/// Total time from the start of the first pulse to the end of the last.
pub fn total_duration(params: &PhysicalParams, seq: &[PulseSpec]) -> f64 {
    seq.iter().enumerate().map(|(i, p)| p.duration(params) + if i > 0 { p.pre_gap } else { 0.0 }).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnot_structure() {
        let p = PhysicalParams::default();
        let seq = cnot_sequence(&p);
        assert_eq!(seq.len(), 5);
        let kinds: Vec<_> = seq.iter().map(|s| (s.transition, s.targets)).collect();
        assert_eq!(
            kinds,
            vec![
                (Transition::Ground, TARGET_ONLY),
                (Transition::Rydberg, CONTROL_ONLY),
                (Transition::Rydberg, TARGET_ONLY),
                (Transition::Rydberg, CONTROL_ONLY),
                (Transition::Ground, TARGET_ONLY),
            ]
        );
        let rydberg_area: f64 = seq.iter().filter(|s| s.transition == Transition::Rydberg).map(|s| s.area).sum();
        assert_eq!(rydberg_area, 4.0 * PI);
        assert_eq!(seq[0].area, PI / 2.0);
        assert_eq!(seq[4].area, PI / 2.0);
    }

    #[test]
    fn cnot_gap_between_pulses_two_and_four() {
        let p = PhysicalParams::default();
        let seq = cnot_sequence(&p);
        // start of pulse 2 to end of pulse 4
        let span = total_duration(&p, &seq[1..4]);
        let pulses: f64 = seq[1..4].iter().map(|s| s.duration(&p)).sum();
        assert!((span - (p.t24 + pulses)).abs() < 1e-18);
        assert_eq!(seq[2].pre_gap, p.t24 / 2.0);
        assert_eq!(seq[3].pre_gap, p.t24 / 2.0);
    }

    #[test]
    fn durations_match_areas() {
        let p = PhysicalParams::default();
        let mut all = cnot_sequence(&p);
        all.extend(parity_analysis_pulses(&p, 1e-6).unwrap());
        for s in &all {
            assert!((s.duration(&p) * s.rabi_frequency(&p) - s.area).abs() < 1e-12);
            if s.area > 0.0 {
                assert!(s.duration(&p) > 0.0);
            }
        }
    }

    #[test]
    fn last_pulse_pi_out_of_phase_without_light_shift() {
        let p = PhysicalParams { omega_780: 0.0, ..Default::default() };
        let seq = cnot_sequence(&p);
        assert_eq!(seq[4].phase[TARGET] - seq[0].phase[TARGET], PI);
    }

    #[test]
    fn parity_analysis_phase() {
        let p = PhysicalParams::default();
        assert_eq!(parity_analysis_pulses(&p, 0.0).unwrap()[0].phase, [0.0, 0.0]);
        let s = &parity_analysis_pulses(&p, 4e-6).unwrap()[0];
        assert!((s.phase[0] - PI).abs() < 1e-12);
        assert_eq!(s.targets, BOTH);
        assert_eq!(s.pre_gap, 4e-6);
        assert!(parity_analysis_pulses(&p, -1.0).is_err());
    }

    #[test]
    fn bell_prep_prepends_control_pulse() {
        let p = PhysicalParams::default();
        let seq = bell_prep_sequence(&p, AtomLevel::G1).unwrap();
        assert_eq!(seq.len(), 6);
        assert_eq!(seq[0].targets, CONTROL_ONLY);
        assert_eq!(seq[0].area, PI / 2.0);
        assert!(bell_prep_sequence(&p, AtomLevel::R).is_err());
    }

    #[test]
    fn rabi_scan_shapes() {
        let p = PhysicalParams::default();
        let durations = [0.0, 100e-9, 500e-9];
        let scans = rabi_scan(&p, Transition::Rydberg, TARGET, &durations, true).unwrap();
        assert_eq!(scans.len(), 3);
        for (seq, t) in scans.iter().zip(durations) {
            assert_eq!(seq.len(), 2);
            assert_eq!(seq[0].targets, CONTROL_ONLY);
            assert_eq!(seq[0].area, PI);
            assert!((seq[1].duration(&p) - t).abs() < 1e-18);
            let drive = seq[1].drive(&p);
            assert_eq!(drive[TARGET], p.omega_ryd);
            assert_eq!(drive[CONTROL], p.omega_ryd * p.crosstalk_ratio);
        }
        assert!(rabi_scan(&p, Transition::Ground, TARGET, &[-1.0], false).is_err());
        assert!(rabi_scan(&p, Transition::Ground, 2, &[1.0], false).is_err());
    }
}
