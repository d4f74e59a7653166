//! Shot-level experiment harness.
//!
//! Each repetition draws a thermal sample, applies the stochastic noise
//! channels while stepping through the pulse sequence, and reads out both
//! atoms with one blow-away setting. Outcome counts are integers summed over
//! independently seeded shots, so results are identical for any thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{ideal_cnot, truth_table_fidelity, ProbTable};
use crate::error::Result;
use crate::noise::{light_shift_rate, sample_losses, scatter, spontaneous_emission_prob, LossTiming, NoiseConfig};
use crate::params::PhysicalParams;
use crate::qcore::{
    computational_state, evolve, ground_hamiltonian, measure, rydberg_hamiltonian, AtomLevel, Readout, ReadoutMode,
    CONTROL, TARGET,
};
use crate::rng::{shot_rng, stream_id, ShotRng};
use crate::sequence::{bell_prep_sequence, cnot_sequence, parity_analysis_pulses, rabi_scan, PulseSpec, Transition};
use crate::thermal::{calibrate_blockade, draw_shot_sample, Axis, BlockadeModel, ThermalSample, TrapConfig};

/// Effective blockade shift the van der Waals model is calibrated to, rad/s.
pub const DEFAULT_TARGET_BLOCKADE: f64 = std::f64::consts::TAU * 5.3e6;
pub const DEFAULT_CALIBRATION_SAMPLES: usize = 1_000_000;

/// Everything a shot needs besides its random stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub params: PhysicalParams,
    pub trap: TrapConfig,
    pub noise: NoiseConfig,
    pub model: BlockadeModel,
    pub doppler_axis: Axis,
    pub seed: u64,
}

impl Setup {
    /// Validates the inputs and calibrates the blockade model on its own
    /// random stream.
    pub fn calibrated(
        params: PhysicalParams,
        trap: TrapConfig,
        noise: NoiseConfig,
        target_blockade: f64,
        calibration_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        trap.validate()?;
        noise.validate()?;
        let mut rng = shot_rng(seed, stream_id("calibration", &[]), 0);
        let model = calibrate_blockade(&trap, &params, target_blockade, calibration_samples, &mut rng)?;
        Ok(Self { params, trap, noise, model, doppler_axis: Axis::Z, seed })
    }

    /// Default experimental parameters at `temperature`.
    pub fn experimental(temperature: f64, noise: NoiseConfig, seed: u64) -> Result<Self> {
        Self::calibrated(
            PhysicalParams::default(),
            TrapConfig::default().with_temperature(temperature),
            noise,
            DEFAULT_TARGET_BLOCKADE,
            DEFAULT_CALIBRATION_SAMPLES,
            seed,
        )
    }
}

/// One repetition of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    pub input: [AtomLevel; 2],
    pub thermal: ThermalSample,
    /// `(pulse index, atom)` of every scattering event.
    pub se_events: Vec<(usize, usize)>,
    pub losses: [LossTiming; 2],
    /// Atoms left outside the qubit basis by optical pumping.
    pub mispumped: [bool; 2],
    pub outcome: Readout,
    pub mode: ReadoutMode,
}

/// Runs one shot of `seq` from the product state `input`.
///
/// A mispumped atom starts in `|1⟩` and couples to neither laser; a lost atom
/// is frozen and never blockades. Rydberg population picks up the Doppler
/// phase during the waits between pulses; during its own Rydberg pulses a
/// driven atom sees the Doppler detuning (see
/// [`NoiseConfig::doppler_pulse_phase`] for how it is split).
pub fn run_shot<R: Rng + ?Sized>(
    setup: &Setup,
    seq: &[PulseSpec],
    input: [AtomLevel; 2],
    mode: ReadoutMode,
    rng: &mut R,
) -> Result<ShotRecord> {
    let p = &setup.params;
    let ch = &setup.noise.channels;
    let thermal = draw_shot_sample(&setup.trap, &setup.model, p.mass, ch.position_spread, rng)?;
    let k = p.k_eff();
    let doppler = thermal.velocity_along(setup.doppler_axis).map(|v| k * v);
    let blockade = thermal.blockade;
    let losses = sample_losses(&setup.noise, rng);
    let mispumped: [bool; 2] = std::array::from_fn(|_| ch.optical_pumping && rng.gen::<f64>() < setup.noise.p_pump_err);

    let start: [AtomLevel; 2] = std::array::from_fn(|a| if mispumped[a] { AtomLevel::G1 } else { input[a] });
    let mut state = computational_state(start[CONTROL], start[TARGET]);
    for a in [CONTROL, TARGET] {
        if losses[a] == LossTiming::BeforePulses {
            state.set_lost(a);
        }
    }

    let shift = light_shift_rate(p);
    let mut se_events = Vec::new();
    for (i, pulse) in seq.iter().enumerate() {
        if pulse.pre_gap > 0.0 && ch.doppler_dephasing {
            let h = rydberg_hamiltonian([0.0; 2], doppler, blockade);
            state = evolve(&state, &h, pulse.pre_gap)?;
        }
        let drive: [f64; 2] = {
            let d = pulse.drive(p);
            std::array::from_fn(|a| if mispumped[a] { 0.0 } else { d[a] })
        };
        let mut h = match pulse.transition {
            Transition::Ground => {
                let mut h = ground_hamiltonian(drive, pulse.phase);
                h.add_blockade(blockade);
                h
            }
            Transition::Rydberg => {
                let mut h = rydberg_hamiltonian(drive, [0.0; 2], blockade);
                for a in [CONTROL, TARGET] {
                    if drive[a] == 0.0 || !ch.doppler_broadening || !pulse.doppler_sensitive {
                        continue;
                    }
                    if setup.noise.doppler_pulse_phase {
                        h.add_level_shift(a, AtomLevel::R, doppler[a]);
                    } else {
                        h.add_level_shift(a, AtomLevel::R, doppler[a] / 2.0);
                        h.add_level_shift(a, AtomLevel::G1, -doppler[a] / 2.0);
                    }
                }
                h
            }
        };
        if pulse.transition == Transition::Rydberg {
            for a in pulse.addressed_atoms() {
                if !mispumped[a] {
                    h.add_level_shift(a, AtomLevel::G0, shift);
                }
            }
        }
        state = evolve(&state, &h, pulse.duration(p))?;
        for a in pulse.addressed_atoms() {
            if mispumped[a] {
                continue;
            }
            let p_se = spontaneous_emission_prob(p, &setup.noise, pulse);
            if scatter(&mut state, a, p_se, rng) {
                se_events.push((i, a));
            }
        }
    }
    for a in [CONTROL, TARGET] {
        if losses[a] == LossTiming::AfterPulses {
            state.set_lost(a);
        }
    }
    let outcome = measure(&state, mode, rng);
    Ok(ShotRecord { input, thermal, se_events, losses, mispumped, outcome, mode })
}

/// Tally of readout patterns, indexed by [`Readout::index`].
pub type Counts = [u64; 4];

/// Runs `shots` independent shots on the current rayon pool.
pub fn run_batch(
    setup: &Setup,
    seq: &[PulseSpec],
    input: [AtomLevel; 2],
    mode: ReadoutMode,
    shots: u64,
    experiment: u64,
) -> Result<Counts> {
    (0..shots)
        .into_par_iter()
        .map(|i| {
            let mut rng: ShotRng = shot_rng(setup.seed, experiment, i);
            let mut c = [0u64; 4];
            c[run_shot(setup, seq, input, mode, &mut rng)?.outcome.index()] = 1;
            Ok(c)
        })
        .try_reduce(|| [0; 4], |a, b| Ok(std::array::from_fn(|k| a[k] + b[k])))
}

const QUBIT_PAIRS: [[AtomLevel; 2]; 4] = [
    [AtomLevel::G0, AtomLevel::G0],
    [AtomLevel::G0, AtomLevel::G1],
    [AtomLevel::G1, AtomLevel::G0],
    [AtomLevel::G1, AtomLevel::G1],
];

/// Label `2·control + target` of a qubit pair.
pub fn pair_label(pair: [AtomLevel; 2]) -> usize {
    2 * pair[CONTROL].index() + pair[TARGET].index()
}

pub fn pair_from_label(label: usize) -> [AtomLevel; 2] {
    QUBIT_PAIRS[label]
}

/// Joint populations of the four qubit states from four blow-away settings.
///
/// `p[j]` is the fraction of shots in which both atoms were present under the
/// setting that keeps exactly the pair `j`. Shots where an atom is missing for
/// any other reason (background loss, Rydberg population at readout,
/// mispumping) are not attributed to any state, so `loss = 1 − Σ p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub p: [f64; 4],
    pub stderr: [f64; 4],
    pub loss: f64,
    /// Shots per setting.
    pub shots: u64,
}

impl Populations {
    fn from_counts(both_present: [u64; 4], shots: u64) -> Self {
        let n = shots as f64;
        let p: [f64; 4] = both_present.map(|c| c as f64 / n);
        let stderr = p.map(|q| binomial_stderr(q, shots));
        let loss = 1.0 - p.iter().sum::<f64>();
        Self { p, stderr, loss, shots }
    }

    pub fn parity(&self) -> f64 {
        self.p[0] + self.p[3] - self.p[1] - self.p[2]
    }

    pub fn parity_stderr(&self) -> f64 {
        self.stderr.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Binomial standard error, floored at the resolution `1/n` so that every
/// point keeps a finite weight in fits.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    let n = n as f64;
    (p * (1.0 - p) / n).sqrt().max(1.0 / n)
}

/// Measures the populations of the state that `seq` makes from `input`.
pub fn measure_populations(
    setup: &Setup,
    seq: &[PulseSpec],
    input: [AtomLevel; 2],
    shots: u64,
    label: &str,
    point: u64,
) -> Result<Populations> {
    let mut both = [0u64; 4];
    for (j, pair) in QUBIT_PAIRS.iter().enumerate() {
        let mode = ReadoutMode::selecting(pair[CONTROL], pair[TARGET]);
        let id = stream_id(label, &[point, pair_label(input) as u64, j as u64]);
        both[j] = run_batch(setup, seq, input, mode, shots, id)?[3];
    }
    Ok(Populations::from_counts(both, shots))
}

/// Probability truth table, rows are inputs and columns outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub probs: ProbTable,
    pub stderr: ProbTable,
    /// Per input, the probability not attributed to any output.
    pub loss: [f64; 4],
    /// Shots per measurement setting.
    pub shots: u64,
}

impl TruthTable {
    pub fn fidelity(&self) -> f64 {
        truth_table_fidelity(&self.probs, &ideal_cnot())
    }
}

fn table_from_rows(rows: Vec<Populations>, shots: u64) -> TruthTable {
    TruthTable {
        probs: std::array::from_fn(|i| rows[i].p),
        stderr: std::array::from_fn(|i| rows[i].stderr),
        loss: std::array::from_fn(|i| rows[i].loss),
        shots,
    }
}

/// CNOT truth table from `shots` shots per input and readout setting.
pub fn truth_table(setup: &Setup, shots: u64) -> Result<TruthTable> {
    let seq = cnot_sequence(&setup.params);
    let rows = QUBIT_PAIRS
        .iter()
        .map(|&input| measure_populations(setup, &seq, input, shots, "truth-table", 0))
        .collect::<Result<Vec<_>>>()?;
    Ok(table_from_rows(rows, shots))
}

/// Input-state preparation table: the readout applied directly to each
/// prepared product state.
pub fn preparation_table(setup: &Setup, shots: u64) -> Result<TruthTable> {
    let rows = QUBIT_PAIRS
        .iter()
        .map(|&input| measure_populations(setup, &[], input, shots, "preparation", 0))
        .collect::<Result<Vec<_>>>()?;
    Ok(table_from_rows(rows, shots))
}

/// Populations after Bell-state preparation with the given target input
/// (`G1` gives `|B₁⟩`, `G0` gives `|B₂⟩`).
pub fn bell_experiment(setup: &Setup, target_input: AtomLevel, shots: u64) -> Result<Populations> {
    let seq = bell_prep_sequence(&setup.params, target_input)?;
    let input = [crate::sequence::BELL_CONTROL_INPUT, target_input];
    measure_populations(setup, &seq, input, shots, "bell", 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityPoint {
    /// Wait before the analysis pulses, seconds.
    pub gap: f64,
    pub parity: f64,
    pub stderr: f64,
    pub populations: Populations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityCurve {
    pub points: Vec<ParityPoint>,
}

impl ParityCurve {
    pub fn gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gap).collect()
    }

    pub fn parities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.parity).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.stderr).collect()
    }
}

/// `|B₁⟩` preparation followed by analysis pulses after each gap.
pub fn parity_scan(setup: &Setup, gaps: &[f64], shots: u64) -> Result<ParityCurve> {
    let mut prep = bell_prep_sequence(&setup.params, AtomLevel::G1)?;
    let input = [crate::sequence::BELL_CONTROL_INPUT, AtomLevel::G1];
    let base = prep.len();
    let mut points = Vec::with_capacity(gaps.len());
    for (k, &gap) in gaps.iter().enumerate() {
        prep.truncate(base);
        prep.extend(parity_analysis_pulses(&setup.params, gap)?);
        let populations = measure_populations(setup, &prep, input, shots, "parity", k as u64)?;
        points.push(ParityPoint {
            gap,
            parity: populations.parity(),
            stderr: populations.parity_stderr(),
            populations,
        });
    }
    Ok(ParityCurve { points })
}

/// `n` evenly spaced gaps from 0 to `span`.
pub fn uniform_gaps(span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| span * i as f64 / (n.max(2) - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiSpec {
    pub transition: Transition,
    pub atom: usize,
    pub durations: Vec<f64>,
    pub neighbor_blocked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiPoint {
    pub duration: f64,
    /// Raw signal on the driven site: fraction of shots the atom read absent
    /// (Rydberg scans) or present in `|1⟩` (ground scans).
    pub site: f64,
    pub site_stderr: f64,
    pub neighbor: f64,
    pub neighbor_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiCurve {
    pub spec: RabiSpec,
    pub shots: u64,
    pub points: Vec<RabiPoint>,
}

impl RabiCurve {
    /// Excited-state population with single-atom background loss divided out.
    pub fn corrected_site(&self, retention: f64) -> Vec<f64> {
        self.points.iter().map(|p| self.correct(p.site, retention)).collect()
    }

    pub fn corrected_neighbor(&self, retention: f64) -> Vec<f64> {
        self.points.iter().map(|p| self.correct(p.neighbor, retention)).collect()
    }

    fn correct(&self, raw: f64, retention: f64) -> f64 {
        match self.spec.transition {
            // absent = 1 − r (1 − P_r)
            Transition::Rydberg => 1.0 - (1.0 - raw) / retention,
            Transition::Ground => raw / retention,
        }
    }
}

/// Rabi flopping. Rydberg scans start from `|11⟩` and count absent atoms;
/// ground scans start from `|00⟩` and count atoms that survive `|0⟩` blow-away.
pub fn rabi_experiment(setup: &Setup, spec: &RabiSpec, shots: u64) -> Result<RabiCurve> {
    let seqs = rabi_scan(&setup.params, spec.transition, spec.atom, &spec.durations, spec.neighbor_blocked)?;
    let (input, mode) = match spec.transition {
        Transition::Rydberg => ([AtomLevel::G1; 2], ReadoutMode::BLOW_ZEROS),
        Transition::Ground => ([AtomLevel::G0; 2], ReadoutMode::BLOW_ZEROS),
    };
    let label = match spec.transition {
        Transition::Rydberg => "rabi-rydberg",
        Transition::Ground => "rabi-ground",
    };
    let mut points = Vec::with_capacity(seqs.len());
    for (k, (seq, &duration)) in seqs.iter().zip(&spec.durations).enumerate() {
        let id = stream_id(label, &[k as u64, spec.atom as u64, spec.neighbor_blocked as u64]);
        let c = run_batch(setup, seq, input, mode, shots, id)?;
        let n = shots as f64;
        let present = |atom: usize| -> f64 {
            let hits: u64 = (0..4).filter(|&i| Readout::from_index(i).present[atom]).map(|i| c[i]).sum();
            hits as f64 / n
        };
        let signal = |atom: usize| match spec.transition {
            Transition::Rydberg => 1.0 - present(atom),
            Transition::Ground => present(atom),
        };
        let (site, neighbor) = (signal(spec.atom), signal(1 - spec.atom));
        points.push(RabiPoint {
            duration,
            site,
            site_stderr: binomial_stderr(site, shots),
            neighbor,
            neighbor_stderr: binomial_stderr(neighbor, shots),
        });
    }
    Ok(RabiCurve { spec: spec.clone(), shots, points })
}
