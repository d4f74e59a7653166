//! End-to-end acceptance checks, shared by the `acceptance` test target and
//! the CLI `selftest` command.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::{
    correct_background, correct_trace, entanglement_fidelity, fit_parity, ideal_cnot, truth_table_fidelity, ProbTable,
};
use crate::error::Result;
use crate::experiment::{bell_experiment, parity_scan, uniform_gaps, Setup, DEFAULT_TARGET_BLOCKADE};
use crate::export::parity_csv;
use crate::noise::{
    ac_stark_phase, dephasing_factor, doppler_phase, intrinsic_gate_error, max_fidelity_from_dephasing,
    quadrature_budget, ErrorContributions, NoiseConfig,
};
use crate::params::PhysicalParams;
use crate::qcore::{
    evolve, measure, outcome_probabilities, rydberg_hamiltonian, AtomLevel, Hamiltonian, ReadoutMode, TwoAtomState,
};
use crate::rng::{shot_rng, stream_id};
use crate::thermal::{calibrate_blockade, draw_shot_sample, mean_intrinsic_error, Axis, BlockadeModel, TrapConfig};

/// Shots per data point and readout setting for the end-to-end criteria.
pub const SHOTS: u64 = 10_000;
pub const PARITY_POINTS: usize = 25;
pub const PARITY_SPAN: f64 = 8e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.title, self.detail)
    }
}

fn outcome(id: u8, title: &'static str, checks: &[(bool, String)]) -> Outcome {
    Outcome {
        id,
        title,
        passed: checks.iter().all(|c| c.0),
        detail: checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; "),
    }
}

fn within(name: &str, value: f64, target: f64, tol: f64) -> (bool, String) {
    ((value - target).abs() <= tol, format!("{name} = {value:.5} (want {target:.5} ± {tol:.0e})"))
}

fn at_least(name: &str, value: f64, bound: f64) -> (bool, String) {
    (value >= bound, format!("{name} = {value:.4} (want ≥ {bound})"))
}

fn failed(id: u8, title: &'static str, e: crate::Error) -> Outcome {
    Outcome { id, title, passed: false, detail: format!("error: {e}") }
}

pub fn intrinsic_error() -> Outcome {
    let p = PhysicalParams::default();
    let title = "intrinsic gate error";
    match intrinsic_gate_error(p.omega_ryd, p.tau_ryd, DEFAULT_TARGET_BLOCKADE, p.omega_10) {
        Ok(e) => outcome(1, title, &[within("E", e, 6.5e-3, 0.1e-3)]),
        Err(e) => failed(1, title, e),
    }
}

pub fn dephasing() -> Outcome {
    let p = PhysicalParams::default();
    let closed = dephasing_factor(150e-6, 2.2e-6, &p);
    let trap = TrapConfig::default().with_temperature(150e-6);
    let model = BlockadeModel { b0: DEFAULT_TARGET_BLOCKADE, r0: trap.separation_x };
    let mut rng = shot_rng(0, stream_id("acceptance-dephasing", &[]), 0);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        match draw_shot_sample(&trap, &model, p.mass, false, &mut rng) {
            Ok(s) => acc += doppler_phase(s.velocity_along(Axis::Z)[0], 2.2e-6, &p).cos(),
            Err(e) => return failed(2, "Doppler dephasing factor", e),
        }
    }
    let mc = acc / n as f64;
    outcome(
        2,
        "Doppler dephasing factor",
        &[
            within("closed form", closed, 0.41, 0.02),
            within("Monte Carlo", mc, 0.41, 0.02),
            within("fidelity (closed)", max_fidelity_from_dephasing(closed), 0.71, 0.01),
            within("fidelity (MC)", max_fidelity_from_dephasing(mc), 0.71, 0.01),
        ],
    )
}

/// Background-corrected `|B₁⟩` fidelity from a full parity scan.
pub struct BellRun {
    pub fidelity: f64,
    pub abs_c1: f64,
    pub populations: [f64; 4],
    pub omega_fit: f64,
    pub xi: f64,
    /// One-sigma uncertainty of the corrected fidelity.
    pub sigma: f64,
}

pub fn bell_run(setup: &Setup, shots: u64) -> Result<BellRun> {
    let gaps = uniform_gaps(PARITY_SPAN, PARITY_POINTS);
    let curve = parity_scan(setup, &gaps, shots)?;
    let fit = fit_parity(&curve.gaps(), &curve.parities(), Some(&curve.stderrs()), setup.params.omega_ac)?;
    let pops = bell_experiment(setup, AtomLevel::G1, shots)?;
    let retention = setup.noise.pair_retention();
    let raw = entanglement_fidelity(pops.p[0], pops.p[3], fit.abs_c1)?;
    let fidelity = correct_background(raw, retention)?.value;
    let raw_sigma = (0.25 * (pops.stderr[0].powi(2) + pops.stderr[3].powi(2)) + fit.std_errors()[1].powi(2)).sqrt();
    Ok(BellRun {
        fidelity,
        abs_c1: fit.abs_c1,
        populations: pops.p,
        omega_fit: fit.omega_fit,
        xi: fit.xi,
        sigma: raw_sigma / retention,
    })
}

pub fn improvement_projection(shots: u64) -> Outcome {
    let title = "projection at 50 uK, t24 = 1.5 us";
    let params = PhysicalParams { t24: 1.5e-6, ..Default::default() };
    let limit = max_fidelity_from_dephasing(dephasing_factor(50e-6, params.t24, &params));
    let setup = Setup::calibrated(
        params,
        TrapConfig::default().with_temperature(50e-6),
        NoiseConfig::default(),
        DEFAULT_TARGET_BLOCKADE,
        crate::experiment::DEFAULT_CALIBRATION_SAMPLES,
        0,
    );
    match setup.and_then(|s| bell_run(&s, shots)) {
        Ok(run) => outcome(
            3,
            title,
            &[
                at_least("dephasing-limited fidelity", limit, 0.93),
                at_least(&format!("corrected Bell fidelity (±{:.3})", run.sigma), run.fidelity, 0.88),
            ],
        ),
        Err(e) => failed(3, title, e),
    }
}

pub fn stark_phase() -> Outcome {
    let title = "AC Stark phase";
    match ac_stark_phase(&PhysicalParams::default()) {
        Ok(xi) => {
            let mut c = within("xi", xi, 14.69, 0.05);
            c.1 += &format!(", xi - 4pi = {:.3}", xi - 4.0 * PI);
            outcome(4, title, &[c])
        }
        Err(e) => failed(4, title, e),
    }
}

pub fn budgets() -> Outcome {
    let title = "quadrature error budgets";
    let (Ok(cur), Ok(prev)) =
        (quadrature_budget(ErrorContributions::CURRENT), quadrature_budget(ErrorContributions::PREVIOUS))
    else {
        return Outcome { id: 5, title, passed: false, detail: "budget evaluation failed".into() };
    };
    let round2 = |x: f64| (x * 100.0).round() / 100.0;
    outcome(
        5,
        title,
        &[
            within("this work", cur.total, 0.064, 5e-4),
            within("previous (exact quadrature of 0.1, 0.09, 0.01, 0.04, 0.04)", prev.total, 0.0214f64.sqrt(), 1e-12),
            (round2(cur.total) == 0.06 && round2(prev.total) == 0.15, "rounded totals 0.06 / 0.15 as printed".into()),
        ],
    )
}

pub fn vdw_ratio() -> Outcome {
    let m = BlockadeModel { b0: DEFAULT_TARGET_BLOCKADE, r0: 8.7e-6 };
    outcome(6, "van der Waals ratio", &[within("B(8.7um)/B(10um)", m.blockade(8.7e-6) / m.blockade(10e-6), 2.31, 0.01)])
}

pub fn thermal_average() -> Outcome {
    let title = "thermally averaged intrinsic error";
    let p = PhysicalParams::default();
    let trap = TrapConfig::default();
    let n = crate::experiment::DEFAULT_CALIBRATION_SAMPLES;
    let mut rng = shot_rng(0, stream_id("acceptance-thermal", &[]), 0);
    let mut run = || -> Result<(BlockadeModel, f64)> {
        let model = calibrate_blockade(&trap, &p, DEFAULT_TARGET_BLOCKADE, n, &mut rng)?;
        // fresh, independent separations
        let seps = (0..n)
            .map(|_| draw_shot_sample(&trap, &model, p.mass, true, &mut rng).map(|s| s.separation))
            .collect::<Result<Vec<_>>>()?;
        Ok((model, mean_intrinsic_error(&p, &model, &seps)?))
    };
    match run() {
        Ok((model, mean)) => {
            let mut c = within("<E>", mean, 6.5e-3, 1.0e-3);
            c.1 += &format!(", b0 = 2pi x {:.0} MHz at 8.7 um", model.b0 / TAU / 1e6);
            outcome(7, title, &[c])
        }
        Err(e) => failed(7, title, e),
    }
}

/// The measured CNOT table, rows are inputs. As published the matrix has
/// inputs as columns, hence the transpose.
pub fn measured_truth_table() -> ProbTable {
    let printed = [[0.08, 0.93, 0.0, 0.0], [0.88, 0.02, 0.02, 0.02], [0.0, 0.0, 0.90, 0.05], [0.02, 0.05, 0.07, 0.94]];
    std::array::from_fn(|i| std::array::from_fn(|j| printed[j][i]))
}

pub fn truth_table_arithmetic() -> Outcome {
    let title = "truth-table and loss-correction arithmetic";
    let f = truth_table_fidelity(&measured_truth_table(), &ideal_cnot());
    let corr = (|| -> Result<[f64; 3]> {
        let cnot = correct_background(0.74, 0.81)?.value;
        let cnot_trace = correct_trace(0.914, 0.99)?.value;
        let ent = correct_background(0.58, 0.81)?.value;
        Ok([cnot, cnot_trace, ent])
    })();
    match corr {
        Ok([cnot, cnot_trace, ent]) => outcome(
            8,
            title,
            &[
                within("table fidelity", f, 0.9125, 1e-4),
                within("0.74/0.81", cnot, 0.914, 5e-4),
                within("0.914/0.99", cnot_trace, 0.923, 5e-4),
                within("0.58/0.81", ent, 0.716, 5e-4),
                (
                    (cnot - 0.91).abs() < 0.01 && (cnot_trace - 0.92).abs() < 0.01 && (ent - 0.71).abs() < 0.01,
                    "printed 0.91 / 0.92 / 0.71 reproduced to 0.01".into(),
                ),
            ],
        ),
        Err(e) => failed(8, title, e),
    }
}

pub fn model_prediction(shots: u64) -> Outcome {
    let title = "Bell fidelity at 175 uK";
    match Setup::experimental(175e-6, NoiseConfig::default(), 0).and_then(|s| bell_run(&s, shots)) {
        Ok(run) => {
            let ok = (0.60..=0.72).contains(&run.fidelity);
            outcome(
                9,
                title,
                &[(
                    ok,
                    format!(
                        "corrected F = {:.4} ± {:.3} (want in [0.60, 0.72]), |C1| = {:.3}",
                        run.fidelity, run.sigma, run.abs_c1
                    ),
                )],
            )
        }
        Err(e) => failed(9, title, e),
    }
}

pub fn parity_pipeline(shots: u64) -> Outcome {
    let title = "parity pipeline";
    let omega_ac = PhysicalParams::default().omega_ac;
    let mut checks = Vec::new();

    // simulated scan
    match Setup::experimental(175e-6, NoiseConfig::noiseless(), 0).and_then(|s| bell_run(&s, shots / 5)) {
        Ok(run) => checks.push(within("fitted 2w / 2w_AC", run.omega_fit / omega_ac, 1.0, 0.05)),
        Err(e) => return failed(10, title, e),
    }

    // synthetic recovery
    let truth = [0.02, 0.35, 2.12, omega_ac];
    let gaps = uniform_gaps(PARITY_SPAN, PARITY_POINTS);
    let model = |t: f64| 2.0 * truth[0] - 2.0 * truth[1] * (2.0 * truth[3] * t + truth[2]).cos();
    let clean: Vec<f64> = gaps.iter().map(|&t| model(t)).collect();
    match fit_parity(&gaps, &clean, None, omega_ac) {
        Ok(f) => {
            let err = [f.re_c2 - truth[0], f.abs_c1 - truth[1], f.xi - truth[2], f.omega_fit / truth[3] - 1.0];
            let worst = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            checks.push((worst < 1e-6, format!("noiseless recovery error {worst:.1e} (want < 1e-6)")));
        }
        Err(e) => return failed(10, title, e),
    }

    // unbiased under noise
    let sigma = vec![0.03; gaps.len()];
    let noise = Normal::new(0.0, 0.03).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(2010);
    let trials = 200;
    let mut sums = [0.0; 4];
    let mut se = [0.0; 4];
    for _ in 0..trials {
        let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
        match fit_parity(&gaps, &y, Some(&sigma), omega_ac) {
            Ok(f) => {
                for (s, v) in sums.iter_mut().zip([f.re_c2, f.abs_c1, f.xi, f.omega_fit]) {
                    *s += v;
                }
                se = f.std_errors();
            }
            Err(e) => return failed(10, title, e),
        }
    }
    let z: Vec<f64> = (0..4).map(|i| (sums[i] / trials as f64 - truth[i]) / (se[i] / (trials as f64).sqrt())).collect();
    let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    checks.push((zmax < 3.0, format!("noisy fits: max |bias| = {zmax:.2} sigma over {trials} trials (want < 3)")));

    // separable state: no blockade
    let separable = Setup::experimental(175e-6, NoiseConfig::noiseless(), 0).and_then(|mut s| {
        s.model.b0 = 0.0;
        bell_run(&s, shots / 5)
    });
    match separable {
        Ok(run) => checks.push((
            run.fidelity <= 0.5 + 3.0 * run.sigma,
            format!("no-blockade F = {:.4} (want ≤ 0.5 + 3 x {:.4})", run.fidelity, run.sigma),
        )),
        Err(e) => return failed(10, title, e),
    }
    outcome(10, title, &checks)
}

/// Pseudo-random Hermitian matrix with entries of order `scale`.
fn random_hamiltonian(rng: &mut ChaCha8Rng, scale: f64) -> Hamiltonian {
    use num_complex::Complex64 as C64;
    use rand::Rng;
    let mut m = crate::qcore::Matrix9::zeros();
    for i in 0..9 {
        m[(i, i)] = C64::new(rng.gen_range(-scale..scale), 0.0);
        for j in 0..i {
            let c = C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            m[(i, j)] = c;
            m[(j, i)] = c.conj();
        }
    }
    Hamiltonian::from_matrix(m)
}

/// Fourth-order Runge-Kutta integration of `dψ/dt = −iHψ`.
pub fn rk4(h: &Hamiltonian, psi: &crate::qcore::Vector9, t: f64, dt: f64) -> crate::qcore::Vector9 {
    use num_complex::Complex64 as C64;
    let m = h.matrix() * C64::new(0.0, -1.0);
    let steps = (t / dt).round().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut y = *psi;
    for _ in 0..steps {
        let k1 = m * y;
        let k2 = m * (y + k1 * C64::new(dt / 2.0, 0.0));
        let k3 = m * (y + k2 * C64::new(dt / 2.0, 0.0));
        let k4 = m * (y + k3 * C64::new(dt, 0.0));
        y += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
    }
    y
}

pub fn numerical_core() -> Outcome {
    let title = "numerical core";
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checks = Vec::new();

    let mut unitarity = 0.0f64;
    let mut integrator = 0.0f64;
    for k in 0..50 {
        let h = random_hamiltonian(&mut rng, TAU * 1e6);
        let t = 0.2e-6 + 1e-8 * k as f64;
        let u = match h.propagator(t) {
            Ok(u) => u,
            Err(e) => return failed(11, title, e),
        };
        let defect = (u.adjoint() * u - crate::qcore::Matrix9::identity()).iter().fold(0.0f64, |m, c| m.max(c.norm()));
        unitarity = unitarity.max(defect);
        if k < 10 {
            let psi = crate::qcore::Vector9::from_fn(|i, _| num_complex::Complex64::new((i + 1) as f64, -(i as f64)));
            let psi = psi / num_complex::Complex64::new(psi.norm(), 0.0);
            let diff = (u * psi - rk4(&h, &psi, t, 1e-9)).norm();
            integrator = integrator.max(diff);
        }
    }
    checks.push((unitarity < 1e-10, format!("max |U†U − 1| = {unitarity:.1e} (want < 1e-10)")));
    checks.push((integrator < 1e-6, format!("max |U ψ − RK4 ψ| = {integrator:.1e} (want < 1e-6)")));

    // blockade limit: simultaneous π pulse on |11⟩ with a large shift
    let p = PhysicalParams::default();
    let h = rydberg_hamiltonian([p.omega_ryd; 2], [0.0; 2], TAU * 50e6);
    let start = crate::qcore::computational_state(AtomLevel::G1, AtomLevel::G1);
    let mut leak = 0.0f64;
    for k in 1..=50 {
        match evolve(&start, &h, p.rydberg_pi_time() * 2.0 * k as f64 / 50.0) {
            Ok(s) => leak = leak.max(s.population(AtomLevel::R, AtomLevel::R)),
            Err(e) => return failed(11, title, e),
        }
    }
    checks.push((leak < 1e-3, format!("max |rr> population under blockade {leak:.1e} (want < 1e-3)")));

    // Born rule
    let amps =
        crate::qcore::Vector9::from_fn(|i, _| num_complex::Complex64::new(0.3 + 0.1 * i as f64, 0.05 * i as f64));
    let state = TwoAtomState::from_amplitudes(amps / num_complex::Complex64::new(amps.norm(), 0.0));
    let mode = ReadoutMode::selecting(AtomLevel::G0, AtomLevel::G1);
    let probs = outcome_probabilities(&state, mode);
    let n = 100_000;
    let mut counts = [0usize; 4];
    let mut mrng = shot_rng(0, stream_id("acceptance-born", &[]), 0);
    for _ in 0..n {
        counts[measure(&state, mode, &mut mrng).index()] += 1;
    }
    let zmax = (0..4)
        .map(|i| {
            let sd = (probs[i] * (1.0 - probs[i]) / n as f64).sqrt().max(1e-12);
            (counts[i] as f64 / n as f64 - probs[i]).abs() / sd
        })
        .fold(0.0f64, f64::max);
    checks.push((zmax < 3.0, format!("Born-rule deviation {zmax:.2} sigma (want < 3)")));
    outcome(11, title, &checks)
}

/// Parity-scan CSV produced on a pool of `workers` threads.
pub fn parity_csv_with_workers(setup: &Setup, workers: usize, shots: u64) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let gaps = uniform_gaps(PARITY_SPAN, 10);
        let curve = parity_scan(setup, &gaps, shots)?;
        parity_csv(&curve, None)
    })
}

pub fn determinism() -> Outcome {
    let title = "determinism across worker counts";
    let run = || -> Result<Vec<String>> {
        let setup = Setup::experimental(175e-6, NoiseConfig::default(), 7)?;
        [1, 4, 8].iter().map(|&w| parity_csv_with_workers(&setup, w, 500)).collect()
    };
    match run() {
        Ok(outs) => {
            let same = outs.windows(2).all(|w| w[0].as_bytes() == w[1].as_bytes());
            outcome(12, title, &[(same, format!("parity CSV byte-identical for 1/4/8 workers: {same}"))])
        }
        Err(e) => failed(12, title, e),
    }
}

/// Runs every criterion with `shots` shots per end-to-end data point.
pub fn run_all(shots: u64) -> Vec<Outcome> {
    vec![
        intrinsic_error(),
        dephasing(),
        improvement_projection(shots),
        stark_phase(),
        budgets(),
        vdw_ratio(),
        thermal_average(),
        truth_table_arithmetic(),
        model_prediction(shots),
        parity_pipeline(shots),
        numerical_core(),
        determinism(),
    ]
}
