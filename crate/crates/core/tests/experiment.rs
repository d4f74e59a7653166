use rydberg_cnot::analysis::{entanglement_fidelity, fit_parity, fit_sinusoid, ideal_cnot};
use rydberg_cnot::experiment::{
    bell_experiment, parity_scan, preparation_table, rabi_experiment, truth_table, uniform_gaps, RabiSpec, Setup,
    DEFAULT_TARGET_BLOCKADE,
};
use rydberg_cnot::noise::{dephasing_factor, Channels, NoiseConfig};
use rydberg_cnot::qcore::{AtomLevel, CONTROL, TARGET};
use rydberg_cnot::sequence::Transition;
use rydberg_cnot::thermal::{double_excitation_prob, TrapConfig};
use rydberg_cnot::PhysicalParams;

fn setup(temperature: f64, noise: NoiseConfig) -> Setup {
    Setup::calibrated(
        PhysicalParams::default(),
        TrapConfig::default().with_temperature(temperature),
        noise,
        DEFAULT_TARGET_BLOCKADE,
        200_000,
        3,
    )
    .unwrap()
}

#[test]
fn noiseless_gate_is_a_permutation() {
    let t = truth_table(&setup(175e-6, NoiseConfig::noiseless()), 400).unwrap();
    let ideal = ideal_cnot();
    for (i, (row, want)) in t.probs.iter().zip(&ideal).enumerate() {
        for (j, (p, w)) in row.iter().zip(want).enumerate() {
            assert!((p - w).abs() < 0.01, "in {i} out {j}: {p}");
        }
    }
    assert!(t.fidelity() > 0.99);
}

#[test]
fn noiseless_bell_states() {
    let s = setup(175e-6, NoiseConfig::noiseless());
    // |B1> lives on 00/11, |B2> on 01/10
    for (target, on, off) in [(AtomLevel::G1, [0, 3], [1, 2]), (AtomLevel::G0, [1, 2], [0, 3])] {
        let b = bell_experiment(&s, target, 2000).unwrap();
        for k in on {
            assert!((b.p[k] - 0.5).abs() < 0.04, "{target:?} {:?}", b.p);
        }
        assert!(b.p[off[0]] + b.p[off[1]] < 0.02, "{target:?} {:?}", b.p);
    }
}

#[test]
fn background_loss_rate() {
    let t = preparation_table(&setup(175e-6, NoiseConfig::only("background_loss").unwrap()), 5000).unwrap();
    let expected: f64 = 1.0 - 0.9 * 0.9;
    for (i, &loss) in t.loss.iter().enumerate() {
        let sigma = (expected * (1.0 - expected) / 5000.0).sqrt();
        assert!((loss - expected).abs() < 4.0 * sigma, "input {i}: {loss}");
        assert!((t.probs[i][i] - 0.81).abs() < 4.0 * sigma, "input {i}: {:?}", t.probs[i]);
    }
}

#[test]
fn each_channel_only_costs_fidelity() {
    let shots = 1000;
    let clean = truth_table(&setup(175e-6, NoiseConfig::noiseless()), shots).unwrap().fidelity();
    let full = truth_table(&setup(175e-6, NoiseConfig::default()), shots).unwrap().fidelity();
    // binomial spread of a table fidelity with `shots` per setting
    let slack = 3.0 * (0.25 / (4.0 * shots as f64)).sqrt();
    for name in Channels::NAMES {
        let f = truth_table(&setup(175e-6, NoiseConfig::only(name).unwrap()), shots).unwrap().fidelity();
        assert!(f <= clean + slack, "{name}: {f} vs clean {clean}");
        assert!(f + slack >= full, "{name}: {f} vs full {full}");
    }
    assert!(full < clean - 0.1, "full {full} clean {clean}");
}

#[test]
fn doppler_coherence_follows_dephasing_factor() {
    let p = PhysicalParams::default();
    let gaps = uniform_gaps(8e-6, 25);
    for temp in [50e-6, 100e-6, 150e-6, 175e-6, 210e-6] {
        let s = setup(temp, NoiseConfig::only("doppler_dephasing").unwrap());
        let c = parity_scan(&s, &gaps, 1000).unwrap();
        let fit = fit_parity(&c.gaps(), &c.parities(), Some(&c.stderrs()), p.omega_ac).unwrap();
        let expected = dephasing_factor(temp, p.t24, &p) / 2.0;
        assert!((fit.abs_c1 - expected).abs() < 0.02, "T = {temp}: |C1| = {} vs {expected}", fit.abs_c1);
    }
}

#[test]
fn separable_state_is_not_entangled() {
    let mut s = setup(175e-6, NoiseConfig::noiseless());
    s.model.b0 = 0.0;
    let c = parity_scan(&s, &uniform_gaps(8e-6, 25), 500).unwrap();
    let fit = fit_parity(&c.gaps(), &c.parities(), Some(&c.stderrs()), s.params.omega_ac).unwrap();
    let b = bell_experiment(&s, AtomLevel::G1, 2000).unwrap();
    let f = entanglement_fidelity(b.p[0], b.p[3], fit.abs_c1).unwrap();
    let sigma = (0.25 * (b.stderr[0].powi(2) + b.stderr[3].powi(2)) + fit.std_errors()[1].powi(2)).sqrt();
    assert!(f <= 0.5 + 3.0 * sigma, "{f} ± {sigma}");
}

#[test]
fn ground_rabi_period() {
    let s = setup(175e-6, NoiseConfig::noiseless());
    let durations: Vec<f64> = (0..41).map(|i| 1e-7 * i as f64).collect();
    let spec = RabiSpec {
        transition: Transition::Ground,
        atom: TARGET,
        durations: durations.clone(),
        neighbor_blocked: false,
    };
    let curve = rabi_experiment(&s, &spec, 1000).unwrap();
    let site: Vec<f64> = curve.points.iter().map(|p| p.site).collect();
    let fit = fit_sinusoid(&durations, &site, None, s.params.omega_g).unwrap();
    let pi_time = std::f64::consts::PI / fit.frequency;
    assert!((pi_time / s.params.ground_pi_time() - 1.0).abs() < 0.01, "{pi_time}");
}

#[test]
fn rydberg_rabi_contrast_and_blockade() {
    let s = setup(175e-6, NoiseConfig::default());
    let retention = s.noise.single_retention();
    let durations: Vec<f64> = (0..41).map(|i| 0.1e-6 * i as f64).collect();
    let free = RabiSpec { transition: Transition::Rydberg, atom: CONTROL, durations, neighbor_blocked: false };
    let curve = rabi_experiment(&s, &free, 2000).unwrap();
    let corrected = curve.corrected_site(retention);
    let hi = corrected.iter().cloned().fold(f64::MIN, f64::max);
    let lo = corrected.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi - lo >= 0.90, "peak-to-peak {}", hi - lo);

    // the blockade alone, with the thermal spread of separations
    let s = setup(175e-6, NoiseConfig::only("position_spread").unwrap());
    let blocked = RabiSpec { neighbor_blocked: true, ..free };
    let curve = rabi_experiment(&s, &blocked, 2000).unwrap();
    let residual = curve.points.iter().map(|p| p.site).fold(0.0, f64::max);
    let p2 = double_excitation_prob(s.params.omega_ryd, DEFAULT_TARGET_BLOCKADE).unwrap();
    assert!(residual <= p2 + 0.02, "residual {residual} vs P2 {p2}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = setup(175e-6, NoiseConfig::default());
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| truth_table(&s, 300).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(8));
}

#[test]
fn seed_changes_results() {
    let mut s = setup(175e-6, NoiseConfig::default());
    let a = truth_table(&s, 300).unwrap();
    s.seed += 1;
    assert_ne!(a, truth_table(&s, 300).unwrap());
}
