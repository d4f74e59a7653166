//! Estimation: sinusoid and parity fits, entanglement and truth-table
//! fidelities, and the scalar loss corrections.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 200;
pub const GRID_HALF_WIDTH: f64 = 0.2;
pub const FIT_RTOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;

/// Least-squares fit of `y(t) = offset − amplitude·cos(frequency·t + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    /// Always ≥ 0; a negative solution is folded into the phase.
    pub amplitude: f64,
    /// Angular frequency, rad/s.
    pub frequency: f64,
    /// Radians in `[0, 2π)`.
    pub phase: f64,
    /// Parameter covariance in the order (offset, amplitude, frequency, phase).
    pub covariance: [[f64; 4]; 4],
    pub residual_rms: f64,
    pub chi2: f64,
    pub iterations: usize,
}

impl SinusoidFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset - self.amplitude * (self.frequency * t + self.phase).cos()
    }

    pub fn std_errors(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.covariance[i][i].max(0.0).sqrt())
    }
}

fn model_terms(p: &Vector4<f64>, t: f64) -> (f64, Vector4<f64>) {
    let arg = p[2] * t + p[3];
    let (s, c) = arg.sin_cos();
    let value = p[0] - p[1] * c;
    let grad = Vector4::new(1.0, -c, p[1] * t * s, p[1] * s);
    (value, grad)
}

fn chi2(p: &Vector4<f64>, t: &[f64], y: &[f64], w: &[f64]) -> f64 {
    t.iter().zip(y).zip(w).map(|((&t, &y), &w)| w * (y - model_terms(p, t).0).powi(2)).sum()
}

/// Weighted linear fit of `c0 + c1·cos(f t) + c2·sin(f t)` at fixed `f`;
/// returns the sinusoid parameters and χ².
fn linear_at(f: f64, t: &[f64], y: &[f64], w: &[f64]) -> Option<(Vector4<f64>, f64)> {
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut b = nalgebra::Vector3::<f64>::zeros();
    for ((&t, &y), &w) in t.iter().zip(y).zip(w) {
        let (s, c) = (f * t).sin_cos();
        let basis = nalgebra::Vector3::new(1.0, c, s);
        a += w * basis * basis.transpose();
        b += w * y * basis;
    }
    let x = a.lu().solve(&b)?;
    // −A cos(ft + φ) = −A cos φ cos ft + A sin φ sin ft
    let amplitude = x[1].hypot(x[2]);
    let phase = x[2].atan2(-x[1]);
    let p = Vector4::new(x[0], amplitude, f, phase);
    Some((p, chi2(&p, t, y, w)))
}

fn normalized(p: Vector4<f64>) -> Vector4<f64> {
    let (amp, phase) = if p[1] < 0.0 { (-p[1], p[3] + PI) } else { (p[1], p[3]) };
    Vector4::new(p[0], amp, p[2], phase.rem_euclid(TAU))
}

fn finish(p: Vector4<f64>, t: &[f64], y: &[f64], w: &[f64], sigma_known: bool, iterations: usize) -> SinusoidFit {
    let p = normalized(p);
    let mut jtj = Matrix4::<f64>::zeros();
    for (&t, &w) in t.iter().zip(w) {
        let g = model_terms(&p, t).1;
        jtj += w * g * g.transpose();
    }
    let chi2 = chi2(&p, t, y, w);
    let n = t.len();
    let residual_rms =
        (t.iter().zip(y).map(|(&t, &y)| (y - model_terms(&p, t).0).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = if sigma_known { 1.0 } else { chi2 / (n as f64 - 4.0).max(1.0) };
    let cov = jtj.try_inverse().map(|m| m * scale).unwrap_or_else(|| Matrix4::from_element(f64::NAN));
    SinusoidFit {
        offset: p[0],
        amplitude: p[1],
        frequency: p[2],
        phase: p[3],
        covariance: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
        residual_rms,
        chi2,
        iterations,
    }
}

/// Fits `offset − amplitude·cos(frequency·t + phase)`.
///
/// The frequency is first located on a 200-point grid over ±20% of
/// `nominal_frequency` (the other three parameters solved linearly at each
/// point), then all four are refined by damped Gauss-Newton. `sigma` gives
/// per-point standard errors; without it the points are weighted equally and
/// the covariance is scaled by the residual variance.
pub fn fit_sinusoid(t: &[f64], y: &[f64], sigma: Option<&[f64]>, nominal_frequency: f64) -> Result<SinusoidFit> {
    let n = t.len();
    if n != y.len() || sigma.is_some_and(|s| s.len() != n) {
        return Err(Error::domain("fit inputs have mismatched lengths"));
    }
    if n < 5 {
        return Err(Error::domain(format!("need at least 5 points to fit 4 parameters, got {n}")));
    }
    if !(nominal_frequency > 0.0) {
        return Err(Error::domain("nominal frequency must be positive"));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => {
            if s.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::domain("standard errors must be positive"));
            }
            s.iter().map(|s| 1.0 / (s * s)).collect()
        }
        None => vec![1.0; n],
    };

    let mut best: Option<(Vector4<f64>, f64)> = None;
    for k in 0..GRID_POINTS {
        let f =
            nominal_frequency * (1.0 - GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * k as f64 / (GRID_POINTS - 1) as f64);
        if let Some((p, c)) = linear_at(f, t, y, &w) {
            if best.as_ref().is_none_or(|b| c < b.1) {
                best = Some((p, c));
            }
        }
    }
    let (mut p, mut c) = best.ok_or_else(|| Error::Fit { reason: "singular grid search".into(), best: None })?;
    let grid = p;

    for iter in 1..=MAX_ITERATIONS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for ((&t, &y), &w) in t.iter().zip(y).zip(&w) {
            let (v, g) = model_terms(&p, t);
            jtj += w * g * g.transpose();
            jtr += w * (y - v) * g;
        }
        let Some(step) = jtj.lu().solve(&jtr) else {
            return Err(Error::Fit {
                reason: "singular normal equations".into(),
                best: Some(Box::new(finish(grid, t, y, &w, sigma.is_some(), 0))),
            });
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = p + lambda * step;
            let tc = chi2(&trial, t, y, &w);
            if tc <= c {
                p = trial;
                c = tc;
                accepted = true;
                break;
            }
            lambda /= 2.0;
        }
        let scales = Vector4::new(p[0].abs().max(1.0), p[1].abs().max(1.0), p[2].abs(), 1.0);
        let small = (0..4).all(|i| (lambda * step[i]).abs() <= FIT_RTOL * scales[i]);
        if small || !accepted {
            // no downhill step left means we sit at the minimum to rounding
            return Ok(finish(p, t, y, &w, sigma.is_some(), iter));
        }
    }
    Err(Error::Fit {
        reason: format!("no convergence after {MAX_ITERATIONS} Gauss-Newton iterations"),
        best: Some(Box::new(finish(grid, t, y, &w, sigma.is_some(), 0))),
    })
}

/// Parity curve parameters for `P(t) = 2 Re C₂ − 2|C₁| cos(2 ω t + ξ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityFit {
    pub re_c2: f64,
    pub abs_c1: f64,
    /// Radians in `[0, 2π)`.
    pub xi: f64,
    /// Analysis light shift `ω`, rad/s (the parity oscillates at `2ω`).
    pub omega_fit: f64,
    /// Covariance in the order (re_c2, abs_c1, xi, omega_fit).
    pub covariance: [[f64; 4]; 4],
    pub residual_rms: f64,
    pub chi2: f64,
}

impl ParityFit {
    pub fn std_errors(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    /// Whether the coherences are compatible with a physical state, allowing `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.re_c2.abs() <= 0.5 + tol && self.abs_c1 <= 0.5 + tol
    }
}

impl From<SinusoidFit> for ParityFit {
    fn from(s: SinusoidFit) -> Self {
        // (offset, amplitude, frequency, phase) → (re_c2, abs_c1, xi, omega)
        let map = [(0, 0.5), (1, 0.5), (3, 1.0), (2, 0.5)];
        let covariance =
            std::array::from_fn(|i| std::array::from_fn(|j| map[i].1 * map[j].1 * s.covariance[map[i].0][map[j].0]));
        ParityFit {
            re_c2: s.offset / 2.0,
            abs_c1: s.amplitude / 2.0,
            xi: s.phase,
            omega_fit: s.frequency / 2.0,
            covariance,
            residual_rms: s.residual_rms,
            chi2: s.chi2,
        }
    }
}

/// Fits a parity scan. `nominal_omega` is the expected analysis light shift.
pub fn fit_parity(gaps: &[f64], parity: &[f64], sigma: Option<&[f64]>, nominal_omega: f64) -> Result<ParityFit> {
    if gaps.len() < 8 {
        return Err(Error::domain(format!("parity fit needs at least 8 points, got {}", gaps.len())));
    }
    let span =
        gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let period = PI / nominal_omega;
    if span < period * (1.0 - GRID_HALF_WIDTH) {
        return Err(Error::domain(format!("gaps span {span:e} s, less than one period {period:e} s")));
    }
    fit_sinusoid(gaps, parity, sigma, 2.0 * nominal_omega).map(ParityFit::from)
}

/// `F = (P₀₀ + P₁₁)/2 + |C₁|`.
///
/// The populations come from separate measurement settings, so their sum may
/// exceed one by shot noise; only each value on its own is checked.
pub fn entanglement_fidelity(p00: f64, p11: f64, abs_c1: f64) -> Result<f64> {
    let prob = 0.0..=1.0;
    if !prob.contains(&p00) || !prob.contains(&p11) || !(abs_c1 >= 0.0) {
        return Err(Error::domain(format!("invalid Bell populations/coherence ({p00}, {p11}, {abs_c1})")));
    }
    Ok(0.5 * (p00 + p11) + abs_c1)
}

/// `|C₁| ≤ (P₀₀ + P₁₁)/2` up to `tol`, as required for a positive density matrix.
pub fn coherence_is_physical(p00: f64, p11: f64, abs_c1: f64, tol: f64) -> bool {
    abs_c1 <= 0.5 * (p00 + p11) + tol
}

pub type ProbTable = [[f64; 4]; 4];

/// Probability table of the gate, indexed `[input][output]` with joint
/// label `2·control + target`. The target flips when the control is `|0⟩`.
pub fn ideal_cnot() -> ProbTable {
    let mut m = [[0.0; 4]; 4];
    for (input, output) in [(0, 1), (1, 0), (2, 2), (3, 3)] {
        m[input][output] = 1.0;
    }
    m
}

/// `¼ Tr[|ideal|ᵀ |measured|]`.
pub fn truth_table_fidelity(measured: &ProbTable, ideal: &ProbTable) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            acc += ideal[i][j].abs() * measured[i][j].abs();
        }
    }
    acc / 4.0
}

/// A corrected probability or fidelity, and whether it had to be clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corrected {
    pub value: f64,
    pub clamped: bool,
}

fn divide(value: f64, retention: f64, what: &str) -> Result<Corrected> {
    if !(retention > 0.0 && retention <= 1.0) {
        return Err(Error::domain(format!("{what} must lie in (0, 1], got {retention}")));
    }
    let raw = value / retention;
    let v = raw.clamp(0.0, 1.0);
    Ok(Corrected { value: v, clamped: v != raw })
}

/// Divides out loss from background collisions (two-atom survival `retention`).
pub fn correct_background(value: f64, retention: f64) -> Result<Corrected> {
    divide(value, retention, "background retention")
}

/// Divides out gate trace loss (`1 − Tr ρ`).
pub fn correct_trace(value: f64, trace_retention: f64) -> Result<Corrected> {
    divide(value, trace_retention, "trace retention")
}

/// Raw and corrected fidelities with the inputs that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub raw: f64,
    pub background_corrected: f64,
    pub trace_corrected: f64,
    pub p00: f64,
    pub p11: f64,
    pub abs_c1: f64,
    pub pair_retention: f64,
    pub trace_retention: f64,
    pub clamped: bool,
}

impl FidelityReport {
    pub fn entanglement(p00: f64, p11: f64, abs_c1: f64, pair_retention: f64, trace_retention: f64) -> Result<Self> {
        let raw = entanglement_fidelity(p00, p11, abs_c1)?;
        Self::from_raw(raw, p00, p11, abs_c1, pair_retention, trace_retention)
    }

    pub fn from_raw(
        raw: f64,
        p00: f64,
        p11: f64,
        abs_c1: f64,
        pair_retention: f64,
        trace_retention: f64,
    ) -> Result<Self> {
        let bg = correct_background(raw, pair_retention)?;
        let tr = correct_trace(bg.value, trace_retention)?;
        Ok(Self {
            raw,
            background_corrected: bg.value,
            trace_corrected: tr.value,
            p00,
            p11,
            abs_c1,
            pair_retention,
            trace_retention,
            clamped: bg.clamped || tr.clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const OMEGA_AC: f64 = TAU * 0.125e6;

    fn synthetic(re_c2: f64, abs_c1: f64, xi: f64, omega: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let gaps: Vec<f64> = (0..n).map(|i| 8e-6 * i as f64 / (n - 1) as f64).collect();
        let p = gaps.iter().map(|&t| 2.0 * re_c2 - 2.0 * abs_c1 * (2.0 * omega * t + xi).cos()).collect();
        (gaps, p)
    }

    #[test]
    fn noiseless_parity_recovered() {
        let (t, p) = synthetic(0.02, 0.35, 2.12, OMEGA_AC, 25);
        let f = fit_parity(&t, &p, None, OMEGA_AC).unwrap();
        assert!((f.re_c2 - 0.02).abs() < 1e-6);
        assert!((f.abs_c1 - 0.35).abs() < 1e-6);
        assert!((f.xi - 2.12).abs() < 1e-6);
        assert!((f.omega_fit / OMEGA_AC - 1.0).abs() < 1e-6);
        assert!(f.residual_rms < 1e-9);
    }

    #[test]
    fn off_nominal_frequency_recovered() {
        // the experiment saw 2π×0.26 MHz against a nominal 2π×0.25 MHz
        let omega = OMEGA_AC * 1.04;
        let (t, p) = synthetic(-0.05, 0.2, 5.9, omega, 25);
        let f = fit_parity(&t, &p, None, OMEGA_AC).unwrap();
        assert!((f.omega_fit / omega - 1.0).abs() < 1e-6);
        assert!((f.xi - 5.9).abs() < 1e-6);
    }

    #[test]
    fn negative_amplitude_folds_into_phase() {
        let (t, p) = synthetic(0.0, -0.3, 1.0, OMEGA_AC, 25);
        let f = fit_parity(&t, &p, None, OMEGA_AC).unwrap();
        assert!((f.abs_c1 - 0.3).abs() < 1e-6);
        assert!((f.xi - (1.0 + PI)).abs() < 1e-6);
    }

    #[test]
    fn rejects_short_or_narrow_scans() {
        let (t, p) = synthetic(0.0, 0.3, 1.0, OMEGA_AC, 7);
        assert!(fit_parity(&t, &p, None, OMEGA_AC).is_err());
        let t: Vec<f64> = (0..20).map(|i| 1e-7 * i as f64).collect();
        let p = vec![0.0; 20];
        assert!(fit_parity(&t, &p, None, OMEGA_AC).is_err());
    }

    #[test]
    fn noisy_fits_are_unbiased() {
        let (t, clean) = synthetic(0.02, 0.35, 2.12, OMEGA_AC, 25);
        let sigma = vec![0.03; t.len()];
        let noise = Normal::new(0.0, 0.03).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 200;
        let truth = [0.02, 0.35, 2.12, OMEGA_AC];
        let mut sums = [0.0; 4];
        let mut good_rms = 0;
        let mut se = [0.0; 4];
        for _ in 0..trials {
            let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let f = fit_parity(&t, &y, Some(&sigma), OMEGA_AC).unwrap();
            let est = [f.re_c2, f.abs_c1, f.xi, f.omega_fit];
            for i in 0..4 {
                sums[i] += est[i];
            }
            se = f.std_errors();
            if f.residual_rms <= 1.2 * 0.03 {
                good_rms += 1;
            }
        }
        for i in 0..4 {
            let bias = sums[i] / trials as f64 - truth[i];
            // standard error of the mean over trials
            assert!(bias.abs() < 3.0 * se[i] / (trials as f64).sqrt(), "param {i}: bias {bias} se {}", se[i]);
        }
        assert!(good_rms as f64 >= 0.95 * trials as f64, "{good_rms}");
    }

    #[test]
    fn rabi_fit_gives_pi_time() {
        let omega = PI / 900e-9;
        let t: Vec<f64> = (0..40).map(|i| 3e-6 * i as f64 / 39.0).collect();
        let y: Vec<f64> = t.iter().map(|&t| 0.5 - 0.5 * (omega * t).cos()).collect();
        let f = fit_sinusoid(&t, &y, None, omega * 1.1).unwrap();
        assert!((PI / f.frequency - 900e-9).abs() < 1e-12);
        assert!((2.0 * f.amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn entanglement_fidelity_values() {
        assert_eq!(entanglement_fidelity(0.5, 0.5, 0.5).unwrap(), 1.0);
        assert_eq!(entanglement_fidelity(0.5, 0.5, 0.0).unwrap(), 0.5);
        assert!(entanglement_fidelity(1.2, 0.1, 0.1).is_err());
        assert!(entanglement_fidelity(0.5, 0.5, -0.1).is_err());
        assert!(coherence_is_physical(0.4, 0.4, 0.41, 0.02));
        assert!(!coherence_is_physical(0.4, 0.4, 0.45, 0.02));
    }

    #[test]
    fn measured_truth_table() {
        // printed matrix, transposed so rows are inputs
        let printed =
            [[0.08, 0.93, 0.0, 0.0], [0.88, 0.02, 0.02, 0.02], [0.0, 0.0, 0.90, 0.05], [0.02, 0.05, 0.07, 0.94]];
        let m: ProbTable = std::array::from_fn(|i| std::array::from_fn(|j| printed[j][i]));
        assert!((truth_table_fidelity(&m, &ideal_cnot()) - 0.9125).abs() < 1e-12);
        assert_eq!(truth_table_fidelity(&ideal_cnot(), &ideal_cnot()), 1.0);
        assert_eq!(truth_table_fidelity(&[[0.25; 4]; 4], &ideal_cnot()), 0.25);
    }

    #[test]
    fn truth_table_fidelity_permutation_invariant() {
        let m: ProbTable = [[0.1, 0.7, 0.1, 0.1], [0.6, 0.2, 0.1, 0.1], [0.0, 0.1, 0.8, 0.1], [0.05, 0.05, 0.1, 0.8]];
        let perm = [2, 0, 3, 1];
        let pm: ProbTable = std::array::from_fn(|i| std::array::from_fn(|j| m[perm[i]][perm[j]]));
        let id = ideal_cnot();
        let pid: ProbTable = std::array::from_fn(|i| std::array::from_fn(|j| id[perm[i]][perm[j]]));
        assert!((truth_table_fidelity(&m, &id) - truth_table_fidelity(&pm, &pid)).abs() < 1e-15);
    }

    #[test]
    fn loss_corrections() {
        assert!((correct_background(0.58, 0.81).unwrap().value - 0.716).abs() < 1e-3);
        assert!((correct_background(0.74, 0.81).unwrap().value - 0.914).abs() < 1e-3);
        assert!((correct_trace(0.914, 0.99).unwrap().value - 0.923).abs() < 1e-3);
        assert!((correct_trace(0.48, 0.83).unwrap().value - 0.578).abs() < 1e-3);
        assert_eq!(correct_background(0.6, 1.0).unwrap().value, 0.6);
        assert!(correct_background(0.5, 0.0).is_err());
        let c = correct_background(0.9, 0.8).unwrap();
        assert!(c.clamped && c.value == 1.0);
        let a = correct_trace(correct_background(0.6, 0.9).unwrap().value, 0.95).unwrap().value;
        let b = correct_background(correct_trace(0.6, 0.95).unwrap().value, 0.9).unwrap().value;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn report_ordering() {
        let r = FidelityReport::entanglement(0.3, 0.3, 0.2, 0.81, 0.99).unwrap();
        assert!(r.raw <= r.background_corrected && r.background_corrected <= r.trace_corrected);
        assert!((r.raw - 0.5).abs() < 1e-15);
    }
}
