//! Two atoms, three levels each: state vectors, Hamiltonians, exact
//! propagation and the state-selective blow-away readout.
//!
//! Joint basis index is `3 * control + target` with levels ordered
//! `G0 < G1 < R`.

use std::ops::{Add, AddAssign};

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};

pub type Matrix9 = SMatrix<C64, 9, 9>;
pub type Vector9 = SVector<C64, 9>;
type Matrix3 = SMatrix<C64, 3, 3>;

/// Index of the control atom in per-atom arrays.
pub const CONTROL: usize = 0;
/// Index of the target atom in per-atom arrays.
pub const TARGET: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomLevel {
    /// Qubit |0⟩ = |f=1, m_f=0⟩.
    G0,
    /// Qubit |1⟩ = |f=2, m_f=0⟩.
    G1,
    /// Rydberg level.
    R,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 3] = [AtomLevel::G0, AtomLevel::G1, AtomLevel::R];
    pub const QUBIT: [AtomLevel; 2] = [AtomLevel::G0, AtomLevel::G1];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_qubit(self) -> bool {
        self != AtomLevel::R
    }
}

/// Joint basis index of `|control, target⟩`.
pub fn joint_index(control: AtomLevel, target: AtomLevel) -> usize {
    3 * control.index() + target.index()
}

fn levels_of(index: usize) -> [usize; 2] {
    [index / 3, index % 3]
}

/// Pure state of the atom pair plus per-atom "absent from trap" flags.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoAtomState {
    amps: Vector9,
    lost: [bool; 2],
}

impl TwoAtomState {
    pub fn from_amplitudes(amps: Vector9) -> Self {
        Self { amps, lost: [false; 2] }
    }

    pub fn amplitudes(&self) -> &Vector9 {
        &self.amps
    }

    pub fn amplitude(&self, control: AtomLevel, target: AtomLevel) -> C64 {
        self.amps[joint_index(control, target)]
    }

    pub fn lost(&self) -> [bool; 2] {
        self.lost
    }

    pub fn is_lost(&self, atom: usize) -> bool {
        self.lost[atom]
    }

    /// Marks an atom as absent. Its amplitudes are left as they are and no
    /// later pulse acts on it.
    pub fn set_lost(&mut self, atom: usize) {
        self.lost[atom] = true;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn normalize(&mut self) {
        let n = self.amps.norm();
        if n > 0.0 {
            self.amps /= C64::new(n, 0.0);
        }
    }

    pub fn population(&self, control: AtomLevel, target: AtomLevel) -> f64 {
        self.amplitude(control, target).norm_sqr()
    }

    /// Marginal population of one atom's level.
    pub fn atom_population(&self, atom: usize, level: AtomLevel) -> f64 {
        (0..9).filter(|&k| levels_of(k)[atom] == level.index()).map(|k| self.amps[k].norm_sqr()).sum()
    }

    /// Density-matrix element `⟨a|ρ|b⟩ = ψ_a ψ_b*` between two joint basis states.
    pub fn coherence(&self, a: (AtomLevel, AtomLevel), b: (AtomLevel, AtomLevel)) -> C64 {
        self.amplitude(a.0, a.1) * self.amplitude(b.0, b.1).conj()
    }

    /// Projects `atom` onto `level` and renormalises. Returns the Born
    /// probability of that projection; the state is left untouched when it
    /// is zero.
    pub fn project_atom(&mut self, atom: usize, level: AtomLevel) -> f64 {
        let p = self.atom_population(atom, level) / self.norm_sqr().max(f64::MIN_POSITIVE);
        if p <= 0.0 {
            return 0.0;
        }
        for k in 0..9 {
            if levels_of(k)[atom] != level.index() {
                self.amps[k] = C64::new(0.0, 0.0);
            }
        }
        self.normalize();
        p
    }

    /// Moves the (already projected) population of `atom` from `from` to `to`.
    pub(crate) fn relabel_atom(&mut self, atom: usize, from: AtomLevel, to: AtomLevel) {
        if from == to {
            return;
        }
        let mut out = Vector9::zeros();
        for k in 0..9 {
            let mut lv = levels_of(k);
            if lv[atom] == from.index() {
                lv[atom] = to.index();
                out[3 * lv[0] + lv[1]] += self.amps[k];
            } else if lv[atom] != to.index() {
                out[k] += self.amps[k];
            }
        }
        self.amps = out;
    }

    /// Multiplies every amplitude where `atom` is in one of `levels` by `factor`.
    pub(crate) fn scale_atom_levels(&mut self, atom: usize, levels: &[AtomLevel], factor: f64) {
        for k in 0..9 {
            if levels.iter().any(|l| l.index() == levels_of(k)[atom]) {
                self.amps[k] *= factor;
            }
        }
    }
}

/// Product basis state `|control, target⟩` with no loss flags.
pub fn computational_state(control: AtomLevel, target: AtomLevel) -> TwoAtomState {
    let mut amps = Vector9::zeros();
    amps[joint_index(control, target)] = C64::new(1.0, 0.0);
    TwoAtomState::from_amplitudes(amps)
}

/// 9×9 Hamiltonian in rad/s over the joint basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian(Matrix9);

impl Hamiltonian {
    pub fn zero() -> Self {
        Self(Matrix9::zeros())
    }

    pub fn from_matrix(m: Matrix9) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix9 {
        &self.0
    }

    /// Adds `value · |level⟩⟨level|` acting on one atom.
    pub fn add_level_shift(&mut self, atom: usize, level: AtomLevel, value: f64) {
        for k in 0..9 {
            if levels_of(k)[atom] == level.index() {
                self.0[(k, k)] += value;
            }
        }
    }

    /// Adds `coupling · |upper⟩⟨lower| + h.c.` acting on one atom.
    pub fn add_coupling(&mut self, atom: usize, lower: AtomLevel, upper: AtomLevel, coupling: C64) {
        for k in 0..9 {
            let lv = levels_of(k);
            if lv[atom] != lower.index() {
                continue;
            }
            let mut up = lv;
            up[atom] = upper.index();
            let j = 3 * up[0] + up[1];
            self.0[(j, k)] += coupling;
            self.0[(k, j)] += coupling.conj();
        }
    }

    /// Adds the interaction shift on `|rr⟩`.
    pub fn add_blockade(&mut self, blockade: f64) {
        let k = joint_index(AtomLevel::R, AtomLevel::R);
        self.0[(k, k)] += blockade;
    }

    /// Largest entry of `|H − H†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..9 {
            for j in i..9 {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn check_hermitian(&self) -> Result<()> {
        let scale = self.0.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let defect = self.hermiticity_defect();
        if defect > 1e-12 * scale {
            return Err(Error::NonHermitian { defect });
        }
        Ok(())
    }

    /// `exp(−i H t)`.
    pub fn propagator(&self, t: f64) -> Result<Matrix9> {
        self.check_hermitian()?;
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(hermitian_exp(self.0, t))
    }
}

impl Add for Hamiltonian {
    type Output = Hamiltonian;

    fn add(self, rhs: Self) -> Self {
        Hamiltonian(self.0 + rhs.0)
    }
}

impl AddAssign for Hamiltonian {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

/// `exp(−iHt)` for Hermitian `h`, exponentiating each block of states that
/// `h` couples separately. Uncoupled levels only pick up phases and
/// two-level blocks use the closed-form Rabi solution.
fn hermitian_exp<const N: usize>(h: SMatrix<C64, N, N>, t: f64) -> SMatrix<C64, N, N> {
    let mut u = SMatrix::<C64, N, N>::zeros();
    for block in coupled_blocks(&h) {
        match block.as_slice() {
            &[i] => u[(i, i)] = C64::new(0.0, -h[(i, i)].re * t).exp(),
            &[i, j] => {
                let (a, d, b) = (h[(i, i)].re, h[(j, j)].re, h[(i, j)]);
                let mean = (a + d) / 2.0;
                let half = (a - d) / 2.0;
                let rate = (half * half + b.norm_sqr()).sqrt();
                let global = C64::new(0.0, -mean * t).exp();
                let (sin, cos) = (rate * t).sin_cos();
                // sin(rate t)/rate, finite as rate → 0
                let sinc = if rate > 0.0 { sin / rate } else { t };
                let mi = C64::new(0.0, -sinc);
                u[(i, i)] = global * (cos + mi * half);
                u[(j, j)] = global * (cos - mi * half);
                u[(i, j)] = global * mi * b;
                u[(j, i)] = global * mi * b.conj();
            }
            idx => {
                let n = idx.len();
                let sub = DMatrix::from_fn(n, n, |r, c| h[(idx[r], idx[c])]);
                let eig = sub.symmetric_eigen();
                let v = &eig.eigenvectors;
                let mut scaled = v.clone();
                for (k, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= C64::new(0.0, -eig.eigenvalues[k] * t).exp();
                }
                let block_u = scaled * v.adjoint();
                for r in 0..n {
                    for c in 0..n {
                        u[(idx[r], idx[c])] = block_u[(r, c)];
                    }
                }
            }
        }
    }
    u
}

/// Connected components of the coupling graph of `h`, each sorted.
fn coupled_blocks<const N: usize>(h: &SMatrix<C64, N, N>) -> Vec<Vec<usize>> {
    let mut label: [usize; N] = std::array::from_fn(|i| i);
    // N ≤ 9: relabelling until stable is cheap
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..N {
            for j in 0..N {
                if i != j && h[(i, j)] != C64::new(0.0, 0.0) && label[i] != label[j] {
                    let (lo, hi) = (label[i].min(label[j]), label[i].max(label[j]));
                    for l in label.iter_mut() {
                        if *l == hi {
                            *l = lo;
                        }
                    }
                    changed = true;
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..N {
        match blocks.iter_mut().find(|b| label[b[0]] == label[i]) {
            Some(b) => b.push(i),
            None => blocks.push(vec![i]),
        }
    }
    blocks
}

/// Evolves `state` under the constant Hamiltonian `h` for `t` seconds.
///
/// A lost atom is frozen: the partner evolves under the block of `h` in which
/// the lost atom sits in `G0`, so a missing atom never blockades.
pub fn evolve(state: &TwoAtomState, h: &Hamiltonian, t: f64) -> Result<TwoAtomState> {
    h.check_hermitian()?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let mut out = state.clone();
    match state.lost {
        [false, false] => {
            out.amps = h.propagator(t)? * state.amps;
        }
        [true, true] => {}
        [lost_c, _] => {
            let lost = if lost_c { CONTROL } else { TARGET };
            let idx = |lost_level: usize, partner: usize| {
                if lost == CONTROL {
                    3 * lost_level + partner
                } else {
                    3 * partner + lost_level
                }
            };
            let sub = Matrix3::from_fn(|i, j| h.0[(idx(0, i), idx(0, j))]);
            let u = hermitian_exp(sub, t);
            for lv in 0..3 {
                let v = SVector::<C64, 3>::from_fn(|i, _| state.amps[idx(lv, i)]);
                let w = u * v;
                for i in 0..3 {
                    out.amps[idx(lv, i)] = w[i];
                }
            }
        }
    }
    Ok(out)
}

/// Rydberg excitation Hamiltonian.
///
/// Couples `|1⟩ ↔ |r⟩` on each atom with `rabi[i] / 2`, puts `detunings[i]`
/// on that atom's `|r⟩` projector and `blockade` on `|rr⟩`.
pub fn rydberg_hamiltonian(rabi: [f64; 2], detunings: [f64; 2], blockade: f64) -> Hamiltonian {
    let mut h = Hamiltonian::zero();
    for atom in [CONTROL, TARGET] {
        if rabi[atom] != 0.0 {
            h.add_coupling(atom, AtomLevel::G1, AtomLevel::R, C64::new(rabi[atom] / 2.0, 0.0));
        }
        if detunings[atom] != 0.0 {
            h.add_level_shift(atom, AtomLevel::R, detunings[atom]);
        }
    }
    if blockade != 0.0 {
        h.add_blockade(blockade);
    }
    h
}

/// Raman Hamiltonian coupling `|0⟩ ↔ |1⟩` on each atom.
///
/// The matrix element is `⟨0|H|1⟩ = (Ω/2) e^{−iφ}`, so a `π/2` pulse with
/// `φ = 0` maps `|1⟩ → (|1⟩ − i|0⟩)/√2`.
pub fn ground_hamiltonian(rabi: [f64; 2], phases: [f64; 2]) -> Hamiltonian {
    let mut h = Hamiltonian::zero();
    for atom in [CONTROL, TARGET] {
        if rabi[atom] != 0.0 {
            let c = C64::from_polar(rabi[atom] / 2.0, phases[atom]);
            h.add_coupling(atom, AtomLevel::G0, AtomLevel::G1, c);
        }
    }
    h
}

/// Which hyperfine state the blow-away light removes from an atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlowAway {
    /// Remove `|1⟩`: a present atom was in `|0⟩`.
    One,
    /// Remove `|0⟩`: a present atom was in `|1⟩`.
    Zero,
}

impl BlowAway {
    /// The level that survives this blow-away.
    pub fn kept(self) -> AtomLevel {
        match self {
            BlowAway::One => AtomLevel::G0,
            BlowAway::Zero => AtomLevel::G1,
        }
    }

    /// Blow-away setting under which an atom in `level` reads present.
    pub fn keeping(level: AtomLevel) -> Self {
        match level {
            AtomLevel::G1 => BlowAway::Zero,
            _ => BlowAway::One,
        }
    }
}

/// Per-atom blow-away assignment for one measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ReadoutMode(pub [BlowAway; 2]);

impl ReadoutMode {
    pub const BLOW_ONES: ReadoutMode = ReadoutMode([BlowAway::One, BlowAway::One]);
    pub const BLOW_ZEROS: ReadoutMode = ReadoutMode([BlowAway::Zero, BlowAway::Zero]);

    /// Setting under which "both present" means the pair was in `|c, t⟩`.
    pub fn selecting(control: AtomLevel, target: AtomLevel) -> Self {
        ReadoutMode([BlowAway::keeping(control), BlowAway::keeping(target)])
    }

    /// Joint level that reads (present, present).
    pub fn selected(&self) -> (AtomLevel, AtomLevel) {
        (self.0[CONTROL].kept(), self.0[TARGET].kept())
    }
}

/// Presence of each atom after blow-away and imaging.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Readout {
    pub present: [bool; 2],
}

impl Readout {
    /// Joint outcome index `2·control_present + target_present`.
    pub fn index(&self) -> usize {
        2 * usize::from(self.present[CONTROL]) + usize::from(self.present[TARGET])
    }

    pub fn from_index(i: usize) -> Self {
        Readout { present: [i & 2 != 0, i & 1 != 0] }
    }
}

/// Born probabilities of the four readout patterns, indexed by
/// [`Readout::index`]. Rydberg population and lost atoms read absent.
pub fn outcome_probabilities(state: &TwoAtomState, mode: ReadoutMode) -> [f64; 4] {
    let total = state.norm_sqr();
    let mut probs = [0.0; 4];
    if total <= 0.0 {
        probs[0] = 1.0;
        return probs;
    }
    for k in 0..9 {
        let lv = levels_of(k);
        let present: [bool; 2] = std::array::from_fn(|a| !state.lost[a] && lv[a] == mode.0[a].kept().index());
        probs[Readout { present }.index()] += state.amps[k].norm_sqr() / total;
    }
    probs
}

/// Samples one blow-away readout.
pub fn measure<R: Rng + ?Sized>(state: &TwoAtomState, mode: ReadoutMode, rng: &mut R) -> Readout {
    let probs = outcome_probabilities(state, mode);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Readout::from_index(i);
        }
    }
    // rounding left u above the cumulative sum: take the last non-empty outcome
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    Readout::from_index(last)
}
