//! Three-qubit states, projective qubit measurements, Born-rule behaviors
//! and seesaw optimization.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, CorrelatorForm};
use crate::error::{Error, Result};
use crate::inequalities::{expr_i, BellExpression, Catalog};
use crate::membership::{threshold, LocalityClass, SeparatingFunctional};
use crate::scalar::Scalar;
use crate::scenario::{all_terms, entry_parts, Party, TERMS};

pub type DensityMatrix = SMatrix<Complex64, 8, 8>;
pub type StateVector = SVector<Complex64, 8>;
type Qubit = SMatrix<Complex64, 2, 2>;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

fn paulis() -> [Qubit; 4] {
    let i = Complex64::new(0.0, 1.0);
    [
        Qubit::new(C1, C0, C0, C1),
        Qubit::new(C0, C1, C1, C0),
        Qubit::new(C0, -i, i, C0),
        Qubit::new(C1, C0, C0, -C1),
    ]
}

/// A three-qubit density matrix in the basis `|abc>`, index `4a + 2b + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rho: DensityMatrix,
}

impl QuantumState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_density(rho: DensityMatrix) -> Result<Self> {
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvariantViolation(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!("trace {tr} != 1")));
        }
        let min = rho.symmetric_eigenvalues().min();
        if min < -1e-10 {
            return Err(Error::InvariantViolation(format!("negative eigenvalue {min:e}")));
        }
        Ok(QuantumState { rho })
    }

    /// `|ψ><ψ|`; the vector must have unit norm.
    pub fn pure(psi: &StateVector) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!("state vector norm {n} != 1")));
        }
        Self::from_density(psi * psi.adjoint())
    }

    pub fn from_amplitudes(amplitudes: [f64; 8]) -> Result<Self> {
        Self::pure(&StateVector::from_iterator(amplitudes.iter().map(|&a| Complex64::new(a, 0.0))))
    }

    /// `(|000> + |111>)/√2`.
    pub fn ghz() -> Self {
        let mut a = [0.0; 8];
        a[0] = FRAC_1_SQRT_2;
        a[7] = FRAC_1_SQRT_2;
        Self::from_amplitudes(a).expect("normalized")
    }

    /// `(|001> + |010> + |100>)/√3`.
    pub fn w() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let mut a = [0.0; 8];
        a[1] = s;
        a[2] = s;
        a[4] = s;
        Self::from_amplitudes(a).expect("normalized")
    }

    /// `I/8`.
    pub fn maximally_mixed() -> Self {
        QuantumState { rho: DensityMatrix::identity() / Complex64::new(8.0, 0.0) }
    }

    /// `p ρ + (1 − p) I/8`.
    pub fn with_white_noise(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::WeightOutOfRange(p));
        }
        let rho = self.rho * Complex64::new(p, 0.0) + Self::maximally_mixed().rho * Complex64::new(1.0 - p, 0.0);
        Ok(QuantumState { rho })
    }

    pub fn from_params(params: &PureStateParams) -> Self {
        Self::pure(&params.vector()).expect("parameters are normalized")
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    /// Relabels qubits: qubit `p` becomes qubit `perm[p]`.
    pub fn permute_parties(&self, perm: [usize; 3]) -> Self {
        let map = |i: usize| {
            let bits = [(i >> 2) & 1, (i >> 1) & 1, i & 1];
            let mut out = [0; 3];
            for p in 0..3 {
                out[perm[p]] = bits[p];
            }
            out[0] << 2 | out[1] << 1 | out[2]
        };
        let mut rho = DensityMatrix::zeros();
        for r in 0..8 {
            for c in 0..8 {
                rho[(map(r), map(c))] = self.rho[(r, c)];
            }
        }
        QuantumState { rho }
    }

    /// `T_ijk = Tr[ρ σ_i ⊗ σ_j ⊗ σ_k]` with `σ_0` the identity.
    pub fn pauli_tensor(&self) -> PauliTensor {
        let s = paulis();
        let mut t = [0.0; 64];
        for (idx, slot) in t.iter_mut().enumerate() {
            let (i, j, k) = (idx >> 4, (idx >> 2) & 3, idx & 3);
            let mut acc = C0;
            for r in 0..8 {
                for c in 0..8 {
                    let rv = self.rho[(r, c)];
                    if rv == C0 {
                        continue;
                    }
                    let op = s[i][((c >> 2) & 1, (r >> 2) & 1)]
                        * s[j][((c >> 1) & 1, (r >> 1) & 1)]
                        * s[k][(c & 1, r & 1)];
                    acc += rv * op;
                }
            }
            *slot = acc.re;
        }
        PauliTensor(t)
    }
}

/// Real expectation values of all Pauli products of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTensor([f64; 64]);

impl PauliTensor {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[i << 4 | j << 2 | k]
    }

    /// `Σ_ijk T_ijk u_i v_j w_k`.
    pub fn contract(&self, u: &[f64; 4], v: &[f64; 4], w: &[f64; 4]) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..4 {
                if v[j] == 0.0 {
                    continue;
                }
                let uv = u[i] * v[j];
                for k in 0..4 {
                    s += self.0[i << 4 | j << 2 | k] * uv * w[k];
                }
            }
        }
        s
    }
}

/// Canonical-form parameters of a three-qubit pure state:
/// `λ0|000> + λ1 e^{iφ}|100> + λ2|101> + λ3|110> + λ4|111>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureStateParams {
    pub lambda: [f64; 5],
    pub phi: f64,
}

impl PureStateParams {
    pub fn new(lambda: [f64; 5], phi: f64) -> Result<Self> {
        if lambda.iter().any(|&l| l < 0.0) {
            return Err(Error::InvariantViolation("negative lambda".into()));
        }
        let n: f64 = lambda.iter().map(|l| l * l).sum();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!("sum of squared lambdas is {n}")));
        }
        if !(0.0..=PI).contains(&phi) {
            return Err(Error::InvariantViolation(format!("phase {phi} outside [0, pi]")));
        }
        Ok(PureStateParams { lambda, phi })
    }

    /// The conditions under which the canonical form is genuinely
    /// tripartite entangled: `λ0 ≠ 0`, `λ2 + λ4 ≠ 0`, `λ3 + λ4 ≠ 0`.
    pub fn is_genuinely_tripartite(&self) -> bool {
        let l = &self.lambda;
        l[0] > 0.0 && l[2] + l[4] > 0.0 && l[3] + l[4] > 0.0
    }

    pub fn vector(&self) -> StateVector {
        let l = &self.lambda;
        let mut v = StateVector::zeros();
        v[0] = Complex64::new(l[0], 0.0);
        v[4] = Complex64::from_polar(l[1], self.phi);
        v[5] = Complex64::new(l[2], 0.0);
        v[6] = Complex64::new(l[3], 0.0);
        v[7] = Complex64::new(l[4], 0.0);
        v
    }
}

impl fmt::Display for PureStateParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = &self.lambda;
        write!(f, "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6}", l[0], l[1], l[2], l[3], l[4], self.phi)
    }
}

/// A ±1 qubit observable `n·σ`; outcome 0 is the +1 eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observable {
    n: [f64; 3],
}

impl Observable {
    pub const Z: Observable = Observable { n: [0.0, 0.0, 1.0] };
    pub const X: Observable = Observable { n: [1.0, 0.0, 0.0] };

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Observable { n: [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()] }
    }

    /// Normalizes `v`; fails on the zero vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm <= 1e-300 || !norm.is_finite() {
            return Err(Error::InvariantViolation("observable direction is zero".into()));
        }
        Ok(Observable { n: v.map(|x| x / norm) })
    }

    /// Uniformly random direction on the sphere.
    pub fn random(rng: &mut impl Rng) -> Self {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let az: f64 = rng.gen_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        Observable { n: [r * az.cos(), r * az.sin(), z] }
    }

    pub fn vector(&self) -> [f64; 3] {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.n[2].clamp(-1.0, 1.0).acos()
    }

    pub fn phi(&self) -> f64 {
        self.n[1].atan2(self.n[0])
    }

    pub fn matrix(&self) -> Qubit {
        let s = paulis();
        s[1] * Complex64::new(self.n[0], 0.0) + s[2] * Complex64::new(self.n[1], 0.0) + s[3] * Complex64::new(self.n[2], 0.0)
    }

    /// `(I ± n·σ)/2` for outcome 0 (+) or 1 (−).
    pub fn projector(&self, outcome: u8) -> Qubit {
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        (Qubit::identity() + self.matrix() * Complex64::new(sign, 0.0)) * Complex64::new(0.5, 0.0)
    }

    fn padded(&self) -> [f64; 4] {
        [0.0, self.n[0], self.n[1], self.n[2]]
    }
}

/// Two observables per party: `settings[party][input]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub settings: [[Observable; 2]; 3],
}

/// One line of an angle file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleRecord {
    pub party: String,
    pub setting: u8,
    pub theta: f64,
    pub phi: f64,
}

impl Measurements {
    pub fn new(settings: [[Observable; 2]; 3]) -> Self {
        Measurements { settings }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let mut next = || [Observable::random(rng), Observable::random(rng)];
        Measurements { settings: [next(), next(), next()] }
    }

    /// Angle file: one JSON record per line.
    pub fn to_angle_file(&self) -> String {
        let mut out = String::new();
        for p in Party::ALL {
            for x in 0..2u8 {
                let o = &self.settings[p.index()][x as usize];
                let rec = AngleRecord { party: p.letter().to_string(), setting: x, theta: o.theta(), phi: o.phi() };
                out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_angle_file(text: &str) -> Result<Self> {
        let mut slots: [[Option<Observable>; 2]; 3] = [[None; 2]; 3];
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let rec: AngleRecord = serde_json::from_str(line)?;
            let p = match rec.party.as_str() {
                "A" => 0,
                "B" => 1,
                "C" => 2,
                other => return Err(Error::Parse(format!("unknown party {other:?}"))),
            };
            if rec.setting > 1 {
                return Err(Error::Parse(format!("setting {} is not 0 or 1", rec.setting)));
            }
            slots[p][rec.setting as usize] = Some(Observable::from_angles(rec.theta, rec.phi));
        }
        let mut settings = [[Observable::Z; 2]; 3];
        for p in 0..3 {
            for x in 0..2 {
                settings[p][x] = slots[p][x]
                    .ok_or_else(|| Error::Parse(format!("angle file misses party {p} setting {x}")))?;
            }
        }
        Ok(Measurements { settings })
    }

    /// Correlators `<t>` of all 27 terms on a state.
    pub fn correlators(&self, t: &PauliTensor) -> [f64; TERMS] {
        let mut out = [0.0; TERMS];
        for (slot, term) in out.iter_mut().zip(all_terms()) {
            let v = self.term_vectors(term.inputs);
            *slot = t.contract(&v[0], &v[1], &v[2]);
        }
        out
    }

    fn term_vectors(&self, inputs: [Option<u8>; 3]) -> [[f64; 4]; 3] {
        [0, 1, 2].map(|p| match inputs[p] {
            None => [1.0, 0.0, 0.0, 0.0],
            Some(x) => self.settings[p][x as usize].padded(),
        })
    }
}

/// A state with two measurements per party.
#[derive(Debug, Clone)]
pub struct QuantumScenario {
    pub state: QuantumState,
    pub measurements: Measurements,
}

/// Born-rule behavior, built from the correlators so that it is exactly
/// no-signalling.
pub fn born_behavior(s: &QuantumScenario) -> Result<Behavior<f64>> {
    let corr = s.measurements.correlators(&s.state.pauli_tensor());
    let p = Behavior::from_fn(|x, o| {
        let mut acc = 0.0;
        for (t, v) in all_terms().iter().zip(corr.iter()) {
            if t.matches(x) {
                acc += t.sign(o) as f64 * v;
            }
        }
        (acc / 8.0).max(0.0)
    });
    if !p.normalize_check() {
        return Err(Error::InvariantViolation("Born behavior is not normalized".into()));
    }
    Ok(p)
}

/// Born probability of one entry computed directly from the projectors.
pub fn born_probability(s: &QuantumScenario, entry: usize) -> f64 {
    let (x, o) = entry_parts(entry);
    let m = &s.measurements.settings;
    let pa = m[0][x[0] as usize].projector(o[0]);
    let pb = m[1][x[1] as usize].projector(o[1]);
    let pc = m[2][x[2] as usize].projector(o[2]);
    let op: DensityMatrix = DensityMatrix::from_fn(|r, c| {
        pa[((r >> 2) & 1, (c >> 2) & 1)] * pb[((r >> 1) & 1, (c >> 1) & 1)] * pc[(r & 1, c & 1)]
    });
    (s.state.rho * op).trace().re
}

/// Correlator coefficients of an expression as doubles.
pub fn coefficients_f64(expr: &BellExpression) -> [f64; TERMS] {
    let mut c = [0.0; TERMS];
    for (slot, v) in c.iter_mut().zip(expr.correlator_coefficients()) {
        *slot = v.to_f64();
    }
    c
}

/// Correlator coefficients of a 64-entry functional, valid on
/// no-signalling behaviors. The unit entry collects the functional's value
/// on the uniform behavior.
pub fn functional_correlators(coefficients: &[f64]) -> [f64; TERMS] {
    let mut c = [0.0; TERMS];
    for (slot, t) in c.iter_mut().zip(all_terms()) {
        let mut s = 0.0;
        for (e, f) in coefficients.iter().enumerate() {
            let (x, o) = entry_parts(e);
            if t.matches(x) {
                s += t.sign(o) as f64 * f;
            }
        }
        *slot = s / 8.0;
    }
    c
}

/// `Σ_t c_t <t>`.
pub fn expression_value(coeffs: &[f64; TERMS], t: &PauliTensor, m: &Measurements) -> f64 {
    coeffs.iter().zip(m.correlators(t)).map(|(c, v)| c * v).sum()
}

/// One seesaw run: the final value, the measurements and the value after
/// every single-observable update.
#[derive(Debug, Clone)]
pub struct SeesawRun {
    pub value: f64,
    pub measurements: Measurements,
    pub trace: Vec<f64>,
}

const MAX_SWEEPS: usize = 5000;

/// Party-wise closed-form ascent on a fixed state. The objective is
/// linear in each Bloch vector, so each update sets one observable to
/// its normalized gradient.
pub fn seesaw_run(coeffs: &[f64; TERMS], t: &PauliTensor, init: Measurements) -> SeesawRun {
    let terms = all_terms();
    let mut m = init;
    let mut value = expression_value(coeffs, t, &m);
    let mut trace = vec![value];
    for _ in 0..MAX_SWEEPS {
        let before = value;
        for p in 0..3 {
            for x in 0..2u8 {
                let mut g = [0.0; 4];
                for (term, c) in terms.iter().zip(coeffs) {
                    if *c == 0.0 || term.inputs[p] != Some(x) {
                        continue;
                    }
                    let v = m.term_vectors(term.inputs);
                    for (i, gi) in g.iter_mut().enumerate().skip(1) {
                        let mut e = [0.0; 4];
                        e[i] = 1.0;
                        let mut args = v;
                        args[p] = e;
                        *gi += c * t.contract(&args[0], &args[1], &args[2]);
                    }
                }
                if let Ok(o) = Observable::from_vector([g[1], g[2], g[3]]) {
                    if (g[1] * g[1] + g[2] * g[2] + g[3] * g[3]).sqrt() > 1e-14 {
                        m.settings[p][x as usize] = o;
                    }
                }
                value = expression_value(coeffs, t, &m);
                trace.push(value);
            }
        }
        if value - before <= 1e-10 * before.abs().max(1.0) {
            break;
        }
    }
    SeesawRun { value, measurements: m, trace }
}

/// Best seesaw value over restarts.
#[derive(Debug, Clone)]
pub struct SeesawResult {
    pub value: f64,
    pub measurements: Measurements,
}

fn restart_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn best_of(runs: Vec<(f64, Measurements)>) -> (f64, Measurements) {
    let mut best = runs[0];
    for r in runs.into_iter().skip(1) {
        if r.0 > best.0 {
            best = r;
        }
    }
    best
}

/// Maximizes an expression over measurements on a fixed state from
/// `restarts` random starts (each with its own stream of `seed`).
pub fn seesaw_maximize(expr: &BellExpression, state: &QuantumState, restarts: usize, seed: u64) -> SeesawResult {
    seesaw_coefficients(&coefficients_f64(expr), state, restarts, seed)
}

pub fn seesaw_coefficients(coeffs: &[f64; TERMS], state: &QuantumState, restarts: usize, seed: u64) -> SeesawResult {
    let t = state.pauli_tensor();
    let runs: Vec<(f64, Measurements)> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(seed, r);
            let run = seesaw_run(coeffs, &t, Measurements::random(&mut rng));
            (run.value, run.measurements)
        })
        .collect();
    let (value, measurements) = best_of(runs);
    SeesawResult { value, measurements }
}

/// `Σ_t c_t O_A ⊗ O_B ⊗ O_C` for the given measurements.
pub fn bell_operator(coeffs: &[f64; TERMS], m: &Measurements) -> DensityMatrix {
    let mut op = DensityMatrix::zeros();
    for (term, c) in all_terms().iter().zip(coeffs) {
        if *c == 0.0 {
            continue;
        }
        let mats = [0, 1, 2].map(|p| match term.inputs[p] {
            None => Qubit::identity(),
            Some(x) => m.settings[p][x as usize].matrix(),
        });
        let kron = DensityMatrix::from_fn(|r, col| {
            mats[0][((r >> 2) & 1, (col >> 2) & 1)] * mats[1][((r >> 1) & 1, (col >> 1) & 1)] * mats[2][(r & 1, col & 1)]
        });
        op += kron * Complex64::new(*c, 0.0);
    }
    op
}

/// Joint optimum over pure states and measurements.
#[derive(Debug, Clone)]
pub struct JointResult {
    pub value: f64,
    pub state: QuantumState,
    pub measurements: Measurements,
}

/// Alternates the measurement seesaw with the best state for the current
/// measurements (top eigenvector of the Bell operator).
pub fn seesaw_state_and_measurements(expr: &BellExpression, restarts: usize, seed: u64) -> JointResult {
    let coeffs = coefficients_f64(expr);
    let runs: Vec<(f64, StateVector, Measurements)> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(seed, r);
            let mut m = Measurements::random(&mut rng);
            let mut value = f64::NEG_INFINITY;
            let mut psi = StateVector::zeros();
            for _ in 0..500 {
                let eig = bell_operator(&coeffs, &m).symmetric_eigen();
                let top = eig.eigenvalues.imax();
                psi = eig.eigenvectors.column(top).into_owned();
                psi /= Complex64::new(psi.norm(), 0.0);
                let state = QuantumState { rho: psi * psi.adjoint() };
                let run = seesaw_run(&coeffs, &state.pauli_tensor(), m);
                m = run.measurements;
                if run.value - value <= 1e-10 * run.value.abs().max(1.0) {
                    value = value.max(run.value);
                    break;
                }
                value = run.value;
            }
            (value, psi, m)
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.0 > runs[best].0 {
            best = i;
        }
    }
    let (value, psi, measurements) = runs[best];
    JointResult { value, state: QuantumState { rho: psi * psi.adjoint() }, measurements }
}

/// Outcome of the visibility search.
#[derive(Debug, Clone)]
pub struct ThresholdSearch {
    /// Smallest visibility found at which the noisy state leaves the class.
    pub p: f64,
    pub measurements: Measurements,
    /// Functional certifying the boundary at the final measurements.
    pub functional: Option<SeparatingFunctional<f64>>,
}

/// Starting expressions for the threshold search of a class.
fn threshold_starts(class: LocalityClass) -> Vec<BellExpression> {
    let cat = Catalog::embedded();
    let fam = |n: u32| cat.get(n).expect("catalog family").expression.clone();
    match class {
        LocalityClass::S2 => vec![fam(185), fam(99)],
        _ => vec![expr_i(), fam(138), fam(12), fam(185)],
    }
}

/// Smallest `p` such that `p ρ + (1 − p) I/8` gives, for some
/// measurements, a behavior outside `class`.
///
/// Each restart seeds measurements by a seesaw on a known inequality, then
/// alternates the threshold LP (which yields a supporting functional at
/// the current measurements) with a seesaw on that functional, until `p`
/// stops decreasing by more than 1e-6.
pub fn optimize_threshold(state: &QuantumState, class: LocalityClass, restarts: usize, seed: u64) -> Result<ThresholdSearch> {
    let starts = threshold_starts(class);
    let t = state.pauli_tensor();
    let runs: Vec<Result<Option<ThresholdSearch>>> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(seed, r);
            let start = coefficients_f64(&starts[r as usize % starts.len()]);
            let m0 = seesaw_run(&start, &t, Measurements::random(&mut rng)).measurements;
            threshold_descent(state, &t, class, m0)
        })
        .collect();
    let mut best: Option<ThresholdSearch> = None;
    for run in runs.into_iter().filter_map(|r| r.transpose()) {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.p < b.p) {
            best = Some(run);
        }
    }
    best.ok_or_else(|| Error::NumericalBreakdown("every restart of the threshold search failed".into()))
}

fn threshold_descent(
    state: &QuantumState,
    t: &PauliTensor,
    class: LocalityClass,
    mut m: Measurements,
) -> Result<Option<ThresholdSearch>> {
    let mut best: Option<ThresholdSearch> = None;
    for _ in 0..200 {
        let b = born_behavior(&QuantumScenario { state: state.clone(), measurements: m })?;
        let th = match threshold(&b, class) {
            Ok(th) => th,
            Err(Error::NumericalBreakdown(_)) => break,
            Err(e) => return Err(e),
        };
        let improved = best.as_ref().is_none_or(|s| th.p < s.p - 1e-6);
        let functional = th.functional.clone();
        if best.as_ref().is_none_or(|s| th.p < s.p) {
            best = Some(ThresholdSearch { p: th.p, measurements: m, functional: th.functional });
        }
        if !improved {
            break;
        }
        let Some(f) = functional else { break };
        let mut coeffs = functional_correlators(&f.coefficients);
        coeffs[0] = 0.0;
        m = seesaw_run(&coeffs, t, m).measurements;
    }
    Ok(best)
}

/// Best violation found for one grid state.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub params: PureStateParams,
    /// `None` when the state fails the genuine-entanglement guards.
    pub value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub resolution: usize,
    pub seed: u64,
    pub points: Vec<ScanPoint>,
}

impl ScanReport {
    pub fn tested(&self) -> impl Iterator<Item = &ScanPoint> {
        self.points.iter().filter(|p| p.value.is_some())
    }

    pub fn skipped(&self) -> usize {
        self.points.iter().filter(|p| p.value.is_none()).count()
    }

    /// Smallest best value over tested states.
    pub fn min_value(&self) -> Option<f64> {
        self.tested().filter_map(|p| p.value).reduce(f64::min)
    }

    /// Tested states whose best value is not positive.
    pub fn non_violating(&self) -> Vec<&ScanPoint> {
        self.tested().filter(|p| p.value.is_some_and(|v| v <= 0.0)).collect()
    }

    /// Line-oriented report: a header, one line per state, a summary.
    pub fn to_text(&self) -> String {
        let mut out = format!("# scan resolution {} seed {}\n", self.resolution, self.seed);
        out.push_str("# l0 l1 l2 l3 l4 phi best\n");
        for p in &self.points {
            match p.value {
                Some(v) => out.push_str(&format!("{} {v:.9}\n", p.params)),
                None => out.push_str(&format!("{} skipped\n", p.params)),
            }
        }
        out.push_str(&format!(
            "# tested {} skipped {} non-violating {} min {}\n",
            self.tested().count(),
            self.skipped(),
            self.non_violating().len(),
            self.min_value().map_or("none".into(), |v| format!("{v:.9}"))
        ));
        out
    }
}

/// Grid over the canonical form, `resolution` points per parameter: four
/// hyperspherical angles for the λ's at cell centres of `[0, π/2]` (so no
/// λ vanishes) and the phase on `[0, π]` with endpoints.
pub fn scan_grid(resolution: usize) -> Result<Vec<PureStateParams>> {
    if resolution < 2 {
        return Err(Error::InvariantViolation("scan resolution must be at least 2".into()));
    }
    let centre = |j: usize| PI / 2.0 * (j as f64 + 0.5) / resolution as f64;
    let step = |j: usize| PI * j as f64 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution.pow(5));
    let k = resolution;
    for idx in 0..k.pow(5) {
        let d = [idx / k.pow(4), (idx / k.pow(3)) % k, (idx / k.pow(2)) % k, (idx / k) % k, idx % k];
        let a = [0, 1, 2, 3].map(|i| centre(d[i]));
        let (s0, s1, s2) = (a[0].sin(), a[1].sin(), a[2].sin());
        let lambda = [
            a[0].cos(),
            s0 * a[1].cos(),
            s0 * s1 * a[2].cos(),
            s0 * s1 * s2 * a[3].cos(),
            s0 * s1 * s2 * a[3].sin(),
        ];
        let norm: f64 = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
        out.push(PureStateParams::new(lambda.map(|l| l / norm), step(d[4]))?);
    }
    Ok(out)
}

/// Seesaw of `expr` on every guarded grid state.
pub fn scan_pure_states(resolution: usize, expr: &BellExpression, restarts: usize, seed: u64) -> Result<ScanReport> {
    let grid = scan_grid(resolution)?;
    let coeffs = coefficients_f64(expr);
    let points = grid
        .into_par_iter()
        .enumerate()
        .map(|(i, params)| {
            let value = params.is_genuinely_tripartite().then(|| {
                let state = QuantumState::from_params(&params);
                seesaw_coefficients(&coeffs, &state, restarts, seed.wrapping_add(i as u64 * 7919)).value
            });
            ScanPoint { params, value }
        })
        .collect();
    Ok(ScanReport { resolution, seed, points })
}

/// Correlator form of a Born behavior, exact up to rounding.
pub fn born_correlators(s: &QuantumScenario) -> CorrelatorForm<f64> {
    let corr = s.measurements.correlators(&s.state.pauli_tensor());
    CorrelatorForm::from_values(corr[1..].to_vec()).expect("26 values")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ghz_witness_measurements() -> Measurements {
        let minus = Observable::from_vector([-1.0, 0.0, 1.0]).unwrap();
        let plus = Observable::from_vector([1.0, 0.0, 1.0]).unwrap();
        Measurements::new([[Observable::Z, Observable::X], [Observable::Z, Observable::X], [minus, plus]])
    }

    #[test]
    fn eigenstate_gives_deterministic_outcome() {
        let mut a = [0.0; 8];
        a[0] = 1.0;
        let s = QuantumScenario {
            state: QuantumState::from_amplitudes(a).unwrap(),
            measurements: Measurements::new([[Observable::Z; 2]; 3]),
        };
        let b = born_behavior(&s).unwrap();
        assert!((b.get([0, 0, 0], [0, 0, 0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlator_route_matches_projectors() {
        let mut rng = restart_rng(3, 0);
        let s = QuantumScenario { state: QuantumState::w().with_white_noise(0.7).unwrap(), measurements: Measurements::random(&mut rng) };
        let b = born_behavior(&s).unwrap();
        for e in 0..64 {
            assert!((b.entries()[e] - born_probability(&s, e)).abs() < 1e-12);
        }
        assert!(b.is_no_signalling());
    }

    #[test]
    fn rejects_invalid_states() {
        let mut rho = DensityMatrix::zeros();
        rho[(0, 0)] = Complex64::new(2.0, 0.0);
        rho[(1, 1)] = Complex64::new(-1.0, 0.0);
        assert!(QuantumState::from_density(rho).is_err());
        assert!(QuantumState::from_amplitudes([1.0; 8]).is_err());
    }

    #[test]
    fn ghz_witness_value() {
        let s = QuantumScenario { state: QuantumState::ghz(), measurements: ghz_witness_measurements() };
        let b = born_behavior(&s).unwrap();
        let v = crate::inequalities::expr_ghz_witness().evaluate(&b);
        assert!((v - (1.0 + 2.0 * 2f64.sqrt())).abs() < 1e-9, "{v}");
    }

    #[test]
    fn seesaw_is_monotone() {
        let e = Catalog::embedded().get(138).unwrap().expression.clone();
        let t = QuantumState::w().pauli_tensor();
        let mut rng = restart_rng(1, 0);
        let run = seesaw_run(&coefficients_f64(&e), &t, Measurements::random(&mut rng));
        for w in run.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn angle_file_round_trip() {
        let m = ghz_witness_measurements();
        let back = Measurements::from_angle_file(&m.to_angle_file()).unwrap();
        for p in 0..3 {
            for x in 0..2 {
                let (a, b) = (m.settings[p][x].vector(), back.settings[p][x].vector());
                assert!((0..3).all(|i| (a[i] - b[i]).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn grid_states_pass_guards() {
        let grid = scan_grid(2).unwrap();
        assert_eq!(grid.len(), 32);
        assert!(grid.iter().all(PureStateParams::is_genuinely_tripartite));
        let product = PureStateParams::new([1.0, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        assert!(!product.is_genuinely_tripartite());
        assert!(scan_grid(1).is_err());
    }

    #[test]
    fn noise_scales_correlators() {
        let mut rng = restart_rng(5, 0);
        let m = Measurements::random(&mut rng);
        let full = m.correlators(&QuantumState::ghz().pauli_tensor());
        let noisy = m.correlators(&QuantumState::ghz().with_white_noise(0.3).unwrap().pauli_tensor());
        for i in 1..TERMS {
            assert!((noisy[i] - 0.3 * full[i]).abs() < 1e-12);
        }
    }
}
