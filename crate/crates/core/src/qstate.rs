//! Dense statevectors, ensembles, gates and computational-basis measurement.
//!
//! Qubit 0 is the most significant bit of the basis index, so for
//! `tensor(a, b)` the qubits of `a` come first.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::{Error, Result};

/// Tolerance on `|<psi|psi> - 1|` accepted for a [`Ket`].
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on `|sum(weights) - 1|` accepted for a [`StateEnsemble`].
pub const WEIGHT_TOL: f64 = 1e-9;
/// Measurement branches below this probability are dropped.
pub const BRANCH_CUTOFF: f64 = 1e-14;
const UNITARY_TOL: f64 = 1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Ket {
    /// Builds a ket, rejecting wrong lengths and non-unit norms.
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm_sqr = norm_sqr(&amps);
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { n_qubits, amps })
    }

    /// Builds a ket by rescaling `amps` to unit norm.
    pub fn normalized(n_qubits: usize, mut amps: Vec<C64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm_sqr = norm_sqr(&amps);
        if !(norm_sqr > 0.0) || !norm_sqr.is_finite() {
            return Err(Error::NotNormalized { norm_sqr });
        }
        let scale = 1.0 / norm_sqr.sqrt();
        amps.iter_mut().for_each(|a| *a *= scale);
        Ok(Self { n_qubits, amps })
    }

    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        Self { n_qubits, amps }
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!(n_qubits >= 1 && index < (1 << n_qubits));
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Self { n_qubits, amps }
    }

    /// `|0...0>` on `n_qubits`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    /// Parses a bitstring such as `"0110"` into a basis state.
    pub fn from_bits(bits: &str) -> Result<Self> {
        if bits.is_empty() || bits.len() > 30 {
            return Err(Error::InvalidArgument(format!("bad bitstring {bits:?}")));
        }
        let index =
            usize::from_str_radix(bits, 2).map_err(|_| Error::InvalidArgument(format!("bad bitstring {bits:?}")))?;
        Ok(Self::basis(bits.len(), index))
    }

    /// Single-qubit `|+>`.
    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_raw(1, vec![C64::new(s, 0.0), C64::new(s, 0.0)])
    }

    /// GHZ state `(|0...0> + |1...1>)/sqrt(2)`.
    pub fn ghz(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        amps[0] = C64::new(s, 0.0);
        *amps.last_mut().unwrap() += C64::new(s, 0.0);
        Self::normalized(n_qubits, amps).expect("ghz is normalizable")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        same_qubits(self.n_qubits, other.n_qubits)?;
        Ok(inner(&self.amps, &other.amps))
    }

    /// Projector `|psi><psi|` as a dense matrix.
    pub fn density_matrix(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.amps[r] * self.amps[c].conj())
    }

    pub fn apply_gate(&mut self, gate: &Gate, targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, targets, gate.n_targets())?;
        match gate {
            Gate::Single(m) => kernels::apply_1q(&mut self.amps, self.n_qubits, targets[0], m),
            Gate::Two(m) => kernels::apply_2q(&mut self.amps, self.n_qubits, targets[0], targets[1], m),
        }
        Ok(())
    }

    /// Rescales to unit norm in place.
    pub(crate) fn renormalize(&mut self) {
        let n = norm_sqr(&self.amps).sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }
}

fn check_len(n_qubits: usize, len: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > 30 {
        return Err(Error::InvalidArgument(format!("qubit count {n_qubits} out of range")));
    }
    if len != 1 << n_qubits {
        return Err(Error::DimensionMismatch { expected: 1 << n_qubits, got: len });
    }
    Ok(())
}

pub(crate) fn same_qubits(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[inline]
pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// `sum_i conj(a_i) b_i`.
#[inline]
pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// `|a> ⊗ |b>` with `a` on the leading qubits.
pub fn tensor(a: &Ket, b: &Ket) -> Ket {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in &a.amps {
        amps.extend(b.amps.iter().map(|y| x * y));
    }
    Ket::from_raw(a.n_qubits + b.n_qubits, amps)
}

/// A one- or two-qubit unitary. Two-qubit matrices are indexed by
/// `2 * bit(targets[0]) + bit(targets[1])`.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Single([[C64; 2]; 2]),
    Two([[C64; 4]; 4]),
}

impl Gate {
    pub fn single(m: [[C64; 2]; 2]) -> Result<Self> {
        check_unitary(&m.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
        Ok(Gate::Single(m))
    }

    pub fn two(m: [[C64; 4]; 4]) -> Result<Self> {
        check_unitary(&m.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
        Ok(Gate::Two(m))
    }

    /// Builds a gate from a dense row-major matrix of size 2x2 or 4x4.
    pub fn from_matrix(m: &DMatrix<C64>) -> Result<Self> {
        match (m.nrows(), m.ncols()) {
            (2, 2) => Self::single([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]),
            (4, 4) => {
                let mut a = [[ZERO; 4]; 4];
                for (r, row) in a.iter_mut().enumerate() {
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = m[(r, c)];
                    }
                }
                Self::two(a)
            }
            (r, c) => Err(Error::InvalidArgument(format!("gates must be 2x2 or 4x4, got {r}x{c}"))),
        }
    }

    pub fn n_targets(&self) -> usize {
        match self {
            Gate::Single(_) => 1,
            Gate::Two(_) => 2,
        }
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        match self {
            Gate::Single(m) => DMatrix::from_fn(2, 2, |r, c| m[r][c]),
            Gate::Two(m) => DMatrix::from_fn(4, 4, |r, c| m[r][c]),
        }
    }
}

fn check_unitary(rows: &[Vec<C64>]) -> Result<()> {
    let d = rows.len();
    let mut deviation: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let v: C64 = (0..d).map(|k| rows[k][r].conj() * rows[k][c]).sum();
            let target = if r == c { ONE } else { ZERO };
            deviation = deviation.max((v - target).norm());
        }
    }
    if !(deviation <= UNITARY_TOL) {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

fn check_targets(n_qubits: usize, targets: &[usize], expected: usize) -> Result<()> {
    if targets.len() != expected {
        return Err(Error::InvalidQubits(format!("gate acts on {expected} qubits, got {} targets", targets.len())));
    }
    if let Some(q) = targets.iter().find(|&&q| q >= n_qubits) {
        return Err(Error::InvalidQubits(format!("target {q} out of range for {n_qubits} qubits")));
    }
    if expected == 2 && targets[0] == targets[1] {
        return Err(Error::InvalidQubits("duplicate targets".into()));
    }
    Ok(())
}

/// Returns `state` with `gate` applied to `targets`.
pub fn apply_gate(state: &Ket, gate: &Gate, targets: &[usize]) -> Result<Ket> {
    let mut out = state.clone();
    out.apply_gate(gate, targets)?;
    Ok(out)
}

/// Standard gates.
pub mod gates {
    use super::*;

    pub fn x() -> Gate {
        Gate::Single([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn y() -> Gate {
        Gate::Single([[ZERO, -I], [I, ZERO]])
    }

    pub fn z() -> Gate {
        Gate::Single([[ONE, ZERO], [ZERO, -ONE]])
    }

    pub fn h() -> Gate {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Gate::Single([[s, s], [s, -s]])
    }

    /// `exp(-i theta X / 2)`.
    pub fn rx(theta: f64) -> Gate {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        Gate::Single([[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]])
    }

    /// `exp(-i theta Y / 2)`.
    pub fn ry(theta: f64) -> Gate {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        Gate::Single([[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]])
    }

    /// `exp(-i theta Z / 2)`.
    pub fn rz(theta: f64) -> Gate {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        Gate::Single([[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]])
    }

    pub fn cz() -> Gate {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = ONE;
        m[1][1] = ONE;
        m[2][2] = ONE;
        m[3][3] = -ONE;
        Gate::Two(m)
    }

    /// Controlled-NOT with `targets[0]` as control.
    pub fn cnot() -> Gate {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = ONE;
        m[1][1] = ONE;
        m[2][3] = ONE;
        m[3][2] = ONE;
        Gate::Two(m)
    }
}

/// In-place kernels on raw amplitude slices.
pub(crate) mod kernels {
    use super::*;

    #[inline]
    pub fn mask(n: usize, q: usize) -> usize {
        1 << (n - 1 - q)
    }

    pub fn apply_1q(amps: &mut [C64], n: usize, q: usize, m: &[[C64; 2]; 2]) {
        let s = mask(n, q);
        for i in 0..amps.len() {
            if i & s == 0 {
                let (a0, a1) = (amps[i], amps[i | s]);
                amps[i] = m[0][0] * a0 + m[0][1] * a1;
                amps[i | s] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn apply_2q(amps: &mut [C64], n: usize, q1: usize, q2: usize, m: &[[C64; 4]; 4]) {
        let (s1, s2) = (mask(n, q1), mask(n, q2));
        for i in 0..amps.len() {
            if i & (s1 | s2) == 0 {
                let idx = [i, i | s2, i | s1, i | s1 | s2];
                let a = idx.map(|k| amps[k]);
                for (r, &k) in idx.iter().enumerate() {
                    amps[k] = m[r][0] * a[0] + m[r][1] * a[1] + m[r][2] * a[2] + m[r][3] * a[3];
                }
            }
        }
    }

    /// `exp(-i angle P / 2)` for a Pauli axis.
    pub fn rotate(amps: &mut [C64], n: usize, q: usize, axis: Pauli, angle: f64) {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let b = mask(n, q);
        match axis {
            Pauli::X => {
                for i in 0..amps.len() {
                    if i & b == 0 {
                        let (a0, a1) = (amps[i], amps[i | b]);
                        amps[i] = a0 * c + C64::new(a1.im * s, -a1.re * s);
                        amps[i | b] = a1 * c + C64::new(a0.im * s, -a0.re * s);
                    }
                }
            }
            Pauli::Y => {
                for i in 0..amps.len() {
                    if i & b == 0 {
                        let (a0, a1) = (amps[i], amps[i | b]);
                        amps[i] = a0 * c - a1 * s;
                        amps[i | b] = a0 * s + a1 * c;
                    }
                }
            }
            Pauli::Z => {
                let (p0, p1) = (C64::new(c, -s), C64::new(c, s));
                for (i, a) in amps.iter_mut().enumerate() {
                    *a *= if i & b == 0 { p0 } else { p1 };
                }
            }
        }
    }

    pub fn pauli(amps: &mut [C64], n: usize, q: usize, p: Pauli) {
        let b = mask(n, q);
        match p {
            Pauli::X => {
                for i in 0..amps.len() {
                    if i & b == 0 {
                        amps.swap(i, i | b);
                    }
                }
            }
            Pauli::Y => {
                for i in 0..amps.len() {
                    if i & b == 0 {
                        let (a0, a1) = (amps[i], amps[i | b]);
                        amps[i] = -I * a1;
                        amps[i | b] = I * a0;
                    }
                }
            }
            Pauli::Z => {
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & b != 0 {
                        *a = -*a;
                    }
                }
            }
        }
    }

    /// Writes `(-i/2) P v` into `out`.
    pub fn half_generator(v: &[C64], n: usize, q: usize, p: Pauli, out: &mut [C64]) {
        out.copy_from_slice(v);
        pauli(out, n, q, p);
        let f = C64::new(0.0, -0.5);
        out.iter_mut().for_each(|a| *a *= f);
    }

    pub fn cnot(amps: &mut [C64], n: usize, control: usize, target: usize) {
        let (c, t) = (mask(n, control), mask(n, target));
        for i in 0..amps.len() {
            if i & c != 0 && i & t == 0 {
                amps.swap(i, i | t);
            }
        }
    }
}

/// Pauli operators, also used as rotation axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn gate(self) -> Gate {
        match self {
            Pauli::X => gates::x(),
            Pauli::Y => gates::y(),
            Pauli::Z => gates::z(),
        }
    }
}

/// Applies a Pauli to one qubit in place.
pub fn apply_pauli(state: &mut Ket, qubit: usize, p: Pauli) -> Result<()> {
    check_targets(state.n_qubits, &[qubit], 1)?;
    kernels::pauli(&mut state.amps, state.n_qubits, qubit, p);
    Ok(())
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &Ket, b: &Ket) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Measurement outcome: `len` bits, the first measured qubit in the most
/// significant position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bitstring {
    pub value: u64,
    pub len: u32,
}

impl Bitstring {
    pub fn new(value: u64, len: u32) -> Self {
        debug_assert!(len == 64 || value < (1u64 << len));
        Self { value, len }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Bit of the `i`-th measured qubit.
    pub fn bit(&self, i: usize) -> u8 {
        ((self.value >> (self.len as usize - 1 - i)) & 1) as u8
    }

    /// Flips the `i`-th bit (`z -> z xor e_i`).
    pub fn flipped(&self, i: usize) -> Self {
        Self::new(self.value ^ (1 << (self.len as usize - 1 - i)), self.len)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len as usize {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementRecord {
    pub outcome: Bitstring,
    pub probability: f64,
    pub post_state: Ket,
}

/// Index bookkeeping for a measured/kept partition of the qubits.
struct Partition {
    n_measured: usize,
    n_kept: usize,
    /// Per basis index: (outcome value, kept-subsystem index).
    split: Vec<(u32, u32)>,
}

impl Partition {
    fn new(n_qubits: usize, measured: &[usize]) -> Result<Self> {
        if measured.is_empty() {
            return Err(Error::InvalidQubits("no qubits to measure".into()));
        }
        if measured.len() >= n_qubits {
            return Err(Error::InvalidQubits("measuring every qubit leaves no post-measurement state".into()));
        }
        let mut seen = vec![false; n_qubits];
        for &q in measured {
            if q >= n_qubits {
                return Err(Error::InvalidQubits(format!("qubit {q} out of range for {n_qubits} qubits")));
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::InvalidQubits(format!("qubit {q} listed twice")));
            }
        }
        let kept: Vec<usize> = (0..n_qubits).filter(|&q| !seen[q]).collect();
        let bit = |i: usize, q: usize| (i >> (n_qubits - 1 - q)) & 1;
        let split = (0..1usize << n_qubits)
            .map(|i| {
                let z = measured.iter().fold(0, |acc, &q| (acc << 1) | bit(i, q));
                let r = kept.iter().fold(0, |acc, &q| (acc << 1) | bit(i, q));
                (z as u32, r as u32)
            })
            .collect();
        Ok(Self { n_measured: measured.len(), n_kept: kept.len(), split })
    }

    fn probabilities(&self, amps: &[C64]) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.n_measured];
        for (a, &(z, _)) in amps.iter().zip(&self.split) {
            p[z as usize] += a.norm_sqr();
        }
        p
    }

    fn project(&self, amps: &[C64], z: u32) -> Vec<C64> {
        let mut out = vec![ZERO; 1 << self.n_kept];
        for (a, &(zz, r)) in amps.iter().zip(&self.split) {
            if zz == z {
                out[r as usize] = *a;
            }
        }
        out
    }

    fn record(&self, amps: &[C64], z: u32, probability: f64) -> MeasurementRecord {
        let mut post = self.project(amps, z);
        let scale = 1.0 / probability.sqrt();
        post.iter_mut().for_each(|a| *a *= scale);
        let mut post_state = Ket::from_raw(self.n_kept, post);
        post_state.renormalize();
        MeasurementRecord { outcome: Bitstring::new(z as u64, self.n_measured as u32), probability, post_state }
    }
}

/// Samples a computational-basis measurement of `measured_qubits` with Born
/// probabilities and returns the normalized state of the remaining qubits
/// (kept in ascending qubit order).
pub fn measure_subset<R: Rng + ?Sized>(
    state: &Ket,
    measured_qubits: &[usize],
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let part = Partition::new(state.n_qubits, measured_qubits)?;
    let probs = part.probabilities(&state.amps);
    let z = sample_index(&probs, rng);
    Ok(part.record(&state.amps, z as u32, probs[z]))
}

/// Samples an index with probability proportional to `weights`, skipping
/// entries below [`BRANCH_CUTOFF`].
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().filter(|&&p| p >= BRANCH_CUTOFF).sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in weights.iter().enumerate() {
        if p < BRANCH_CUTOFF {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// All measurement branches with probability at least [`BRANCH_CUTOFF`],
/// ordered by outcome.
pub fn enumerate_branches(state: &Ket, measured_qubits: &[usize]) -> Result<Vec<MeasurementRecord>> {
    let part = Partition::new(state.n_qubits, measured_qubits)?;
    let probs = part.probabilities(&state.amps);
    Ok(probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= BRANCH_CUTOFF)
        .map(|(z, &p)| part.record(&state.amps, z as u32, p))
        .collect())
}

/// Haar-random state on the full `2^n` dimensional space.
pub fn haar_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Ket {
    let amps =
        (0..1usize << n_qubits).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    Ket::normalized(n_qubits, amps).expect("gaussian vector is nonzero")
}

/// Tensor product of `n_qubits` independent single-qubit Haar states.
pub fn haar_product_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Ket {
    assert!(n_qubits >= 1, "haar_product_state needs at least one qubit");
    (1..n_qubits).fold(haar_state(1, rng), |acc, _| tensor(&acc, &haar_state(1, rng)))
}

/// A non-empty weighted collection of kets on a common number of qubits.
#[derive(Clone, Debug)]
pub struct StateEnsemble {
    weights: Vec<f64>,
    states: Vec<Ket>,
}

impl StateEnsemble {
    /// Equal weights `1/N`.
    pub fn uniform(states: Vec<Ket>) -> Result<Self> {
        let n = states.len();
        Self::weighted(vec![1.0 / n.max(1) as f64; n], states)
    }

    pub fn weighted(weights: Vec<f64>, states: Vec<Ket>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if weights.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: states.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        let n = states[0].n_qubits();
        for s in &states {
            same_qubits(n, s.n_qubits())?;
        }
        Ok(Self { weights, states })
    }

    /// Rescales nonnegative raw weights to sum to one.
    pub fn from_raw_weights(raw: Vec<f64>, states: Vec<Ket>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Self::weighted(raw.into_iter().map(|w| w / total).collect(), states)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.states[0].n_qubits()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[Ket] {
        &self.states
    }

    pub fn into_states(self) -> Vec<Ket> {
        self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Ket)> {
        self.weights.iter().copied().zip(&self.states)
    }

    /// Uniformly weighted sub-ensemble of the selected members.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::uniform(indices.iter().map(|&i| self.states[i].clone()).collect())
    }

    /// Same members with uniform weights.
    pub fn with_uniform_weights(&self) -> Self {
        Self::uniform(self.states.clone()).expect("non-empty")
    }
}

/// Matrix of `|<x_i|y_j>|^2`.
pub fn gram_matrix(x: &StateEnsemble, y: &StateEnsemble) -> Result<DMatrix<f64>> {
    same_qubits(x.n_qubits(), y.n_qubits())?;
    Ok(gram_of(x.states(), y.states()))
}

pub(crate) fn gram_of(x: &[Ket], y: &[Ket]) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> =
        x.par_iter().map(|a| y.iter().map(|b| inner(&a.amps, &b.amps).norm_sqr().min(1.0)).collect()).collect();
    DMatrix::from_fn(x.len(), y.len(), |i, j| rows[i][j])
}
