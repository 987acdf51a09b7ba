//! Trajectory-level noise and the noisy-measurement POVM constructions.
//!
//! Noise acts on statevectors as stochastic Pauli insertions; averaging many
//! trajectories reproduces the corresponding channel. The POVM helpers turn a
//! channel applied right before measurement into effective measurement
//! operators on the noiseless state.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Op};
use crate::metrics::{mmd, moment_distance, MomentReference};
use crate::qstate::{
    apply_pauli, enumerate_branches, kernels, Bitstring, Ket, MeasurementRecord, Pauli, StateEnsemble,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Pauli error probability after each noisy single-qubit rotation.
    pub p1: f64,
    /// Dephasing flip probability per time step `dt`.
    pub p2: f64,
}

impl NoiseConfig {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let cfg = Self { p1, p2 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Builds the per-step flip probability from a dephasing rate.
    pub fn from_rate(p1: f64, gamma_phi: f64, dt: f64) -> Result<Self> {
        if !(gamma_phi >= 0.0) || !(dt >= 0.0) {
            return Err(Error::InvalidArgument("dephasing rate and dt must be >= 0".into()));
        }
        Self::new(p1, dephasing_prob(dt, gamma_phi))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=0.5).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} outside [0, 0.5]")));
            }
        }
        Ok(())
    }

    /// Dephasing rate consistent with `p2` at step `dt`; infinite at `p2 = 0.5`.
    pub fn gamma_phi(&self, dt: f64) -> f64 {
        -(1.0 - 2.0 * self.p2).ln() / dt
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }
}

/// `(1 - exp(-gamma t)) / 2`.
pub fn dephasing_prob(t: f64, gamma_phi: f64) -> f64 {
    assert!(t >= 0.0, "dephasing time must be >= 0");
    if gamma_phi == 0.0 {
        return 0.0;
    }
    -0.5 * (-gamma_phi * t).exp_m1()
}

/// Flip probability after `k` independent steps of flip probability `p2`.
pub fn dephasing_prob_after_steps(p2: f64, k: u32) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * p2).powi(k as i32))
}

/// Applies `Z` to each qubit independently with probability `prob`.
/// Returns the number of flips.
pub fn apply_dephasing<R: Rng + ?Sized>(state: &mut Ket, prob: f64, rng: &mut R) -> usize {
    if prob == 0.0 {
        return 0;
    }
    let n = state.n_qubits();
    let mut flips = 0;
    for q in 0..n {
        if rng.random::<f64>() < prob {
            kernels::pauli(state.amplitudes_mut(), n, q, Pauli::Z);
            flips += 1;
        }
    }
    flips
}

/// Runs `circuit` on `state`, inserting a uniformly chosen Pauli on the target
/// after each Y or Z rotation with probability `p1`. Returns the number of
/// inserted errors. No randomness is consumed when `p1 = 0`.
pub fn run_with_pauli_noise<R: Rng + ?Sized>(
    circuit: &Circuit,
    state: &mut Ket,
    p1: f64,
    rng: &mut R,
) -> Result<usize> {
    let n = circuit.n_qubits();
    if state.n_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, got: state.n_qubits() });
    }
    let amps = state.amplitudes_mut();
    let mut injected = 0;
    for op in circuit.ops() {
        op.apply(amps, n);
        if p1 == 0.0 {
            continue;
        }
        if let Op::Rot { axis: Pauli::Y | Pauli::Z, qubit, .. } = *op {
            if rng.random::<f64>() < p1 {
                let p = Pauli::ALL[rng.random_range(0..3)];
                kernels::pauli(amps, n, qubit, p);
                injected += 1;
            }
        }
    }
    Ok(injected)
}

/// Number of noise locations [`run_with_pauli_noise`] visits in `circuit`.
pub fn noisy_locations(circuit: &Circuit) -> usize {
    circuit.ops().iter().filter(|op| matches!(op, Op::Rot { axis: Pauli::Y | Pauli::Z, .. })).count()
}

#[derive(Clone, Debug)]
pub struct PovmElement {
    pub outcome: Bitstring,
    pub operator: DMatrix<C64>,
}

fn check_kraus(kraus: &[DMatrix<C64>]) -> Result<usize> {
    let first =
        kraus.first().ok_or_else(|| Error::InvalidArgument("channel needs at least one Kraus operator".into()))?;
    let d = first.nrows();
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("Kraus dimension {d} is not a power of two")));
    }
    let mut sum = DMatrix::<C64>::zeros(d, d);
    for k in kraus {
        if k.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, got: k.nrows() });
        }
        sum += k.adjoint() * k;
    }
    let dev = (sum - DMatrix::identity(d, d)).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if dev > 1e-10 {
        return Err(Error::InvalidArgument(format!("Kraus operators are not trace preserving (deviation {dev:e})")));
    }
    Ok(d)
}

/// Effective measurement operators `E_z = sum_k K_k^dag |z><z| K_k` of a
/// channel followed by a computational-basis measurement.
pub fn povm_from_channel(kraus: &[DMatrix<C64>]) -> Result<Vec<PovmElement>> {
    let d = check_kraus(kraus)?;
    let bits = d.trailing_zeros();
    Ok((0..d)
        .map(|z| {
            let mut e = DMatrix::<C64>::zeros(d, d);
            for k in kraus {
                let row = k.row(z);
                e += row.adjoint() * row;
            }
            PovmElement { outcome: Bitstring::new(z as u64, bits), operator: e }
        })
        .collect())
}

/// Outcome probabilities `<Phi|(I ⊗ E_z)|Phi>` with the POVM acting on the
/// trailing qubits of `generator`.
pub fn povm_probabilities(generator: &Ket, povm: &[PovmElement]) -> Result<Vec<f64>> {
    let df = povm.first().map(|e| e.operator.nrows()).ok_or(Error::EmptyEnsemble)?;
    let d = generator.dim();
    if df > d || !d.is_multiple_of(df) {
        return Err(Error::DimensionMismatch { expected: d, got: df });
    }
    let amps = generator.amplitudes();
    Ok(povm
        .iter()
        .map(|e| {
            amps.chunks(df)
                .map(|block| {
                    let v = nalgebra::DVector::from_column_slice(block);
                    (v.adjoint() * &e.operator * &v)[(0, 0)].re
                })
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelabelVerdict {
    pub pauli: Pauli,
    pub max_prob_error: f64,
    pub max_state_error: f64,
    pub max_moment_error: f64,
    pub mmd: f64,
}

impl RelabelVerdict {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_prob_error <= tol && self.max_state_error <= tol && self.max_moment_error <= tol && self.mmd <= tol
    }
}

fn projected_ensemble(branches: &[MeasurementRecord]) -> Result<StateEnsemble> {
    StateEnsemble::from_raw_weights(
        branches.iter().map(|b| b.probability).collect(),
        branches.iter().map(|b| b.post_state.clone()).collect(),
    )
}

/// Compares the projected ensemble of `generator` with the one obtained after a
/// Pauli error on measured qubit `qubit`, relabeling outcomes `z -> z ⊕ e_q`
/// for X and Y.
pub fn pauli_relabel_check(generator: &Ket, measured: &[usize], qubit: usize, pauli: Pauli) -> Result<RelabelVerdict> {
    let pos = measured
        .iter()
        .position(|&q| q == qubit)
        .ok_or_else(|| Error::InvalidQubits(format!("qubit {qubit} is not measured")))?;
    let clean = enumerate_branches(generator, measured)?;
    let mut flipped = generator.clone();
    apply_pauli(&mut flipped, qubit, pauli)?;
    let noisy = enumerate_branches(&flipped, measured)?;

    let relabel = |z: Bitstring| match pauli {
        Pauli::Z => z,
        Pauli::X | Pauli::Y => z.flipped(pos),
    };
    let mut max_prob_error: f64 = 0.0;
    let mut max_state_error: f64 = 0.0;
    if clean.len() != noisy.len() {
        max_prob_error = f64::INFINITY;
    }
    for b in &clean {
        let want = relabel(b.outcome);
        match noisy.iter().find(|n| n.outcome == want) {
            Some(n) => {
                max_prob_error = max_prob_error.max((b.probability - n.probability).abs());
                let diff = b.post_state.density_matrix() - n.post_state.density_matrix();
                max_state_error = max_state_error.max(diff.iter().map(|v| v.norm()).fold(0.0, f64::max));
            }
            None => max_prob_error = f64::INFINITY,
        }
    }

    let clean_ens = projected_ensemble(&clean)?;
    let noisy_ens = projected_ensemble(&noisy)?;
    let mut max_moment_error: f64 = 0.0;
    for m in 1..=3 {
        let a = moment_distance(&clean_ens, m, MomentReference::Haar)?;
        let b = moment_distance(&noisy_ens, m, MomentReference::Haar)?;
        max_moment_error = max_moment_error.max((a - b).abs());
    }
    Ok(RelabelVerdict { pauli, max_prob_error, max_state_error, max_moment_error, mmd: mmd(&clean_ens, &noisy_ens)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{haar_state, tensor};
    use crate::rngs;

    #[test]
    fn dephasing_probability_examples() {
        assert_eq!(dephasing_prob(3.0, 0.0), 0.0);
        assert_eq!(dephasing_prob(0.0, 2.0), 0.0);
        assert!((dephasing_prob(1e6, 1.0) - 0.5).abs() < 1e-15);
        let p2 = dephasing_prob(0.02, 1.3);
        for k in 0..=100u32 {
            let direct = dephasing_prob(k as f64 * 0.02, 1.3);
            assert!((direct - dephasing_prob_after_steps(p2, k)).abs() < 1e-14);
        }
    }

    #[test]
    fn rate_round_trip() {
        let cfg = NoiseConfig::from_rate(0.0, 0.7, 0.02).unwrap();
        assert!((cfg.gamma_phi(0.02) - 0.7).abs() < 1e-12);
        assert!(NoiseConfig::new(0.6, 0.0).is_err());
        assert!(NoiseConfig::new(0.1, -0.1).is_err());
    }

    #[test]
    fn basis_states_are_dephasing_fixed_points() {
        let mut rng = rngs::stream(1, &[]);
        for idx in 0..8 {
            let mut s = Ket::basis(3, idx);
            apply_dephasing(&mut s, 0.5, &mut rng);
            assert!((crate::qstate::fidelity(&s, &Ket::basis(3, idx)).unwrap() - 1.0).abs() < 1e-15);
        }
        let mut s = Ket::plus();
        assert_eq!(apply_dephasing(&mut s, 0.0, &mut rng), 0);
        assert_eq!(s, Ket::plus());
    }

    #[test]
    fn zero_p1_is_bit_identical() {
        let mut rng = rngs::stream(2, &[]);
        let mut c = Circuit::new(2);
        c.push(Op::Rot { axis: Pauli::Z, qubit: 0, angle: 0.3, param: None })
            .push(Op::Rot { axis: Pauli::Y, qubit: 1, angle: -0.8, param: None })
            .push(Op::ZzAllPairs { angle: 0.2 });
        let psi = haar_state(2, &mut rng);
        let mut ideal = psi.clone();
        c.apply(&mut ideal).unwrap();
        let mut noisy = psi.clone();
        assert_eq!(run_with_pauli_noise(&c, &mut noisy, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(ideal, noisy);
        assert_eq!(noisy_locations(&c), 2);
    }

    #[test]
    fn povm_examples() {
        let id = povm_from_channel(&[DMatrix::identity(2, 2)]).unwrap();
        assert_eq!(id[0].operator, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]).map(C64::from));
        // full depolarizing: Kraus {I, X, Y, Z} / 2
        let kraus: Vec<DMatrix<C64>> = Pauli::ALL
            .iter()
            .map(|p| p.gate().matrix())
            .chain([DMatrix::identity(2, 2)])
            .map(|m| m * C64::from(0.5))
            .collect();
        for e in povm_from_channel(&kraus).unwrap() {
            let half = DMatrix::<C64>::identity(2, 2) * C64::from(0.5);
            assert!((e.operator - half).iter().all(|v| v.norm() < 1e-15));
        }
        assert!(povm_from_channel(&[DMatrix::identity(2, 2) * C64::from(0.5)]).is_err());
        assert!(povm_from_channel(&[]).is_err());
    }

    #[test]
    fn relabeling_on_product_generator() {
        // |psi>|0>: an X error on the measured qubit moves all weight to outcome 1
        let mut rng = rngs::stream(3, &[]);
        let gen = tensor(&haar_state(1, &mut rng), &Ket::zero(1));
        for p in Pauli::ALL {
            let v = pauli_relabel_check(&gen, &[1], 1, p).unwrap();
            assert!(v.holds(1e-12), "{v:?}");
        }
        assert!(pauli_relabel_check(&gen, &[1], 0, Pauli::X).is_err());
    }
}
