//! Ensemble distances built on the fidelity kernel `|<a|b>|^2`.

pub mod ot;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::qstate::{gram_of, same_qubits, Ket, StateEnsemble};
use crate::{Error, Result};

pub use ot::TransportPlan;

/// Highest moment order accepted by [`moment_distance`].
pub const DEFAULT_MAX_MOMENT: usize = 3;

/// The ensemble kernel. Only the normalized fidelity kernel is provided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KernelSpec {
    #[default]
    Fidelity,
}

impl KernelSpec {
    pub fn eval(&self, a: &Ket, b: &Ket) -> Result<f64> {
        match self {
            KernelSpec::Fidelity => crate::qstate::fidelity(a, b),
        }
    }
}

/// Weighted kernel mean `sum_ij w_i v_j G_ij`, summed in row order.
fn weighted_mean(g: &DMatrix<f64>, w: &[f64], v: &[f64]) -> f64 {
    (0..g.nrows()).map(|i| w[i] * (0..g.ncols()).map(|j| v[j] * g[(i, j)]).sum::<f64>()).sum()
}

/// Maximum mean discrepancy under the fidelity kernel.
pub fn mmd(x: &StateEnsemble, y: &StateEnsemble) -> Result<f64> {
    same_qubits(x.n_qubits(), y.n_qubits())?;
    let kxx = weighted_mean(&gram_of(x.states(), x.states()), x.weights(), x.weights());
    let kyy = weighted_mean(&gram_of(y.states(), y.states()), y.weights(), y.weights());
    let kxy = weighted_mean(&gram_of(x.states(), y.states()), x.weights(), y.weights());
    let d = kxx + kyy - 2.0 * kxy;
    Ok(if d < 0.0 && d > -1e-10 { 0.0 } else { d })
}

/// Cost matrix `1 - |<x_i|y_j>|^2`.
pub fn cost_matrix(x: &[Ket], y: &[Ket]) -> DMatrix<f64> {
    gram_of(x, y).map(|g| 1.0 - g)
}

/// 1-Wasserstein distance with uniform marginals.
pub fn wasserstein1(x: &StateEnsemble, y: &StateEnsemble) -> Result<(f64, TransportPlan)> {
    same_qubits(x.n_qubits(), y.n_qubits())?;
    let a = vec![1.0 / x.len() as f64; x.len()];
    let b = vec![1.0 / y.len() as f64; y.len()];
    let plan = ot::solve_transport(&cost_matrix(x.states(), y.states()), &a, &b)?;
    Ok((plan.objective, plan))
}

/// 1-Wasserstein distance using the ensembles' own weights as marginals.
pub fn wasserstein1_weighted(x: &StateEnsemble, y: &StateEnsemble) -> Result<(f64, TransportPlan)> {
    same_qubits(x.n_qubits(), y.n_qubits())?;
    let plan = ot::solve_transport(&cost_matrix(x.states(), y.states()), x.weights(), y.weights())?;
    Ok((plan.objective, plan))
}

/// Reference moments for [`moment_distance`].
#[derive(Clone, Copy, Debug)]
pub enum MomentReference<'a> {
    /// Haar measure on the ensemble's Hilbert space.
    Haar,
    Ensemble(&'a StateEnsemble),
}

/// `binom(d + m - 1, m)`, the dimension of the symmetric subspace.
pub fn symmetric_dimension(d: usize, m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, k| acc * (d + k - 1) as f64 / k as f64)
}

/// `Tr[rho_E^(m) rho_F^(m)] = sum_ij w_i v_j |<e_i|f_j>|^(2m)`.
pub fn moment_overlap(e: &StateEnsemble, f: &StateEnsemble, m: usize) -> Result<f64> {
    same_qubits(e.n_qubits(), f.n_qubits())?;
    let g = gram_of(e.states(), f.states()).map(|v| v.powi(m as i32));
    Ok(weighted_mean(&g, e.weights(), f.weights()))
}

/// Normalized Hilbert-Schmidt distance between m-th moment operators,
/// evaluated through kernel sums without forming `d^m`-dimensional matrices.
pub fn moment_distance(e: &StateEnsemble, m: usize, reference: MomentReference<'_>) -> Result<f64> {
    moment_distance_capped(e, m, reference, DEFAULT_MAX_MOMENT)
}

pub fn moment_distance_capped(
    e: &StateEnsemble,
    m: usize,
    reference: MomentReference<'_>,
    max_moment: usize,
) -> Result<f64> {
    if m < 1 || m > max_moment {
        return Err(Error::InvalidArgument(format!("moment order {m} outside 1..={max_moment}")));
    }
    let ee = moment_overlap(e, e, m)?;
    let sq = match reference {
        MomentReference::Haar => {
            // Tr[rho_e rho_H] = ||rho_H||^2 = 1 / D_sym
            let dsym = symmetric_dimension(1 << e.n_qubits(), m);
            dsym * ee - 1.0
        }
        MomentReference::Ensemble(f) => {
            let ff = moment_overlap(f, f, m)?;
            let ef = moment_overlap(e, f, m)?;
            (ee - 2.0 * ef + ff) / ff
        }
    };
    Ok(sq.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentReport {
    pub m: usize,
    pub delta_haar: f64,
    pub delta_target: f64,
}

pub fn moment_report(e: &StateEnsemble, m: usize, target: &StateEnsemble) -> Result<MomentReport> {
    Ok(MomentReport {
        m,
        delta_haar: moment_distance(e, m, MomentReference::Haar)?,
        delta_target: moment_distance(e, m, MomentReference::Ensemble(target))?,
    })
}

/// Probability of reading 0 on the control of a SWAP test.
pub fn swap_test_p0(a: &Ket, b: &Ket) -> Result<f64> {
    Ok(0.5 + 0.5 * crate::qstate::fidelity(a, b)?)
}

/// Runs the SWAP-test circuit (H, controlled-SWAP, H on a control qubit in
/// front of both registers) on the statevector and returns `P(control = 0)`.
pub fn swap_test_p0_circuit(a: &Ket, b: &Ket) -> Result<f64> {
    same_qubits(a.n_qubits(), b.n_qubits())?;
    let d = a.dim();
    // after the first H: (|0> + |1>)/sqrt2 ⊗ |a>|b>; CSWAP swaps on the |1> branch
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut zero = vec![C64::new(0.0, 0.0); d * d];
    let mut one = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            let ab = a.amplitudes()[i] * b.amplitudes()[j];
            zero[i * d + j] = ab * s;
            one[j * d + i] = ab * s;
        }
    }
    // final H on control: amplitude of 0 is (zero + one)/sqrt2
    Ok(zero.iter().zip(&one).map(|(x, y)| ((x + y) * s).norm_sqr()).sum())
}

/// Shot-based SWAP-test fidelity estimate `2 * freq(0) - 1`, clamped to `[0, 1]`.
pub fn swap_test_fidelity<R: Rng + ?Sized>(a: &Ket, b: &Ket, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("swap test needs at least one shot".into()));
    }
    let p0 = swap_test_p0(a, b)?.clamp(0.0, 1.0);
    let zeros = Binomial::new(shots, p0).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng);
    Ok((2.0 * zeros as f64 / shots as f64 - 1.0).clamp(0.0, 1.0))
}
