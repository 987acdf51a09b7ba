//! Measurement-enabled denoising with a hardware-efficient ansatz.
//!
//! A step attaches `n_a` ancillas in `|0...0>` below the data qubits, applies
//! the ansatz, measures the ancillas and keeps the normalized data state.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Op};
use crate::qstate::{
    enumerate_branches, haar_product_state, measure_subset, tensor, Bitstring, Ket, MeasurementRecord, Pauli,
    StateEnsemble,
};
use crate::rngs::{stream, tag};
use crate::{Error, Result};

pub fn ansatz_param_len(n_qubits: usize, layers: usize) -> usize {
    2 * n_qubits * layers
}

/// Each layer: `RX` then `RY` on every qubit, then CZ on all neighbouring pairs.
/// Rotation `(layer, qubit, axis)` reads `theta[2 (layer n + qubit) + axis]`.
pub fn build_ansatz(theta: &[f64], n_qubits: usize, layers: usize) -> Result<Circuit> {
    let want = ansatz_param_len(n_qubits, layers);
    if theta.len() != want {
        return Err(Error::DimensionMismatch { expected: want, got: theta.len() });
    }
    let mut c = Circuit::new(n_qubits);
    for l in 0..layers {
        for q in 0..n_qubits {
            for (a, axis) in [Pauli::X, Pauli::Y].into_iter().enumerate() {
                let p = 2 * (l * n_qubits + q) + a;
                c.push(Op::Rot { axis, qubit: q, angle: theta[p], param: Some(p) });
            }
        }
        if n_qubits > 1 {
            c.push(Op::CzChain);
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiserStack {
    pub n_m: usize,
    pub n_a: usize,
    pub layers: usize,
    /// `thetas[k - 1]` parametrizes the step-`k` unitary.
    pub thetas: Vec<Vec<f64>>,
}

impl DenoiserStack {
    pub fn zeros(k_steps: usize, n_m: usize, n_a: usize, layers: usize) -> Self {
        let len = ansatz_param_len(n_m + n_a, layers);
        Self { n_m, n_a, layers, thetas: vec![vec![0.0; len]; k_steps] }
    }

    /// Angles uniform in `[-pi, pi]`.
    pub fn random<R: Rng + ?Sized>(k_steps: usize, n_m: usize, n_a: usize, layers: usize, rng: &mut R) -> Self {
        let mut s = Self::zeros(k_steps, n_m, n_a, layers);
        for v in s.thetas.iter_mut().flatten() {
            *v = rng.random_range(-PI..=PI);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(Error::InvalidArgument("denoiser needs at least one step".into()));
        }
        if self.n_m == 0 {
            return Err(Error::InvalidArgument("denoiser needs at least one data qubit".into()));
        }
        let len = self.param_len();
        if let Some(t) = self.thetas.iter().find(|t| t.len() != len) {
            return Err(Error::DimensionMismatch { expected: len, got: t.len() });
        }
        Ok(())
    }

    pub fn k_steps(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_m + self.n_a
    }

    pub fn param_len(&self) -> usize {
        ansatz_param_len(self.n_qubits(), self.layers)
    }

    pub fn theta(&self, k: usize) -> &[f64] {
        &self.thetas[k - 1]
    }

    pub fn circuit(&self, k: usize) -> Result<Circuit> {
        build_ansatz(self.theta(k), self.n_qubits(), self.layers)
    }
}

#[derive(Clone, Debug)]
pub struct DenoiseStepRecord {
    pub step: usize,
    pub outcome: Bitstring,
    pub born_prob: f64,
    pub state: Ket,
}

fn apply_with_ancillas(state: &Ket, circuit: &Circuit, n_a: usize) -> Result<Ket> {
    let mut joint = if n_a == 0 { state.clone() } else { tensor(state, &Ket::zero(n_a)) };
    circuit.apply(&mut joint)?;
    Ok(joint)
}

fn ancillas(n_m: usize, n_a: usize) -> Vec<usize> {
    (n_m..n_m + n_a).collect()
}

/// One sampled denoising step with a prebuilt ansatz circuit.
pub fn denoise_with<R: Rng + ?Sized>(
    state: &Ket,
    circuit: &Circuit,
    n_a: usize,
    step: usize,
    rng: &mut R,
) -> Result<DenoiseStepRecord> {
    let joint = apply_with_ancillas(state, circuit, n_a)?;
    if n_a == 0 {
        return Ok(DenoiseStepRecord { step, outcome: Bitstring::empty(), born_prob: 1.0, state: joint });
    }
    let rec = measure_subset(&joint, &ancillas(state.n_qubits(), n_a), rng)?;
    Ok(DenoiseStepRecord { step, outcome: rec.outcome, born_prob: rec.probability, state: rec.post_state })
}

pub fn denoise_step<R: Rng + ?Sized>(
    state: &Ket,
    theta: &[f64],
    n_a: usize,
    layers: usize,
    rng: &mut R,
) -> Result<DenoiseStepRecord> {
    let circuit = build_ansatz(theta, state.n_qubits() + n_a, layers)?;
    denoise_with(state, &circuit, n_a, 0, rng)
}

/// All ancilla outcomes of one step with their probabilities.
pub fn denoise_branches(state: &Ket, theta: &[f64], n_a: usize, layers: usize) -> Result<Vec<MeasurementRecord>> {
    let circuit = build_ansatz(theta, state.n_qubits() + n_a, layers)?;
    let joint = apply_with_ancillas(state, &circuit, n_a)?;
    if n_a == 0 {
        return Ok(vec![MeasurementRecord { outcome: Bitstring::empty(), probability: 1.0, post_state: joint }]);
    }
    enumerate_branches(&joint, &ancillas(state.n_qubits(), n_a))
}

/// Pushes `state` through steps `from, from - 1, ..., to`, where
/// `circuits[k - 1]` is the step-`k` ansatz. Outcomes for step `k` come from
/// `stream(seed, labels ++ [k])`.
pub fn propagate(
    circuits: &[Circuit],
    n_a: usize,
    state: Ket,
    from: usize,
    to: usize,
    seed: u64,
    labels: &[u64],
) -> Result<Ket> {
    let mut s = state;
    let mut l = labels.to_vec();
    l.push(0);
    for k in (to..=from).rev() {
        *l.last_mut().unwrap() = k as u64;
        s = denoise_with(&s, &circuits[k - 1], n_a, k, &mut stream(seed, &l))?.state;
    }
    Ok(s)
}

/// Generated ensembles `S~_K, ..., S~_0`, indexed by `k`.
#[derive(Clone, Debug)]
pub struct Generation {
    pub ensembles: Vec<StateEnsemble>,
}

impl Generation {
    pub fn at(&self, k: usize) -> &StateEnsemble {
        &self.ensembles[k]
    }

    pub fn output(&self) -> &StateEnsemble {
        &self.ensembles[0]
    }
}

/// Haar-product inputs on the data qubits, one stream per sample.
pub fn product_inputs(n_m: usize, n_samples: usize, seed: u64, labels: &[u64]) -> Vec<Ket> {
    (0..n_samples)
        .into_par_iter()
        .map(|j| {
            let mut l = labels.to_vec();
            l.push(j as u64);
            haar_product_state(n_m, &mut stream(seed, &l))
        })
        .collect()
}

/// Runs the full backward process from fresh Haar-product states.
pub fn generate(stack: &DenoiserStack, n_samples: usize, seed: u64) -> Result<Generation> {
    stack.validate()?;
    if n_samples == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let k_steps = stack.k_steps();
    let circuits = (1..=k_steps).map(|k| stack.circuit(k)).collect::<Result<Vec<_>>>()?;
    let inputs = product_inputs(stack.n_m, n_samples, seed, &[tag::SAMPLE]);
    let trajectories = inputs
        .into_par_iter()
        .enumerate()
        .map(|(j, input)| {
            let mut traj = vec![input];
            for k in (1..=k_steps).rev() {
                let mut rng = stream(seed, &[tag::SAMPLE, j as u64, k as u64]);
                let rec = denoise_with(traj.last().unwrap(), &circuits[k - 1], stack.n_a, k, &mut rng)?;
                traj.push(rec.state);
            }
            Ok(traj)
        })
        .collect::<Result<Vec<_>>>()?;
    // traj[i] holds S~_{K - i}
    let ensembles = (0..=k_steps)
        .map(|k| StateEnsemble::uniform(trajectories.iter().map(|t| t[k_steps - k].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Generation { ensembles })
}
