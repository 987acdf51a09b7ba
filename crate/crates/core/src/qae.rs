//! Quantum autoencoder for latent-space diffusion.
//!
//! Latent qubits come first; the trailing `n_total - n_latent` trash qubits
//! are driven toward `|0...0>`. Encoding post-selects the trash register on
//! `|0...0>` and decoding runs the exact inverse circuit.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Op};
use crate::qstate::{norm_sqr, same_qubits, tensor, Ket, Pauli, StateEnsemble};
use crate::train::{Adam, AdamParams};
use crate::{Error, Result};

pub const DEFAULT_DEPTH: usize = 20;
pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_EPOCHS: usize = 2000;

/// Trash projections below this probability are rejected by [`encode`].
pub const COMPRESSIBLE_MIN_PROB: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaeModel {
    pub n_total: usize,
    pub n_latent: usize,
    pub depth: usize,
    /// `params[layer * n_total + qubit]`.
    pub params: Vec<f64>,
}

impl QaeModel {
    pub fn zeros(n_total: usize, n_latent: usize, depth: usize) -> Result<Self> {
        let m = Self { n_total, n_latent, depth, params: vec![0.0; n_total * depth] };
        m.validate()?;
        Ok(m)
    }

    /// Angles uniform in `[-pi, pi]`.
    pub fn random<R: Rng + ?Sized>(n_total: usize, n_latent: usize, depth: usize, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(n_total, n_latent, depth)?;
        m.params.iter_mut().for_each(|p| *p = rng.random_range(-PI..=PI));
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_latent == 0 || self.n_latent >= self.n_total {
            return Err(Error::InvalidArgument(format!(
                "latent size {} must be in 1..{}",
                self.n_latent, self.n_total
            )));
        }
        if self.params.len() != self.n_total * self.depth {
            return Err(Error::DimensionMismatch { expected: self.n_total * self.depth, got: self.params.len() });
        }
        Ok(())
    }

    pub fn n_trash(&self) -> usize {
        self.n_total - self.n_latent
    }
}

/// Per layer: `RY` on every qubit, then CNOTs `q -> q+1` around the ring.
pub fn encoder_circuit(model: &QaeModel) -> Circuit {
    let n = model.n_total;
    let mut c = Circuit::new(n);
    for l in 0..model.depth {
        for q in 0..n {
            let p = l * n + q;
            c.push(Op::Rot { axis: Pauli::Y, qubit: q, angle: model.params[p], param: Some(p) });
        }
        for q in 0..n {
            c.push(Op::Cnot { control: q, target: (q + 1) % n });
        }
    }
    c
}

fn check_batch(model: &QaeModel, batch: &StateEnsemble) -> Result<()> {
    model.validate()?;
    same_qubits(model.n_total, batch.n_qubits())
}

/// Probability that the trash register reads `0...0` in an encoded vector.
fn trash_zero_prob(amps: &[C64], n_trash: usize) -> f64 {
    amps.iter().step_by(1 << n_trash).map(|a| a.norm_sqr()).sum()
}

/// `1 - mean_b P_b(trash = 0...0)` using the batch weights.
pub fn trash_loss(model: &QaeModel, batch: &StateEnsemble) -> Result<f64> {
    check_batch(model, batch)?;
    let c = encoder_circuit(model);
    let nt = model.n_trash();
    let kept: f64 = batch
        .iter()
        .map(|(w, s)| {
            let mut amps = s.amplitudes().to_vec();
            c.apply_amps(&mut amps);
            w * trash_zero_prob(&amps, nt)
        })
        .sum();
    Ok(1.0 - kept)
}

/// Loss and adjoint gradient with respect to the encoder angles.
pub fn trash_loss_and_gradient(model: &QaeModel, batch: &StateEnsemble) -> Result<(f64, Vec<f64>)> {
    check_batch(model, batch)?;
    let c = encoder_circuit(model);
    let nt = model.n_trash();
    let parts: Vec<(f64, Vec<f64>)> = batch
        .states()
        .par_iter()
        .zip(batch.weights())
        .map(|(s, &w)| {
            let mut amps = s.amplitudes().to_vec();
            c.apply_amps(&mut amps);
            let p = trash_zero_prob(&amps, nt);
            // d(-w P)/d conj(out): -w out on the trash-zero entries
            let cot: Vec<C64> = amps
                .iter()
                .enumerate()
                .map(|(i, a)| if i & ((1 << nt) - 1) == 0 { -a * w } else { C64::new(0.0, 0.0) })
                .collect();
            let mut g = vec![0.0; model.params.len()];
            c.accumulate_gradient(&amps, &cot, &mut g);
            (w * p, g)
        })
        .collect();
    let mut kept = 0.0;
    let mut grad = vec![0.0; model.params.len()];
    for (p, g) in parts {
        kept += p;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((1.0 - kept, grad))
}

/// Full-batch Adam on the trash loss. Returns the model and the loss before
/// each update.
pub fn train_qae(
    model: &QaeModel,
    data: &StateEnsemble,
    epochs: usize,
    learning_rate: f64,
) -> Result<(QaeModel, Vec<f64>)> {
    check_batch(model, data)?;
    if !(learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    let mut m = model.clone();
    let mut adam = Adam::new(AdamParams::with_lr(learning_rate), m.params.len());
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grad) = trash_loss_and_gradient(&m, data)?;
        let bad = grad.iter().position(|g| !g.is_finite());
        if !loss.is_finite() || bad.is_some() {
            return Err(Error::NonFinite { cycle: 0, epoch, param: bad });
        }
        adam.step(&mut m.params, &grad);
        curve.push(loss);
    }
    Ok((m, curve))
}

/// Encoder image post-selected on trash `|0...0>`, as a latent state.
pub fn encode(model: &QaeModel, state: &Ket) -> Result<Ket> {
    model.validate()?;
    same_qubits(model.n_total, state.n_qubits())?;
    let mut amps = state.amplitudes().to_vec();
    encoder_circuit(model).apply_amps(&mut amps);
    let latent: Vec<C64> = amps.into_iter().step_by(1 << model.n_trash()).collect();
    let prob = norm_sqr(&latent);
    if prob < COMPRESSIBLE_MIN_PROB {
        return Err(Error::NotCompressible { prob });
    }
    Ket::normalized(model.n_latent, latent)
}

/// Attaches trash `|0...0>` and runs the inverse encoder.
pub fn decode(model: &QaeModel, latent: &Ket) -> Result<Ket> {
    model.validate()?;
    same_qubits(model.n_latent, latent.n_qubits())?;
    let mut full = tensor(latent, &Ket::zero(model.n_trash()));
    encoder_circuit(model).inverse().apply(&mut full)?;
    Ok(full)
}

pub fn encode_ensemble(model: &QaeModel, e: &StateEnsemble) -> Result<StateEnsemble> {
    let states = e.states().iter().map(|s| encode(model, s)).collect::<Result<Vec<_>>>()?;
    StateEnsemble::weighted(e.weights().to_vec(), states)
}

pub fn decode_ensemble(model: &QaeModel, e: &StateEnsemble) -> Result<StateEnsemble> {
    let states = e.states().iter().map(|s| decode(model, s)).collect::<Result<Vec<_>>>()?;
    StateEnsemble::weighted(e.weights().to_vec(), states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity, gates, haar_state};
    use crate::rngs;
    use nalgebra::DMatrix;

    #[test]
    fn zero_angles_give_cnot_ring() {
        let m = QaeModel::zeros(2, 1, 1).unwrap();
        let u = encoder_circuit(&m).to_matrix();
        // CNOT(0->1) then CNOT(1->0)
        let cnot10 = DMatrix::from_fn(4, 4, |r, c| {
            let swap = |i: usize| [0, 3, 2, 1][i];
            C64::from(if r == swap(c) { 1.0 } else { 0.0 })
        });
        let want = cnot10 * gates::cnot().matrix();
        assert!((u - want).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn encoder_inverse_is_identity() {
        let m = QaeModel::random(3, 1, 3, &mut rngs::stream(1, &[])).unwrap();
        let c = encoder_circuit(&m);
        let prod = c.inverse().to_matrix() * c.to_matrix();
        assert!((prod - DMatrix::identity(8, 8)).iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn trash_loss_examples() {
        let mut rng = rngs::stream(2, &[]);
        let phi = haar_state(2, &mut rng);
        let m = QaeModel::zeros(3, 2, 0).unwrap();
        let e = StateEnsemble::uniform(vec![tensor(&phi, &Ket::zero(1))]).unwrap();
        assert!(trash_loss(&m, &e).unwrap().abs() < 1e-15);
        // trash qubits in |+>|+>: uniform marginal on 2 trash qubits
        let m = QaeModel::zeros(3, 1, 0).unwrap();
        let plus2 = tensor(&Ket::plus(), &Ket::plus());
        let e = StateEnsemble::uniform(vec![tensor(&Ket::zero(1), &plus2)]).unwrap();
        assert!((trash_loss(&m, &e).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rngs::stream(3, &[]);
        let m = QaeModel::random(3, 1, 2, &mut rng).unwrap();
        let e = StateEnsemble::uniform((0..4).map(|_| haar_state(3, &mut rng)).collect()).unwrap();
        let (_, g) = trash_loss_and_gradient(&m, &e).unwrap();
        for p in 0..m.params.len() {
            let h = 1e-5;
            let mut up = m.clone();
            up.params[p] += h;
            let mut dn = m.clone();
            dn.params[p] -= h;
            let fd = (trash_loss(&up, &e).unwrap() - trash_loss(&dn, &e).unwrap()) / (2.0 * h);
            assert!((fd - g[p]).abs() <= 1e-5 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let mut rng = rngs::stream(4, &[]);
        let m = QaeModel::random(2, 1, 1, &mut rng).unwrap();
        let e = StateEnsemble::uniform(vec![haar_state(2, &mut rng)]).unwrap();
        let (out, curve) = train_qae(&m, &e, 0, 0.01).unwrap();
        assert_eq!(out, m);
        assert!(curve.is_empty());
    }

    #[test]
    fn depth_zero_round_trip() {
        let phi = haar_state(2, &mut rngs::stream(5, &[]));
        let m = QaeModel::zeros(4, 2, 0).unwrap();
        let full = tensor(&phi, &Ket::zero(2));
        let lat = encode(&m, &full).unwrap();
        assert_eq!(lat.amplitudes(), phi.amplitudes());
        assert!((fidelity(&decode(&m, &lat).unwrap(), &full).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn incompressible_state_is_rejected() {
        let m = QaeModel::zeros(2, 1, 0).unwrap();
        assert!(matches!(encode(&m, &Ket::basis(2, 1)), Err(Error::NotCompressible { .. })));
        assert!(QaeModel::zeros(2, 2, 1).is_err());
    }
}
