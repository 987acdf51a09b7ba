//! Gate sequences with optional parameter bindings and adjoint differentiation.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::qstate::{kernels, Ket, Pauli};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// `exp(-i angle P / 2)` on `qubit`; `param` names the trainable slot the
    /// angle was read from, if any.
    Rot {
        axis: Pauli,
        qubit: usize,
        angle: f64,
        param: Option<usize>,
    },
    /// CZ on every nearest-neighbour pair `(q, q+1)`.
    CzChain,
    Cnot {
        control: usize,
        target: usize,
    },
    /// `prod_{q1<q2} exp(-i angle Z_q1 Z_q2)` over all pairs.
    ZzAllPairs {
        angle: f64,
    },
    Pauli {
        qubit: usize,
        pauli: Pauli,
    },
}

impl Op {
    fn inverse(&self) -> Op {
        match *self {
            Op::Rot { axis, qubit, angle, .. } => Op::Rot { axis, qubit, angle: -angle, param: None },
            Op::ZzAllPairs { angle } => Op::ZzAllPairs { angle: -angle },
            ref other => other.clone(),
        }
    }

    pub(crate) fn apply(&self, amps: &mut [C64], n: usize) {
        match *self {
            Op::Rot { axis, qubit, angle, .. } => kernels::rotate(amps, n, qubit, axis, angle),
            Op::CzChain => {
                let pairs = (1usize << (n - 1)) - 1;
                for (i, a) in amps.iter_mut().enumerate() {
                    if (i & (i >> 1) & pairs).count_ones() & 1 == 1 {
                        *a = -*a;
                    }
                }
            }
            Op::Cnot { control, target } => kernels::cnot(amps, n, control, target),
            Op::ZzAllPairs { angle } => {
                // sum_{q1<q2} z1 z2 = ((n - 2w)^2 - n) / 2 with w the Hamming weight
                let phases: Vec<C64> = (0..=n)
                    .map(|w| {
                        let m = n as f64 - 2.0 * w as f64;
                        let zz = (m * m - n as f64) / 2.0;
                        C64::from_polar(1.0, -angle * zz)
                    })
                    .collect();
                for (i, a) in amps.iter_mut().enumerate() {
                    *a *= phases[i.count_ones() as usize];
                }
            }
            Op::Pauli { qubit, pauli } => kernels::pauli(amps, n, qubit, pauli),
        }
    }

    fn max_qubit(&self) -> Option<usize> {
        match *self {
            Op::Rot { qubit, .. } | Op::Pauli { qubit, .. } => Some(qubit),
            Op::Cnot { control, target } => Some(control.max(target)),
            Op::CzChain | Op::ZzAllPairs { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, ops: Vec::new() }
    }

    pub fn push(&mut self, op: Op) -> &mut Self {
        if let Some(q) = op.max_qubit() {
            assert!(q < self.n_qubits, "qubit {q} out of range");
        }
        if let Op::Cnot { control, target } = op {
            assert_ne!(control, target, "cnot needs distinct qubits");
        }
        self.ops.push(op);
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn apply(&self, state: &mut Ket) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: state.n_qubits() });
        }
        self.apply_amps(state.amplitudes_mut());
        Ok(())
    }

    pub(crate) fn apply_amps(&self, amps: &mut [C64]) {
        for op in &self.ops {
            op.apply(amps, self.n_qubits);
        }
    }

    /// The exact inverse: reversed order, negated angles.
    pub fn inverse(&self) -> Circuit {
        Circuit { n_qubits: self.n_qubits, ops: self.ops.iter().rev().map(Op::inverse).collect() }
    }

    /// Dense unitary, column `c` being the image of basis state `c`.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let d = 1 << self.n_qubits;
        let mut m = DMatrix::zeros(d, d);
        for c in 0..d {
            let mut col = Ket::basis(self.n_qubits, c);
            self.apply_amps(col.amplitudes_mut());
            for (r, a) in col.amplitudes().iter().enumerate() {
                m[(r, c)] = *a;
            }
        }
        m
    }

    /// Reverse-mode derivative of a real function `F` of the output state.
    ///
    /// `output` is the circuit image `U|psi>` and `cotangent` is `dF/d conj(output)`.
    /// Adds `dF/d theta_p` for every bound rotation into `grad[p]`.
    pub fn accumulate_gradient(&self, output: &[C64], cotangent: &[C64], grad: &mut [f64]) {
        let n = self.n_qubits;
        let mut psi = output.to_vec();
        let mut lam = cotangent.to_vec();
        let mut scratch = vec![C64::new(0.0, 0.0); psi.len()];
        for op in self.ops.iter().rev() {
            if let Op::Rot { axis, qubit, param: Some(p), .. } = *op {
                // dF = 2 Re <lam | (-i/2) P psi> d theta
                kernels::half_generator(&psi, n, qubit, axis, &mut scratch);
                let s = crate::qstate::inner(&lam, &scratch);
                grad[p] += 2.0 * s.re;
            }
            let inv = op.inverse();
            inv.apply(&mut psi, n);
            inv.apply(&mut lam, n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{apply_gate, gates, haar_state};
    use crate::rngs;

    #[test]
    fn inverse_composes_to_identity() {
        let mut c = Circuit::new(3);
        c.push(Op::Rot { axis: Pauli::X, qubit: 0, angle: 0.4, param: Some(0) })
            .push(Op::CzChain)
            .push(Op::Cnot { control: 2, target: 0 })
            .push(Op::ZzAllPairs { angle: 0.3 })
            .push(Op::Pauli { qubit: 1, pauli: Pauli::Y });
        let full = &c.inverse().to_matrix() * &c.to_matrix();
        let eye = DMatrix::<C64>::identity(8, 8);
        assert!((full - eye).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn cz_chain_matches_cz_gates() {
        let psi = haar_state(4, &mut rngs::stream(1, &[]));
        let mut expect = psi.clone();
        for q in 0..3 {
            expect = apply_gate(&expect, &gates::cz(), &[q, q + 1]).unwrap();
        }
        let mut got = psi.clone();
        let mut c = Circuit::new(4);
        c.push(Op::CzChain);
        c.apply(&mut got).unwrap();
        for (a, b) in got.amplitudes().iter().zip(expect.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn zz_all_pairs_matches_pairwise_phases() {
        let n = 3;
        let angle = 0.37;
        let mut c = Circuit::new(n);
        c.push(Op::ZzAllPairs { angle });
        let m = c.to_matrix();
        for i in 0..8usize {
            let z: Vec<f64> = (0..n).map(|q| if (i >> (n - 1 - q)) & 1 == 0 { 1.0 } else { -1.0 }).collect();
            let mut s = 0.0;
            for a in 0..n {
                for b in a + 1..n {
                    s += z[a] * z[b];
                }
            }
            assert!((m[(i, i)] - C64::from_polar(1.0, -angle * s)).norm() < 1e-14);
        }
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let mut rng = rngs::stream(2, &[]);
        let psi = haar_state(3, &mut rng);
        let target = haar_state(3, &mut rng);
        let angles = [0.3, -1.1, 2.0, 0.7];
        let build = |a: &[f64]| {
            let mut c = Circuit::new(3);
            c.push(Op::Rot { axis: Pauli::X, qubit: 0, angle: a[0], param: Some(0) })
                .push(Op::CzChain)
                .push(Op::Rot { axis: Pauli::Y, qubit: 2, angle: a[1], param: Some(1) })
                .push(Op::Cnot { control: 1, target: 2 })
                .push(Op::Rot { axis: Pauli::Z, qubit: 1, angle: a[2], param: Some(2) })
                .push(Op::Rot { axis: Pauli::Y, qubit: 0, angle: a[3], param: Some(3) });
            c
        };
        // F = |<target|U psi>|^2, dF/d conj(out) = target <target|out>
        let value = |a: &[f64]| {
            let mut s = psi.clone();
            build(a).apply(&mut s).unwrap();
            target.inner(&s).unwrap().norm_sqr()
        };
        let mut out = psi.clone();
        let c = build(&angles);
        c.apply(&mut out).unwrap();
        let ov = target.inner(&out).unwrap();
        let cot: Vec<C64> = target.amplitudes().iter().map(|t| t * ov).collect();
        let mut grad = vec![0.0; 4];
        c.accumulate_gradient(out.amplitudes(), &cot, &mut grad);
        for p in 0..4 {
            let h = 1e-6;
            let mut up = angles;
            up[p] += h;
            let mut dn = angles;
            dn[p] -= h;
            let fd = (value(&up) - value(&dn)) / (2.0 * h);
            assert!((fd - grad[p]).abs() < 1e-8, "param {p}: {fd} vs {}", grad[p]);
        }
    }
}
