//! Mixed-field Ising chain and exact propagation by eigendecomposition.
//!
//! `H = sum_j (hx X_j + hy Y_j) + J sum_j X_j X_{j+1}` with open boundaries.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::qstate::Ket;
use crate::{Error, Result};

/// Default largest chain accepted for dense diagonalization.
pub const DEFAULT_MAX_SITES: usize = 13;

/// Field and coupling strengths used for the chaotic regime.
pub const DEFAULT_HX: f64 = 0.8090;
pub const DEFAULT_HY: f64 = 0.9045;
pub const DEFAULT_J: f64 = 1.0;
pub const DEFAULT_DT: f64 = 0.02;

#[derive(Debug)]
pub struct ChaoticHamiltonian {
    n_sites: usize,
    hx: f64,
    hy: f64,
    j: f64,
    matrix: DMatrix<C64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

impl ChaoticHamiltonian {
    pub fn new(n_sites: usize, hx: f64, hy: f64, j: f64) -> Result<Self> {
        Self::with_cap(n_sites, hx, hy, j, DEFAULT_MAX_SITES)
    }

    pub fn with_cap(n_sites: usize, hx: f64, hy: f64, j: f64, max_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidArgument(format!("chain needs at least 2 sites, got {n_sites}")));
        }
        if n_sites > max_sites {
            return Err(Error::TooLarge { n: n_sites, cap: max_sites });
        }
        if ![hx, hy, j].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite Hamiltonian parameter".into()));
        }
        let matrix = dense_matrix(n_sites, hx, hy, j);
        let eig = SymmetricEigen::new(matrix.clone());
        Ok(Self {
            n_sites,
            hx,
            hy,
            j,
            matrix,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    /// Memoized construction keyed by `(n_sites, hx, hy, J)`.
    pub fn cached(n_sites: usize, hx: f64, hy: f64, j: f64) -> Result<Arc<Self>> {
        type Key = (usize, u64, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<ChaoticHamiltonian>>>> = OnceLock::new();
        let key = (n_sites, hx.to_bits(), hy.to_bits(), j.to_bits());
        let cache = CACHE.get_or_init(Default::default);
        if let Some(h) = cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(h));
        }
        // diagonalize outside the lock; a racing duplicate is harmless
        let h = Arc::new(Self::new(n_sites, hx, hy, j)?);
        Ok(Arc::clone(cache.lock().unwrap().entry(key).or_insert(h)))
    }

    /// The chain with the chaotic-regime parameters.
    pub fn standard(n_sites: usize) -> Result<Arc<Self>> {
        Self::cached(n_sites, DEFAULT_HX, DEFAULT_HY, DEFAULT_J)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn params(&self) -> (f64, f64, f64) {
        (self.hx, self.hy, self.j)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// `<psi|H|psi>`.
    pub fn energy(&self, state: &Ket) -> Result<f64> {
        self.check(state)?;
        let v = DVector::from_column_slice(state.amplitudes());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }

    fn check(&self, state: &Ket) -> Result<()> {
        if state.n_qubits() != self.n_sites {
            return Err(Error::DimensionMismatch { expected: self.n_sites, got: state.n_qubits() });
        }
        Ok(())
    }

    /// Dense propagator `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let v = &self.eigenvectors;
        let phases = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t)),
        );
        let mut scaled = v.clone();
        for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *p;
        }
        scaled * v.adjoint()
    }
}

fn dense_matrix(n: usize, hx: f64, hy: f64, j: f64) -> DMatrix<C64> {
    let d = 1usize << n;
    let mut h = DMatrix::<C64>::zeros(d, d);
    let bit = |q: usize| 1usize << (n - 1 - q);
    for col in 0..d {
        for q in 0..n {
            let b = bit(q);
            let row = col ^ b;
            // X|b> = |1-b>, Y|0> = i|1>, Y|1> = -i|0>
            let y = if col & b == 0 { C64::new(0.0, hy) } else { C64::new(0.0, -hy) };
            h[(row, col)] += C64::new(hx, 0.0) + y;
            if q + 1 < n {
                h[(col ^ b ^ bit(q + 1), col)] += C64::new(j, 0.0);
            }
        }
    }
    h
}

/// Time step and Hamiltonian for a diffusion run.
#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub hamiltonian: Arc<ChaoticHamiltonian>,
}

impl EvolutionConfig {
    pub fn new(dt: f64, hamiltonian: Arc<ChaoticHamiltonian>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { dt, hamiltonian })
    }
}

/// `exp(-i H t)|state>` via the cached spectrum.
pub fn evolve(state: &Ket, h: &ChaoticHamiltonian, t: f64) -> Result<Ket> {
    h.check(state)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("evolution time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let v = &h.eigenvectors;
    let psi = DVector::from_column_slice(state.amplitudes());
    let mut coeffs = v.ad_mul(&psi);
    for (c, &e) in coeffs.iter_mut().zip(&h.eigenvalues) {
        *c *= C64::from_polar(1.0, -e * t);
    }
    let out = v * coeffs;
    let mut ket = Ket::from_raw(h.n_sites, out.as_slice().to_vec());
    ket.renormalize();
    Ok(ket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity, haar_state, tensor};
    use crate::rngs;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn xx_coupling_spectrum() {
        let h = ChaoticHamiltonian::new(2, 0.0, 0.0, 1.0).unwrap();
        let ev = sorted(h.eigenvalues().to_vec());
        for (a, b) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_free_x_fields_spectrum() {
        let h = ChaoticHamiltonian::new(2, 1.0, 0.0, 0.0).unwrap();
        let ev = sorted(h.eigenvalues().to_vec());
        for (a, b) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_parameters_and_hermiticity() {
        let h = ChaoticHamiltonian::new(4, DEFAULT_HX, DEFAULT_HY, DEFAULT_J).unwrap();
        assert_eq!(h.params(), (0.8090, 0.9045, 1.0));
        let m = h.matrix();
        assert!((m - m.adjoint()).iter().all(|v| v.norm() < 1e-10));
        let v = h.eigenvectors();
        let eye = DMatrix::<C64>::identity(16, 16);
        assert!((v.adjoint() * v - &eye).iter().all(|x| x.norm() < 1e-8));
        let lam =
            DMatrix::from_diagonal(&DVector::from_iterator(16, h.eigenvalues().iter().map(|&e| C64::new(e, 0.0))));
        assert!((v * lam * v.adjoint() - m).iter().all(|x| x.norm() < 1e-8));
    }

    #[test]
    fn size_limits() {
        assert!(ChaoticHamiltonian::new(1, 1.0, 1.0, 1.0).is_err());
        assert!(matches!(ChaoticHamiltonian::with_cap(6, 1.0, 1.0, 1.0, 5), Err(Error::TooLarge { n: 6, cap: 5 })));
    }

    #[test]
    fn cache_returns_shared_instance() {
        let a = ChaoticHamiltonian::cached(3, 0.1, 0.2, 0.3).unwrap();
        let b = ChaoticHamiltonian::cached(3, 0.1, 0.2, 0.3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn zero_time_is_identity() {
        let h = ChaoticHamiltonian::standard(3).unwrap();
        let psi = haar_state(3, &mut rngs::stream(1, &[]));
        assert_eq!(evolve(&psi, &h, 0.0).unwrap(), psi);
        assert!(evolve(&psi, &h, -1.0).is_err());
        assert!(evolve(&Ket::zero(2), &h, 1.0).is_err());
    }

    #[test]
    fn single_field_rabi_rotation() {
        // H = h (X_0 + X_1): each site rotates independently,
        // <0|psi_q(t)> = cos(h t), <1|psi_q(t)> = -i sin(h t)
        let hfield = 0.7;
        let h = ChaoticHamiltonian::new(2, hfield, 0.0, 0.0).unwrap();
        for t in [0.1, 0.9, 2.3] {
            let out = evolve(&Ket::zero(2), &h, t).unwrap();
            let site = [C64::new((hfield * t).cos(), 0.0), C64::new(0.0, -(hfield * t).sin())];
            let expect = tensor(&Ket::new(1, site.to_vec()).unwrap(), &Ket::new(1, site.to_vec()).unwrap());
            for (a, b) in out.amplitudes().iter().zip(expect.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn composition_energy_and_unitarity() {
        let h = ChaoticHamiltonian::standard(4).unwrap();
        let mut rng = rngs::stream(2, &[]);
        let a = haar_state(4, &mut rng);
        let b = haar_state(4, &mut rng);
        let e0 = h.energy(&a).unwrap();
        for (t1, t2) in [(0.3, 0.5), (1.7, 0.02), (5.0, 3.0)] {
            let two = evolve(&evolve(&a, &h, t1).unwrap(), &h, t2).unwrap();
            let one = evolve(&a, &h, t1 + t2).unwrap();
            let diff = two.density_matrix() - one.density_matrix();
            assert!(diff.iter().all(|v| v.norm() < 1e-9));
            assert!((h.energy(&one).unwrap() - e0).abs() < 1e-8);
            let f0 = fidelity(&a, &b).unwrap();
            let f1 = fidelity(&one, &evolve(&b, &h, t1 + t2).unwrap()).unwrap();
            assert!((f0 - f1).abs() < 1e-9);
        }
    }

    #[test]
    fn propagator_matches_spectral_evolution() {
        let h = ChaoticHamiltonian::standard(3).unwrap();
        let psi = haar_state(3, &mut rngs::stream(3, &[]));
        let u = h.propagator(0.37);
        let direct = &u * DVector::from_column_slice(psi.amplitudes());
        let out = evolve(&psi, &h, 0.37).unwrap();
        for (a, b) in out.amplitudes().iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
