//! Chaotic quantum diffusion on dense statevectors.
//!
//! The crate covers the full generative pipeline:
//!
//! - [`qstate`]: kets, ensembles, gates and computational-basis measurement.
//! - [`chaos`]: the mixed-field Ising Hamiltonian and exact propagation.
//! - [`forward`]: CTED, RTED and RUCD forward diffusion plus the cost model.
//! - [`denoiser`]: hardware-efficient ansatz and measurement-enabled denoising.
//! - [`metrics`]: MMD, exact 1-Wasserstein, moment distances, SWAP-test estimator.
//! - [`train`]: layerwise Adam training with adjoint gradients.
//! - [`noisemod`]: Pauli and dephasing trajectory noise, noisy-POVM constructions.
//! - [`qae`]: quantum autoencoder for latent-space diffusion.
//! - [`data`]: dataset generators and the experiment bundle format.
//!
//! Qubit 0 is always the most significant bit of a basis index.

// Negated comparisons below deliberately reject NaN along with out-of-range
// values; index loops mirror the matrix formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chaos;
pub mod circuit;
pub mod data;
pub mod denoiser;
mod error;
pub mod forward;
pub mod metrics;
pub mod noisemod;
pub mod qae;
pub mod qstate;
pub mod rngs;
pub mod train;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use qstate::{Bitstring, Ket, MeasurementRecord, StateEnsemble};
