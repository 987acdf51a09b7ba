//! Dataset generators and the experiment bundle format.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::denoiser::DenoiserStack;
use crate::qae::{decode, QaeModel};
use crate::qstate::{kernels, sample_index, Ket, Pauli, StateEnsemble};
use crate::train::TrainReport;
use crate::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 0.05;

/// Mixture of `|0...0>`, `|1...1>` and GHZ, each member perturbed by small
/// random rotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub n_m: usize,
    pub weights: [f64; 3],
    /// Standard deviation of every perturbation angle, in radians.
    pub sigma: f64,
}

impl ClusterSpec {
    pub fn new(n_m: usize) -> Self {
        Self { n_m, weights: [0.4, 0.4, 0.2], sigma: DEFAULT_SIGMA }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_m == 0 {
            return Err(Error::InvalidArgument("cluster data needs at least one qubit".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("invalid cluster weights {:?}", self.weights)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn center(&self, cluster: usize) -> Ket {
        match cluster {
            0 => Ket::zero(self.n_m),
            1 => Ket::basis(self.n_m, (1 << self.n_m) - 1),
            _ => Ket::ghz(self.n_m),
        }
    }
}

/// Rotates every qubit about X, Y and Z by independent `N(0, sigma^2)` angles.
pub fn perturb<R: Rng + ?Sized>(state: &mut Ket, sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let n = state.n_qubits();
    for q in 0..n {
        for axis in Pauli::ALL {
            kernels::rotate(state.amplitudes_mut(), n, q, axis, normal.sample(rng));
        }
    }
}

/// Samples with their cluster labels.
pub fn sample_multicluster_labeled<R: Rng + ?Sized>(
    spec: &ClusterSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<(StateEnsemble, Vec<usize>)> {
    spec.validate()?;
    if n_samples == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut labels = Vec::with_capacity(n_samples);
    let mut states = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let c = sample_index(&spec.weights, rng);
        let mut s = spec.center(c);
        perturb(&mut s, spec.sigma, rng);
        labels.push(c);
        states.push(s);
    }
    Ok((StateEnsemble::uniform(states)?, labels))
}

pub fn sample_multicluster<R: Rng + ?Sized>(
    spec: &ClusterSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<StateEnsemble> {
    Ok(sample_multicluster_labeled(spec, n_samples, rng)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircularSpec {
    pub n_m: usize,
}

/// `cos(beta/2)|0...0> + sin(beta/2)|1...1>`.
pub fn circular_state(n_m: usize, beta: f64) -> Ket {
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n_m];
    amps[0] = C64::new((beta / 2.0).cos(), 0.0);
    amps[(1 << n_m) - 1] = C64::new((beta / 2.0).sin(), 0.0);
    Ket::normalized(n_m, amps).expect("unit vector")
}

/// `beta` uniform on `[0, 2 pi)`.
pub fn sample_circular<R: Rng + ?Sized>(spec: &CircularSpec, n_samples: usize, rng: &mut R) -> Result<StateEnsemble> {
    if spec.n_m == 0 {
        return Err(Error::InvalidArgument("circular data needs at least one qubit".into()));
    }
    if n_samples == 0 {
        return Err(Error::EmptyEnsemble);
    }
    StateEnsemble::uniform((0..n_samples).map(|_| circular_state(spec.n_m, rng.random_range(0.0..2.0 * PI))).collect())
}

/// Latent states padded with trash `|0...0>` and scrambled by the inverse of
/// a fixed encoder, so that encoder recovers them exactly.
pub fn embed_compressible(latents: &StateEnsemble, scrambler: &QaeModel) -> Result<StateEnsemble> {
    let states = latents.states().iter().map(|s| decode(scrambler, s)).collect::<Result<Vec<_>>>()?;
    StateEnsemble::weighted(latents.weights().to_vec(), states)
}

pub const BUNDLE_VERSION: &str = "1.0";

/// Ensemble with amplitudes stored as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub n_qubits: usize,
    pub weights: Vec<f64>,
    pub states: Vec<Vec<[f64; 2]>>,
}

/// Loaded amplitudes may deviate from unit norm by at most this much.
pub const LOAD_NORM_TOL: f64 = 1e-8;

impl EnsembleRecord {
    pub fn from_ensemble(e: &StateEnsemble) -> Self {
        Self {
            n_qubits: e.n_qubits(),
            weights: e.weights().to_vec(),
            states: e.states().iter().map(|s| s.amplitudes().iter().map(|a| [a.re, a.im]).collect()).collect(),
        }
    }

    pub fn to_ensemble(&self) -> Result<StateEnsemble> {
        if self.states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let states = self
            .states
            .iter()
            .map(|amps| {
                let v: Vec<C64> = amps.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                if v.len() != 1 << self.n_qubits {
                    return Err(Error::DimensionMismatch { expected: 1 << self.n_qubits, got: v.len() });
                }
                let norm_sqr = crate::qstate::norm_sqr(&v);
                if !((norm_sqr - 1.0).abs() <= LOAD_NORM_TOL) {
                    return Err(Error::NotNormalized { norm_sqr });
                }
                Ok(Ket::from_raw(self.n_qubits, v))
            })
            .collect::<Result<Vec<_>>>()?;
        StateEnsemble::weighted(self.weights.clone(), states)
    }
}

/// Everything an experiment persists.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub version: String,
    #[serde(default)]
    pub ensembles: BTreeMap<String, EnsembleRecord>,
    #[serde(default)]
    pub denoiser: Option<DenoiserStack>,
    #[serde(default)]
    pub qae: Option<QaeModel>,
    #[serde(default)]
    pub train_report: Option<TrainReport>,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
}

impl Bundle {
    pub fn new() -> Self {
        Self { version: BUNDLE_VERSION.to_string(), ..Self::default() }
    }

    pub fn insert_ensemble(&mut self, name: &str, e: &StateEnsemble) {
        self.ensembles.insert(name.to_string(), EnsembleRecord::from_ensemble(e));
    }

    pub fn ensemble(&self, name: &str) -> Result<StateEnsemble> {
        self.ensembles.get(name).ok_or_else(|| Error::Bundle(format!("no ensemble named {name:?}")))?.to_ensemble()
    }
}

fn major(version: &str) -> Option<u64> {
    version.split('.').next()?.parse().ok()
}

pub fn save_bundle(path: impl AsRef<Path>, bundle: &Bundle) -> Result<()> {
    if let Some((name, _)) = bundle.ensembles.iter().find(|(_, e)| e.states.is_empty()) {
        return Err(Error::Bundle(format!("ensemble {name:?} is empty")));
    }
    let text = serde_json::to_string_pretty(bundle)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<Bundle> {
    let text = fs::read_to_string(path)?;
    let bundle: Bundle = serde_json::from_str(&text)?;
    if major(&bundle.version) != major(BUNDLE_VERSION) {
        return Err(Error::Bundle(format!(
            "unsupported bundle version {:?} (expected {BUNDLE_VERSION})",
            bundle.version
        )));
    }
    for (name, rec) in &bundle.ensembles {
        rec.to_ensemble().map_err(|e| Error::Bundle(format!("ensemble {name:?}: {e}")))?;
    }
    if let Some(stack) = &bundle.denoiser {
        stack.validate()?;
    }
    if let Some(model) = &bundle.qae {
        model.validate()?;
    }
    Ok(bundle)
}
