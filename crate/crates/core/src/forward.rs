//! Forward diffusion: chaotic evolution with complement measurement (CTED,
//! RTED) and random scrambling circuits (RUCD).
//!
//! Every sample draws from its own stream derived from `(seed, sample, step)`,
//! so results do not depend on thread scheduling. Noise draws come from a
//! separate stream; a noiseless config consumes none of them.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{evolve, ChaoticHamiltonian};
use crate::circuit::{Circuit, Op};
use crate::noisemod::{apply_dephasing, dephasing_prob_after_steps, run_with_pauli_noise, NoiseConfig};
use crate::qstate::{enumerate_branches, measure_subset, sample_index, tensor, Bitstring, Ket, Pauli, StateEnsemble};
use crate::rngs::{stream, tag};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Cted,
    Rted,
    Rucd,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cted => "CTED",
            Scheme::Rted => "RTED",
            Scheme::Rucd => "RUCD",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CTED" => Ok(Scheme::Cted),
            "RTED" => Ok(Scheme::Rted),
            "RUCD" => Ok(Scheme::Rucd),
            _ => Err(Error::InvalidArgument(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Angle scale of RUCD layer `l`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// `alpha = l^2 / 100`; each layer keeps its own scale.
    #[default]
    Quadratic,
    Fixed(f64),
}

impl AlphaSchedule {
    pub fn alpha(&self, layer: usize) -> f64 {
        match *self {
            AlphaSchedule::Quadratic => (layer * layer) as f64 / 100.0,
            AlphaSchedule::Fixed(a) => a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub scheme: Scheme,
    pub n_m: usize,
    /// Complement qubits; 0 for RUCD.
    pub n_f: usize,
    pub k_steps: usize,
    /// Evolution time per step; ignored by RUCD.
    pub dt: f64,
    /// Distribution over complement initial bitstrings.
    pub complement_dist: Vec<f64>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub alpha: AlphaSchedule,
}

impl DiffusionConfig {
    /// Chaotic-evolution config with a uniform complement distribution.
    pub fn chaotic(scheme: Scheme, n_m: usize, n_f: usize, k_steps: usize, dt: f64) -> Self {
        Self {
            scheme,
            n_m,
            n_f,
            k_steps,
            dt,
            complement_dist: vec![1.0 / (1u64 << n_f) as f64; 1 << n_f],
            noise: None,
            alpha: AlphaSchedule::Quadratic,
        }
    }

    pub fn rucd(n_m: usize, k_steps: usize) -> Self {
        Self {
            scheme: Scheme::Rucd,
            n_m,
            n_f: 0,
            k_steps,
            dt: 0.0,
            complement_dist: vec![1.0],
            noise: None,
            alpha: AlphaSchedule::Quadratic,
        }
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.k_steps == 0 {
            return bad("diffusion needs at least one step".into());
        }
        if self.n_m == 0 {
            return bad("diffusion needs at least one data qubit".into());
        }
        match self.scheme {
            Scheme::Rucd if self.n_f != 0 => return bad("RUCD takes no complement qubits".into()),
            Scheme::Cted | Scheme::Rted => {
                if self.n_f == 0 {
                    return bad(format!("{} needs at least one complement qubit", self.scheme));
                }
                if !(self.dt >= 0.0) || !self.dt.is_finite() {
                    return bad(format!("dt must be finite and >= 0, got {}", self.dt));
                }
                if self.complement_dist.len() != 1 << self.n_f {
                    return bad(format!(
                        "complement distribution has {} entries, expected {}",
                        self.complement_dist.len(),
                        1usize << self.n_f
                    ));
                }
                if self.complement_dist.iter().any(|q| !(*q >= 0.0)) {
                    return bad("complement distribution has negative entries".into());
                }
                let total: f64 = self.complement_dist.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("complement distribution sums to {total}"));
                }
            }
            Scheme::Rucd => {}
        }
        if let AlphaSchedule::Fixed(a) = self.alpha {
            if !(a >= 0.0) {
                return bad(format!("alpha must be >= 0, got {a}"));
            }
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }

    fn noise(&self) -> NoiseConfig {
        self.noise.unwrap_or_default()
    }

    fn measured(&self) -> Vec<usize> {
        (self.n_m..self.n_m + self.n_f).collect()
    }
}

#[derive(Clone, Debug)]
pub struct DiffusionStepRecord {
    pub step: usize,
    pub complement_init: Bitstring,
    pub outcome: Bitstring,
    pub born_prob: f64,
    pub state: Ket,
}

/// Diffused ensemble `S_k` with one record per sample (none for RUCD).
#[derive(Clone, Debug)]
pub struct ForwardStep {
    pub k: usize,
    pub ensemble: StateEnsemble,
    pub records: Vec<DiffusionStepRecord>,
}

impl ForwardStep {
    /// The same states weighted by `q(x) p_x(z)`.
    pub fn enhanced_ensemble(&self, complement_dist: &[f64]) -> Result<StateEnsemble> {
        if self.records.is_empty() {
            return Ok(self.ensemble.clone());
        }
        StateEnsemble::from_raw_weights(
            self.records.iter().map(|r| complement_dist[r.complement_init.value as usize] * r.born_prob).collect(),
            self.records.iter().map(|r| r.state.clone()).collect(),
        )
    }
}

fn check_hamiltonian(cfg: &DiffusionConfig, h: &ChaoticHamiltonian) -> Result<()> {
    if h.n_sites() != cfg.n_m + cfg.n_f {
        return Err(Error::DimensionMismatch { expected: cfg.n_m + cfg.n_f, got: h.n_sites() });
    }
    Ok(())
}

fn check_input(s0: &StateEnsemble, cfg: &DiffusionConfig, scheme: Scheme) -> Result<()> {
    cfg.validate()?;
    if cfg.scheme != scheme {
        return Err(Error::InvalidArgument(format!("config is for {}, not {scheme}", cfg.scheme)));
    }
    if s0.n_qubits() != cfg.n_m {
        return Err(Error::DimensionMismatch { expected: cfg.n_m, got: s0.n_qubits() });
    }
    Ok(())
}

/// Attach a sampled complement, evolve for `t`, dephase, measure.
#[allow(clippy::too_many_arguments)]
fn chaotic_shot(
    psi: &Ket,
    t: f64,
    flip_prob: f64,
    cfg: &DiffusionConfig,
    h: &ChaoticHamiltonian,
    step: usize,
    rng: &mut impl Rng,
    noise_rng: &mut impl Rng,
) -> Result<DiffusionStepRecord> {
    let x = sample_index(&cfg.complement_dist, rng);
    let joint = tensor(psi, &Ket::basis(cfg.n_f, x));
    let mut evolved = evolve(&joint, h, t)?;
    apply_dephasing(&mut evolved, flip_prob, noise_rng);
    let rec = measure_subset(&evolved, &cfg.measured(), rng)?;
    Ok(DiffusionStepRecord {
        step,
        complement_init: Bitstring::new(x as u64, cfg.n_f as u32),
        outcome: rec.outcome,
        born_prob: rec.probability,
        state: rec.post_state,
    })
}

fn collect_step(k: usize, records: Vec<DiffusionStepRecord>) -> Result<ForwardStep> {
    let ensemble = StateEnsemble::uniform(records.iter().map(|r| r.state.clone()).collect())?;
    Ok(ForwardStep { k, ensemble, records })
}

/// Cumulative evolution: step `k` evolves each original sample for `k dt`.
pub fn cted_diffuse(
    s0: &StateEnsemble,
    cfg: &DiffusionConfig,
    h: &ChaoticHamiltonian,
    seed: u64,
) -> Result<Vec<ForwardStep>> {
    check_input(s0, cfg, Scheme::Cted)?;
    check_hamiltonian(cfg, h)?;
    let p2 = cfg.noise().p2;
    (1..=cfg.k_steps)
        .map(|k| {
            let flip = dephasing_prob_after_steps(p2, k as u32);
            let records = s0
                .states()
                .par_iter()
                .enumerate()
                .map(|(j, psi)| {
                    let mut rng = stream(seed, &[tag::FORWARD, j as u64, k as u64]);
                    let mut noise_rng = stream(seed, &[tag::NOISE, j as u64, k as u64]);
                    chaotic_shot(psi, k as f64 * cfg.dt, flip, cfg, h, k, &mut rng, &mut noise_rng)
                })
                .collect::<Result<Vec<_>>>()?;
            collect_step(k, records)
        })
        .collect()
}

/// One repeated-evolution step from the step `k - 1` ensemble.
pub fn rted_step(
    prev: &StateEnsemble,
    k: usize,
    cfg: &DiffusionConfig,
    h: &ChaoticHamiltonian,
    seed: u64,
) -> Result<ForwardStep> {
    check_input(prev, cfg, Scheme::Rted)?;
    check_hamiltonian(cfg, h)?;
    let p2 = cfg.noise().p2;
    let records = prev
        .states()
        .par_iter()
        .enumerate()
        .map(|(j, psi)| {
            let mut rng = stream(seed, &[tag::FORWARD, j as u64, k as u64]);
            let mut noise_rng = stream(seed, &[tag::NOISE, j as u64, k as u64]);
            chaotic_shot(psi, cfg.dt, p2, cfg, h, k, &mut rng, &mut noise_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    collect_step(k, records)
}

/// Repeated evolution: every step evolves the previous post-state for `dt`
/// with a fresh complement.
pub fn rted_diffuse(
    s0: &StateEnsemble,
    cfg: &DiffusionConfig,
    h: &ChaoticHamiltonian,
    seed: u64,
) -> Result<Vec<ForwardStep>> {
    check_input(s0, cfg, Scheme::Rted)?;
    let mut out: Vec<ForwardStep> = Vec::with_capacity(cfg.k_steps);
    for k in 1..=cfg.k_steps {
        let prev = out.last().map_or(s0, |s| &s.ensemble);
        let step = rted_step(prev, k, cfg, h, seed)?;
        out.push(step);
    }
    Ok(out)
}

/// Angles of one RUCD layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RucdLayerParams {
    pub layer: usize,
    /// Three angles per qubit, applied as Z, Y, Z.
    pub g: Vec<[f64; 3]>,
    pub s: f64,
    pub alpha: f64,
}

impl RucdLayerParams {
    pub fn sample<R: Rng + ?Sized>(layer: usize, n: usize, alpha: f64, rng: &mut R) -> Self {
        let half = alpha * PI / 8.0;
        let mut draw = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let g = (0..n).map(|_| [draw(-half, half), draw(-half, half), draw(-half, half)]).collect();
        let s = draw(0.4 * alpha, 0.6 * alpha);
        Self { layer, g, s, alpha }
    }

    /// Per-qubit `Z Y Z` rotations followed by `exp(-i s ZZ / (2 sqrt n))` on all pairs.
    pub fn circuit(&self) -> Circuit {
        let n = self.g.len();
        let mut c = Circuit::new(n);
        for (q, angles) in self.g.iter().enumerate() {
            for (axis, &angle) in [Pauli::Z, Pauli::Y, Pauli::Z].into_iter().zip(angles) {
                c.push(Op::Rot { axis, qubit: q, angle, param: None });
            }
        }
        c.push(Op::ZzAllPairs { angle: self.s / (2.0 * (n as f64).sqrt()) });
        c
    }
}

/// Random-circuit diffusion; `S_k` carries layers `1..=k`.
pub fn rucd_diffuse(s0: &StateEnsemble, cfg: &DiffusionConfig, seed: u64) -> Result<Vec<ForwardStep>> {
    check_input(s0, cfg, Scheme::Rucd)?;
    let p1 = cfg.noise().p1;
    let n = cfg.n_m;
    let trajectories = s0
        .states()
        .par_iter()
        .enumerate()
        .map(|(j, psi)| {
            let mut state = psi.clone();
            let mut noise_rng = stream(seed, &[tag::NOISE, j as u64]);
            (1..=cfg.k_steps)
                .map(|l| {
                    let mut rng = stream(seed, &[tag::FORWARD, j as u64, l as u64]);
                    let layer = RucdLayerParams::sample(l, n, cfg.alpha.alpha(l), &mut rng);
                    run_with_pauli_noise(&layer.circuit(), &mut state, p1, &mut noise_rng)?;
                    Ok(state.clone())
                })
                .collect::<Result<Vec<Ket>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    (0..cfg.k_steps)
        .map(|i| {
            let ensemble = StateEnsemble::uniform(trajectories.iter().map(|t| t[i].clone()).collect())?;
            Ok(ForwardStep { k: i + 1, ensemble, records: Vec::new() })
        })
        .collect()
}

/// Dispatches on `cfg.scheme`. The Hamiltonian is required for CTED and RTED.
pub fn diffuse(
    s0: &StateEnsemble,
    cfg: &DiffusionConfig,
    h: Option<&ChaoticHamiltonian>,
    seed: u64,
) -> Result<Vec<ForwardStep>> {
    let need_h = || h.ok_or_else(|| Error::InvalidArgument(format!("{} needs a Hamiltonian", cfg.scheme)));
    match cfg.scheme {
        Scheme::Cted => cted_diffuse(s0, cfg, need_h()?, seed),
        Scheme::Rted => rted_diffuse(s0, cfg, need_h()?, seed),
        Scheme::Rucd => rucd_diffuse(s0, cfg, seed),
    }
}

/// Exact classically-enhanced projected ensemble of a single state after
/// evolving for `t`: every `(x, z)` branch weighted by `q(x) p_x(z)`.
pub fn projected_ensemble(psi: &Ket, cfg: &DiffusionConfig, h: &ChaoticHamiltonian, t: f64) -> Result<StateEnsemble> {
    cfg.validate()?;
    check_hamiltonian(cfg, h)?;
    let mut weights = Vec::new();
    let mut states = Vec::new();
    for (x, &q) in cfg.complement_dist.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let evolved = evolve(&tensor(psi, &Ket::basis(cfg.n_f, x)), h, t)?;
        for b in enumerate_branches(&evolved, &cfg.measured())? {
            weights.push(q * b.probability);
            states.push(b.post_state);
        }
    }
    StateEnsemble::from_raw_weights(weights, states)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub tau_u: f64,
    pub tau_c: f64,
    pub tau_r: f64,
    pub n_samples: u64,
    pub k_steps: u64,
}

/// Distinct unitaries needed and total execution time.
pub fn execution_time(cm: &CostModel, scheme: Scheme) -> (u64, f64) {
    let (n, k) = (cm.n_samples, cm.k_steps);
    let shots = (n * k * (k + 1) / 2) as f64;
    match scheme {
        Scheme::Rucd => (n * k, cm.tau_u * shots),
        Scheme::Cted => (k, cm.tau_c * shots),
        Scheme::Rted => (1, cm.tau_r * shots),
    }
}
