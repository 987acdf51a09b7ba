//! Experiment configuration file (JSON).

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use chaodiff::chaos::{DEFAULT_DT, DEFAULT_HX, DEFAULT_HY, DEFAULT_J, DEFAULT_MAX_SITES};
use chaodiff::data::DEFAULT_SIGMA;
use chaodiff::forward::{AlphaSchedule, DiffusionConfig, Scheme};
use chaodiff::metrics::DEFAULT_MAX_MOMENT;
use chaodiff::noisemod::NoiseConfig;
use chaodiff::qae;
use chaodiff::train::{BranchMode, CostKind, GradientMode, TrainConfig};
use serde::{Deserialize, Serialize};

/// Largest data + ancilla register the runner accepts.
pub const MAX_CIRCUIT_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub diffusion: DiffusionSection,
    #[serde(default)]
    pub denoiser: DenoiserSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub qae: QaeSection,
    #[serde(default = "default_ensemble_size")]
    pub n_generated: usize,
    #[serde(default = "default_ensemble_size")]
    pub n_heldout: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_ensemble_size() -> usize {
    200
}

fn default_trials() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Multicluster,
    Circular,
    /// Latent multi-cluster states scrambled by a hidden encoder.
    Compressible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Data qubits (the full register for compressible data).
    pub n_m: usize,
    pub n_samples: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Compressible data only.
    #[serde(default)]
    pub n_latent: Option<usize>,
    #[serde(default = "default_scrambler_depth")]
    pub scrambler_depth: usize,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_scrambler_depth() -> usize {
    2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianParams {
    pub hx: f64,
    pub hy: f64,
    pub j: f64,
}

impl Default for HamiltonianParams {
    fn default() -> Self {
        Self { hx: DEFAULT_HX, hy: DEFAULT_HY, j: DEFAULT_J }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    pub scheme: Scheme,
    #[serde(default = "default_n_f")]
    pub n_f: usize,
    pub k_steps: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub hamiltonian: HamiltonianParams,
    /// Uniform when absent.
    #[serde(default)]
    pub complement_dist: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha: AlphaSchedule,
    /// Complement sizes scanned by `forward`; defaults to `[n_f]`.
    #[serde(default)]
    pub n_f_sweep: Vec<usize>,
}

fn default_n_f() -> usize {
    2
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserSection {
    pub layers: usize,
    pub n_a: usize,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        Self { layers: 4, n_a: 1 }
    }
}

/// Training hyperparameters; the seed comes from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub cost: CostKind,
    pub gradient_mode: GradientMode,
    pub branch_mode: BranchMode,
    pub fd_step: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            cost: d.cost,
            gradient_mode: d.gradient_mode,
            branch_mode: d.branch_mode,
            fd_step: d.fd_step,
        }
    }
}

impl TrainSection {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            cost: self.cost,
            seed,
            gradient_mode: self.gradient_mode,
            branch_mode: self.branch_mode,
            fd_step: self.fd_step,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Wasserstein,
    Mmd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub moments: Vec<usize>,
    pub distances: Vec<Distance>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { moments: vec![1, 2], distances: vec![Distance::Wasserstein] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseParam {
    P1,
    P2,
}

impl NoiseParam {
    pub fn name(self) -> &'static str {
        match self {
            NoiseParam::P1 => "p1",
            NoiseParam::P2 => "p2",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: Option<NoiseConfig>, value: f64) -> Result<NoiseConfig> {
        let b = base.unwrap_or_else(NoiseConfig::noiseless);
        Ok(match self {
            NoiseParam::P1 => NoiseConfig::new(value, b.p2)?,
            NoiseParam::P2 => NoiseConfig::new(b.p1, value)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: NoiseParam,
    pub grid: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaeSection {
    pub depth: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Independent random initializations; the lowest final loss wins.
    pub restarts: usize,
}

impl Default for QaeSection {
    fn default() -> Self {
        Self {
            depth: qae::DEFAULT_DEPTH,
            epochs: qae::DEFAULT_EPOCHS,
            learning_rate: qae::DEFAULT_LEARNING_RATE,
            restarts: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// A small multi-cluster experiment that runs in seconds.
    pub fn example() -> Self {
        Self {
            dataset: DatasetConfig {
                kind: DatasetKind::Multicluster,
                n_m: 2,
                n_samples: 200,
                sigma: DEFAULT_SIGMA,
                n_latent: None,
                scrambler_depth: default_scrambler_depth(),
            },
            diffusion: DiffusionSection {
                scheme: Scheme::Cted,
                n_f: 2,
                k_steps: 10,
                dt: DEFAULT_DT,
                hamiltonian: HamiltonianParams::default(),
                complement_dist: None,
                alpha: AlphaSchedule::Quadratic,
                n_f_sweep: Vec::new(),
            },
            denoiser: DenoiserSection::default(),
            train: TrainSection { epochs: 200, learning_rate: 0.02, ..TrainSection::default() },
            noise: None,
            metrics: MetricsSection::default(),
            sweep: None,
            qae: QaeSection::default(),
            n_generated: default_ensemble_size(),
            n_heldout: default_ensemble_size(),
            trials: 1,
            seed: 0,
            out_dir: default_out_dir(),
        }
    }

    /// Qubits the denoiser acts on for data of `n_m` qubits.
    fn check_circuit_size(&self, n_m: usize) -> Result<()> {
        let n = n_m + self.denoiser.n_a;
        ensure!(
            n <= MAX_CIRCUIT_QUBITS,
            "denoiser register has {n} qubits (data {n_m} + ancilla {}); at most {MAX_CIRCUIT_QUBITS} are supported",
            self.denoiser.n_a
        );
        Ok(())
    }

    /// Diffusion parameters for data of `n_m` qubits and complement `n_f`.
    pub fn diffusion_config(&self, n_m: usize, n_f: usize) -> DiffusionConfig {
        let d = &self.diffusion;
        let mut cfg = match d.scheme {
            Scheme::Rucd => DiffusionConfig::rucd(n_m, d.k_steps),
            scheme => DiffusionConfig::chaotic(scheme, n_m, n_f, d.k_steps, d.dt),
        };
        if d.scheme != Scheme::Rucd {
            if let Some(q) = &d.complement_dist {
                cfg.complement_dist = q.clone();
            }
        }
        cfg.alpha = d.alpha;
        cfg.noise = self.noise;
        cfg
    }

    /// Complement sizes scanned by the forward command.
    pub fn complement_sizes(&self) -> Vec<usize> {
        match self.diffusion.scheme {
            Scheme::Rucd => vec![0],
            _ if self.diffusion.n_f_sweep.is_empty() => vec![self.diffusion.n_f],
            _ => self.diffusion.n_f_sweep.clone(),
        }
    }

    /// Register sizes diffusion and denoising run on: the data register, plus
    /// the latent register for compressible data.
    pub fn data_registers(&self) -> Vec<usize> {
        let mut v = vec![self.dataset.n_m];
        if let Some(l) = self.dataset.n_latent {
            v.push(l);
        }
        v
    }

    /// Checks every module precondition before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let ds = &self.dataset;
        ensure!(ds.n_m >= 1, "dataset.n_m must be >= 1");
        ensure!(ds.n_samples >= 1, "dataset.n_samples must be >= 1");
        ensure!(ds.sigma >= 0.0 && ds.sigma.is_finite(), "dataset.sigma must be finite and >= 0");
        match (ds.kind, ds.n_latent) {
            (DatasetKind::Compressible, None) => bail!("dataset.n_latent is required for compressible data"),
            (DatasetKind::Compressible, Some(l)) => {
                ensure!(l >= 1 && l < ds.n_m, "dataset.n_latent must be in 1..{} (got {l})", ds.n_m)
            }
            (_, Some(_)) => bail!("dataset.n_latent only applies to compressible data"),
            (_, None) => {}
        }
        ensure!(self.n_generated >= 1, "n_generated must be >= 1");
        ensure!(self.n_heldout >= 1, "n_heldout must be >= 1");
        ensure!(self.trials >= 1, "trials must be >= 1");

        ensure!(self.diffusion.k_steps >= 1, "diffusion.k_steps must be >= 1");
        for n_m in self.data_registers() {
            self.check_circuit_size(n_m)?;
            for n_f in self.complement_sizes() {
                let cfg = self.diffusion_config(n_m, n_f);
                cfg.validate().with_context(|| format!("diffusion config (n_m = {n_m}, n_f = {n_f})"))?;
                if cfg.scheme != Scheme::Rucd {
                    ensure!(
                        n_m + n_f <= DEFAULT_MAX_SITES,
                        "chain of {} sites exceeds the dense limit of {DEFAULT_MAX_SITES}",
                        n_m + n_f
                    );
                }
            }
        }
        let h = self.diffusion.hamiltonian;
        ensure!([h.hx, h.hy, h.j].iter().all(|v| v.is_finite()), "diffusion.hamiltonian parameters must be finite");

        self.train.with_seed(0).validate().context("train section")?;
        ensure!(
            self.train.batch_size <= ds.n_samples,
            "train.batch_size ({}) exceeds dataset.n_samples ({})",
            self.train.batch_size,
            ds.n_samples
        );
        if let Some(n) = self.noise {
            n.validate().context("noise section")?;
        }
        for &m in &self.metrics.moments {
            ensure!(
                (1..=DEFAULT_MAX_MOMENT).contains(&m),
                "metrics.moments entries must be in 1..={DEFAULT_MAX_MOMENT} (got {m})"
            );
        }
        if let Some(s) = &self.sweep {
            ensure!(!s.grid.is_empty(), "sweep.grid must not be empty");
            for &v in &s.grid {
                s.parameter.apply(self.noise, v).with_context(|| format!("sweep.grid value {v}"))?;
            }
        }
        let q = &self.qae;
        ensure!(q.restarts >= 1, "qae.restarts must be >= 1");
        ensure!(q.learning_rate > 0.0 && q.learning_rate.is_finite(), "qae.learning_rate must be positive");
        Ok(())
    }
}
