//! Building blocks shared by the commands: per-trial seeds, datasets, forward
//! runs and trained backward runs.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{bail, Result};
use chaodiff::chaos::ChaoticHamiltonian;
use chaodiff::data::{self, CircularSpec, ClusterSpec};
use chaodiff::denoiser::{self, DenoiserStack, Generation};
use chaodiff::forward::{self, DiffusionConfig, Scheme};
use chaodiff::qae::{self, QaeModel};
use chaodiff::rngs::{derive_seed, stream, tag};
use chaodiff::train::{self, TrainReport};
use chaodiff::StateEnsemble;

use crate::config::{DatasetKind, ExperimentConfig};

/// Independent seeds for each stage of one trial. Each is derived from the
/// master seed, the stage tag and the trial index alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub dataset: u64,
    pub heldout: u64,
    pub forward: u64,
    pub train: u64,
    pub sample: u64,
    pub qae: u64,
}

impl TrialSeeds {
    pub fn new(master: u64, trial: usize) -> Self {
        let t = trial as u64;
        Self {
            dataset: derive_seed(master, &[tag::DATASET, t]),
            heldout: derive_seed(master, &[tag::HELDOUT, t]),
            forward: derive_seed(master, &[tag::FORWARD, t]),
            train: derive_seed(master, &[tag::TRAIN, t]),
            sample: derive_seed(master, &[tag::SAMPLE, t]),
            qae: derive_seed(master, &[tag::QAE, t]),
        }
    }

    pub fn to_map(self) -> BTreeMap<String, u64> {
        [
            ("dataset", self.dataset),
            ("heldout", self.heldout),
            ("forward", self.forward),
            ("train", self.train),
            ("sample", self.sample),
            ("qae", self.qae),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Training and held-out samples of one trial. Compressible data also
/// carries the hidden encoder that produced it.
pub struct Dataset {
    pub train: StateEnsemble,
    pub heldout: StateEnsemble,
    pub scrambler: Option<QaeModel>,
}

pub fn dataset(cfg: &ExperimentConfig, seeds: &TrialSeeds) -> Result<Dataset> {
    let ds = &cfg.dataset;
    let draw = |n_m: usize, n: usize, seed: u64| -> Result<StateEnsemble> {
        let mut rng = stream(seed, &[]);
        Ok(match ds.kind {
            DatasetKind::Circular => data::sample_circular(&CircularSpec { n_m }, n, &mut rng)?,
            _ => data::sample_multicluster(&ClusterSpec::new(n_m).with_sigma(ds.sigma), n, &mut rng)?,
        })
    };
    match (ds.kind, ds.n_latent) {
        (DatasetKind::Compressible, Some(n_latent)) => {
            let scrambler = QaeModel::random(ds.n_m, n_latent, ds.scrambler_depth, &mut stream(seeds.dataset, &[1]))?;
            let embed = |n, seed| -> Result<StateEnsemble> {
                Ok(data::embed_compressible(&draw(n_latent, n, seed)?, &scrambler)?)
            };
            Ok(Dataset {
                train: embed(ds.n_samples, seeds.dataset)?,
                heldout: embed(cfg.n_heldout, seeds.heldout)?,
                scrambler: Some(scrambler),
            })
        }
        (DatasetKind::Compressible, None) => bail!("compressible data needs n_latent"),
        _ => Ok(Dataset {
            train: draw(ds.n_m, ds.n_samples, seeds.dataset)?,
            heldout: draw(ds.n_m, cfg.n_heldout, seeds.heldout)?,
            scrambler: None,
        }),
    }
}

pub fn hamiltonian(cfg: &ExperimentConfig, d: &DiffusionConfig) -> Result<Option<Arc<ChaoticHamiltonian>>> {
    if d.scheme == Scheme::Rucd {
        return Ok(None);
    }
    let h = cfg.diffusion.hamiltonian;
    Ok(Some(ChaoticHamiltonian::cached(d.n_m + d.n_f, h.hx, h.hy, h.j)?))
}

/// `[S_0, S_1, ..., S_K]`.
pub fn forward_ensembles(
    cfg: &ExperimentConfig,
    d: &DiffusionConfig,
    s0: &StateEnsemble,
    seed: u64,
) -> Result<Vec<StateEnsemble>> {
    let h = hamiltonian(cfg, d)?;
    let steps = forward::diffuse(s0, d, h.as_deref(), seed)?;
    Ok(std::iter::once(s0.clone()).chain(steps.into_iter().map(|s| s.ensemble)).collect())
}

pub struct BackwardRun {
    pub stack: DenoiserStack,
    pub report: TrainReport,
    pub generation: Generation,
}

/// Trains a fresh stack on `forward` and samples `cfg.n_generated` outputs.
pub fn backward(cfg: &ExperimentConfig, forward: &[StateEnsemble], seeds: &TrialSeeds) -> Result<BackwardRun> {
    let n_m = forward[0].n_qubits();
    let k_steps = forward.len() - 1;
    let den = cfg.denoiser;
    let init = DenoiserStack::random(k_steps, n_m, den.n_a, den.layers, &mut stream(seeds.train, &[0]));
    let (stack, report) = train::train_layerwise(forward, init, &cfg.train.with_seed(seeds.train))?;
    let generation = denoiser::generate(&stack, cfg.n_generated, seeds.sample)?;
    Ok(BackwardRun { stack, report, generation })
}

/// Full pipeline on the data register: forward, train, generate.
pub fn full_run(
    cfg: &ExperimentConfig,
    d: &DiffusionConfig,
    s0: &StateEnsemble,
    seeds: &TrialSeeds,
) -> Result<BackwardRun> {
    let fwd = forward_ensembles(cfg, d, s0, seeds.forward)?;
    backward(cfg, &fwd, seeds)
}

/// Best of `cfg.qae.restarts` autoencoders trained on `data`, with the loss
/// curve of each restart.
pub fn fit_autoencoder(
    cfg: &ExperimentConfig,
    data: &StateEnsemble,
    n_latent: usize,
    seed: u64,
) -> Result<(QaeModel, Vec<Vec<f64>>)> {
    let q = cfg.qae;
    let mut best: Option<(f64, QaeModel)> = None;
    let mut curves = Vec::with_capacity(q.restarts);
    for r in 0..q.restarts {
        let init = QaeModel::random(data.n_qubits(), n_latent, q.depth, &mut stream(seed, &[r as u64]))?;
        let (model, curve) = qae::train_qae(&init, data, q.epochs, q.learning_rate)?;
        let loss = qae::trash_loss(&model, data)?;
        curves.push(curve);
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, model));
        }
    }
    Ok((best.expect("at least one restart").1, curves))
}
