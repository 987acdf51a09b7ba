//! Command implementations. Each returns its rows sorted deterministically;
//! `main` writes them out.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use chaodiff::data::{self, Bundle};
use chaodiff::metrics::{self, MomentReference};
use chaodiff::qae;
use chaodiff::rngs::derive_seed;
use chaodiff::{denoiser, StateEnsemble};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DatasetKind, Distance, ExperimentConfig};
use crate::experiment::{self, TrialSeeds};

pub const FORWARD_HEADER: &str = "scheme,k,n_f,m,metric_name,value,trial";
pub const LOSS_HEADER: &str = "cycle,epoch,loss";
pub const NOISE_HEADER: &str = "scheme,noise_param,value,trial,D_wass";
pub const QAE_HEADER: &str = "scheme,mode,k,trial,D_wass";
pub const QAE_LOSS_HEADER: &str = "trial,restart,epoch,loss";
pub const METRIC_HEADER: &str = "metric,m,value";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardRow {
    pub scheme: String,
    pub k: usize,
    pub n_f: usize,
    /// Moment order; empty for ensemble distances.
    pub m: Option<usize>,
    pub metric_name: String,
    pub value: f64,
    pub trial: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossRow {
    pub cycle: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRow {
    pub scheme: String,
    pub noise_param: String,
    pub value: f64,
    pub trial: usize,
    #[serde(rename = "D_wass")]
    pub d_wass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QaeRow {
    pub scheme: String,
    pub mode: String,
    pub k: usize,
    pub trial: usize,
    #[serde(rename = "D_wass")]
    pub d_wass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QaeLossRow {
    pub trial: usize,
    pub restart: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: String,
    pub m: Option<usize>,
    pub value: f64,
}

fn distance_name(d: Distance) -> &'static str {
    match d {
        Distance::Wasserstein => "wasserstein",
        Distance::Mmd => "mmd",
    }
}

fn distance(d: Distance, x: &StateEnsemble, y: &StateEnsemble) -> Result<f64> {
    Ok(match d {
        Distance::Wasserstein => metrics::wasserstein1_weighted(x, y)?.0,
        Distance::Mmd => metrics::mmd(x, y)?,
    })
}

fn trials(cfg: &ExperimentConfig) -> Vec<usize> {
    (0..cfg.trials).collect()
}

/// Moment and distance metrics of every forward step against `S_0` and Haar.
pub fn forward(cfg: &ExperimentConfig) -> Result<Vec<ForwardRow>> {
    cfg.validate()?;
    let scheme = cfg.diffusion.scheme.to_string();
    let per_trial = trials(cfg)
        .into_par_iter()
        .map(|trial| -> Result<Vec<ForwardRow>> {
            let seeds = TrialSeeds::new(cfg.seed, trial);
            let s0 = experiment::dataset(cfg, &seeds)?.train;
            let mut rows = Vec::new();
            for n_f in cfg.complement_sizes() {
                let d = cfg.diffusion_config(s0.n_qubits(), n_f);
                let ensembles = experiment::forward_ensembles(cfg, &d, &s0, seeds.forward)?;
                for (k, e) in ensembles.iter().enumerate() {
                    let mut push = |m, metric_name: &str, value| {
                        rows.push(ForwardRow {
                            scheme: scheme.clone(),
                            k,
                            n_f,
                            m,
                            metric_name: metric_name.to_string(),
                            value,
                            trial,
                        })
                    };
                    for &m in &cfg.metrics.moments {
                        push(Some(m), "delta_haar", metrics::moment_distance(e, m, MomentReference::Haar)?);
                        push(Some(m), "delta_target", metrics::moment_distance(e, m, MomentReference::Ensemble(&s0))?);
                    }
                    for &dist in &cfg.metrics.distances {
                        push(None, distance_name(dist), distance(dist, e, &s0)?);
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ForwardRow> = per_trial.into_iter().flatten().collect();
    rows.sort_by(|a, b| (a.trial, a.n_f, a.k, &a.metric_name, a.m).cmp(&(b.trial, b.n_f, b.k, &b.metric_name, b.m)));
    Ok(rows)
}

pub struct TrainOutput {
    pub bundle: Bundle,
    pub losses: Vec<LossRow>,
}

/// Layerwise training on trial 0; the bundle holds the data, the held-out set,
/// the trained stack and the report.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let seeds = TrialSeeds::new(cfg.seed, 0);
    let ds = experiment::dataset(cfg, &seeds)?;
    let d = cfg.diffusion_config(ds.train.n_qubits(), cfg.diffusion.n_f);
    let run = experiment::full_run(cfg, &d, &ds.train, &seeds)?;
    let losses =
        run.report.loss_rows().into_iter().map(|(cycle, epoch, loss)| LossRow { cycle, epoch, loss }).collect();
    let mut bundle = Bundle::new();
    bundle.insert_ensemble("data", &ds.train);
    bundle.insert_ensemble("heldout", &ds.heldout);
    bundle.insert_ensemble("generated", run.generation.output());
    bundle.denoiser = Some(run.stack);
    bundle.train_report = Some(run.report);
    bundle.config = Some(serde_json::to_value(cfg)?);
    bundle.seeds = seeds.to_map();
    bundle.seeds.insert("master".into(), cfg.seed);
    Ok(TrainOutput { bundle, losses })
}

/// Fresh samples from the stack stored in `bundle`.
pub fn sample(cfg: &ExperimentConfig, bundle: &Bundle) -> Result<Bundle> {
    ensure!(cfg.n_generated >= 1, "n_generated must be >= 1");
    let stack = bundle.denoiser.as_ref().context("bundle has no trained denoiser")?;
    let seed = derive_seed(cfg.seed, &[chaodiff::rngs::tag::SAMPLE]);
    let generation = denoiser::generate(stack, cfg.n_generated, seed)?;
    let mut out = Bundle::new();
    out.insert_ensemble("generated", generation.output());
    out.denoiser = Some(stack.clone());
    out.seeds.insert("master".into(), cfg.seed);
    out.seeds.insert("sample".into(), seed);
    Ok(out)
}

/// `name` if given, else `generated`, `data`, or the only ensemble present.
pub fn pick_ensemble(bundle: &Bundle, name: Option<&str>) -> Result<StateEnsemble> {
    if let Some(n) = name {
        return Ok(bundle.ensemble(n)?);
    }
    for n in ["generated", "data"] {
        if bundle.ensembles.contains_key(n) {
            return Ok(bundle.ensemble(n)?);
        }
    }
    match bundle.ensembles.keys().collect::<Vec<_>>().as_slice() {
        [only] => Ok(bundle.ensemble(only)?),
        [] => bail!("bundle holds no ensembles"),
        names => bail!("bundle holds several ensembles ({names:?}); choose one by name"),
    }
}

/// Distances between two ensembles, plus moment distances of `left` to Haar
/// and to `right`.
pub fn evaluate(cfg: &ExperimentConfig, left: &StateEnsemble, right: &StateEnsemble) -> Result<Vec<MetricRow>> {
    ensure!(
        left.n_qubits() == right.n_qubits(),
        "ensembles act on different qubit counts ({} vs {})",
        left.n_qubits(),
        right.n_qubits()
    );
    let mut rows = Vec::new();
    let mut dists = cfg.metrics.distances.clone();
    dists.sort();
    dists.dedup();
    for d in dists {
        rows.push(MetricRow { metric: distance_name(d).into(), m: None, value: distance(d, left, right)? });
    }
    for &m in &cfg.metrics.moments {
        rows.push(MetricRow {
            metric: "delta_haar".into(),
            m: Some(m),
            value: metrics::moment_distance(left, m, MomentReference::Haar)?,
        });
        rows.push(MetricRow {
            metric: "delta_target".into(),
            m: Some(m),
            value: metrics::moment_distance(left, m, MomentReference::Ensemble(right))?,
        });
    }
    Ok(rows)
}

/// Trained-model distance to the held-out set across a grid of noise levels.
/// Every grid point of a trial reuses the same seeds.
pub fn noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<NoiseRow>> {
    cfg.validate()?;
    let sweep = cfg.sweep.as_ref().context("noise-sweep needs a sweep section")?;
    let cells: Vec<(usize, usize)> =
        trials(cfg).into_iter().flat_map(|t| (0..sweep.grid.len()).map(move |g| (t, g))).collect();
    let mut rows = cells
        .into_par_iter()
        .map(|(trial, g)| -> Result<NoiseRow> {
            let value = sweep.grid[g];
            let seeds = TrialSeeds::new(cfg.seed, trial);
            let ds = experiment::dataset(cfg, &seeds)?;
            let mut d = cfg.diffusion_config(ds.train.n_qubits(), cfg.diffusion.n_f);
            d.noise = Some(sweep.parameter.apply(cfg.noise, value)?);
            let run = experiment::full_run(cfg, &d, &ds.train, &seeds)?;
            Ok(NoiseRow {
                scheme: cfg.diffusion.scheme.to_string(),
                noise_param: sweep.parameter.name().into(),
                value,
                trial,
                d_wass: metrics::wasserstein1_weighted(run.generation.output(), &ds.heldout)?.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (a.trial, a.value).partial_cmp(&(b.trial, b.value)).unwrap());
    Ok(rows)
}

pub struct QaeOutput {
    pub rows: Vec<QaeRow>,
    pub losses: Vec<QaeLossRow>,
    pub bundle: Bundle,
}

/// Autoencoder training and the latent-versus-full comparison. `D_wass` is
/// measured at every backward step `k` against the source data, decoding
/// latent ensembles first.
pub fn qae(cfg: &ExperimentConfig) -> Result<QaeOutput> {
    cfg.validate()?;
    ensure!(cfg.dataset.kind == DatasetKind::Compressible, "the qae command needs a compressible dataset");
    let n_latent = cfg.dataset.n_latent.context("dataset.n_latent missing")?;
    let scheme = cfg.diffusion.scheme.to_string();
    let per_trial = trials(cfg)
        .into_par_iter()
        .map(|trial| -> Result<(Vec<QaeRow>, Vec<QaeLossRow>, Option<Bundle>)> {
            let seeds = TrialSeeds::new(cfg.seed, trial);
            let ds = experiment::dataset(cfg, &seeds)?;
            let source = &ds.train;
            let (model, curves) = experiment::fit_autoencoder(cfg, source, n_latent, seeds.qae)?;
            let losses = curves
                .iter()
                .enumerate()
                .flat_map(|(restart, c)| {
                    c.iter().enumerate().map(move |(epoch, &loss)| QaeLossRow { trial, restart, epoch, loss })
                })
                .collect();

            let encoded = qae::encode_ensemble(&model, source)?;
            let d_latent = cfg.diffusion_config(n_latent, cfg.diffusion.n_f);
            let latent = experiment::full_run(cfg, &d_latent, &encoded, &seeds)?;
            let d_full = cfg.diffusion_config(source.n_qubits(), cfg.diffusion.n_f);
            let full = experiment::full_run(cfg, &d_full, source, &seeds)?;

            let mut rows = Vec::new();
            for (k, e) in latent.generation.ensembles.iter().enumerate() {
                let decoded = qae::decode_ensemble(&model, e)?;
                rows.push(QaeRow {
                    scheme: scheme.clone(),
                    mode: "latent".into(),
                    k,
                    trial,
                    d_wass: metrics::wasserstein1_weighted(&decoded, source)?.0,
                });
            }
            for (k, e) in full.generation.ensembles.iter().enumerate() {
                rows.push(QaeRow {
                    scheme: scheme.clone(),
                    mode: "full".into(),
                    k,
                    trial,
                    d_wass: metrics::wasserstein1_weighted(e, source)?.0,
                });
            }
            let bundle = (trial == 0).then(|| {
                let mut b = Bundle::new();
                b.insert_ensemble("data", source);
                b.insert_ensemble("latent", &encoded);
                b.qae = Some(model.clone());
                b.denoiser = Some(latent.stack.clone());
                b.config = serde_json::to_value(cfg).ok();
                b.seeds = seeds.to_map();
                b
            });
            Ok((rows, losses, bundle))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut losses = Vec::new();
    let mut bundle = None;
    for (r, l, b) in per_trial {
        rows.extend(r);
        losses.extend(l);
        bundle = bundle.or(b);
    }
    rows.sort_by(|a, b| (a.trial, &a.mode, a.k).cmp(&(b.trial, &b.mode, b.k)));
    Ok(QaeOutput { rows, losses, bundle: bundle.expect("trial 0 always runs") })
}

/// Writes `rows` under `header`; an empty table still gets its header line.
pub fn write_csv<T: Serialize>(path: &Path, header: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<Bundle> {
    data::load_bundle(path).with_context(|| format!("loading bundle {}", path.display()))
}

pub fn save_bundle(path: &Path, bundle: &Bundle) -> Result<()> {
    data::save_bundle(path, bundle).with_context(|| format!("writing bundle {}", path.display()))
}
