//! Layerwise training of the denoiser stack.
//!
//! Step `k` is trained against the forward ensemble `S_{k-1}` while the
//! already-trained steps `k+1..K` stay frozen. Inputs are fresh Haar-product
//! states pushed through the frozen steps every epoch.
//!
//! Gradients treat sampled ancilla outcomes and the optimal transport plan as
//! constants. With `u` the unnormalized projected branch and `p = <u|u>`, the
//! cost is differentiated with respect to `conj(u)` and then pulled back
//! through the ansatz with the adjoint method.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::denoiser::{build_ansatz, product_inputs, propagate, DenoiserStack};
use crate::metrics::ot;
use crate::qstate::{inner, norm_sqr, sample_index, tensor, Ket, StateEnsemble, BRANCH_CUTOFF};
use crate::rngs::{stream, tag};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Wasserstein,
    Mmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Adjoint,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMode {
    /// One ancilla outcome per input, resampled every epoch.
    Sampled,
    /// Every ancilla outcome, weighted by its probability.
    Enumerated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub cost: CostKind,
    pub seed: u64,
    pub gradient_mode: GradientMode,
    pub branch_mode: BranchMode,
    /// Central-difference step for [`GradientMode::FiniteDifference`].
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_fd_step() -> f64 {
    1e-5
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 100,
            learning_rate: 0.001,
            cost: CostKind::Wasserstein,
            seed: 0,
            gradient_mode: GradientMode::Adjoint,
            branch_mode: BranchMode::Sampled,
            fd_step: default_fd_step(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: AdamParams, dim: usize) -> Self {
        Self { params, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    pub fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        let AdamParams { learning_rate, beta1, beta2, eps } = self.params;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            x[i] -= learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
    }
}

/// Everything fixed while optimizing one step's parameters.
#[derive(Clone, Copy, Debug)]
pub struct StepProblem<'a> {
    pub n_a: usize,
    pub layers: usize,
    /// Data-qubit states entering the trained step.
    pub inputs: &'a [Ket],
    /// Forward-process batch the output is compared against.
    pub target: &'a StateEnsemble,
}

impl StepProblem<'_> {
    fn n_m(&self) -> usize {
        self.target.n_qubits()
    }

    fn n_qubits(&self) -> usize {
        self.n_m() + self.n_a
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        for s in self.inputs {
            crate::qstate::same_qubits(self.n_m(), s.n_qubits())?;
        }
        let want = crate::denoiser::ansatz_param_len(self.n_qubits(), self.layers);
        if theta.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: theta.len() });
        }
        Ok(())
    }
}

/// Which ancilla branches form the generated ensemble.
#[derive(Clone, Debug, PartialEq)]
pub enum Branches {
    /// One fixed outcome per input.
    Sampled(Vec<usize>),
    Enumerated,
}

struct Branch {
    input: usize,
    outcome: usize,
    u: Vec<C64>,
    p: f64,
}

fn forward_outputs(circuit: &Circuit, problem: &StepProblem<'_>) -> Vec<Vec<C64>> {
    let anc = Ket::zero(problem.n_a.max(1));
    problem
        .inputs
        .par_iter()
        .map(|s| {
            let joint = if problem.n_a == 0 { s.clone() } else { tensor(s, &anc) };
            let mut amps = joint.into_amplitudes();
            circuit.apply_amps(&mut amps);
            amps
        })
        .collect()
}

fn project(out: &[C64], n_a: usize, z: usize) -> Vec<C64> {
    out.iter().skip(z).step_by(1 << n_a).copied().collect()
}

fn outcome_probs(out: &[C64], n_a: usize) -> Vec<f64> {
    let mut p = vec![0.0; 1 << n_a];
    for (i, a) in out.iter().enumerate() {
        p[i & ((1 << n_a) - 1)] += a.norm_sqr();
    }
    p
}

fn branches_of(outs: &[Vec<C64>], n_a: usize, choice: &Branches) -> Result<Vec<Branch>> {
    let mut all = Vec::new();
    for (b, out) in outs.iter().enumerate() {
        let zs: Vec<usize> = match choice {
            Branches::Sampled(z) => {
                if z.len() != outs.len() {
                    return Err(Error::DimensionMismatch { expected: outs.len(), got: z.len() });
                }
                vec![z[b]]
            }
            Branches::Enumerated => (0..1 << n_a).collect(),
        };
        for z in zs {
            let u = project(out, n_a, z);
            let p = norm_sqr(&u);
            if p < BRANCH_CUTOFF {
                if matches!(choice, Branches::Sampled(_)) {
                    return Err(Error::InvalidArgument(format!(
                        "sampled outcome {z} of input {b} has vanishing probability"
                    )));
                }
                continue;
            }
            all.push(Branch { input: b, outcome: z, u, p });
        }
    }
    Ok(all)
}

/// Draws one ancilla outcome per input under `theta`.
pub fn sample_outcomes<R: Rng + ?Sized>(theta: &[f64], problem: &StepProblem<'_>, rng: &mut R) -> Result<Vec<usize>> {
    problem.check(theta)?;
    let circuit = build_ansatz(theta, problem.n_qubits(), problem.layers)?;
    Ok(forward_outputs(&circuit, problem)
        .iter()
        .map(|out| sample_index(&outcome_probs(out, problem.n_a), rng))
        .collect())
}

/// Cost value and, if requested, `dD/d conj(u)` per branch.
fn branch_cost(
    branches: &[Branch],
    problem: &StepProblem<'_>,
    cost: CostKind,
    enumerated: bool,
    want_grad: bool,
) -> Result<(f64, Vec<Vec<C64>>)> {
    let batch = problem.inputs.len() as f64;
    let targets = problem.target.states();
    let a = problem.target.weights();
    let g_len = branches.len();
    let w: Vec<f64> = branches.iter().map(|br| if enumerated { br.p / batch } else { 1.0 / batch }).collect();
    // overlaps <t_i|u_g> and normalized fidelities
    let ov: Vec<Vec<C64>> =
        targets.par_iter().map(|t| branches.iter().map(|br| inner(t.amplitudes(), &br.u)).collect()).collect();
    let f: Vec<Vec<f64>> =
        ov.iter().map(|row| row.iter().zip(branches).map(|(o, br)| o.norm_sqr() / br.p).collect()).collect();

    // coefficient of df_ig and of dw_g in dD
    let mut coef_f = vec![vec![0.0; g_len]; targets.len()];
    let mut coef_w = vec![0.0; g_len];
    let mut gen_gram: Option<Vec<Vec<C64>>> = None;
    let value = match cost {
        CostKind::Mmd => {
            let gg: Vec<Vec<C64>> =
                branches.par_iter().map(|x| branches.iter().map(|y| inner(&x.u, &y.u)).collect()).collect();
            let k = |g: usize, h: usize| gg[g][h].norm_sqr() / (branches[g].p * branches[h].p);
            let mut kxx = 0.0;
            for i in 0..targets.len() {
                let mut row = 0.0;
                for j in 0..targets.len() {
                    row += a[j] * inner(targets[i].amplitudes(), targets[j].amplitudes()).norm_sqr();
                }
                kxx += a[i] * row;
            }
            let mut kyy = 0.0;
            for g in 0..g_len {
                let mut row = 0.0;
                for h in 0..g_len {
                    row += w[h] * if g == h { 1.0 } else { k(g, h) };
                }
                kyy += w[g] * row;
                coef_w[g] = 2.0 * row;
            }
            let mut kxy = 0.0;
            for i in 0..targets.len() {
                for g in 0..g_len {
                    kxy += a[i] * w[g] * f[i][g];
                    coef_f[i][g] = -2.0 * a[i] * w[g];
                    coef_w[g] -= 2.0 * a[i] * f[i][g];
                }
            }
            gen_gram = Some(gg);
            kxx + kyy - 2.0 * kxy
        }
        CostKind::Wasserstein => {
            let c = nalgebra::DMatrix::from_fn(targets.len(), g_len, |i, g| 1.0 - f[i][g].min(1.0));
            let plan = ot::solve_transport(&c, a, &w)?;
            for i in 0..targets.len() {
                for g in 0..g_len {
                    coef_f[i][g] = -plan.plan[(i, g)];
                }
            }
            coef_w.copy_from_slice(&plan.col_duals);
            plan.objective
        }
    };
    if !want_grad {
        return Ok((value, Vec::new()));
    }

    let cot: Vec<Vec<C64>> = (0..g_len)
        .into_par_iter()
        .map(|g| {
            let br = &branches[g];
            let mut out = vec![C64::new(0.0, 0.0); br.u.len()];
            // d f_ig / d conj(u_g) = (t_i <t_i|u_g> - f_ig u_g) / p_g
            let mut self_coef = 0.0;
            for (i, t) in targets.iter().enumerate() {
                let c = coef_f[i][g];
                if c == 0.0 {
                    continue;
                }
                let s = ov[i][g] * (c / br.p);
                for (o, ta) in out.iter_mut().zip(t.amplitudes()) {
                    *o += ta * s;
                }
                self_coef -= c * f[i][g] / br.p;
            }
            if let Some(gg) = &gen_gram {
                // d k_gh / d conj(u_g) = u_h <u_h|u_g> / (p_g p_h) - k_gh u_g / p_g
                for (h, other) in branches.iter().enumerate() {
                    if h == g {
                        continue;
                    }
                    let c = 2.0 * w[g] * w[h];
                    let s = gg[h][g] * (c / (br.p * other.p));
                    for (o, x) in out.iter_mut().zip(&other.u) {
                        *o += x * s;
                    }
                    self_coef -= c * gg[g][h].norm_sqr() / (br.p * other.p) / br.p;
                }
            }
            if enumerated {
                // w_g = p_g / B
                self_coef += coef_w[g] / batch;
            }
            for (o, x) in out.iter_mut().zip(&br.u) {
                *o += x * self_coef;
            }
            out
        })
        .collect();
    Ok((value, cot))
}

fn cost_at(theta: &[f64], problem: &StepProblem<'_>, choice: &Branches, cost: CostKind) -> Result<f64> {
    let circuit = build_ansatz(theta, problem.n_qubits(), problem.layers)?;
    let outs = forward_outputs(&circuit, problem);
    let branches = branches_of(&outs, problem.n_a, choice)?;
    Ok(branch_cost(&branches, problem, cost, *choice == Branches::Enumerated, false)?.0)
}

/// Cost of `theta` on one step and its gradient.
pub fn cost_and_gradient(
    theta: &[f64],
    problem: &StepProblem<'_>,
    choice: &Branches,
    cost: CostKind,
    mode: GradientMode,
    fd_step: f64,
) -> Result<(f64, Vec<f64>)> {
    problem.check(theta)?;
    let (value, grad) = match mode {
        GradientMode::FiniteDifference => {
            let value = cost_at(theta, problem, choice, cost)?;
            let grad = (0..theta.len())
                .map(|p| {
                    let mut up = theta.to_vec();
                    up[p] += fd_step;
                    let mut dn = theta.to_vec();
                    dn[p] -= fd_step;
                    Ok((cost_at(&up, problem, choice, cost)? - cost_at(&dn, problem, choice, cost)?) / (2.0 * fd_step))
                })
                .collect::<Result<Vec<_>>>()?;
            (value, grad)
        }
        GradientMode::Adjoint => {
            let n_a = problem.n_a;
            let circuit = build_ansatz(theta, problem.n_qubits(), problem.layers)?;
            let outs = forward_outputs(&circuit, problem);
            let branches = branches_of(&outs, n_a, choice)?;
            let (value, cot) = branch_cost(&branches, problem, cost, *choice == Branches::Enumerated, true)?;
            let mut lam: Vec<Vec<C64>> = outs.iter().map(|o| vec![C64::new(0.0, 0.0); o.len()]).collect();
            for (br, c) in branches.iter().zip(&cot) {
                for (r, v) in c.iter().enumerate() {
                    lam[br.input][(r << n_a) | br.outcome] += v;
                }
            }
            let parts: Vec<Vec<f64>> = outs
                .par_iter()
                .zip(&lam)
                .map(|(out, l)| {
                    let mut g = vec![0.0; theta.len()];
                    circuit.accumulate_gradient(out, l, &mut g);
                    g
                })
                .collect();
            let mut grad = vec![0.0; theta.len()];
            for part in parts {
                for (g, p) in grad.iter_mut().zip(part) {
                    *g += p;
                }
            }
            (value, grad)
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite { cycle: 0, epoch: 0, param: None });
    }
    if let Some(p) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { cycle: 0, epoch: 0, param: Some(p) });
    }
    Ok((value, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub k: usize,
    pub losses: Vec<f64>,
    /// Cost of the trained parameters on a fresh batch.
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// In training order, `k = K` first.
    pub cycles: Vec<CycleReport>,
    pub wall_clock_secs: f64,
    pub seed: u64,
    pub adam: AdamParams,
}

impl TrainReport {
    /// `(cycle, epoch, loss)` rows in training order.
    pub fn loss_rows(&self) -> Vec<(usize, usize, f64)> {
        self.cycles.iter().flat_map(|c| c.losses.iter().enumerate().map(move |(e, &l)| (c.k, e, l))).collect()
    }
}

struct Batch {
    inputs: Vec<Ket>,
    target: StateEnsemble,
    choice: Branches,
}

fn draw_batch(
    stack: &DenoiserStack,
    frozen: &[Circuit],
    k: usize,
    epoch: usize,
    theta: &[f64],
    target: &StateEnsemble,
    cfg: &TrainConfig,
) -> Result<Batch> {
    let (kk, ee) = (k as u64, epoch as u64);
    let mut rng = stream(cfg.seed, &[tag::TRAIN, kk, ee]);
    let picked = index::sample(&mut rng, target.len(), cfg.batch_size).into_vec();
    let target = target.select(&picked)?;
    let fresh = product_inputs(stack.n_m, cfg.batch_size, cfg.seed, &[tag::TRAIN, kk, ee, 0]);
    let k_steps = stack.k_steps();
    let inputs = fresh
        .into_par_iter()
        .enumerate()
        .map(|(j, s)| {
            if k == k_steps {
                Ok(s)
            } else {
                propagate(frozen, stack.n_a, s, k_steps, k + 1, cfg.seed, &[tag::TRAIN, kk, ee, 1, j as u64])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let choice = match cfg.branch_mode {
        BranchMode::Enumerated => Branches::Enumerated,
        BranchMode::Sampled => {
            let problem = StepProblem { n_a: stack.n_a, layers: stack.layers, inputs: &inputs, target: &target };
            Branches::Sampled(sample_outcomes(theta, &problem, &mut rng)?)
        }
    };
    Ok(Batch { inputs, target, choice })
}

fn tag_error(e: Error, cycle: usize, epoch: usize) -> Error {
    match e {
        Error::NonFinite { param, .. } => Error::NonFinite { cycle, epoch, param },
        other => other,
    }
}

/// Trains `stack` step by step from `k = K` down to `1`.
///
/// `forward[k]` is the forward ensemble `S_k`; entries `0..K` are required.
pub fn train_layerwise(
    forward: &[StateEnsemble],
    mut stack: DenoiserStack,
    cfg: &TrainConfig,
) -> Result<(DenoiserStack, TrainReport)> {
    cfg.validate()?;
    stack.validate()?;
    let k_steps = stack.k_steps();
    if forward.len() < k_steps {
        return Err(Error::InvalidArgument(format!(
            "training {k_steps} steps needs forward ensembles S_0..S_{}, got {}",
            k_steps - 1,
            forward.len()
        )));
    }
    for s in &forward[..k_steps] {
        crate::qstate::same_qubits(stack.n_m, s.n_qubits())?;
        if s.len() < cfg.batch_size {
            return Err(Error::InvalidArgument(format!(
                "batch size {} exceeds ensemble size {}",
                cfg.batch_size,
                s.len()
            )));
        }
    }
    let start = Instant::now();
    let adam_params = AdamParams::with_lr(cfg.learning_rate);
    let mut cycles = Vec::with_capacity(k_steps);
    let mut circuits: Vec<Circuit> = (1..=k_steps).map(|k| stack.circuit(k)).collect::<Result<_>>()?;
    for k in (1..=k_steps).rev() {
        let target = &forward[k - 1];
        let mut theta = stack.theta(k).to_vec();
        let mut adam = Adam::new(adam_params, theta.len());
        let mut losses = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let batch = draw_batch(&stack, &circuits, k, epoch, &theta, target, cfg)?;
            let problem =
                StepProblem { n_a: stack.n_a, layers: stack.layers, inputs: &batch.inputs, target: &batch.target };
            let (loss, grad) =
                cost_and_gradient(&theta, &problem, &batch.choice, cfg.cost, cfg.gradient_mode, cfg.fd_step)
                    .map_err(|e| tag_error(e, k, epoch))?;
            adam.step(&mut theta, &grad);
            if let Some(p) = theta.iter().position(|t| !t.is_finite()) {
                return Err(Error::NonFinite { cycle: k, epoch, param: Some(p) });
            }
            losses.push(loss);
        }
        let batch = draw_batch(&stack, &circuits, k, cfg.epochs, &theta, target, cfg)?;
        let problem =
            StepProblem { n_a: stack.n_a, layers: stack.layers, inputs: &batch.inputs, target: &batch.target };
        let final_loss = cost_at(&theta, &problem, &batch.choice, cfg.cost).map_err(|e| tag_error(e, k, cfg.epochs))?;
        stack.thetas[k - 1] = theta;
        circuits[k - 1] = stack.circuit(k)?;
        cycles.push(CycleReport { k, losses, final_loss });
    }
    Ok((
        stack,
        TrainReport { cycles, wall_clock_secs: start.elapsed().as_secs_f64(), seed: cfg.seed, adam: adam_params },
    ))
}
