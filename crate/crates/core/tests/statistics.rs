//! Sampling oracles: empirical frequencies and trajectory averages checked
//! against exact branch probabilities and channel formulas.

use chaodiff::chaos::{self, ChaoticHamiltonian};
use chaodiff::circuit::{Circuit, Op};
use chaodiff::data::{self, CircularSpec, ClusterSpec};
use chaodiff::denoiser;
use chaodiff::forward::{self, DiffusionConfig, RucdLayerParams, Scheme};
use chaodiff::metrics;
use chaodiff::noisemod;
use chaodiff::qstate::{enumerate_branches, fidelity, haar_state, tensor, Pauli};
use chaodiff::rngs::stream;
use chaodiff::{Ket, StateEnsemble};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson goodness-of-fit p-value of `counts` against `probs`.
fn chi_square_p(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat)
}

fn copies(psi: &Ket, n: usize) -> StateEnsemble {
    StateEnsemble::uniform(vec![psi.clone(); n]).unwrap()
}

fn pinned_complement(mut cfg: DiffusionConfig) -> DiffusionConfig {
    cfg.complement_dist = vec![0.0; 1 << cfg.n_f];
    cfg.complement_dist[0] = 1.0;
    cfg
}

#[test]
fn cted_outcomes_follow_born_rule() {
    const N: usize = 20_000;
    let psi = haar_state(1, &mut stream(1, &[]));
    let h = ChaoticHamiltonian::standard(2).unwrap();
    let cfg = pinned_complement(DiffusionConfig::chaotic(Scheme::Cted, 1, 1, 1, 0.4));
    let step = &forward::cted_diffuse(&copies(&psi, N), &cfg, &h, 2).unwrap()[0];
    let evolved = chaos::evolve(&tensor(&psi, &Ket::zero(1)), &h, 0.4).unwrap();
    let branches = enumerate_branches(&evolved, &[1]).unwrap();
    let mut counts = [0; 2];
    for rec in &step.records {
        let b = &branches[rec.outcome.value as usize];
        assert!((fidelity(&b.post_state, &rec.state).unwrap() - 1.0).abs() < 1e-12);
        counts[rec.outcome.value as usize] += 1;
    }
    let probs: Vec<f64> = branches.iter().map(|b| b.probability).collect();
    assert!(chi_square_p(&counts, &probs) > 1e-3, "{counts:?} vs {probs:?}");
}

#[test]
fn rted_two_steps_follow_branch_tree() {
    const N: usize = 20_000;
    let psi = haar_state(1, &mut stream(3, &[]));
    let h = ChaoticHamiltonian::standard(2).unwrap();
    let dt = 0.4;
    let cfg = pinned_complement(DiffusionConfig::chaotic(Scheme::Rted, 1, 1, 2, dt));
    let steps = forward::rted_diffuse(&copies(&psi, N), &cfg, &h, 4).unwrap();

    let step_branches =
        |s: &Ket| enumerate_branches(&chaos::evolve(&tensor(s, &Ket::zero(1)), &h, dt).unwrap(), &[1]).unwrap();
    let first = step_branches(&psi);
    let mut leaves = Vec::new();
    for b1 in &first {
        for b2 in step_branches(&b1.post_state) {
            leaves.push((b1.probability * b2.probability, b2.post_state));
        }
    }
    let mut counts = [0; 4];
    for (r1, r2) in steps[0].records.iter().zip(&steps[1].records) {
        let leaf = (r1.outcome.value * 2 + r2.outcome.value) as usize;
        assert!((fidelity(&leaves[leaf].1, &r2.state).unwrap() - 1.0).abs() < 1e-12);
        counts[leaf] += 1;
    }
    let probs: Vec<f64> = leaves.iter().map(|l| l.0).collect();
    assert!(chi_square_p(&counts, &probs) > 1e-3, "{counts:?} vs {probs:?}");
}

#[test]
fn denoiser_outcomes_follow_born_rule() {
    const N: u64 = 20_000;
    let mut rng = stream(5, &[]);
    let theta: Vec<f64> = (0..denoiser::ansatz_param_len(2, 2)).map(|_| rng.random_range(-3.0..3.0)).collect();
    let psi = haar_state(1, &mut rng);
    let branches = denoiser::denoise_branches(&psi, &theta, 1, 2).unwrap();
    let mut counts = [0; 2];
    for i in 0..N {
        let rec = denoiser::denoise_step(&psi, &theta, 1, 2, &mut stream(6, &[i])).unwrap();
        counts[rec.outcome.value as usize] += 1;
    }
    let probs: Vec<f64> = branches.iter().map(|b| b.probability).collect();
    assert!(chi_square_p(&counts, &probs) > 1e-3, "{counts:?} vs {probs:?}");
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn haar_product_inputs_have_uniform_first_moment() {
    let inputs = denoiser::product_inputs(2, 10_000, 7, &[]);
    let p00: Vec<f64> = inputs.iter().map(|s| s.amplitudes()[0].norm_sqr()).collect();
    let (m, se) = mean_and_se(&p00);
    assert!((m - 0.25).abs() < 3.0 * se, "{m} +- {se}");
    // single-qubit marginals are uniform on the Bloch sphere: P(0) ~ U(0, 1)
    let single = denoiser::product_inputs(1, 10_000, 8, &[]);
    let p0: Vec<f64> = single.iter().map(|s| s.amplitudes()[0].norm_sqr()).collect();
    let mut counts = [0; 10];
    p0.iter().for_each(|p| counts[((p * 10.0) as usize).min(9)] += 1);
    assert!(chi_square_p(&counts, &[0.1; 10]) > 1e-3);
}

#[test]
fn cluster_occupancy_matches_weights() {
    let spec = ClusterSpec::new(2);
    let (_, labels) = data::sample_multicluster_labeled(&spec, 10_000, &mut stream(9, &[])).unwrap();
    for (c, w) in spec.weights.iter().enumerate() {
        let frac = labels.iter().filter(|&&l| l == c).count() as f64 / 1e4;
        assert!((frac - w).abs() < 0.02, "cluster {c}: {frac}");
    }
}

#[test]
fn circular_states_are_balanced_on_average() {
    let e = data::sample_circular(&CircularSpec { n_m: 3 }, 100_000, &mut stream(10, &[])).unwrap();
    let m = e.states().iter().map(|s| s.amplitudes()[0].norm_sqr()).sum::<f64>() / 1e5;
    assert!((m - 0.5).abs() < 0.005, "{m}");
}

fn average_density<F: FnMut(u64) -> Ket>(trajectories: u64, mut run: F) -> DMatrix<C64> {
    let mut acc: Option<DMatrix<C64>> = None;
    for i in 0..trajectories {
        let rho = run(i).density_matrix();
        acc = Some(match acc {
            Some(a) => a + rho,
            None => rho,
        });
    }
    acc.unwrap() / C64::from(trajectories as f64)
}

fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    // Hermitian difference: half the sum of absolute eigenvalues
    let d = a - b;
    let eig = nalgebra::SymmetricEigen::new(d);
    0.5 * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
}

fn pauli_matrix(p: Pauli) -> DMatrix<C64> {
    let z = C64::from(0.0);
    let one = C64::from(1.0);
    let i = C64::new(0.0, 1.0);
    match p {
        Pauli::X => DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

#[test]
fn pauli_trajectories_average_to_depolarizing_channel() {
    const T: u64 = 100_000;
    let psi = haar_state(1, &mut stream(11, &[]));
    let mut circuit = Circuit::new(1);
    circuit.push(Op::Rot { axis: Pauli::Y, qubit: 0, angle: 0.7, param: None });
    for p1 in [0.1, 0.4, 1.0] {
        let avg = average_density(T, |i| {
            let mut s = psi.clone();
            noisemod::run_with_pauli_noise(&circuit, &mut s, p1, &mut stream(12, &[i])).unwrap();
            s
        });
        let mut ideal = psi.clone();
        circuit.apply(&mut ideal).unwrap();
        let rho = ideal.density_matrix();
        let mut want = &rho * C64::from(1.0 - p1);
        for p in Pauli::ALL {
            let m = pauli_matrix(p);
            want += &m * &rho * &m * C64::from(p1 / 3.0);
        }
        assert!(trace_distance(&avg, &want) < 1e-2, "p1 = {p1}");
    }
}

#[test]
fn dephasing_trajectories_average_to_channel() {
    const T: u64 = 100_000;
    let plus_avg = average_density(T, |i| {
        let mut s = Ket::plus();
        noisemod::apply_dephasing(&mut s, 0.5, &mut stream(13, &[i]));
        s
    });
    assert!(trace_distance(&plus_avg, &(DMatrix::identity(2, 2) * C64::from(0.5))) < 1e-2);

    let psi = haar_state(2, &mut stream(14, &[]));
    for prob in [0.05, 0.2, 0.35] {
        let avg = average_density(T, |i| {
            let mut s = psi.clone();
            noisemod::apply_dephasing(&mut s, prob, &mut stream(15, &[i]));
            s
        });
        let mut want = psi.density_matrix();
        for q in 0..2 {
            let z = if q == 0 {
                pauli_matrix(Pauli::Z).kronecker(&DMatrix::identity(2, 2))
            } else {
                DMatrix::identity(2, 2).kronecker(&pauli_matrix(Pauli::Z))
            };
            want = &want * C64::from(1.0 - prob) + &z * &want * &z * C64::from(prob);
        }
        assert!(trace_distance(&avg, &want) < 1e-2, "prob = {prob}");
    }
}

#[test]
fn injected_error_count_is_binomial() {
    const RUNS: u64 = 10_000;
    let layer = RucdLayerParams::sample(2, 3, 0.5, &mut stream(16, &[]));
    let circuit = layer.circuit();
    let sites = noisemod::noisy_locations(&circuit);
    assert_eq!(sites, 9);
    let p1 = 0.05;
    let psi = haar_state(3, &mut stream(17, &[]));
    let total: usize = (0..RUNS)
        .map(|i| noisemod::run_with_pauli_noise(&circuit, &mut psi.clone(), p1, &mut stream(18, &[i])).unwrap())
        .sum();
    let mean = total as f64 / RUNS as f64;
    let sd = (sites as f64 * p1 * (1.0 - p1) / RUNS as f64).sqrt();
    assert!((mean - sites as f64 * p1).abs() < 4.0 * sd, "{mean}");
}

#[test]
fn swap_test_estimates_have_binomial_spread() {
    const REPEATS: usize = 2_000;
    const SHOTS: u64 = 10_000;
    let mut rng = stream(19, &[]);
    let a = haar_state(2, &mut rng);
    let b = haar_state(2, &mut rng);
    let exact = fidelity(&a, &b).unwrap();
    let p0 = metrics::swap_test_p0(&a, &b).unwrap();
    assert!((p0 - metrics::swap_test_p0_circuit(&a, &b).unwrap()).abs() < 1e-14);
    let est: Vec<f64> = (0..REPEATS).map(|_| metrics::swap_test_fidelity(&a, &b, SHOTS, &mut rng).unwrap()).collect();
    let (m, se) = mean_and_se(&est);
    assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact}");
    let var = se * se * REPEATS as f64;
    let want = 4.0 * p0 * (1.0 - p0) / SHOTS as f64;
    assert!((var / want - 1.0).abs() < 0.15, "variance ratio {}", var / want);
}
