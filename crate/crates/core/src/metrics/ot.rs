//! Exact optimal transport.
//!
//! Square problems with uniform marginals reduce to linear assignment and are
//! solved with the shortest-augmenting-path Hungarian method. Everything else
//! goes through successive shortest paths on the transportation network, which
//! handles arbitrary real marginals. Both return optimal dual potentials.

use nalgebra::DMatrix;

use crate::{Error, Result};

const MASS_EPS: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub plan: DMatrix<f64>,
    pub objective: f64,
    /// Row potentials `u` of the dual: `u_i + v_j <= C_ij`, tight where `P_ij > 0`.
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.row_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.plan.column_iter().map(|c| c.sum()).collect()
    }
}

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns the column assigned to each row, plus row and column potentials.
/// Ties resolve toward the lowest column index.
pub fn solve_assignment(cost: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square matrix");
    // 1-based arrays; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    (assignment, u[1..].to_vec(), v[1..].to_vec())
}

/// Exact transport between marginals `a` (rows) and `b` (columns).
pub fn solve_transport(cost: &DMatrix<f64>, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (n, m) = cost.shape();
    if n == 0 || m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch { expected: n * m, got: a.len() * b.len() });
    }
    for marg in [a, b] {
        if marg.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidArgument("marginals must be nonnegative".into()));
        }
        let s: f64 = marg.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("marginal sums to {s}, not 1")));
        }
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite transport cost".into()));
    }

    let uniform = |x: &[f64]| x.iter().all(|&w| (w - x[0]).abs() < 1e-15);
    if n == m && uniform(a) && uniform(b) {
        let (assign, u, v) = solve_assignment(cost);
        let mut plan = DMatrix::zeros(n, n);
        let w = 1.0 / n as f64;
        let mut objective = 0.0;
        for (i, &j) in assign.iter().enumerate() {
            plan[(i, j)] = w;
            objective += w * cost[(i, j)];
        }
        return Ok(TransportPlan { plan, objective, row_duals: u, col_duals: v });
    }
    Ok(successive_shortest_paths(cost, a, b))
}

fn successive_shortest_paths(cost: &DMatrix<f64>, a: &[f64], b: &[f64]) -> TransportPlan {
    let (n, m) = cost.shape();
    let mut plan = DMatrix::<f64>::zeros(n, m);
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    // node potentials; reduced cost of row i -> col j is C_ij + pr_i - pc_j >= 0
    let mut pr = vec![0.0; n];
    let mut pc: Vec<f64> = (0..m).map(|j| (0..n).map(|i| cost[(i, j)]).fold(f64::INFINITY, f64::min)).collect();

    let reduced = |i: usize, j: usize, pr: &[f64], pc: &[f64]| (cost[(i, j)] + pr[i] - pc[j]).max(0.0);

    loop {
        if supply.iter().all(|&s| s <= MASS_EPS) || demand.iter().all(|&d| d <= MASS_EPS) {
            break;
        }
        let mut dist_r: Vec<f64> = supply.iter().map(|&s| if s > MASS_EPS { 0.0 } else { f64::INFINITY }).collect();
        let mut dist_c = vec![f64::INFINITY; m];
        let mut prev_c = vec![usize::MAX; m];
        let mut prev_r = vec![usize::MAX; n];
        let mut done_r = vec![false; n];
        let mut done_c = vec![false; m];
        let target = loop {
            // pick the closest unsettled node, rows before columns on ties
            let mut best = (f64::INFINITY, false, 0usize);
            for (i, &d) in dist_r.iter().enumerate() {
                if !done_r[i] && d < best.0 {
                    best = (d, true, i);
                }
            }
            for (j, &d) in dist_c.iter().enumerate() {
                if !done_c[j] && d < best.0 {
                    best = (d, false, j);
                }
            }
            let (d, is_row, k) = best;
            if !d.is_finite() {
                break None;
            }
            if is_row {
                done_r[k] = true;
                for j in 0..m {
                    if done_c[j] {
                        continue;
                    }
                    let nd = d + reduced(k, j, &pr, &pc);
                    if nd < dist_c[j] {
                        dist_c[j] = nd;
                        prev_c[j] = k;
                    }
                }
            } else {
                done_c[k] = true;
                if demand[k] > MASS_EPS {
                    break Some(k);
                }
                for i in 0..n {
                    if done_r[i] || plan[(i, k)] <= 0.0 {
                        continue;
                    }
                    let nd = d + (-(cost[(i, k)] + pr[i] - pc[k])).max(0.0);
                    if nd < dist_r[i] {
                        dist_r[i] = nd;
                        prev_r[i] = k;
                    }
                }
            }
        };
        let Some(t) = target else {
            break;
        };
        let cap = dist_c[t];
        for i in 0..n {
            pr[i] += dist_r[i].min(cap);
        }
        for j in 0..m {
            pc[j] += dist_c[j].min(cap);
        }

        // walk back: col t <- row i (forward edge) <- col j (backward edge) ...
        let mut path = Vec::new();
        let mut j = t;
        let source = loop {
            let i = prev_c[j];
            path.push((i, j, true));
            let back = prev_r[i];
            if back == usize::MAX {
                break i;
            }
            path.push((i, back, false));
            j = back;
        };
        let mut delta = supply[source].min(demand[t]);
        for &(i, j, forward) in &path {
            if !forward {
                delta = delta.min(plan[(i, j)]);
            }
        }
        for &(i, j, forward) in &path {
            if forward {
                plan[(i, j)] += delta;
            } else {
                plan[(i, j)] -= delta;
                if plan[(i, j)] < MASS_EPS {
                    plan[(i, j)] = 0.0;
                }
            }
        }
        supply[source] -= delta;
        demand[t] -= delta;
    }

    let objective = plan.iter().zip(cost.iter()).map(|(p, c)| p * c).sum();
    TransportPlan { plan, objective, row_duals: pr.iter().map(|p| -p).collect(), col_duals: pc }
}
