//! Transport between distributions on ℝ with cost `c(z₁, z₂) = S(z₂, z₁)`.
//!
//! [`mk_divergence`] evaluates the coupling claimed by the score in closed
//! form; [`oracle_optimal`] solves the finite problem exactly (assignment for
//! equal weights, transportation simplex otherwise) so the claim can be
//! certified.

use serde::Serialize;

use crate::distributions::{midpoint_u, quantile_grid, Distribution};
use crate::generators::ConvexGenerator;
use crate::numeric::{map_indices, pairwise_mean, Execution};
use crate::scores::{Coupling, Score};
use crate::{Error, Result};

/// Largest instance accepted by the exact solvers.
pub const ORACLE_MAX: usize = 64;

/// How a divergence was discretised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub value: f64,
    #[serde(serialize_with = "ser_coupling")]
    pub coupling: Coupling,
    /// Sorted atoms were paired directly instead of using the u-grid.
    pub exact_atoms: bool,
    /// Number of quadrature nodes (atoms when `exact_atoms`).
    pub m: usize,
    pub delta: f64,
}

fn ser_coupling<S: serde::Serializer>(c: &Coupling, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(c.name())
}

/// `𝒮(F₁, F₂)` under the score's coupling claim, on `M` midpoint nodes
/// (or on the sorted atoms when both inputs are empirical with equal size).
pub fn mk_divergence(score: &Score, f1: &Distribution, f2: &Distribution, m: usize, delta: f64) -> Result<f64> {
    Ok(mk_divergence_report(score, f1, f2, m, delta, Execution::Serial)?.value)
}

/// [`mk_divergence`] with discretisation metadata and an execution mode.
/// Serial and parallel execution return identical bits.
pub fn mk_divergence_report(
    score: &Score,
    f1: &Distribution,
    f2: &Distribution,
    m: usize,
    delta: f64,
    exec: Execution,
) -> Result<DivergenceReport> {
    let coupling = score.coupling_claim();
    if let (Some(a1), Some(a2)) = (f1.atoms(), f2.atoms()) {
        if a1.len() == a2.len() {
            let value = paired_mean(score, a1, a2, coupling, exec, |i| midpoint_u(i, a1.len()))?;
            return Ok(DivergenceReport {
                value,
                coupling,
                exact_atoms: true,
                m: a1.len(),
                delta: 0.0,
            });
        }
    }
    let g1 = quantile_grid(f1, m, delta)?;
    let g2 = quantile_grid(f2, m, delta)?;
    let value = paired_mean(score, g1.nodes(), g2.nodes(), coupling, exec, |i| g1.u(i))?;
    Ok(DivergenceReport {
        value,
        coupling,
        exact_atoms: false,
        m,
        delta,
    })
}

/// `(1/n) Σ S(q₂[j(i)], q₁[i])` with `j(i) = i` or `n − 1 − i`.
fn paired_mean<U>(score: &Score, q1: &[f64], q2: &[f64], coupling: Coupling, exec: Execution, level: U) -> Result<f64>
where
    U: Fn(usize) -> f64 + Sync,
{
    let n = q1.len();
    let values = map_indices(n, exec, |i| {
        let j = match coupling {
            Coupling::Comonotonic => i,
            Coupling::Antitonic => n - 1 - i,
        };
        score.eval(q2[j], q1[i]).map_err(|e| Error::AtNode {
            u: level(i),
            source: Box::new(e),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_mean(&values, exec))
}

/// `ℬ_φ(G, F) = (1/M) Σ B_φ(G(uᵢ), F(uᵢ))` between two quantile node vectors.
pub fn bregman_wasserstein(gen: ConvexGenerator, g: &[f64], f: &[f64], exec: Execution) -> Result<f64> {
    if g.len() != f.len() {
        return Err(Error::Domain(format!(
            "node vectors differ in length: {} vs {}",
            g.len(),
            f.len()
        )));
    }
    let n = g.len();
    let values = map_indices(n, exec, |i| {
        gen.bregman(g[i], f[i]).map_err(|e| Error::AtNode {
            u: midpoint_u(i, n),
            source: Box::new(e),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_mean(&values, exec))
}

/// `W_p(F₁, F₂) = (∫ |F̆₁ − F̆₂|^p du)^{1/p}` on the grid (exact on equal-size
/// empirical inputs).
pub fn wasserstein_p(f1: &Distribution, f2: &Distribution, p: f64, m: usize, delta: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("Wasserstein order p must be >= 1, got {p}")));
    }
    let (q1, q2) = match (f1.atoms(), f2.atoms()) {
        (Some(a1), Some(a2)) if a1.len() == a2.len() => (a1.to_vec(), a2.to_vec()),
        _ => (
            quantile_grid(f1, m, delta)?.into_nodes(),
            quantile_grid(f2, m, delta)?.into_nodes(),
        ),
    };
    let d: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| (a - b).abs().powf(p)).collect();
    Ok(pairwise_mean(&d, Execution::Serial).powf(1.0 / p))
}

/// Optimal plan returned by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Plan {
    /// `σ(i)`: atom `i` of the first list is sent to atom `σ(i)` of the second.
    Permutation(Vec<usize>),
    /// `(i, j, mass)` triples with positive mass, sorted by `(i, j)`.
    Sparse(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Assignment,
    Lp,
    ClosedForm,
}

/// Value and plan of an exactly solved discrete transport problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub value: f64,
    pub plan: Plan,
    pub method: Method,
}

fn cost_matrix(score: &Score, atoms1: &[f64], atoms2: &[f64]) -> Result<Vec<Vec<f64>>> {
    atoms1
        .iter()
        .enumerate()
        .map(|(i, &z1)| {
            atoms2
                .iter()
                .enumerate()
                .map(|(j, &z2)| {
                    score
                        .eval(z2, z1)
                        .map_err(|e| Error::Domain(format!("cost entry ({i}, {j}): {e}")))
                })
                .collect()
        })
        .collect()
}

/// Exact optimum of the discrete transport problem between `atoms1` and
/// `atoms2`.
///
/// Without weights the lists must have equal length and the problem is solved
/// as a linear assignment, returning the lexicographically smallest optimal
/// permutation. With weights (a missing side counts as uniform) the
/// transportation simplex is used.
pub fn oracle_optimal(
    score: &Score,
    atoms1: &[f64],
    atoms2: &[f64],
    weights1: Option<&[f64]>,
    weights2: Option<&[f64]>,
) -> Result<CouplingReport> {
    if atoms1.is_empty() || atoms2.is_empty() {
        return Err(Error::Domain("oracle needs non-empty atom lists".into()));
    }
    if weights1.is_none() && weights2.is_none() && atoms1.len() == atoms2.len() {
        let n = atoms1.len();
        if n > ORACLE_MAX {
            return Err(Error::Capacity(format!(
                "assignment oracle accepts n <= {ORACLE_MAX}, got {n}"
            )));
        }
        let cost = cost_matrix(score, atoms1, atoms2)?;
        let perm = lex_min_assignment(&cost);
        let value = assignment_value(&cost, &perm);
        return Ok(CouplingReport {
            value,
            plan: Plan::Permutation(perm),
            method: Method::Assignment,
        });
    }
    let total = atoms1.len() + atoms2.len();
    if total > ORACLE_MAX {
        return Err(Error::Capacity(format!(
            "LP oracle accepts at most {ORACLE_MAX} support points, got {total}"
        )));
    }
    let a = marginal(weights1, atoms1.len(), "first")?;
    let b = marginal(weights2, atoms2.len(), "second")?;
    let cost = cost_matrix(score, atoms1, atoms2)?;
    let flows = transportation_simplex(&cost, &a, &b)?;
    let value = flows.iter().map(|&(i, j, x)| x * cost[i][j]).sum();
    Ok(CouplingReport {
        value,
        plan: Plan::Sparse(flows),
        method: Method::Lp,
    })
}

fn marginal(w: Option<&[f64]>, n: usize, side: &str) -> Result<Vec<f64>> {
    let Some(w) = w else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    if w.len() != n {
        return Err(Error::Domain(format!(
            "{side} weights have length {} but there are {n} atoms",
            w.len()
        )));
    }
    if let Some(x) = w.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("{side} weights must be non-negative, got {x}")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("{side} weights must sum to 1, got {s}")));
    }
    Ok(w.to_vec())
}

fn assignment_value(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    let v: Vec<f64> = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).collect();
    pairwise_mean(&v, Execution::Serial)
}

/// `(1/n) Σ S(atoms2[σ(i)], atoms1[i])`.
pub fn coupling_value(score: &Score, atoms1: &[f64], atoms2: &[f64], perm: &[usize]) -> Result<f64> {
    let n = atoms1.len();
    if atoms2.len() != n || perm.len() != n || n == 0 {
        return Err(Error::Domain(format!(
            "coupling needs equal non-empty lengths, got {}, {} and a matching of {}",
            n,
            atoms2.len(),
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &j in perm {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::Domain("matching is not a permutation".into()));
        }
    }
    let v = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| score.eval(atoms2[j], atoms1[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_mean(&v, Execution::Serial))
}

/// The rank-matching permutation: the k-th smallest atom of the first list
/// goes to the k-th smallest (comonotonic) or k-th largest (antitonic) atom
/// of the second. Ties keep input order.
pub fn monotone_matching(atoms1: &[f64], atoms2: &[f64], coupling: Coupling) -> Vec<usize> {
    let order = |a: &[f64]| {
        let mut idx: Vec<usize> = (0..a.len()).collect();
        idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
        idx
    };
    let (o1, o2) = (order(atoms1), order(atoms2));
    let n = o1.len();
    let mut perm = vec![0; n];
    for (k, &i) in o1.iter().enumerate() {
        perm[i] = match coupling {
            Coupling::Comonotonic => o2[k],
            Coupling::Antitonic => o2[n - 1 - k],
        };
    }
    perm
}

/// Shortest-augmenting-path Hungarian algorithm, `O(n³)`. Returns row
/// potentials, column potentials and the assignment row → column.
fn hungarian(cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = cost.len();
    // 1-based internally; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    (u[1..].to_vec(), v[1..].to_vec(), assign)
}

/// Optimal assignment, then the lexicographically smallest perfect matching
/// among edges that are tight under the optimal potentials.
fn lex_min_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let (u, v, mut row_to_col) = hungarian(cost);
    let scale = cost.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-12 * (1.0 + scale);
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| cost[i][j] - u[i] - v[j] <= eps).collect())
        .collect();
    let mut col_to_row = vec![0; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    for i in 0..n {
        for j in 0..n {
            if !tight[i][j] || col_to_row[j] < i {
                continue;
            }
            if row_to_col[i] == j {
                break;
            }
            // Re-route row k (currently on j) to the column row i frees,
            // through an alternating path over unfixed rows.
            let k = col_to_row[j];
            let target = row_to_col[i];
            if let Some(path) = alternating_path(&tight, &row_to_col, &col_to_row, k, target, i, j) {
                for (r, c) in path {
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
    }
    row_to_col
}

/// BFS for an alternating path that moves row `start` to some column and
/// ends by freeing-up column `target`, using only rows `> fixed` other than
/// `start`'s displacement chain and never touching column `blocked`.
/// Returns the new `(row, column)` pairs along the path.
fn alternating_path(
    tight: &[Vec<bool>],
    row_to_col: &[usize],
    col_to_row: &[usize],
    start: usize,
    target: usize,
    fixed: usize,
    blocked: usize,
) -> Option<Vec<(usize, usize)>> {
    let n = tight.len();
    let mut parent_col: Vec<Option<usize>> = vec![None; n];
    let mut visited_col = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    let mut reached = None;
    'bfs: while let Some(r) = queue.pop_front() {
        for c in 0..n {
            if visited_col[c] || c == blocked || !tight[r][c] {
                continue;
            }
            let owner = col_to_row[c];
            if c != target && owner <= fixed {
                continue;
            }
            visited_col[c] = true;
            parent_col[c] = Some(r);
            if c == target {
                reached = Some(c);
                break 'bfs;
            }
            queue.push_back(owner);
        }
    }
    let mut c = reached?;
    let mut path = Vec::new();
    loop {
        let r = parent_col[c].expect("visited column has a parent");
        path.push((r, c));
        if r == start {
            break;
        }
        c = row_to_col[r];
    }
    Some(path)
}

/// Transportation simplex: north-west corner start, MODI potentials,
/// Dantzig pricing with lowest-index ties.
fn transportation_simplex(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let (n1, n2) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    // basis[k] = (i, j, flow)
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(n1 + n2 - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]).max(0.0);
        basis.push((i, j, x));
        s[i] -= x;
        d[j] -= x;
        if i == n1 - 1 && j == n2 - 1 {
            break;
        }
        if i == n1 - 1 {
            j += 1;
        } else if j == n2 - 1 || s[i] <= d[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let scale = cost.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-12 * (1.0 + scale);
    let max_iter = 50 * (n1 + n2) * (n1 + n2);
    for _ in 0..max_iter {
        let (u, v) = potentials(cost, &basis, n1, n2);
        let mut entering = None;
        let mut best = -eps;
        for (a, row) in cost.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                let r = c - u[a] - v[b];
                if r < best && !basis.iter().any(|&(p, q, _)| p == a && q == b) {
                    best = r;
                    entering = Some((a, b));
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut flows: Vec<_> = basis.into_iter().filter(|&(_, _, x)| x > 0.0).collect();
            flows.sort_by_key(|&(i, j, _)| (i, j));
            return Ok(flows);
        };
        let cycle = basis_path(&basis, n1, n2, ej, ei);
        // cycle[k] indexes into basis; signs alternate starting with −.
        let mut leave = cycle[0];
        for &k in cycle.iter().step_by(2) {
            if basis[k].2 < basis[leave].2 {
                leave = k;
            }
        }
        let theta = basis[leave].2;
        for (pos, &k) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                basis[k].2 -= theta;
            } else {
                basis[k].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }
    Err(Error::Evaluation(format!(
        "transportation simplex did not converge within {max_iter} pivots"
    )))
}

/// Solve `u_i + v_j = c_ij` on the basis tree with `u_0 = 0`.
fn potentials(cost: &[Vec<f64>], basis: &[(usize, usize, f64)], n1: usize, n2: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; n1];
    let mut v = vec![f64::NAN; n2];
    u[0] = 0.0;
    let mut changed = true;
    while changed {
        changed = false;
        for &(i, j, _) in basis {
            if !u[i].is_nan() && v[j].is_nan() {
                v[j] = cost[i][j] - u[i];
                changed = true;
            } else if u[i].is_nan() && !v[j].is_nan() {
                u[i] = cost[i][j] - v[j];
                changed = true;
            }
        }
    }
    (u, v)
}

/// Basis cells on the tree path from column `col` to row `row`, in order.
fn basis_path(basis: &[(usize, usize, f64)], n1: usize, n2: usize, col: usize, row: usize) -> Vec<usize> {
    // Nodes: rows 0..n1, columns n1..n1+n2.
    let total = n1 + n2;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); total];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push((n1 + j, k));
        adj[n1 + j].push((i, k));
    }
    let mut via: Vec<Option<(usize, usize)>> = vec![None; total];
    let mut seen = vec![false; total];
    let start = n1 + col;
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        for &(next, k) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                via[next] = Some((node, k));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = row;
    while node != start {
        let (prev, k) = via[node].expect("basis is a spanning tree");
        path.push(k);
        node = prev;
    }
    path.reverse();
    path
}
