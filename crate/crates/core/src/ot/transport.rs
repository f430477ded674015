//! Exact discrete optimal transport by the transportation simplex.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lift::{DiscreteMeasure, GroundCost, VectorMeasure};
use crate::scalar::Real;

/// Non-negative coupling between a source and a target measure, row-major.
///
/// Entry `(j, k)` is the mass moved from source node `j` to target node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T = f64> {
    rows: usize,
    cols: usize,
    matrix: Vec<T>,
}

impl<T: Real> TransportPlan<T> {
    pub fn from_matrix(rows: usize, cols: usize, matrix: Vec<T>) -> Result<Self> {
        if matrix.len() != rows * cols {
            return Err(Error::dim("transport plan", rows * cols, matrix.len()));
        }
        Ok(Self { rows, cols, matrix })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            matrix: vec![T::zero(); rows * cols],
        }
    }

    pub fn get(&self, j: usize, k: usize) -> T {
        self.matrix[j * self.cols + k]
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.matrix
            .chunks(self.cols)
            .map(|r| r.iter().copied().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for r in self.matrix.chunks(self.cols) {
            for (o, &x) in out.iter_mut().zip(r) {
                *o = *o + x;
            }
        }
        out
    }

    /// `⟨C, m⟩`.
    pub fn cost(&self, cost: &GroundCost<T>) -> T {
        self.matrix
            .iter()
            .zip(cost.matrix())
            .map(|(&m, &c)| m * c)
            .sum()
    }
}

/// Relative mass tolerance accepted between the marginals of a transport problem.
pub(crate) fn mass_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

/// Optimal transport cost between two measures of equal mass, with an optimal plan.
pub fn ot_distance<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    cost: &GroundCost<T>,
) -> Result<(T, TransportPlan<T>)> {
    let k = cost.len();
    if mu.len() != k {
        return Err(Error::dim("source measure", k, mu.len()));
    }
    if nu.len() != k {
        return Err(Error::dim("target measure", k, nu.len()));
    }
    let ms: T = mu.masses().iter().copied().sum();
    let ns: T = nu.masses().iter().copied().sum();
    let scale = ms.max(ns);
    if (ms - ns).abs() > mass_tolerance::<T>() * scale {
        return Err(Error::Infeasible(format!(
            "marginal masses differ: {ms} vs {ns}"
        )));
    }
    if scale == T::zero() {
        return Ok((T::zero(), TransportPlan::zeros(k, k)));
    }
    let ratio = ms / ns;
    let target: Vec<T> = nu.masses().iter().map(|&x| x * ratio).collect();
    let plan = transportation_simplex(mu.masses(), &target, cost.matrix())?;
    let value = plan.cost(cost);
    Ok((value, plan))
}

/// `Σ_ℓ ot_distance(μ_ℓ, ν_ℓ)`.
pub fn vector_ot_distance<T: Real>(
    mu: &VectorMeasure<T>,
    nu: &VectorMeasure<T>,
    cost: &GroundCost<T>,
) -> Result<T> {
    if mu.num_rows() != nu.num_rows() {
        return Err(Error::dim(
            "vector measure rows",
            mu.num_rows(),
            nu.num_rows(),
        ));
    }
    let mut total = T::zero();
    for l in 0..mu.num_rows() {
        let (v, _) = ot_distance(&mu.row_measure(l), &nu.row_measure(l), cost)?;
        total = total + v;
    }
    Ok(total)
}

#[derive(Clone, Copy)]
struct BasicCell<T> {
    row: usize,
    col: usize,
    flow: T,
}

/// Balanced transportation problem `min ⟨C, x⟩, x ≥ 0, x 1 = a, xᵀ 1 = b`.
///
/// Starts from the north-west corner basis and pivots on the most negative
/// reduced cost until none is below a scale-relative tolerance.
fn transportation_simplex<T: Real>(
    supply: &[T],
    demand: &[T],
    cost: &[T],
) -> Result<TransportPlan<T>> {
    let m = supply.len();
    let n = demand.len();
    let mut basis = north_west_corner(supply, demand);

    let cmax = cost.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
    let tol = T::epsilon() * T::lit(256.0) * cmax.max(T::one());
    let max_pivots = 50 * (m * n).max(16);

    let mut u = vec![T::zero(); m];
    let mut v = vec![T::zero(); n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    let mut parent_edge = vec![usize::MAX; m + n];
    let mut visited = vec![false; m + n];
    let mut queue = VecDeque::new();

    for _ in 0..max_pivots {
        for a in adj.iter_mut() {
            a.clear();
        }
        for (e, b) in basis.iter().enumerate() {
            adj[b.row].push(e);
            adj[m + b.col].push(e);
        }

        // potentials: u_i + v_j = c_ij on the spanning tree of basic cells
        visited.iter_mut().for_each(|x| *x = false);
        visited[0] = true;
        u[0] = T::zero();
        queue.clear();
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &e in &adj[node] {
                let b = basis[e];
                let (other, is_col) = if node < m {
                    (m + b.col, true)
                } else {
                    (b.row, false)
                };
                if visited[other] {
                    continue;
                }
                visited[other] = true;
                let c = cost[b.row * n + b.col];
                if is_col {
                    v[b.col] = c - u[b.row];
                } else {
                    u[b.row] = c - v[b.col];
                }
                queue.push_back(other);
            }
        }

        let mut best = -tol;
        let mut enter = None;
        for i in 0..m {
            let row = &cost[i * n..(i + 1) * n];
            for j in 0..n {
                let rc = row[j] - u[i] - v[j];
                if rc < best {
                    best = rc;
                    enter = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = enter else {
            let mut plan = TransportPlan::zeros(m, n);
            for b in &basis {
                plan.matrix[b.row * n + b.col] =
                    plan.matrix[b.row * n + b.col] + b.flow.max(T::zero());
            }
            return Ok(plan);
        };

        // tree path from the entering column back to the entering row
        visited.iter_mut().for_each(|x| *x = false);
        parent_edge.iter_mut().for_each(|x| *x = usize::MAX);
        visited[ei] = true;
        queue.clear();
        queue.push_back(ei);
        while let Some(node) = queue.pop_front() {
            if node == m + ej {
                break;
            }
            for &e in &adj[node] {
                let b = basis[e];
                let other = if node < m { m + b.col } else { b.row };
                if !visited[other] {
                    visited[other] = true;
                    parent_edge[other] = e;
                    queue.push_back(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = m + ej;
        while node != ei {
            let e = parent_edge[node];
            if e == usize::MAX {
                return Err(Error::Infeasible("degenerate transport basis".into()));
            }
            path.push(e);
            let b = basis[e];
            node = if node < m { m + b.col } else { b.row };
        }

        // edges alternate −, +, −, … starting from the entering column
        let mut theta = T::infinity();
        let mut leave = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 && basis[e].flow < theta {
                theta = basis[e].flow;
                leave = e;
            }
        }
        let theta = theta.max(T::zero());
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[e].flow = basis[e].flow - theta;
            } else {
                basis[e].flow = basis[e].flow + theta;
            }
        }
        basis[leave] = BasicCell {
            row: ei,
            col: ej,
            flow: theta,
        };
    }
    Err(Error::Convergence {
        iterations: max_pivots,
        residual: f64::NAN,
    })
}

fn north_west_corner<T: Real>(supply: &[T], demand: &[T]) -> Vec<BasicCell<T>> {
    let m = supply.len();
    let n = demand.len();
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let f = ra[i].min(rb[j]).max(T::zero());
        basis.push(BasicCell {
            row: i,
            col: j,
            flow: f,
        });
        ra[i] = ra[i] - f;
        rb[j] = rb[j] - f;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}
