//! Independent convex-programming oracles built on an interior-point solver.
//!
//! Every oracle restates its problem from scratch in conic form, sharing no
//! code with the solvers under test.

#![allow(dead_code)]

pub mod invariants;

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use num_complex::Complex64;

/// `min ½xᵀPx + qᵀx  s.t.  Ax + s = b, s ∈ cones`, built row by row.
pub struct Conic {
    n: usize,
    p: BTreeMap<(usize, usize), f64>,
    q: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Conic {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            p: BTreeMap::new(),
            q: vec![0.0; n],
            rows: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn linear(&mut self, i: usize, c: f64) {
        self.q[i] += c;
    }

    /// Adds `½ c x_i x_j` (`i ≤ j` stored; pass each unordered pair once).
    pub fn quad(&mut self, i: usize, j: usize, c: f64) {
        let key = (i.min(j), i.max(j));
        *self.p.entry(key).or_insert(0.0) += c;
    }

    /// `Σ a·x = b`.
    pub fn equalities(&mut self, rows: Vec<(Vec<(usize, f64)>, f64)>) {
        let m = rows.len();
        for (r, b) in rows {
            self.rows.push(r);
            self.b.push(b);
        }
        self.cones.push(SupportedConeT::ZeroConeT(m));
    }

    /// `x_i ≥ 0` for every listed index.
    pub fn nonnegative(&mut self, idx: impl IntoIterator<Item = usize>) {
        let mut m = 0;
        for i in idx {
            self.rows.push(vec![(i, -1.0)]);
            self.b.push(0.0);
            m += 1;
        }
        self.cones.push(SupportedConeT::NonnegativeConeT(m));
    }

    /// `x_{head} ≥ ‖(x_{tail₀}, …)‖ + …` with affine offsets: entries are `(terms, constant)`.
    pub fn second_order(&mut self, entries: Vec<(Vec<(usize, f64)>, f64)>) {
        let m = entries.len();
        for (terms, c) in entries {
            self.rows
                .push(terms.into_iter().map(|(i, a)| (i, -a)).collect());
            self.b.push(c);
        }
        self.cones.push(SupportedConeT::SecondOrderConeT(m));
    }

    /// Optimal value and point.
    pub fn solve(self) -> (f64, Vec<f64>) {
        let m = self.rows.len();
        let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
        for (&(i, j), &v) in &self.p {
            pi.push(i);
            pj.push(j);
            pv.push(v);
        }
        let p = CscMatrix::new_from_triplets(self.n, self.n, pi, pj, pv);
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                *acc.entry((r, c)).or_insert(0.0) += v;
            }
        }
        let (mut ai, mut aj, mut av) = (Vec::new(), Vec::new(), Vec::new());
        for ((i, j), v) in acc {
            ai.push(i);
            aj.push(j);
            av.push(v);
        }
        let a = CscMatrix::new_from_triplets(m, self.n, ai, aj, av);
        let settings = DefaultSettings {
            verbose: false,
            tol_gap_abs: 1e-11,
            tol_gap_rel: 1e-11,
            tol_feas: 1e-11,
            tol_ktratio: 1e-9,
            max_iter: 500,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &self.b, &self.cones, settings)
            .expect("well-formed conic program");
        solver.solve();
        let status = solver.solution.status;
        assert!(
            matches!(status, SolverStatus::Solved | SolverStatus::AlmostSolved),
            "oracle failed with status {status:?}"
        );
        (solver.solution.obj_val, solver.solution.x.clone())
    }
}

/// `2 − 2cos(ψ_j − ψ_k) + γ` on the uniform grid `ψ_k = −π + 2πk/K`,
/// evaluated directly from the angles.
pub fn cost_matrix(k: usize, gamma: f64) -> Vec<f64> {
    let psi: Vec<f64> = (0..k)
        .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / k as f64)
        .collect();
    let mut c = vec![0.0; k * k];
    for j in 0..k {
        for i in 0..k {
            let d = Complex64::from_polar(1.0, psi[j]) - Complex64::from_polar(1.0, psi[i]);
            c[j * k + i] = d.norm_sqr() + gamma;
        }
    }
    c
}

pub fn phasors(k: usize) -> Vec<Complex64> {
    (0..k)
        .map(|i| {
            Complex64::from_polar(
                1.0,
                -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / k as f64,
            )
        })
        .collect()
}

/// Balanced transport LP `min ⟨C, m⟩` with row sums `mu` and column sums `nu`.
pub fn ot_lp(mu: &[f64], nu: &[f64], cost: &[f64]) -> f64 {
    let k = mu.len();
    let mut prog = Conic::new(k * k);
    for (i, &c) in cost.iter().enumerate() {
        prog.linear(i, c);
    }
    let mut eq = Vec::new();
    for j in 0..k {
        eq.push(((0..k).map(|i| (j * k + i, 1.0)).collect(), mu[j]));
    }
    // one column constraint is implied by equal totals; keep all but the last
    for i in 0..k - 1 {
        eq.push(((0..k).map(|j| (j * k + i, 1.0)).collect(), nu[i]));
    }
    prog.equalities(eq);
    prog.nonnegative(0..k * k);
    prog.solve().0
}

/// Joint LP for `min_μ (1/Q) Σ_q T(μ, ν_q)` over free `μ ≥ 0`.
pub fn barycenter_lp(measures: &[Vec<f64>], cost: &[f64]) -> f64 {
    let nq = measures.len();
    let k = measures[0].len();
    let nvar = k + nq * k * k;
    let plan = |q: usize, j: usize, i: usize| k + q * k * k + j * k + i;
    let mut prog = Conic::new(nvar);
    for q in 0..nq {
        for j in 0..k {
            for i in 0..k {
                prog.linear(plan(q, j, i), cost[j * k + i] / nq as f64);
            }
        }
    }
    let mut eq = Vec::new();
    for q in 0..nq {
        for j in 0..k {
            let mut r: Vec<(usize, f64)> = (0..k).map(|i| (plan(q, j, i), 1.0)).collect();
            r.push((j, -1.0));
            eq.push((r, 0.0));
        }
        for i in 0..k {
            eq.push((
                (0..k).map(|j| (plan(q, j, i), 1.0)).collect(),
                measures[q][i],
            ));
        }
    }
    prog.equalities(eq);
    prog.nonnegative(0..nvar);
    prog.solve().0
}

/// Inverse barycenter QP:
/// `min Σ_{q,l} ⟨C, m_{ql}⟩ + η Σ_q |Σ_l G_{ql} Σ_k e^{iψ_k} colsum(m_{ql})_k − p_q|²`
/// subject to `m ≥ 0` and `rowsum(m_{ql})` independent of `q`.
pub fn inverse_barycenter_qp(
    pressures: &[Complex64],
    steering: &[Complex64],
    num_dirs: usize,
    k: usize,
    gamma: f64,
    eta: f64,
) -> f64 {
    let nq = pressures.len();
    let nl = num_dirs;
    let cost = cost_matrix(k, gamma);
    let ph = phasors(k);
    let nplan = nq * nl * k * k;
    let res = |q: usize, part: usize| nplan + 2 * q + part;
    let plan = |q: usize, l: usize, j: usize, i: usize| ((q * nl + l) * k + j) * k + i;
    let mut prog = Conic::new(nplan + 2 * nq);
    for q in 0..nq {
        for l in 0..nl {
            for j in 0..k {
                for i in 0..k {
                    prog.linear(plan(q, l, j, i), cost[j * k + i]);
                }
            }
        }
        prog.quad(res(q, 0), res(q, 0), 2.0 * eta);
        prog.quad(res(q, 1), res(q, 1), 2.0 * eta);
    }
    let mut eq = Vec::new();
    for q in 0..nq {
        for part in 0..2 {
            let mut r = vec![(res(q, part), -1.0)];
            for l in 0..nl {
                for j in 0..k {
                    for i in 0..k {
                        let z = steering[q * nl + l] * ph[i];
                        r.push((plan(q, l, j, i), if part == 0 { z.re } else { z.im }));
                    }
                }
            }
            let p = if part == 0 {
                pressures[q].re
            } else {
                pressures[q].im
            };
            eq.push((r, p));
        }
    }
    for q in 1..nq {
        for l in 0..nl {
            for j in 0..k {
                let mut r: Vec<(usize, f64)> = (0..k).map(|i| (plan(q, l, j, i), 1.0)).collect();
                r.extend((0..k).map(|i| (plan(0, l, j, i), -1.0)));
                eq.push((r, 0.0));
            }
        }
    }
    prog.equalities(eq);
    prog.nonnegative(0..nplan);
    prog.solve().0
}

/// Variables `x` (re, im interleaved), `t` (moduli), then per-row residual blocks.
fn residual_rows(
    g: &[Complex64],
    p: &[Complex64],
    nl: usize,
    res_base: usize,
) -> Vec<(Vec<(usize, f64)>, f64)> {
    let mut eq = Vec::new();
    for (q, row) in g.chunks(nl).enumerate() {
        // Re: Σ (g.re x.re − g.im x.im) − r.re = p.re
        let mut re = vec![(res_base + 2 * q, -1.0)];
        let mut im = vec![(res_base + 2 * q + 1, -1.0)];
        for (l, z) in row.iter().enumerate() {
            re.push((2 * l, z.re));
            re.push((2 * l + 1, -z.im));
            im.push((2 * l, z.im));
            im.push((2 * l + 1, z.re));
        }
        eq.push((re, p[q].re));
        eq.push((im, p[q].im));
    }
    eq
}

fn modulus_cones(prog: &mut Conic, nl: usize, t_base: usize) {
    for l in 0..nl {
        prog.second_order(vec![
            (vec![(t_base + l, 1.0)], 0.0),
            (vec![(2 * l, 1.0)], 0.0),
            (vec![(2 * l + 1, 1.0)], 0.0),
        ]);
    }
}

/// `min ½‖Gx − p‖² + λ Σ|x_l|` for row-major `Q × L` complex `G`.
pub fn lasso_socp(g: &[Complex64], p: &[Complex64], nl: usize, lambda: f64) -> f64 {
    let nq = p.len();
    let t_base = 2 * nl;
    let r_base = 3 * nl;
    let mut prog = Conic::new(r_base + 2 * nq);
    for l in 0..nl {
        prog.linear(t_base + l, lambda);
    }
    for i in 0..2 * nq {
        prog.quad(r_base + i, r_base + i, 1.0);
    }
    prog.equalities(residual_rows(g, p, nl, r_base));
    modulus_cones(&mut prog, nl, t_base);
    prog.solve().0
}

/// `min Σ_q |(Gx)_q − p_q| + λ Σ|x_l|`.
pub fn lad_lasso_socp(g: &[Complex64], p: &[Complex64], nl: usize, lambda: f64) -> f64 {
    let nq = p.len();
    let t_base = 2 * nl;
    let r_base = 3 * nl;
    let s_base = r_base + 2 * nq;
    let mut prog = Conic::new(s_base + nq);
    for l in 0..nl {
        prog.linear(t_base + l, lambda);
    }
    for q in 0..nq {
        prog.linear(s_base + q, 1.0);
    }
    prog.equalities(residual_rows(g, p, nl, r_base));
    modulus_cones(&mut prog, nl, t_base);
    for q in 0..nq {
        prog.second_order(vec![
            (vec![(s_base + q, 1.0)], 0.0),
            (vec![(r_base + 2 * q, 1.0)], 0.0),
            (vec![(r_base + 2 * q + 1, 1.0)], 0.0),
        ]);
    }
    prog.solve().0
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
