//! Matrix-free ADMM over stacks of transport plans.
//!
//! The variable is a family of `K × K` plans `m[q][l]`, `q < Q`, `l < L`. The
//! splitting is `min f(x) + g(z)  s.t.  x = z`, where `g` is the indicator of
//!
//! ```text
//! S = { z ≥ 0 : rowsum(z[q][l]) = rowsum(z[p][l]) for all q, p, l }
//! ```
//!
//! and `f` is a transport cost plus a term that only sees column sums. Every
//! prox of `f` used here has the form `x = v − C[j,k]/ρ − e[q,l,k]` where `e`
//! depends on the column sums of `v`; implementors of [`PlanProx`] supply `e`.
//!
//! Internally plans are laid out as `[l][j][q][k]` so that each projection
//! group `(l, j)` is a contiguous `Q × K` block.

use crate::scalar::Real;

pub(crate) trait PlanProx<T: Real> {
    /// Fills `offsets[(q·L + l)·K + k]` from the column sums of `v`, indexed the same way.
    fn offsets(&self, colsum_v: &[T], rho: T, offsets: &mut [T]);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub q: usize,
    pub l: usize,
    pub k: usize,
}

impl Dims {
    pub fn len(&self) -> usize {
        self.q * self.l * self.k * self.k
    }

    pub fn internal(&self, q: usize, l: usize, j: usize, k: usize) -> usize {
        ((l * self.k + j) * self.q + q) * self.k + k
    }

    pub fn colsum_len(&self) -> usize {
        self.q * self.l * self.k
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepResiduals<T> {
    pub primal: T,
    pub dual: T,
    pub primal_inf: T,
    pub dual_inf: T,
    pub x_norm: T,
    pub z_norm: T,
    pub y_norm: T,
}

pub(crate) struct Engine<T: Real> {
    pub dims: Dims,
    cost: Vec<T>,
    cost_norm: T,
    pub z: Vec<T>,
    pub u: Vec<T>,
    pub rho: T,
    alpha: T,
    colsum: Vec<T>,
    offsets: Vec<T>,
    proj: Projector<T>,
    xbuf: Vec<T>,
    xhbuf: Vec<T>,
    ybuf: Vec<T>,
}

impl<T: Real> Engine<T> {
    pub fn new(dims: Dims, cost: &[T], rho: T, alpha: T) -> Self {
        let n = dims.len();
        let group = dims.q * dims.k;
        let cost_norm = cost.iter().map(|&c| c * c).sum::<T>().sqrt()
            * T::from_usize(dims.q * dims.l).unwrap().sqrt();
        Self {
            dims,
            cost: cost.to_vec(),
            cost_norm,
            z: vec![T::zero(); n],
            u: vec![T::zero(); n],
            rho,
            alpha,
            colsum: vec![T::zero(); dims.colsum_len()],
            offsets: vec![T::zero(); dims.colsum_len()],
            proj: Projector::new(dims.q, dims.k),
            xbuf: vec![T::zero(); group],
            xhbuf: vec![T::zero(); group],
            ybuf: vec![T::zero(); group],
        }
    }

    /// One relaxed ADMM iteration.
    pub fn step<P: PlanProx<T>>(&mut self, prox: &P) -> StepResiduals<T> {
        let Dims {
            q: nq,
            l: nl,
            k: nk,
        } = self.dims;
        let rho = self.rho;
        let inv_rho = T::one() / rho;
        let alpha = self.alpha;
        let beta = T::one() - alpha;

        // column sums of v = z − u, per (q, l, k)
        self.colsum.iter_mut().for_each(|c| *c = T::zero());
        for l in 0..nl {
            for j in 0..nk {
                for q in 0..nq {
                    let base = self.dims.internal(q, l, j, 0);
                    let cs = &mut self.colsum[(q * nl + l) * nk..(q * nl + l + 1) * nk];
                    let zs = &self.z[base..base + nk];
                    let us = &self.u[base..base + nk];
                    for k in 0..nk {
                        cs[k] = cs[k] + (zs[k] - us[k]);
                    }
                }
            }
        }
        prox.offsets(&self.colsum, rho, &mut self.offsets);

        let mut res = StepResiduals::default();
        let (mut p2, mut d2, mut x2, mut z2, mut u2) =
            (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        let (mut pinf, mut dinf) = (T::zero(), T::zero());
        for l in 0..nl {
            for j in 0..nk {
                let crow = &self.cost[j * nk..(j + 1) * nk];
                let gbase = self.dims.internal(0, l, j, 0);
                for q in 0..nq {
                    let off = &self.offsets[(q * nl + l) * nk..(q * nl + l + 1) * nk];
                    let base = gbase + q * nk;
                    for k in 0..nk {
                        let i = base + k;
                        let v = self.z[i] - self.u[i];
                        let x = v - crow[k] * inv_rho - off[k];
                        let xh = alpha * x + beta * self.z[i];
                        self.xbuf[q * nk + k] = x;
                        self.xhbuf[q * nk + k] = xh;
                        self.ybuf[q * nk + k] = xh + self.u[i];
                    }
                }
                self.proj.project(&mut self.ybuf);
                let gs = nq * nk;
                let zs = &mut self.z[gbase..gbase + gs];
                let us = &mut self.u[gbase..gbase + gs];
                for t in 0..gs {
                    let zn = self.ybuf[t];
                    let zo = zs[t];
                    let x = self.xbuf[t];
                    let un = us[t] + self.xhbuf[t] - zn;
                    zs[t] = zn;
                    us[t] = un;
                    let pr = x - zn;
                    let dr = zn - zo;
                    p2 = p2 + pr * pr;
                    d2 = d2 + dr * dr;
                    pinf = pinf.max(pr.abs());
                    dinf = dinf.max(dr.abs());
                    x2 = x2 + x * x;
                    z2 = z2 + zn * zn;
                    u2 = u2 + un * un;
                }
            }
        }
        res.primal = p2.sqrt();
        res.dual = rho * d2.sqrt();
        res.primal_inf = pinf;
        res.dual_inf = rho * dinf;
        res.x_norm = x2.sqrt();
        res.z_norm = z2.sqrt();
        res.y_norm = rho * u2.sqrt();
        res
    }

    /// Residual-balancing penalty update; returns true if `ρ` changed.
    pub fn adapt_rho(&mut self, r: &StepResiduals<T>) -> bool {
        let tiny = T::epsilon();
        let pn = r.primal / r.x_norm.max(r.z_norm).max(tiny);
        let dn = r.dual / r.y_norm.max(self.cost_norm).max(tiny);
        if !(pn > T::zero()) || !(dn > T::zero()) {
            return false;
        }
        let ratio = (pn / dn).sqrt();
        if ratio < T::lit(5.0) && ratio > T::lit(0.2) {
            return false;
        }
        let new_rho = (self.rho * ratio).max(T::lit(1e-6)).min(T::lit(1e6));
        if new_rho == self.rho {
            return false;
        }
        let scale = self.rho / new_rho;
        self.u.iter_mut().for_each(|x| *x = *x * scale);
        self.rho = new_rho;
        true
    }

    /// Plans in natural `[q][l][j][k]` order.
    pub fn natural_plans(&self) -> Vec<T> {
        let Dims {
            q: nq,
            l: nl,
            k: nk,
        } = self.dims;
        let mut out = vec![T::zero(); self.dims.len()];
        for q in 0..nq {
            for l in 0..nl {
                for j in 0..nk {
                    let src = self.dims.internal(q, l, j, 0);
                    let dst = ((q * nl + l) * nk + j) * nk;
                    out[dst..dst + nk].copy_from_slice(&self.z[src..src + nk]);
                }
            }
        }
        out
    }
}

/// Euclidean projection of a `Q × K` block onto
/// `{ z ≥ 0 : Σ_k z[q][k] = s for every q, some s ≥ 0 }`.
///
/// For a fixed `s`, each row projects onto the scaled simplex with threshold
/// `τ_q(s)`. The optimal `s` solves `Σ_q τ_q(s) = 0`; each `τ_q` is convex,
/// decreasing and piecewise linear, so Newton from `s = 0` is monotone and
/// terminates once the active sets settle.
pub(crate) struct Projector<T> {
    nq: usize,
    nk: usize,
    sorted: Vec<T>,
    prefix: Vec<T>,
    len: Vec<usize>,
    active: Vec<usize>,
    tau: Vec<T>,
    maxes: Vec<T>,
}

impl<T: Real> Projector<T> {
    pub fn new(nq: usize, nk: usize) -> Self {
        Self {
            nq,
            nk,
            sorted: vec![T::zero(); nq * nk],
            prefix: vec![T::zero(); nq * (nk + 1)],
            len: vec![0; nq],
            active: vec![1; nq],
            tau: vec![T::zero(); nq],
            maxes: vec![T::zero(); nq],
        }
    }

    pub fn project(&mut self, y: &mut [T]) {
        let (nq, nk) = (self.nq, self.nk);
        let mut total = T::zero();
        let mut scale = T::zero();
        for q in 0..nq {
            let row = &y[q * nk..(q + 1) * nk];
            let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            self.maxes[q] = m;
            total = total + m;
            scale = scale.max(m.abs());
        }
        if !(total > T::zero()) {
            y.iter_mut().for_each(|v| *v = T::zero());
            return;
        }

        // τ_q at the optimum is at least m_q − Σ m, so lower entries never activate
        for q in 0..nq {
            let lb = self.maxes[q] - total;
            let row = &y[q * nk..(q + 1) * nk];
            let buf = &mut self.sorted[q * nk..(q + 1) * nk];
            let mut n = 0;
            for &v in row {
                if v > lb {
                    buf[n] = v;
                    n += 1;
                }
            }
            buf[..n].sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            let pre = &mut self.prefix[q * (nk + 1)..(q + 1) * (nk + 1)];
            pre[0] = T::zero();
            for i in 0..n {
                pre[i + 1] = pre[i] + buf[i];
            }
            self.len[q] = n;
            self.active[q] = 1;
        }

        let stop = T::epsilon() * T::lit(4.0) * scale * T::from_usize(nq).unwrap();
        let mut s = T::zero();
        for _ in 0..(nq * nk + 8) {
            let mut phi = T::zero();
            let mut inv = T::zero();
            for q in 0..nq {
                let a = &self.sorted[q * nk..q * nk + self.len[q]];
                let pre = &self.prefix[q * (nk + 1)..];
                let mut n = self.active[q];
                while n < a.len() {
                    let nn = T::from_usize(n + 1).unwrap();
                    if a[n] >= (pre[n + 1] - s) / nn {
                        n += 1;
                    } else {
                        break;
                    }
                }
                self.active[q] = n;
                let nf = T::from_usize(n).unwrap();
                self.tau[q] = (pre[n] - s) / nf;
                phi = phi + self.tau[q];
                inv = inv + T::one() / nf;
            }
            if phi <= stop {
                break;
            }
            let next = s + phi / inv;
            if !(next > s) {
                break;
            }
            s = next;
        }

        for q in 0..nq {
            let tau = self.tau[q];
            for v in &mut y[q * nk..(q + 1) * nk] {
                *v = (*v - tau).max(T::zero());
            }
        }
    }
}
