//! Reference estimators: Tikhonov, Lasso and LAD-Lasso over a complex sensing matrix.
//!
//! All three fit `Φ` in `p̃ ≈ GΦ`. The sparse penalties are sums of complex
//! moduli, i.e. group penalties over (real, imaginary) pairs.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, apply, czero, null_space, soft, spectral_norm_sq, stack_square, stack_vec,
    stacked_gram, Cholesky,
};
use crate::model::{CoefficientVector, PlaneWaveDictionary, SensorArray};
use crate::scalar::Real;

/// Stacked steering vectors, row-major `Q × L`, every entry of unit modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> SensingMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain("sensing matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::dim("sensing matrix", rows * cols, data.len()));
        }
        let tol = T::epsilon().sqrt() * T::lit(16.0);
        if let Some(i) = data.iter().position(|z| {
            !z.re.is_finite() || !z.im.is_finite() || (z.norm() - T::one()).abs() > tol
        }) {
            return Err(Error::Data(format!(
                "entry {i} is not a unit-modulus steering value"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_dictionary(dict: &PlaneWaveDictionary<T>, array: &SensorArray<T>) -> Self {
        Self {
            rows: array.len(),
            cols: dict.len(),
            data: dict.steering_matrix(array),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn get(&self, q: usize, l: usize) -> Complex<T> {
        self.data[q * self.cols + l]
    }

    /// `GΦ`.
    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        apply(&self.data, self.cols, x)
    }

    /// `Gᴴ r`.
    pub fn adjoint(&self, r: &[Complex<T>]) -> Vec<Complex<T>> {
        adjoint(&self.data, self.cols, r)
    }

    /// Rows with the given indices.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &q in rows {
            if q >= self.rows {
                return Err(Error::dim("row index", self.rows, q));
            }
            data.extend_from_slice(&self.data[q * self.cols..(q + 1) * self.cols]);
        }
        Ok(Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        })
    }

    fn check_data(&self, p: &[Complex<T>]) -> Result<()> {
        if p.len() != self.rows {
            return Err(Error::dim("measurements", self.rows, p.len()));
        }
        if p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Data("measurements contain NaN/Inf".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions<T = f64> {
    /// Lasso: bound on the scaled gradient-mapping residual.
    pub tol: T,
    /// LAD-Lasso: bound on the certified relative duality gap.
    pub rel_gap: T,
    pub max_iters: usize,
}

impl<T: Real> Default for BaselineOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            rel_gap: T::lit(1e-8),
            max_iters: 100_000,
        }
    }
}

/// `argmin ‖GΦ − p̃‖² + λ‖Φ‖²` via the regularized normal equations.
pub fn tikhonov<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
) -> Result<CoefficientVector<T>> {
    g.check_data(p)?;
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    if lambda == T::zero() && g.rows < g.cols {
        return Err(Error::Rank(format!(
            "unregularized fit with {} measurements and {} unknowns",
            g.rows, g.cols
        )));
    }
    let chol = Cholesky::factor(stacked_gram(&g.data, g.cols, lambda), 2 * g.cols)
        .ok_or_else(|| Error::Rank("normal equations are singular".into()))?;
    Ok(CoefficientVector::new(chol.solve_complex(&g.adjoint(p))))
}

/// `½‖GΦ − p̃‖² + λ Σ|Φ_ℓ|`.
pub fn lasso_objective<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    x: &[Complex<T>],
) -> T {
    let r = g.apply(x);
    let fit: T = r.iter().zip(p).map(|(a, b)| (*a - *b).norm_sqr()).sum();
    fit / T::lit(2.0) + lambda * x.iter().map(|z| z.norm()).sum::<T>()
}

/// `Σ_q |(GΦ − p̃)_q| + λ Σ|Φ_ℓ|`.
pub fn lad_lasso_objective<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    x: &[Complex<T>],
) -> T {
    let r = g.apply(x);
    let fit: T = r.iter().zip(p).map(|(a, b)| (*a - *b).norm()).sum();
    fit + lambda * x.iter().map(|z| z.norm()).sum::<T>()
}

/// Complex Lasso by FISTA with gradient-based restart.
///
/// Small `λ` is reached by continuation: each stage solves for a weight ten
/// times smaller than the last, warm-started from its solution, so iterates
/// stay near the sparse solution path. Within a stage, every 50 iterations
/// Newton refinements on active sets guessed from the current iterate are
/// tried and kept only if they pass the same test. A stage ends once the
/// gradient mapping `‖x − prox(x − t∇f(x))‖∞ / t` falls below
/// `tol · ‖Gᴴp̃‖∞`. The iteration limit covers all stages together.
pub fn lasso<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    opts: &BaselineOptions<T>,
) -> Result<CoefficientVector<T>> {
    g.check_data(p)?;
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = g.cols;
    let gp = g.adjoint(p);
    let scale = gp.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    if scale <= lambda {
        return Ok(CoefficientVector::zeros(n));
    }
    let lip = spectral_norm_sq(&g.data, n, 30, T::lit(1e-10));
    let step = T::one() / lip;
    let grad = |x: &[Complex<T>]| -> Vec<Complex<T>> {
        let r: Vec<Complex<T>> = g.apply(x).iter().zip(p).map(|(a, b)| *a - *b).collect();
        g.adjoint(&r)
    };
    let prox_step = |y: &[Complex<T>], gy: &[Complex<T>], lam: T| -> Vec<Complex<T>> {
        y.iter()
            .zip(gy)
            .map(|(&yi, &gi)| soft(yi - gi * step, lam * step))
            .collect()
    };
    let mapping_residual = |a: &[Complex<T>], b: &[Complex<T>]| -> T {
        a.iter()
            .zip(b)
            .fold(T::zero(), |m, (u, v)| m.max((*u - *v).norm()))
            / step
    };
    let target = opts.tol * scale;

    let mut stages = Vec::new();
    let mut lam = scale / T::lit(10.0);
    while lam > lambda {
        stages.push(lam);
        lam = lam / T::lit(10.0);
    }
    stages.push(lambda);

    let mut x = vec![czero::<T>(); n];
    let mut it = 0;
    let mut residual = T::infinity();
    for &lam in &stages {
        let mut y = x.clone();
        let mut theta = T::one();
        let mut k = 0;
        let solved = 'stage: loop {
            if it >= opts.max_iters {
                break 'stage None;
            }
            it += 1;
            k += 1;
            let gy = grad(&y);
            let xn = prox_step(&y, &gy, lam);
            // restart when the momentum direction opposes the gradient step
            let restart = gy
                .iter()
                .zip(xn.iter().zip(&x))
                .map(|(gi, (a, b))| (gi.conj() * (*a - *b)).re)
                .sum::<T>()
                > T::zero();
            let theta_n =
                (T::one() + (T::one() + T::lit(4.0) * theta * theta).sqrt()) / T::lit(2.0);
            let mom = if restart {
                T::zero()
            } else {
                (theta - T::one()) / theta_n
            };
            y = xn
                .iter()
                .zip(&x)
                .map(|(&a, &b)| a + (a - b) * mom)
                .collect();
            theta = if restart { T::one() } else { theta_n };
            x = xn;

            if k % 10 == 0 {
                let xp = prox_step(&x, &grad(&x), lam);
                residual = mapping_residual(&x, &xp);
                if residual <= target {
                    break 'stage Some(xp);
                }
                // finish with Newton on the optimality system once FISTA is close
                if k % 50 == 0 {
                    let polished = lasso_polish(g, p, lam, &x, target / T::lit(10.0))
                        .into_iter()
                        .find_map(|xs| {
                            let xsp = prox_step(&xs, &grad(&xs), lam);
                            (mapping_residual(&xs, &xsp) <= target).then_some(xsp)
                        });
                    if let Some(xs) = polished {
                        break 'stage Some(xs);
                    }
                }
            }
        };
        match solved {
            Some(xs) => x = xs,
            None => break,
        }
        if lam == lambda {
            return Ok(CoefficientVector::new(x));
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iters,
        residual: (residual / scale).as_f64(),
    })
}

/// Damped Newton on `½‖G_A z − p̃‖² + λ Σ|z_ℓ|` over a fixed support `A`,
/// which is smooth while every entry stays non-zero. Stops early if an entry
/// collapses towards zero so the caller can drop it.
fn lasso_support_newton<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    support: &[usize],
    z0: &[Complex<T>],
    tol: T,
) -> Option<Vec<Complex<T>>> {
    let s = support.len();
    let n = 2 * s;
    let sub: Vec<Complex<T>> = (0..g.rows)
        .flat_map(|q| support.iter().map(move |&l| g.get(q, l)))
        .collect();
    let gram = stacked_gram(&sub, s, T::zero());
    let ridge0 =
        (0..n).fold(T::zero(), |m, i| m.max(gram[i * n + i])) * T::epsilon() * T::lit(16.0);
    let objective = |z: &[Complex<T>]| -> T {
        let r = apply(&sub, s, z);
        r.iter()
            .zip(p)
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum::<T>()
            / T::lit(2.0)
            + lambda * z.iter().map(|v| v.norm()).sum::<T>()
    };
    let gradient_norm = |z: &[Complex<T>]| -> T {
        let r: Vec<Complex<T>> = apply(&sub, s, z)
            .iter()
            .zip(p)
            .map(|(a, b)| *a - *b)
            .collect();
        adjoint(&sub, s, &r)
            .iter()
            .zip(z)
            .map(|(gi, zi)| {
                let m = zi.norm();
                if m > T::zero() {
                    (*gi + *zi / m * lambda).norm()
                } else {
                    T::infinity()
                }
            })
            .fold(T::zero(), T::max)
    };
    let mut z = z0.to_vec();
    let mut f = objective(&z);
    for _ in 0..100 {
        let r: Vec<Complex<T>> = apply(&sub, s, &z)
            .iter()
            .zip(p)
            .map(|(a, b)| *a - *b)
            .collect();
        let mut grad = adjoint(&sub, s, &r);
        let mut h = gram.clone();
        let zmax = z.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        for (i, zi) in z.iter().enumerate() {
            let m = zi.norm();
            // a collapsing entry is left for the caller to drop
            if m <= zmax * T::lit(1e-12) {
                return Some(z);
            }
            let u = *zi / m;
            grad[i] = grad[i] + u * lambda;
            // curvature of λ|z| is λ(I − ûûᵀ)/|z| in the (re, im) plane
            let c = lambda / m;
            h[i * n + i] = h[i * n + i] + c * (T::one() - u.re * u.re);
            h[(s + i) * n + s + i] = h[(s + i) * n + s + i] + c * (T::one() - u.im * u.im);
            h[i * n + s + i] = h[i * n + s + i] - c * u.re * u.im;
            h[(s + i) * n + i] = h[(s + i) * n + i] - c * u.re * u.im;
        }
        if grad.iter().fold(T::zero(), |m, v| m.max(v.norm())) <= tol {
            return Some(z);
        }
        // a ridge keeps the direction a descent one when H is singular
        let mut ridge = T::zero();
        let chol = loop {
            let mut hr = h.clone();
            for i in 0..n {
                hr[i * n + i] = hr[i * n + i] + ridge;
            }
            if let Some(c) = Cholesky::factor(hr, n) {
                break c;
            }
            ridge = if ridge == T::zero() {
                ridge0
            } else {
                ridge * T::lit(100.0)
            };
            if !ridge.is_finite() {
                return None;
            }
        };
        let d = chol.solve_complex(&grad);
        let gnorm = grad.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        let mut step = T::one();
        loop {
            let trial: Vec<Complex<T>> = z.iter().zip(&d).map(|(a, b)| *a - *b * step).collect();
            if trial
                .iter()
                .zip(&z)
                .any(|(t, x)| t.norm() < x.norm() * T::lit(0.1))
            {
                step = step / T::lit(2.0);
                if step < T::lit(1e-12) {
                    return Some(z);
                }
                continue;
            }
            let ft = objective(&trial);
            // objective differences below rounding cannot rank points; fall
            // back to the gradient for a full step
            let flat = step == T::one()
                && ft <= f + T::epsilon() * T::lit(64.0) * f.abs()
                && gradient_norm(&trial) < gnorm;
            if ft < f || flat {
                z = trial;
                f = ft;
                break;
            }
            step = step / T::lit(2.0);
            if step < T::lit(1e-12) {
                return Some(z);
            }
        }
    }
    Some(z)
}

/// Candidate minimizers from active sets read off the residual of `x` at a
/// few thresholds, each refined by [`lasso_support_newton`] with entries
/// dropped when they vanish and violated constraints added one at a time.
fn lasso_polish<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    x: &[Complex<T>],
    tol: T,
) -> Vec<Vec<Complex<T>>> {
    let r: Vec<Complex<T>> = g.apply(x).iter().zip(p).map(|(a, b)| *a - *b).collect();
    let h = g.adjoint(&r);
    let mut order: Vec<usize> = (0..g.cols).collect();
    order.sort_by(|&a, &b| {
        h[b].norm()
            .partial_cmp(&h[a].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let xmax = x.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let seed = |l: usize, hl: Complex<T>| -> Complex<T> {
        if x[l] != czero() {
            x[l]
        } else if hl != czero() {
            -hl / hl.norm() * (xmax * T::lit(1e-6)).max(T::min_positive_value())
        } else {
            Complex::new(xmax * T::lit(1e-6), T::zero())
        }
    };
    let mut out = Vec::new();
    let mut tried: Vec<Vec<usize>> = Vec::new();
    for delta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
        let cut = lambda * (T::one() - T::lit(delta));
        let mut active: Vec<usize> = order
            .iter()
            .copied()
            .take(2 * g.rows)
            .filter(|&l| h[l].norm() >= cut)
            .collect();
        active.sort_unstable();
        let mut z0: Vec<Complex<T>> = active.iter().map(|&l| seed(l, h[l])).collect();
        while !active.is_empty() && !tried.contains(&active) {
            tried.push(active.clone());
            let Some(z) = lasso_support_newton(g, p, lambda, &active, &z0, tol) else {
                break;
            };
            let zmax = z.iter().fold(T::zero(), |m, v| m.max(v.norm()));
            let keep: Vec<bool> = z.iter().map(|v| v.norm() > zmax * T::lit(1e-9)).collect();
            if keep.iter().any(|k| !k) {
                let (a, zz): (Vec<usize>, Vec<Complex<T>>) = active
                    .iter()
                    .zip(&z)
                    .zip(&keep)
                    .filter(|(_, &k)| k)
                    .map(|((&l, &v), _)| (l, v))
                    .unzip();
                active = a;
                z0 = zz;
                continue;
            }
            let mut xs = vec![czero::<T>(); g.cols];
            for (&l, &v) in active.iter().zip(&z) {
                xs[l] = v;
            }
            let rs: Vec<Complex<T>> = g.apply(&xs).iter().zip(p).map(|(a, b)| *a - *b).collect();
            let hs = g.adjoint(&rs);
            let violator = (0..g.cols)
                .filter(|l| !active.contains(l))
                .map(|l| (l, hs[l].norm()))
                .filter(|&(_, m)| m > lambda)
                .fold(None, |acc: Option<(usize, T)>, (l, m)| match acc {
                    Some((_, best)) if best >= m => acc,
                    _ => Some((l, m)),
                });
            out.push(xs);
            // generic minimizers have at most 2Q active columns
            // generic minimizers have at most 2Q active columns
            let Some((l, _)) = violator.filter(|_| active.len() < 2 * g.rows) else {
                break;
            };
            let pos = active.partition_point(|&a| a < l);
            active.insert(pos, l);
            z0 = z;
            z0.insert(pos, -hs[l] / hs[l].norm() * (zmax * T::lit(1e-6)));
        }
    }
    out
}

/// Minimizer of `Σ_{q∉R} |(GΦ − p̃)_q| + λ Σ_S |Φ_ℓ|` subject to `(GΦ)_q = p̃_q`
/// on `R`, with `Φ` supported on `S`, by Newton steps in the null space of the
/// equality rows. Smooth while no modulus vanishes. Returns the restricted
/// point and the multipliers of the equality rows.
fn lad_pattern_newton<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    support: &[usize],
    fitted: &[usize],
    z0: &[Complex<T>],
) -> Option<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    let s = support.len();
    let nf = fitted.len();
    if s == 0 || nf > s {
        return None;
    }
    let n = 2 * s;
    let free: Vec<usize> = (0..g.rows).filter(|q| !fitted.contains(q)).collect();
    let row = |q: usize| -> Vec<Complex<T>> { support.iter().map(|&l| g.get(q, l)).collect() };
    let a: Vec<Complex<T>> = fitted.iter().flat_map(|&q| row(q)).collect();
    let b: Vec<Complex<T>> = fitted.iter().map(|&q| p[q]).collect();
    let rows_free: Vec<Vec<Complex<T>>> = free.iter().map(|&q| row(q)).collect();
    // A Aᴴ for the feasibility projection and the multipliers
    let aah = if nf > 0 {
        let m: Vec<Complex<T>> = (0..nf)
            .flat_map(|i| (0..nf).map(move |j| (i, j)))
            .map(|(i, j)| {
                (0..s).fold(czero::<T>(), |acc, c| {
                    acc + a[i * s + c] * a[j * s + c].conj()
                })
            })
            .collect();
        Some(Cholesky::factor(stack_square(&m, nf), 2 * nf)?)
    } else {
        None
    };
    let row_dot = |gr: &[Complex<T>], z: &[Complex<T>]| {
        gr.iter()
            .zip(z)
            .fold(czero::<T>(), |acc, (x, y)| acc + *x * *y)
    };
    let objective = |z: &[Complex<T>]| -> T {
        let fit: T = rows_free
            .iter()
            .zip(&free)
            .map(|(gr, &q)| (row_dot(gr, z) - p[q]).norm())
            .sum();
        fit + lambda * z.iter().map(|v| v.norm()).sum::<T>()
    };
    let i_unit = Complex::new(T::zero(), T::one());
    let derivatives = |z: &[Complex<T>]| -> Option<(Vec<Complex<T>>, Vec<T>)> {
        let mut grad = vec![czero::<T>(); s];
        let mut h = vec![T::zero(); n * n];
        let mut rank_one = |v: Vec<T>, c: T| {
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = h[i * n + j] + c * v[i] * v[j];
                }
            }
        };
        for (gr, &q) in rows_free.iter().zip(&free) {
            let rq = row_dot(gr, z) - p[q];
            let m = rq.norm();
            if m == T::zero() {
                return None;
            }
            let u = rq / m;
            for (gi, x) in grad.iter_mut().zip(gr) {
                *gi = *gi + x.conj() * u;
            }
            // the curvature of |r| is (iû)(iû)ᵀ/|r| in the residual plane
            let v: Vec<Complex<T>> = gr.iter().map(|x| x.conj() * u * i_unit).collect();
            rank_one(stack_vec(&v), T::one() / m);
        }
        for (i, zi) in z.iter().enumerate() {
            let m = zi.norm();
            if m == T::zero() {
                return None;
            }
            grad[i] = grad[i] + *zi / m * lambda;
            let mut v = vec![czero::<T>(); s];
            v[i] = *zi / m * i_unit;
            rank_one(stack_vec(&v), lambda / m);
        }
        Some((grad, h))
    };

    let mut z = z0.to_vec();
    if let Some(c) = &aah {
        let res: Vec<Complex<T>> = apply(&a, s, &z)
            .iter()
            .zip(&b)
            .map(|(u, v)| *v - *u)
            .collect();
        let t = c.solve_complex(&res);
        for (zi, ci) in z.iter_mut().zip(adjoint(&a, s, &t)) {
            *zi = *zi + ci;
        }
    }
    let cons: Vec<Vec<T>> = (0..nf)
        .flat_map(|i| {
            let ai = &a[i * s..(i + 1) * s];
            let re: Vec<T> = ai
                .iter()
                .map(|x| x.re)
                .chain(ai.iter().map(|x| -x.im))
                .collect();
            let im: Vec<T> = ai
                .iter()
                .map(|x| x.im)
                .chain(ai.iter().map(|x| x.re))
                .collect();
            [re, im]
        })
        .collect();
    let (basis, _) = null_space(&cons, n);
    let nb = basis.len();
    let mut f = objective(&z);
    for _ in 0..60 {
        if nb == 0 {
            break;
        }
        let (grad, h) = derivatives(&z)?;
        let gs = stack_vec(&grad);
        let hb: Vec<Vec<T>> = basis
            .iter()
            .map(|v| {
                (0..n)
                    .map(|i| (0..n).map(|j| h[i * n + j] * v[j]).sum())
                    .collect()
            })
            .collect();
        let mut red = vec![T::zero(); nb * nb];
        for i in 0..nb {
            for j in 0..nb {
                red[i * nb + j] = basis[i].iter().zip(&hb[j]).map(|(x, y)| *x * *y).sum();
            }
        }
        let dmax = (0..nb).fold(T::zero(), |m, i| m.max(red[i * nb + i]));
        for i in 0..nb {
            red[i * nb + i] = red[i * nb + i] + dmax * T::lit(1e-13);
        }
        let mut u: Vec<T> = basis
            .iter()
            .map(|v| -v.iter().zip(&gs).map(|(x, y)| *x * *y).sum::<T>())
            .collect();
        Cholesky::factor(red, nb)?.solve(&mut u);
        let mut dv = vec![T::zero(); n];
        for (v, &c) in basis.iter().zip(&u) {
            for (d, x) in dv.iter_mut().zip(v) {
                *d = *d + c * *x;
            }
        }
        let d: Vec<Complex<T>> = (0..s).map(|i| Complex::new(dv[i], dv[s + i])).collect();
        let dnorm = d.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        let znorm = z.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        if dnorm <= T::epsilon() * T::lit(16.0) * znorm {
            break;
        }
        let reduced_norm = |gr: &[Complex<T>]| -> T {
            let gv = stack_vec(gr);
            basis
                .iter()
                .map(|v| v.iter().zip(&gv).map(|(x, y)| *x * *y).sum::<T>().abs())
                .fold(T::zero(), T::max)
        };
        let mut step = T::one();
        while step >= T::lit(1e-12) {
            let trial: Vec<Complex<T>> = z.iter().zip(&d).map(|(x, y)| *x + *y * step).collect();
            // radial directions carry no curvature, so cap how fast any entry
            // may approach the kink at zero
            if trial
                .iter()
                .zip(&z)
                .any(|(t, x)| t.norm() < x.norm() * T::lit(0.1))
            {
                step = step / T::lit(2.0);
                continue;
            }
            let ft = objective(&trial);
            // near the optimum the objective is flat to rounding; a full step
            // that shrinks the reduced gradient is still progress
            let flat = step == T::one()
                && ft <= f + T::epsilon() * T::lit(64.0) * f.abs()
                && derivatives(&trial)
                    .is_some_and(|(gt, _)| reduced_norm(&gt) < reduced_norm(&grad));
            if ft < f || flat {
                z = trial;
                f = ft;
                break;
            }
            step = step / T::lit(2.0);
        }
        if step < T::lit(1e-12) {
            break;
        }
    }
    // ν minimizing ‖∇f + Aᴴν‖
    let nu = match &aah {
        Some(c) => {
            let (grad, _) = derivatives(&z)?;
            let rhs: Vec<Complex<T>> = apply(&a, s, &grad).iter().map(|v| -*v).collect();
            c.solve_complex(&rhs)
        }
        None => Vec::new(),
    };
    Some((z, nu))
}

/// Candidate LAD-Lasso minimizers, each with a dual candidate, obtained by
/// [`lad_pattern_newton`] on the sparsity pattern of the iterate `(w, r)` and
/// on patterns reached from it by single changes: a vanishing coefficient or
/// residual changes side, and otherwise the most violated dual constraint is
/// released.
fn lad_lasso_polish<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    w: &[Complex<T>],
    r: &[Complex<T>],
) -> Vec<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    let mut support: Vec<usize> = (0..g.cols).filter(|&l| w[l] != czero()).collect();
    let mut fitted: Vec<usize> = (0..g.rows).filter(|&q| r[q] == czero()).collect();
    let mut z0: Vec<Complex<T>> = support.iter().map(|&l| w[l]).collect();
    let pscale = p.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let vanish = T::lit(1e-9);
    let mut out = Vec::new();
    let mut tried: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for _ in 0..4 * (g.rows + g.cols) {
        if tried.contains(&(support.clone(), fitted.clone())) {
            break;
        }
        tried.push((support.clone(), fitted.clone()));
        let Some((z, nu)) = lad_pattern_newton(g, p, lambda, &support, &fitted, &z0) else {
            break;
        };
        let zmax = z.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        if let Some(i) = (0..z.len()).find(|&i| z[i].norm() <= vanish * zmax) {
            support.remove(i);
            z0 = z;
            z0.remove(i);
            continue;
        }
        let mut phi = vec![czero::<T>(); g.cols];
        for (&l, &v) in support.iter().zip(&z) {
            phi[l] = v;
        }
        let res: Vec<Complex<T>> = g.apply(&phi).iter().zip(p).map(|(a, b)| *a - *b).collect();
        if let Some(q) =
            (0..g.rows).find(|&q| !fitted.contains(&q) && res[q].norm() <= vanish * pscale)
        {
            let pos = fitted.partition_point(|&x| x < q);
            fitted.insert(pos, q);
            z0 = z;
            continue;
        }
        let mut y = vec![czero::<T>(); g.rows];
        for q in 0..g.rows {
            if !fitted.contains(&q) {
                y[q] = res[q] / res[q].norm();
            }
        }
        for (&q, &v) in fitted.iter().zip(&nu) {
            y[q] = v;
        }
        let gy = g.adjoint(&y);
        // relative violations of |(Gᴴy)_ℓ| ≤ λ off the support and |y_q| ≤ 1 on R
        let coef = (0..g.cols)
            .filter(|l| !support.contains(l))
            .map(|l| (l, gy[l].norm() / lambda - T::one()))
            .fold(None, |acc: Option<(usize, T)>, (l, v)| match acc {
                Some((_, best)) if best >= v => acc,
                _ => Some((l, v)),
            });
        let sens = fitted
            .iter()
            .enumerate()
            .map(|(i, &q)| (i, y[q].norm() - T::one()))
            .fold(None, |acc: Option<(usize, T)>, (i, v)| match acc {
                Some((_, best)) if best >= v => acc,
                _ => Some((i, v)),
            });
        out.push((phi, y.clone()));
        let tol = T::epsilon() * T::lit(1e3);
        match (coef, sens) {
            (Some((l, cv)), sv) if cv > tol && sv.is_none_or(|(_, v)| cv >= v) => {
                let pos = support.partition_point(|&x| x < l);
                support.insert(pos, l);
                z0 = z;
                z0.insert(pos, -gy[l] / gy[l].norm() * (zmax * T::lit(1e-6)));
            }
            (_, Some((i, sv))) if sv > tol => {
                fitted.remove(i);
                z0 = z;
            }
            _ => break,
        }
    }
    out
}

const MAX_RHO_CHANGES: usize = 20;

/// Complex LAD-Lasso by ADMM on `GΦ − r = p̃`, `Φ − w = 0`.
///
/// Both non-smooth terms have closed-form complex soft-threshold proxes; the
/// `Φ`-update reuses one factorization of `GᴴG + I`. Terminates on a duality
/// gap certified by a scaled multiplier `y` with `|y_q| ≤ 1`, `|(Gᴴy)_ℓ| ≤ λ`.
/// When the sparsity pattern of the iterate stops changing, a Newton step on
/// that pattern is tried and kept if its own certificate closes the gap.
pub fn lad_lasso<T: Real>(
    g: &SensingMatrix<T>,
    p: &[Complex<T>],
    lambda: T,
    opts: &BaselineOptions<T>,
) -> Result<CoefficientVector<T>> {
    g.check_data(p)?;
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (nq, nl) = (g.rows, g.cols);
    let pscale = p.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    if pscale == T::zero() {
        return Ok(CoefficientVector::zeros(nl));
    }
    let chol = Cholesky::factor(stacked_gram(&g.data, nl, T::one()), 2 * nl)
        .ok_or_else(|| Error::Rank("GᴴG + I is not positive definite".into()))?;

    // scaling ρ with the data keeps the iterates positively homogeneous in p̃
    let mut rho = T::one() / pscale;
    let mut phi = vec![czero::<T>(); nl];
    let mut w = vec![czero::<T>(); nl];
    let mut r: Vec<Complex<T>> = p.iter().map(|z| -*z).collect();
    let mut u1 = vec![czero::<T>(); nq];
    let mut u2 = vec![czero::<T>(); nl];
    let mut gap = T::infinity();
    let mut adaptations = 0;
    let mut last_pattern = Vec::new();
    let mut tried_pattern = Vec::new();

    let dual_value = |y: &[Complex<T>]| -> Option<T> {
        let ymax = y.iter().fold(T::zero(), |m, z| m.max(z.norm()));
        let gy = g.adjoint(y);
        let gmax = gy.iter().fold(T::zero(), |m, z| m.max(z.norm()));
        let s = T::one().max(ymax).max(gmax / lambda);
        if !s.is_finite() {
            return None;
        }
        Some(-y.iter().zip(p).map(|(a, b)| (a.conj() * b).re).sum::<T>() / s)
    };

    for it in 0..opts.max_iters {
        let rhs: Vec<Complex<T>> = {
            let t: Vec<Complex<T>> = (0..nq).map(|q| p[q] + r[q] - u1[q]).collect();
            g.adjoint(&t)
                .into_iter()
                .zip(w.iter().zip(&u2))
                .map(|(a, (&wi, &ui))| a + wi - ui)
                .collect()
        };
        phi = chol.solve_complex(&rhs);
        let gphi = g.apply(&phi);
        let r_old = r.clone();
        let w_old = w.clone();
        for q in 0..nq {
            r[q] = soft(gphi[q] - p[q] + u1[q], T::one() / rho);
        }
        for l in 0..nl {
            w[l] = soft(phi[l] + u2[l], lambda / rho);
        }
        let mut prim = T::zero();
        for q in 0..nq {
            let d = gphi[q] - p[q] - r[q];
            u1[q] = u1[q] + d;
            prim = prim + d.norm_sqr();
        }
        for l in 0..nl {
            let d = phi[l] - w[l];
            u2[l] = u2[l] + d;
            prim = prim + d.norm_sqr();
        }

        if it % 10 == 9 {
            let primal = lad_lasso_objective(g, p, lambda, &w);
            let y_admm: Vec<Complex<T>> = u1.iter().map(|z| *z * rho).collect();
            let res = g.apply(&w);
            let y_dir: Vec<Complex<T>> = res
                .iter()
                .zip(p)
                .map(|(a, b)| {
                    let d = *a - *b;
                    let m = d.norm();
                    if m > T::zero() {
                        d / m
                    } else {
                        czero()
                    }
                })
                .collect();
            let dual = [dual_value(&y_admm), dual_value(&y_dir)]
                .into_iter()
                .flatten()
                .fold(T::neg_infinity(), T::max);
            gap = (primal - dual).max(T::zero());
            let done = gap <= opts.rel_gap * primal;
            // once the sparsity pattern of (w, r) settles, try finishing on it;
            // on convergence a pattern point with a smaller certified gap wins
            let pattern: Vec<bool> = w.iter().chain(&r).map(|z| *z != czero()).collect();
            if done || (pattern == last_pattern && pattern != tried_pattern) {
                tried_pattern = pattern.clone();
                for (phi_p, y_p) in lad_lasso_polish(g, p, lambda, &w, &r) {
                    let primal_p = lad_lasso_objective(g, p, lambda, &phi_p);
                    let dual_p = dual_value(&y_p).unwrap_or(T::neg_infinity()).max(dual);
                    let gap_p = primal_p - dual_p;
                    if gap_p <= opts.rel_gap * primal_p
                        && (!done || gap_p * primal < gap * primal_p)
                    {
                        return Ok(CoefficientVector::new(phi_p));
                    }
                }
            }
            if done {
                return Ok(CoefficientVector::new(w));
            }
            last_pattern = pattern;

            // residual balancing; the Φ-system does not depend on ρ
            let dr: Vec<Complex<T>> = r.iter().zip(&r_old).map(|(a, b)| *a - *b).collect();
            let mut s = g.adjoint(&dr);
            for l in 0..nl {
                s[l] = s[l] + (w[l] - w_old[l]);
            }
            let dual_res = rho * s.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
            let prim_res = prim.sqrt();
            let ten = T::lit(10.0);
            // a bounded number of changes keeps ADMM's convergence guarantee
            if adaptations < MAX_RHO_CHANGES {
                if prim_res > ten * dual_res {
                    rho = rho * T::lit(2.0);
                    u1.iter_mut()
                        .chain(u2.iter_mut())
                        .for_each(|z| *z = *z / T::lit(2.0));
                    adaptations += 1;
                } else if dual_res > ten * prim_res {
                    rho = rho / T::lit(2.0);
                    u1.iter_mut()
                        .chain(u2.iter_mut())
                        .for_each(|z| *z = *z * T::lit(2.0));
                    adaptations += 1;
                }
            }
        }
    }
    let _ = phi;
    Err(Error::Convergence {
        iterations: opts.max_iters,
        residual: gap.as_f64(),
    })
}
