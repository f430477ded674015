//! Small dense helpers for complex `Q × L` matrices stored row-major.

use num_complex::Complex;

use crate::scalar::Real;

pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `G x`.
pub(crate) fn apply<T: Real>(g: &[Complex<T>], cols: usize, x: &[Complex<T>]) -> Vec<Complex<T>> {
    g.chunks(cols)
        .map(|row| row.iter().zip(x).fold(czero(), |acc, (&a, &b)| acc + a * b))
        .collect()
}

/// `Gᴴ r`.
pub(crate) fn adjoint<T: Real>(g: &[Complex<T>], cols: usize, r: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = vec![czero(); cols];
    for (row, &ri) in g.chunks(cols).zip(r) {
        for (o, &a) in out.iter_mut().zip(row) {
            *o = *o + a.conj() * ri;
        }
    }
    out
}

/// Largest squared singular value of `G` by power iteration on `GᴴG`.
pub(crate) fn spectral_norm_sq<T: Real>(g: &[Complex<T>], cols: usize, iters: usize, tol: T) -> T {
    let mut v: Vec<Complex<T>> = (0..cols)
        .map(|i| Complex::new(T::one(), T::from_usize(i).unwrap() * T::lit(1e-3)))
        .collect();
    let mut est = T::zero();
    for _ in 0..iters {
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if nv == T::zero() {
            return T::zero();
        }
        v.iter_mut().for_each(|z| *z = *z / nv);
        let w = adjoint(g, cols, &apply(g, cols, &v));
        let next = w.iter().zip(&v).map(|(a, b)| (b.conj() * a).re).sum::<T>();
        v = w;
        let done = (next - est).abs() <= tol * next.abs();
        est = next;
        if done {
            break;
        }
    }
    // power iteration approaches from below; the margin keeps 1/L a valid step
    est * T::lit(1.01)
}

/// Real-symmetric `[[Re H + sI, −Im H], [Im H, Re H + sI]]` for `H = GᴴG`.
pub(crate) fn stacked_gram<T: Real>(g: &[Complex<T>], cols: usize, shift: T) -> Vec<T> {
    let n = 2 * cols;
    let mut h = vec![czero::<T>(); cols * cols];
    for row in g.chunks(cols) {
        for a in 0..cols {
            let ca = row[a].conj();
            for b in 0..cols {
                h[a * cols + b] = h[a * cols + b] + ca * row[b];
            }
        }
    }
    let mut m = vec![T::zero(); n * n];
    for a in 0..cols {
        for b in 0..cols {
            let z = h[a * cols + b];
            let d = if a == b { shift } else { T::zero() };
            m[a * n + b] = z.re + d;
            m[a * n + cols + b] = -z.im;
            m[(cols + a) * n + b] = z.im;
            m[(cols + a) * n + cols + b] = z.re + d;
        }
    }
    m
}

/// Stacked real form `[[Re A, −Im A], [Im A, Re A]]` of a square complex matrix.
pub(crate) fn stack_square<T: Real>(a: &[Complex<T>], n: usize) -> Vec<T> {
    let m = 2 * n;
    let mut out = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a[i * n + j];
            out[i * m + j] = z.re;
            out[i * m + n + j] = -z.im;
            out[(n + i) * m + j] = z.im;
            out[(n + i) * m + n + j] = z.re;
        }
    }
    out
}

/// `[Re z; Im z]`.
pub(crate) fn stack_vec<T: Real>(z: &[Complex<T>]) -> Vec<T> {
    z.iter()
        .map(|v| v.re)
        .chain(z.iter().map(|v| v.im))
        .collect()
}

/// Orthonormal basis of `{ x ∈ ℝⁿ : rᵢᵀx = 0 }` from a Householder QR of the
/// rows `rᵢ`, together with the numerical rank of the rows.
pub(crate) fn null_space<T: Real>(rows: &[Vec<T>], n: usize) -> (Vec<Vec<T>>, usize) {
    let m = rows.len();
    let mut a: Vec<Vec<T>> = rows.to_vec();
    let scale = a.iter().flatten().fold(T::zero(), |s, v| s.max(v.abs()));
    let tol = scale * T::epsilon() * T::from_usize(4 * n.max(1)).unwrap();
    let mut reflectors: Vec<(usize, Vec<T>)> = Vec::new();
    let mut rank = 0;
    for c in 0..m {
        if rank == n {
            break;
        }
        let col = &a[c];
        let norm = col[rank..].iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm <= tol {
            continue;
        }
        let alpha = if col[rank] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = col[rank..].to_vec();
        v[0] = v[0] - alpha;
        let vv = v.iter().map(|x| *x * *x).sum::<T>();
        if vv == T::zero() {
            rank += 1;
            continue;
        }
        for col2 in a.iter_mut().skip(c) {
            let s = v.iter().zip(&col2[rank..]).map(|(x, y)| *x * *y).sum::<T>() * T::lit(2.0) / vv;
            for (w, x) in col2[rank..].iter_mut().zip(&v) {
                *w = *w - s * *x;
            }
        }
        let vn = vv.sqrt();
        reflectors.push((rank, v.iter().map(|x| *x / vn).collect()));
        rank += 1;
    }
    // columns rank..n of Q = H₁ ⋯ H_r
    let basis = (rank..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            for (off, v) in reflectors.iter().rev() {
                let s = v.iter().zip(&e[*off..]).map(|(x, y)| *x * *y).sum::<T>() * T::lit(2.0);
                for (w, x) in e[*off..].iter_mut().zip(v) {
                    *w = *w - s * *x;
                }
            }
            e
        })
        .collect();
    (basis, rank)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub(crate) struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// `None` when a pivot falls below a scale-relative threshold.
    pub fn factor(mut a: Vec<T>, n: usize) -> Option<Self> {
        let dmax = (0..n).fold(T::zero(), |m, i| m.max(a[i * n + i].abs()));
        let floor =
            T::epsilon() * T::from_usize(4 * n.max(1)).unwrap() * dmax.max(T::min_positive_value());
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d = d - a[j * n + k] * a[j * n + k];
            }
            if !(d > floor) {
                return None;
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s = s - a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        Some(Self { n, l: a })
    }

    pub fn solve(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves the stacked-real system for a complex right-hand side.
    pub fn solve_complex(&self, rhs: &[Complex<T>]) -> Vec<Complex<T>> {
        let m = rhs.len();
        let mut b: Vec<T> = rhs
            .iter()
            .map(|z| z.re)
            .chain(rhs.iter().map(|z| z.im))
            .collect();
        self.solve(&mut b);
        (0..m).map(|i| Complex::new(b[i], b[m + i])).collect()
    }
}

/// Complex soft threshold `z · max(0, 1 − t/|z|)`.
#[inline]
pub(crate) fn soft<T: Real>(z: Complex<T>, t: T) -> Complex<T> {
    let m = z.norm();
    if m <= t {
        czero()
    } else {
        z * ((m - t) / m)
    }
}
