//! Dual active-set method for `min ½‖x − x₀‖²` subject to `nᵢᵀx ≥ bᵢ`,
//! with constraints supplied one at a time by the caller.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum AddOutcome {
    Added,
    /// Already satisfied at the current point.
    Satisfied,
    /// The constraint is inconsistent with the active set.
    Infeasible,
}

#[derive(Debug, Clone)]
pub(crate) struct ActiveSet<T, P> {
    n: usize,
    pub x: Vec<T>,
    normals: Vec<Vec<T>>,
    rhs: Vec<T>,
    pub mult: Vec<T>,
    pub tags: Vec<P>,
}

impl<T: Real, P: Clone> ActiveSet<T, P> {
    pub fn new(x0: Vec<T>) -> Self {
        Self {
            n: x0.len(),
            x: x0,
            normals: Vec::new(),
            rhs: Vec::new(),
            mult: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn normal(&self, i: usize) -> &[T] {
        &self.normals[i]
    }

    pub fn rhs(&self, i: usize) -> T {
        self.rhs[i]
    }

    fn slack(&self, normal: &[T], b: T) -> T {
        dot(normal, &self.x) - b
    }

    /// Least-squares coefficients `r` of `np` on the active normals and the
    /// orthogonal remainder `z = np − N r`.
    fn decompose(&self, np: &[T]) -> (Vec<T>, Vec<T>) {
        let (n, m) = (self.n, self.normals.len());
        if m == 0 {
            return (Vec::new(), np.to_vec());
        }
        // Householder QR of the n × m matrix of active normals, column-major
        let mut a: Vec<T> = self.normals.iter().flatten().copied().collect();
        let mut qtb = np.to_vec();
        let mut diag = vec![T::zero(); m];
        for c in 0..m {
            let col = &mut a[c * n..(c + 1) * n];
            let norm = col[c..].iter().map(|v| *v * *v).sum::<T>().sqrt();
            let alpha = if col[c] > T::zero() { -norm } else { norm };
            diag[c] = alpha;
            if norm == T::zero() {
                continue;
            }
            col[c] = col[c] - alpha;
            let vnorm2 = col[c..].iter().map(|v| *v * *v).sum::<T>();
            if vnorm2 == T::zero() {
                continue;
            }
            let v: Vec<T> = col[c..].to_vec();
            let reflect = |w: &mut [T]| {
                let s =
                    v.iter().zip(&w[c..]).map(|(a, b)| *a * *b).sum::<T>() * T::lit(2.0) / vnorm2;
                for (wi, vi) in w[c..].iter_mut().zip(&v) {
                    *wi = *wi - s * *vi;
                }
            };
            for c2 in c + 1..m {
                reflect(&mut a[c2 * n..(c2 + 1) * n]);
            }
            reflect(&mut qtb);
        }
        // back substitution with R (upper triangle, diagonal in `diag`)
        let mut r = vec![T::zero(); m];
        for i in (0..m).rev() {
            let mut s = qtb[i];
            for j in i + 1..m {
                s = s - a[j * n + i] * r[j];
            }
            r[i] = if diag[i] != T::zero() {
                s / diag[i]
            } else {
                T::zero()
            };
        }
        let mut z = np.to_vec();
        for (ri, nrm) in r.iter().zip(&self.normals) {
            for (zi, ni) in z.iter_mut().zip(nrm) {
                *zi = *zi - *ri * *ni;
            }
        }
        (r, z)
    }

    fn drop(&mut self, i: usize) {
        self.normals.remove(i);
        self.rhs.remove(i);
        self.mult.remove(i);
        self.tags.remove(i);
    }

    /// Moves to the minimizer over the active set plus `normal·x ≥ b`,
    /// dropping constraints whose multipliers reach zero.
    pub fn add(&mut self, normal: Vec<T>, b: T, tag: P) -> AddOutcome {
        let nn = dot(&normal, &normal);
        let lin_tol = T::epsilon() * T::lit(1e3) * nn;
        let mut up = T::zero();
        for _ in 0..4 * self.n + 8 {
            let s = self.slack(&normal, b);
            if s >= T::zero() && up == T::zero() {
                return AddOutcome::Satisfied;
            }
            let (r, z) = self.decompose(&normal);
            let mut t1 = T::infinity();
            let mut drop_at = None;
            for (i, (&ri, &ui)) in r.iter().zip(&self.mult).enumerate() {
                if ri > T::zero() {
                    let t = ui / ri;
                    if t < t1 {
                        t1 = t;
                        drop_at = Some(i);
                    }
                }
            }
            let zz = dot(&z, &z);
            let t2 = if zz > lin_tol {
                (-s / zz).max(T::zero())
            } else {
                T::infinity()
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return AddOutcome::Infeasible;
            }
            if t2.is_finite() {
                for (xi, zi) in self.x.iter_mut().zip(&z) {
                    *xi = *xi + t * *zi;
                }
            }
            for (ui, ri) in self.mult.iter_mut().zip(&r) {
                *ui = (*ui - t * *ri).max(T::zero());
            }
            up = up + t;
            if t2 <= t1 {
                self.normals.push(normal);
                self.rhs.push(b);
                self.mult.push(up);
                self.tags.push(tag);
                return AddOutcome::Added;
            }
            let i = drop_at.expect("finite partial step has a blocking index");
            self.drop(i);
        }
        AddOutcome::Infeasible
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
