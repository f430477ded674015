//! Discrete measures on the phase circle.
//!
//! The circle `[−π, π)` is sampled at `K` uniform nodes. A complex scalar `α`
//! lifts to a Dirac of mass `|α|` at the node nearest `∠α`; the first Fourier
//! moment `Σ_k e^{iψ_k} m_k` maps a measure back to a complex scalar.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid<T = f64> {
    nodes_rad: Vec<T>,
    /// `e^{iψ_k}` for each node.
    phasors: Vec<Complex<T>>,
}

/// `K` nodes `ψ_k = −π + 2πk/K`.
pub fn make_phase_grid<T: Real>(k: usize) -> Result<PhaseGrid<T>> {
    PhaseGrid::new(k)
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("phase grid needs K >= 2, got {k}")));
        }
        let kk = T::from_usize(k).unwrap();
        let nodes_rad: Vec<T> = (0..k)
            .map(|i| -T::PI() + T::TAU() * T::from_usize(i).unwrap() / kk)
            .collect();
        let phasors = nodes_rad
            .iter()
            .map(|&psi| Complex::new(psi.cos(), psi.sin()))
            .collect();
        Ok(Self { nodes_rad, phasors })
    }

    pub fn len(&self) -> usize {
        self.nodes_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes_rad.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes_rad
    }

    pub fn phasors(&self) -> &[Complex<T>] {
        &self.phasors
    }

    pub fn spacing(&self) -> T {
        T::TAU() / T::from_usize(self.len()).unwrap()
    }

    /// Index of the node closest to `angle` in circular distance; ties go to the lower index.
    pub fn nearest_node(&self, angle: T) -> usize {
        let k = self.len();
        let h = self.spacing();
        let mut pos = (angle + T::PI()) / h;
        let kk = T::from_usize(k).unwrap();
        pos = pos - (pos / kk).floor() * kk;
        let lo = pos.floor();
        let frac = pos - lo;
        let lo_idx = lo.to_usize().unwrap_or(0) % k;
        let hi_idx = (lo_idx + 1) % k;
        let half = T::lit(0.5);
        if frac < half {
            lo_idx
        } else if frac > half {
            hi_idx
        } else {
            lo_idx.min(hi_idx)
        }
    }
}

/// Non-negative masses over the nodes of a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T = f64> {
    masses: Vec<T>,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(masses: Vec<T>) -> Result<Self> {
        if let Some(i) = masses.iter().position(|m| !m.is_finite()) {
            return Err(Error::Data(format!("mass {i} is not finite")));
        }
        if let Some(i) = masses.iter().position(|&m| m < T::zero()) {
            return Err(Error::Domain(format!("mass {i} is negative")));
        }
        Ok(Self { masses })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            masses: vec![T::zero(); k],
        }
    }

    /// Dirac of the given mass at node `index`.
    pub fn dirac(k: usize, index: usize, mass: T) -> Result<Self> {
        let mut m = vec![T::zero(); k];
        *m.get_mut(index)
            .ok_or_else(|| Error::dim("dirac node", k, index))? = mass;
        Self::new(m)
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Number of nodes with mass above `tol`.
    pub fn support_size(&self, tol: T) -> usize {
        self.masses.iter().filter(|&&m| m > tol).count()
    }
}

/// `L` discrete measures over a shared phase grid, stored row-major `L × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMeasure<T = f64> {
    k: usize,
    masses: Vec<T>,
}

impl<T: Real> VectorMeasure<T> {
    pub fn from_rows(rows: Vec<DiscreteMeasure<T>>) -> Result<Self> {
        let k = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut masses = Vec::with_capacity(k * rows.len());
        for r in &rows {
            if r.len() != k {
                return Err(Error::dim("vector measure row", k, r.len()));
            }
            masses.extend_from_slice(r.masses());
        }
        Ok(Self { k, masses })
    }

    /// Takes a flat row-major `L × K` buffer, checking non-negativity.
    pub fn from_flat(k: usize, masses: Vec<T>) -> Result<Self> {
        if k == 0 || masses.len() % k != 0 {
            return Err(Error::dim("vector measure buffer", k, masses.len()));
        }
        DiscreteMeasure::new(masses).map(|m| Self {
            k,
            masses: m.masses,
        })
    }

    pub fn zeros(rows: usize, k: usize) -> Self {
        Self {
            k,
            masses: vec![T::zero(); rows * k],
        }
    }

    pub fn num_rows(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.masses.len() / self.k
        }
    }

    pub fn grid_len(&self) -> usize {
        self.k
    }

    pub fn row(&self, l: usize) -> &[T] {
        &self.masses[l * self.k..(l + 1) * self.k]
    }

    pub fn row_measure(&self, l: usize) -> DiscreteMeasure<T> {
        DiscreteMeasure {
            masses: self.row(l).to_vec(),
        }
    }

    pub fn as_flat(&self) -> &[T] {
        &self.masses
    }

    pub fn total_masses(&self) -> Vec<T> {
        (0..self.num_rows())
            .map(|l| self.row(l).iter().copied().sum())
            .collect()
    }
}

/// Lifts `alpha` to a Dirac of mass `|alpha|` at the node nearest its phase.
pub fn lift_coefficient<T: Real>(alpha: Complex<T>, grid: &PhaseGrid<T>) -> DiscreteMeasure<T> {
    let mut m = DiscreteMeasure::zeros(grid.len());
    let mag = alpha.norm();
    if mag > T::zero() {
        m.masses[grid.nearest_node(alpha.arg())] = mag;
    }
    m
}

/// `Σ_k e^{iψ_k} m_k`.
pub fn first_moment<T: Real>(m: &DiscreteMeasure<T>, grid: &PhaseGrid<T>) -> Result<Complex<T>> {
    if m.len() != grid.len() {
        return Err(Error::dim("first moment", grid.len(), m.len()));
    }
    Ok(moment_of(m.masses(), grid.phasors()))
}

pub(crate) fn moment_of<T: Real>(masses: &[T], phasors: &[Complex<T>]) -> Complex<T> {
    masses
        .iter()
        .zip(phasors)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (&m, &e)| {
            acc + e * m
        })
}

pub fn total_mass<T: Real>(m: &DiscreteMeasure<T>) -> T {
    m.masses.iter().copied().sum()
}

/// Ground cost `c(ψ_j, ψ_k) = |e^{iψ_j} − e^{iψ_k}|² + γ` on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundCost<T = f64> {
    gamma: T,
    k: usize,
    matrix: Vec<T>,
}

pub fn make_ground_cost<T: Real>(grid: &PhaseGrid<T>, gamma: T) -> Result<GroundCost<T>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let k = grid.len();
    let two = T::lit(2.0);
    let mut matrix = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            // circular index distance keeps the matrix exactly symmetric and circulant
            let d = (i + k - j) % k;
            let d = d.min(k - d);
            let angle = grid.spacing() * T::from_usize(d).unwrap();
            matrix.push(two - two * angle.cos() + gamma);
        }
    }
    Ok(GroundCost { gamma, k, matrix })
}

impl<T: Real> GroundCost<T> {
    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, j: usize, k: usize) -> T {
        self.matrix[j * self.k + k]
    }

    /// Row-major `K × K` matrix.
    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }
}
