//! Plane-wave expansion of a 2D sound field.
//!
//! A field is a finite sum `p(r) = Σ_ℓ α_ℓ exp(−i k n_ℓ·r)` over a dictionary of
//! directions `n_ℓ = (cos θ_ℓ, sin θ_ℓ)`. The pairing between steering vectors
//! and coefficients is the plain bilinear sum, without conjugation.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Wavenumber `2π f / c` in rad/m.
pub fn wavenumber<T: Real>(frequency_hz: T, speed_mps: T) -> Result<T> {
    if !(frequency_hz > T::zero()) || !frequency_hz.is_finite() {
        return Err(Error::Domain(format!(
            "frequency must be positive and finite, got {frequency_hz}"
        )));
    }
    if !(speed_mps > T::zero()) || !speed_mps.is_finite() {
        return Err(Error::Domain(format!(
            "speed of sound must be positive and finite, got {speed_mps}"
        )));
    }
    Ok(T::TAU() * frequency_hz / speed_mps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T = f64> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Square of side `side` centred at the origin.
    pub fn centered_square(side: T) -> Self {
        let h = side / T::lit(2.0);
        Self::new(-h, h, -h, h)
    }

    /// Cell centres of a uniform `nx × ny` grid, in row-major `(i, j)` order.
    pub fn cell_centers(&self, nx: usize, ny: usize) -> Result<Vec<Point2<T>>> {
        if nx == 0 || ny == 0 {
            return Err(Error::Domain(format!("grid resolution {nx}x{ny} is empty")));
        }
        let w = self.x_max - self.x_min;
        let h = self.y_max - self.y_min;
        if !(w > T::zero()) || !(h > T::zero()) || !w.is_finite() || !h.is_finite() {
            return Err(Error::Domain("region has no interior".into()));
        }
        let half = T::lit(0.5);
        let dx = w / T::from_usize(nx).unwrap();
        let dy = h / T::from_usize(ny).unwrap();
        let mut pts = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = self.x_min + (T::from_usize(i).unwrap() + half) * dx;
            for j in 0..ny {
                let y = self.y_min + (T::from_usize(j).unwrap() + half) * dy;
                pts.push(Point2::new(x, y));
            }
        }
        Ok(pts)
    }
}

/// Expansion basis: a frequency and `L` strictly increasing directions in `[−π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveDictionary<T = f64> {
    frequency_hz: T,
    speed_of_sound_mps: T,
    wavenumber_radpm: T,
    directions_rad: Vec<T>,
}

impl<T: Real> PlaneWaveDictionary<T> {
    pub fn new(frequency_hz: T, speed_of_sound_mps: T, directions_rad: Vec<T>) -> Result<Self> {
        let k = wavenumber(frequency_hz, speed_of_sound_mps)?;
        if directions_rad.is_empty() {
            return Err(Error::Domain(
                "dictionary needs at least one direction".into(),
            ));
        }
        let pi = T::PI();
        for (i, &d) in directions_rad.iter().enumerate() {
            if !d.is_finite() || d < -pi || d >= pi {
                return Err(Error::Domain(format!(
                    "direction {i} = {d} outside [-pi, pi)"
                )));
            }
            if i > 0 && d <= directions_rad[i - 1] {
                return Err(Error::Domain(format!(
                    "directions must be strictly increasing (index {i})"
                )));
            }
        }
        Ok(Self {
            frequency_hz,
            speed_of_sound_mps,
            wavenumber_radpm: k,
            directions_rad,
        })
    }

    /// `L` directions `−π + 2πℓ/L`.
    pub fn uniform(frequency_hz: T, speed_of_sound_mps: T, num_directions: usize) -> Result<Self> {
        if num_directions == 0 {
            return Err(Error::Domain(
                "dictionary needs at least one direction".into(),
            ));
        }
        let n = T::from_usize(num_directions).unwrap();
        let dirs = (0..num_directions)
            .map(|l| -T::PI() + T::TAU() * T::from_usize(l).unwrap() / n)
            .collect();
        Self::new(frequency_hz, speed_of_sound_mps, dirs)
    }

    pub fn len(&self) -> usize {
        self.directions_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions_rad.is_empty()
    }

    pub fn frequency_hz(&self) -> T {
        self.frequency_hz
    }

    pub fn speed_of_sound_mps(&self) -> T {
        self.speed_of_sound_mps
    }

    pub fn wavenumber(&self) -> T {
        self.wavenumber_radpm
    }

    pub fn directions(&self) -> &[T] {
        &self.directions_rad
    }

    /// `exp(−i k n_ℓ·r)` for every direction.
    pub fn steering_vector(&self, r: Point2<T>) -> Vec<Complex<T>> {
        let k = self.wavenumber_radpm;
        self.directions_rad
            .iter()
            .map(|&th| {
                let phase = k * (th.cos() * r.x + th.sin() * r.y);
                Complex::new(phase.cos(), -phase.sin())
            })
            .collect()
    }

    /// Stacked steering vectors, one row per sensor (row-major `Q × L`).
    pub fn steering_matrix(&self, array: &SensorArray<T>) -> Vec<Complex<T>> {
        array
            .positions()
            .iter()
            .flat_map(|&r| self.steering_vector(r))
            .collect()
    }

    pub fn field_pressure(
        &self,
        coeffs: &CoefficientVector<T>,
        r: Point2<T>,
    ) -> Result<Complex<T>> {
        self.check_len(coeffs)?;
        Ok(self.pressure_unchecked(coeffs.values(), r))
    }

    fn pressure_unchecked(&self, coeffs: &[Complex<T>], r: Point2<T>) -> Complex<T> {
        let k = self.wavenumber_radpm;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (&th, &a) in self.directions_rad.iter().zip(coeffs) {
            if a.re == T::zero() && a.im == T::zero() {
                continue;
            }
            let phase = k * (th.cos() * r.x + th.sin() * r.y);
            acc = acc + Complex::new(phase.cos(), -phase.sin()) * a;
        }
        acc
    }

    /// Field sampled at the cell centres of a uniform `nx × ny` grid over `region`.
    pub fn field_grid(
        &self,
        coeffs: &CoefficientVector<T>,
        region: Rect<T>,
        nx: usize,
        ny: usize,
    ) -> Result<ComplexGrid<T>> {
        self.check_len(coeffs)?;
        let pts = region.cell_centers(nx, ny)?;
        let values = pts
            .into_iter()
            .map(|r| self.pressure_unchecked(coeffs.values(), r))
            .collect();
        Ok(ComplexGrid { nx, ny, values })
    }

    fn check_len(&self, coeffs: &CoefficientVector<T>) -> Result<()> {
        if coeffs.len() != self.len() {
            return Err(Error::dim("coefficient vector", self.len(), coeffs.len()));
        }
        Ok(())
    }
}

/// Complex plane-wave amplitudes, one per dictionary direction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector<T = f64>(Vec<Complex<T>>);

impl<T: Real> CoefficientVector<T> {
    pub fn new(values: Vec<Complex<T>>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex::new(T::zero(), T::zero()); len])
    }

    /// Unit coefficient at index `l`.
    pub fn unit(len: usize, l: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[l] = Complex::new(T::one(), T::zero());
        v
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex<T>> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of complex moduli.
    pub fn l1_norm(&self) -> T {
        self.0.iter().map(|a| a.norm()).sum()
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        Self(self.0.iter().map(|&a| a * c).collect())
    }
}

impl<T> From<Vec<Complex<T>>> for CoefficientVector<T> {
    fn from(v: Vec<Complex<T>>) -> Self {
        Self(v)
    }
}

/// Microphone positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2<T>>", into = "Vec<Point2<T>>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + serde::de::DeserializeOwned"
))]
pub struct SensorArray<T: Real = f64> {
    positions_m: Vec<Point2<T>>,
}

impl<T: Real> SensorArray<T> {
    pub fn new(positions_m: Vec<Point2<T>>) -> Result<Self> {
        if positions_m.is_empty() {
            return Err(Error::Domain(
                "sensor array needs at least one sensor".into(),
            ));
        }
        if let Some(i) = positions_m.iter().position(|p| !p.is_finite()) {
            return Err(Error::Data(format!("sensor {i} has a non-finite position")));
        }
        Ok(Self { positions_m })
    }

    /// `count` sensors equally spaced on a circle, the first at angle 0.
    pub fn circular(count: usize, radius_m: T) -> Result<Self> {
        let n = T::from_usize(count).unwrap_or(T::one());
        let positions = (0..count)
            .map(|q| {
                let a = T::TAU() * T::from_usize(q).unwrap() / n;
                Point2::new(radius_m * a.cos(), radius_m * a.sin())
            })
            .collect();
        Self::new(positions)
    }

    pub fn positions(&self) -> &[Point2<T>] {
        &self.positions_m
    }

    pub fn len(&self) -> usize {
        self.positions_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions_m.is_empty()
    }

    /// Sub-array with the given sensor indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pts = indices
            .iter()
            .map(|&i| {
                self.positions_m
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::dim("sensor index", self.len(), i))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts)
    }
}

impl<T: Real> TryFrom<Vec<Point2<T>>> for SensorArray<T> {
    type Error = Error;

    fn try_from(v: Vec<Point2<T>>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Real> From<SensorArray<T>> for Vec<Point2<T>> {
    fn from(a: SensorArray<T>) -> Self {
        a.positions_m
    }
}

/// Row-major `nx × ny` matrix of field samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid<T = f64> {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> ComplexGrid<T> {
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.values[i * self.ny + j]
    }
}
