//! Synthetic scenes and phase-perturbed, noisy microphone measurements.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{wavenumber, ComplexGrid, PlaneWaveDictionary, Point2, Rect, SensorArray};
use crate::Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_true_waves: usize,
    pub frequency_hz: f64,
    pub speed_of_sound_mps: f64,
    pub array_radius_m: f64,
    pub num_sensors: usize,
    pub sigma_delta_rad: f64,
    pub snr_db: f64,
    pub rng_seed: u64,
    /// Number of dictionary directions `L` used by the estimators.
    pub estimation_grid_size: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_true_waves: 3,
            frequency_hz: 1000.0,
            speed_of_sound_mps: 343.0,
            array_radius_m: 0.25,
            num_sensors: 9,
            sigma_delta_rad: 0.0,
            snr_db: 15.0,
            rng_seed: 0,
            estimation_grid_size: 50,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_true_waves == 0 {
            return fail("num_true_waves must be at least 1".into());
        }
        if self.num_sensors == 0 {
            return fail("num_sensors must be at least 1".into());
        }
        if self.estimation_grid_size == 0 {
            return fail("estimation_grid_size must be at least 1".into());
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return fail(format!(
                "frequency_hz must be positive, got {}",
                self.frequency_hz
            ));
        }
        if !(self.speed_of_sound_mps > 0.0 && self.speed_of_sound_mps.is_finite()) {
            return fail(format!(
                "speed_of_sound_mps must be positive, got {}",
                self.speed_of_sound_mps
            ));
        }
        if !(self.array_radius_m > 0.0 && self.array_radius_m.is_finite()) {
            return fail(format!(
                "array_radius_m must be positive, got {}",
                self.array_radius_m
            ));
        }
        if !(self.sigma_delta_rad >= 0.0 && self.sigma_delta_rad.is_finite()) {
            return fail(format!(
                "sigma_delta_rad must be non-negative, got {}",
                self.sigma_delta_rad
            ));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return fail(format!(
                "snr_db must be a number or +inf, got {}",
                self.snr_db
            ));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> Result<f64> {
        wavenumber(self.frequency_hz, self.speed_of_sound_mps)
    }
}

/// The physical scene behind one set of measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub true_directions_rad: Vec<f64>,
    pub true_amplitudes: Vec<Complex64>,
    /// `Δ[q][w]`: phase error of true wave `w` at sensor `q`.
    pub perturbations: Vec<Vec<f64>>,
    /// Additive noise realisation; empty until [`measure`] has run.
    pub noise: Vec<Complex64>,
    pub sigma_eps: f64,
}

impl GroundTruth {
    pub fn num_waves(&self) -> usize {
        self.true_directions_rad.len()
    }

    /// Unperturbed field of the true waves at `r`.
    pub fn pressure_at(&self, k: f64, r: Point2<f64>) -> Complex64 {
        self.true_directions_rad
            .iter()
            .zip(&self.true_amplitudes)
            .map(|(&th, &a)| Complex64::from_polar(1.0, -k * (th.cos() * r.x + th.sin() * r.y)) * a)
            .sum()
    }

    pub fn field_grid(
        &self,
        k: f64,
        region: Rect<f64>,
        nx: usize,
        ny: usize,
    ) -> Result<ComplexGrid<f64>> {
        let values = region
            .cell_centers(nx, ny)?
            .into_iter()
            .map(|r| self.pressure_at(k, r))
            .collect();
        Ok(ComplexGrid { nx, ny, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSet {
    pub pressures: Vec<Complex64>,
    pub array: SensorArray<f64>,
    pub frequency_hz: f64,
    pub speed_of_sound_mps: f64,
    pub seed: u64,
    pub sigma_delta_rad: f64,
    pub sigma_eps: f64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.pressures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pressures.is_empty()
    }

    /// Measurements restricted to the given sensors.
    pub fn subset(&self, sensors: &[usize]) -> Result<Self> {
        let array = self.array.subset(sensors)?;
        Ok(Self {
            pressures: sensors.iter().map(|&q| self.pressures[q]).collect(),
            array,
            ..self.clone()
        })
    }
}

/// Per-trial seed: SplitMix64 of the master seed advanced by `trial + 1` golden-ratio steps.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws the true scene, the array and the estimation dictionary.
///
/// Draw order: directions, then (modulus, phase) per wave, then `Δ` row by
/// row. `Δ` is a standard normal scaled by `σ_Δ`, so scenes with different
/// `σ_Δ` and the same seed share every other draw.
pub fn draw_scenario<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<(GroundTruth, SensorArray<f64>, PlaneWaveDictionary<f64>)> {
    config.validate()?;
    let w = config.num_true_waves;
    let directions: Vec<f64> = (0..w).map(|_| rng.random_range(-PI..PI)).collect();
    let amplitudes: Vec<Complex64> = (0..w)
        .map(|_| {
            let m: f64 = rng.sample::<f64, _>(StandardNormal).abs();
            let phase = rng.random_range(-PI..PI);
            Complex64::from_polar(m, phase)
        })
        .collect();
    let perturbations = (0..config.num_sensors)
        .map(|_| {
            (0..w)
                .map(|_| config.sigma_delta_rad * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let array = SensorArray::circular(config.num_sensors, config.array_radius_m)?;
    let dict = PlaneWaveDictionary::uniform(
        config.frequency_hz,
        config.speed_of_sound_mps,
        config.estimation_grid_size,
    )?;
    let truth = GroundTruth {
        true_directions_rad: directions,
        true_amplitudes: amplitudes,
        perturbations,
        noise: Vec::new(),
        sigma_eps: 0.0,
    };
    Ok((truth, array, dict))
}

/// `Σ_w e^{−ik n_w·r_q} e^{iΔ[q][w]} α_w` for every sensor.
pub fn noise_free_measurements(
    truth: &GroundTruth,
    array: &SensorArray<f64>,
    frequency_hz: f64,
    speed_of_sound_mps: f64,
) -> Result<Vec<Complex64>> {
    let w = truth.num_waves();
    if truth.true_amplitudes.len() != w {
        return Err(Error::dim(
            "true amplitudes",
            w,
            truth.true_amplitudes.len(),
        ));
    }
    if truth.perturbations.len() != array.len() {
        return Err(Error::dim(
            "perturbation rows",
            array.len(),
            truth.perturbations.len(),
        ));
    }
    if let Some(row) = truth.perturbations.iter().find(|row| row.len() != w) {
        return Err(Error::dim("perturbation columns", w, row.len()));
    }
    let k = wavenumber(frequency_hz, speed_of_sound_mps)?;
    Ok(array
        .positions()
        .iter()
        .zip(&truth.perturbations)
        .map(|(r, delta)| {
            (0..w)
                .map(|i| {
                    let th = truth.true_directions_rad[i];
                    let phase = -k * (th.cos() * r.x + th.sin() * r.y) + delta[i];
                    Complex64::from_polar(1.0, phase) * truth.true_amplitudes[i]
                })
                .sum()
        })
        .collect())
}

/// `σ_ε = sqrt(mean|p|² / 10^{snr/10})`.
pub fn calibrate_noise_sigma(noise_free: &[Complex64], snr_db: f64) -> Result<f64> {
    if noise_free.is_empty() {
        return Err(Error::Domain("no pressures to calibrate against".into()));
    }
    let power = noise_free.iter().map(|p| p.norm_sqr()).sum::<f64>() / noise_free.len() as f64;
    if power == 0.0 {
        return Err(Error::Domain("all noise-free pressures are zero".into()));
    }
    if snr_db.is_nan() {
        return Err(Error::Domain("snr_db is NaN".into()));
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Adds `CN(0, σ_ε²)` noise to the perturbed field and records it in `truth`.
pub fn measure<R: Rng + ?Sized>(
    truth: &mut GroundTruth,
    array: &SensorArray<f64>,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<MeasurementSet> {
    let clean =
        noise_free_measurements(truth, array, config.frequency_hz, config.speed_of_sound_mps)?;
    let sigma = calibrate_noise_sigma(&clean, config.snr_db)?;
    let s = sigma / 2f64.sqrt();
    let noise: Vec<Complex64> = clean
        .iter()
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect();
    let pressures = clean.iter().zip(&noise).map(|(p, e)| p + e).collect();
    truth.noise = noise;
    truth.sigma_eps = sigma;
    Ok(MeasurementSet {
        pressures,
        array: array.clone(),
        frequency_hz: config.frequency_hz,
        speed_of_sound_mps: config.speed_of_sound_mps,
        seed: config.rng_seed,
        sigma_delta_rad: config.sigma_delta_rad,
        sigma_eps: sigma,
    })
}

/// A complete synthetic trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub truth: GroundTruth,
    pub dictionary: PlaneWaveDictionary<f64>,
    pub measurements: MeasurementSet,
}

/// Scene and measurements from a single RNG seeded with `config.rng_seed`.
pub fn simulate(config: &ScenarioConfig) -> Result<Scenario> {
    let mut rng = rng_from_seed(config.rng_seed);
    let (mut truth, array, dictionary) = draw_scenario(config, &mut rng)?;
    let measurements = measure(&mut truth, &array, config, &mut rng)?;
    Ok(Scenario {
        truth,
        dictionary,
        measurements,
    })
}
