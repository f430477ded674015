//! NMSE scoring, leave-sensors-out cross-validation and Monte Carlo sweeps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{lad_lasso, lasso, tikhonov, BaselineOptions, SensingMatrix};
use crate::error::{Error, Result};
use crate::lift::PhaseGrid;
use crate::model::{CoefficientVector, PlaneWaveDictionary, Rect};
use crate::ot::{estimate_ot, BarycenterError, SolverOptions};
use crate::simulate::{
    draw_scenario, measure, rng_from_seed, trial_seed, GroundTruth, MeasurementSet, ScenarioConfig,
};

/// Side of the square evaluation region, in metres.
pub const EVAL_REGION_SIDE_M: f64 = 0.6;
/// Cells per side of the evaluation grid.
pub const EVAL_RESOLUTION: usize = 190;

pub fn default_region() -> Rect<f64> {
    Rect::centered_square(EVAL_REGION_SIDE_M)
}

/// `Σ|p̂ − p|² / Σ|p|²` over the cell centres of `region`.
///
/// `p̂` is synthesized from the estimate over `dict`; `p` from the true waves
/// without phase perturbations.
pub fn nmse(
    estimate: &CoefficientVector<f64>,
    dict: &PlaneWaveDictionary<f64>,
    truth: &GroundTruth,
    region: Rect<f64>,
    resolution: usize,
) -> Result<f64> {
    let est = dict.field_grid(estimate, region, resolution, resolution)?;
    let ref_field = truth.field_grid(dict.wavenumber(), region, resolution, resolution)?;
    let den = compensated_sum(ref_field.values.iter().map(|p| p.norm_sqr()));
    if !(den > 0.0) {
        return Err(Error::Domain(
            "true field vanishes on the evaluation grid".into(),
        ));
    }
    let num = compensated_sum(
        est.values
            .iter()
            .zip(&ref_field.values)
            .map(|(a, b)| (a - b).norm_sqr()),
    );
    Ok(num / den)
}

/// Neumaier summation; plain accumulation over ~10⁴ grid points drifts by ~1e-12.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ot,
    Tikhonov,
    Lasso,
    #[serde(rename = "ladlasso")]
    LadLasso,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Ot,
        Method::Tikhonov,
        Method::Lasso,
        Method::LadLasso,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ot => "ot",
            Method::Tikhonov => "tikhonov",
            Method::Lasso => "lasso",
            Method::LadLasso => "ladlasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// One hyperparameter tuple: `λ` for the baselines, `(γ, η)` for transport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    pub lambda_or_gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl Hyper {
    pub fn lambda(lambda: f64) -> Self {
        Self {
            lambda_or_gamma: lambda,
            eta: None,
        }
    }

    pub fn ot(gamma: f64, eta: f64) -> Self {
        Self {
            lambda_or_gamma: gamma,
            eta: Some(eta),
        }
    }

    /// True when `self` regularizes strictly more than `other`: larger `λ`/`γ`,
    /// then smaller data weight `η`.
    pub fn stronger_than(&self, other: &Hyper) -> bool {
        if self.lambda_or_gamma != other.lambda_or_gamma {
            return self.lambda_or_gamma > other.lambda_or_gamma;
        }
        match (self.eta, other.eta) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

/// Candidate values searched by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub etas: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        let v = log_space(1e-4, 1e2, 7);
        Self {
            lambdas: v.clone(),
            gammas: v.clone(),
            etas: v,
        }
    }
}

impl HyperGrid {
    /// Candidates in grid order; for transport, `γ` varies slowest.
    pub fn candidates(&self, method: Method) -> Vec<Hyper> {
        match method {
            Method::Ot => self
                .gammas
                .iter()
                .flat_map(|&g| self.etas.iter().map(move |&e| Hyper::ot(g, e)))
                .collect(),
            _ => self.lambdas.iter().map(|&l| Hyper::lambda(l)).collect(),
        }
    }
}

/// Numerical settings shared by every fit.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSettings {
    /// Phase-grid size `K` for the transport estimator.
    pub phase_grid: usize,
    pub ot: SolverOptions<f64>,
    /// Use the best iterate when the transport solver hits its iteration cap.
    pub accept_unconverged: bool,
    pub baseline: BaselineOptions<f64>,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            phase_grid: 50,
            ot: SolverOptions::default(),
            accept_unconverged: false,
            baseline: BaselineOptions::default(),
        }
    }
}

/// A method bound to a dictionary and solver settings.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub method: Method,
    pub dictionary: PlaneWaveDictionary<f64>,
    pub settings: EstimatorSettings,
    grid: Option<PhaseGrid<f64>>,
}

impl Estimator {
    pub fn new(
        method: Method,
        dictionary: PlaneWaveDictionary<f64>,
        settings: EstimatorSettings,
    ) -> Result<Self> {
        let grid = match method {
            Method::Ot => Some(PhaseGrid::new(settings.phase_grid)?),
            _ => None,
        };
        Ok(Self {
            method,
            dictionary,
            settings,
            grid,
        })
    }

    pub fn fit(&self, data: &MeasurementSet, hyper: &Hyper) -> Result<CoefficientVector<f64>> {
        let p = &data.pressures;
        let opts = &self.settings.baseline;
        match self.method {
            Method::Ot => {
                let eta = hyper
                    .eta
                    .ok_or_else(|| Error::Config("transport estimator needs eta".into()))?;
                let grid = self.grid.as_ref().expect("phase grid built in new");
                match estimate_ot(
                    p,
                    &data.array,
                    &self.dictionary,
                    grid,
                    hyper.lambda_or_gamma,
                    eta,
                    &self.settings.ot,
                ) {
                    Ok(c) => Ok(c),
                    Err(BarycenterError::NotConverged(best))
                        if self.settings.accept_unconverged =>
                    {
                        crate::ot::extract_coefficients(&best, grid)
                    }
                    Err(e) => Err(e.into()),
                }
            }
            m => {
                let g = SensingMatrix::from_dictionary(&self.dictionary, &data.array);
                let lambda = hyper.lambda_or_gamma;
                match m {
                    Method::Tikhonov => tikhonov(&g, p, lambda),
                    Method::Lasso => lasso(&g, p, lambda, opts),
                    _ => lad_lasso(&g, p, lambda, opts),
                }
            }
        }
    }

    /// `|⟨g(r_q), Φ̂⟩ − p̃_q|²` summed over the sensors of `data`.
    pub fn prediction_error(
        &self,
        coeffs: &CoefficientVector<f64>,
        data: &MeasurementSet,
    ) -> Result<f64> {
        let g = SensingMatrix::from_dictionary(&self.dictionary, &data.array);
        if coeffs.len() != g.cols() {
            return Err(Error::dim("coefficient vector", g.cols(), coeffs.len()));
        }
        Ok(g.apply(coeffs.values())
            .iter()
            .zip(&data.pressures)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }
}

/// Sensors held out in each fold: sensor `q` belongs to fold `q mod folds`.
pub fn fold_partition(num_sensors: usize, folds: usize) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config(format!(
            "at least 2 folds required, got {folds}"
        )));
    }
    if num_sensors < folds {
        return Err(Error::Config(format!(
            "{folds} folds requested with only {num_sensors} sensors"
        )));
    }
    Ok((0..folds)
        .map(|f| (f..num_sensors).step_by(folds).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: Hyper,
    /// Mean held-out error per candidate, in candidate order.
    pub scores: Vec<f64>,
}

/// Index of the winning score: smallest mean error, ties toward the
/// stronger candidate, exact duplicates to the earliest.
pub fn select_candidate(candidates: &[Hyper], scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&s, c)) in scores.iter().zip(candidates).enumerate() {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let bs = scores[b];
                let tol = 1e-12 * bs.abs().max(s.abs());
                if s < bs - tol || ((s - bs).abs() <= tol && c.stronger_than(&candidates[b])) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Leave-sensors-out cross-validation over `candidates`.
pub fn cross_validate(
    estimator: &Estimator,
    data: &MeasurementSet,
    candidates: &[Hyper],
    folds: usize,
) -> Result<CvOutcome> {
    if candidates.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let parts = fold_partition(data.len(), folds)?;
    let splits: Vec<(MeasurementSet, MeasurementSet)> = parts
        .iter()
        .map(|held| {
            let kept: Vec<usize> = (0..data.len()).filter(|q| !held.contains(q)).collect();
            Ok((data.subset(&kept)?, data.subset(held)?))
        })
        .collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(candidates.len());
    for h in candidates {
        let mut total = 0.0;
        for (train, test) in &splits {
            let fit = estimator.fit(train, h)?;
            total += estimator.prediction_error(&fit, test)?;
        }
        scores.push(total / folds as f64);
    }
    let idx = select_candidate(candidates, &scores)
        .ok_or_else(|| Error::Domain("no candidate produced a finite CV score".into()))?;
    Ok(CvOutcome {
        best: candidates[idx],
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    SigmaDelta,
    NumSensors,
    FrequencyHz,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::SigmaDelta => "sigma_delta",
            SweepParam::NumSensors => "num_sensors",
            SweepParam::FrequencyHz => "frequency_hz",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        match self {
            SweepParam::SigmaDelta => c.sigma_delta_rad = value,
            SweepParam::FrequencyHz => c.frequency_hz = value,
            SweepParam::NumSensors => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!(
                        "sensor count must be a positive integer, got {value}"
                    )));
                }
                c.num_sensors = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub base: ScenarioConfig,
    pub trials: usize,
    pub master_seed: u64,
    pub grid: HyperGrid,
    pub folds: usize,
    pub settings: EstimatorSettings,
    /// Record per-fit wall time; leave off for byte-reproducible output.
    pub record_timing: bool,
}

/// One method on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub sweep_param: SweepParam,
    pub value: f64,
    pub method: Method,
    pub trial: usize,
    pub nmse: f64,
    pub hyper: Hyper,
    pub seed: u64,
    pub wall_ms: Option<f64>,
}

/// Aggregate over the trials of one (sweep point, method).
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: Method,
    pub sweep_param: SweepParam,
    pub value: f64,
    pub sigma_delta_rad: f64,
    pub num_sensors: usize,
    pub frequency_hz: f64,
    pub nmse: f64,
    pub std_error: f64,
    pub trials: Vec<TrialRecord>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub reports: Vec<EvaluationReport>,
    /// One entry per sweep point that failed, tagged with the failing trial.
    pub failures: Vec<Error>,
}

impl SweepOutcome {
    pub fn report(&self, value: f64, method: Method) -> Option<&EvaluationReport> {
        self.reports
            .iter()
            .find(|r| r.value == value && r.method == method)
    }

    pub fn records(&self) -> impl Iterator<Item = &TrialRecord> {
        self.reports.iter().flat_map(|r| r.trials.iter())
    }
}

/// Runs one trial for every method: CV, refit on all sensors, score.
pub fn run_trial(
    config: &ScenarioConfig,
    methods: &[Method],
    grid: &HyperGrid,
    folds: usize,
    settings: &EstimatorSettings,
    record_timing: bool,
) -> Result<Vec<(Method, f64, Hyper, Option<f64>)>> {
    let mut rng = rng_from_seed(config.rng_seed);
    let (mut truth, array, dict) = draw_scenario(config, &mut rng)?;
    let data = measure(&mut truth, &array, config, &mut rng)?;
    methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let run = || -> Result<(Hyper, f64)> {
                let est = Estimator::new(m, dict.clone(), settings.clone())?;
                let cands = grid.candidates(m);
                let hyper = if cands.len() == 1 {
                    cands[0]
                } else {
                    cross_validate(&est, &data, &cands, folds)?.best
                };
                let fit = est.fit(&data, &hyper)?;
                Ok((
                    hyper,
                    nmse(&fit, &dict, &truth, default_region(), EVAL_RESOLUTION)?,
                ))
            };
            let (hyper, score) = run().map_err(|e| Error::Method {
                method: m.as_str().into(),
                source: Box::new(e),
            })?;
            let ms = record_timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            Ok((m, score, hyper, ms))
        })
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Parallel Monte Carlo over the sweep, on the current rayon pool.
///
/// Trial `t` uses seed `trial_seed(master_seed, t)` at every sweep point.
/// Results are reduced in (point, trial) order, independent of scheduling.
pub fn monte_carlo(spec: &SweepSpec) -> Result<SweepOutcome> {
    if spec.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if spec.methods.is_empty() || spec.values.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one method and one value".into(),
        ));
    }
    let configs: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|&v| spec.param.apply(&spec.base, v))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let results: Vec<Result<Vec<(Method, f64, Hyper, Option<f64>)>>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let cfg = ScenarioConfig {
                rng_seed: trial_seed(spec.master_seed, t as u64),
                ..configs[p].clone()
            };
            run_trial(
                &cfg,
                &spec.methods,
                &spec.grid,
                spec.folds,
                &spec.settings,
                spec.record_timing,
            )
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (p, cfg) in configs.iter().enumerate() {
        let value = spec.values[p];
        let chunk = &results[p * spec.trials..(p + 1) * spec.trials];
        if let Some((t, e)) = chunk
            .iter()
            .enumerate()
            .find_map(|(t, r)| r.as_ref().err().map(|e| (t, e)))
        {
            failures.push(Error::Trial {
                trial: t,
                param: spec.param.as_str().into(),
                value,
                source: Box::new(e.clone()),
            });
            continue;
        }
        for (mi, &method) in spec.methods.iter().enumerate() {
            let trials: Vec<TrialRecord> = chunk
                .iter()
                .enumerate()
                .map(|(t, r)| {
                    let (_, score, hyper, ms) = r.as_ref().expect("failures handled above")[mi];
                    TrialRecord {
                        sweep_param: spec.param,
                        value,
                        method,
                        trial: t,
                        nmse: score,
                        hyper,
                        seed: trial_seed(spec.master_seed, t as u64),
                        wall_ms: ms,
                    }
                })
                .collect();
            let scores: Vec<f64> = trials.iter().map(|r| r.nmse).collect();
            let (mean, se) = mean_and_stderr(&scores);
            let wall_ms = trials.iter().map(|r| r.wall_ms).sum::<Option<f64>>();
            reports.push(EvaluationReport {
                method,
                sweep_param: spec.param,
                value,
                sigma_delta_rad: cfg.sigma_delta_rad,
                num_sensors: cfg.num_sensors,
                frequency_hz: cfg.frequency_hz,
                nmse: mean,
                std_error: se,
                trials,
                wall_ms,
            });
        }
    }
    Ok(SweepOutcome { reports, failures })
}

pub const CSV_HEADER: [&str; 9] = [
    "sweep_param",
    "value",
    "method",
    "trial",
    "nmse",
    "lambda_or_gamma",
    "eta",
    "seed",
    "wall_ms",
];

/// Writes one row per trial record; optional fields are left empty.
pub fn write_csv<'a, W: Write>(
    records: impl IntoIterator<Item = &'a TrialRecord>,
    out: W,
) -> Result<()> {
    let io = |e: csv::Error| Error::Data(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            r.sweep_param.as_str().to_string(),
            r.value.to_string(),
            r.method.as_str().to_string(),
            r.trial.to_string(),
            r.nmse.to_string(),
            r.hyper.lambda_or_gamma.to_string(),
            opt(r.hyper.eta),
            r.seed.to_string(),
            opt(r.wall_ms),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv: {e}")))?;
    Ok(())
}
