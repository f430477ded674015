//! Subcommand bodies. Each writes its outputs under `cfg.out_dir`.

use std::fs;
use std::path::{Path, PathBuf};

use sfot::eval::{cross_validate, monte_carlo, write_csv, Estimator, Hyper, Method, SweepOutcome};
use sfot::simulate::simulate;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::files::{
    read_toml, write_toml, CvCandidate, CvFile, DictionaryRecord, EstimateFile, MeasurementsFile,
    ScenarioFile,
};
use crate::render::{coefficients_svg, field_svg};

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const MEASUREMENTS_FILE: &str = "measurements.toml";
pub const ESTIMATE_FILE: &str = "estimate.toml";
pub const CV_FILE: &str = "cv.toml";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const FIELD_SVG: &str = "field.svg";
pub const COEFFICIENTS_SVG: &str = "coefficients.svg";

fn out_dir(cfg: &RunConfig) -> CliResult<&Path> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.out_dir.display())))?;
    Ok(&cfg.out_dir)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub scenario: PathBuf,
    pub measurements: PathBuf,
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<SimulateOutput> {
    let s = simulate(&cfg.scenario)?;
    let dir = out_dir(cfg)?;
    let out = SimulateOutput {
        scenario: dir.join(SCENARIO_FILE),
        measurements: dir.join(MEASUREMENTS_FILE),
    };
    let dictionary = DictionaryRecord::from(&s.dictionary);
    write_toml(
        &out.scenario,
        &ScenarioFile {
            config: cfg.scenario.clone(),
            dictionary: dictionary.clone(),
            truth: s.truth,
        },
    )?;
    write_toml(
        &out.measurements,
        &MeasurementsFile {
            dictionary,
            measurements: s.measurements,
        },
    )?;
    Ok(out)
}

fn load_estimator(
    measurements: &Path,
    cfg: &RunConfig,
) -> CliResult<(MeasurementsFile, Estimator)> {
    let file: MeasurementsFile = read_toml(measurements)?;
    let dict = file.dictionary.build()?;
    let est = Estimator::new(cfg.method.name, dict, cfg.estimator_settings())?;
    Ok((file, est))
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub estimate: PathBuf,
    /// Field and coefficient panels, when rendering was requested.
    pub renders: Vec<PathBuf>,
    pub result: EstimateFile,
}

/// Fits the configured method; cross-validates first unless every
/// hyperparameter is fixed.
pub fn cmd_estimate(
    measurements: &Path,
    cfg: &RunConfig,
    render: bool,
) -> CliResult<EstimateOutput> {
    let (file, est) = load_estimator(measurements, cfg)?;
    let method = cfg.method.name;
    let candidates = cfg.hyper_grid().candidates(method);
    let (hyper, coeffs) = pool(cfg.threads)?.install(|| -> CliResult<_> {
        let hyper = match candidates.as_slice() {
            [only] => *only,
            _ => cross_validate(&est, &file.measurements, &candidates, cfg.folds)?.best,
        };
        Ok((hyper, est.fit(&file.measurements, &hyper)?))
    })?;
    let dir = out_dir(cfg)?;
    let mut renders = Vec::new();
    if render {
        let (field, stems) = (dir.join(FIELD_SVG), dir.join(COEFFICIENTS_SVG));
        write_text(&field, &field_svg(&est.dictionary, &coeffs)?)?;
        write_text(&stems, &coefficients_svg(&est.dictionary, &coeffs))?;
        renders = vec![field, stems];
    }
    let result = EstimateFile {
        method,
        hyper,
        phase_grid: (method == Method::Ot).then_some(cfg.solver.phase_grid),
        dictionary: file.dictionary,
        coefficients: coeffs,
    };
    let estimate = dir.join(ESTIMATE_FILE);
    write_toml(&estimate, &result)?;
    Ok(EstimateOutput {
        estimate,
        renders,
        result,
    })
}

/// Leave-sensors-out cross-validation over the configured grid.
pub fn cmd_cv(measurements: &Path, cfg: &RunConfig) -> CliResult<(PathBuf, CvFile)> {
    let (file, est) = load_estimator(measurements, cfg)?;
    let candidates: Vec<Hyper> = cfg.hyper_grid().candidates(cfg.method.name);
    let outcome = pool(cfg.threads)?
        .install(|| cross_validate(&est, &file.measurements, &candidates, cfg.folds))?;
    let result = CvFile {
        method: cfg.method.name,
        folds: cfg.folds,
        best: outcome.best,
        candidates: candidates
            .into_iter()
            .zip(outcome.scores)
            .map(|(hyper, score)| CvCandidate { hyper, score })
            .collect(),
    };
    let path = out_dir(cfg)?.join(CV_FILE);
    write_toml(&path, &result)?;
    Ok((path, result))
}

#[derive(Debug)]
pub struct SweepOutput {
    pub csv: PathBuf,
    pub outcome: SweepOutcome,
}

/// Monte Carlo sweep on a pool of `cfg.threads` workers.
///
/// The CSV holds every completed sweep point. Failed points are reported
/// as a solver error after the file is written.
pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<SweepOutput> {
    let spec = cfg.sweep_spec();
    let outcome = pool(cfg.threads)?.install(|| monte_carlo(&spec))?;
    let csv = out_dir(cfg)?.join(SWEEP_FILE);
    let mut buf = Vec::new();
    write_csv(outcome.records(), &mut buf)?;
    fs::write(&csv, buf).map_err(|e| CliError::Io(format!("{}: {e}", csv.display())))?;
    if !outcome.failures.is_empty() {
        let msgs: Vec<String> = outcome.failures.iter().map(|e| e.to_string()).collect();
        return Err(CliError::Solver(msgs.join("; ")));
    }
    Ok(SweepOutput { csv, outcome })
}
