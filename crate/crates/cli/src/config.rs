//! Run configuration: one TOML file shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfot::eval::{EstimatorSettings, HyperGrid, Method, SweepParam, SweepSpec};
use sfot::simulate::ScenarioConfig;
use sfot::{BaselineOptions, SolverOptions};

use crate::error::{CliError, CliResult};
use crate::files::read_toml;

/// Which estimator to run and, optionally, fixed hyperparameters.
///
/// A fixed value replaces the corresponding grid with that single value, so
/// cross-validation is skipped once every hyperparameter of the method is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub name: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            name: Method::Ot,
            lambda: None,
            gamma: None,
            eta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Phase-grid size `K`.
    pub phase_grid: usize,
    pub rel_gap: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    /// Use the best transport iterate instead of failing at the iteration cap.
    pub accept_unconverged: bool,
    pub lasso_tol: f64,
    pub lad_rel_gap: f64,
    pub baseline_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let ot = SolverOptions::<f64>::default();
        let bl = BaselineOptions::<f64>::default();
        Self {
            phase_grid: 50,
            rel_gap: ot.rel_gap,
            feas_tol: ot.feas_tol,
            max_iters: ot.max_iters,
            accept_unconverged: false,
            lasso_tol: bl.tol,
            lad_rel_gap: bl.rel_gap,
            baseline_max_iters: bl.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    /// Fill the `wall_ms` column. Timings differ between runs.
    pub record_timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            param: SweepParam::SigmaDelta,
            values: vec![0.1, 0.3, 0.5],
            methods: Method::ALL.to_vec(),
            trials: 10,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `scenario.rng_seed`; also the sweep master seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub folds: usize,
    pub scenario: ScenarioConfig,
    pub method: MethodConfig,
    pub solver: SolverConfig,
    pub grid: HyperGrid,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out_dir: PathBuf::from("out"),
            threads: 1,
            folds: 3,
            scenario: ScenarioConfig::default(),
            method: MethodConfig::default(),
            solver: SolverConfig::default(),
            grid: HyperGrid::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub method: Option<Method>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub phase_grid: Option<usize>,
    pub rel_gap: Option<f64>,
    pub feas_tol: Option<f64>,
    pub max_iters: Option<usize>,
}

impl RunConfig {
    /// Reads `path`, or the defaults when `None`, then applies `overrides`
    /// and validates the result.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => read_toml(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(s) = self.seed {
            self.scenario.rng_seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(m) = o.method {
            self.method.name = m;
            self.sweep.methods = vec![m];
        }
        self.method.lambda = o.lambda.or(self.method.lambda);
        self.method.gamma = o.gamma.or(self.method.gamma);
        self.method.eta = o.eta.or(self.method.eta);
        let s = &mut self.solver;
        s.phase_grid = o.phase_grid.unwrap_or(s.phase_grid);
        s.rel_gap = o.rel_gap.unwrap_or(s.rel_gap);
        s.feas_tol = o.feas_tol.unwrap_or(s.feas_tol);
        s.max_iters = o.max_iters.unwrap_or(s.max_iters);
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        self.scenario.validate()?;
        if self.threads == 0 {
            return fail("threads must be at least 1".into());
        }
        if self.folds < 2 {
            return fail(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.scenario.rng_seed > i64::MAX as u64 {
            return fail(format!("seed must not exceed {}", i64::MAX));
        }
        if self.solver.phase_grid < 2 {
            return fail(format!(
                "phase_grid must be at least 2, got {}",
                self.solver.phase_grid
            ));
        }
        self.estimator_settings()
            .ot
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let s = &self.solver;
        if !(s.lasso_tol > 0.0 && s.lad_rel_gap >= 0.0 && s.baseline_max_iters > 0) {
            return fail("baseline tolerances must be positive".into());
        }
        let grid = self.hyper_grid();
        for (name, vals) in [
            ("lambda", &grid.lambdas),
            ("gamma", &grid.gammas),
            ("eta", &grid.etas),
        ] {
            if vals.is_empty() {
                return fail(format!("{name} grid is empty"));
            }
            if let Some(v) = vals.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return fail(format!(
                    "{name} values must be finite and non-negative, got {v}"
                ));
            }
        }
        if grid.etas.contains(&0.0) {
            return fail("eta must be positive".into());
        }
        let sw = &self.sweep;
        if sw.trials == 0 {
            return fail("sweep.trials must be at least 1".into());
        }
        if sw.values.is_empty() || sw.methods.is_empty() {
            return fail("sweep needs at least one value and one method".into());
        }
        for &v in &sw.values {
            sw.param.apply(&self.scenario, v)?;
        }
        Ok(())
    }

    /// The configured grids with any fixed hyperparameter substituted.
    pub fn hyper_grid(&self) -> HyperGrid {
        let pick =
            |fixed: Option<f64>, grid: &Vec<f64>| fixed.map_or_else(|| grid.clone(), |v| vec![v]);
        HyperGrid {
            lambdas: pick(self.method.lambda, &self.grid.lambdas),
            gammas: pick(self.method.gamma, &self.grid.gammas),
            etas: pick(self.method.eta, &self.grid.etas),
        }
    }

    pub fn estimator_settings(&self) -> EstimatorSettings {
        let s = &self.solver;
        EstimatorSettings {
            phase_grid: s.phase_grid,
            ot: SolverOptions {
                rel_gap: s.rel_gap,
                feas_tol: s.feas_tol,
                max_iters: s.max_iters,
            },
            accept_unconverged: s.accept_unconverged,
            baseline: BaselineOptions {
                tol: s.lasso_tol,
                rel_gap: s.lad_rel_gap,
                max_iters: s.baseline_max_iters,
            },
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            param: self.sweep.param,
            values: self.sweep.values.clone(),
            methods: self.sweep.methods.clone(),
            base: self.scenario.clone(),
            trials: self.sweep.trials,
            master_seed: self.scenario.rng_seed,
            grid: self.hyper_grid(),
            folds: self.folds,
            settings: self.estimator_settings(),
            record_timing: self.sweep.record_timing,
        }
    }
}
