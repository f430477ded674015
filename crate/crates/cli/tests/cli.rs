use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use sfot::eval::Method;
use sfot::simulate::{simulate, ScenarioConfig};
use sfot_cli::commands::{COEFFICIENTS_SVG, FIELD_SVG};
use sfot_cli::files::{from_toml_str, read_toml, to_toml_string, MeasurementsFile, ScenarioFile};
use sfot_cli::{cmd_cv, cmd_estimate, cmd_simulate, cmd_sweep, CliError, Overrides, RunConfig};

fn small_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.to_path_buf();
    cfg.scenario = ScenarioConfig {
        num_sensors: 6,
        estimation_grid_size: 10,
        num_true_waves: 2,
        sigma_delta_rad: 0.2,
        rng_seed: 5,
        ..ScenarioConfig::default()
    };
    cfg.solver.phase_grid = 10;
    cfg.grid.lambdas = vec![0.01, 0.1];
    cfg.grid.gammas = vec![0.1, 1.0];
    cfg.grid.etas = vec![1.0, 10.0];
    cfg
}

#[test]
fn simulate_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = cmd_simulate(&cfg).unwrap();
    let s = simulate(&cfg.scenario).unwrap();

    let scen: ScenarioFile = read_toml(&out.scenario).unwrap();
    assert_eq!(scen.config, cfg.scenario);
    assert_eq!(scen.truth, s.truth);
    assert_eq!(scen.dictionary.build().unwrap(), s.dictionary);

    let meas: MeasurementsFile = read_toml(&out.measurements).unwrap();
    assert_eq!(meas.measurements, s.measurements);
    assert_eq!(meas.measurements.len(), 6);
}

#[test]
fn simulate_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = cmd_simulate(&small_config(a.path())).unwrap();
    let ob = cmd_simulate(&small_config(b.path())).unwrap();
    assert_eq!(
        fs::read(&oa.scenario).unwrap(),
        fs::read(&ob.scenario).unwrap()
    );
    assert_eq!(
        fs::read(&oa.measurements).unwrap(),
        fs::read(&ob.measurements).unwrap()
    );
}

#[test]
fn default_scenario_has_nine_pressure_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let out = cmd_simulate(&cfg).unwrap();
    let meas: MeasurementsFile = read_toml(&out.measurements).unwrap();
    assert_eq!(meas.measurements.pressures.len(), 9);
}

#[test]
fn floats_use_seventeen_significant_digits() {
    let text = to_toml_string(&ScenarioConfig::default()).unwrap();
    assert!(
        text.contains("frequency_hz = 1.0000000000000000e3"),
        "{text}"
    );
    assert!(text.contains("array_radius_m = 2.5000000000000000e-1"));
}

#[test]
fn estimate_writes_l_coefficients_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let sim = cmd_simulate(&cfg).unwrap();
    cfg.method.name = Method::Tikhonov;
    cfg.method.lambda = Some(0.1);
    let out = cmd_estimate(&sim.measurements, &cfg, true).unwrap();
    assert_eq!(out.result.coefficients.len(), 10);
    assert_eq!(out.renders.len(), 2);
    for name in [FIELD_SVG, COEFFICIENTS_SVG] {
        let svg = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("min ") && svg.contains("max "));
    }
    let back: sfot_cli::files::EstimateFile = read_toml(&out.estimate).unwrap();
    assert_eq!(back, out.result);
}

#[test]
fn estimate_cross_validates_unless_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let sim = cmd_simulate(&cfg).unwrap();
    cfg.method.name = Method::Lasso;
    let cv = cmd_cv(&sim.measurements, &cfg).unwrap().1;
    assert_eq!(cv.candidates.len(), 2);
    let est = cmd_estimate(&sim.measurements, &cfg, false).unwrap();
    assert_eq!(est.result.hyper, cv.best);

    cfg.method.name = Method::Ot;
    cfg.method.gamma = Some(0.5);
    cfg.method.eta = Some(2.0);
    let est = cmd_estimate(&sim.measurements, &cfg, false).unwrap();
    assert_eq!(est.result.hyper.lambda_or_gamma, 0.5);
    assert_eq!(est.result.hyper.eta, Some(2.0));
    assert_eq!(est.result.phase_grid, Some(10));
}

#[test]
fn overrides_take_precedence() {
    let text = "seed = 3\n[method]\nname = \"lasso\"\nlambda = 0.5\n[solver]\nphase_grid = 20\n";
    let mut cfg: RunConfig = from_toml_str(text, "inline").unwrap();
    assert_eq!(cfg.method.name, Method::Lasso);
    cfg.apply(&Overrides {
        seed: Some(9),
        lambda: Some(0.25),
        phase_grid: Some(12),
        method: Some(Method::LadLasso),
        ..Overrides::default()
    });
    assert_eq!(cfg.scenario.rng_seed, 9);
    assert_eq!(cfg.hyper_grid().lambdas, vec![0.25]);
    assert_eq!(cfg.solver.phase_grid, 12);
    assert_eq!(cfg.sweep.methods, vec![Method::LadLasso]);
    cfg.validate().unwrap();
}

#[test]
fn unknown_keys_are_rejected_with_location() {
    let err = from_toml_str::<RunConfig>("[scenario]\nnum_sensors = 4\nnum_sensor = 4\n", "cfg")
        .unwrap_err();
    let CliError::Config(msg) = err else {
        panic!("expected config error")
    };
    assert!(
        msg.contains("line 3") && msg.contains("num_sensor"),
        "{msg}"
    );
}

#[test]
fn invalid_values_are_config_errors() {
    let mut cfg = RunConfig::default();
    cfg.folds = 1;
    assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    let mut cfg = RunConfig::default();
    cfg.scenario.array_radius_m = -1.0;
    assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    let mut cfg = RunConfig::default();
    cfg.method.eta = Some(0.0);
    assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
}

#[test]
fn sweep_csv_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |dir: &Path| {
        let mut cfg = small_config(dir);
        cfg.sweep.values = vec![0.0, 0.4];
        cfg.sweep.trials = 2;
        cfg.threads = 2;
        fs::read(cmd_sweep(&cfg).unwrap().csv).unwrap()
    };
    let csv = run(a.path());
    assert_eq!(csv, run(b.path()));
    let text = String::from_utf8(csv).unwrap();
    assert!(
        text.starts_with("sweep_param,value,method,trial,nmse,lambda_or_gamma,eta,seed,wall_ms\n")
    );
    assert_eq!(text.lines().count(), 1 + 2 * 4 * 2);
}

fn sfot(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sfot"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("tiny.toml"),
        "out_dir = \"o\"\n[scenario]\nnum_sensors = 4\nestimation_grid_size = 6\n",
    )
    .unwrap();
    assert_eq!(sfot(&["simulate", "tiny.toml", "--seed", "2"], p).0, 0);
    assert!(p.join("o/measurements.toml").exists());

    fs::write(p.join("bad.toml"), "[scenario]\nfrequncy_hz = 5.0\n").unwrap();
    let (code, err) = sfot(&["simulate", "bad.toml"], p);
    assert_eq!(code, 2, "{err}");
    assert_eq!(
        sfot(&["estimate", "o/measurements.toml", "--method", "nope"], p).0,
        2
    );

    let (code, err) = sfot(
        &[
            "estimate",
            "o/measurements.toml",
            "--method",
            "ot",
            "--gamma",
            "0.5",
            "--eta",
            "3",
            "--phase-grid",
            "8",
            "--max-iters",
            "1",
        ],
        p,
    );
    assert_eq!(code, 3, "{err}");

    assert_eq!(
        sfot(
            &[
                "estimate",
                "missing.toml",
                "--method",
                "tikhonov",
                "--lambda",
                "1"
            ],
            p
        )
        .0,
        4
    );

    let (code, _) = sfot(
        &[
            "estimate",
            "o/measurements.toml",
            "--method",
            "tikhonov",
            "--lambda",
            "0.1",
            "--render",
            "--out-dir",
            "r",
        ],
        p,
    );
    assert_eq!(code, 0);
    assert!(p.join("r/field.svg").exists() && p.join("r/coefficients.svg").exists());
}

proptest! {
    #[test]
    fn floats_round_trip_bit_exactly(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(!x.is_nan());
        let cfg = ScenarioConfig { snr_db: x, ..ScenarioConfig::default() };
        let back: ScenarioConfig = from_toml_str(&to_toml_string(&cfg).unwrap(), "t").unwrap();
        prop_assert_eq!(back.snr_db.to_bits(), x.to_bits());
    }
}
