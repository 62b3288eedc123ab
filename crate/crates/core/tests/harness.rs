use std::f64::consts::PI;
use std::path::PathBuf;

use kiset_core::estimator::BuiltinModel;
use kiset_core::film::lk_of_temperature;
use kiset_core::harness::config::FitSection;
use kiset_core::harness::*;

/// Settings small enough for debug-speed tests.
fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.seed = 11;
    c.benchmark.powers_dbm = vec![-110.0, -104.0];
    c.benchmark.n_samples = 1 << 12;
    c.benchmark.w_bc = vec![1, 2, 4, 8, 16, 32];
    c.benchmark.n_frequencies = 61;
    c.nonlinear.n_frequencies = 61;
    c.stability.v_ds_points = 9;
    c.iv.temperatures_k = vec![0.01, 0.9, 1.3];
    c
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("kiset-{}-{name}", std::process::id()))
}

fn write_xy(path: &PathBuf, x: &[f64], y: &[f64]) {
    let mut s = String::from("x\ty\n");
    for (a, b) in x.iter().zip(y) {
        s.push_str(&format!("{a:e}\t{b:e}\n"));
    }
    std::fs::write(path, s).unwrap();
}

fn fit_config(path: &PathBuf, model: &str, guess: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        fit: Some(FitSection {
            input: path.to_string_lossy().into_owned(),
            model: model.into(),
            initial_guess: guess,
            x_column: None,
            y_column: None,
            table: None,
            lower: None,
            upper: None,
        }),
        ..small()
    }
}

fn param(r: &SweepResult, name: &str) -> f64 {
    let t = r.table("parameters").unwrap();
    let k = t.text_column("name").unwrap().iter().position(|n| n == name).unwrap();
    t.column("value").unwrap()[k]
}

#[test]
fn every_command_is_deterministic_and_carries_provenance() {
    let path = scratch("det.tsv");
    let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.05).collect();
    let y: Vec<f64> = x.iter().map(|&t| BuiltinModel::Eq1Temperature.eval(t, &[130.0, 1.1, 0.35])).collect();
    write_xy(&path, &x, &y);
    let fit_cfg = fit_config(&path, "eq1_temperature", vec![120.0, 1.2, 0.3]);
    for c in ALL_COMMANDS {
        let cfg = if c == Command::Fit { fit_cfg.clone() } else { small() };
        let a = run(c, &cfg, true).unwrap().render();
        let b = run(c, &cfg, true).unwrap().render();
        let serial = run(c, &cfg, false).unwrap().render();
        assert_eq!(a, b, "{c}");
        assert_eq!(a, serial, "{c} serial vs parallel");
        verify_provenance(&a, &cfg).unwrap();
        let mut other = cfg.clone();
        other.seed += 1;
        assert!(verify_provenance(&a, &other).is_err());
    }
    std::fs::remove_file(path).ok();
}

#[test]
fn seed_changes_benchmark_noise() {
    let mut cfg = small();
    let a = run(Command::SnrBenchmark, &cfg, false).unwrap();
    cfg.seed += 1;
    let b = run(Command::SnrBenchmark, &cfg, false).unwrap();
    assert_ne!(a.table("snr").unwrap().column("snr"), b.table("snr").unwrap().column("snr"));
}

#[test]
fn s11_normal_trace_is_flat_and_dip_matches_closed_form() {
    let mut cfg = small();
    cfg.resonator.r_contact_ohm = 0.0;
    let r = run_s11(&cfg).unwrap();
    let spectrum = r.table("spectrum").unwrap();
    let worst = spectrum.column("normal_db").unwrap().into_iter().fold(0.0, f64::min);
    assert!(worst > -0.5, "{worst}");

    let res = r.table("resonance").unwrap();
    let traces = res.text_column("trace").unwrap();
    let k = traces.iter().position(|t| t == "blockade").unwrap();
    let lk = lk_of_temperature(&cfg.film, &cfg.thermal).unwrap();
    let analytic = 1.0 / (2.0 * PI * (lk * 1e-9 * cfg.resonator.c_tot_ff() * 1e-15).sqrt());
    let f_x = res.column("f_reactance_hz").unwrap()[k];
    assert!((f_x - analytic).abs() < 1e3, "{f_x} vs {analytic}");

    let contrast = r.table("contrast").unwrap().column("contrast_db").unwrap()[0];
    assert!(contrast >= 3.0, "{contrast}");
}

#[test]
fn iv_rows_and_switching_points() {
    let cfg = small();
    let r = run_iv(&cfg, false).unwrap();
    let iv = r.table("iv").unwrap();
    let (t, i, v) = (
        iv.column("temperature_k").unwrap(),
        iv.column("i_ua").unwrap(),
        iv.column("v_mv").unwrap(),
    );
    assert_eq!(iv.rows.len(), 3 * 201);
    for k in 0..t.len() {
        if i[k] == 0.0 {
            assert_eq!(v[k], 0.0);
        }
        if t[k] > cfg.film.t_c_k {
            let r_kohm = v[k] / i[k];
            assert!(i[k] == 0.0 || (r_kohm / cfg.film.r_normal_kohm - 1.0).abs() < 1e-12);
        }
    }
    let sw = r.table("switching").unwrap().column("i_sw_ua").unwrap();
    assert!(sw[0] > sw[1] && sw[2] == 0.0);
}

#[test]
fn stability_map_period_and_contrast() {
    let cfg = small();
    let r = run_stability_map(&cfg, true).unwrap();
    let s = r.table("summary").unwrap();
    let period = s.column("gate_period_mv").unwrap()[0];
    let e_over_cg_mv = 1.602176634e-19 / (cfg.set.c_g_af * 1e-18) * 1e3;
    assert!((period / e_over_cg_mv - 1.0).abs() < 1e-9);
    assert!(s.column("contrast_db").unwrap()[0] >= 3.0);
    let map = r.table("map").unwrap();
    assert_eq!(map.rows.len(), 121 * 9);
    let i = map.column("i_na").unwrap();
    let vds = map.column("v_ds_mv").unwrap();
    for (c, v) in i.iter().zip(&vds) {
        if *v == 0.0 {
            assert_eq!(*c, 0.0);
        }
    }
}

#[test]
fn fit_recovers_eq1_and_eq2_and_constant() {
    let p1 = scratch("eq1.tsv");
    let x: Vec<f64> = (0..50).map(|k| 0.01 + k as f64 * 0.019).collect();
    let truth = [131.0, 1.1, 0.35];
    let y: Vec<f64> = x.iter().map(|&t| BuiltinModel::Eq1Temperature.eval(t, &truth)).collect();
    write_xy(&p1, &x, &y);
    let r = run_fit(&fit_config(&p1, "eq1_temperature", vec![120.0, 1.2, 0.3])).unwrap();
    assert!(r.failure.is_none());
    for (name, want) in ["lk0_nh", "t_c_k", "t_el_k"].iter().zip(truth) {
        assert!((param(&r, name) / want - 1.0).abs() < 1e-3, "{name}");
    }

    let p2 = scratch("eq2.tsv");
    let x: Vec<f64> = (0..41).map(|k| -10.0 + k as f64 * 0.5).collect();
    let y: Vec<f64> = x.iter().map(|&i| BuiltinModel::Eq2Current.eval(i, &[191.6, 18.0])).collect();
    write_xy(&p2, &x, &y);
    let r = run_fit(&fit_config(&p2, "eq2_current", vec![150.0, 10.0])).unwrap();
    assert!((param(&r, "i_star_ua") / 18.0 - 1.0).abs() < 1e-3);

    let p3 = scratch("const.tsv");
    write_xy(&p3, &[1.0, 2.0, 3.0], &[4.5, 4.5, 4.5]);
    let r = run_fit(&fit_config(&p3, "constant", vec![1.0])).unwrap();
    assert_eq!(param(&r, "c"), 4.5);
    let summary = r.table("summary").unwrap();
    assert_eq!(summary.column("residual_norm").unwrap()[0], 0.0);

    for p in [p1, p2, p3] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn fit_rejects_bad_input() {
    let cfg = fit_config(&scratch("missing.tsv"), "eq1_temperature", vec![1.0, 1.0, 0.1]);
    assert_eq!(run(Command::Fit, &cfg, false).unwrap_err().exit_code(), 1);
    let p = scratch("bad-model.tsv");
    write_xy(&p, &[1.0, 2.0], &[1.0, 2.0]);
    let cfg = fit_config(&p, "spline", vec![1.0]);
    assert_eq!(run(Command::Fit, &cfg, false).unwrap_err().exit_code(), 2);
    std::fs::remove_file(p).ok();
}

#[test]
fn zero_power_has_no_signal() {
    let mut cfg = small();
    cfg.benchmark.powers_dbm = vec![f64::NEG_INFINITY];
    // the estimator's floor is about 4 / n_windows, so keep thousands of windows
    cfg.benchmark.n_samples = 1 << 18;
    cfg.benchmark.w_bc = vec![1, 4, 16, 64];
    let out = snr_benchmark(&cfg, &cfg.benchmark.powers_dbm, false).unwrap();
    for l in &out.powers[0].ladder {
        assert!(l.point.snr < 0.01, "W = {}: {}", l.w_bc, l.point.snr);
    }
}

#[test]
fn mismatched_sweep_axis_is_a_config_error() {
    let mut cfg = small();
    cfg.sweep = Some(SweepSpec::linear(Axis::VDs, -1.0, 1.0, 5));
    for c in [Command::Iv, Command::S11, Command::SnrBenchmark, Command::Resonance, Command::OpSweep] {
        assert_eq!(run(c, &cfg, false).unwrap_err().exit_code(), 2, "{c}");
    }
}

#[test]
fn op_sweep_switches_normal_at_high_power() {
    let mut cfg = small();
    cfg.sweep = Some(SweepSpec::linear(Axis::RfPower, -110.0, -40.0, 15));
    let r = run_op_sweep(&cfg).unwrap();
    let t = r.table("operating_point").unwrap();
    assert_eq!(t.rows.len(), 15);
    let states = t.text_column("state").unwrap();
    assert_eq!(states[0], "superconducting");
    assert_eq!(states[14], "normal");
}

#[test]
fn snr_doubles_per_three_db_in_linear_regime() {
    let mut cfg = small();
    cfg.benchmark.n_samples = 1 << 16;
    cfg.benchmark.w_bc = vec![1, 2, 4, 8, 16, 32, 64];
    let powers = [-112.0, -109.0, -106.0];
    let out = snr_benchmark(&cfg, &powers, true).unwrap();
    for pair in out.powers.windows(2) {
        let (a, b) = (pair[0].tmin.unwrap().t_min_s, pair[1].tmin.unwrap().t_min_s);
        let gain = a / b;
        let expected = 10f64.powf(0.3);
        assert!((gain / expected - 1.0).abs() < 0.15, "{} -> {}: {gain}", pair[0].power_dbm, pair[1].power_dbm);
    }
}

#[test]
fn w_bc_sweep_sets_the_ladder() {
    let mut cfg = small();
    cfg.benchmark.powers_dbm = vec![-100.0];
    cfg.sweep = Some(SweepSpec {
        axis: Axis::WBc,
        start: 1.0,
        stop: 64.0,
        points: 7,
        scale: Scale::Log,
    });
    let r = run(Command::SnrBenchmark, &cfg, false).unwrap();
    let w = r.table("snr").unwrap().column("w_bc").unwrap();
    assert_eq!(w, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
    verify_provenance(&r.render(), &cfg).unwrap();
}

#[test]
fn chain_seed_must_come_from_top_level_seed() {
    let mut cfg = small();
    cfg.chain.rng_seed = 3;
    assert_eq!(run(Command::S11, &cfg, false).unwrap_err().exit_code(), 2);
}
