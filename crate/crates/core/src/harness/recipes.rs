use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Axis, ExperimentConfig, FitSection, SetState, SweepDirection, SweepSpec};
use super::output::{parse_output, Cell, SweepResult, Table};
use super::{provenance, Command, HarnessError};
use crate::estimator::{fit_curve, Bounds, BuiltinModel, FitError, FitReport};
use crate::film::{
    effective_temperature, iv_curve_with_switching, lk_of_temperature, switching_current_at,
    ThermalState,
};
use crate::resonator::{
    dip_from_samples, find_resonance, nonlinear_operating_point, operating_s11, s11, s11_with,
    sweep_frequency, Drive, FilmState, Inductor, OperatingPoint, ResonatorError, SweepMode,
    BRANCH_JUMP_THRESHOLD,
};
use crate::set_device::{current, resistance, stability_map, BiasPoint};

fn db(z: Complex64) -> f64 {
    20.0 * z.norm().log10()
}

fn numerical(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Numerical(e.to_string())
}

/// SET channel resistance (Ω) on the reference Coulomb peak and deep in blockade,
/// both at V_DS = 0.
pub fn set_resistances_ohm(cfg: &ExperimentConfig) -> (f64, f64) {
    let set = &cfg.set;
    let peak = set.peak_position_mv(0);
    let on = resistance(set, &BiasPoint::new(peak, 0.0)) * 1e3;
    let off = resistance(set, &BiasPoint::new(peak + 0.5 * set.gate_period_mv(), 0.0)) * 1e3;
    (on, off)
}

pub(crate) fn state_resistance(cfg: &ExperimentConfig, state: SetState) -> f64 {
    let (on, off) = set_resistances_ohm(cfg);
    match state {
        SetState::Peak => on,
        SetState::Blockade => off,
    }
}

pub(crate) fn base_lk(cfg: &ExperimentConfig) -> Result<f64, HarnessError> {
    lk_of_temperature(&cfg.film, &cfg.thermal).map_err(numerical)
}

/// Linear-regime dip of the circuit loaded by `r_shunt_ohm`, searched from 0.1 to 3 GHz.
pub(crate) fn linear_dip(cfg: &ExperimentConfig, r_shunt_ohm: f64) -> Result<f64, HarnessError> {
    let lk = base_lk(cfg)?;
    find_resonance(&cfg.resonator, lk, r_shunt_ohm, 1e8, 3e9)
        .map(|r| r.f_r_hz)
        .map_err(numerical)
}

pub(crate) fn frequency_grid(f0: f64, lo: f64, hi: f64, n: usize, dir: SweepDirection) -> Vec<f64> {
    let mut f: Vec<f64> = (0..n)
        .map(|k| f0 * (lo + (hi - lo) * k as f64 / (n - 1) as f64))
        .collect();
    if dir == SweepDirection::Down {
        f.reverse();
    }
    f
}

fn status_of(e: &ResonatorError) -> &'static str {
    match e {
        ResonatorError::NotConverged { .. } => "not_converged",
        ResonatorError::Film(_) => "above_tc",
        ResonatorError::NoResonanceInRange { .. } => "no_resonance",
        ResonatorError::InvalidParameter { .. } => "invalid",
    }
}

/// Four-point I-V curves for each configured temperature.
pub fn run_iv(cfg: &ExperimentConfig, parallel: bool) -> Result<SweepResult, HarnessError> {
    let sweep = cfg.sweep_or(
        Axis::DcCurrent,
        SweepSpec::linear(Axis::DcCurrent, -10.0, 10.0, 201),
        "iv",
    )?;
    let currents = sweep.values();
    let film = &cfg.film;
    let per_t = |&t: &f64| {
        let t_eff = effective_temperature(&ThermalState::new(t, cfg.thermal.t_el_k));
        let i_sw = switching_current_at(film, t_eff);
        (t, t_eff, i_sw, iv_curve_with_switching(film, i_sw, &currents))
    };
    let temps = &cfg.iv.temperatures_k;
    let curves: Vec<_> = if parallel {
        temps.par_iter().map(per_t).collect()
    } else {
        temps.iter().map(per_t).collect()
    };

    let mut iv = Table::new("iv", &["temperature_k", "i_ua", "v_mv", "state"]);
    let mut sw = Table::new("switching", &["temperature_k", "t_eff_k", "i_sw_ua", "r_normal_kohm"]);
    for (t, t_eff, i_sw, volts) in curves {
        sw.push(vec![t.into(), t_eff.into(), i_sw.into(), film.r_normal_kohm.into()]);
        for (&i, v) in currents.iter().zip(volts) {
            let state = if v == 0.0 && i != 0.0 || (i == 0.0 && i_sw > 0.0) {
                "superconducting"
            } else {
                "normal"
            };
            iv.push(vec![t.into(), i.into(), v.into(), state.into()]);
        }
    }
    Ok(SweepResult {
        provenance: provenance(Command::Iv, cfg),
        tables: vec![iv, sw],
        failure: None,
    })
}

/// Linear reflection spectra: superconducting film with the SET on a peak and in
/// blockade, and the normal-state film.
pub fn run_s11(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let sweep = cfg.sweep_or(
        Axis::Frequency,
        SweepSpec::linear(Axis::Frequency, 3e8, 1e9, 1401),
        "s11",
    )?;
    let freqs = sweep.values();
    let spec = &cfg.resonator;
    let lk = base_lk(cfg)?;
    let (r_on, r_off) = set_resistances_ohm(cfg);
    let normal = Inductor::Normal {
        r_normal_ohm: cfg.film.r_normal_kohm * 1e3,
    };

    let mut spectrum = Table::new(
        "spectrum",
        &[
            "frequency_hz",
            "peak_db",
            "peak_phase_rad",
            "blockade_db",
            "blockade_phase_rad",
            "normal_db",
            "normal_phase_rad",
        ],
    );
    let mut normal_mags = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let (a, b, c) = (
            s11(spec, lk, r_on, f),
            s11(spec, lk, r_off, f),
            s11_with(spec, &normal, r_off, f),
        );
        normal_mags.push(c.norm());
        spectrum.push(vec![
            f.into(),
            db(a).into(),
            a.arg().into(),
            db(b).into(),
            b.arg().into(),
            db(c).into(),
            c.arg().into(),
        ]);
    }

    let (f_lo, f_hi) = (sweep.start.min(sweep.stop), sweep.start.max(sweep.stop));
    let mut summary = Table::new(
        "resonance",
        &[
            "trace",
            "r_shunt_ohm",
            "f_r_hz",
            "f_reactance_hz",
            "dip_depth_db",
            "linewidth_hz",
            "loaded_q",
            "status",
        ],
    );
    let mut dips = Vec::new();
    for (name, r) in [("peak", r_on), ("blockade", r_off)] {
        match find_resonance(spec, lk, r, f_lo, f_hi) {
            Ok(d) => {
                dips.push(Some(d.f_r_hz));
                summary.push(vec![
                    name.into(),
                    r.into(),
                    d.f_r_hz.into(),
                    d.f_reactance_hz.into(),
                    d.dip_depth_db.into(),
                    d.linewidth_hz.into(),
                    d.loaded_q.into(),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                dips.push(None);
                let nan = f64::NAN;
                summary.push(vec![
                    name.into(),
                    r.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                    status_of(&e).into(),
                ]);
            }
        }
    }
    let min_normal = normal_mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let normal_dip = dip_from_samples(&freqs, &normal_mags);
    let nan = f64::NAN;
    summary.push(vec![
        "normal".into(),
        r_off.into(),
        normal_dip.map_or(nan, |d| d.f_r_hz).into(),
        nan.into(),
        (-20.0 * min_normal.log10()).into(),
        normal_dip.map_or(nan, |d| d.linewidth_hz).into(),
        normal_dip.map_or(nan, |d| d.loaded_q).into(),
        if normal_dip.is_some() { "ok" } else { "no_resonance" }.into(),
    ]);

    let mut contrast = Table::new(
        "contrast",
        &["frequency_hz", "peak_db", "blockade_db", "contrast_db", "status"],
    );
    match dips[1] {
        Some(f) => {
            let (a, b) = (db(s11(spec, lk, r_on, f)), db(s11(spec, lk, r_off, f)));
            contrast.push(vec![f.into(), a.into(), b.into(), (a - b).abs().into(), "ok".into()]);
        }
        None => contrast.push(vec![nan.into(), nan.into(), nan.into(), nan.into(), "no_resonance".into()]),
    }
    Ok(SweepResult {
        provenance: provenance(Command::S11, cfg),
        tables: vec![spectrum, summary, contrast],
        failure: None,
    })
}

/// Charge-stability map: SET conductance and current with the reflection of the
/// linear resonator loaded by the local R_SET at a fixed probe frequency.
pub fn run_stability_map(cfg: &ExperimentConfig, parallel: bool) -> Result<SweepResult, HarnessError> {
    let set = &cfg.set;
    let period = set.gate_period_mv();
    let default = SweepSpec::linear(Axis::VGs, -1.5 * period, 1.5 * period, 121);
    let sweep = cfg.sweep_or(Axis::VGs, default, "stability-map")?;
    let st = &cfg.stability;
    let v_ds = SweepSpec::linear(Axis::VDs, st.v_ds_start_mv, st.v_ds_stop_mv, st.v_ds_points.max(2));
    let v_ds = if st.v_ds_points == 1 {
        vec![st.v_ds_start_mv]
    } else {
        v_ds.values()
    };
    let v_gs = sweep.values();
    let lk = base_lk(cfg)?;
    let (r_on, r_off) = set_resistances_ohm(cfg);
    let probe = match st.probe_frequency_hz {
        Some(f) => f,
        None => linear_dip(cfg, r_off)?,
    };
    let spec = &cfg.resonator;
    let cells = stability_map(set, &v_gs, &v_ds, parallel);

    let mut map = Table::new(
        "map",
        &["v_gs_mv", "v_ds_mv", "g_us", "i_na", "r_set_kohm", "s11_db", "s11_phase_rad"],
    );
    for c in &cells {
        let r_set = 1e3 / c.g_us;
        let z = s11(spec, lk, r_set * 1e3, probe);
        map.push(vec![
            c.v_gs_mv.into(),
            c.v_ds_mv.into(),
            c.g_us.into(),
            c.i_na.into(),
            r_set.into(),
            db(z).into(),
            z.arg().into(),
        ]);
    }
    let (on_db, off_db) = (db(s11(spec, lk, r_on, probe)), db(s11(spec, lk, r_off, probe)));
    let mut summary = Table::new(
        "summary",
        &[
            "probe_frequency_hz",
            "gate_period_mv",
            "charging_energy_mev",
            "lever_arm",
            "r_peak_kohm",
            "r_blockade_kohm",
            "peak_db",
            "blockade_db",
            "contrast_db",
        ],
    );
    summary.push(vec![
        probe.into(),
        period.into(),
        set.charging_energy_mev().into(),
        set.lever_arm().into(),
        (r_on * 1e-3).into(),
        (r_off * 1e-3).into(),
        on_db.into(),
        off_db.into(),
        (on_db - off_db).abs().into(),
    ]);
    // sanity: the current column is consistent with the model at one cell
    debug_assert!(cells
        .first()
        .is_none_or(|c| c.i_na == current(set, &BiasPoint::new(c.v_gs_mv, c.v_ds_mv))));
    Ok(SweepResult {
        provenance: provenance(Command::StabilityMap, cfg),
        tables: vec![map, summary],
        failure: None,
    })
}

/// Nonlinear operating point along one axis (temperature, dc_current, rf_power or
/// frequency), warm-started from the previous point.
pub fn run_op_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let sweep = cfg
        .sweep
        .unwrap_or(SweepSpec::linear(Axis::RfPower, -130.0, -60.0, 71));
    if !matches!(
        sweep.axis,
        Axis::Temperature | Axis::DcCurrent | Axis::RfPower | Axis::Frequency
    ) {
        return Err(HarnessError::Config(format!(
            "`op-sweep` runs over temperature, dc_current, rf_power or frequency, not {}",
            sweep.axis
        )));
    }
    let op = &cfg.operating;
    let r_shunt = state_resistance(cfg, op.set_state);
    let f0 = match op.frequency_hz {
        Some(f) => f,
        None => linear_dip(cfg, r_shunt)?,
    };
    let mut table = Table::new(
        "operating_point",
        &[
            sweep.axis.column(),
            "lk_nh",
            "i_rf_ua",
            "state",
            "iterations",
            "s11_db",
            "s11_phase_rad",
            "branch_jump",
            "status",
        ],
    );
    let mut warm: Option<OperatingPoint> = None;
    for x in sweep.values() {
        let mut th = cfg.thermal;
        let mut drive = Drive {
            frequency_hz: f0,
            power_dbm: op.power_dbm,
            i_dc_ua: op.i_dc_ua,
            r_shunt_ohm: r_shunt,
        };
        match sweep.axis {
            Axis::Temperature => th = ThermalState::new(x, cfg.thermal.t_el_k),
            Axis::DcCurrent => drive.i_dc_ua = x,
            Axis::RfPower => drive.power_dbm = x,
            _ => drive.frequency_hz = x,
        }
        let res = nonlinear_operating_point(&cfg.resonator, &cfg.film, &th, &drive, warm.as_ref());
        let (p, status) = match &res {
            Ok(p) => (Some(*p), "ok"),
            Err(ResonatorError::NotConverged { last }) => (Some(**last), "not_converged"),
            Err(e) => (None, status_of(e)),
        };
        let nan = f64::NAN;
        match p {
            Some(p) => {
                let jump = res.is_ok()
                    && p.state == FilmState::Superconducting
                    && warm.is_some_and(|w| {
                        let scale = w.i_rf_ua.max(p.i_rf_ua);
                        scale > 0.0 && (p.i_rf_ua - w.i_rf_ua).abs() / scale > BRANCH_JUMP_THRESHOLD
                    });
                let z = operating_s11(&cfg.resonator, &cfg.film, &p, r_shunt);
                table.push(vec![
                    x.into(),
                    p.lk_effective_nh.into(),
                    p.i_rf_ua.into(),
                    p.state.as_str().into(),
                    p.iterations.into(),
                    db(z).into(),
                    z.arg().into(),
                    jump.into(),
                    status.into(),
                ]);
                if res.is_ok() && p.state == FilmState::Superconducting {
                    warm = Some(p);
                }
            }
            None => table.push(vec![
                x.into(),
                nan.into(),
                nan.into(),
                "normal".into(),
                0usize.into(),
                nan.into(),
                nan.into(),
                false.into(),
                status.into(),
            ]),
        }
    }
    Ok(SweepResult {
        provenance: provenance(Command::OpSweep, cfg),
        tables: vec![table],
        failure: None,
    })
}

/// Per-power resonance extracted from one warm-started nonlinear frequency sweep.
#[derive(Debug, Clone)]
pub(crate) struct PowerSpectrum {
    pub power_dbm: f64,
    pub freqs: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub states: Vec<&'static str>,
    pub n_normal: usize,
    pub n_not_converged: usize,
}

pub(crate) fn power_spectrum(
    cfg: &ExperimentConfig,
    freqs: &[f64],
    power_dbm: f64,
    r_shunt: f64,
) -> PowerSpectrum {
    let th = cfg.thermal;
    let drive = Drive {
        frequency_hz: freqs[0],
        power_dbm,
        i_dc_ua: 0.0,
        r_shunt_ohm: r_shunt,
    };
    let pts = sweep_frequency(&cfg.resonator, &cfg.film, &th, &drive, freqs, SweepMode::WarmStarted);
    let mut out = PowerSpectrum {
        power_dbm,
        freqs: freqs.to_vec(),
        s11: Vec::with_capacity(freqs.len()),
        states: Vec::with_capacity(freqs.len()),
        n_normal: 0,
        n_not_converged: 0,
    };
    for p in &pts {
        match &p.result {
            Ok(op) => {
                out.s11.push(operating_s11(&cfg.resonator, &cfg.film, op, r_shunt));
                if op.state == FilmState::Normal {
                    out.n_normal += 1;
                }
                out.states.push(op.state.as_str());
            }
            Err(e) => {
                out.n_not_converged += usize::from(matches!(e, ResonatorError::NotConverged { .. }));
                out.s11.push(Complex64::new(f64::NAN, f64::NAN));
                out.states.push(status_of(e));
            }
        }
    }
    out
}

/// Power dependence of the nonlinear resonance: for each power a warm-started
/// frequency sweep, its dip frequency, depth and width.
pub fn run_resonance_vs_power(cfg: &ExperimentConfig, parallel: bool) -> Result<SweepResult, HarnessError> {
    let sweep = cfg.sweep_or(
        Axis::RfPower,
        SweepSpec::linear(Axis::RfPower, -120.0, -60.0, 31),
        "resonance",
    )?;
    let nl = &cfg.nonlinear;
    let r_shunt = state_resistance(cfg, nl.set_state);
    let f0 = linear_dip(cfg, r_shunt)?;
    let freqs = frequency_grid(f0, nl.f_rel_lo, nl.f_rel_hi, nl.n_frequencies, nl.direction);
    let powers = sweep.values();
    let spectra: Vec<PowerSpectrum> = if parallel {
        powers.par_iter().map(|&p| power_spectrum(cfg, &freqs, p, r_shunt)).collect()
    } else {
        powers.iter().map(|&p| power_spectrum(cfg, &freqs, p, r_shunt)).collect()
    };

    let mut spectrum = Table::new(
        "spectrum",
        &["power_dbm", "frequency_hz", "s11_db", "s11_phase_rad", "state"],
    );
    let mut summary = Table::new(
        "resonance",
        &[
            "power_dbm",
            "f_r_hz",
            "dip_depth_db",
            "linewidth_hz",
            "loaded_q",
            "n_normal",
            "n_not_converged",
            "status",
        ],
    );
    for s in &spectra {
        // ascending frequency order for dip extraction and output
        let mut idx: Vec<usize> = (0..s.freqs.len()).collect();
        idx.sort_by(|&a, &b| s.freqs[a].total_cmp(&s.freqs[b]));
        let f: Vec<f64> = idx.iter().map(|&k| s.freqs[k]).collect();
        let m: Vec<f64> = idx.iter().map(|&k| s.s11[k].norm()).collect();
        for &k in &idx {
            spectrum.push(vec![
                s.power_dbm.into(),
                s.freqs[k].into(),
                db(s.s11[k]).into(),
                s.s11[k].arg().into(),
                s.states[k].into(),
            ]);
        }
        let nan = f64::NAN;
        let dip = dip_from_samples(&f, &m);
        let status = match (&dip, s.n_normal) {
            (_, n) if n == f.len() => "normal",
            (Some(_), 0) => "ok",
            (Some(_), _) => "partly_normal",
            (None, _) => "no_dip",
        };
        let max_depth = -20.0 * m.iter().cloned().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min).log10();
        summary.push(vec![
            s.power_dbm.into(),
            dip.map_or(nan, |d| d.f_r_hz).into(),
            dip.map_or(max_depth, |d| d.dip_depth_db).into(),
            dip.map_or(nan, |d| d.linewidth_hz).into(),
            dip.map_or(nan, |d| d.loaded_q).into(),
            s.n_normal.into(),
            s.n_not_converged.into(),
            status.into(),
        ]);
    }
    Ok(SweepResult {
        provenance: provenance(Command::Resonance, cfg),
        tables: vec![summary, spectrum],
        failure: None,
    })
}

fn read_xy(fit: &FitSection) -> Result<(Vec<f64>, Vec<f64>, String, String), HarnessError> {
    let text = std::fs::read_to_string(&fit.input).map_err(|e| HarnessError::Io(format!("{}: {e}", fit.input)))?;
    let (_, tables) = parse_output(&text)?;
    let table = match &fit.table {
        Some(name) => tables
            .iter()
            .find(|t| &t.name == name)
            .ok_or_else(|| HarnessError::Config(format!("no table `{name}` in {}", fit.input)))?,
        None => tables
            .first()
            .ok_or_else(|| HarnessError::Config(format!("{} holds no table", fit.input)))?,
    };
    let pick = |want: &Option<String>, default: usize| -> Result<String, HarnessError> {
        match want {
            Some(c) => Ok(c.clone()),
            None => table
                .columns
                .get(default)
                .cloned()
                .ok_or_else(|| HarnessError::Config(format!("{} has fewer than 2 columns", fit.input))),
        }
    };
    let (xc, yc) = (pick(&fit.x_column, 0)?, pick(&fit.y_column, 1)?);
    let col = |c: &str| {
        table
            .column(c)
            .ok_or_else(|| HarnessError::Config(format!("no column `{c}` in {}", fit.input)))
    };
    let (x, y) = (col(&xc)?, col(&yc)?);
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(HarnessError::Config(format!("non-numeric data in {}", fit.input)));
    }
    Ok((x, y, xc, yc))
}

/// Fits a built-in model to two columns of a table file.
pub fn run_fit(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let fit = cfg
        .fit
        .as_ref()
        .ok_or_else(|| HarnessError::Config("`fit` needs a [fit] table".into()))?;
    let model: BuiltinModel = fit.model.parse().map_err(|e: FitError| HarnessError::Config(e.to_string()))?;
    let (x, y, xc, yc) = read_xy(fit)?;
    let bounds = match (&fit.lower, &fit.upper) {
        (None, None) => None,
        (lo, hi) => {
            let (dl, dh) = model.default_bounds();
            Some(Bounds::new(lo.clone().unwrap_or(dl), hi.clone().unwrap_or(dh)))
        }
    };
    let (report, failure) = match fit_curve(model, &x, &y, &fit.initial_guess, bounds.as_ref()) {
        Ok(r) => (r, None),
        Err(FitError::NotConverged(r)) => {
            let msg = format!("fit did not converge after {} steps", r.n_iterations);
            (*r, Some(msg))
        }
        Err(e @ (FitError::InvalidInput(_) | FitError::TooFewPoints { .. } | FitError::NonFiniteResidual)) => {
            return Err(HarnessError::Config(e.to_string()))
        }
        Err(e) => return Err(numerical(e)),
    };
    Ok(SweepResult {
        provenance: provenance(Command::Fit, cfg),
        tables: fit_tables(model, &report, &x, &y, &xc, &yc),
        failure,
    })
}

fn fit_tables(model: BuiltinModel, r: &FitReport, x: &[f64], y: &[f64], xc: &str, yc: &str) -> Vec<Table> {
    let mut params = Table::new("parameters", &["name", "value", "stderr"]);
    for ((n, v), s) in r.names.iter().zip(&r.parameters).zip(r.stderr()) {
        params.push(vec![n.as_str().into(), (*v).into(), s.into()]);
    }
    let mut summary = Table::new(
        "summary",
        &["model", "n_points", "converged", "n_iterations", "residual_norm", "gradient_norm"],
    );
    summary.push(vec![
        model.name().into(),
        x.len().into(),
        r.converged.into(),
        r.n_iterations.into(),
        r.residual_norm.into(),
        r.gradient_norm.into(),
    ]);
    let mut cov_cols = vec!["name"];
    cov_cols.extend(r.names.iter().map(String::as_str));
    let mut cov = Table::new("covariance", &cov_cols);
    for (n, row) in r.names.iter().zip(&r.covariance) {
        let mut cells: Vec<Cell> = vec![n.as_str().into()];
        cells.extend(row.iter().map(|&v| Cell::from(v)));
        cov.push(cells);
    }
    let model_col = format!("{yc}_model");
    let mut resid = Table::new("residuals", &[xc, yc, &model_col, "residual"]);
    for (&xi, &yi) in x.iter().zip(y) {
        resid.push(vec![
            xi.into(),
            yi.into(),
            model.eval(xi, &r.parameters).into(),
            model.residual(xi, yi, &r.parameters).into(),
        ]);
    }
    vec![params, summary, cov, resid]
}

