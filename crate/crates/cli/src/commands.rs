use std::path::PathBuf;

use chos_core::estimate::{experimental_estimate, preset_estimate, Preset};
use chos_core::mb_solver::{simulate_with, SimResult, SnapshotPolicy};
use chos_core::metrics::{energy_balance, fidelity, measured_delay, shifted_input_overlap};
use chos_core::model::{default_step, MediumParams, ProbePulse, SchemeVariant, SimGrid, SplittingSchedule};
use chos_core::spectral::{group_delay, lossless_group_delay, susceptibility, transmission, Convention};
use chos_core::sweep::{
    default_delta_bounds, fit_fidelity_curve, heatmap, log_slope, optimize_curve, GridPolicy, OptimizerSettings,
    Placement, StorageTemplate,
};
use serde::Serialize;

use crate::config::{RunConfig, FULL_SCALE_B};
use crate::output::{json, num, OutDir, Table};
use crate::{CliError, Overrides};

const DEFAULT_OUT: &str = "out";

pub fn apply_overrides(cfg: &mut RunConfig, o: &Overrides, lists: bool) -> Result<(), CliError> {
    if lists {
        if !o.b.is_empty() {
            cfg.sweep.b_list = o.b.clone();
            cfg.optimize.b_list = o.b.clone();
        }
        if !o.delta.is_empty() {
            cfg.sweep.delta_list = o.delta.clone();
        }
    } else {
        match o.b.as_slice() {
            [] => {}
            [b] => cfg.medium.b = *b,
            _ => return Err(CliError::Usage("--b takes a single value here".into())),
        }
        match o.delta.as_slice() {
            [] => {}
            [d] => cfg.schedule.delta = *d,
            _ => return Err(CliError::Usage("--delta takes a single value here".into())),
        }
    }
    if let Some(v) = o.sigma_tau {
        cfg.pulse.sigma_tau = v;
    }
    if let Some(v) = o.t_off {
        cfg.schedule.t_off = v;
    }
    if let Some(v) = o.t_on {
        cfg.schedule.t_on = v;
    }
    if let Some(v) = o.ramp {
        cfg.schedule.ramp_time = v;
    }
    if let Some(v) = o.variant {
        cfg.run.variant = v;
    }
    if let Some(v) = o.convention {
        cfg.run.convention = v;
    }
    if let Some(v) = o.jobs {
        cfg.run.jobs = Some(v);
    }
    if let Some(v) = o.snapshots {
        cfg.run.snapshots = v;
    }
    cfg.validate()
}

fn out_dir(o: &Overrides) -> Result<OutDir, CliError> {
    OutDir::create(&o.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)))
}

fn write_config(dir: &OutDir, cfg: &RunConfig) -> Result<(), CliError> {
    dir.write("config.toml", cfg.to_toml()?.as_bytes()).map(|_| ())
}

fn medium(cfg: &RunConfig) -> Result<MediumParams, CliError> {
    Ok(MediumParams::dimensionless(cfg.medium.b)?.with_decay(cfg.medium.decay)?)
}

fn snapshot_policy(cfg: &RunConfig) -> SnapshotPolicy {
    match cfg.run.snapshots {
        0 => SnapshotPolicy::Off,
        s => SnapshotPolicy::Stride(s),
    }
}

pub fn spectrum(cfg: &RunConfig, o: &Overrides) -> Result<(), CliError> {
    let params = medium(cfg)?;
    let delta = cfg.schedule.delta;
    let convention: Convention = cfg.run.convention.into();
    let w = cfg.spectrum.omega_max.unwrap_or(3.0 * delta.max(1.0));
    if !(w.is_finite() && w > 0.0) {
        return Err(CliError::Config("invalid `spectrum.omega_max`: must be finite and > 0".into()));
    }
    let mut table = Table::new(&["omega_over_gamma", "re_chi", "im_chi", "transmission"]);
    table.comment(format!("convention = {convention}"));
    table.comment(format!("b = {}", num(params.optical_depth())));
    table.comment(format!("delta_over_gamma = {}", num(delta)));
    table.comment(format!("decay = {}", num(params.decay())));
    table.comment("chi is chi*L; transmission is exp(2 Re(chi*L))");
    let n = cfg.spectrum.points;
    for k in 0..n {
        let omega = -w + 2.0 * w * k as f64 / (n - 1) as f64;
        let chi = susceptibility(omega, &params, delta, convention);
        table.row(&[omega, chi.re, chi.im, transmission(omega, &params, delta, convention)]);
    }
    let bytes = table.into_bytes();
    match &o.out {
        Some(_) => {
            let dir = out_dir(o)?;
            dir.write("spectrum.csv", &bytes)?;
            write_config(&dir, cfg)
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

#[derive(Serialize)]
struct Parameters {
    b: f64,
    delta_over_gamma: f64,
    decay: f64,
    sigma_tau: f64,
    t_center: f64,
    t_off: Option<f64>,
    t_on: Option<f64>,
    ramp_time: Option<f64>,
    variant: SchemeVariant,
    nz: usize,
    nt: usize,
    dt: f64,
    t_max: f64,
}

#[derive(Serialize)]
struct Summary {
    fidelity: f64,
    delay: Option<f64>,
    energy_in: f64,
    energy_out: f64,
    parameters: Parameters,
    reference_delay: f64,
    fidelity_sq: f64,
    shifted_input_overlap: f64,
    stored_fraction_at_switch: Option<f64>,
    energy_residual: f64,
    energy_unaccounted: f64,
}

fn time_series(result: &SimResult, header_lines: &[String]) -> Vec<u8> {
    let full = result.e_out_x.is_some();
    let mut cols = vec!["t", "delta", "re_e_in", "im_e_in", "re_e_out", "im_e_out"];
    if full {
        cols.extend(["re_ex_in", "im_ex_in", "re_ex_out", "im_ex_out"]);
    }
    cols.push("atomic_excitation");
    let mut table = Table::new(&cols);
    for line in header_lines {
        table.comment(line.clone());
    }
    for k in 0..result.times.len() {
        let mut row = vec![
            result.times[k],
            result.delta_trace[k],
            result.e_in[k].re,
            result.e_in[k].im,
            result.e_out[k].re,
            result.e_out[k].im,
        ];
        if let (Some(xi), Some(xo)) = (&result.e_in_x, &result.e_out_x) {
            row.extend([xi[k].re, xi[k].im, xo[k].re, xo[k].im]);
        }
        row.push(result.atomic_excitation[k]);
        table.row(&row);
    }
    table.into_bytes()
}

fn snapshot_table(result: &SimResult) -> Option<Vec<u8>> {
    let snaps = result.snapshots.as_ref()?;
    let names = result.variant.atomic_names();
    let mut cols: Vec<String> = ["step", "t", "zeta", "re_e_y", "im_e_y"].iter().map(|s| s.to_string()).collect();
    if result.e_out_x.is_some() {
        cols.extend(["re_e_x".to_string(), "im_e_x".to_string()]);
    }
    for n in names {
        cols.push(format!("re_{n}"));
        cols.push(format!("im_{n}"));
    }
    let header: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    table.comment(format!("stride = {}", snaps.stride));
    for frame in &snaps.frames {
        for (j, zeta) in result.zetas.iter().enumerate() {
            let mut fields = vec![frame.step.to_string(), num(frame.time), num(*zeta)];
            fields.push(num(frame.e_y[j].re));
            fields.push(num(frame.e_y[j].im));
            if let Some(ex) = &frame.e_x {
                fields.push(num(ex[j].re));
                fields.push(num(ex[j].im));
            }
            for a in &frame.atoms {
                fields.push(num(a[j].re));
                fields.push(num(a[j].im));
            }
            table.raw_row(&fields);
        }
    }
    Some(table.into_bytes())
}

struct Run<'a> {
    cfg: &'a RunConfig,
    params: MediumParams,
    schedule: SplittingSchedule,
    pulse: ProbePulse,
    grid: SimGrid,
    tau: f64,
}

fn execute(run: Run, o: &Overrides) -> Result<(), CliError> {
    let variant: SchemeVariant = run.cfg.run.variant.into();
    let result = simulate_with(&run.params, &run.schedule, &run.pulse, &run.grid, variant, snapshot_policy(run.cfg))?;
    let report = fidelity(&result, &run.pulse, run.tau.min(result.t_max()), None)?;
    let balance = energy_balance(&result);
    let delay = measured_delay(&result).ok();
    let switches = run.schedule.switch_times();
    let summary = Summary {
        fidelity: report.fidelity,
        delay,
        energy_in: balance.input,
        energy_out: balance.output,
        parameters: Parameters {
            b: run.params.optical_depth(),
            delta_over_gamma: run.schedule.peak(),
            decay: run.params.decay(),
            sigma_tau: run.pulse.sigma_tau,
            t_center: run.pulse.t_center,
            t_off: switches.map(|s| s.0),
            t_on: switches.map(|s| s.1),
            ramp_time: switches.map(|_| run.cfg.schedule.ramp_time),
            variant,
            nz: run.grid.nz,
            nt: run.grid.nt,
            dt: run.grid.dt(),
            t_max: run.grid.t_max,
        },
        reference_delay: report.reference_delay,
        fidelity_sq: report.fidelity_sq(),
        shifted_input_overlap: shifted_input_overlap(&result, &run.pulse, delay.unwrap_or(0.0).max(0.0))?,
        stored_fraction_at_switch: result.diagnostics.stored_fraction_at_switch,
        energy_residual: balance.residual,
        energy_unaccounted: balance.unaccounted,
    };
    let dir = out_dir(o)?;
    let header = vec![
        format!("b = {}", num(summary.parameters.b)),
        format!("delta_over_gamma = {}", num(summary.parameters.delta_over_gamma)),
        format!("sigma_tau = {}", num(summary.parameters.sigma_tau)),
        format!("variant = {:?}", variant),
        "fields in units of the input peak amplitude; time in 1/gamma".to_string(),
    ];
    dir.write("timeseries.csv", &time_series(&result, &header))?;
    if let Some(bytes) = snapshot_table(&result) {
        dir.write("snapshots.csv", &bytes)?;
    }
    dir.write("summary.json", &json(&summary)?)?;
    write_config(&dir, run.cfg)
}

fn grid_for(cfg: &RunConfig, delta: f64, horizon: f64) -> Result<SimGrid, CliError> {
    let t_max = cfg.grid.t_max.unwrap_or(horizon);
    let dt = cfg.grid.dt.unwrap_or_else(|| default_step(cfg.pulse.sigma_tau, delta));
    Ok(SimGrid::with_max_step(cfg.grid.nz, dt, t_max)?)
}

pub fn slowlight(cfg: &RunConfig, o: &Overrides) -> Result<(), CliError> {
    let params = medium(cfg)?;
    let delta = cfg.schedule.delta;
    let schedule = SplittingSchedule::constant(delta)?;
    let sigma = cfg.pulse.sigma_tau;
    let pulse = ProbePulse::new(sigma, cfg.pulse.t_center.unwrap_or(5.0 * sigma))?;
    let tg = lossless_group_delay(&params, delta).unwrap_or(0.0);
    let grid = grid_for(cfg, delta, pulse.t_center + 1.5 * tg + 8.0 * sigma)?;
    let tau = cfg
        .run
        .tau
        .unwrap_or_else(|| group_delay(&params, delta, Convention::Canonical).unwrap_or(0.0).max(0.0));
    execute(
        Run {
            cfg,
            params,
            schedule,
            pulse,
            grid,
            tau,
        },
        o,
    )
}

fn storage_template(cfg: &RunConfig, delay_window: f64) -> StorageTemplate {
    StorageTemplate {
        sigma_tau: cfg.pulse.sigma_tau,
        t_off: cfg.schedule.t_off,
        hold: cfg.schedule.t_on - cfg.schedule.t_off,
        ramp_time: cfg.schedule.ramp_time,
        placement: match cfg.pulse.t_center {
            Some(t_center) => Placement::Fixed { t_center },
            None => Placement::CenteredAtSwitch,
        },
        decay: cfg.medium.decay,
        delay_window,
    }
}

pub fn store(cfg: &RunConfig, o: &Overrides) -> Result<(), CliError> {
    let params = medium(cfg)?;
    let delta = cfg.schedule.delta;
    let template = storage_template(cfg, 0.0);
    template.validate()?;
    let s = &cfg.schedule;
    let schedule = SplittingSchedule::store(delta, s.t_off, s.t_on, s.ramp_time)?;
    let pulse = template.pulse(&params, delta)?;
    let grid = grid_for(cfg, delta, template.horizon(&params, delta))?;
    let tau = cfg.run.tau.unwrap_or_else(|| template.reference_delay(&params, delta));
    execute(
        Run {
            cfg,
            params,
            schedule,
            pulse,
            grid,
            tau,
        },
        o,
    )
}

fn grid_policy(cfg: &RunConfig) -> GridPolicy {
    GridPolicy {
        nz: cfg.grid.nz,
        dt_max: cfg.grid.dt,
    }
}

pub fn sweep(cfg: &RunConfig, o: &Overrides) -> Result<(), CliError> {
    let template = storage_template(cfg, cfg.sweep.delay_window);
    let result = heatmap(
        &cfg.sweep.b_list,
        &cfg.sweep.delta_list,
        &template,
        &grid_policy(cfg),
        cfg.run.variant.into(),
        cfg.run.jobs,
    )?;
    let mut table = Table::new(&["b", "delta_over_gamma", "fidelity_mod", "fidelity_mod_sq", "delay"]);
    table.comment(format!("sigma_tau = {}", num(template.sigma_tau)));
    table.comment(format!("t_off = {}", num(template.t_off)));
    table.comment(format!("t_on = {}", num(template.t_on())));
    table.comment(format!("delay_window = {}", num(template.delay_window)));
    for row in &result.rows {
        if let Some(err) = &row.error {
            table.comment(format!("failed at b = {}, delta = {}: {err}", num(row.b), num(row.delta_over_gamma)));
        }
    }
    for row in &result.rows {
        table.row(&[row.b, row.delta_over_gamma, row.fidelity_mod, row.fidelity_mod_sq, row.delay]);
    }
    let dir = out_dir(o)?;
    dir.write("heatmap.csv", &table.into_bytes())?;
    write_config(&dir, cfg)
}

#[derive(Serialize)]
struct FitReport {
    t_s: f64,
    c0: Option<f64>,
    c1: Option<f64>,
    rms_residual: Option<f64>,
    asymptote: Option<f64>,
    fit_error: Option<String>,
    monotone: bool,
    best_delta_slope: Option<f64>,
}

pub fn optimize(cfg: &RunConfig, o: &Overrides) -> Result<(), CliError> {
    let template = storage_template(cfg, cfg.sweep.delay_window);
    let mut b_list = cfg.optimize.b_list.clone();
    if cfg.optimize.full_scale && !b_list.contains(&FULL_SCALE_B) {
        b_list.push(FULL_SCALE_B);
        b_list.sort_by(f64::total_cmp);
    }
    let bounds = match (cfg.optimize.delta_min, cfg.optimize.delta_max) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(CliError::Config("give both optimize.delta_min and optimize.delta_max".into())),
    };
    let curve = optimize_curve(
        &b_list,
        &template,
        &grid_policy(cfg),
        bounds,
        &OptimizerSettings::default(),
        cfg.run.variant.into(),
        cfg.run.jobs,
    )?;
    let t_s = template.hold;
    let points: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.b, r.best_fidelity)).collect();
    let fit = fit_fidelity_curve(&points, t_s);
    let slope = log_slope(&curve.rows.iter().map(|r| (r.b, r.best_delta)).collect::<Vec<_>>()).ok();
    let report = FitReport {
        t_s,
        c0: fit.as_ref().ok().map(|f| f.c0),
        c1: fit.as_ref().ok().map(|f| f.c1),
        rms_residual: fit.as_ref().ok().map(|f| f.rms_residual),
        asymptote: fit.as_ref().ok().map(|f| f.asymptote(t_s)),
        fit_error: fit.as_ref().err().map(|e| e.to_string()),
        monotone: curve.is_monotone(1e-3),
        best_delta_slope: slope,
    };
    let mut table = Table::new(&["b", "best_delta", "best_fidelity"]);
    table.comment(format!("t_s = {}", num(t_s)));
    for r in &curve.rows {
        let (lo, hi) = bounds.unwrap_or_else(|| default_delta_bounds(r.b, &template));
        table.comment(format!("b = {}: delta bracket [{}, {}]", num(r.b), num(lo), num(hi)));
    }
    for r in &curve.rows {
        table.row(&[r.b, r.best_delta, r.best_fidelity]);
    }
    let dir = out_dir(o)?;
    dir.write("curve.csv", &table.into_bytes())?;
    dir.write("fit.json", &json(&report)?)?;
    write_config(&dir, cfg)
}

pub fn estimate(cfg: &RunConfig, o: &Overrides) -> Result<(), CliError> {
    let report = match (&cfg.estimate.custom, &cfg.estimate.preset) {
        (Some(custom), None) => experimental_estimate("custom", custom)?,
        (Some(_), Some(_)) => return Err(CliError::Config("give either estimate.preset or estimate.custom".into())),
        (None, preset) => {
            let preset: Preset = preset.as_deref().unwrap_or("sr").parse()?;
            preset_estimate(preset)?
        }
    };
    let bytes = json(&report)?;
    if o.out.is_some() {
        let dir = out_dir(o)?;
        dir.write("estimate.json", &bytes)?;
        write_config(&dir, cfg)?;
    }
    use std::io::Write;
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}
