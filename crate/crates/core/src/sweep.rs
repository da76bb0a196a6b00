//! Parameter scans over optical depth and splitting, splitting optimization,
//! the fidelity-curve fit and the empirical delay scaling check.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::mb_solver::{run_storage, simulate, SnapshotPolicy};
use crate::metrics::{fidelity, fidelity_max_over_delay, measured_delay};
use crate::model::{
    default_step, MediumParams, ProbePulse, SchemeVariant, SimGrid, SplittingSchedule, DEFAULT_NZ, PHYSICAL_DECAY,
};
use crate::search::{golden_max, local_maxima};
use crate::spectral::{group_delay, lossless_group_delay, Convention};

/// Where the probe sits when the splitting is switched off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// Pulse centre half-way through the medium at `t_off`:
    /// `t_center = t_off - T_g/2`, never earlier than `4 σ_τ`.
    CenteredAtSwitch,
    Fixed { t_center: f64 },
}

/// Pulse and switching times shared by every point of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageTemplate {
    pub sigma_tau: f64,
    pub t_off: f64,
    pub hold: f64,
    pub ramp_time: f64,
    pub placement: Placement,
    /// Coherence decay in units of γ.
    pub decay: f64,
    /// Half-width, in units of `σ_τ`, of the detection-delay window around
    /// `hold + T_g` over which fidelity is maximized; 0 fixes the delay.
    pub delay_window: f64,
}

impl Default for StorageTemplate {
    fn default() -> Self {
        StorageTemplate {
            sigma_tau: 0.002,
            t_off: 0.017,
            hold: 0.013,
            ramp_time: 0.0,
            placement: Placement::CenteredAtSwitch,
            decay: PHYSICAL_DECAY,
            delay_window: 2.0,
        }
    }
}

impl StorageTemplate {
    /// Same shape with every time scaled to a new pulse width.
    pub fn scaled_to(&self, sigma_tau: f64) -> Self {
        let s = sigma_tau / self.sigma_tau;
        StorageTemplate {
            sigma_tau,
            t_off: self.t_off * s,
            hold: self.hold * s,
            ramp_time: self.ramp_time * s,
            placement: match self.placement {
                Placement::Fixed { t_center } => Placement::Fixed { t_center: t_center * s },
                p => p,
            },
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma_tau", self.sigma_tau)?;
        require_positive("t_off", self.t_off)?;
        require_positive("hold", self.hold)?;
        require_non_negative("ramp_time", self.ramp_time)?;
        require_non_negative("decay", self.decay)?;
        require_non_negative("delay_window", self.delay_window)?;
        if let Placement::Fixed { t_center } = self.placement {
            require_non_negative("t_center", t_center)?;
        }
        Ok(())
    }

    pub fn t_on(&self) -> f64 {
        self.t_off + self.hold
    }

    pub fn medium(&self, b: f64) -> Result<MediumParams> {
        MediumParams::dimensionless(b)?.with_decay(self.decay)
    }

    pub fn pulse(&self, params: &MediumParams, delta: f64) -> Result<ProbePulse> {
        let t_center = match self.placement {
            Placement::Fixed { t_center } => t_center,
            Placement::CenteredAtSwitch => {
                let tg = lossless_group_delay(params, delta).unwrap_or(0.0);
                (self.t_off - 0.5 * tg).max(4.0 * self.sigma_tau)
            }
        };
        ProbePulse::new(self.sigma_tau, t_center)
    }

    /// Default detection delay: hold time plus the canonical group delay.
    pub fn reference_delay(&self, params: &MediumParams, delta: f64) -> f64 {
        self.hold + group_delay(params, delta, Convention::Canonical).unwrap_or(0.0).max(0.0)
    }

    /// Simulated horizon: `t_on + 8 σ_τ + min(2 T_g, t_on)`.
    pub fn horizon(&self, params: &MediumParams, delta: f64) -> f64 {
        let tg = lossless_group_delay(params, delta).unwrap_or(0.0);
        self.t_on() + 8.0 * self.sigma_tau + (2.0 * tg).min(self.t_on())
    }
}

/// Spatial resolution and time-step rule for scan points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    pub nz: usize,
    /// Overrides the default step bound when set.
    pub dt_max: Option<f64>,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            nz: DEFAULT_NZ,
            dt_max: None,
        }
    }
}

impl GridPolicy {
    /// Grid resolving `delta_for_step` up to `horizon`.
    pub fn grid(&self, sigma_tau: f64, delta_for_step: f64, horizon: f64) -> Result<SimGrid> {
        let dt = self.dt_max.unwrap_or_else(|| default_step(sigma_tau, delta_for_step));
        SimGrid::with_max_step(self.nz, dt, horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointDiagnostics {
    pub steps: usize,
    pub dt: f64,
    pub max_residual: f64,
    pub stored_fraction: Option<f64>,
    pub reference_delay: f64,
    pub multimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub b: f64,
    pub delta_over_gamma: f64,
    pub fidelity_mod: f64,
    pub fidelity_mod_sq: f64,
    /// Centroid delay of the retrieved pulse; NaN when nothing came out.
    pub delay: f64,
    pub diagnostics: Option<PointDiagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub b_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub template: StorageTemplate,
    pub policy: GridPolicy,
    pub variant: SchemeVariant,
    /// Row-major in `b`, then `delta`.
    pub rows: Vec<SweepRow>,
}

/// Outcome of one storage run scored against the input mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoragePoint {
    pub fidelity: f64,
    pub delay: f64,
    pub diagnostics: PointDiagnostics,
}

/// One storage simulation at `(b, delta)` with the template's switching,
/// stepping at the bound set by `step_delta` (at least `delta`).
pub fn storage_point(
    b: f64,
    delta: f64,
    step_delta: f64,
    template: &StorageTemplate,
    policy: &GridPolicy,
    variant: SchemeVariant,
) -> Result<StoragePoint> {
    template.validate()?;
    let params = template.medium(b)?;
    let pulse = template.pulse(&params, delta)?;
    let grid = policy.grid(template.sigma_tau, step_delta.max(delta), template.horizon(&params, delta))?;
    let result = run_storage(
        &params,
        delta,
        template.t_off,
        template.t_on(),
        template.ramp_time,
        &pulse,
        &grid,
        variant,
        SnapshotPolicy::Off,
    )?;
    let tau = template.reference_delay(&params, delta).min(result.t_max());
    let (report, multimodal) = if template.delay_window > 0.0 {
        let w = template.delay_window * template.sigma_tau;
        let s = fidelity_max_over_delay(&result, &pulse, ((tau - w).max(0.0), tau + w))?;
        (s.report, s.multimodal)
    } else {
        (fidelity(&result, &pulse, tau, None)?, false)
    };
    Ok(StoragePoint {
        fidelity: report.fidelity,
        delay: measured_delay(&result).unwrap_or(f64::NAN),
        diagnostics: PointDiagnostics {
            steps: result.diagnostics.steps,
            dt: result.dt,
            max_residual: result.diagnostics.max_residual,
            stored_fraction: result.diagnostics.stored_fraction_at_switch,
            reference_delay: report.reference_delay,
            multimodal,
        },
    })
}

fn check_ladder(name: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(name, "must not be empty"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(name, "values must be finite"));
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(name, "must be sorted ascending"));
    }
    Ok(())
}

fn in_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid("jobs", e.to_string()))?;
            Ok(pool.install(work))
        }
    }
}

/// Fidelity over the `b × delta` grid, one storage run per point.
///
/// Every point of a `b` row steps at the bound set by the largest splitting,
/// so rows are computed on a common grid. Failures are kept in the row.
pub fn heatmap(
    b_list: &[f64],
    delta_list: &[f64],
    template: &StorageTemplate,
    policy: &GridPolicy,
    variant: SchemeVariant,
    jobs: Option<usize>,
) -> Result<SweepResult> {
    check_ladder("b_list", b_list)?;
    check_ladder("delta_list", delta_list)?;
    template.validate()?;
    let step_delta = *delta_list.last().unwrap_or(&0.0);
    let points: Vec<(f64, f64)> = b_list
        .iter()
        .flat_map(|&b| delta_list.iter().map(move |&d| (b, d)))
        .collect();
    let done = AtomicUsize::new(0);
    let total = points.len();
    let rows = in_pool(jobs, || {
        points
            .par_iter()
            .map(|&(b, delta)| {
                let row = match storage_point(b, delta, step_delta, template, policy, variant) {
                    Ok(p) => SweepRow {
                        b,
                        delta_over_gamma: delta,
                        fidelity_mod: p.fidelity,
                        fidelity_mod_sq: p.fidelity * p.fidelity,
                        delay: p.delay,
                        diagnostics: Some(p.diagnostics),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        b,
                        delta_over_gamma: delta,
                        fidelity_mod: f64::NAN,
                        fidelity_mod_sq: f64::NAN,
                        delay: f64::NAN,
                        diagnostics: None,
                        error: Some(e.to_string()),
                    },
                };
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                log::info!("heatmap point {n}/{total}: b = {b}, delta = {delta}");
                row
            })
            .collect()
    })?;
    Ok(SweepResult {
        b_list: b_list.to_vec(),
        delta_list: delta_list.to_vec(),
        template: *template,
        policy: *policy,
        variant,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Points of the logarithmic pre-scan.
    pub prescan: usize,
    /// Points of the fallback grid when the pre-scan is multimodal.
    pub fallback: usize,
    /// Relative tolerance on Δ of the golden-section stage.
    pub rel_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            prescan: 8,
            fallback: 24,
            rel_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaOptimum {
    pub best_delta: f64,
    pub best_fidelity: f64,
    pub evaluations: usize,
    /// The pre-scan had several local maxima and the fallback grid was used.
    pub multimodal: bool,
}

/// Default search bracket for the splitting at optical depth `b`.
pub fn default_delta_bounds(b: f64, template: &StorageTemplate) -> (f64, f64) {
    let centre = (b / (4.0 * template.sigma_tau)).sqrt().max(1.0);
    (0.2 * centre, 5.0 * centre)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// Maximizes storage fidelity over Δ in `bounds` at fixed `b`.
///
/// Search runs in `ln Δ`. Each evaluation steps at the bound of its own Δ.
pub fn optimize_delta(
    b: f64,
    template: &StorageTemplate,
    policy: &GridPolicy,
    bounds: (f64, f64),
    settings: &OptimizerSettings,
    variant: SchemeVariant,
) -> Result<DeltaOptimum> {
    let (lo, hi) = bounds;
    require_positive("delta lower bound", lo)?;
    require_positive("delta upper bound", hi)?;
    if hi < lo {
        return Err(Error::invalid("delta bounds", format!("need lo <= hi, got [{lo}, {hi}]")));
    }
    let mut evaluations = 0;
    let mut last_error = String::new();
    let mut eval = |delta: f64| -> f64 {
        evaluations += 1;
        match storage_point(b, delta, delta, template, policy, variant) {
            Ok(p) => p.fidelity,
            Err(e) => {
                log::warn!("b = {b}, delta = {delta}: {e}");
                last_error = e.to_string();
                f64::NAN
            }
        }
    };
    if hi == lo {
        let f = eval(lo);
        if f.is_nan() {
            return Err(Error::AllFailed(last_error));
        }
        return Ok(DeltaOptimum {
            best_delta: lo,
            best_fidelity: f,
            evaluations,
            multimodal: false,
        });
    }
    let mut grid = log_grid(lo, hi, settings.prescan.max(3));
    let mut values: Vec<f64> = grid.iter().map(|&d| eval(d)).collect();
    let scrub = |v: &[f64]| v.iter().map(|x| if x.is_nan() { -1.0 } else { *x }).collect::<Vec<_>>();
    if values.iter().all(|v| v.is_nan()) {
        return Err(Error::AllFailed(last_error));
    }
    let multimodal = local_maxima(&scrub(&values), 0.0).len() > 1;
    if multimodal {
        grid = log_grid(lo, hi, settings.fallback.max(settings.prescan));
        values = grid.iter().map(|&d| eval(d)).collect();
    }
    let clean = scrub(&values);
    let best = (0..grid.len()).max_by(|&i, &j| clean[i].total_cmp(&clean[j])).unwrap_or(0);
    let a = grid[best.saturating_sub(1)].ln();
    let c = grid[(best + 1).min(grid.len() - 1)].ln();
    let refined = golden_max(
        |x| {
            let f = eval(x.exp());
            if f.is_nan() { -1.0 } else { f }
        },
        a,
        c,
        settings.rel_tol,
    );
    let (best_delta, best_fidelity) = if refined.value >= clean[best] {
        (refined.x.exp(), refined.value)
    } else {
        (grid[best], clean[best])
    };
    Ok(DeltaOptimum {
        best_delta,
        best_fidelity,
        evaluations,
        multimodal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub b: f64,
    pub best_delta: f64,
    pub best_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationCurve {
    pub rows: Vec<CurveRow>,
    pub template: StorageTemplate,
    pub policy: GridPolicy,
    pub settings: OptimizerSettings,
    pub variant: SchemeVariant,
}

impl OptimizationCurve {
    /// True when `best_fidelity` never drops by more than `slack` along `b`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].best_fidelity >= w[0].best_fidelity - slack)
    }
}

/// Runs [`optimize_delta`] at each `b` with [`default_delta_bounds`] unless
/// `bounds` is given.
pub fn optimize_curve(
    b_list: &[f64],
    template: &StorageTemplate,
    policy: &GridPolicy,
    bounds: Option<(f64, f64)>,
    settings: &OptimizerSettings,
    variant: SchemeVariant,
    jobs: Option<usize>,
) -> Result<OptimizationCurve> {
    check_ladder("b_list", b_list)?;
    let rows = in_pool(jobs, || {
        b_list
            .par_iter()
            .map(|&b| {
                let range = bounds.unwrap_or_else(|| default_delta_bounds(b, template));
                let opt = optimize_delta(b, template, policy, range, settings, variant)?;
                log::info!("b = {b}: best delta {:.4e}, fidelity {:.6}", opt.best_delta, opt.best_fidelity);
                Ok(CurveRow {
                    b,
                    best_delta: opt.best_delta,
                    best_fidelity: opt.best_fidelity,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(OptimizationCurve {
        rows,
        template: *template,
        policy: *policy,
        settings: *settings,
        variant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityFit {
    pub c0: f64,
    pub c1: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

impl FidelityFit {
    pub fn model(&self, b: f64, t_s: f64) -> f64 {
        fit_model(self.c0, self.c1, b, t_s)
    }

    /// Large-`b` limit `exp(-c0 t_s)`.
    pub fn asymptote(&self, t_s: f64) -> f64 {
        (-self.c0 * t_s).exp()
    }
}

fn fit_model(c0: f64, c1: f64, b: f64, t_s: f64) -> f64 {
    (-c0 * t_s).exp() * (1.0 - (-c1 * b.sqrt()).exp())
}

/// Least-squares fit of `F(b) = exp(-c0 t_s) (1 - exp(-c1 √b))`.
///
/// The amplitude is linear once `c1` is fixed, which gives the starting point
/// from a coarse scan in `c1`; Levenberg-Marquardt then refines both.
pub fn fit_fidelity_curve(points: &[(f64, f64)], t_s: f64) -> Result<FidelityFit> {
    if points.len() < 4 {
        return Err(Error::invalid("curve", format!("need at least 4 points, got {}", points.len())));
    }
    require_positive("t_s", t_s)?;
    if points.iter().any(|&(b, f)| !(b >= 0.0 && b.is_finite() && f.is_finite())) {
        return Err(Error::invalid("curve", "points must be finite with b >= 0"));
    }
    let sse = |c0: f64, c1: f64| -> f64 {
        points
            .iter()
            .map(|&(b, f)| (fit_model(c0, c1, b, t_s) - f).powi(2))
            .sum()
    };
    let amplitude_for = |c1: f64| -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &(b, f) in points {
            let g = 1.0 - (-c1 * b.sqrt()).exp();
            num += g * f;
            den += g * g;
        }
        if den > 0.0 { num / den } else { 0.0 }
    };
    let mut start = None;
    for k in 0..=120 {
        let c1 = 10f64.powf(-5.0 + 7.0 * k as f64 / 120.0);
        let amp = amplitude_for(c1);
        if amp <= 0.0 {
            continue;
        }
        let c0 = -amp.ln() / t_s;
        let s = sse(c0, c1);
        if start.map_or(true, |(_, _, best)| s < best) {
            start = Some((c0, c1, s));
        }
    }
    let (mut c0, mut c1, mut cost) =
        start.ok_or_else(|| Error::DegenerateFit("no positive amplitude fits the data".into()))?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        let (mut a00, mut a01, mut a11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(b, f) in points {
            let amp = (-c0 * t_s).exp();
            let e = (-c1 * b.sqrt()).exp();
            let r = amp * (1.0 - e) - f;
            let j0 = -t_s * amp * (1.0 - e);
            let j1 = amp * b.sqrt() * e;
            a00 += j0 * j0;
            a01 += j0 * j1;
            a11 += j1 * j1;
            g0 += j0 * r;
            g1 += j1 * r;
        }
        let det = a00 * a11 - a01 * a01;
        if !(det > 1e-14 * (a00 * a11).max(f64::MIN_POSITIVE)) {
            return Err(Error::DegenerateFit(format!("singular normal equations (det {det:.3e})")));
        }
        let mut improved = false;
        while lambda < 1e12 {
            let (m00, m11) = (a00 * (1.0 + lambda), a11 * (1.0 + lambda));
            let d = m00 * m11 - a01 * a01;
            let s0 = -(m11 * g0 - a01 * g1) / d;
            let s1 = -(m00 * g1 - a01 * g0) / d;
            let trial = sse(c0 + s0, c1 + s1);
            if trial.is_finite() && trial <= cost {
                let step = (s0 / c0.abs().max(1.0)).abs().max((s1 / c1.abs().max(1e-12)).abs());
                c0 += s0;
                c1 += s1;
                let gain = cost - trial;
                cost = trial;
                lambda = (lambda * 0.3).max(1e-12);
                improved = gain > 1e-30 && step > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(FidelityFit {
        c0,
        c1,
        rms_residual: (cost / points.len() as f64).sqrt(),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub b: f64,
    pub delta: f64,
    pub delay: f64,
    /// `delay · Δ² / b`.
    pub prefactor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub b_exponent: f64,
    pub delta_exponent: f64,
    /// `T_g = prefactor · b / Δ²` from the fit intercept.
    pub prefactor: f64,
    /// Largest relative deviation of a point's prefactor from the mean.
    pub prefactor_spread: f64,
    pub sigma_tau: f64,
    pub points: Vec<ScalingPoint>,
}

/// Settings of the slow-light runs behind [`verify_scaling`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSettings {
    /// `σ_τ = pulse_cycles / Δ_min`.
    pub pulse_cycles: f64,
    pub nz: usize,
    pub decay: f64,
    /// Largest admissible attenuation exponent `b / (4Δ²)`.
    pub regime_limit: f64,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        ScalingSettings {
            pulse_cycles: 20.0,
            nz: 100,
            decay: PHYSICAL_DECAY,
            regime_limit: 0.1,
        }
    }
}

/// Measures the centroid delay at every `(b, Δ)` and fits
/// `ln T = ln A + p ln b + q ln Δ`.
///
/// All points share one pulse, narrow enough in bandwidth for the smallest
/// splitting. The regime check uses the on-resonance attenuation exponent of
/// the simulated equations, `b / (4Δ²)`.
pub fn verify_scaling(
    b_list: &[f64],
    delta_list: &[f64],
    settings: &ScalingSettings,
    jobs: Option<usize>,
) -> Result<ScalingReport> {
    check_ladder("b_list", b_list)?;
    check_ladder("delta_list", delta_list)?;
    if b_list.len() < 2 || delta_list.len() < 2 {
        return Err(Error::invalid("scaling grid", "need at least two values on each axis"));
    }
    for &b in b_list {
        for &delta in delta_list {
            let params = MediumParams::dimensionless(b)?;
            let metric = lossless_group_delay(&params, delta)?;
            if !(metric < settings.regime_limit) {
                return Err(Error::RegimeViolation { b, delta, metric });
            }
        }
    }
    let d_min = delta_list[0];
    let d_max = *delta_list.last().unwrap_or(&d_min);
    let sigma = settings.pulse_cycles / d_min;
    let points: Vec<(f64, f64)> = b_list
        .iter()
        .flat_map(|&b| delta_list.iter().map(move |&d| (b, d)))
        .collect();
    let measured = in_pool(jobs, || {
        points
            .par_iter()
            .map(|&(b, delta)| -> Result<ScalingPoint> {
                let params = MediumParams::dimensionless(b)?.with_decay(settings.decay)?;
                let pulse = ProbePulse::new(sigma, 5.0 * sigma)?;
                let tg = lossless_group_delay(&params, delta)?;
                let horizon = 10.0 * sigma + 2.0 * tg;
                let grid = SimGrid::with_max_step(settings.nz, default_step(sigma, d_max), horizon)?;
                let schedule = SplittingSchedule::constant(delta)?;
                let result = simulate(&params, &schedule, &pulse, &grid, SchemeVariant::ZeemanV)?;
                let delay = measured_delay(&result)?;
                Ok(ScalingPoint {
                    b,
                    delta,
                    delay,
                    prefactor: delay * delta * delta / b,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    if measured.iter().any(|p| !(p.delay > 0.0)) {
        return Err(Error::DegenerateFit("non-positive delay in scaling grid".into()));
    }
    let rows: Vec<[f64; 4]> = measured
        .iter()
        .map(|p| [1.0, p.b.ln(), p.delta.ln(), p.delay.ln()])
        .collect();
    let coef = least_squares3(&rows)?;
    let mean = measured.iter().map(|p| p.prefactor).sum::<f64>() / measured.len() as f64;
    let spread = measured
        .iter()
        .map(|p| (p.prefactor / mean - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(ScalingReport {
        b_exponent: coef[1],
        delta_exponent: coef[2],
        prefactor: coef[0].exp(),
        prefactor_spread: spread,
        sigma_tau: sigma,
        points: measured,
    })
}

/// Ordinary least squares for `y = x·β` with three regressors, rows `[x0, x1, x2, y]`.
fn least_squares3(rows: &[[f64; 4]]) -> Result<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for r in rows {
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += r[i] * r[j];
            }
            a[i][3] += r[i] * r[3];
        }
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-12 {
            return Err(Error::DegenerateFit("log-log regression is rank deficient".into()));
        }
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Ok([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::DegenerateFit("log slope needs two or more positive points".into()));
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln() / n, b + y.ln() / n));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        sxy += (x.ln() - mx) * (y.ln() - my);
        sxx += (x.ln() - mx).powi(2);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}
