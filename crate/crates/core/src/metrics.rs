//! Figures of merit extracted from a [`SimResult`].
//!
//! All time integrals use the trapezoidal rule on the simulation grid.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mb_solver::SimResult;
use crate::model::ProbePulse;
use crate::search::{golden_max, linspace, local_maxima};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    /// `|overlap| / N_ph`.
    pub fidelity: f64,
    /// Detection delay τ̄ in units of `1/γ`.
    pub reference_delay: f64,
    pub photon_number_in: f64,
    pub photon_number_out: f64,
    pub overlap_complex: C64,
}

impl FidelityReport {
    pub fn fidelity_sq(&self) -> f64 {
        self.fidelity * self.fidelity
    }
}

fn trapezoid_weight(k: usize, n: usize, dt: f64) -> f64 {
    if k == 0 || k + 1 == n {
        0.5 * dt
    } else {
        dt
    }
}

/// Single-mode fidelity of the output against the input mode delayed by `tau`.
///
/// `F = |∫_{t1}^{t2} E_out*(t) E_in(t - τ) dt| / N_ph` with `N_ph` the input
/// energy over the whole simulated record. The input mode is evaluated
/// analytically, so `tau` need not sit on the grid. `window = None` uses
/// `[0, t_max]`.
pub fn fidelity(result: &SimResult, pulse: &ProbePulse, tau: f64, window: Option<(f64, f64)>) -> Result<FidelityReport> {
    let t_max = result.t_max();
    let (t1, t2) = window.unwrap_or((0.0, t_max));
    let slack = 1e-9 * t_max.max(1.0);
    if !(t1 >= -slack && t2 <= t_max + slack && t1 < t2) {
        return Err(Error::WindowOutsideHorizon { t1, t2, t_max });
    }
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau", format!("must be >= 0, got {tau}")));
    }
    let n = result.times.len();
    let dt = result.dt;
    let mut n_in = 0.0;
    for k in 0..n {
        n_in += trapezoid_weight(k, n, dt) * result.input_intensity()[k];
    }
    let mut overlap = C64::new(0.0, 0.0);
    let mut n_out = 0.0;
    let (first, last) = (
        ((t1 / dt).ceil().max(0.0) as usize).min(n - 1),
        ((t2 / dt).floor().max(0.0) as usize).min(n - 1),
    );
    let m = last + 1 - first;
    for (i, k) in (first..=last).enumerate() {
        let t = result.times[k];
        let w = trapezoid_weight(i, m, dt);
        let mut term = result.e_out[k].conj() * pulse.input_y(t - tau);
        let mut out = result.e_out[k].norm_sqr();
        if let Some(x) = &result.e_out_x {
            term += x[k].conj() * pulse.input_x(t - tau);
            out += x[k].norm_sqr();
        }
        overlap += w * term;
        n_out += w * out;
    }
    let fidelity = if n_in > 0.0 { overlap.norm() / n_in } else { 0.0 };
    Ok(FidelityReport {
        fidelity,
        reference_delay: tau,
        photon_number_in: n_in,
        photon_number_out: n_out,
        overlap_complex: overlap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaySearch {
    pub report: FidelityReport,
    /// More than one local maximum in the pre-scan.
    pub multimodal: bool,
    /// The output never overlaps the input mode; `report` is at the midpoint.
    pub zero_output: bool,
}

/// Maximizes [`fidelity`] over `tau ∈ [lo, hi]`.
///
/// A pre-scan with spacing at most `σ_τ/10` locates the best bracket and
/// flags multimodality; golden-section search then refines inside it.
pub fn fidelity_max_over_delay(result: &SimResult, pulse: &ProbePulse, range: (f64, f64)) -> Result<DelaySearch> {
    let (lo, hi) = range;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::invalid("tau range", format!("need 0 <= lo <= hi, got [{lo}, {hi}]")));
    }
    let f = |tau: f64| fidelity(result, pulse, tau, None).map(|r| r.fidelity);
    let n = (((hi - lo) / (pulse.sigma_tau / 10.0)).ceil() as usize + 1).max(3);
    let taus = linspace(lo, hi, n);
    let values = taus.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let best_value = values.iter().copied().fold(0.0, f64::max);
    if best_value == 0.0 {
        let mid = 0.5 * (lo + hi);
        return Ok(DelaySearch {
            report: fidelity(result, pulse, mid, None)?,
            multimodal: false,
            zero_output: true,
        });
    }
    let peaks = local_maxima(&values, 1e-6 * best_value);
    let best = (0..n).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let a = taus[best.saturating_sub(1)];
    let b = taus[(best + 1).min(n - 1)];
    let tol = 1e-3 * result.dt;
    let m = golden_max(|t| f(t).unwrap_or(0.0), a, b, tol);
    let tau = if m.value >= values[best] { m.x } else { taus[best] };
    Ok(DelaySearch {
        report: fidelity(result, pulse, tau, None)?,
        multimodal: peaks.len() > 1,
        zero_output: false,
    })
}

fn centroid(intensity: &[f64], times: &[f64], dt: f64) -> (f64, f64) {
    let n = intensity.len();
    let mut energy = 0.0;
    let mut moment = 0.0;
    for k in 0..n {
        let w = trapezoid_weight(k, n, dt) * intensity[k];
        energy += w;
        moment += w * times[k];
    }
    (energy, if energy > 0.0 { moment / energy } else { 0.0 })
}

/// Centroid of `|E_out|²` minus centroid of `|E_in|²`.
pub fn measured_delay(result: &SimResult) -> Result<f64> {
    let (e_in, c_in) = centroid(&result.input_intensity(), &result.times, result.dt);
    let (e_out, c_out) = centroid(&result.output_intensity(), &result.times, result.dt);
    let ratio = if e_in > 0.0 { e_out / e_in } else { 0.0 };
    if !(ratio > 1e-9) {
        return Err(Error::VanishingOutput { ratio });
    }
    Ok(c_out - c_in)
}

/// Overlap of the output with the input shifted by `tau`, normalized by both
/// energies (1 for an undistorted, possibly attenuated, copy).
pub fn shifted_input_overlap(result: &SimResult, pulse: &ProbePulse, tau: f64) -> Result<f64> {
    let r = fidelity(result, pulse, tau, None)?;
    let n = result.times.len();
    let mut n_shift = 0.0;
    for (k, &t) in result.times.iter().enumerate() {
        n_shift += trapezoid_weight(k, n, result.dt)
            * (pulse.input_y(t - tau).norm_sqr() + pulse.input_x(t - tau).norm_sqr());
    }
    if r.photon_number_out <= 0.0 || n_shift <= 0.0 {
        return Ok(0.0);
    }
    Ok(r.overlap_complex.norm() / (r.photon_number_out * n_shift).sqrt())
}

/// Energy ledger at the end of the run, in units of input flux × `1/γ`.
///
/// In the retarded frame the field carries no energy inside the medium, so
/// `stored_field` is identically zero. `residual = (in - out - atomic - field) / in`
/// is what the coherence decay must account for; `unaccounted` subtracts the
/// decay channel as well and is the largest excursion over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBalance {
    pub input: f64,
    pub output: f64,
    pub stored_atomic: f64,
    pub stored_field: f64,
    pub decayed: f64,
    pub residual: f64,
    pub unaccounted: f64,
}

pub fn energy_balance(result: &SimResult) -> EnergyBalance {
    let n = result.times.len();
    let dt = result.dt;
    let fin = result.input_intensity();
    let fout = result.output_intensity();
    let mut input = 0.0;
    let mut output = 0.0;
    let mut unaccounted: f64 = result.atomic_excitation[0].abs();
    for k in 1..n {
        input += 0.5 * dt * (fin[k - 1] + fin[k]);
        output += 0.5 * dt * (fout[k - 1] + fout[k]);
        let r = input - output - result.atomic_excitation[k] - result.decayed[k];
        unaccounted = unaccounted.max(r.abs());
    }
    let scale = if input > 0.0 { input } else { 1.0 };
    let stored_atomic = result.atomic_excitation[n - 1];
    EnergyBalance {
        input,
        output,
        stored_atomic,
        stored_field: 0.0,
        decayed: result.decayed[n - 1],
        residual: (input - output - stored_atomic) / scale,
        unaccounted: unaccounted / scale,
    }
}
