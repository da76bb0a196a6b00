//! The solver and closed forms checked against independent references in
//! `common`.

mod common;

use chos_core::mb_solver::{run_storage, simulate, SnapshotPolicy};
use chos_core::metrics::fidelity;
use chos_core::model::{default_step, MediumParams, ProbePulse, SchemeVariant, SimGrid, SplittingSchedule};
use chos_core::spectral::{group_delay, susceptibility, Convention};
use chos_core::C64;

/// Coarse oracle fidelity of the trace (iii) storage run, 100 cells, dt = 1e-5.
const ORACLE_STORE_HIGH_DEPTH: f64 = 0.350513421401;
/// Same oracle at b = 1e3, Δ = 150, 100 cells, dt = 2e-5.
const ORACLE_STORE_LOW_DEPTH: f64 = 0.477822779045;

fn peak(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn slow_light_vs_fft(b: f64, delta: f64, sigma: f64, t_center: f64, t_max: f64, nz: usize) -> f64 {
    let params = MediumParams::dimensionless(b).unwrap();
    let pulse = ProbePulse::new(sigma, t_center).unwrap();
    let grid = SimGrid::with_max_step(nz, default_step(sigma, delta), t_max).unwrap();
    let schedule = SplittingSchedule::constant(delta).unwrap();
    let r = simulate(&params, &schedule, &pulse, &grid, SchemeVariant::ZeemanV).unwrap();
    let reference = common::fft_propagate(&r.e_in, r.dt, b, delta, 0.5);
    let err = r
        .e_out
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    err / peak(&r.e_in)
}

#[test]
fn slow_light_matches_frequency_domain_propagation() {
    let err = slow_light_vs_fft(6e4, 3600.0, 0.002, 0.01, 0.03, 400);
    assert!(err < 1e-4, "max deviation {err:.3e} of input peak");
    let err = slow_light_vs_fft(6e4, 2000.0, 0.002, 0.01, 0.1, 400);
    assert!(err < 1e-4, "max deviation {err:.3e} of input peak");
    let err = slow_light_vs_fft(100.0, 30.0, 0.2, 1.0, 4.0, 200);
    assert!(err < 1e-4, "max deviation {err:.3e} of input peak");
}

#[test]
fn measured_transfer_matches_susceptibility() {
    let (b, delta) = (10.0, 5.0);
    let params = MediumParams::dimensionless(b).unwrap();
    let pulse = ProbePulse::new(0.05, 0.5).unwrap();
    let grid = SimGrid::with_max_step(100, default_step(0.05, delta), 40.0).unwrap();
    let schedule = SplittingSchedule::constant(delta).unwrap();
    let r = simulate(&params, &schedule, &pulse, &grid, SchemeVariant::ZeemanV).unwrap();
    let omegas: Vec<f64> = (0..10).map(|k| -9.0 + 2.0 * k as f64).collect();
    let measured = common::measured_transfer(&r.times, &r.e_in, &r.e_out, &omegas);
    for (w, h) in omegas.iter().zip(&measured) {
        let expected = susceptibility(*w, &params, delta, Convention::Canonical).exp();
        let rel = (h - expected).norm() / expected.norm();
        assert!(rel < 0.01, "omega = {w}: measured {h}, closed form {expected}");
    }
}

#[test]
fn closed_form_transfer_matches_reference_response() {
    for &(b, delta) in &[(1.0, 0.3), (100.0, 30.0), (6e4, 3600.0)] {
        let params = MediumParams::dimensionless(b).unwrap();
        for k in 0..20 {
            let w = -3.0 * delta + 0.3 * delta * k as f64;
            let lib = susceptibility(w, &params, delta, Convention::Canonical);
            let oracle = common::log_transfer(w, b, delta, 0.5);
            assert!((lib - oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
        }
    }
}

#[test]
fn group_delay_matches_finite_difference() {
    for &(b, delta) in &[(4.0, 2.0), (100.0, 10.0), (1e3, 300.0), (6e4, 3600.0), (10.0, 0.3)] {
        let params = MediumParams::dimensionless(b).unwrap();
        let lib = group_delay(&params, delta, Convention::Canonical).unwrap();
        let fd = common::finite_difference_delay(b, delta, 0.5);
        assert!((lib - fd).abs() <= 1e-6 * fd.abs(), "b = {b}, delta = {delta}: {lib} vs {fd}");
    }
}

#[test]
fn kramers_kronig_reconstructs_dispersion() {
    let (b, delta) = (10.0, 5.0);
    let params = MediumParams::dimensionless(b).unwrap();
    let re = |w: f64| susceptibility(w, &params, delta, Convention::Canonical).re;
    for k in 1..=10 {
        let w = 0.25 * k as f64;
        let im = susceptibility(w, &params, delta, Convention::Canonical).im;
        let reconstructed = common::hilbert(re, w, 4000.0, 0.004);
        assert!(
            (reconstructed - im).abs() <= 0.02 * im.abs(),
            "omega = {w}: hilbert {reconstructed}, direct {im}"
        );
    }
}

struct Storage {
    b: f64,
    delta: f64,
    t_center: f64,
    tau: f64,
    t_max: f64,
}

/// Pulse centred half-way through the medium at switch-off; detection at
/// the hold time plus the exact group delay.
fn storage_case(b: f64, delta: f64) -> Storage {
    let (a, sigma, t_off, t_on) = (0.5, 0.002, 0.017, 0.030);
    let lossless = b / (4.0 * delta * delta);
    let exact = (b / 4.0) * (delta * delta - a * a) / (delta * delta + a * a).powi(2);
    Storage {
        b,
        delta,
        t_center: (t_off - 0.5 * lossless).max(4.0 * sigma),
        tau: (t_on - t_off) + exact,
        t_max: t_on + 8.0 * sigma + (2.0 * lossless).min(t_on),
    }
}

fn oracle_fidelity(s: &Storage, cells: usize, dt: f64) -> f64 {
    let o = common::storage_oracle(s.b, s.delta, 0.017, 0.030, 0.002, s.t_center, 0.5, cells, dt, s.t_max);
    common::overlap_fidelity(&o.times, &o.e_out, 0.002, s.t_center, s.tau)
}

fn solver_fidelity(s: &Storage) -> f64 {
    let params = MediumParams::dimensionless(s.b).unwrap();
    let pulse = ProbePulse::new(0.002, s.t_center).unwrap();
    let grid = SimGrid::with_max_step(400, default_step(0.002, s.delta), s.t_max).unwrap();
    let r = run_storage(
        &params,
        s.delta,
        0.017,
        0.030,
        0.0,
        &pulse,
        &grid,
        SchemeVariant::ZeemanV,
        SnapshotPolicy::Off,
    )
    .unwrap();
    fidelity(&r, &pulse, s.tau, None).unwrap().fidelity
}

#[test]
fn storage_oracle_values_are_frozen() {
    let high = oracle_fidelity(&storage_case(6e4, 3600.0), 100, 1e-5);
    assert!((high - ORACLE_STORE_HIGH_DEPTH).abs() < 1e-9, "{high}");
    let low = oracle_fidelity(&storage_case(1e3, 150.0), 100, 2e-5);
    assert!((low - ORACLE_STORE_LOW_DEPTH).abs() < 1e-9, "{low}");
}

#[test]
fn storage_run_agrees_with_oracle() {
    for (s, frozen) in [
        (storage_case(6e4, 3600.0), ORACLE_STORE_HIGH_DEPTH),
        (storage_case(1e3, 150.0), ORACLE_STORE_LOW_DEPTH),
    ] {
        let f = solver_fidelity(&s);
        assert!((f - frozen).abs() < 2e-3, "b = {}: solver {f}, oracle {frozen}", s.b);
    }
}
