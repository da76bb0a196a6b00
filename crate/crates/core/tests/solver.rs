//! Structural properties of the time-domain solver.

mod common;

use chos_core::mb_solver::{
    five_var_check, polariton_field, run_storage, simulate, simulate_with, to_stark_frame, SimResult, SnapshotPolicy,
};
use chos_core::metrics::{energy_balance, fidelity, measured_delay};
use chos_core::model::{default_step, MediumParams, ProbePulse, SchemeVariant, SimGrid, SplittingSchedule};
use chos_core::spectral::{group_delay, Convention};
use chos_core::sweep::StorageTemplate;
use chos_core::C64;
use proptest::prelude::*;

fn peak(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Trace (iii) layout at a given depth and splitting, on a grid of `nz`
/// points and step `dt`.
struct Store {
    params: MediumParams,
    pulse: ProbePulse,
    delta: f64,
    template: StorageTemplate,
    t_max: f64,
}

impl Store {
    fn new(b: f64, delta: f64) -> Self {
        let template = StorageTemplate::default();
        let params = template.medium(b).unwrap();
        let pulse = template.pulse(&params, delta).unwrap();
        let t_max = template.horizon(&params, delta);
        Store {
            params,
            pulse,
            delta,
            template,
            t_max,
        }
    }

    fn lossless(mut self) -> Self {
        self.params = self.params.with_decay(0.0).unwrap();
        self
    }

    fn run(&self, nz: usize, dt: f64, variant: SchemeVariant) -> SimResult {
        let grid = SimGrid::with_max_step(nz, dt, self.t_max).unwrap();
        run_storage(
            &self.params,
            self.delta,
            self.template.t_off,
            self.template.t_on(),
            0.0,
            &self.pulse,
            &grid,
            variant,
            SnapshotPolicy::Off,
        )
        .unwrap()
    }

    fn default_run(&self, variant: SchemeVariant) -> SimResult {
        self.run(400, default_step(self.pulse.sigma_tau, self.delta), variant)
    }

    fn fidelity(&self, r: &SimResult) -> f64 {
        let tau = self.template.reference_delay(&self.params, self.delta);
        fidelity(r, &self.pulse, tau, None).unwrap().fidelity
    }
}

#[test]
fn zeeman_and_stark_outputs_agree() {
    for (b, delta) in [(6e4, 3600.0), (1e3, 150.0)] {
        let s = Store::new(b, delta);
        let zeeman = s.default_run(SchemeVariant::ZeemanV);
        let stark = s.default_run(SchemeVariant::StarkTwoClass);
        let err = max_diff(&zeeman.e_out, &stark.e_out) / peak(&zeeman.e_out);
        assert!(err < 1e-10, "b = {b}: relative deviation {err:.3e}");
    }
}

#[test]
fn stark_frame_of_a_run_round_trips() {
    let s = Store::new(1e3, 150.0);
    let grid = SimGrid::with_max_step(100, default_step(0.002, 150.0), s.t_max).unwrap();
    let schedule = SplittingSchedule::step_store(150.0, 0.017, 0.03).unwrap();
    let r = simulate_with(&s.params, &schedule, &s.pulse, &grid, SchemeVariant::ZeemanV, SnapshotPolicy::Default).unwrap();
    let stark = to_stark_frame(&r).unwrap();
    assert_eq!(stark.variant, SchemeVariant::StarkTwoClass);
    let back = chos_core::mb_solver::from_stark_frame(&stark).unwrap();
    let (a, b) = (r.snapshots.unwrap(), back.snapshots.unwrap());
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        for (va, vb) in fa.atoms.iter().zip(&fb.atoms) {
            let scale = peak(va).max(1e-300);
            assert!(max_diff(va, vb) <= 1e-14 * scale.max(1.0));
        }
    }
}

#[test]
fn five_variable_run_leaves_x_polarization_dark() {
    let s = Store::new(6e4, 3600.0);
    let grid = SimGrid::with_max_step(400, default_step(0.002, 3600.0), s.t_max).unwrap();
    let schedule = SplittingSchedule::step_store(3600.0, 0.017, 0.03).unwrap();
    let report = five_var_check(&s.params, &schedule, &s.pulse, &grid).unwrap();
    assert!(report.passed(), "{:?}", report.violations);
    assert!(report.e_x.value < 1e-12 && report.sigma_x.value < 1e-12);
    assert!(report.e_y_mismatch < 1e-10);
}

#[test]
fn x_polarized_input_stays_in_x() {
    let params = MediumParams::dimensionless(1e3).unwrap();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let pulse = ProbePulse::polarized(0.002, 0.012, one, one, zero).unwrap();
    let grid = SimGrid::with_max_step(100, default_step(0.002, 150.0), 0.04).unwrap();
    let schedule = SplittingSchedule::step_store(150.0, 0.017, 0.03).unwrap();
    let r = simulate(&params, &schedule, &pulse, &grid, SchemeVariant::FullFiveVar).unwrap();
    assert!(peak(&r.e_out) == 0.0);
    assert!(r.peak("sigma_y").unwrap().value == 0.0);
    assert!(r.peak("sigma_z").unwrap().value == 0.0);
    assert!(peak(r.e_out_x.as_ref().unwrap()) > 0.0);
    assert!(r.peak("sigma_x").unwrap().value > 0.0);
}

#[test]
fn lossless_energy_is_accounted_for() {
    for (b, delta) in [(6e4, 3600.0), (1e3, 150.0)] {
        let s = Store::new(b, delta).lossless();
        let r = s.default_run(SchemeVariant::ZeemanV);
        let e = energy_balance(&r);
        assert!(e.unaccounted < 5e-3, "b = {b}: unaccounted fraction {:.3e}", e.unaccounted);
        assert_eq!(e.decayed, 0.0);
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let s = Store::new(1e3, 150.0);
    let a = s.run(100, 2e-5, SchemeVariant::ZeemanV);
    let b = s.run(100, 2e-5, SchemeVariant::ZeemanV);
    assert_eq!(a, b);
}

#[test]
fn output_never_leads_input() {
    let (sigma, t_center) = (0.002, 0.03);
    for (b, delta) in [(6e4, 3600.0), (6e4, 2000.0), (1e3, 150.0)] {
        let params = MediumParams::dimensionless(b).unwrap();
        let pulse = ProbePulse::new(sigma, t_center).unwrap();
        let grid = SimGrid::with_max_step(400, default_step(sigma, delta), 0.05).unwrap();
        let r = simulate(&params, &SplittingSchedule::constant(delta).unwrap(), &pulse, &grid, SchemeVariant::ZeemanV)
            .unwrap();
        let p = peak(&r.e_out);
        for k in 0..r.times.len() {
            let t = r.times[k];
            if t < t_center - 5.0 * sigma {
                // the leading edge is never amplified
                assert!(r.e_out[k].norm() <= r.e_in[k].norm() * (1.0 + 1e-9), "b = {b}, t = {t}");
            }
            if t < t_center - 8.0 * sigma {
                assert!(r.e_out[k].norm() < 1e-12 * p, "b = {b}, t = {t}");
            }
        }
    }
}

/// A long pulse that fits inside the medium: `T_g = 5 σ_τ`, `Δ σ_τ = 20`.
struct Adiabatic {
    params: MediumParams,
    pulse: ProbePulse,
    delta: f64,
    t_off: f64,
    hold: f64,
}

impl Adiabatic {
    fn new() -> Self {
        let (b, delta, sigma) = (4e4, 100.0, 0.2);
        let tg = b / (4.0 * delta * delta);
        Adiabatic {
            params: MediumParams::dimensionless(b).unwrap(),
            pulse: ProbePulse::new(sigma, 5.0 * sigma).unwrap(),
            delta,
            t_off: 5.0 * sigma + 0.5 * tg,
            hold: 1.0,
        }
    }

    fn run(&self, t_on: f64, t_max: f64) -> SimResult {
        let grid = SimGrid::with_max_step(400, default_step(self.pulse.sigma_tau, self.delta), t_max).unwrap();
        run_storage(
            &self.params,
            self.delta,
            self.t_off,
            t_on,
            0.0,
            &self.pulse,
            &grid,
            SchemeVariant::ZeemanV,
            SnapshotPolicy::Off,
        )
        .unwrap()
    }
}

#[test]
fn held_light_is_not_released() {
    let s = Adiabatic::new();
    let r = s.run(f64::INFINITY, s.t_off + 3.0);
    let e = energy_balance(&r);
    assert!(e.output < 1e-3 * e.input, "released {:.3e} of the input", e.output / e.input);
}

#[test]
fn retrieval_delay_is_hold_plus_transit() {
    let s = Adiabatic::new();
    let r = s.run(s.t_off + s.hold, s.t_off + s.hold + 3.0);
    let delay = measured_delay(&r).unwrap();
    let expected = s.hold + group_delay(&s.params, s.delta, Convention::Canonical).unwrap();
    assert!((delay - expected).abs() < 0.5 * s.pulse.sigma_tau, "delay {delay}, expected {expected}");
    // coherence decay over the hold and the slow-light loss 2κ²a/Δ²
    let a = s.params.decay();
    let kappa = s.params.kappa();
    let expected = (-2.0 * a * s.hold - 2.0 * kappa * kappa * a / (s.delta * s.delta)).exp();
    let e = energy_balance(&r);
    let retrieved = e.output / e.input;
    assert!((retrieved - expected).abs() < 0.05 * expected, "retrieved {retrieved:.4e}, expected {expected:.4e}");
}

#[test]
fn unsplit_medium_is_opaque() {
    let params = MediumParams::dimensionless(6e4).unwrap();
    let pulse = ProbePulse::new(0.002, 0.01).unwrap();
    let grid = SimGrid::with_max_step(400, default_step(0.002, 0.0), 0.03).unwrap();
    let r = simulate(&params, &SplittingSchedule::constant(0.0).unwrap(), &pulse, &grid, SchemeVariant::ZeemanV).unwrap();
    // the absorbed light rings out over many 1/a, hence the long window
    let reference = common::fft_propagate_over(&r.e_in, r.dt, 6e4, 0.0, 0.5, 40.0);
    let energy = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let (solver, oracle) = (energy(&r.e_out) / energy(&r.e_in), energy(&reference) / energy(&r.e_in));
    // only the far spectral wings of the short pulse get through
    assert!(solver < 0.05, "transmitted {solver:.3e}");
    assert!((solver - oracle).abs() < 0.01 * oracle, "solver {solver:.4e}, oracle {oracle:.4e}");
}

#[test]
fn storage_fidelity_converges_with_grid() {
    let s = Store::new(6e4, 3600.0);
    let dt = default_step(0.002, 3600.0);
    let coarse = s.fidelity(&s.run(400, dt, SchemeVariant::ZeemanV));
    let fine = s.fidelity(&s.run(800, 0.5 * dt, SchemeVariant::ZeemanV));
    assert!((coarse - fine).abs() < 1e-3, "fidelity {coarse} at default grid, {fine} halved");
}

#[test]
fn far_detuned_polariton_is_the_field() {
    // slow light speed keeps the coupling small so θ stays near zero
    let params = MediumParams::dimensionless(100.0).unwrap().with_light_speed(1.0).unwrap();
    let pulse = ProbePulse::new(0.01, 0.05).unwrap();
    let grid = SimGrid::with_max_step(50, default_step(0.01, 1e4), 0.1).unwrap();
    let r = simulate_with(
        &params,
        &SplittingSchedule::constant(1e4).unwrap(),
        &pulse,
        &grid,
        SchemeVariant::ZeemanV,
        SnapshotPolicy::Stride(50),
    )
    .unwrap();
    let pol = polariton_field(&r, &params).unwrap();
    let frames = &r.snapshots.as_ref().unwrap().frames;
    for (psi, frame) in pol.psi.iter().zip(frames) {
        let scale = peak(&frame.e_y).max(1e-3);
        assert!(max_diff(psi, &frame.e_y) < 1e-3 * scale);
    }
}

#[test]
fn held_polariton_is_the_spin_coherence() {
    let s = Store::new(1e3, 150.0);
    let grid = SimGrid::with_max_step(100, default_step(0.002, 150.0), s.t_max).unwrap();
    let schedule = SplittingSchedule::step_store(150.0, 0.017, 0.03).unwrap();
    let r = simulate_with(&s.params, &schedule, &s.pulse, &grid, SchemeVariant::ZeemanV, SnapshotPolicy::Stride(20))
        .unwrap();
    let pol = polariton_field(&r, &s.params).unwrap();
    let frames = &r.snapshots.as_ref().unwrap().frames;
    let i = C64::new(0.0, 1.0);
    let mut held = 0;
    for ((psi, frame), cos) in pol.psi.iter().zip(frames).zip(&pol.cos_theta) {
        if r.delta_trace[frame.step] == 0.0 {
            held += 1;
            assert_eq!(*cos, 0.0);
            for (p, s) in psi.iter().zip(&frame.atoms[1]) {
                assert_eq!(*p, i * s);
            }
        }
    }
    assert!(held > 10);
}

#[test]
fn slow_ramp_conserves_polariton_excitation() {
    let (b, delta, sigma, ramp) = (4e4, 100.0, 0.2, 0.1);
    let params = MediumParams::dimensionless(b).unwrap().with_decay(0.0).unwrap();
    let tg = b / (4.0 * delta * delta);
    let t_center = 5.0 * sigma;
    let t_off = t_center + 0.5 * tg;
    let t_on = t_off + ramp + 1.0;
    let pulse = ProbePulse::new(sigma, t_center).unwrap();
    let grid = SimGrid::with_max_step(400, default_step(sigma, delta), t_on + ramp + tg + 6.0 * sigma).unwrap();
    assert!(ramp >= 100.0 * grid.dt());
    let r = run_storage(&params, delta, t_off, t_on, ramp, &pulse, &grid, SchemeVariant::ZeemanV, SnapshotPolicy::Stride(10))
        .unwrap();
    let pol = polariton_field(&r, &params).unwrap();
    let before = pol.times.iter().position(|&t| t >= t_off - 0.5 * ramp).unwrap();
    let after = pol.times.iter().position(|&t| t > t_off + 0.5 * ramp).unwrap();
    assert_eq!(pol.cos_theta[after], 0.0);
    let ratio = pol.excitation[after] / pol.excitation[before];
    assert!((ratio - 1.0).abs() < 0.05, "excitation ratio across the switch {ratio}");
}

fn small_run(amplitude: C64) -> (SimResult, ProbePulse) {
    let params = MediumParams::dimensionless(1e3).unwrap();
    let pulse = ProbePulse::new(0.002, 0.012).unwrap().with_amplitude(amplitude);
    let grid = SimGrid::with_max_step(60, 4e-5, 0.05).unwrap();
    let schedule = SplittingSchedule::step_store(150.0, 0.017, 0.03).unwrap();
    (simulate(&params, &schedule, &pulse, &grid, SchemeVariant::ZeemanV).unwrap(), pulse)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn output_is_linear_in_input(scale in 0.1f64..10.0, phase in -3.1f64..3.1) {
        let factor = C64::from_polar(scale, phase);
        let (base, _) = small_run(C64::new(1.0, 0.0));
        let (scaled, _) = small_run(factor);
        let tol = 1e-12 * peak(&scaled.e_out);
        for (a, b) in base.e_out.iter().zip(&scaled.e_out) {
            prop_assert!((a * factor - b).norm() <= tol);
        }
    }

    #[test]
    fn fidelity_ignores_global_phase_and_amplitude(scale in 0.1f64..10.0, phase in -3.1f64..3.1) {
        let (base, p0) = small_run(C64::new(1.0, 0.0));
        let (scaled, p1) = small_run(C64::from_polar(scale, phase));
        let f0 = fidelity(&base, &p0, 0.017, None).unwrap().fidelity;
        let f1 = fidelity(&scaled, &p1, 0.017, None).unwrap().fidelity;
        prop_assert!((f0 - f1).abs() <= 1e-12 * f0.max(1e-300));
    }
}
