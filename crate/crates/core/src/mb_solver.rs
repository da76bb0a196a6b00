//! One-dimensional Maxwell-Bloch integration in the retarded frame.
//!
//! In normalized units (time `1/γ`, space `ζ = z/L`) the Zeeman V-scheme reads
//!
//! ```text
//! ∂ζ E_y = -iκ σ_y
//! ∂t σ_y = -iκ E_y - Δ(t) σ_z - a σ_y
//! ∂t σ_z =  Δ(t) σ_y - a σ_z
//! ```
//!
//! with `κ = √b/2` and `a` the coherence decay (1/2). The Stark variant uses
//! two classes `σ_{1,2}` detuned by `∓Δ` with coupling `κ/√2` each; the full
//! variant adds the uncoupled pair `∂ζ E_x = iκ σ_x`, `∂t σ_x = iκ E_x - a σ_x`.
//!
//! Each time step advances the coherences with classical RK4. At every stage
//! the field is rebuilt along ζ from the boundary value `E(0, t)`, so the
//! field seen by each stage is consistent with that stage's coherences. The
//! medium is cut into `nz` slabs with one set of coherences each; a slab
//! changes the field by its source times its width and its atoms are driven
//! by the field at its centre.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MediumParams, ProbePulse, SchemeVariant, SimGrid, SplittingSchedule};
use crate::spectral::{mixing_angle, Convention};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Which space-time frames to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    #[default]
    Off,
    /// Stride `ceil(nt / 200)`.
    Default,
    Stride(usize),
}

impl SnapshotPolicy {
    fn stride(&self, nt: usize) -> Option<usize> {
        match *self {
            Self::Off => None,
            Self::Default => Some(nt.div_ceil(200).max(1)),
            Self::Stride(s) => Some(s.max(1)),
        }
    }
}

/// Fields and coherences over ζ at one retarded time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotFrame {
    pub step: usize,
    pub time: f64,
    pub e_y: Vec<C64>,
    pub e_x: Option<Vec<C64>>,
    /// Atomic variables in [`SchemeVariant::atomic_names`] order.
    pub atoms: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshots {
    pub stride: usize,
    pub frames: Vec<SnapshotFrame>,
}

/// Largest modulus a variable reached, and where.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariablePeak {
    pub name: &'static str,
    pub value: f64,
    pub step: usize,
    pub zeta_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: usize,
    /// Largest excursion of the discrete energy ledger
    /// `in - out - atomic - decayed`, relative to the total input energy.
    pub max_residual: f64,
    /// Atomic excitation at the switch-off time over the total input energy.
    pub stored_fraction_at_switch: Option<f64>,
    pub peaks: Vec<VariablePeak>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub variant: SchemeVariant,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Slab centres.
    pub zetas: Vec<f64>,
    /// E_y at ζ = 0.
    pub e_in: Vec<C64>,
    /// E_y at ζ = 1.
    pub e_out: Vec<C64>,
    /// E_x boundary series, full variant only.
    pub e_in_x: Option<Vec<C64>>,
    pub e_out_x: Option<Vec<C64>>,
    /// Δ applied at each grid time.
    pub delta_trace: Vec<f64>,
    /// `∫ Σ|σ|² dζ` at each grid time.
    pub atomic_excitation: Vec<f64>,
    /// Cumulative energy lost to coherence decay.
    pub decayed: Vec<f64>,
    pub snapshots: Option<Snapshots>,
    pub diagnostics: Diagnostics,
}

impl SimResult {
    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Output intensity `|E_out|²` summed over both polarizations.
    pub fn output_intensity(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.e_out.iter().map(|z| z.norm_sqr()).collect();
        if let Some(x) = &self.e_out_x {
            for (o, z) in out.iter_mut().zip(x) {
                *o += z.norm_sqr();
            }
        }
        out
    }

    pub fn input_intensity(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.e_in.iter().map(|z| z.norm_sqr()).collect();
        if let Some(x) = &self.e_in_x {
            for (o, z) in out.iter_mut().zip(x) {
                *o += z.norm_sqr();
            }
        }
        out
    }

    pub fn peak(&self, name: &str) -> Option<&VariablePeak> {
        self.diagnostics.peaks.iter().find(|p| p.name == name)
    }
}

/// Grid preconditions: the pulse and the splitting must be resolved.
pub fn check_resolution(pulse: &ProbePulse, schedule: &SplittingSchedule, grid: &SimGrid) -> Result<()> {
    grid.validate()?;
    let dt = grid.dt();
    if dt > pulse.sigma_tau / 20.0 {
        return Err(Error::invalid(
            "dt",
            format!("{dt:.3e} does not resolve the pulse (need <= sigma_tau/20 = {:.3e})", pulse.sigma_tau / 20.0),
        ));
    }
    let peak = schedule.peak();
    if peak > 0.0 && dt > 0.1 / peak {
        return Err(Error::invalid(
            "dt",
            format!("{dt:.3e} does not resolve the splitting (need <= 0.1/delta = {:.3e})", 0.1 / peak),
        ));
    }
    Ok(())
}

pub fn simulate(
    params: &MediumParams,
    schedule: &SplittingSchedule,
    pulse: &ProbePulse,
    grid: &SimGrid,
    variant: SchemeVariant,
) -> Result<SimResult> {
    simulate_with(params, schedule, pulse, grid, variant, SnapshotPolicy::Off)
}

pub fn simulate_with(
    params: &MediumParams,
    schedule: &SplittingSchedule,
    pulse: &ProbePulse,
    grid: &SimGrid,
    variant: SchemeVariant,
    snapshots: SnapshotPolicy,
) -> Result<SimResult> {
    schedule.validate()?;
    pulse.validate()?;
    check_resolution(pulse, schedule, grid)?;
    Integrator::new(params, schedule, pulse, grid, variant, snapshots).run()
}

/// Storage run with a step (or ramped, when `ramp_time > 0`) schedule.
#[allow(clippy::too_many_arguments)]
pub fn run_storage(
    params: &MediumParams,
    delta: f64,
    t_off: f64,
    t_on: f64,
    ramp_time: f64,
    pulse: &ProbePulse,
    grid: &SimGrid,
    variant: SchemeVariant,
    snapshots: SnapshotPolicy,
) -> Result<SimResult> {
    if t_off <= pulse.t_center {
        log::warn!(
            "splitting switched off at {t_off} before the pulse centre {} has entered the medium",
            pulse.t_center
        );
    }
    let schedule = SplittingSchedule::store(delta, t_off, t_on, ramp_time)?;
    simulate_with(params, &schedule, pulse, grid, variant, snapshots)
}

/// Schedule evaluation as seen by the integrator.
///
/// Step schedules switch at the grid point nearest to each switch time and
/// hold one value across a whole step; smooth schedules are sampled at the
/// RK stage times.
enum StageSchedule {
    PerStep { delta: f64, k_off: usize, k_on: usize },
    Sampled(SplittingSchedule),
}

impl StageSchedule {
    fn new(schedule: &SplittingSchedule, grid: &SimGrid) -> Self {
        let snap = |t: f64| {
            if t.is_finite() {
                grid.nearest_index(t).max(if t > 0.0 { 1 } else { 0 })
            } else {
                usize::MAX
            }
        };
        match *schedule {
            SplittingSchedule::StepStore { delta, t_off, t_on }
            | SplittingSchedule::RampedStore {
                delta,
                t_off,
                t_on,
                ramp_time: 0.0,
            } => {
                let k_off = snap(t_off);
                let k_on = snap(t_on).max(k_off);
                Self::PerStep { delta, k_off, k_on }
            }
            s => Self::Sampled(s),
        }
    }

    /// Δ at (step k, stage time t).
    fn at(&self, k: usize, t: f64) -> f64 {
        match self {
            Self::PerStep { delta, k_off, k_on } => {
                if k >= *k_off && k < *k_on {
                    0.0
                } else {
                    *delta
                }
            }
            Self::Sampled(s) => s.value(t),
        }
    }

    /// Δ recorded at grid point k.
    fn at_grid(&self, k: usize, t: f64) -> f64 {
        self.at(k, t)
    }

    fn switch_off_step(&self, grid: &SimGrid, schedule: &SplittingSchedule) -> Option<usize> {
        match self {
            Self::PerStep { k_off, .. } => Some(*k_off),
            Self::Sampled(_) => schedule.switch_times().map(|(t_off, _)| grid.nearest_index(t_off)),
        }
    }
}

struct Integrator<'a> {
    schedule: &'a SplittingSchedule,
    pulse: &'a ProbePulse,
    grid: &'a SimGrid,
    variant: SchemeVariant,
    snapshot_stride: Option<usize>,
    kappa: f64,
    decay: f64,
    nz: usize,
    n_atoms: usize,
    dz: f64,
    stage: StageSchedule,
    // work buffers
    e_y: Vec<C64>,
    e_x: Vec<C64>,
    out_y: C64,
    out_x: C64,
}

impl<'a> Integrator<'a> {
    fn new(
        params: &MediumParams,
        schedule: &'a SplittingSchedule,
        pulse: &'a ProbePulse,
        grid: &'a SimGrid,
        variant: SchemeVariant,
        snapshots: SnapshotPolicy,
    ) -> Self {
        let nz = grid.nz;
        Self {
            schedule,
            pulse,
            grid,
            variant,
            snapshot_stride: snapshots.stride(grid.nt),
            kappa: params.kappa(),
            decay: params.decay(),
            nz,
            n_atoms: variant.atomic_names().len(),
            dz: grid.dzeta(),
            stage: StageSchedule::new(schedule, grid),
            e_y: vec![ZERO; nz],
            e_x: vec![ZERO; nz],
            out_y: ZERO,
            out_x: ZERO,
        }
    }

    fn has_x(&self) -> bool {
        self.variant == SchemeVariant::FullFiveVar
    }

    /// Rebuilds E_y (and E_x) along ζ from the boundary and the coherences.
    ///
    /// Each cell's coherence is the source over the whole cell, and the atoms
    /// see the mean of the field entering and leaving it. With this pairing
    /// field flux and atomic excitation exchange energy exactly.
    fn fields(&mut self, t: f64, atoms: &[C64]) {
        let nz = self.nz;
        let h = self.dz;
        let kappa = self.kappa;
        let variant = self.variant;
        let source = |j: usize| -> C64 {
            match variant {
                SchemeVariant::ZeemanV => -I * kappa * atoms[j],
                SchemeVariant::StarkTwoClass => -I * (kappa * FRAC_1_SQRT_2) * (atoms[j] + atoms[nz + j]),
                SchemeVariant::FullFiveVar => -I * kappa * atoms[nz + j],
            }
        };
        let mut e = self.pulse.input_y(t);
        for j in 0..nz {
            let step = h * source(j);
            self.e_y[j] = e + 0.5 * step;
            e += step;
        }
        self.out_y = e;
        if self.has_x() {
            let mut e = self.pulse.input_x(t);
            let sx = &atoms[..nz];
            for j in 0..nz {
                let step = (I * kappa * h) * sx[j];
                self.e_x[j] = e + 0.5 * step;
                e += step;
            }
            self.out_x = e;
        }
    }

    /// Writes `d atoms / dt` into `out` using the current field buffers.
    fn derivative(&self, delta: f64, atoms: &[C64], out: &mut [C64]) {
        let nz = self.nz;
        let a = self.decay;
        let k = self.kappa;
        match self.variant {
            SchemeVariant::ZeemanV => {
                let (sy, sz) = atoms.split_at(nz);
                let (dy, dz) = out.split_at_mut(nz);
                for j in 0..nz {
                    dy[j] = -I * k * self.e_y[j] - delta * sz[j] - a * sy[j];
                    dz[j] = delta * sy[j] - a * sz[j];
                }
            }
            SchemeVariant::StarkTwoClass => {
                let ks = k * FRAC_1_SQRT_2;
                let (s1, s2) = atoms.split_at(nz);
                let (d1, d2) = out.split_at_mut(nz);
                let r1 = C64::new(a, delta);
                let r2 = C64::new(a, -delta);
                for j in 0..nz {
                    let drive = -I * ks * self.e_y[j];
                    d1[j] = drive - r1 * s1[j];
                    d2[j] = drive - r2 * s2[j];
                }
            }
            SchemeVariant::FullFiveVar => {
                let (sx, rest) = atoms.split_at(nz);
                let (sy, sz) = rest.split_at(nz);
                let (dx, rest) = out.split_at_mut(nz);
                let (dy, dz) = rest.split_at_mut(nz);
                for j in 0..nz {
                    dx[j] = I * k * self.e_x[j] - a * sx[j];
                    dy[j] = -I * k * self.e_y[j] - delta * sz[j] - a * sy[j];
                    dz[j] = delta * sy[j] - a * sz[j];
                }
            }
        }
    }

    fn excitation(&self, atoms: &[C64]) -> f64 {
        let total: f64 = atoms[..self.n_atoms * self.nz].iter().map(|z| z.norm_sqr()).sum();
        total * self.dz
    }

    fn snapshot(&self, step: usize, time: f64, atoms: &[C64]) -> SnapshotFrame {
        let nz = self.nz;
        SnapshotFrame {
            step,
            time,
            e_y: self.e_y.clone(),
            e_x: self.has_x().then(|| self.e_x.clone()),
            atoms: (0..self.n_atoms).map(|v| atoms[v * nz..(v + 1) * nz].to_vec()).collect(),
        }
    }

    fn track_peaks(&self, step: usize, atoms: &[C64], peaks: &mut [VariablePeak]) {
        let nz = self.nz;
        let update = |slot: &mut VariablePeak, values: &[C64]| {
            for (j, z) in values.iter().enumerate() {
                let m = z.norm();
                if m > slot.value {
                    *slot = VariablePeak {
                        name: slot.name,
                        value: m,
                        step,
                        zeta_index: j,
                    };
                }
            }
        };
        update(&mut peaks[0], &self.e_y);
        let mut next = 1;
        if self.has_x() {
            update(&mut peaks[1], &self.e_x);
            next = 2;
        }
        for v in 0..self.n_atoms {
            update(&mut peaks[next + v], &atoms[v * nz..(v + 1) * nz]);
        }
    }

    fn run(mut self) -> Result<SimResult> {
        let grid = self.grid;
        let nt = grid.nt;
        let nz = self.nz;
        let dt = grid.dt();
        let len = self.n_atoms * nz;
        let has_x = self.has_x();

        let mut atoms = vec![ZERO; len];
        let mut scratch = vec![ZERO; len];
        let mut k1 = vec![ZERO; len];
        let mut k2 = vec![ZERO; len];
        let mut k3 = vec![ZERO; len];
        let mut k4 = vec![ZERO; len];

        let times = grid.times();
        let mut e_in = Vec::with_capacity(nt);
        let mut e_out = Vec::with_capacity(nt);
        let mut e_in_x = Vec::with_capacity(if has_x { nt } else { 0 });
        let mut e_out_x = Vec::with_capacity(if has_x { nt } else { 0 });
        let mut delta_trace = Vec::with_capacity(nt);
        let mut excitation = Vec::with_capacity(nt);
        let mut frames = Vec::new();

        let mut peaks: Vec<VariablePeak> = std::iter::once("E_y")
            .chain(has_x.then_some("E_x"))
            .chain(self.variant.atomic_names().iter().copied())
            .map(|name| VariablePeak {
                name,
                value: 0.0,
                step: 0,
                zeta_index: 0,
            })
            .collect();

        for k in 0..nt {
            let t = times[k];
            // stage 1 field doubles as the record at t_k
            self.fields(t, &atoms);
            let a_k = self.excitation(&atoms);
            let out_k = self.out_y;
            if !(out_k.re.is_finite() && out_k.im.is_finite() && a_k.is_finite()) {
                return Err(Error::Divergence { step: k });
            }
            e_in.push(self.pulse.input_y(t));
            e_out.push(out_k);
            if has_x {
                e_in_x.push(self.pulse.input_x(t));
                e_out_x.push(self.out_x);
            }
            delta_trace.push(self.stage.at_grid(k, t));
            excitation.push(a_k);
            self.track_peaks(k, &atoms, &mut peaks);
            if let Some(stride) = self.snapshot_stride {
                if k % stride == 0 || k == nt - 1 {
                    frames.push(self.snapshot(k, t, &atoms));
                }
            }
            if k == nt - 1 {
                break;
            }

            let t_mid = t + 0.5 * dt;
            let t_end = t + dt;
            let d1 = self.stage.at(k, t);
            let d2 = self.stage.at(k, t_mid);
            let d4 = self.stage.at(k, t_end);

            self.derivative(d1, &atoms, &mut k1);
            axpy(&mut scratch, &atoms, 0.5 * dt, &k1);
            self.fields(t_mid, &scratch);
            self.derivative(d2, &scratch, &mut k2);
            axpy(&mut scratch, &atoms, 0.5 * dt, &k2);
            self.fields(t_mid, &scratch);
            self.derivative(d2, &scratch, &mut k3);
            axpy(&mut scratch, &atoms, dt, &k3);
            self.fields(t_end, &scratch);
            self.derivative(d4, &scratch, &mut k4);
            let h6 = dt / 6.0;
            for j in 0..len {
                atoms[j] += h6 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
            }
        }

        let (decayed, diagnostics) = self.ledger(&e_in, &e_out, &e_in_x, &e_out_x, &excitation, dt, peaks);

        Ok(SimResult {
            variant: self.variant,
            dt,
            times,
            zetas: grid.zetas(),
            e_in,
            e_out,
            e_in_x: has_x.then_some(e_in_x),
            e_out_x: has_x.then_some(e_out_x),
            delta_trace,
            atomic_excitation: excitation,
            decayed,
            snapshots: self.snapshot_stride.map(|stride| Snapshots { stride, frames }),
            diagnostics,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn ledger(
        &self,
        e_in: &[C64],
        e_out: &[C64],
        e_in_x: &[C64],
        e_out_x: &[C64],
        excitation: &[f64],
        dt: f64,
        peaks: Vec<VariablePeak>,
    ) -> (Vec<f64>, Diagnostics) {
        let nt = e_in.len();
        let flux = |s: &[C64], k: usize| s.get(k).map_or(0.0, |z| z.norm_sqr());
        let mut w_in = 0.0;
        let mut w_out = 0.0;
        let mut lost = 0.0;
        let mut decayed = Vec::with_capacity(nt);
        let mut residuals = Vec::with_capacity(nt);
        decayed.push(0.0);
        residuals.push(-excitation[0]);
        for k in 1..nt {
            let fin = |k| flux(e_in, k) + flux(e_in_x, k);
            let fout = |k| flux(e_out, k) + flux(e_out_x, k);
            w_in += 0.5 * dt * (fin(k - 1) + fin(k));
            w_out += 0.5 * dt * (fout(k - 1) + fout(k));
            lost += self.decay * dt * (excitation[k - 1] + excitation[k]);
            decayed.push(lost);
            residuals.push(w_in - w_out - excitation[k] - lost);
        }
        let scale = if w_in > 0.0 { w_in } else { 1.0 };
        let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())) / scale;
        let stored_fraction_at_switch = self
            .stage
            .switch_off_step(self.grid, self.schedule)
            .filter(|&k| k < nt && w_in > 0.0)
            .map(|k| excitation[k] / w_in);
        (
            decayed,
            Diagnostics {
                steps: nt - 1,
                max_residual,
                stored_fraction_at_switch,
                peaks,
            },
        )
    }
}

fn axpy(out: &mut [C64], x: &[C64], a: f64, y: &[C64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Zeeman coherences to the Stark classes:
/// `σ_1 = (σ_y - iσ_z)/√2`, `σ_2 = (σ_y + iσ_z)/√2`.
pub fn zeeman_to_stark(sigma_y: &[C64], sigma_z: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    if sigma_y.len() != sigma_z.len() {
        return Err(Error::GridMismatch {
            expected: sigma_y.len(),
            got: sigma_z.len(),
        });
    }
    Ok(sigma_y
        .iter()
        .zip(sigma_z)
        .map(|(&y, &z)| ((y - I * z) * FRAC_1_SQRT_2, (y + I * z) * FRAC_1_SQRT_2))
        .unzip())
}

/// Inverse of [`zeeman_to_stark`]: `σ_y = (σ_2 + σ_1)/√2`, `σ_z = (σ_2 - σ_1)/(√2 i)`.
pub fn stark_to_zeeman(sigma_1: &[C64], sigma_2: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    if sigma_1.len() != sigma_2.len() {
        return Err(Error::GridMismatch {
            expected: sigma_1.len(),
            got: sigma_2.len(),
        });
    }
    Ok(sigma_1
        .iter()
        .zip(sigma_2)
        .map(|(&s1, &s2)| ((s2 + s1) * FRAC_1_SQRT_2, (s2 - s1) * FRAC_1_SQRT_2 / I))
        .unzip())
}

/// Converts a ZeemanV result's snapshots into the Stark basis and back.
pub fn to_stark_frame(result: &SimResult) -> Result<SimResult> {
    convert_frames(result, SchemeVariant::ZeemanV, SchemeVariant::StarkTwoClass, zeeman_to_stark)
}

pub fn from_stark_frame(result: &SimResult) -> Result<SimResult> {
    convert_frames(result, SchemeVariant::StarkTwoClass, SchemeVariant::ZeemanV, stark_to_zeeman)
}

type PairMap = fn(&[C64], &[C64]) -> Result<(Vec<C64>, Vec<C64>)>;

fn convert_frames(result: &SimResult, from: SchemeVariant, to: SchemeVariant, map: PairMap) -> Result<SimResult> {
    if result.variant != from {
        return Err(Error::invalid("variant", format!("expected {from:?}, got {:?}", result.variant)));
    }
    let nz = result.zetas.len();
    let mut out = result.clone();
    out.variant = to;
    let names = to.atomic_names();
    for p in out.diagnostics.peaks.iter_mut().skip(1) {
        let idx = from.atomic_names().iter().position(|n| *n == p.name).unwrap_or(0);
        p.name = names[idx];
        // peaks do not map linearly; keep location, drop the value
        p.value = f64::NAN;
    }
    if let Some(snaps) = out.snapshots.as_mut() {
        for frame in &mut snaps.frames {
            for a in &frame.atoms {
                if a.len() != nz {
                    return Err(Error::GridMismatch { expected: nz, got: a.len() });
                }
            }
            let (p, q) = map(&frame.atoms[0], &frame.atoms[1])?;
            frame.atoms = vec![p, q];
        }
    }
    Ok(out)
}

/// Dark-state polariton `Ψ = cos θ · Ẽ_y + i sin θ · σ_z` over the snapshots.
///
/// `Ẽ_y = E_y √(Lγ/c)` puts the field in the same excitation units as the
/// coherences, and the `i` is the phase the dark eigenvector carries
/// (`σ_z = -i tan θ · Ẽ_y`), so `∫|Ψ|² dζ` counts field plus atomic
/// excitation while the dark state is followed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolaritonRecord {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub psi: Vec<Vec<C64>>,
    pub cos_theta: Vec<f64>,
    /// `∫|Ψ|² dζ` per snapshot.
    pub excitation: Vec<f64>,
}

pub fn polariton_field(result: &SimResult, params: &MediumParams) -> Result<PolaritonRecord> {
    let snaps = result.snapshots.as_ref().ok_or(Error::MissingSnapshots)?;
    let field_scale = 1.0 / params.transit_ratio().sqrt();
    let dz = 1.0 / result.zetas.len() as f64;
    let mut record = PolaritonRecord {
        steps: Vec::new(),
        times: Vec::new(),
        psi: Vec::new(),
        cos_theta: Vec::new(),
        excitation: Vec::new(),
    };
    for frame in &snaps.frames {
        let sigma_z: Vec<C64> = match result.variant {
            SchemeVariant::ZeemanV => frame.atoms[1].clone(),
            SchemeVariant::FullFiveVar => frame.atoms[2].clone(),
            SchemeVariant::StarkTwoClass => stark_to_zeeman(&frame.atoms[0], &frame.atoms[1])?.1,
        };
        let angle = mixing_angle(params, result.delta_trace[frame.step], Convention::Canonical);
        let psi: Vec<C64> = frame
            .e_y
            .iter()
            .zip(&sigma_z)
            .map(|(&e, &s)| angle.cos_theta * field_scale * e + I * angle.sin_theta * s)
            .collect();
        let total = dz * psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        record.steps.push(frame.step);
        record.times.push(frame.time);
        record.cos_theta.push(angle.cos_theta);
        record.psi.push(psi);
        record.excitation.push(total);
    }
    Ok(record)
}

/// Outcome of the five-variable structure check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiveVarReport {
    pub max_e_y: f64,
    /// Largest |E_x| relative to the largest |E_y|, with its location.
    pub e_x: VariablePeak,
    pub sigma_x: VariablePeak,
    /// Largest relative difference between the E_y output and a ZeemanV run.
    pub e_y_mismatch: f64,
    pub violations: Vec<String>,
}

impl FiveVarReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs the full five-variable system and checks that a y-polarized probe
/// never excites σ_x (nor E_x) and that E_y matches the ZeemanV reduction.
pub fn five_var_check(
    params: &MediumParams,
    schedule: &SplittingSchedule,
    pulse: &ProbePulse,
    grid: &SimGrid,
) -> Result<FiveVarReport> {
    if pulse.pol_x.norm() != 0.0 {
        return Err(Error::invalid("pol_x", "five-variable check needs a y-polarized probe"));
    }
    let full = simulate(params, schedule, pulse, grid, SchemeVariant::FullFiveVar)?;
    let reduced = simulate(params, schedule, pulse, grid, SchemeVariant::ZeemanV)?;
    let max_e_y = full.peak("E_y").map_or(0.0, |p| p.value);
    let scale = if max_e_y > 0.0 { max_e_y } else { 1.0 };
    let relative = |name: &str| {
        let mut p = full.peak(name).cloned().expect("full variant tracks every variable");
        p.value /= scale;
        p
    };
    let e_x = relative("E_x");
    let sigma_x = relative("sigma_x");
    let peak_out = full.e_out.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let e_y_mismatch = full
        .e_out
        .iter()
        .zip(&reduced.e_out)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / if peak_out > 0.0 { peak_out } else { 1.0 };

    let mut violations = Vec::new();
    for p in [&e_x, &sigma_x] {
        if !(p.value < 1e-12) && max_e_y > 0.0 {
            violations.push(format!(
                "|{}| reached {:.3e} of max|E_y| at step {}, zeta index {}",
                p.name, p.value, p.step, p.zeta_index
            ));
        }
        if max_e_y == 0.0 && p.value != 0.0 {
            violations.push(format!("{} nonzero for zero input", p.name));
        }
    }
    if e_y_mismatch > 1e-10 {
        violations.push(format!("E_y output differs from the ZeemanV run by {e_y_mismatch:.3e}"));
    }
    Ok(FiveVarReport {
        max_e_y,
        e_x,
        sigma_x,
        e_y_mismatch,
        violations,
    })
}
