//! Domain types and the dimensionless unit system.
//!
//! Every quantity handed to the solver is normalized: time in units of `1/γ`
//! (γ is the full coherence decay rate, so coherences decay at `γ/2`), space
//! as `ζ = z/L ∈ [0, 1]`, splittings and detunings in units of `γ`. The
//! vacuum transit time `L/c` is dropped: the solver works in the retarded
//! frame `(z, t - z/c)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Coherence amplitude decay rate in units of γ.
pub const PHYSICAL_DECAY: f64 = 0.5;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ensemble constants.
///
/// The normalized coupling is locked to the optical depth through
/// `κ² = b/4`: with coherence decay `1/2` this makes the steady-state
/// on-resonance intensity transmission at zero splitting exactly `exp(-b)`.
/// `decay` may be lowered (down to 0) for lossless studies; κ stays tied to b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    gamma: f64,
    optical_depth: f64,
    length: f64,
    light_speed: f64,
    decay: f64,
}

impl MediumParams {
    /// `gamma` in rad/s, `length` in metres. `optical_depth` may be zero for
    /// empty-medium reference runs.
    pub fn new(gamma: f64, optical_depth: f64, length: f64) -> Result<Self> {
        Ok(Self {
            gamma: require_positive("gamma", gamma)?,
            optical_depth: require_non_negative("optical_depth", optical_depth)?,
            length: require_positive("length", length)?,
            light_speed: SPEED_OF_LIGHT,
            decay: PHYSICAL_DECAY,
        })
    }

    /// Medium with γ = 1 rad/s and L = 1 m, for purely dimensionless work.
    pub fn dimensionless(optical_depth: f64) -> Result<Self> {
        Self::new(1.0, optical_depth, 1.0)
    }

    pub fn with_light_speed(mut self, c: f64) -> Result<Self> {
        self.light_speed = require_positive("light_speed", c)?;
        Ok(self)
    }

    pub fn with_decay(mut self, decay: f64) -> Result<Self> {
        self.decay = require_non_negative("decay", decay)?;
        Ok(self)
    }

    pub fn with_optical_depth(mut self, b: f64) -> Result<Self> {
        self.optical_depth = require_non_negative("optical_depth", b)?;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn optical_depth(&self) -> f64 {
        self.optical_depth
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn light_speed(&self) -> f64 {
        self.light_speed
    }

    /// Coherence amplitude decay rate in units of γ (1/2 for the physical medium).
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Resonant absorption coefficient [1/m].
    pub fn alpha(&self) -> f64 {
        self.optical_depth / self.length
    }

    /// Normalized field-coherence coupling, `κ = √b / 2`.
    pub fn kappa(&self) -> f64 {
        self.optical_depth.sqrt() / 2.0
    }

    /// `c / (L γ)`: vacuum transit time of the medium in units of `1/γ`, inverted.
    pub fn transit_ratio(&self) -> f64 {
        self.light_speed / (self.length * self.gamma)
    }
}

/// Time-dependent splitting Δ(t) in units of γ, times in units of `1/γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplittingSchedule {
    Constant {
        delta: f64,
    },
    StepStore {
        delta: f64,
        t_off: f64,
        t_on: f64,
    },
    /// Smoothstep transitions of duration `ramp_time` centred on the switch times.
    RampedStore {
        delta: f64,
        t_off: f64,
        t_on: f64,
        ramp_time: f64,
    },
}

impl SplittingSchedule {
    pub fn constant(delta: f64) -> Result<Self> {
        require_non_negative("delta", delta)?;
        Ok(Self::Constant { delta })
    }

    pub fn step_store(delta: f64, t_off: f64, t_on: f64) -> Result<Self> {
        let s = Self::StepStore { delta, t_off, t_on };
        s.validate()?;
        Ok(s)
    }

    pub fn ramped_store(delta: f64, t_off: f64, t_on: f64, ramp_time: f64) -> Result<Self> {
        let s = Self::RampedStore {
            delta,
            t_off,
            t_on,
            ramp_time,
        };
        s.validate()?;
        Ok(s)
    }

    /// Step when `ramp_time == 0`, ramped otherwise.
    pub fn store(delta: f64, t_off: f64, t_on: f64, ramp_time: f64) -> Result<Self> {
        if ramp_time > 0.0 {
            Self::ramped_store(delta, t_off, t_on, ramp_time)
        } else {
            Self::step_store(delta, t_off, t_on)
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("delta", self.peak())?;
        match *self {
            Self::Constant { .. } => Ok(()),
            Self::StepStore { t_off, t_on, .. } => check_switch_times(t_off, t_on, 0.0),
            Self::RampedStore {
                t_off,
                t_on,
                ramp_time,
                ..
            } => {
                require_non_negative("ramp_time", ramp_time)?;
                check_switch_times(t_off, t_on, ramp_time)
            }
        }
    }

    /// Δ0, the largest splitting the schedule reaches.
    pub fn peak(&self) -> f64 {
        match *self {
            Self::Constant { delta }
            | Self::StepStore { delta, .. }
            | Self::RampedStore { delta, .. } => delta,
        }
    }

    /// `(t_off, t_on)` for storage schedules.
    pub fn switch_times(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Constant { .. } => None,
            Self::StepStore { t_off, t_on, .. } | Self::RampedStore { t_off, t_on, .. } => {
                Some((t_off, t_on))
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { delta } => delta,
            Self::StepStore { delta, t_off, t_on } => {
                if t < t_off || t >= t_on {
                    delta
                } else {
                    0.0
                }
            }
            Self::RampedStore {
                delta,
                t_off,
                t_on,
                ramp_time,
            } => {
                if ramp_time == 0.0 {
                    return Self::StepStore { delta, t_off, t_on }.value(t);
                }
                let down = smoothstep((t - t_off) / ramp_time + 0.5);
                let up = smoothstep((t - t_on) / ramp_time + 0.5);
                delta * (1.0 - down + up)
            }
        }
    }
}

fn check_switch_times(t_off: f64, t_on: f64, ramp_time: f64) -> Result<()> {
    require_non_negative("t_off", t_off)?;
    if t_on.is_nan() || t_on <= t_off {
        return Err(Error::invalid("t_on", format!("must exceed t_off = {t_off}, got {t_on}")));
    }
    if t_on - t_off < ramp_time {
        return Err(Error::invalid(
            "ramp_time",
            format!("ramps overlap: hold {} shorter than ramp {ramp_time}", t_on - t_off),
        ));
    }
    Ok(())
}

/// Cubic Hermite 0 → 1 on `u ∈ [0, 1]`, clamped outside.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Gaussian probe envelope at the medium entrance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePulse {
    pub sigma_tau: f64,
    pub t_center: f64,
    pub amplitude: C64,
    pub pol_x: C64,
    pub pol_y: C64,
}

impl ProbePulse {
    /// Unit-amplitude pulse polarized along y.
    pub fn new(sigma_tau: f64, t_center: f64) -> Result<Self> {
        Self::polarized(sigma_tau, t_center, C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    pub fn polarized(sigma_tau: f64, t_center: f64, amplitude: C64, pol_x: C64, pol_y: C64) -> Result<Self> {
        let pulse = Self {
            sigma_tau,
            t_center,
            amplitude,
            pol_x,
            pol_y,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma_tau", self.sigma_tau)?;
        require_non_negative("t_center", self.t_center)?;
        if !(self.amplitude.re.is_finite() && self.amplitude.im.is_finite()) {
            return Err(Error::invalid("amplitude", "must be finite"));
        }
        let norm = self.pol_x.norm_sqr() + self.pol_y.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("pol_x/pol_y", format!("|pol_x|² + |pol_y|² must be 1, got {norm}")));
        }
        if self.t_center < 4.0 * self.sigma_tau {
            log::warn!(
                "t_center = {} is less than 4 sigma_tau = {}: the input is truncated at t = 0",
                self.t_center,
                4.0 * self.sigma_tau
            );
        }
        Ok(())
    }

    pub fn with_amplitude(mut self, amplitude: C64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// `amplitude · exp(-(t - t_center)² / (2 σ²))`.
    pub fn envelope(&self, t: f64) -> C64 {
        let x = (t - self.t_center) / self.sigma_tau;
        self.amplitude * (-0.5 * x * x).exp()
    }

    pub fn input_y(&self, t: f64) -> C64 {
        self.pol_y * self.envelope(t)
    }

    pub fn input_x(&self, t: f64) -> C64 {
        self.pol_x * self.envelope(t)
    }

    /// Time-integrated intensity of the full (untruncated) envelope.
    pub fn energy(&self) -> f64 {
        self.amplitude.norm_sqr() * self.sigma_tau * PI.sqrt()
    }
}

/// Marker for the time coordinate the solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    Retarded,
}

/// Uniform space-time grid: `nz` equal slabs over `ζ ∈ [0, 1]` and `nt`
/// time points over `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub nz: usize,
    pub nt: usize,
    pub t_max: f64,
    #[serde(default)]
    pub frame: Frame,
}

pub const DEFAULT_NZ: usize = 400;

impl SimGrid {
    pub fn new(nz: usize, nt: usize, t_max: f64) -> Result<Self> {
        let grid = Self {
            nz,
            nt,
            t_max,
            frame: Frame::Retarded,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Smallest grid over `[0, t_max]` whose step does not exceed `dt_max`.
    pub fn with_max_step(nz: usize, dt_max: f64, t_max: f64) -> Result<Self> {
        require_positive("dt", dt_max)?;
        require_positive("t_max", t_max)?;
        let nt = (t_max / dt_max).ceil() as usize + 1;
        Self::new(nz, nt.max(2), t_max)
    }

    /// `nz = 400`, `dt = min(σ_τ/40, 0.05/Δ0)`.
    pub fn default_for(pulse: &ProbePulse, schedule: &SplittingSchedule, t_max: f64) -> Result<Self> {
        Self::with_max_step(DEFAULT_NZ, default_step(pulse.sigma_tau, schedule.peak()), t_max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nz < 2 {
            return Err(Error::invalid("nz", format!("need at least 2 points, got {}", self.nz)));
        }
        if self.nt < 2 {
            return Err(Error::invalid("nt", format!("need at least 2 points, got {}", self.nt)));
        }
        require_positive("t_max", self.t_max)?;
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.nt - 1) as f64
    }

    /// Width of one of the `nz` slabs the medium is cut into.
    pub fn dzeta(&self) -> f64 {
        1.0 / self.nz as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|k| self.time(k)).collect()
    }

    pub fn zetas(&self) -> Vec<f64> {
        let dz = self.dzeta();
        (0..self.nz).map(|j| (j as f64 + 0.5) * dz).collect()
    }

    /// Index of the grid time nearest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = (t / self.dt()).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.nt - 1)
        }
    }
}

pub fn default_step(sigma_tau: f64, peak_delta: f64) -> f64 {
    let pulse_step = sigma_tau / 40.0;
    if peak_delta > 0.0 {
        pulse_step.min(0.05 / peak_delta)
    } else {
        pulse_step
    }
}

/// Which set of equations the solver integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeVariant {
    /// V-scheme: E_y with the coherences σ_y, σ_z.
    #[default]
    ZeemanV,
    /// Two oppositely Stark-shifted classes σ_1, σ_2 driven by E_y.
    StarkTwoClass,
    /// All five variables E_x, E_y, σ_z, σ_x, σ_y.
    FullFiveVar,
}

impl SchemeVariant {
    /// Names of the atomic variables in storage order.
    pub fn atomic_names(&self) -> &'static [&'static str] {
        match self {
            Self::ZeemanV => &["sigma_y", "sigma_z"],
            Self::StarkTwoClass => &["sigma_1", "sigma_2"],
            Self::FullFiveVar => &["sigma_x", "sigma_y", "sigma_z"],
        }
    }
}

/// How the absorption strength is given in physical inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Absorption {
    /// Resonant absorption coefficient α [1/m].
    Coefficient(f64),
    /// Optical depth b = αL.
    OpticalDepth(f64),
}

/// Inputs in SI units: rates in rad/s, lengths in metres, durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInputs {
    pub gamma: f64,
    pub absorption: Absorption,
    pub length: f64,
    pub light_speed: f64,
    pub splitting: f64,
    pub durations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub medium: MediumParams,
    /// Splitting in units of γ.
    pub splitting: f64,
    /// Durations in units of `1/γ`.
    pub durations: Vec<f64>,
    /// Whether the inputs specified α (true) or b directly.
    pub from_coefficient: bool,
}

pub fn normalize(input: &PhysicalInputs) -> Result<Normalized> {
    let gamma = require_positive("gamma", input.gamma)?;
    let length = require_positive("length", input.length)?;
    let c = require_positive("light_speed", input.light_speed)?;
    let (b, from_coefficient) = match input.absorption {
        Absorption::Coefficient(alpha) => (require_positive("alpha", alpha)? * length, true),
        Absorption::OpticalDepth(b) => (require_positive("optical_depth", b)?, false),
    };
    let splitting = require_positive("splitting", input.splitting)?;
    let durations = input
        .durations
        .iter()
        .map(|&d| require_positive("durations", d).map(|d| d * gamma))
        .collect::<Result<Vec<_>>>()?;
    Ok(Normalized {
        medium: MediumParams::new(gamma, b, length)?.with_light_speed(c)?,
        splitting: splitting / gamma,
        durations,
        from_coefficient,
    })
}

pub fn denormalize(n: &Normalized) -> PhysicalInputs {
    let m = &n.medium;
    PhysicalInputs {
        gamma: m.gamma(),
        absorption: if n.from_coefficient {
            Absorption::Coefficient(m.alpha())
        } else {
            Absorption::OpticalDepth(m.optical_depth())
        },
        length: m.length(),
        light_speed: m.light_speed(),
        splitting: n.splitting * m.gamma(),
        durations: n.durations.iter().map(|d| d / m.gamma()).collect(),
    }
}
