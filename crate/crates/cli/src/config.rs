//! TOML run configuration. Every section is optional; missing keys take the
//! defaults below and command-line flags override both.

use std::path::Path;

use chos_core::estimate::MediumSpec;
use chos_core::model::{SchemeVariant, DEFAULT_NZ, PHYSICAL_DECAY};
use chos_core::spectral::Convention;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Optical depths of the default reproduction ladder.
pub const DESK_LADDER: [f64; 5] = [1e2, 3e2, 1e3, 3e3, 1e4];
/// Extra point added by `full_scale`.
pub const FULL_SCALE_B: f64 = 6e4;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub medium: MediumSection,
    pub schedule: ScheduleSection,
    pub pulse: PulseSection,
    pub grid: GridSection,
    pub run: RunSection,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
    pub optimize: OptimizeSection,
    pub estimate: EstimateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumSection {
    pub b: f64,
    /// Coherence decay in units of γ.
    pub decay: f64,
}

impl Default for MediumSection {
    fn default() -> Self {
        MediumSection {
            b: 6e4,
            decay: PHYSICAL_DECAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub delta: f64,
    pub t_off: f64,
    pub t_on: f64,
    pub ramp_time: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            delta: 3600.0,
            t_off: 0.017,
            t_on: 0.03,
            ramp_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub sigma_tau: f64,
    /// Defaults to half a group delay before `t_off` for `store` and to
    /// `5 σ_τ` for `slowlight`.
    pub t_center: Option<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            sigma_tau: 0.002,
            t_center: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nz: usize,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nz: DEFAULT_NZ,
            dt: None,
            t_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub variant: VariantName,
    pub convention: ConventionName,
    /// Snapshot stride; 0 disables space-time output.
    pub snapshots: usize,
    pub jobs: Option<usize>,
    /// Detection delay for the fidelity of `store` and `slowlight` runs.
    pub tau: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            variant: VariantName::Zeeman,
            convention: ConventionName::Canonical,
            snapshots: 0,
            jobs: None,
            tau: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Zeeman,
    Stark,
    Full,
}

impl From<VariantName> for SchemeVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Zeeman => SchemeVariant::ZeemanV,
            VariantName::Stark => SchemeVariant::StarkTwoClass,
            VariantName::Full => SchemeVariant::FullFiveVar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ConventionName {
    Paper,
    Canonical,
}

impl From<ConventionName> for Convention {
    fn from(c: ConventionName) -> Self {
        match c {
            ConventionName::Paper => Convention::Paper,
            ConventionName::Canonical => Convention::Canonical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Half-width of the frequency axis; defaults to `3 Δ`.
    pub omega_max: Option<f64>,
    pub points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            omega_max: None,
            points: 601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub b_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    /// Detection-delay search half-width in units of `σ_τ`.
    pub delay_window: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            b_list: DESK_LADDER.to_vec(),
            delta_list: vec![100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0],
            delay_window: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub b_list: Vec<f64>,
    /// Append the `b = 6e4` point.
    pub full_scale: bool,
    /// Search bracket; defaults scale with `√b`.
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            b_list: DESK_LADDER.to_vec(),
            full_scale: false,
            delta_min: None,
            delta_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub preset: Option<String>,
    pub custom: Option<MediumSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, reason: &str| Err(CliError::Config(format!("invalid `{field}`: {reason}")));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !(self.medium.b.is_finite() && self.medium.b >= 0.0) {
            return bad("medium.b", "must be finite and >= 0");
        }
        if !(self.medium.decay.is_finite() && self.medium.decay >= 0.0) {
            return bad("medium.decay", "must be finite and >= 0");
        }
        if !finite_pos(self.pulse.sigma_tau) {
            return bad("pulse.sigma_tau", "must be finite and > 0");
        }
        if self.grid.nz < 2 {
            return bad("grid.nz", "need at least 2 points");
        }
        if self.grid.dt.is_some_and(|v| !finite_pos(v)) {
            return bad("grid.dt", "must be finite and > 0");
        }
        if self.grid.t_max.is_some_and(|v| !finite_pos(v)) {
            return bad("grid.t_max", "must be finite and > 0");
        }
        if self.run.jobs == Some(0) {
            return bad("run.jobs", "must be >= 1");
        }
        if self.spectrum.points < 2 {
            return bad("spectrum.points", "need at least 2 points");
        }
        Ok(())
    }
}
