//! Order-of-magnitude figures for concrete media.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Result};
use crate::model::{normalize, Absorption, PhysicalInputs, SPEED_OF_LIGHT};
use crate::spectral::{group_velocity, scaling_laws, Convention, ScalingPrefactors};

/// Optimized storage fidelity against optical depth for the default storage
/// template (`σ_τ = 0.002/γ`, hold `0.013/γ`), as produced by
/// [`crate::sweep::optimize_curve`] on the default grid.
pub const STORED_CURVE: [(f64, f64); 5] = [
    (1e2, 0.14875),
    (3e2, 0.31995),
    (1e3, 0.49337),
    (3e3, 0.63204),
    (1e4, 0.64479),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Cold strontium on the narrow intercombination line.
    Sr,
    /// Pr:YSO with pseudo-Stark splitting.
    Pryso,
}

impl std::str::FromStr for Preset {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sr" => Ok(Preset::Sr),
            "pryso" | "pr:yso" | "pr-yso" => Ok(Preset::Pryso),
            other => Err(crate::Error::invalid("preset", format!("unknown preset `{other}` (sr, pryso)"))),
        }
    }
}

/// Physical description of a medium; unknown quantities are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    /// Full coherence decay rate γ [rad/s].
    pub gamma: f64,
    /// Optical depth, or `alpha · length` when only α is known.
    pub optical_depth: Option<f64>,
    /// Resonant absorption coefficient [1/m].
    pub alpha: Option<f64>,
    /// Medium length [m].
    pub length: Option<f64>,
    /// Splitting in units of γ.
    pub delta_over_gamma: Option<f64>,
}

impl Preset {
    pub fn spec(self) -> MediumSpec {
        match self {
            Preset::Sr => MediumSpec {
                gamma: 2.0 * 2.0 * PI * 7.5e3,
                optical_depth: None,
                alpha: Some(2e6),
                length: Some(100e-6),
                delta_over_gamma: Some(23.0),
            },
            Preset::Pryso => MediumSpec {
                gamma: 2.0 * 2.0 * PI * 12e3,
                optical_depth: Some(32.0),
                alpha: None,
                length: None,
                delta_over_gamma: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub gamma: f64,
    pub b: f64,
    /// Canonical group velocity [m/s]; needs length and splitting.
    pub v_g: Option<f64>,
    /// Shortest storable pulse `1/(γ√b)` [s].
    pub tau: f64,
    /// Interpolated from [`STORED_CURVE`]; `None` outside its range.
    pub fidelity_estimate: Option<f64>,
}

pub fn experimental_estimate(name: &str, spec: &MediumSpec) -> Result<EstimateReport> {
    let gamma = require_positive("gamma", spec.gamma)?;
    let b = match (spec.optical_depth, spec.alpha, spec.length) {
        (Some(b), _, _) => require_positive("optical_depth", b)?,
        (None, Some(alpha), Some(length)) => require_positive("alpha", alpha)? * require_positive("length", length)?,
        _ => return Err(crate::Error::invalid("optical_depth", "give b, or both alpha and length")),
    };
    let v_g = match (spec.length, spec.delta_over_gamma) {
        (Some(length), Some(delta)) => {
            let normalized = normalize(&PhysicalInputs {
                gamma,
                absorption: Absorption::OpticalDepth(b),
                length,
                light_speed: SPEED_OF_LIGHT,
                splitting: delta * gamma,
                durations: Vec::new(),
            })?;
            Some(group_velocity(&normalized.medium, normalized.splitting, Convention::Canonical)?)
        }
        _ => None,
    };
    let bandwidth = scaling_laws(b, &ScalingPrefactors::default()).bandwidth_bound;
    Ok(EstimateReport {
        name: name.to_string(),
        gamma,
        b,
        v_g,
        tau: 1.0 / (bandwidth * gamma),
        fidelity_estimate: interpolate_curve(&STORED_CURVE, b),
    })
}

pub fn preset_estimate(preset: Preset) -> Result<EstimateReport> {
    let name = match preset {
        Preset::Sr => "sr",
        Preset::Pryso => "pryso",
    };
    experimental_estimate(name, &preset.spec())
}

/// Linear interpolation in `ln b`.
fn interpolate_curve(curve: &[(f64, f64)], b: f64) -> Option<f64> {
    curve.windows(2).find_map(|w| {
        let ((b0, f0), (b1, f1)) = (w[0], w[1]);
        (b >= b0 && b <= b1).then(|| {
            let s = (b.ln() - b0.ln()) / (b1.ln() - b0.ln());
            f0 + s * (f1 - f0)
        })
    })
}
