//! Closed-form frequency-domain analysis of the split two-line medium.
//!
//! Frequencies are probe detunings ω in units of γ with time dependence
//! `exp(+iωt)`, so a propagation phase `exp(-iωT)` is a delay `T`. The
//! susceptibility is returned already multiplied by the medium length
//! (`χ·L`), so the output spectrum is `exp(χL)` times the input spectrum.
//!
//! Two conventions are exposed everywhere and neither is the default:
//!
//! * [`Convention::Paper`] transcribes the published closed forms literally.
//! * [`Convention::Canonical`] is re-derived from the coherence equations
//!   actually integrated by the solver (decay `1/2`, coupling `κ² = b/4`).
//!
//! The two differ by O(1) factors; only the canonical forms agree with the
//! time-domain simulator.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MediumParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Paper,
    Canonical,
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "canonical" => Ok(Self::Canonical),
            other => Err(Error::invalid("convention", format!("expected paper|canonical, got {other}"))),
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Canonical => "canonical",
        })
    }
}

/// `χ(ω)·L` for splitting `delta` (both in units of γ).
pub fn susceptibility(omega: f64, params: &MediumParams, delta: f64, convention: Convention) -> C64 {
    let b = params.optical_depth();
    match convention {
        // The -iω/c vacuum term vanishes in the retarded frame.
        Convention::Paper => {
            let s = C64::new(1.0, omega);
            -(b / 2.0) * s / (s * s + delta * delta)
        }
        Convention::Canonical => {
            let kappa2 = b / 4.0;
            let s = C64::new(params.decay(), omega);
            -kappa2 * s / (s * s + delta * delta)
        }
    }
}

/// Intensity transmission `exp(2 Re χL)`.
pub fn transmission(omega: f64, params: &MediumParams, delta: f64, convention: Convention) -> f64 {
    (2.0 * susceptibility(omega, params, delta, convention).re).exp()
}

pub fn transmission_spectrum(omegas: &[f64], params: &MediumParams, delta: f64, convention: Convention) -> Vec<f64> {
    omegas
        .iter()
        .map(|&w| transmission(w, params, delta, convention))
        .collect()
}

/// Group delay through the medium in units of `1/γ`.
///
/// `Paper` is `b/Δ²`. `Canonical` is the exact slope `-d Im(χL)/dω` at
/// `ω = 0`, `κ² (Δ² - a²) / (Δ² + a²)²` with `a` the coherence decay; it turns
/// negative (superluminal) for `Δ < a`.
pub fn group_delay(params: &MediumParams, delta: f64, convention: Convention) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Singular(format!("group delay needs delta > 0, got {delta}")));
    }
    let b = params.optical_depth();
    Ok(match convention {
        Convention::Paper => b / (delta * delta),
        Convention::Canonical => {
            let a2 = params.decay() * params.decay();
            let d2 = delta * delta;
            (b / 4.0) * (d2 - a2) / ((d2 + a2) * (d2 + a2))
        }
    })
}

/// Canonical delay with decay neglected, `b / (4Δ²)`.
pub fn lossless_group_delay(params: &MediumParams, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Singular(format!("group delay needs delta > 0, got {delta}")));
    }
    Ok(params.optical_depth() / (4.0 * delta * delta))
}

/// Group velocity in m/s from the delay of the given convention.
pub fn group_velocity(params: &MediumParams, delta: f64, convention: Convention) -> Result<f64> {
    let delay_seconds = group_delay(params, delta, convention)? / params.gamma();
    Ok(1.0 / (1.0 / params.light_speed() + delay_seconds / params.length()))
}

/// Off-resonance absorption estimate `b γ² / Δ²`; transparency needs it ≪ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transparency {
    Metric(f64),
    /// Zero splitting: the probe sits on both lines.
    Opaque,
}

impl Transparency {
    pub fn value(&self) -> f64 {
        match *self {
            Self::Metric(m) => m,
            Self::Opaque => f64::INFINITY,
        }
    }
}

pub fn transparency_metric(params: &MediumParams, delta: f64) -> Transparency {
    if delta > 0.0 {
        Transparency::Metric(params.optical_depth() / (delta * delta))
    } else {
        Transparency::Opaque
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingAngle {
    pub cos_theta: f64,
    pub sin_theta: f64,
}

impl MixingAngle {
    /// `c cos²θ` in m/s.
    pub fn group_velocity(&self, params: &MediumParams) -> f64 {
        params.light_speed() * self.cos_theta * self.cos_theta
    }
}

/// Light-matter coupling `g√(2N)` of the canonical convention, in units of γ.
///
/// Chosen so that `tan²θ = G²/Δ²` equals `c T_g / L` for the lossless delay
/// `T_g = b/(4Δ²)`; the dark state of the interaction matrix then travels at
/// exactly the canonical group velocity.
pub fn canonical_coupling(params: &MediumParams) -> f64 {
    params.kappa() * params.transit_ratio().sqrt()
}

/// Polariton mixing angle θ (0: photonic, π/2: atomic).
///
/// `Canonical` defines θ through `cos²θ = 1 / (1 + c T_g / L)` with the
/// lossless canonical delay, i.e. `tan θ = G/Δ`. `Paper` evaluates
/// `tan θ = α γ c / Δ` literally in SI units (not dimensionless).
pub fn mixing_angle(params: &MediumParams, delta: f64, convention: Convention) -> MixingAngle {
    let tan_numerator = match convention {
        Convention::Canonical => canonical_coupling(params),
        Convention::Paper => params.alpha() * params.light_speed(),
    };
    if delta == f64::INFINITY || tan_numerator == 0.0 {
        return MixingAngle {
            cos_theta: 1.0,
            sin_theta: 0.0,
        };
    }
    let r = tan_numerator.hypot(delta);
    MixingAngle {
        cos_theta: delta / r,
        sin_theta: tan_numerator / r,
    }
}

/// Basis order of [`MatrixM`].
pub const BASIS: [&str; 5] = ["E_x", "E_y", "sigma_z", "sigma_x", "sigma_y"];

/// The 5×5 interaction matrix of `i dX/dt = M X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixM {
    pub entries: [[C64; 5]; 5],
}

/// Builds `M` from the wavenumber term `kc`, the coupling `g√(2N)`, the
/// splitting Δ and the diagonal atomic term Γ (`-iγ/2` physically).
pub fn build_matrix_m(kc: f64, coupling: f64, delta: f64, gamma_term: C64) -> MatrixM {
    let z = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    let g = coupling;
    let i_delta = C64::new(0.0, delta);
    MatrixM {
        entries: [
            [r(kc), z, z, r(-g), z],
            [z, r(kc), z, z, r(g)],
            [z, z, gamma_term, z, i_delta],
            [r(-g), z, z, gamma_term, z],
            [z, r(g), -i_delta, z, gamma_term],
        ],
    }
}

impl MatrixM {
    pub fn apply(&self, v: &[C64; 5]) -> [C64; 5] {
        let mut out = [C64::new(0.0, 0.0); 5];
        for (o, row) in out.iter_mut().zip(&self.entries) {
            *o = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
        out
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonDecomposition {
    pub cos_theta: f64,
    pub sin_theta: f64,
    /// Unit vector in [`BASIS`] order, phased so the E_y component is real and
    /// non-negative (σ_z when E_y vanishes).
    pub eigenvector: [C64; 5],
    pub eigenvalue: C64,
}

/// Null vector of `M` (taken at `k = 0`, Γ = 0) by shifted inverse iteration.
///
/// The seed is the analytic two-component dark state `(E_y, σ_z) ∝ (Δ, -i g)`
/// read off the rows of `M`.
pub fn dark_eigenvector(m: &MatrixM) -> Result<PolaritonDecomposition> {
    let e = &m.entries;
    let g = e[1][4].re;
    let delta = e[2][4].im;
    let scale = m.max_norm().max(f64::MIN_POSITIVE);

    let mut v = [C64::new(0.0, 0.0); 5];
    if g == 0.0 && delta == 0.0 {
        v[1] = C64::new(1.0, 0.0);
    } else {
        v[1] = C64::new(delta, 0.0);
        v[2] = C64::new(0.0, -g);
    }
    normalize(&mut v);

    let shift = 1e-7 * scale;
    let mut shifted = *m;
    for (k, row) in shifted.entries.iter_mut().enumerate() {
        row[k] -= shift;
    }
    for _ in 0..4 {
        v = solve5(&shifted.entries, &v)
            .ok_or_else(|| Error::Consistency("shifted interaction matrix is singular".into()))?;
        normalize(&mut v);
    }
    fix_phase(&mut v);

    let mv = m.apply(&v);
    let eigenvalue: C64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
    if eigenvalue.norm() > 1e-10 * scale.max(1.0) {
        return Err(Error::Consistency(format!(
            "no eigenvalue within 1e-10 of zero (nearest {eigenvalue})"
        )));
    }
    Ok(PolaritonDecomposition {
        cos_theta: v[1].norm(),
        sin_theta: v[2].norm(),
        eigenvector: v,
        eigenvalue,
    })
}

fn normalize(v: &mut [C64; 5]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= n;
    }
}

fn fix_phase(v: &mut [C64; 5]) {
    let anchor = if v[1].norm() > 1e-300 { v[1] } else { v[2] };
    if anchor.norm() > 0.0 {
        let phase = anchor.conj() / anchor.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn solve5(a: &[[C64; 5]; 5], rhs: &[C64; 5]) -> Option<[C64; 5]> {
    let mut m = *a;
    let mut x = *rhs;
    for col in 0..5 {
        let pivot = (col..5).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))?;
        if m[pivot][col].norm() == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for row in col + 1..5 {
            let f = m[row][col] / m[col][col];
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..5 {
                let t = m[col][k];
                m[row][k] -= f * t;
            }
            let t = x[col];
            x[row] -= f * t;
        }
    }
    for col in (0..5).rev() {
        let mut acc = x[col];
        for k in col + 1..5 {
            acc -= m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

/// O(1) prefactors for the delay-bandwidth scaling estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPrefactors {
    pub bandwidth: f64,
    pub efficiency: f64,
    pub splitting: f64,
}

impl Default for ScalingPrefactors {
    fn default() -> Self {
        Self {
            bandwidth: 1.0,
            efficiency: 1.0,
            splitting: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingLaws {
    /// `1/τ ∼ γ√b`, in units of γ.
    pub bandwidth_bound: f64,
    /// `η ∼ √b`, clipped at 1.
    pub efficiency_estimate: f64,
    /// `Δ_min ∼ γ√b`, in units of γ.
    pub min_splitting: f64,
}

pub fn scaling_laws(b: f64, prefactors: &ScalingPrefactors) -> ScalingLaws {
    let root = b.max(0.0).sqrt();
    ScalingLaws {
        bandwidth_bound: prefactors.bandwidth * root,
        efficiency_estimate: (prefactors.efficiency * root).min(1.0),
        min_splitting: prefactors.splitting * root,
    }
}
