//! Reference computations that share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `ln` of the field transfer through the whole medium, written from the
/// two-level-pair linear response with coherence decay `a` and coupling
/// squared `b/4`, for an `exp(+iωt)` time dependence.
pub fn log_transfer(omega: f64, b: f64, delta: f64, a: f64) -> C64 {
    let s = C64::new(a, omega);
    -(b / 4.0) * s / (s * s + delta * delta)
}

/// Propagates a sampled input through the medium exactly in frequency
/// space, with 4x zero padding.
pub fn fft_propagate(e_in: &[C64], dt: f64, b: f64, delta: f64, a: f64) -> Vec<C64> {
    fft_propagate_over(e_in, dt, b, delta, a, 4.0 * e_in.len() as f64 * dt)
}

/// Same with the periodic window stretched to at least `span`, for responses
/// that ring longer than the record.
pub fn fft_propagate_over(e_in: &[C64], dt: f64, b: f64, delta: f64, a: f64, span: f64) -> Vec<C64> {
    let n = ((span / dt).ceil() as usize).max(e_in.len()).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..e_in.len()].copy_from_slice(e_in);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, x) in buf.iter_mut().enumerate() {
        let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        let omega = 2.0 * PI * kk / (n as f64 * dt);
        *x *= log_transfer(omega, b, delta, a).exp();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.truncate(e_in.len());
    buf.iter().map(|x| x / n as f64).collect()
}

/// Transfer function measured from sampled input and output records at the
/// given angular frequencies (direct Fourier sums).
pub fn measured_transfer(times: &[f64], e_in: &[C64], e_out: &[C64], omegas: &[f64]) -> Vec<C64> {
    omegas
        .iter()
        .map(|&w| {
            let mut num = C64::new(0.0, 0.0);
            let mut den = C64::new(0.0, 0.0);
            for k in 0..times.len() {
                let ph = C64::from_polar(1.0, -w * times[k]);
                num += e_out[k] * ph;
                den += e_in[k] * ph;
            }
            num / den
        })
        .collect()
}

pub fn gaussian(t: f64, sigma: f64, t_center: f64) -> f64 {
    (-(t - t_center).powi(2) / (2.0 * sigma * sigma)).exp()
}

/// Output of a coarse storage simulation.
pub struct OracleRun {
    pub times: Vec<f64>,
    pub e_in: Vec<C64>,
    pub e_out: Vec<C64>,
}

/// Storage run in the two-class basis: each class is an oscillator at
/// `∓Δ(t)` with decay `a`, driven by the local field. The medium is cut
/// into `cells` slabs evaluated at their midpoints; the field at a
/// midpoint sums the slabs upstream plus half of its own. Time steps use
/// a second-order exponential Runge-Kutta rule with the splitting frozen
/// at the step midpoint.
pub fn storage_oracle(
    b: f64,
    delta: f64,
    t_off: f64,
    t_on: f64,
    sigma: f64,
    t_center: f64,
    a: f64,
    cells: usize,
    dt: f64,
    t_max: f64,
) -> OracleRun {
    let coupling = (b / 4.0).sqrt() / 2f64.sqrt();
    let steps = (t_max / dt).ceil() as usize;
    let h = t_max / steps as f64;
    let w = 1.0 / cells as f64;
    let input = |t: f64| C64::new(gaussian(t, sigma, t_center), 0.0);
    let splitting = |t: f64| if t >= t_off && t < t_on { 0.0 } else { delta };

    // returns fields at midpoints and the field leaving the medium
    let field = |s1: &[C64], s2: &[C64], e0: C64| -> (Vec<C64>, C64) {
        let mut acc = C64::new(0.0, 0.0);
        let mut mid = Vec::with_capacity(cells);
        for j in 0..cells {
            let p = s1[j] + s2[j];
            mid.push(e0 - I * coupling * w * (acc + 0.5 * p));
            acc += p;
        }
        (mid, e0 - I * coupling * w * acc)
    };

    let mut s1 = vec![C64::new(0.0, 0.0); cells];
    let mut s2 = vec![C64::new(0.0, 0.0); cells];
    let mut times = vec![0.0];
    let mut e_in = vec![input(0.0)];
    let mut e_out = vec![field(&s1, &s2, input(0.0)).1];
    for n in 0..steps {
        let t = n as f64 * h;
        let d = splitting(t + 0.5 * h);
        let l1 = C64::new(-a, -d);
        let l2 = C64::new(-a, d);
        let phi = |z: C64| -> (C64, C64, C64) {
            let e = (z * h).exp();
            if (z * h).norm() < 1e-6 {
                (e, C64::new(1.0, 0.0), C64::new(0.5, 0.0))
            } else {
                let zh = z * h;
                (e, (e - 1.0) / zh, (e - 1.0 - zh) / (zh * zh))
            }
        };
        let (e1, p11, p12) = phi(l1);
        let (e2, p21, p22) = phi(l2);
        let (f0, _) = field(&s1, &s2, input(t));
        let drive0: Vec<C64> = f0.iter().map(|e| -I * coupling * e).collect();
        let q1: Vec<C64> = (0..cells).map(|j| e1 * s1[j] + h * p11 * drive0[j]).collect();
        let q2: Vec<C64> = (0..cells).map(|j| e2 * s2[j] + h * p21 * drive0[j]).collect();
        let (f1, _) = field(&q1, &q2, input(t + h));
        for j in 0..cells {
            let d1 = -I * coupling * f1[j] - drive0[j];
            s1[j] = q1[j] + h * p12 * d1;
            s2[j] = q2[j] + h * p22 * d1;
        }
        let tn = (n + 1) as f64 * h;
        times.push(tn);
        e_in.push(input(tn));
        e_out.push(field(&s1, &s2, input(tn)).1);
    }
    OracleRun { times, e_in, e_out }
}

/// `|∫ conj(E_out(t)) E_in(t - τ) dt| / ∫ |E_in|² dt` with a Gaussian input
/// mode of unit peak, by the trapezoid rule.
pub fn overlap_fidelity(times: &[f64], e_out: &[C64], sigma: f64, t_center: f64, tau: f64) -> f64 {
    let n = times.len();
    let mut overlap = C64::new(0.0, 0.0);
    let mut norm = 0.0;
    for k in 0..n {
        let wgt = if k == 0 || k == n - 1 { 0.5 } else { 1.0 } * (times[1] - times[0]);
        overlap += wgt * e_out[k].conj() * gaussian(times[k] - tau, sigma, t_center);
        norm += wgt * gaussian(times[k], sigma, t_center).powi(2);
    }
    overlap.norm() / norm
}

/// Delay `-d Im(ln T)/dω` at `ω = 0` by central differences.
pub fn finite_difference_delay(b: f64, delta: f64, a: f64) -> f64 {
    let h = 1e-4 * delta.max(a);
    -(log_transfer(h, b, delta, a).im - log_transfer(-h, b, delta, a).im) / (2.0 * h)
}

/// `(1/π) P∫ f(ν) / (ν - ω) dν` over `[-half_width, half_width]` on a grid
/// of spacing `step`, with `ω` placed half-way between nodes.
pub fn hilbert(f: impl Fn(f64) -> f64, omega: f64, half_width: f64, step: f64) -> f64 {
    let n = (half_width / step).ceil() as i64;
    let mut sum = 0.0;
    for k in -n..n {
        let nu = omega + (k as f64 + 0.5) * step;
        sum += f(nu) / (nu - omega);
    }
    sum * step / PI
}
