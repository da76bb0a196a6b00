//! One-dimensional maximization helpers.

/// `1/φ`
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Maximum {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if b - a <= tol {
        let x = 0.5 * (a + b);
        return Maximum {
            x,
            value: f(x),
            evaluations: 1,
        };
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    Maximum { x, value, evaluations }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Indices of strict local maxima (plateaus count once, endpoints included),
/// ignoring values below `floor`.
pub fn local_maxima(values: &[f64], floor: f64) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        let mut end = k;
        while end + 1 < n && values[end + 1] == values[k] {
            end += 1;
        }
        let left_ok = k == 0 || values[k - 1] < values[k];
        let right_ok = end == n - 1 || values[end + 1] < values[k];
        if left_ok && right_ok && values[k] > floor {
            out.push(k);
        }
        k = end + 1;
    }
    out
}
