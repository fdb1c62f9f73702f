//! Central finite-difference stencils on uniformly spaced samples.
//!
//! Edge samples (where the stencil would leave the array) are set to zero;
//! callers restrict analysis to interior points.

use num_complex::Complex64;

/// Second-order first derivative.
pub fn d1(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 1..n.saturating_sub(1) {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    out
}

/// Second-order second derivative.
pub fn d2(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 1..n.saturating_sub(1) {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
    }
    out
}

/// Fourth-order first derivative of real samples.
pub fn d1_4(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    out
}

/// Fourth-order second derivative of real samples.
pub fn d2_4(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h);
    }
    out
}

/// Fourth-order first derivative of complex samples.
pub fn d1_4c(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 2..n.saturating_sub(2) {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    out
}

/// Fourth-order second derivative of complex samples.
pub fn d2_4c(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 2..n.saturating_sub(2) {
        out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h);
    }
    out
}

/// Five-point weights `[-2h, -h, 0, h, 2h]` for the first and second
/// derivative at the centre sample.
pub const FIVE_POINT_D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
pub const FIVE_POINT_D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
