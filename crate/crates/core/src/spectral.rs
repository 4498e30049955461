//! FFT helpers for 1-periodic samples on the uniform grid `t_k = k/N`.
//!
//! Coefficients are normalised so that `u_k = sum_m c_m exp(2 pi i m k / N)`,
//! i.e. `c_m = (1/N) sum_k u_k exp(-2 pi i m k / N)`. With that convention the
//! discrete mean square is `(1/N) sum_k |u_k|^2 = sum_m |c_m|^2`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Normalised forward transform.
pub fn forward(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf = values.to_vec();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Synthesis from normalised coefficients.
pub fn inverse(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut buf));
    buf
}

/// Signed wavenumber of FFT slot `idx`; the Nyquist slot of an even grid maps to `+n/2`.
#[inline]
pub fn wavenumber(idx: usize, n: usize) -> f64 {
    if idx <= n / 2 {
        idx as f64
    } else {
        idx as f64 - n as f64
    }
}

#[inline]
pub fn is_nyquist(idx: usize, n: usize) -> bool {
    n % 2 == 0 && idx == n / 2
}

/// Spectral first and second derivatives. The first derivative drops the
/// Nyquist mode (it is not resolvable as an odd function on the grid); the
/// second derivative keeps it with symbol `-(pi N)^2`.
pub fn derivatives(values: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = values.len();
    let coeffs = forward(values);
    let mut d1 = vec![Complex64::new(0.0, 0.0); n];
    let mut d2 = vec![Complex64::new(0.0, 0.0); n];
    for (idx, c) in coeffs.iter().enumerate() {
        let k = 2.0 * PI * wavenumber(idx, n);
        if !is_nyquist(idx, n) {
            d1[idx] = c * Complex64::new(0.0, k);
        }
        d2[idx] = c * (-k * k);
    }
    (inverse(&d1), inverse(&d2))
}

pub fn first_derivative(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut coeffs = forward(values);
    for (idx, c) in coeffs.iter_mut().enumerate() {
        if is_nyquist(idx, n) {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, 2.0 * PI * wavenumber(idx, n));
        }
    }
    inverse(&coeffs)
}

/// Zero-padded resampling of the trigonometric interpolant onto `factor * N`
/// points, returning positions and velocities on the fine grid. The Nyquist
/// coefficient of an even grid is split evenly between `+N/2` and `-N/2`.
pub fn upsample_with_velocity(
    values: &[Complex64],
    factor: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = values.len();
    let fine = n * factor;
    let coeffs = forward(values);
    let zero = Complex64::new(0.0, 0.0);
    let mut pos = vec![zero; fine];
    let mut vel = vec![zero; fine];
    let mut place = |m: f64, c: Complex64| {
        let slot = if m >= 0.0 {
            m as usize
        } else {
            (fine as f64 + m) as usize
        };
        pos[slot] += c;
        vel[slot] += c * Complex64::new(0.0, 2.0 * PI * m);
    };
    for (idx, c) in coeffs.iter().enumerate() {
        let m = wavenumber(idx, n);
        if is_nyquist(idx, n) {
            place(m, c * 0.5);
            place(-m, c * 0.5);
        } else {
            place(m, *c);
        }
    }
    (inverse(&pos), inverse(&vel))
}
