//! Cached two-dimensional FFT plumbing over rustfft.
//!
//! Plans are memoized per (size, direction) behind a mutex; the planned
//! transforms themselves are Send + Sync and shared by Arc, so fields on the
//! same grid never re-plan.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, direction == FftDirection::Inverse);
    let mut cache = cache.lock().expect("fft plan cache poisoned");
    cache
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

/// One FFT pass along each axis of a square row-major buffer.
fn fft2_inplace(buf: &mut Array2<Complex64>, n: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf.as_slice_mut().expect("standard layout"), &mut scratch);
    let mut t = Array2::default((n, n));
    for i in 0..n {
        for j in 0..n {
            t[[j, i]] = buf[[i, j]];
        }
    }
    fft.process_with_scratch(t.as_slice_mut().expect("standard layout"), &mut scratch);
    for i in 0..n {
        for j in 0..n {
            buf[[j, i]] = t[[i, j]];
        }
    }
}

/// Unnormalized forward DFT of a real sample array.
pub(crate) fn forward(values: &Array2<f64>) -> Array2<Complex64> {
    let n = values.nrows();
    let mut buf = values.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut buf, n, FftDirection::Forward);
    buf
}

/// Inverse DFT scaled by 1/n^2, returning the real part together with the
/// largest imaginary residue (a symmetry diagnostic for callers).
pub(crate) fn inverse_real(coeffs: &Array2<Complex64>) -> (Array2<f64>, f64) {
    let n = coeffs.nrows();
    let mut buf = coeffs.clone();
    fft2_inplace(&mut buf, n, FftDirection::Inverse);
    let scale = 1.0 / (n * n) as f64;
    let mut max_imag: f64 = 0.0;
    let values = buf.mapv(|c| {
        max_imag = max_imag.max((c.im * scale).abs());
        c.re * scale
    });
    (values, max_imag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let n = 16;
        let vals = Array2::from_shape_fn((n, n), |(i, j)| {
            ((i * 7 + j * 3) as f64 * 0.137).sin() + 0.25
        });
        let coeffs = forward(&vals);
        let (back, imag) = inverse_real(&coeffs);
        assert!(imag < 1e-12);
        for (a, b) in vals.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_bin_is_the_sum() {
        let n = 16;
        let vals = Array2::from_elem((n, n), 2.5);
        let coeffs = forward(&vals);
        assert!((coeffs[[0, 0]].re - 2.5 * (n * n) as f64).abs() < 1e-9);
        assert!(coeffs[[0, 0]].im.abs() < 1e-12);
        assert!(coeffs[[3, 5]].norm() < 1e-9);
    }
}
