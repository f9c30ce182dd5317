//! Linear convolution, direct or via FFT.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Products above which `convolve_prefix` switches to the FFT.
pub const FFT_THRESHOLD: usize = 1_000_000;

/// out[i] = Σ_j kernel[i − j] signal[j] for i < out_len.
pub fn convolve_direct(kernel: &[f64], signal: &[f64], out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = (i + 1).saturating_sub(kernel.len());
        let hi = i.min(signal.len().saturating_sub(1));
        if signal.is_empty() || lo > hi {
            continue;
        }
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += kernel[i - j] * signal[j];
        }
        *o = acc;
    }
    out
}

pub fn convolve_fft(kernel: &[f64], signal: &[f64], out_len: usize) -> Vec<f64> {
    FftConvolver::new(kernel, signal.len(), out_len).apply(signal)
}

/// Direct summation for small problems, FFT otherwise.
pub fn convolve_prefix(kernel: &[f64], signal: &[f64], out_len: usize) -> Vec<f64> {
    if out_len.saturating_mul(kernel.len().min(signal.len())) > FFT_THRESHOLD {
        convolve_fft(kernel, signal, out_len)
    } else {
        convolve_direct(kernel, signal, out_len)
    }
}

/// A kernel transformed once and applied to many signals of one length.
#[derive(Clone)]
pub(crate) struct FftConvolver {
    kernel: Vec<f64>,
    kernel_hat: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    signal_len: usize,
    out_len: usize,
    direct: bool,
}

impl FftConvolver {
    pub(crate) fn new(kernel: &[f64], signal_len: usize, out_len: usize) -> Self {
        let size = (kernel.len() + signal_len).max(2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel_hat: Vec<Complex<f64>> = kernel.iter().map(|&k| Complex::new(k, 0.0)).collect();
        kernel_hat.resize(size, Complex::new(0.0, 0.0));
        forward.process(&mut kernel_hat);
        let direct = out_len.saturating_mul(kernel.len().min(signal_len)) <= FFT_THRESHOLD;
        Self {
            kernel: kernel.to_vec(),
            kernel_hat,
            forward,
            inverse,
            signal_len,
            out_len,
            direct,
        }
    }

    pub(crate) fn apply(&self, signal: &[f64]) -> Vec<f64> {
        assert_eq!(signal.len(), self.signal_len, "signal length differs from the plan");
        let size = self.kernel_hat.len();
        let mut buf: Vec<Complex<f64>> = signal.iter().map(|&s| Complex::new(s, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let norm = 1.0 / size as f64;
        buf[..self.out_len].iter().map(|c| c.re * norm).collect()
    }

    /// Direct summation below the product threshold, FFT above.
    pub(crate) fn apply_auto(&self, signal: &[f64]) -> Vec<f64> {
        if self.direct {
            convolve_direct(&self.kernel, signal, self.out_len)
        } else {
            self.apply(signal)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_example() {
        let out = convolve_direct(&[1.0, 2.0], &[1.0, 0.0, -1.0], 4);
        assert_eq!(out, vec![1.0, 2.0, -1.0, -2.0]);
        let fft = convolve_fft(&[1.0, 2.0], &[1.0, 0.0, -1.0], 4);
        for (a, b) in out.iter().zip(&fft) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn fft_matches_direct(
            kernel in proptest::collection::vec(-10.0f64..10.0, 1..64),
            signal in proptest::collection::vec(-1e3f64..1e3, 1..200),
            extra in 0usize..50,
        ) {
            let out_len = (signal.len() + extra).min(kernel.len() + signal.len() - 1);
            let a = convolve_direct(&kernel, &signal, out_len);
            let b = convolve_fft(&kernel, &signal, out_len);
            let scale: f64 = kernel.iter().map(|k| k.abs()).sum::<f64>() * signal.iter().map(|s| s.abs()).fold(0.0, f64::max);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }
}
