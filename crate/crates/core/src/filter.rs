//! Exponential low-pass filtering `Z_t = ∫₀ᵗ k(t−s) X_s ds` with kernel
//! `k(r) = C_β δ^{−1/β} exp(−r^β/δ)`, `C_β = β/Γ(1/β)`.
//!
//! `Z₀ = 0` and no renormalisation by `∫₀ᵗ k`, so `Z` carries a start-up
//! transient of duration O(δ).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Trajectory;
use crate::special::gamma;

/// `ln(1e16)`: the kernel is truncated where `k(r) < 1e-16·k(0)`.
const TRUNCATION_LOG: f64 = 36.841_361_487_904_734;

/// Work threshold (samples × lags) above which the FFT path is used.
const DIRECT_WORK_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub beta: f64,
    pub delta: f64,
}

impl FilterParams {
    pub fn new(beta: f64, delta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(Error::invalid(format!("filter beta must be >= 1, got {beta}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid(format!("filter delta must be > 0, got {delta}")));
        }
        Ok(FilterParams { beta, delta })
    }

    pub fn exponential(delta: f64) -> Result<Self> {
        Self::new(1.0, delta)
    }

    pub fn is_exponential(&self) -> bool {
        self.beta == 1.0
    }

    /// `C_β = β/Γ(1/β)`.
    pub fn normalization(&self) -> f64 {
        self.beta / gamma(1.0 / self.beta)
    }

    /// `k(r)` for `r ≥ 0`.
    pub fn kernel(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        self.normalization() * self.delta.powf(-1.0 / self.beta) * (-r.powf(self.beta) / self.delta).exp()
    }

    /// Lag beyond which `k(r) < 1e-16·k(0)`.
    pub fn support(&self) -> f64 {
        (self.delta * TRUNCATION_LOG).powf(1.0 / self.beta)
    }
}

/// A filtered path together with the kernel that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub params: FilterParams,
    pub path: Trajectory,
}

/// Exact solution of `dZ = (X − Z)/δ dt`, `Z₀ = 0`, with X linear between
/// samples.
pub fn filter_beta1(x: &Trajectory, delta: f64) -> Result<Filtered> {
    let params = FilterParams::exponential(delta)?;
    let tau = x.tau;
    let decay = (-tau / delta).exp();
    // 1 − e^{−τ/δ}, accurate for small τ/δ
    let gain = -(-tau / delta).exp_m1();
    let slope_gain = (tau - delta * gain) / tau;
    let mut z = Vec::with_capacity(x.values.len());
    let mut zj = 0.0;
    z.push(zj);
    for w in x.values.windows(2) {
        zj = decay * zj + gain * w[0] + slope_gain * (w[1] - w[0]);
        z.push(zj);
    }
    Ok(Filtered {
        params,
        path: Trajectory {
            t0: x.t0,
            tau,
            values: z,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMethod {
    /// Direct summation, O(n·w).
    Direct,
    /// Overlap-add FFT, O(n log w).
    Fft,
    /// `Direct` for small problems, `Fft` otherwise.
    Auto,
}

/// Lag weights `w_0 = τk(0)/2`, `w_m = τk(mτ)`, for `m` up to the truncation
/// lag or `max_lag`, whichever is smaller.
pub fn kernel_weights(fp: &FilterParams, tau: f64, max_lag: usize) -> Vec<f64> {
    let lags = ((fp.support() / tau).ceil() as usize).min(max_lag);
    let mut w: Vec<f64> = (0..=lags).map(|m| tau * fp.kernel(m as f64 * tau)).collect();
    w[0] *= 0.5;
    w
}

/// Trapezoid discretisation of the truncated convolution, on the sample grid.
pub fn filter_convolution(x: &Trajectory, fp: &FilterParams) -> Result<Filtered> {
    filter_convolution_with(x, fp, ConvolutionMethod::Auto)
}

pub fn filter_convolution_with(
    x: &Trajectory,
    fp: &FilterParams,
    method: ConvolutionMethod,
) -> Result<Filtered> {
    let fp = FilterParams::new(fp.beta, fp.delta)?;
    let n = x.steps();
    let w = kernel_weights(&fp, x.tau, n);
    let method = match method {
        ConvolutionMethod::Auto if w.len().saturating_mul(x.values.len()) <= DIRECT_WORK_LIMIT => {
            ConvolutionMethod::Direct
        }
        ConvolutionMethod::Auto => ConvolutionMethod::Fft,
        m => m,
    };
    let mut z = match method {
        ConvolutionMethod::Direct => convolve_direct(&x.values, &w),
        _ => convolve_fft(&x.values, &w),
    };
    // Trapezoid end-point at s = 0 carries half weight; the lag weights give
    // it full weight for m ≥ 1. Z₀ comes out exactly zero.
    let x0 = x.values[0];
    z[0] = 0.0;
    for (zj, wj) in z.iter_mut().zip(&w).skip(1) {
        *zj -= 0.5 * wj * x0;
    }
    Ok(Filtered {
        params: fp,
        path: Trajectory {
            t0: x.t0,
            tau: x.tau,
            values: z,
        },
    })
}

/// Applies `fp` by the exact recursion when β = 1, else by convolution.
pub fn filter(x: &Trajectory, fp: &FilterParams) -> Result<Filtered> {
    if fp.is_exponential() {
        filter_beta1(x, fp.delta)
    } else {
        filter_convolution(x, fp)
    }
}

/// Causal convolution `out[j] = Σ_{m ≤ j} w[m]·x[j−m]`, truncated to `x.len()`.
fn convolve_direct(x: &[f64], w: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let lags = w.len().min(j + 1);
            w[..lags].iter().enumerate().map(|(m, wm)| wm * x[j - m]).sum()
        })
        .collect()
}

fn convolve_fft(x: &[f64], w: &[f64]) -> Vec<f64> {
    let taps = w.len();
    let size = (2 * taps).max(4096).next_power_of_two();
    let block = size - taps + 1;
    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let scale = 1.0 / size as f64;

    let mut kernel: Vec<Complex<f64>> = w.iter().map(|&v| Complex::new(v, 0.0)).collect();
    kernel.resize(size, Complex::new(0.0, 0.0));
    forward.process(&mut kernel);

    let mut out = vec![0.0; x.len() + size];
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    for start in (0..x.len()).step_by(block) {
        let end = (start + block).min(x.len());
        for (b, &v) in buf.iter_mut().zip(&x[start..end]) {
            *b = Complex::new(v, 0.0);
        }
        for b in buf.iter_mut().skip(end - start) {
            *b = Complex::new(0.0, 0.0);
        }
        forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kernel) {
            *b *= k;
        }
        inverse.process(&mut buf);
        for (o, b) in out[start..start + size].iter_mut().zip(&buf) {
            *o += b.re * scale;
        }
    }
    out.truncate(x.len());
    out
}
