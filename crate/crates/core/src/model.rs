//! Slow and fast potentials and the multiscale drift field.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest basis size a [`SlowPotential`] may have. Basis evaluation uses
/// stack buffers of this length.
pub const MAX_BASIS: usize = 16;

/// Parametric slow potential `V(x) = (V_1(x), …, V_N(x))`, combined with a
/// coefficient vector α as `α·V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowPotential {
    /// `V(x) = x²/2`, N = 1.
    Quadratic,
    /// `V(x) = (x⁴/4, −x²/2)`, N = 2.
    Bistable,
    /// Chebyshev polynomials of the first kind, `V_i = T_i` for `i = 1..=n`.
    /// Evaluated by the three-term recurrence for all real x.
    Chebyshev { n: usize },
    /// `V_i(x) = Σ_k coefficients[i][k]·x^k`.
    Polynomial { coefficients: Vec<Vec<f64>> },
}

impl SlowPotential {
    pub fn chebyshev(n: usize) -> Self {
        SlowPotential::Chebyshev { n }
    }

    pub fn polynomial(coefficients: Vec<Vec<f64>>) -> Self {
        SlowPotential::Polynomial { coefficients }
    }

    /// Number of basis functions N.
    pub fn dim(&self) -> usize {
        match self {
            SlowPotential::Quadratic => 1,
            SlowPotential::Bistable => 2,
            SlowPotential::Chebyshev { n } => *n,
            SlowPotential::Polynomial { coefficients } => coefficients.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || n > MAX_BASIS {
            return Err(Error::invalid(format!(
                "slow potential basis size must be in 1..={MAX_BASIS}, got {n}"
            )));
        }
        if let SlowPotential::Polynomial { coefficients } = self {
            if coefficients.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::invalid("polynomial coefficients must be finite"));
            }
        }
        Ok(())
    }

    /// Writes the `order`-th derivative of every basis function at `x` into
    /// `out[..N]`. `order` ranges over 0..=3.
    pub fn eval_into(&self, x: f64, order: usize, out: &mut [f64]) {
        debug_assert!(order <= 3);
        match self {
            SlowPotential::Quadratic => {
                out[0] = match order {
                    0 => 0.5 * x * x,
                    1 => x,
                    2 => 1.0,
                    _ => 0.0,
                };
            }
            SlowPotential::Bistable => {
                let (quartic, quad) = match order {
                    0 => (0.25 * x * x * x * x, -0.5 * x * x),
                    1 => (x * x * x, -x),
                    2 => (3.0 * x * x, -1.0),
                    _ => (6.0 * x, 0.0),
                };
                out[0] = quartic;
                out[1] = quad;
            }
            SlowPotential::Chebyshev { n } => chebyshev_into(*n, x, order, out),
            SlowPotential::Polynomial { coefficients } => {
                for (o, c) in out.iter_mut().zip(coefficients) {
                    *o = poly_derivative(c, x, order);
                }
            }
        }
    }

    pub fn value(&self, x: f64) -> Vec<f64> {
        self.eval_vec(x, 0)
    }

    /// Component-wise first derivative `V'(x)`.
    pub fn grad(&self, x: f64) -> Vec<f64> {
        self.eval_vec(x, 1)
    }

    /// Component-wise second derivative `V''(x)`.
    pub fn hess(&self, x: f64) -> Vec<f64> {
        self.eval_vec(x, 2)
    }

    pub fn third(&self, x: f64) -> Vec<f64> {
        self.eval_vec(x, 3)
    }

    #[inline]
    pub fn grad_into(&self, x: f64, out: &mut [f64]) {
        self.eval_into(x, 1, out)
    }

    fn eval_vec(&self, x: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, order, &mut out);
        out
    }
}

/// Derivatives of T_1..T_n up to `order` via the differentiated recurrence
/// `T_{i+1}^{(k)} = 2x T_i^{(k)} + 2k T_i^{(k-1)} − T_{i-1}^{(k)}`.
fn chebyshev_into(n: usize, x: f64, order: usize, out: &mut [f64]) {
    // rows: derivative order, columns: T_0..=T_n
    let mut t = [[0.0f64; MAX_BASIS + 1]; 4];
    t[0][0] = 1.0;
    if n >= 1 {
        t[0][1] = x;
        t[1][1] = 1.0;
    }
    for i in 1..n {
        for k in 0..=order {
            let lower = if k > 0 { 2.0 * k as f64 * t[k - 1][i] } else { 0.0 };
            t[k][i + 1] = 2.0 * x * t[k][i] + lower - t[k][i - 1];
        }
    }
    out[..n].copy_from_slice(&t[order][1..=n]);
}

fn poly_derivative(coef: &[f64], x: f64, order: usize) -> f64 {
    // Horner on the differentiated coefficients.
    let mut acc = 0.0;
    for k in (order..coef.len()).rev() {
        let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
        acc = acc * x + coef[k] * falling;
    }
    acc
}

/// Smooth periodic fast potential `p`, evaluated at `y = x/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FastPotential {
    /// `p ≡ 0`. Nominal period 2π.
    Zero,
    /// `p(y) = cos(y)`, period 2π.
    Cos,
    /// `p(y) = offset + Σ_k cos[k-1]·cos(2πky/L) + sin[k-1]·sin(2πky/L)`.
    Fourier {
        period: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl FastPotential {
    pub fn period(&self) -> f64 {
        match self {
            FastPotential::Zero | FastPotential::Cos => 2.0 * PI,
            FastPotential::Fourier { period, .. } => *period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let FastPotential::Fourier {
            period,
            offset,
            cos,
            sin,
        } = self
        {
            if !(period.is_finite() && *period > 0.0) {
                return Err(Error::invalid(format!(
                    "fast potential period must be > 0, got {period}"
                )));
            }
            if !offset.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                return Err(Error::invalid("fast potential coefficients must be finite"));
            }
        }
        Ok(())
    }

    pub fn value(&self, y: f64) -> f64 {
        match self {
            FastPotential::Zero => 0.0,
            FastPotential::Cos => y.cos(),
            FastPotential::Fourier {
                period,
                offset,
                cos,
                sin,
            } => {
                let w = 2.0 * PI / period;
                let mut p = *offset;
                for (k, &a) in cos.iter().enumerate() {
                    p += a * (w * (k + 1) as f64 * y).cos();
                }
                for (k, &b) in sin.iter().enumerate() {
                    p += b * (w * (k + 1) as f64 * y).sin();
                }
                p
            }
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            FastPotential::Zero => 0.0,
            FastPotential::Cos => -y.sin(),
            FastPotential::Fourier {
                period, cos, sin, ..
            } => {
                let w = 2.0 * PI / period;
                let mut dp = 0.0;
                for (k, &a) in cos.iter().enumerate() {
                    let wk = w * (k + 1) as f64;
                    dp -= a * wk * (wk * y).sin();
                }
                for (k, &b) in sin.iter().enumerate() {
                    let wk = w * (k + 1) as f64;
                    dp += b * wk * (wk * y).cos();
                }
                dp
            }
        }
    }

    /// The potential `λ·p + c` in Fourier form.
    pub fn scaled(&self, amplitude: f64, shift: f64) -> FastPotential {
        match self {
            FastPotential::Zero => FastPotential::Fourier {
                period: 2.0 * PI,
                offset: shift,
                cos: vec![],
                sin: vec![],
            },
            FastPotential::Cos => FastPotential::Fourier {
                period: 2.0 * PI,
                offset: shift,
                cos: vec![amplitude],
                sin: vec![],
            },
            FastPotential::Fourier {
                period,
                offset,
                cos,
                sin,
            } => FastPotential::Fourier {
                period: *period,
                offset: amplitude * offset + shift,
                cos: cos.iter().map(|a| amplitude * a).collect(),
                sin: sin.iter().map(|b| amplitude * b).collect(),
            },
        }
    }
}

/// The two-scale model generating the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleModel {
    pub slow: SlowPotential,
    pub fast: FastPotential,
    pub alpha: Vec<f64>,
    /// Diffusion coefficient. Zero is accepted for deterministic runs, but
    /// homogenization requires `sigma > 0`.
    pub sigma: f64,
    pub epsilon: f64,
}

impl MultiscaleModel {
    pub fn new(
        slow: SlowPotential,
        fast: FastPotential,
        alpha: Vec<f64>,
        sigma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let m = MultiscaleModel {
            slow,
            fast,
            alpha,
            sigma,
            epsilon,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.slow.validate()?;
        self.fast.validate()?;
        if self.alpha.len() != self.slow.dim() {
            return Err(Error::invalid(format!(
                "alpha has {} components but the slow potential has {}",
                self.alpha.len(),
                self.slow.dim()
            )));
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("alpha must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// `−α·V'(x) − (1/ε) p'(x/ε)`.
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        let mut buf = [0.0; MAX_BASIS];
        self.drift_with(x, &mut buf)
    }

    #[inline]
    pub(crate) fn drift_with(&self, x: f64, buf: &mut [f64; MAX_BASIS]) -> f64 {
        slow_drift(&self.slow, &self.alpha, x, buf)
            - self.fast.derivative(x / self.epsilon) / self.epsilon
    }
}

/// `−a·V'(x)`.
#[inline]
pub(crate) fn slow_drift(slow: &SlowPotential, a: &[f64], x: f64, buf: &mut [f64; MAX_BASIS]) -> f64 {
    let n = a.len();
    slow.grad_into(x, &mut buf[..n]);
    -a.iter().zip(&buf[..n]).map(|(a, g)| a * g).sum::<f64>()
}
