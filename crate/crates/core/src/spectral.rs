//! FFT helpers for periodic grids (d = 1, 2) and the Dirichlet sine basis.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Complex FFTs on an `n^d` periodic grid stored row-major.
#[derive(Clone)]
pub struct PeriodicFft {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicFft").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl PeriodicFft {
    pub fn new(n: usize, dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only d = 1, 2 are supported");
        let mut planner = FftPlanner::new();
        PeriodicFft {
            n,
            dim,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Signed integer wavenumber of FFT index `i`; the Nyquist index maps to `-n/2`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        if i < self.n.div_ceil(2) {
            i as f64
        } else {
            i as f64 - self.n as f64
        }
    }

    fn is_nyquist(&self, i: usize) -> bool {
        self.n % 2 == 0 && i == self.n / 2
    }

    /// Wave-vector of the flattened spectral index (for a domain of length `2 pi`).
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.wavenumber(idx), 0.0]
        } else {
            [self.wavenumber(idx / self.n), self.wavenumber(idx % self.n)]
        }
    }

    pub fn mode_sq(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        k[0] * k[0] + k[1] * k[1]
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        if self.dim == 1 {
            plan.process(buf);
            return;
        }
        let n = self.n;
        for row in buf.chunks_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = buf[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                buf[i * n + j] = col[i];
            }
        }
    }

    /// Unnormalised forward transform of a real grid function.
    pub fn forward(&self, v: &[f64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.len());
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Inverse transform (including the `1/n^d` factor), real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(spec.len(), self.len());
        self.transform(&mut spec, &self.inv);
        let scale = 1.0 / self.len() as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    /// Spectral partial derivative along `axis` on the `2 pi`-periodic domain.
    /// The Nyquist mode is dropped.
    pub fn derivative(&self, v: &[f64], axis: usize) -> Vec<f64> {
        let mut spec = self.forward(v);
        for (idx, c) in spec.iter_mut().enumerate() {
            let i = if self.dim == 1 {
                idx
            } else if axis == 0 {
                idx / self.n
            } else {
                idx % self.n
            };
            if self.is_nyquist(i) {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, self.wavenumber(i));
            }
        }
        self.inverse_real(spec)
    }
}

/// Discrete sine transform on the interior points `x_j = j pi / (n + 1)`, `j = 1..n`,
/// of `(0, pi)`, with `w_j = sum_{k=1}^n what_k sin(k x_j)`.
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransform").field("n", &self.n).finish()
    }
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        SineTransform {
            n,
            fft: planner.plan_fft_forward(2 * (n + 1)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `out_k = sum_{j=1}^n v_j sin(pi j k / (n+1))` for `k = 1..n`, via the odd extension.
    fn sine_sum(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = 2 * (n + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for j in 1..=n {
            buf[j] = Complex64::new(v[j - 1], 0.0);
            buf[m - j] = Complex64::new(-v[j - 1], 0.0);
        }
        self.fft.process(&mut buf);
        (1..=n).map(|k| -0.5 * buf[k].im).collect()
    }

    /// Grid values to sine coefficients.
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let scale = 2.0 / (self.n as f64 + 1.0);
        self.sine_sum(v).into_iter().map(|c| c * scale).collect()
    }

    /// Sine coefficients to grid values.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n);
        self.sine_sum(coeffs)
    }

    pub fn grid_point(&self, j: usize) -> f64 {
        (j + 1) as f64 * std::f64::consts::PI / (self.n as f64 + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_roundtrip_and_derivative() {
        let fft = PeriodicFft::new(32, 1);
        let x: Vec<f64> = (0..32).map(|j| 2.0 * PI * j as f64 / 32.0).collect();
        let v: Vec<f64> = x.iter().map(|x| (3.0 * x).sin()).collect();
        let back = fft.inverse_real(fft.forward(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        let d = fft.derivative(&v, 0);
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - 3.0 * (3.0 * xi).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_derivative() {
        let n = 16;
        let fft = PeriodicFft::new(n, 2);
        let h = 2.0 * PI / n as f64;
        let v: Vec<f64> = (0..n * n)
            .map(|idx| ((idx / n) as f64 * h).sin() * (2.0 * (idx % n) as f64 * h).cos())
            .collect();
        let dy = fft.derivative(&v, 1);
        for idx in 0..n * n {
            let (x, y) = ((idx / n) as f64 * h, (idx % n) as f64 * h);
            assert!((dy[idx] + 2.0 * x.sin() * (2.0 * y).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_transform_matches_direct_sum() {
        let n = 13;
        let st = SineTransform::new(n);
        let v: Vec<f64> = (0..n).map(|j| ((j * 7 + 3) % 11) as f64 - 5.0).collect();
        let coeffs = st.forward(&v);
        for k in 1..=n {
            let direct: f64 = (0..n)
                .map(|j| v[j] * (k as f64 * st.grid_point(j)).sin())
                .sum::<f64>()
                * 2.0
                / (n as f64 + 1.0);
            assert!((coeffs[k - 1] - direct).abs() < 1e-12);
        }
        let back = st.inverse(&coeffs);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
