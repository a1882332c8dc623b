use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{
    check_len, check_stage_inputs, heat_young_constant, Propagator, SmoothingProfile, StageTarget,
};
use crate::error::{validation, Result};
use crate::lagrange::LagrangeData;
use crate::norms::{CoupleNorms, Geometry, LpNorm, Norm, WChoice};
use crate::quadrature::gauss_legendre_interval;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuSpec {
    /// Drift `b < 0`.
    pub b: f64,
    /// Diffusion `q > 0`.
    pub q: f64,
    pub half_width: f64,
    pub n: usize,
    pub p: f64,
    pub r: f64,
    pub w: WChoice,
    pub horizon: f64,
    /// Gauss-Legendre nodes in `tau` for stage convolutions; `s + 2` when absent.
    pub quad_nodes: Option<usize>,
}

/// Below this `Q_t` the kernel is treated as a delta.
const Q_FLOOR: f64 = 1e-14;
const MATRIX_CACHE_LIMIT: usize = 512;

/// The Kolmogorov semigroup `S(t)f(x) = (k_t * f)(e^{tb} x)` of `u_t = q u_xx + b x u_x`,
/// with `k_t` the Gaussian of variance `2 Q_t`, `Q_t = q (e^{2bt} - 1) / (2b)`.
///
/// Functions live on the periodic box `[-L, L)`; both the Gaussian convolution and the
/// evaluation at the dilated points act on the trigonometric interpolant, so `S(t)` is a dense
/// `n x n` matrix, built once per `t` and cached.
pub struct OuProblem {
    spec: OuSpec,
    geometry: Geometry,
    fft: Arc<dyn Fft<f64>>,
    matrices: RwLock<HashMap<u64, Arc<Vec<f64>>>>,
    dilation_fallbacks: AtomicU64,
    norms: CoupleNorms,
    profile_x: SmoothingProfile,
    m_bound: f64,
}

impl std::fmt::Debug for OuProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OuProblem").field("spec", &self.spec).finish()
    }
}

impl OuProblem {
    pub fn new(spec: OuSpec) -> Result<Self> {
        if !(spec.b < 0.0 && spec.b.is_finite()) {
            return validation(format!("OU drift must be negative, got {}", spec.b));
        }
        if !(spec.q > 0.0 && spec.q.is_finite()) {
            return validation(format!("OU diffusion must be positive, got {}", spec.q));
        }
        if spec.n < 8 || spec.n % 2 != 0 {
            return validation(format!("OU grid needs an even size >= 8, got {}", spec.n));
        }
        if !(spec.half_width > 0.0) || !(spec.horizon > 0.0) {
            return validation("OU box half-width and horizon must be positive");
        }
        if spec.p < 1.0 || spec.r < spec.p {
            return validation(format!("need 1 <= p <= r, got p = {}, r = {}", spec.p, spec.r));
        }
        let alpha = 0.5 * (1.0 / spec.p - 1.0 / spec.r);
        let geometry = Geometry::Box {
            n: spec.n,
            half_width: spec.half_width,
        };
        let cell = geometry.cell_volume();
        let x: Arc<dyn Norm> = Arc::new(LpNorm { p: spec.p, cell });
        let v: Arc<dyn Norm> = Arc::new(LpNorm { p: spec.r, cell });
        let (b, t) = (spec.b, spec.horizon);
        // ||S(t)||_{L^p} <= e^{-bt/p}; Q_t / t is decreasing for b < 0.
        let m_bound = (-b * t / spec.p.min(spec.r)).exp();
        let q_min = Self::q_of(spec.b, spec.q, t) / t;
        let c = (-b * t / spec.r).exp() * heat_young_constant(1, spec.p, spec.r).0 * q_min.powf(-alpha);
        Ok(OuProblem {
            fft: FftPlanner::new().plan_fft_forward(spec.n),
            matrices: RwLock::new(HashMap::new()),
            dilation_fallbacks: AtomicU64::new(0),
            norms: CoupleNorms::new(x, v, spec.w),
            profile_x: SmoothingProfile::new(c, alpha, t)?,
            m_bound,
            geometry,
            spec,
        })
    }

    fn q_of(b: f64, q: f64, t: f64) -> f64 {
        q * (2.0 * b * t).exp_m1() / (2.0 * b)
    }

    pub fn spec(&self) -> &OuSpec {
        &self.spec
    }

    /// `Q_t`.
    pub fn q_t(&self, t: f64) -> f64 {
        Self::q_of(self.spec.b, self.spec.q, t)
    }

    fn xi(&self, k: usize) -> f64 {
        std::f64::consts::PI * k as f64 / self.spec.half_width
    }

    /// Row `j` maps grid values to `sum_k mu_k fhat_k e^{i xi_k (y_j - x_0)}`, the real
    /// trigonometric interpolant with Fourier multiplier `mu` evaluated at `y_j`.
    fn interpolation_matrix(&self, points: &[f64], mu: &[f64]) -> Vec<f64> {
        let n = self.spec.n;
        let half = n / 2;
        let x0 = -self.spec.half_width;
        let mut out = vec![0.0; n * n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (j, &y) in points.iter().enumerate() {
            let theta = self.xi(1) * (y - x0);
            buf[0] = Complex64::new(mu[0], 0.0);
            for k in 1..half {
                buf[k] = Complex64::from_polar(2.0 * mu[k], k as f64 * theta);
            }
            buf[half] = Complex64::new(mu[half] * (half as f64 * theta).cos(), 0.0);
            for c in buf.iter_mut().skip(half + 1) {
                *c = Complex64::new(0.0, 0.0);
            }
            self.fft.process(&mut buf);
            for m in 0..n {
                out[j * n + m] = buf[m].re / n as f64;
            }
        }
        out
    }

    fn gaussian_multiplier(&self, qt: f64) -> Vec<f64> {
        (0..=self.spec.n / 2)
            .map(|k| (-qt * self.xi(k).powi(2)).exp())
            .collect()
    }

    fn matrix(&self, t: f64) -> Arc<Vec<f64>> {
        let key = t.to_bits();
        if let Some(m) = self.matrices.read().expect("OU cache poisoned").get(&key) {
            return m.clone();
        }
        let mut qt = self.q_t(t);
        if qt < Q_FLOOR {
            self.dilation_fallbacks.fetch_add(1, Ordering::Relaxed);
            qt = 0.0;
        }
        let dil = (self.spec.b * t).exp();
        let points: Vec<f64> = (0..self.spec.n)
            .map(|j| dil * self.geometry.point(j)[0])
            .collect();
        let m = Arc::new(self.interpolation_matrix(&points, &self.gaussian_multiplier(qt)));
        let mut cache = self.matrices.write().expect("OU cache poisoned");
        if cache.len() >= MATRIX_CACHE_LIMIT {
            cache.clear();
        }
        cache.entry(key).or_insert(m).clone()
    }

    fn mat_vec(&self, m: &[f64], v: &[f64]) -> Vec<f64> {
        m.chunks(self.spec.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// The `L^2` adjoint `S*(t) g(z) = e^{-tb} (k_t * g(e^{-tb} .))(z)`, i.e. the evolution of
    /// densities under the OU process. Not cached.
    pub fn density_apply(&self, t: f64, g: &[f64]) -> Result<StateVector> {
        check_len("ou-1d", self.spec.n, g.len())?;
        if t == 0.0 {
            return Ok(StateVector::new(g.to_vec()));
        }
        let n = self.spec.n;
        let grid: Vec<f64> = (0..n).map(|j| self.geometry.point(j)[0]).collect();
        let stretched: Vec<f64> = grid.iter().map(|x| (-self.spec.b * t).exp() * x).collect();
        let dilate = self.interpolation_matrix(&stretched, &vec![1.0; n / 2 + 1]);
        let smooth = self.interpolation_matrix(&grid, &self.gaussian_multiplier(self.q_t(t)));
        let scale = (-self.spec.b * t).exp();
        let out = self.mat_vec(&smooth, &self.mat_vec(&dilate, g));
        Ok(StateVector::new(out.into_iter().map(|v| scale * v).collect()))
    }

    pub fn dilation_fallbacks(&self) -> u64 {
        self.dilation_fallbacks.load(Ordering::Relaxed)
    }
}

impl Propagator for OuProblem {
    fn name(&self) -> &str {
        "ou-1d"
    }

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn apply(&self, t: f64, v: &[f64]) -> Result<StateVector> {
        check_len(self.name(), self.spec.n, v.len())?;
        if t < 0.0 {
            return validation(format!("OU semigroup needs t >= 0, got {t}"));
        }
        if t == 0.0 {
            return Ok(StateVector::new(v.to_vec()));
        }
        Ok(StateVector::new(self.mat_vec(&self.matrix(t), v)))
    }

    fn stage_convolve_many(
        &self,
        h: f64,
        lag: &LagrangeData,
        g: &[StateVector],
        targets: &[StageTarget],
    ) -> Result<Vec<StateVector>> {
        check_stage_inputs(self.name(), self.len(), h, lag, g, targets)?;
        let s = lag.stages();
        let nodes = self.spec.quad_nodes.unwrap_or(s + 2);
        if nodes < s {
            return validation(format!(
                "{nodes} quadrature nodes cannot integrate the degree-{} interpolant",
                s - 1
            ));
        }
        let n = self.spec.n;
        targets
            .iter()
            .map(|&target| {
                let c = target.node(lag);
                let mut out = StateVector::zeros(n);
                if c == 0.0 {
                    return Ok(out);
                }
                let end = c * h;
                let (taus, weights) = gauss_legendre_interval(nodes, 0.0, end);
                for (&tau, &wq) in taus.iter().zip(&weights) {
                    let ell = lag.basis_at(tau / h);
                    let mut mix = StateVector::zeros(n);
                    for (l, gj) in ell.iter().zip(g) {
                        mix.axpy(*l, gj);
                    }
                    let moved = self.apply(end - tau, &mix)?;
                    out.axpy(wq, &moved);
                }
                Ok(out)
            })
            .collect()
    }

    fn norms(&self) -> &CoupleNorms {
        &self.norms
    }

    fn profile_x(&self) -> SmoothingProfile {
        self.profile_x
    }

    fn bound_m(&self) -> f64 {
        self.m_bound
    }

    fn kernel_width(&self, t: f64) -> Option<f64> {
        Some((2.0 * self.q_t(t)).sqrt())
    }

    fn diagnostics(&self) -> Vec<(String, u64)> {
        vec![("dilation_fallbacks".to_string(), self.dilation_fallbacks())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(b: f64, q: f64, half_width: f64, n: usize) -> OuProblem {
        OuProblem::new(OuSpec {
            b,
            q,
            half_width,
            n,
            p: 2.0,
            r: 2.0,
            w: WChoice::V,
            horizon: 1.0,
            quad_nodes: None,
        })
        .unwrap()
    }

    fn grid(p: &OuProblem) -> Vec<f64> {
        (0..p.spec.n).map(|j| p.geometry.point(j)[0]).collect()
    }

    #[test]
    fn constants_are_preserved() {
        let p = ou(-0.5, 1.0, 14.0, 128);
        let out = p.apply(0.3, &[1.0; 128]).unwrap();
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gaussian_variance_maps() {
        let (b, q, t) = (-1.0, 2.0, 0.5);
        let p = ou(b, q, 24.0, 256);
        let x = grid(&p);
        let qt = p.q_t(t);
        assert!((qt - (1.0 - (-1.0f64).exp())).abs() < 1e-15);

        // Backward operator on functions: variance sigma^2 -> e^{-2bt}(sigma^2 + 2 Q_t).
        let f: Vec<f64> = x.iter().map(|x| (-x * x / 2.0).exp()).collect();
        let var = (-2.0 * b * t).exp() * (1.0 + 2.0 * qt);
        let amp = (1.0 / (1.0 + 2.0 * qt)).sqrt();
        let out = p.apply(t, &f).unwrap();
        let exact: Vec<f64> = x.iter().map(|x| amp * (-x * x / (2.0 * var)).exp()).collect();
        let err = p.geometry.lp_norm(&out.sub(&exact.clone().into()), 2.0);
        assert!(err / p.geometry.lp_norm(&exact, 2.0) < 1e-6, "{err}");

        // Density flow: variance sigma^2 -> e^{2bt} sigma^2 + 2 Q_t.
        let dens = |v: f64| -> Vec<f64> {
            x.iter()
                .map(|x| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt())
                .collect()
        };
        let out = p.density_apply(t, &dens(1.0)).unwrap();
        let exact = dens((2.0 * b * t).exp() + 2.0 * qt);
        let err = p.geometry.lp_norm(&out.sub(&exact.clone().into()), 2.0);
        assert!(err / p.geometry.lp_norm(&exact, 2.0) < 1e-6, "{err}");
    }

    #[test]
    fn tiny_times_fall_back_to_dilation() {
        let p = ou(-0.5, 1.0, 14.0, 64);
        let x = grid(&p);
        let f: Vec<f64> = x.iter().map(|x| (-x * x).exp()).collect();
        let out = p.apply(1e-16, &f).unwrap();
        assert_eq!(p.dilation_fallbacks(), 1);
        for (a, b) in out.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_quadrature_nodes_rejected() {
        let p = OuProblem::new(OuSpec {
            quad_nodes: Some(1),
            ..*ou(-0.5, 1.0, 14.0, 16).spec()
        })
        .unwrap();
        let lag = crate::lagrange::build_lagrange(
            &crate::lagrange::NodeSet::new(vec![0.0, 1.0]).unwrap(),
        );
        let g = vec![StateVector::zeros(16), StateVector::zeros(16)];
        assert!(p.stage_convolve(0.1, &lag, &g, StageTarget::Final).is_err());
    }
}
