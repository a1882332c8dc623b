//! Discrete norms of the interpolation couple `(X, V)` and the grid geometries they live on.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::spectral::{PeriodicFft, SineTransform};

/// A norm on grid functions of a fixed length.
pub trait Norm: Send + Sync + fmt::Debug {
    fn norm(&self, v: &[f64]) -> f64;
    fn describe(&self) -> String;
}

/// Which space plays the role of `W` in the error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WChoice {
    X,
    #[default]
    V,
}

impl fmt::Display for WChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WChoice::X => write!(f, "X"),
            WChoice::V => write!(f, "V"),
        }
    }
}

/// The three norms a problem attaches to its states.
#[derive(Debug, Clone)]
pub struct CoupleNorms {
    pub x: Arc<dyn Norm>,
    pub v: Arc<dyn Norm>,
    pub w: Arc<dyn Norm>,
    pub w_choice: WChoice,
}

impl CoupleNorms {
    pub fn new(x: Arc<dyn Norm>, v: Arc<dyn Norm>, w_choice: WChoice) -> Self {
        let w = match w_choice {
            WChoice::X => x.clone(),
            WChoice::V => v.clone(),
        };
        CoupleNorms { x, v, w, w_choice }
    }

    pub fn x_norm(&self, v: &[f64]) -> f64 {
        self.x.norm(v)
    }

    pub fn v_norm(&self, v: &[f64]) -> f64 {
        self.v.norm(v)
    }

    pub fn w_norm(&self, v: &[f64]) -> f64 {
        self.w.norm(v)
    }
}

/// `(cell * sum |u_i|^p)^{1/p}`, the max-norm for `p = inf`.
pub fn lp_norm(v: &[f64], p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    }
    if p == 1.0 {
        return cell * v.iter().map(|x| x.abs()).sum::<f64>();
    }
    if p == 2.0 {
        return (cell * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    }
    // Scale first so large p does not overflow.
    let m = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * (cell * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>()).powf(1.0 / p)
}

#[derive(Debug, Clone)]
pub struct LpNorm {
    pub p: f64,
    pub cell: f64,
}

impl Norm for LpNorm {
    fn norm(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.p, self.cell)
    }

    fn describe(&self) -> String {
        format!("L^{}", fmt_exponent(self.p))
    }
}

/// `||u||_r + || |grad u| ||_r` with spectral derivatives on the periodic grid.
#[derive(Debug, Clone)]
pub struct SobolevNorm {
    pub r: f64,
    pub cell: f64,
    pub fft: PeriodicFft,
}

impl SobolevNorm {
    fn gradient_magnitude(&self, v: &[f64]) -> Vec<f64> {
        if self.fft.dim() == 1 {
            return self.fft.derivative(v, 0);
        }
        let dx = self.fft.derivative(v, 0);
        let dy = self.fft.derivative(v, 1);
        dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect()
    }
}

impl Norm for SobolevNorm {
    fn norm(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.r, self.cell) + lp_norm(&self.gradient_magnitude(v), self.r, self.cell)
    }

    fn describe(&self) -> String {
        format!("W^{{1,{}}}", fmt_exponent(self.r))
    }
}

/// `max(||u||_s, ||u||_{W^{1,r}})`, the norm of `L^s ∩ W^{1,r}`.
#[derive(Debug, Clone)]
pub struct IntersectionNorm {
    pub s: f64,
    pub sobolev: SobolevNorm,
}

impl Norm for IntersectionNorm {
    fn norm(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.s, self.sobolev.cell).max(self.sobolev.norm(v))
    }

    fn describe(&self) -> String {
        format!("L^{} ∩ {}", fmt_exponent(self.s), self.sobolev.describe())
    }
}

/// Energy norm `sqrt(||w'||_2^2 + ||v||_2^2)` of a stacked pair `(w, v)` on `(0, pi)`,
/// evaluated exactly on the sine interpolant.
#[derive(Debug, Clone)]
pub struct EnergyNorm {
    pub sine: SineTransform,
}

impl EnergyNorm {
    /// Per-mode energies `omega_k^2 what_k^2 + vhat_k^2` (without the `pi/2` factor).
    pub fn modal_energies(&self, state: &[f64]) -> Vec<f64> {
        let n = self.sine.n();
        let w = self.sine.forward(&state[..n]);
        let v = self.sine.forward(&state[n..]);
        (0..n)
            .map(|k| {
                let om = (k + 1) as f64;
                om * om * w[k] * w[k] + v[k] * v[k]
            })
            .collect()
    }
}

impl Norm for EnergyNorm {
    fn norm(&self, v: &[f64]) -> f64 {
        (0.5 * PI * self.modal_energies(v).iter().sum::<f64>()).sqrt()
    }

    fn describe(&self) -> String {
        "H^1_0 x L^2 energy".to_string()
    }
}

/// Absolute value on one-component states.
#[derive(Debug, Clone, Copy)]
pub struct AbsNorm;

impl Norm for AbsNorm {
    fn norm(&self, v: &[f64]) -> f64 {
        v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    fn describe(&self) -> String {
        "|.|".to_string()
    }
}

pub(crate) fn fmt_exponent(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// Spatial layout of a problem's state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// `n^dim` points on the torus `[0, 2 pi)^dim`.
    Periodic { dim: usize, n: usize },
    /// `n` points on the periodic box `[-half_width, half_width)`.
    Box { n: usize, half_width: f64 },
    /// Stacked pair `(w, v)` at the `n` interior points of `(0, pi)`.
    SinePair { n: usize },
    /// `n` unrelated components (systems of ODEs).
    Points { n: usize },
}

impl Geometry {
    pub fn len(&self) -> usize {
        match *self {
            Geometry::Periodic { dim, n } => n.pow(dim as u32),
            Geometry::Box { n, .. } => n,
            Geometry::SinePair { n } => 2 * n,
            Geometry::Points { n } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match *self {
            Geometry::Periodic { dim, .. } => dim,
            _ => 1,
        }
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            Geometry::Periodic { n, .. } => 2.0 * PI / n as f64,
            Geometry::Box { n, half_width } => 2.0 * half_width / n as f64,
            Geometry::SinePair { n } => PI / (n as f64 + 1.0),
            Geometry::Points { .. } => 1.0,
        }
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let dx = self.spacing();
        match *self {
            Geometry::Periodic { dim: 1, .. } => [idx as f64 * dx, 0.0],
            Geometry::Periodic { n, .. } => [(idx / n) as f64 * dx, (idx % n) as f64 * dx],
            Geometry::Box { half_width, .. } => [-half_width + idx as f64 * dx, 0.0],
            Geometry::SinePair { n } => [((idx % n) + 1) as f64 * dx, 0.0],
            Geometry::Points { .. } => [idx as f64, 0.0],
        }
    }

    /// Squared distance to the domain centre, periodic where the domain is periodic.
    pub fn dist_sq_to_centre(&self, idx: usize) -> f64 {
        let x = self.point(idx);
        match *self {
            Geometry::Periodic { dim, .. } => (0..dim).map(|a| (x[a] - PI).powi(2)).sum(),
            Geometry::Box { .. } => x[0] * x[0],
            Geometry::SinePair { .. } => (x[0] - PI / 2.0).powi(2),
            Geometry::Points { .. } => 0.0,
        }
    }

    /// Index of the grid point at (or next to) the domain centre.
    pub fn centre_index(&self) -> usize {
        match *self {
            Geometry::Periodic { dim: 1, n } => n / 2,
            Geometry::Periodic { n, .. } => (n / 2) * n + n / 2,
            Geometry::Box { n, .. } => n / 2,
            Geometry::SinePair { n } => n / 2,
            Geometry::Points { .. } => 0,
        }
    }

    pub fn lp_norm(&self, v: &[f64], p: f64) -> f64 {
        lp_norm(v, p, self.cell_volume())
    }
}

/// Serde helper for Lebesgue exponents: numbers or `"inf"`.
pub mod exponent {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
        if p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*p)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| de::Error::custom(format!("invalid exponent {t:?}"))),
            },
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(p: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match p {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}
