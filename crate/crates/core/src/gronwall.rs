//! Discrete Gronwall inequality and the a-priori error constants.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::propagators::SmoothingProfile;

fn check_nonneg(name: &str, xs: &[f64]) -> Result<()> {
    if let Some(x) = xs.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return validation(format!("{name} must be finite and non-negative, found {x}"));
    }
    Ok(())
}

/// `B_n = (max_{j <= n} a_j) prod_{j < n} (1 + b_j)`, which dominates any `z` with
/// `z_0 <= a_0` and `z_n <= a_n + sum_{j < n} b_j z_j`.
///
/// `b` needs at least `a.len() - 1` entries; extra entries are ignored.
pub fn gronwall_bound(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_nonneg("a", a)?;
    check_nonneg("b", b)?;
    if b.len() + 1 < a.len() {
        return validation(format!(
            "need {} coefficients b_j, got {}",
            a.len().saturating_sub(1),
            b.len()
        ));
    }
    let mut out = Vec::with_capacity(a.len());
    let mut amax: f64 = 0.0;
    let mut prod = 1.0;
    for (n, &an) in a.iter().enumerate() {
        if n > 0 {
            prod *= 1.0 + b[n - 1];
        }
        amax = amax.max(an);
        out.push(amax * prod);
    }
    Ok(out)
}

/// The sequence attaining the hypothesis with equality: `z_0 = a_0`,
/// `z_n = a_n + sum_{j < n} b_j z_j`.
pub fn greedy_extremal(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut z: Vec<f64> = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    for (n, &an) in a.iter().enumerate() {
        if n > 0 {
            acc += b[n - 1] * z[n - 1];
        }
        z.push(an + acc);
    }
    z
}

/// Whether `z` satisfies the hypothesis up to a relative slack `tol`.
pub fn hypothesis_holds(a: &[f64], b: &[f64], z: &[f64], tol: f64) -> bool {
    let mut acc = 0.0;
    for n in 0..a.len() {
        if n > 0 {
            acc += b[n - 1] * z[n - 1];
        }
        let rhs = a[n] + acc;
        if z[n] > rhs + tol * rhs.abs().max(1.0) {
            return false;
        }
    }
    true
}

/// Inputs and derived constants of `||u_n - u(t_n)||_V <= C h^{s-1} Omega_W(h) ||f^{(s)}||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriConstants {
    pub m: f64,
    pub c_ell: f64,
    pub lipschitz: f64,
    pub s: usize,
    pub c_f: f64,
    /// `C_Omega <= ||rho_X||_{L^1(0,T)} = Omega(T)`.
    pub c_omega: f64,
    pub h: f64,
    pub h0: f64,
    pub omega_h: f64,
    pub omega_h0: f64,
    pub omega_w_h: f64,
    pub c_g1: f64,
    pub c_g2: f64,
    pub c: f64,
}

/// `C_F = max_i max(c_i, 1 - c_i)^{s-1} / (s-1)!`, the bound for
/// `|(t_n + c_i h - xi)^{s-1} / (s-1)!| <= C_F h^{s-1}` on `[t_n, t_{n+1}]`.
pub fn c_f(nodes: &[f64]) -> f64 {
    let s = nodes.len();
    let fact: f64 = (1..s).map(|k| k as f64).product();
    nodes
        .iter()
        .map(|&c| c.max(1.0 - c).powi(s as i32 - 1) / fact)
        .fold(0.0, f64::max)
}

/// The largest `h` with `Omega(h) C_ell s L <= 1/2`, preferring a member of `candidates`.
pub fn choose_h0(
    profile_x: &SmoothingProfile,
    c_ell: f64,
    s: usize,
    lipschitz: f64,
    candidates: &[f64],
) -> f64 {
    let ok = |h: f64| profile_x.omega(h) * c_ell * s as f64 * lipschitz <= 0.5;
    if let Some(h) = candidates.iter().cloned().filter(|&h| ok(h)).reduce(f64::max) {
        return h;
    }
    if lipschitz == 0.0 {
        return profile_x.t_max;
    }
    profile_x.omega_inverse(0.5 / (c_ell * s as f64 * lipschitz))
}

pub struct AprioriInputs<'a> {
    pub m: f64,
    pub c_ell: f64,
    pub lipschitz: f64,
    pub nodes: &'a [f64],
    pub profile_x: &'a SmoothingProfile,
    pub profile_w: &'a SmoothingProfile,
    pub horizon: f64,
    pub h: f64,
    pub h0: f64,
}

impl AprioriConstants {
    pub fn assemble(inp: &AprioriInputs<'_>) -> Self {
        let s = inp.nodes.len();
        let sf = s as f64;
        let c_f = c_f(inp.nodes);
        let c_omega = inp.profile_x.omega(inp.horizon);
        let omega_h = inp.profile_x.omega(inp.h);
        let omega_h0 = inp.profile_x.omega(inp.h0);
        let omega_w_h = inp.profile_w.omega(inp.h);
        let (m, cl, l) = (inp.m, inp.c_ell, inp.lipschitz);
        let c_g1 = 2.0 * sf * m * m * cl * l * m.max(omega_h0);
        let c_g2 = 2.0
            * (2.0 * cl * cl * l * sf * sf * c_f * (omega_h + m * c_omega)).max(m * cl * sf * c_f);
        let c = c_g2 * (c_g1 * c_omega + c_g1).exp();
        AprioriConstants {
            m,
            c_ell: cl,
            lipschitz: l,
            s,
            c_f,
            c_omega,
            h: inp.h,
            h0: inp.h0,
            omega_h,
            omega_h0,
            omega_w_h,
            c_g1,
            c_g2,
            c,
        }
    }
}

/// `C h^{s-1} Omega_W(h) ||f^{(s)}||_{L^1(W)}`.
pub fn apriori_error_bound(consts: &AprioriConstants, h: f64, f_norm: f64) -> f64 {
    if f_norm == 0.0 {
        return 0.0;
    }
    consts.c * h.powi(consts.s as i32 - 1) * consts.omega_w_h * f_norm
}

/// Left side of the step-size condition
/// `M C h^{s-1} Omega_W(h) ||f^{(s)}|| + Omega(h) (s C_ell + 1) max ||g|| <= r`.
pub fn strip_condition(consts: &AprioriConstants, f_norm: f64, g_max: f64) -> f64 {
    consts.m * apriori_error_bound(consts, consts.h, f_norm)
        + consts.omega_h * (consts.s as f64 * consts.c_ell + 1.0) * g_max
}
