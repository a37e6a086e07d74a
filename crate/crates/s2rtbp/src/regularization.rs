//! Moser-type regularization. The Kepler problem on the sphere (primary at
//! the chart origin) is handled by `K` and `Q`; the restricted problem near
//! the first primary by `E = (H − k)|q − q_m1|` and its lift `Ẽ = |η|f − g`
//! to the cotangent bundle of the regularizing sphere.

use std::f64::consts::{SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::{dot3, flip, flip_position, moser_lift, moser_project, norm3, FlipState, PlanarPhaseState, SphereCotangentState};
use crate::consts::{QBAR_M1, Q_M1, S, SINGULARITY_GUARD};
use crate::error::{Error, Result};
use crate::hamiltonian::h_value;
use crate::report::{reduce_max, reduce_min, ScanReport};

/// Tolerance on the constraint manifold accepted by the regularized
/// Hamiltonians.
pub const CONSTRAINT_GATE: f64 = 1e-9;

fn check(s: &SphereCotangentState) -> Result<()> {
    s.check_constraints(CONSTRAINT_GATE)
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

// ---------------------------------------------------------------------------
// Kepler problem on the sphere

/// `H = (|q|²+1)²|p|²/8 − (1−|q|²)/(2|q|) + q2 p1 − q1 p2`.
pub fn kepler_h(state: &PlanarPhaseState) -> Result<f64> {
    let r = norm2(state.q());
    if r < SINGULARITY_GUARD {
        return Err(Error::Collision { q1: state.q1, q2: state.q2 });
    }
    let r2 = r * r;
    let p2 = state.p1 * state.p1 + state.p2 * state.p2;
    Ok((r2 + 1.0).powi(2) * p2 / 8.0 - (1.0 - r2) / (2.0 * r) + state.q2 * state.p1 - state.q1 * state.p2)
}

/// The rescaled Kepler Hamiltonian `K = (H − k)|q|` in flip coordinates
/// `p = −x`, `q = y`.
pub fn kepler_k(f: &FlipState, k: f64) -> f64 {
    let x2 = f.x[0] * f.x[0] + f.x[1] * f.x[1];
    let r = norm2(f.y);
    x2 * r.powi(5) / 8.0 + x2 * r.powi(3) / 4.0 + r * r / 2.0 + (x2 / 8.0 + f.y[0] * f.x[1] - f.y[1] * f.x[0] - k) * r - 0.5
}

fn wedge(s: &SphereCotangentState) -> f64 {
    s.xi[2] * s.eta[1] - s.xi[1] * s.eta[2]
}

/// `f` of the Kepler problem, so that `K = |η| f − 1/2` on lifted states.
pub fn kepler_f(s: &SphereCotangentState, k: f64) -> f64 {
    let (a, b) = (1.0 + s.xi[0], 1.0 - s.xi[0]);
    let n = s.eta_norm();
    a * b.powi(4) * n.powi(4) / 8.0 + a * b * b * n * n / 4.0 + b * b * n / 2.0 + a / 8.0 + b * wedge(s) - k * b
}

/// `η ∂η f` for the Kepler `f`.
pub fn kepler_eta_df(s: &SphereCotangentState) -> f64 {
    let (a, b) = (1.0 + s.xi[0], 1.0 - s.xi[0]);
    let n = s.eta_norm();
    a * b.powi(4) * n.powi(4) / 2.0 + a * b * b * n * n / 2.0 + b * b * n / 2.0 + b * wedge(s)
}

/// `Q = |η|² f² / 2`.
pub fn kepler_q(s: &SphereCotangentState, k: f64) -> Result<f64> {
    check(s)?;
    let n = s.eta_norm();
    let f = kepler_f(s, k);
    Ok(0.5 * n * n * f * f)
}

/// `X(Q) = η∂η Q = |η|²f² + |η|² f η∂η f`.
pub fn kepler_xq(s: &SphereCotangentState, k: f64) -> Result<f64> {
    check(s)?;
    let n = s.eta_norm();
    let f = kepler_f(s, k);
    Ok(n * n * f * f + n * n * f * kepler_eta_df(s))
}

/// `d/dλ Q(ξ, λη)` at `λ = 1` by central differences.
pub fn kepler_xq_fd(s: &SphereCotangentState, k: f64, h: f64) -> f64 {
    let q = |l: f64| {
        let st = SphereCotangentState::new(s.xi, [s.eta[0] * l, s.eta[1] * l, s.eta[2] * l]);
        let n = st.eta_norm();
        let f = kepler_f(&st, k);
        0.5 * n * n * f * f
    };
    (q(1.0 + h) - q(1.0 - h)) / (2.0 * h)
}

/// Solves `K = 0` for `|x|` along random directions of `x` at random `y`
/// and returns the largest `|Q(lift) − 1/8|`.
pub fn kepler_level_check(seed: u64, n: usize, k: f64) -> Result<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut solved = 0;
    for _ in 0..n {
        let r: f64 = rng.random_range(1e-3..1.0);
        let (ty, tx): (f64, f64) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
        let y = [r * ty.cos(), r * ty.sin()];
        let u = [tx.cos(), tx.sin()];
        // K = A|x|² + B|x| + C along the ray x = |x| u.
        let a = r.powi(5) / 8.0 + r.powi(3) / 4.0 + r / 8.0;
        let b = r * (y[0] * u[1] - y[1] * u[0]);
        let c = r * r / 2.0 - k * r - 0.5;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            continue;
        }
        let m = (-b + disc.sqrt()) / (2.0 * a);
        if m <= 0.0 {
            continue;
        }
        let fs = FlipState::new([m * u[0], m * u[1]], y);
        let q = kepler_q(&moser_lift(&fs), k)?;
        worst = worst.max((q - 0.125).abs());
        solved += 1;
    }
    Ok((solved, worst))
}

// ---------------------------------------------------------------------------
// Restricted problem

/// Which terms of the restricted Hamiltonian are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subproblem {
    #[default]
    Full,
    /// Drops the rotation terms and the second primary, leaving the first
    /// primary's Kepler problem on the sphere.
    Kepler,
}

/// `E = (H − k)|y|` written out in flip coordinates about the first primary.
pub fn restricted_e(f: &FlipState, k: f64) -> Result<f64> {
    let y = f.y;
    let x = f.x;
    let q = [y[0] + Q_M1[0], y[1]];
    let d = q[0] * q[0] + q[1] * q[1] + 1.0;
    let x2 = x[0] * x[0] + x[1] * x[1];
    let r = norm2(y);
    let da = norm2([y[0] + 2.0 * Q_M1[0], y[1]]);
    let db = norm2([y[0] + Q_M1[0] + QBAR_M1[0], y[1]]);
    let dg = norm2([y[0] + Q_M1[0] - QBAR_M1[0], y[1]]);
    if da < SINGULARITY_GUARD || db < SINGULARITY_GUARD || dg < SINGULARITY_GUARD {
        return Err(Error::DenominatorUnderflow { term: "restricted E" });
    }
    let half = (q[0] * q[0] + q[1] * q[1] - 1.0) / 2.0;
    Ok(d * d * x2 * r / 8.0 + (-y[1] * x[0] + q[0] * x[1] - k) * r - (q[0] - half) * r / (da * db) - (-q[0] - half) / dg)
}

/// Value and `y`-gradient of a function of the flip position.
#[derive(Debug, Clone, Copy)]
struct YJet {
    v: f64,
    g: [f64; 2],
}

/// `P = D²/8` with `D = |y + q_m1|² + 1`.
fn jet_p(y: [f64; 2]) -> YJet {
    let q = [y[0] + Q_M1[0], y[1]];
    let d = q[0] * q[0] + q[1] * q[1] + 1.0;
    YJet { v: d * d / 8.0, g: [d * q[0] / 2.0, d * q[1] / 2.0] }
}

/// Second-primary term `N1 / (|y + 2q_m1| |y + q_m1 + q̄_m1|)`.
fn jet_r1(y: [f64; 2]) -> Result<YJet> {
    let a = [y[0] + 2.0 * Q_M1[0], y[1]];
    let b = [y[0] + Q_M1[0] + QBAR_M1[0], y[1]];
    let (da, db) = (norm2(a), norm2(b));
    if da < SINGULARITY_GUARD || db < SINGULARITY_GUARD {
        return Err(Error::DenominatorUnderflow { term: "second primary" });
    }
    let n = SQRT_2 * y[0] - 0.5 * (y[0] * y[0] + y[1] * y[1]);
    let dn = [SQRT_2 - y[0], -y[1]];
    let den = da * db;
    let v = n / den;
    let mut g = [0.0; 2];
    for i in 0..2 {
        g[i] = dn[i] / den - v * (a[i] / (da * da) + b[i] / (db * db));
    }
    Ok(YJet { v, g })
}

/// Numerator constant of `g`; the typeset display carries `√2 − 1` instead.
const G_CONSTANT: f64 = 2.0 * SQRT_2 - 2.0;

/// `g = N2 / |y + q_m1 − q̄_m1|`, with the numerator constant as a parameter.
fn jet_g(y: [f64; 2], constant: f64) -> Result<(YJet, f64)> {
    let w = [y[0] + Q_M1[0] - QBAR_M1[0], y[1]];
    let dg = norm2(w);
    if dg < SINGULARITY_GUARD {
        return Err(Error::DenominatorUnderflow { term: "antipode" });
    }
    let n = (SQRT_2 - 2.0) * y[0] - 0.5 * (y[0] * y[0] + y[1] * y[1]) + constant;
    let dn = [SQRT_2 - 2.0 - y[0], -y[1]];
    let v = n / dg;
    let d3 = dg * dg * dg;
    Ok((YJet { v, g: [dn[0] / dg - n * w[0] / d3, dn[1] / dg - n * w[1] / d3] }, n / d3))
}

/// All pieces of `Ẽ = |η| f − g` and of `X(Ẽ) = |η|f + |η| η∂ηf − η∂ηg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedParts {
    pub e_tilde: f64,
    pub f: f64,
    pub g: f64,
    pub eta_norm: f64,
    pub eta_df: f64,
    pub eta_dg: f64,
    pub x_e: f64,
    /// `(1 + ξ0) D / 4`, the bounded factor of the first summand of `η∂ηf`.
    pub c0_factor: f64,
    /// `η∂η` of the second-primary summand of `f`.
    pub second_primary_eta_d: f64,
    /// `N2 / |y + q_m1 − q̄_m1|³`.
    pub c2_factor: f64,
}

struct Pieces {
    parts: RestrictedParts,
    grad: [f64; 6],
}

fn pieces(s: &SphereCotangentState, k: f64, sub: Subproblem, with_grad: bool) -> Result<Pieces> {
    let (xi, eta) = (s.xi, s.eta);
    let y = flip_position(s);
    let n = norm3(&eta);
    let (ap, am) = (1.0 + xi[0], 1.0 - xi[0]);
    let w = wedge(s);
    let p = jet_p(y);
    let (g, c2_factor) = jet_g(y, G_CONSTANT)?;
    let (f, gf, df_xi, df_eta, r1v, r1_eta) = match sub {
        Subproblem::Full => {
            let r1 = jet_r1(y)?;
            let f = ap * p.v + am * (w - k) - S * xi[2] - am * r1.v;
            let gf = [ap * p.g[0] - am * r1.g[0], ap * p.g[1] - am * r1.g[1]];
            let df_xi = [p.v - (w - k) + r1.v, -am * eta[2], am * eta[1] - S];
            let df_eta = [0.0, am * xi[2], -am * xi[1]];
            let r1_eta = am * (r1.g[0] * y[0] + r1.g[1] * y[1]);
            (f, gf, df_xi, df_eta, r1.v, r1_eta)
        }
        Subproblem::Kepler => {
            let f = ap * p.v - am * k;
            let gf = [ap * p.g[0], ap * p.g[1]];
            (f, gf, [p.v + k, 0.0, 0.0], [0.0; 3], 0.0, 0.0)
        }
    };
    let _ = r1v;
    let explicit_eta_df = dot3(&eta, &df_eta);
    let eta_df = explicit_eta_df + gf[0] * y[0] + gf[1] * y[1];
    let eta_dg = g.g[0] * y[0] + g.g[1] * y[1];
    let e_tilde = n * f - g.v;
    let x_e = n * f + n * eta_df - eta_dg;
    let q = [y[0] + Q_M1[0], y[1]];
    let d = q[0] * q[0] + q[1] * q[1] + 1.0;
    let parts = RestrictedParts {
        e_tilde,
        f,
        g: g.v,
        eta_norm: n,
        eta_df,
        eta_dg,
        x_e,
        c0_factor: ap * d / 4.0,
        second_primary_eta_d: r1_eta,
        c2_factor,
    };
    let mut grad = [0.0; 6];
    if with_grad {
        // ∂y/∂ξ and ∂y/∂η, indexed [component of y][variable].
        let dy_dxi = [[-eta[1], eta[0], 0.0], [-eta[2], 0.0, eta[0]]];
        let dy_deta = [[xi[1], am, 0.0], [xi[2], 0.0, am]];
        let unit = if n > 0.0 { [eta[0] / n, eta[1] / n, eta[2] / n] } else { [0.0; 3] };
        for j in 0..3 {
            let fy = gf[0] * dy_dxi[0][j] + gf[1] * dy_dxi[1][j];
            let gy = g.g[0] * dy_dxi[0][j] + g.g[1] * dy_dxi[1][j];
            grad[j] = n * (df_xi[j] + fy) - gy;
            let fy = gf[0] * dy_deta[0][j] + gf[1] * dy_deta[1][j];
            let gy = g.g[0] * dy_deta[0][j] + g.g[1] * dy_deta[1][j];
            grad[3 + j] = unit[j] * f + n * (df_eta[j] + fy) - gy;
        }
    }
    Ok(Pieces { parts, grad })
}

/// `Ẽ`, its `f/g` split and `X(Ẽ)` from the closed-form expressions.
pub fn restricted_parts(s: &SphereCotangentState, k: f64, sub: Subproblem) -> Result<RestrictedParts> {
    check(s)?;
    Ok(pieces(s, k, sub, false)?.parts)
}

/// Gradient of `Ẽ` in `ℝ⁶ = (ξ, η)`, using the Euclidean `|η|`.
pub fn etilde_gradient(s: &SphereCotangentState, k: f64, sub: Subproblem) -> Result<(f64, [f64; 6])> {
    let p = pieces(s, k, sub, true)?;
    Ok((p.parts.e_tilde, p.grad))
}

/// `Ẽ` with the constraint gate skipped, for finite differences off the
/// constraint manifold.
pub fn etilde_unchecked(s: &SphereCotangentState, k: f64, sub: Subproblem) -> Result<f64> {
    Ok(pieces(s, k, sub, false)?.parts.e_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtildeEvaluation {
    pub e_tilde: f64,
    pub f: f64,
    pub g: f64,
    /// `E ∘ moser_project`, absent at the projection point.
    pub pullback: Option<f64>,
    /// The display as typeset, including its `g` numerator constant.
    pub typeset: f64,
}

/// The display's own `f`, assembled row by row.
fn typeset_f(s: &SphereCotangentState, k: f64) -> Result<f64> {
    let (xi, eta) = (s.xi, s.eta);
    let y = flip_position(s);
    let (ap, am) = (1.0 + xi[0], 1.0 - xi[0]);
    let n = norm3(&eta);
    let qsq = am * am * n * n - (2.0 * SQRT_2 - 2.0) * y[0] + 3.0 - 2.0 * SQRT_2;
    let da = norm2([y[0] + 2.0 * Q_M1[0], y[1]]);
    let db = norm2([y[0] + Q_M1[0] + QBAR_M1[0], y[1]]);
    if da < SINGULARITY_GUARD || db < SINGULARITY_GUARD {
        return Err(Error::DenominatorUnderflow { term: "second primary" });
    }
    Ok(ap / 8.0 * qsq * qsq + ap / 4.0 * qsq + 0.25 + am * (wedge(s) - k - 0.125)
        - xi[2] * (SQRT_2 - 1.0)
        - am * (SQRT_2 * y[0] - 0.5 * am * am * n * n) / (da * db))
}

pub fn restricted_etilde(s: &SphereCotangentState, k: f64) -> Result<EtildeEvaluation> {
    let parts = restricted_parts(s, k, Subproblem::Full)?;
    let pullback = match moser_project(s) {
        Ok(fs) => Some(restricted_e(&fs, k)?),
        Err(_) => None,
    };
    let (g_printed, _) = jet_g(flip_position(s), SQRT_2 - 1.0)?;
    let typeset = parts.eta_norm * typeset_f(s, k)? - g_printed.v;
    Ok(EtildeEvaluation { e_tilde: parts.e_tilde, f: parts.f, g: parts.g, pullback, typeset })
}

/// `X(Ẽ) = η∂ηẼ`.
pub fn restricted_xetilde(s: &SphereCotangentState, k: f64) -> Result<f64> {
    restricted_parts(s, k, Subproblem::Full).map(|p| p.x_e)
}

/// `d/dλ Ẽ(ξ, λη)` at `λ = 1` by central differences.
pub fn xetilde_fd(s: &SphereCotangentState, k: f64, h: f64) -> Result<f64> {
    let scaled = |l: f64| SphereCotangentState::new(s.xi, [s.eta[0] * l, s.eta[1] * l, s.eta[2] * l]);
    let plus = etilde_unchecked(&scaled(1.0 + h), k, Subproblem::Full)?;
    let minus = etilde_unchecked(&scaled(1.0 - h), k, Subproblem::Full)?;
    Ok((plus - minus) / (2.0 * h))
}

// ---------------------------------------------------------------------------
// Ray sampling of level sets

/// Orthonormal basis of the tangent plane at `ξ`.
pub fn tangent_basis(xi: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let v = if xi[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [0.0, 1.0, 0.0] };
    let d = dot3(&v, &xi);
    let mut a = [v[0] - d * xi[0], v[1] - d * xi[1], v[2] - d * xi[2]];
    let na = norm3(&a);
    for c in &mut a {
        *c /= na;
    }
    let b = [
        xi[1] * a[2] - xi[2] * a[1],
        xi[2] * a[0] - xi[0] * a[2],
        xi[0] * a[1] - xi[1] * a[0],
    ];
    (a, b)
}

/// Point of the sphere at polar angle `phi` from the projection point
/// `(1, 0, 0)` and azimuth `psi`.
pub fn cap_point(phi: f64, psi: f64) -> [f64; 3] {
    [phi.cos(), phi.sin() * psi.cos(), phi.sin() * psi.sin()]
}

pub fn ray_state(xi: [f64; 3], chi: f64, t: f64) -> SphereCotangentState {
    let (a, b) = tangent_basis(xi);
    let (s, c) = chi.sin_cos();
    SphereCotangentState::new(xi, [t * (c * a[0] + s * b[0]), t * (c * a[1] + s * b[1]), t * (c * a[2] + s * b[2])])
}

/// Sign changes of `func` on a uniform grid of `(0, t_hi]`, refined by
/// bisection to `1e−12`. Sampling stops at the first failed evaluation.
pub fn ray_roots(func: impl Fn(f64) -> Option<f64>, t_hi: f64, samples: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev_t = t_hi * 1e-9;
    let Some(mut prev_v) = func(prev_t) else { return roots };
    for j in 1..=samples {
        let t = t_hi * j as f64 / samples as f64;
        let Some(v) = func(t) else { break };
        if prev_v == 0.0 {
            roots.push(prev_t);
        } else if prev_v * v < 0.0 {
            let (mut lo, mut hi, mut flo) = (prev_t, t, prev_v);
            while hi - lo > 1e-12 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                match func(mid) {
                    Some(fm) if fm * flo > 0.0 => {
                        lo = mid;
                        flo = fm;
                    }
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_v = v;
    }
    roots
}

/// Sampling of a cap around the projection point: `n_phi` polar rings up to
/// `phi_max` (the first ring is the projection point itself), `n_psi`
/// azimuths and `n_rays` fibre directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapGrid {
    pub phi_max: f64,
    pub n_phi: usize,
    pub n_psi: usize,
    pub n_rays: usize,
    pub ray_samples: usize,
}

impl CapGrid {
    pub fn base_points(&self) -> Vec<[f64; 3]> {
        let mut out = vec![[1.0, 0.0, 0.0]];
        for i in 1..=self.n_phi {
            let phi = self.phi_max * i as f64 / self.n_phi as f64;
            for j in 0..self.n_psi {
                out.push(cap_point(phi, TAU * j as f64 / self.n_psi as f64));
            }
        }
        out
    }

    pub fn chis(&self) -> Vec<f64> {
        (0..self.n_rays).map(|j| TAU * j as f64 / self.n_rays as f64).collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "cap phi<={:.6} rings={} x psi={} (+pole) x rays={} x t-samples={}",
            self.phi_max, self.n_phi, self.n_psi, self.n_rays, self.ray_samples
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeplerScan {
    pub k: f64,
    pub eps: f64,
    pub xq: ScanReport,
    pub max_eta: f64,
    pub min_f: f64,
    /// Largest `|Q − 1/8|` over the samples.
    pub level_error: f64,
}

/// `X(Q)` on `{Q = 1/8} ∩ {(1−ξ0)|η| < eps}` sampled along fibre rays.
pub fn kepler_scan(k: f64, eps: f64, grid: &CapGrid) -> Result<KeplerScan> {
    let bases = grid.base_points();
    let chis = grid.chis();
    let jobs: Vec<([f64; 3], f64)> = bases.iter().flat_map(|&b| chis.iter().map(move |&c| (b, c))).collect();
    let found: Vec<Vec<(SphereCotangentState, f64)>> = jobs
        .par_iter()
        .map(|&(xi, chi)| {
            let gap = 1.0 - xi[0];
            let t_hi = if gap > 0.0 { (eps / gap).min(64.0) } else { 64.0 };
            let h = |t: f64| {
                let st = ray_state(xi, chi, t);
                Some(t * kepler_f(&st, k) - 0.5)
            };
            ray_roots(h, t_hi, grid.ray_samples)
                .into_iter()
                .map(|t| ray_state(xi, chi, t))
                .filter(|st| (1.0 - st.xi[0]) * st.eta_norm() < eps)
                .map(|st| (st, chi))
                .collect()
        })
        .collect();
    let samples: Vec<SphereCotangentState> = found.into_iter().flatten().map(|(s, _)| s).collect();
    let mut rows = Vec::with_capacity(samples.len());
    for st in &samples {
        rows.push((kepler_xq(st, k)?, kepler_q(st, k)?, st));
    }
    let min = reduce_min(rows.iter().map(|(v, _, st)| (*v, vec![st.xi[0], st.xi[1], st.xi[2], st.eta_norm()])));
    let max_eta = reduce_max(samples.iter().map(|s| (s.eta_norm(), ()))).map_or(f64::NAN, |m| m.0);
    let min_f = reduce_min(samples.iter().map(|s| (kepler_f(s, k), ()))).map_or(f64::NAN, |m| m.0);
    let level_error = reduce_max(rows.iter().map(|(_, q, _)| ((q - 0.125).abs(), ()))).map_or(f64::NAN, |m| m.0);
    let xq = ScanReport::positivity("X(Q) on {Q=1/8}", grid.describe(), samples.len(), min);
    Ok(KeplerScan { k, eps, xq, max_eta, min_f, level_error })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictedScan {
    pub k: f64,
    pub eps: f64,
    pub xe: ScanReport,
    pub g_range: [f64; 2],
    pub min_f: f64,
    pub max_eta: f64,
    pub min_eta: f64,
    /// Measured stand-ins for the existence constants of the transversality
    /// estimate: `sup (1+ξ0)D/4`, `sup |η∂η[(1−ξ0)N1/(…)]| / eps` and
    /// `sup |N2|/|y + q_m1 − q̄_m1|³`.
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn near_collision_samples(k: f64, eps: f64, grid: &CapGrid) -> Vec<SphereCotangentState> {
    let bases = grid.base_points();
    let chis = grid.chis();
    let jobs: Vec<([f64; 3], f64)> = bases.iter().flat_map(|&b| chis.iter().map(move |&c| (b, c))).collect();
    jobs.par_iter()
        .map(|&(xi, chi)| {
            let gap = 1.0 - xi[0];
            let t_hi = if gap > 0.0 { (eps / gap).min(64.0) } else { 64.0 };
            let e = |t: f64| etilde_unchecked(&ray_state(xi, chi, t), k, Subproblem::Full).ok();
            ray_roots(e, t_hi, grid.ray_samples)
                .into_iter()
                .map(|t| ray_state(xi, chi, t))
                .filter(|st| (1.0 - st.xi[0]) * st.eta_norm() < eps)
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Bounds of the `f/g` split and `X(Ẽ)` on near-collision points of `{Ẽ = 0}`.
pub fn restricted_scan(k: f64, eps: f64, grid: &CapGrid) -> Result<RestrictedScan> {
    if k >= -1.0 {
        return Err(Error::EnergyOutOfRange { c: k, reason: "regularization requires k < -1" });
    }
    let samples = near_collision_samples(k, eps, grid);
    let mut parts = Vec::with_capacity(samples.len());
    for st in &samples {
        parts.push((restricted_parts(st, k, Subproblem::Full)?, st));
    }
    let min = reduce_min(parts.iter().map(|(p, st)| (p.x_e, vec![st.xi[0], st.xi[1], st.xi[2], p.eta_norm])));
    let ext = |f: &dyn Fn(&RestrictedParts) -> f64| {
        let lo = reduce_min(parts.iter().map(|(p, _)| (f(p), ()))).map_or(f64::NAN, |m| m.0);
        let hi = reduce_max(parts.iter().map(|(p, _)| (f(p), ()))).map_or(f64::NAN, |m| m.0);
        (lo, hi)
    };
    let g = ext(&|p| p.g);
    let eta = ext(&|p| p.eta_norm);
    Ok(RestrictedScan {
        k,
        eps,
        xe: ScanReport::positivity("X(E~) on near-collision {E~=0}", grid.describe(), samples.len(), min),
        g_range: [g.0, g.1],
        min_f: ext(&|p| p.f).0,
        max_eta: eta.1,
        min_eta: eta.0,
        c0: ext(&|p| p.c0_factor.abs()).1,
        c1: ext(&|p| p.second_primary_eta_d.abs()).1 / eps,
        c2: ext(&|p| p.c2_factor.abs()).1,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarShapeReport {
    pub k: f64,
    /// Minimum of `η∂ηẼ` at the located roots.
    pub derivative: ScanReport,
    pub rays: usize,
    pub no_crossing: usize,
    pub multiple_crossings: usize,
    /// Minimum of `Ẽ(ξ, 2tη̂)` over the roots `t`.
    pub doubled_min: f64,
}

/// Root structure of `t ↦ Ẽ(ξ, tη̂)` on rays of a cap grid, searched for
/// `|y| = t(1−ξ0) < √2 − 1`.
pub fn fiberwise_starshape_check(k: f64, grid: &CapGrid) -> Result<StarShapeReport> {
    if k >= -1.0 {
        return Err(Error::EnergyOutOfRange { c: k, reason: "regularization requires k < -1" });
    }
    let bases = grid.base_points();
    let chis = grid.chis();
    let jobs: Vec<([f64; 3], f64)> = bases.iter().flat_map(|&b| chis.iter().map(move |&c| (b, c))).collect();
    let per_ray: Vec<Vec<(f64, [f64; 3], f64)>> = jobs
        .par_iter()
        .map(|&(xi, chi)| {
            let gap = 1.0 - xi[0];
            let t_hi = if gap > 0.0 { (0.999 * S / gap).min(64.0) } else { 64.0 };
            let e = |t: f64| etilde_unchecked(&ray_state(xi, chi, t), k, Subproblem::Full).ok();
            ray_roots(e, t_hi, grid.ray_samples).into_iter().map(|t| (t, xi, chi)).collect()
        })
        .collect();
    let no_crossing = per_ray.iter().filter(|r| r.is_empty()).count();
    let multiple = per_ray.iter().filter(|r| r.len() > 1).count();
    let mut derivs = Vec::new();
    let mut doubled = Vec::new();
    for &(t, xi, chi) in per_ray.iter().flatten() {
        let st = ray_state(xi, chi, t);
        derivs.push((restricted_xetilde(&st, k)?, vec![xi[0], xi[1], xi[2], chi, t]));
        let twice = etilde_unchecked(&ray_state(xi, chi, 2.0 * t), k, Subproblem::Full).unwrap_or(f64::NAN);
        doubled.push((twice, ()));
    }
    let n = derivs.len();
    Ok(StarShapeReport {
        k,
        derivative: ScanReport::positivity("radial derivative at ray roots", grid.describe(), n, reduce_min(derivs)),
        rays: jobs.len(),
        no_crossing,
        multiple_crossings: multiple,
        doubled_min: reduce_min(doubled).map_or(f64::NAN, |m| m.0),
    })
}

// ---------------------------------------------------------------------------
// Identity checks on random states

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub samples: usize,
    pub k: f64,
    /// `max |E − (H − k)|y||`.
    pub e_vs_h: f64,
    /// `max |Ẽ − E|` over lifted states.
    pub etilde_vs_e: f64,
    /// `max |K − (H_kep − k)|q||`.
    pub k_vs_h: f64,
    /// `max |typeset Ẽ − Ẽ|`, the offset caused by the printed `g` constant.
    pub typeset_offset: f64,
    /// The same after putting the constant `2√2 − 2` back into the display.
    pub typeset_corrected: f64,
}

/// Random states with `|q − q_m1| ∈ (10⁻³, √2 − 1)` and `|p_i| ≤ 2`.
pub fn random_admissible_states(seed: u64, n: usize) -> Vec<PlanarPhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = rng.random_range(1e-3..S);
            let th = rng.random_range(0.0..TAU);
            PlanarPhaseState::new(
                Q_M1[0] + r * th.cos(),
                r * th.sin(),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            )
        })
        .collect()
}

pub fn pullback_identities(seed: u64, n: usize, k: f64) -> Result<IdentityReport> {
    let states = random_admissible_states(seed, n);
    let (mut e_h, mut et_e, mut k_h, mut ts, mut tsc): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for z in &states {
        let fs = flip(z, Q_M1);
        let e = restricted_e(&fs, k)?;
        let h = h_value(z)?;
        e_h = e_h.max((e - (h - k) * norm2(fs.y)).abs());
        let lifted = moser_lift(&fs);
        let ev = restricted_etilde(&lifted, k)?;
        et_e = et_e.max((ev.e_tilde - e).abs());
        ts = ts.max((ev.typeset - ev.e_tilde).abs());
        let y = flip_position(&lifted);
        let (g_printed, _) = jet_g(y, SQRT_2 - 1.0)?;
        let (g_true, _) = jet_g(y, G_CONSTANT)?;
        tsc = tsc.max((ev.typeset + g_printed.v - g_true.v - ev.e_tilde).abs());
        let kf = flip(z, [0.0, 0.0]);
        if norm2(kf.y) > SINGULARITY_GUARD {
            let hk = kepler_h(z)?;
            k_h = k_h.max((kepler_k(&kf, k) - (hk - k) * norm2(kf.y)).abs());
        }
    }
    Ok(IdentityReport { samples: n, k, e_vs_h: e_h, etilde_vs_e: et_e, k_vs_h: k_h, typeset_offset: ts, typeset_corrected: tsc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kepler_h_examples() {
        assert_eq!(kepler_h(&PlanarPhaseState::new(1.0, 0.0, 0.0, 0.0)).unwrap(), 0.0);
        assert!((kepler_h(&PlanarPhaseState::new(1.0, 0.0, 0.0, 1.0)).unwrap() + 0.5).abs() < 1e-15);
        assert!(kepler_h(&PlanarPhaseState::new(1e-8, 0.0, 0.3, 0.1)).unwrap() < -1e7);
        assert!(kepler_h(&PlanarPhaseState::ORIGIN).is_err());
    }

    #[test]
    fn kepler_k_examples() {
        assert_eq!(kepler_k(&FlipState::new([0.3, -0.2], [0.0, 0.0]), -2.0), -0.5);
        assert_eq!(kepler_k(&FlipState::new([0.0, 0.0], [1.0, 0.0]), -2.0), 2.0);
    }

    #[test]
    fn zero_section_value() {
        let s = SphereCotangentState::new([0.6, 0.8, 0.0], [0.0; 3]);
        let e = restricted_etilde(&s, -2.0).unwrap();
        assert!((e.e_tilde + (1.0 - SQRT_2 / 2.0)).abs() < 1e-15);
        assert!((kepler_q(&s, -2.0).unwrap()).abs() == 0.0);
    }

    #[test]
    fn gradient_matches_differences() {
        let st = moser_lift(&FlipState::new([0.7, -1.3], [0.05, 0.02]));
        for sub in [Subproblem::Full, Subproblem::Kepler] {
            let (_, g) = etilde_gradient(&st, -2.0, sub).unwrap();
            let z = st.to_array();
            for i in 0..6 {
                let h = 1e-6;
                let mut a = z;
                let mut b = z;
                a[i] += h;
                b[i] -= h;
                let fa = etilde_unchecked(&SphereCotangentState::from_array(&a), -2.0, sub).unwrap();
                let fb = etilde_unchecked(&SphereCotangentState::from_array(&b), -2.0, sub).unwrap();
                assert!(((fa - fb) / (2.0 * h) - g[i]).abs() < 1e-7, "component {i}");
            }
        }
    }

    #[test]
    fn ray_roots_find_single_crossing() {
        let r = ray_roots(|t| Some(t - 0.3), 1.0, 10);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.3).abs() < 1e-11);
        assert!(ray_roots(|t| Some(t + 1.0), 1.0, 10).is_empty());
    }
}
