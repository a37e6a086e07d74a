//! Rotating-frame Hamiltonian `H = K + U0 + U1 + U2` and its derivatives.
//!
//! The potentials are evaluated in the factored form
//! `U = −N / (|q − q_m| |q − q̄_m|)`, which is algebraically identical to the
//! square-root form `−√2 N / (2 √(D² − 2N²))` but does not cancel near the
//! primaries.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::charts::{cartesian_from_polar, dist2, PlanarPhaseState, PolarPosition};
use crate::consts::{L1_ENERGY, QBAR_M1, QBAR_M2, Q_M1, Q_M2, SINGULARITY_GUARD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerms {
    pub k: f64,
    pub u0: f64,
    pub u1: f64,
    pub u2: f64,
    pub h: f64,
}

/// Potential split into the centrifugal correction and the two attractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerms {
    pub u0: f64,
    pub u1: f64,
    pub u2: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BelowL1,
    AtL1,
    AboveL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySpec {
    pub c: f64,
    pub regime: Regime,
}

impl EnergySpec {
    pub fn new(c: f64) -> Self {
        let regime = if c == L1_ENERGY {
            Regime::AtL1
        } else if c < L1_ENERGY {
            Regime::BelowL1
        } else {
            Regime::AboveL1
        };
        Self { c, regime }
    }
}

/// Which primary a region, chart or orbit belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primary {
    M1,
    M2,
}

impl Primary {
    pub fn position(self) -> [f64; 2] {
        match self {
            Primary::M1 => Q_M1,
            Primary::M2 => Q_M2,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Primary::M1 => Primary::M2,
            Primary::M2 => Primary::M1,
        }
    }
}

fn guard(q: [f64; 2]) -> Result<()> {
    for c in [Q_M1, Q_M2, QBAR_M1, QBAR_M2] {
        if dist2(q, c) < SINGULARITY_GUARD {
            return Err(Error::Collision { q1: q[0], q2: q[1] });
        }
    }
    if !(q[0].is_finite() && q[1].is_finite()) {
        return Err(Error::Collision { q1: q[0], q2: q[1] });
    }
    Ok(())
}

fn conformal(q: [f64; 2]) -> f64 {
    q[0] * q[0] + q[1] * q[1] + 1.0
}

/// Numerators of the two attraction terms: `(N1, N2)`, the first belonging
/// to the second primary.
fn numerators(q: [f64; 2]) -> (f64, f64) {
    let half = (q[0] * q[0] + q[1] * q[1] - 1.0) / 2.0;
    (q[0] - half, -q[0] - half)
}

pub fn potential(q: [f64; 2]) -> Result<PotentialTerms> {
    guard(q)?;
    let d = conformal(q);
    let a = d - 1.0;
    let u0 = -2.0 * a / (d * d);
    let (n1, n2) = numerators(q);
    let u1 = -n1 / (dist2(q, Q_M2) * dist2(q, QBAR_M2));
    let u2 = -n2 / (dist2(q, Q_M1) * dist2(q, QBAR_M1));
    Ok(PotentialTerms { u0, u1, u2, u: u0 + u1 + u2 })
}

pub fn potential_value(q: [f64; 2]) -> Result<f64> {
    potential(q).map(|t| t.u)
}

/// Gradients of `U0`, `U1`, `U2` in that order.
pub fn potential_term_gradients(q: [f64; 2]) -> Result<[[f64; 2]; 3]> {
    guard(q)?;
    let d = conformal(q);
    let a = d - 1.0;
    let g0 = -4.0 * (1.0 - a) / (d * d * d);
    let grad0 = [g0 * q[0], g0 * q[1]];

    let attraction = |n: f64, dn: [f64; 2], ca: [f64; 2], cb: [f64; 2]| {
        let da = dist2(q, ca);
        let db = dist2(q, cb);
        let prod = da * db;
        let mut g = [0.0; 2];
        for i in 0..2 {
            let dda = (q[i] - ca[i]) / da;
            let ddb = (q[i] - cb[i]) / db;
            g[i] = -dn[i] / prod + n * (dda / da + ddb / db) / prod;
        }
        g
    };
    let (n1, n2) = numerators(q);
    let grad1 = attraction(n1, [1.0 - q[0], -q[1]], Q_M2, QBAR_M2);
    let grad2 = attraction(n2, [-1.0 - q[0], -q[1]], Q_M1, QBAR_M1);
    Ok([grad0, grad1, grad2])
}

pub fn grad_potential(q: [f64; 2]) -> Result<[f64; 2]> {
    let g = potential_term_gradients(q)?;
    Ok([g[0][0] + g[1][0] + g[2][0], g[0][1] + g[1][1] + g[2][1]])
}

/// Momentum shift of the completed square: `K = |D p + shift|² / 8`.
pub fn kinetic_shift(q: [f64; 2]) -> [f64; 2] {
    let d = conformal(q);
    [4.0 * q[1] / d, -4.0 * q[0] / d]
}

/// The vector `f = D p + shift` with `K = |f|²/8`.
pub fn kinetic_vector(state: &PlanarPhaseState) -> [f64; 2] {
    let d = conformal(state.q());
    let s = kinetic_shift(state.q());
    [d * state.p1 + s[0], d * state.p2 + s[1]]
}

/// Inverse of [`kinetic_vector`] at fixed position.
pub fn momentum_from_kinetic_vector(q: [f64; 2], f: [f64; 2]) -> [f64; 2] {
    let d = conformal(q);
    let s = kinetic_shift(q);
    [(f[0] - s[0]) / d, (f[1] - s[1]) / d]
}

pub fn kinetic(state: &PlanarPhaseState) -> f64 {
    let f = kinetic_vector(state);
    (f[0] * f[0] + f[1] * f[1]) / 8.0
}

pub fn eval_h(state: &PlanarPhaseState) -> Result<HamiltonianTerms> {
    let pot = potential(state.q())?;
    let k = kinetic(state);
    Ok(HamiltonianTerms { k, u0: pot.u0, u1: pot.u1, u2: pot.u2, h: k + pot.u })
}

pub fn h_value(state: &PlanarPhaseState) -> Result<f64> {
    eval_h(state).map(|t| t.h)
}

/// The Hamiltonian assembled as `H1 + H2 + U1 + U2` with the square-root form
/// of the attractions; an independent evaluation path for cross-checks.
pub fn eval_h_unsquared(state: &PlanarPhaseState) -> Result<f64> {
    guard(state.q())?;
    let (q1, q2, p1, p2) = (state.q1, state.q2, state.p1, state.p2);
    let d = conformal(state.q());
    let h1 = d * d * (p1 * p1 + p2 * p2) / 8.0;
    let h2 = q2 * p1 - q1 * p2;
    let root_form = |n: f64| {
        let m = SQRT_2 * n;
        -m / (2.0 * (d * d - m * m).sqrt())
    };
    let (n1, n2) = numerators(state.q());
    Ok(h1 + h2 + root_form(n1) + root_form(n2))
}

pub fn grad_h(state: &PlanarPhaseState) -> Result<[f64; 4]> {
    let gu = grad_potential(state.q())?;
    let (q1, q2, p1, p2) = (state.q1, state.q2, state.p1, state.p2);
    let d = conformal(state.q());
    let d2 = d * d;
    let f = kinetic_vector(state);
    let df1 = [
        2.0 * q1 * p1 - 8.0 * q1 * q2 / d2,
        2.0 * q2 * p1 + 4.0 / d - 8.0 * q2 * q2 / d2,
    ];
    let df2 = [
        2.0 * q1 * p2 - 4.0 / d + 8.0 * q1 * q1 / d2,
        2.0 * q2 * p2 + 8.0 * q1 * q2 / d2,
    ];
    Ok([
        (f[0] * df1[0] + f[1] * df2[0]) / 4.0 + gu[0],
        (f[0] * df1[1] + f[1] * df2[1]) / 4.0 + gu[1],
        f[0] * d / 4.0,
        f[1] * d / 4.0,
    ])
}

/// Hamilton's equations for `ω = Σ dpᵢ ∧ dqᵢ`: `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q`.
pub fn vector_field(state: &PlanarPhaseState) -> Result<[f64; 4]> {
    let g = grad_h(state)?;
    Ok([g[2], g[3], -g[0], -g[1]])
}

pub fn eval_u_polar(pos: PolarPosition) -> Result<PotentialTerms> {
    if pos.rho < SINGULARITY_GUARD {
        return Err(Error::Collision { q1: Q_M1[0], q2: Q_M1[1] });
    }
    potential(cartesian_from_polar(pos, Q_M1))
}

/// `∂ρ` of each potential term (polar chart about the first primary),
/// returned as `(∂ρU0, ∂ρU1, ∂ρU2, ∂ρU)`.
pub fn radial_derivatives(pos: PolarPosition) -> Result<[f64; 4]> {
    if pos.rho < SINGULARITY_GUARD {
        return Err(Error::Collision { q1: Q_M1[0], q2: Q_M1[1] });
    }
    let q = cartesian_from_polar(pos, Q_M1);
    let g = potential_term_gradients(q)?;
    let (s, c) = pos.theta.sin_cos();
    let r: Vec<f64> = g.iter().map(|gi| gi[0] * c + gi[1] * s).collect();
    Ok([r[0], r[1], r[2], r[0] + r[1] + r[2]])
}

pub fn radial_derivative(pos: PolarPosition) -> Result<f64> {
    radial_derivatives(pos).map(|r| r[3])
}

/// The polar potential terms exactly as typeset, with the unbalanced
/// parentheses closed after `(√2 − 1)`. The third term's numerator lacks the
/// factor `√2` on `(√2 − 1) − ρ cos θ`; see the unit tests.
pub fn typeset_polar_terms(pos: PolarPosition) -> PotentialTerms {
    let s = SQRT_2 - 1.0;
    let (sn, cs) = pos.theta.sin_cos();
    let rho = pos.rho;
    let x = rho * cs - s;
    let a = x * x + rho * rho * sn * sn;
    let u0 = -(2.0 * rho * rho * sn * sn + 2.0 * x * x) / ((a + 1.0) * (a + 1.0));
    let n1 = SQRT_2 * x - SQRT_2 * (a - 1.0) / 2.0;
    let u1 = -n1 / (2.0 * ((a + 1.0).powi(2) - n1 * n1).sqrt());
    let n2_printed = s - rho * cs - SQRT_2 * (a - 1.0) / 2.0;
    let n2_root = -SQRT_2 * x - SQRT_2 * (a - 1.0) / 2.0;
    let u2 = -n2_printed / (2.0 * ((a + 1.0).powi(2) - n2_root * n2_root).sqrt());
    PotentialTerms { u0, u1, u2, u: u0 + u1 + u2 }
}

pub fn lagrange_point_data() -> (PlanarPhaseState, f64) {
    (PlanarPhaseState::ORIGIN, L1_ENERGY)
}

/// Radius of the Hill region of `c` along the ray `θ = 0` from the first
/// primary towards the origin, found by bisection on `U(ρ, 0) = c`.
pub fn axis_turning_radius(c: f64) -> Option<f64> {
    let s = crate::consts::S;
    let f = |rho: f64| eval_u_polar(PolarPosition::new(rho, 0.0)).map(|u| u.u - c).ok();
    let (mut lo, mut hi) = (1e-9, s);
    if f(lo)? > 0.0 || f(hi)? < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::{POLE_RESIDUE, S};
    use std::f64::consts::PI;

    #[test]
    fn l1_energy_and_terms() {
        let t = eval_h(&PlanarPhaseState::ORIGIN).unwrap();
        assert!((t.h + 1.0).abs() < 1e-15);
        assert_eq!(t.k, 0.0);
        assert_eq!(t.u0, 0.0);
        assert!((t.u1 + 0.5).abs() < 1e-15 && (t.u2 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn kinetic_at_origin_is_plain_quadratic() {
        // at q = 0 the conformal factor is 1 and both shifts vanish
        let t = eval_h(&PlanarPhaseState::new(0.0, 0.0, 2.0, 0.0)).unwrap();
        assert!((t.k - 0.5).abs() < 1e-15);
        assert!((t.h + 0.5).abs() < 1e-15);
    }

    #[test]
    fn origin_is_critical() {
        let g = grad_h(&PlanarPhaseState::ORIGIN).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn collision_is_refused_and_potential_diverges() {
        assert!(matches!(potential(Q_M1), Err(Error::Collision { .. })));
        let u = potential_value([-S + 1e-9, 0.0]).unwrap();
        assert!(u < -1e8);
    }

    #[test]
    fn boundary_point_of_polar_chart() {
        let u = eval_u_polar(PolarPosition::new(S, 0.0)).unwrap();
        assert!((u.u + 1.0).abs() < 1e-15);
        let u_pi = eval_u_polar(PolarPosition::new(S, PI)).unwrap();
        assert!(u_pi.u > u.u);
    }

    #[test]
    fn pole_residue_of_attraction() {
        let r = 1e-7;
        let u2 = eval_u_polar(PolarPosition::new(r, 1.0)).unwrap().u2;
        assert!((r * u2 + POLE_RESIDUE).abs() < 1e-6);
    }

    #[test]
    fn typeset_polar_terms_match_except_third() {
        // the first two printed terms agree with the Cartesian composition;
        // the printed third term does not (missing √2 on the linear part)
        for &(rho, th) in &[(0.1, 0.3), (0.3, 2.0), (0.2, 4.0)] {
            let pos = PolarPosition::new(rho, th);
            let a = eval_u_polar(pos).unwrap();
            let b = typeset_polar_terms(pos);
            assert!((a.u0 - b.u0).abs() < 1e-13);
            assert!((a.u1 - b.u1).abs() < 1e-13);
            assert!((a.u2 - b.u2).abs() > 1e-3);
        }
    }

    #[test]
    fn turning_radius_at_critical_energy_is_the_origin() {
        let r = axis_turning_radius(-1.0).unwrap();
        assert!((r - S).abs() < 1e-6);
    }
}
