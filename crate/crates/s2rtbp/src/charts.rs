//! Coordinate systems: the rotating stereographic chart, polar charts about a
//! primary, the momentum/position flip and Moser's lift to `T*S²`.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::consts::CONSTRAINT_TOL;
use crate::error::{Error, Result};

/// Point `(q1, q2, p1, p2)` of the rotating chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPhaseState {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PlanarPhaseState {
    pub const ORIGIN: Self = Self { q1: 0.0, q2: 0.0, p1: 0.0, p2: 0.0 };

    pub fn new(q1: f64, q2: f64, p1: f64, p2: f64) -> Self {
        Self { q1, q2, p1, p2 }
    }

    pub fn from_qp(q: [f64; 2], p: [f64; 2]) -> Self {
        Self::new(q[0], q[1], p[0], p[1])
    }

    pub fn from_array(z: [f64; 4]) -> Self {
        Self::new(z[0], z[1], z[2], z[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q1, self.q2, self.p1, self.p2]
    }

    pub fn q(&self) -> [f64; 2] {
        [self.q1, self.q2]
    }

    pub fn p(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Reflection across the `q2` axis, which swaps the two primaries.
    /// It preserves the Hamiltonian and reverses the symplectic form.
    pub fn mirrored(self) -> Self {
        Self::new(-self.q1, self.q2, self.p1, -self.p2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPosition {
    pub rho: f64,
    pub theta: f64,
}

impl PolarPosition {
    pub fn new(rho: f64, theta: f64) -> Self {
        Self { rho, theta: normalize_angle(theta) }
    }
}

/// Point of `T*S² ⊂ ℝ³ × ℝ³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereCotangentState {
    pub xi: [f64; 3],
    pub eta: [f64; 3],
}

impl SphereCotangentState {
    pub fn new(xi: [f64; 3], eta: [f64; 3]) -> Self {
        Self { xi, eta }
    }

    /// `(|ξ| − 1, ξ·η)`.
    pub fn constraint_residual(&self) -> (f64, f64) {
        (norm3(&self.xi) - 1.0, dot3(&self.xi, &self.eta))
    }

    pub fn check_constraints(&self, tol: f64) -> Result<()> {
        let (norm_gap, dot) = self.constraint_residual();
        if norm_gap.abs() > tol || dot.abs() > tol || !norm_gap.is_finite() || !dot.is_finite() {
            return Err(Error::OffConstraint { norm_gap, dot });
        }
        Ok(())
    }

    /// Normalise `ξ` and strip the normal component of `η`.
    pub fn projected(&self) -> Self {
        let n = norm3(&self.xi);
        let xi = [self.xi[0] / n, self.xi[1] / n, self.xi[2] / n];
        let d = dot3(&xi, &self.eta);
        let eta = [
            self.eta[0] - d * xi[0],
            self.eta[1] - d * xi[1],
            self.eta[2] - d * xi[2],
        ];
        Self { xi, eta }
    }

    pub fn eta_norm(&self) -> f64 {
        norm3(&self.eta)
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.xi[0], self.xi[1], self.xi[2], self.eta[0], self.eta[1], self.eta[2]]
    }

    pub fn from_array(z: &[f64]) -> Self {
        Self { xi: [z[0], z[1], z[2]], eta: [z[3], z[4], z[5]] }
    }
}

/// Flipped chart: `x = −p`, `y = q − center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipState {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl FlipState {
    pub fn new(x: [f64; 2], y: [f64; 2]) -> Self {
        Self { x, y }
    }
}

pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

pub fn polar_from_cartesian(q: [f64; 2], center: [f64; 2]) -> PolarPosition {
    let dx = q[0] - center[0];
    let dy = q[1] - center[1];
    let rho = dx.hypot(dy);
    if rho == 0.0 {
        return PolarPosition { rho: 0.0, theta: 0.0 };
    }
    PolarPosition { rho, theta: normalize_angle(dy.atan2(dx)) }
}

pub fn cartesian_from_polar(pos: PolarPosition, center: [f64; 2]) -> [f64; 2] {
    let (s, c) = pos.theta.sin_cos();
    [center[0] + pos.rho * c, center[1] + pos.rho * s]
}

pub fn flip(state: &PlanarPhaseState, center: [f64; 2]) -> FlipState {
    FlipState {
        x: [-state.p1, -state.p2],
        y: [state.q1 - center[0], state.q2 - center[1]],
    }
}

pub fn unflip(f: &FlipState, center: [f64; 2]) -> PlanarPhaseState {
    PlanarPhaseState::new(f.y[0] + center[0], f.y[1] + center[1], -f.x[0], -f.x[1])
}

pub fn moser_lift(f: &FlipState) -> SphereCotangentState {
    let [x1, x2] = f.x;
    let [y1, y2] = f.y;
    let r2 = x1 * x1 + x2 * x2;
    let den = r2 + 1.0;
    let xy = x1 * y1 + x2 * y2;
    let half = den / 2.0;
    SphereCotangentState {
        xi: [(r2 - 1.0) / den, 2.0 * x1 / den, 2.0 * x2 / den],
        eta: [xy, half * y1 - xy * x1, half * y2 - xy * x2],
    }
}

/// Gap below which `1 − ξ0` counts as the projection point.
pub const PROJECTION_GAP: f64 = 1e-12;

pub fn moser_project(s: &SphereCotangentState) -> Result<FlipState> {
    let gap = 1.0 - s.xi[0];
    if gap < PROJECTION_GAP {
        return Err(Error::ProjectionPoint { gap });
    }
    Ok(FlipState {
        x: [s.xi[1] / gap, s.xi[2] / gap],
        y: [
            s.eta[1] * gap + s.xi[1] * s.eta[0],
            s.eta[2] * gap + s.xi[2] * s.eta[0],
        ],
    })
}

/// The position `y` of the flipped chart as a function on `T*S²`; smooth
/// through the projection point.
pub fn flip_position(s: &SphereCotangentState) -> [f64; 2] {
    let gap = 1.0 - s.xi[0];
    [
        s.eta[1] * gap + s.xi[1] * s.eta[0],
        s.eta[2] * gap + s.xi[2] * s.eta[0],
    ]
}

/// South-pole stereographic projection of the physical sphere.
pub fn physical_stereographic(p: [f64; 3]) -> Result<[f64; 2]> {
    let den = 1.0 + p[2];
    if den.abs() < 1e-12 {
        return Err(Error::SouthPole);
    }
    Ok([p[0] / den, p[1] / den])
}

/// `Σ ηᵢ dξᵢ − Σ y_k dx_k` along the tangent direction `(dx, dy)` at `f`,
/// with the lift differentiated by central differences of step `h`.
pub fn one_form_pullback_residual(f: &FlipState, dx: [f64; 2], dy: [f64; 2], h: f64) -> f64 {
    let shifted = |t: f64| {
        moser_lift(&FlipState {
            x: [f.x[0] + t * dx[0], f.x[1] + t * dx[1]],
            y: [f.y[0] + t * dy[0], f.y[1] + t * dy[1]],
        })
    };
    let plus = shifted(h);
    let minus = shifted(-h);
    let base = moser_lift(f);
    let mut lhs = 0.0;
    for i in 0..3 {
        lhs += base.eta[i] * (plus.xi[i] - minus.xi[i]) / (2.0 * h);
    }
    let rhs = f.y[0] * dx[0] + f.y[1] * dx[1];
    lhs - rhs
}

pub fn lift_is_valid(s: &SphereCotangentState) -> bool {
    s.check_constraints(CONSTRAINT_TOL).is_ok()
}

/// Round-trip and constraint errors of the Moser chart over random states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartRoundTrip {
    pub samples: usize,
    /// `max |unflip(project(lift(flip z))) − z| / (1 + |z|)`.
    pub round_trip: f64,
    /// `max (||ξ| − 1|, |ξ·η| / (1 + |η|))` over lifted states.
    pub constraint: f64,
    /// `max |pullback residual|` at step `h`.
    pub pullback: f64,
    /// Same at step `h/2`.
    pub pullback_half: f64,
    pub h: f64,
}

impl ChartRoundTrip {
    /// Observed convergence order of the pullback residual under step halving.
    pub fn pullback_order(&self) -> f64 {
        (self.pullback / self.pullback_half).log2()
    }
}

/// States with `q ∈ [−2, 2]²` and `p ∈ [−4, 4]²` about `center`.
pub fn chart_round_trip(seed: u64, n: usize, center: [f64; 2], h: f64) -> Result<ChartRoundTrip> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = ChartRoundTrip { samples: n, round_trip: 0.0, constraint: 0.0, pullback: 0.0, pullback_half: 0.0, h };
    for _ in 0..n {
        let z = PlanarPhaseState::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
        );
        let dx = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let dy = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let f = flip(&z, center);
        let s = moser_lift(&f);
        let back = unflip(&moser_project(&s)?, center);
        let (a, b) = (z.to_array(), back.to_array());
        let scale = 1.0 + a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max) / scale;
        out.round_trip = out.round_trip.max(err);
        let (gap, dot) = s.constraint_residual();
        out.constraint = out.constraint.max(gap.abs()).max(dot.abs() / (1.0 + s.eta_norm()));
        out.pullback = out.pullback.max(one_form_pullback_residual(&f, dx, dy, h).abs());
        out.pullback_half = out.pullback_half.max(one_form_pullback_residual(&f, dx, dy, h / 2.0).abs());
    }
    Ok(out)
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::{Q_M1, S};
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    #[test]
    fn polar_examples() {
        let p = polar_from_cartesian(Q_M1, Q_M1);
        assert_eq!((p.rho, p.theta), (0.0, 0.0));
        let p = polar_from_cartesian([0.0, 0.0], Q_M1);
        assert!((p.rho - S).abs() < 1e-15 && p.theta == 0.0);
        let p = polar_from_cartesian([-S, 0.5], Q_M1);
        assert!((p.rho - 0.5).abs() < 1e-15 && (p.theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn negative_angles_wrap_into_range() {
        let p = polar_from_cartesian([-S + 0.1, -1e-20], Q_M1);
        assert!(p.theta >= 0.0 && p.theta < TAU);
        let p = polar_from_cartesian([-S + 0.1, -0.1], Q_M1);
        assert!((p.theta - 7.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-14);
    }

    #[test]
    fn flip_examples() {
        let f = flip(&PlanarPhaseState::ORIGIN, Q_M1);
        assert_eq!(f.x, [0.0, 0.0]);
        assert!((f.y[0] - S).abs() < 1e-16 && f.y[1] == 0.0);
        let f = flip(&PlanarPhaseState::new(-S, 0.0, 1.0, 2.0), Q_M1);
        assert_eq!(f.x, [-1.0, -2.0]);
        assert_eq!(f.y, [0.0, 0.0]);
    }

    #[test]
    fn lift_examples() {
        let s = moser_lift(&FlipState::new([0.0, 0.0], [0.0, 0.0]));
        assert_eq!(s.xi, [-1.0, 0.0, 0.0]);
        assert_eq!(s.eta, [0.0, 0.0, 0.0]);
        let s = moser_lift(&FlipState::new([1.0, 0.0], [0.0, 1.0]));
        assert_eq!(s.xi, [0.0, 1.0, 0.0]);
        assert_eq!(s.eta, [0.0, 0.0, 1.0]);
        assert_eq!(s.eta_norm(), 1.0);
    }

    #[test]
    fn projection_point_is_refused() {
        let s = SphereCotangentState::new([1.0 - 1e-15, 0.0, 0.0], [0.0, 0.0, 0.0]);
        assert!(matches!(moser_project(&s), Err(Error::ProjectionPoint { .. })));
        let s = SphereCotangentState::new([-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let f = moser_project(&s).unwrap();
        assert_eq!(f.x, [0.0, 0.0]);
        assert_eq!(f.y, [0.0, 0.0]);
    }

    #[test]
    fn physical_projection_examples() {
        assert_eq!(physical_stereographic([0.0, 0.0, 1.0]).unwrap(), [0.0, 0.0]);
        let m1 = physical_stereographic([-1.0 / SQRT_2, 0.0, 1.0 / SQRT_2]).unwrap();
        assert!((m1[0] + S).abs() < 1e-15 && m1[1] == 0.0);
        assert_eq!(physical_stereographic([1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0]);
        assert_eq!(physical_stereographic([0.0, 0.0, -1.0]), Err(Error::SouthPole));
    }
}
