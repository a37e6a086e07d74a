//! Local analysis at the first Lagrange point: quadratic model of `H`, the
//! Weinstein-like field `Y_{a,b}`, its interpolation `Z` with the radial
//! field of a primary, and the transversality scan across the neck.

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::PlanarPhaseState;
use crate::consts::{L1_ENERGY, QBAR_M1, QBAR_M2, Q_M1, Q_M2, S};
use crate::error::{Error, Result};
use crate::hamiltonian::{grad_h, h_value, momentum_from_kinetic_vector, potential_value};
use crate::hill::NodeGrid;
use crate::numdiff::central_hessian;
use crate::report::{reduce_max, reduce_min, ScanReport};

fn rows2(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn rows4(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

/// Quadratic part of `H` at `L1`, as `z ↦ zᵀ M z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForms {
    /// `U(0)`.
    pub constant: f64,
    pub qtilde_paper: [[f64; 2]; 2],
    pub kbar: [[f64; 4]; 4],
    pub qfull_paper: [[f64; 4]; 4],
    /// Half the central-difference Hessian of `U` and of `H`.
    pub qtilde_measured: [[f64; 2]; 2],
    pub qfull_measured: [[f64; 4]; 4],
    pub hessian_fd: [[f64; 4]; 4],
    /// `max |2 Qfull − Hess H|` for the printed and the measured matrices.
    pub paper_deviation: f64,
    pub measured_deviation: f64,
}

pub fn kbar() -> Matrix4<f64> {
    Matrix4::new(
        2.0, 0.0, 0.0, -0.5, //
        0.0, 2.0, 0.5, 0.0, //
        0.0, 0.5, 0.125, 0.0, //
        -0.5, 0.0, 0.0, 0.125,
    )
}

pub fn qtilde_paper() -> Matrix2<f64> {
    Matrix2::new(-5.0, 0.0, 0.0, 3.0) * 2.0
}

pub fn qfull_paper() -> Matrix4<f64> {
    Matrix4::new(
        -8.0, 0.0, 0.0, -0.5, //
        0.0, 8.0, 0.5, 0.0, //
        0.0, 0.5, 0.125, 0.0, //
        -0.5, 0.0, 0.0, 0.125,
    )
}

/// The quadratic part of `H` rounded from the Hessian: `Q̃ = diag(−10, 2)`.
pub fn qfull_measured() -> Matrix4<f64> {
    let mut m = kbar();
    m[(0, 0)] += -10.0;
    m[(1, 1)] += 2.0;
    m
}

pub fn quadratic_forms() -> Result<QuadraticForms> {
    let h = |z: &[f64; 4]| h_value(&PlanarPhaseState::from_array(*z)).unwrap_or(f64::NAN);
    let hess = central_hessian(h, &[0.0; 4], 1e-4);
    let hm = Matrix4::from_fn(|i, j| hess[i][j]);
    let u = |q: &[f64; 2]| potential_value(*q).unwrap_or(f64::NAN);
    let hu = central_hessian(u, &[0.0; 2], 1e-4);
    let qt = Matrix2::from_fn(|i, j| 0.5 * hu[i][j]);
    let dev = |m: &Matrix4<f64>| (2.0 * m - hm).abs().max();
    Ok(QuadraticForms {
        constant: potential_value([0.0, 0.0])?,
        qtilde_paper: rows2(&qtilde_paper()),
        kbar: rows4(&kbar()),
        qfull_paper: rows4(&qfull_paper()),
        qtilde_measured: rows2(&qt),
        qfull_measured: rows4(&(0.5 * hm)),
        hessian_fd: hess,
        paper_deviation: dev(&qfull_paper()),
        measured_deviation: dev(&qfull_measured()),
    })
}

fn diag(a: f64, b: f64) -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(a, b, 1.0 - a, 1.0 - b))
}

/// `Y_{a,b} = (a q1, b q2, (1−a) p1, (1−b) p2)`.
pub fn weinstein_field(z: &PlanarPhaseState, a: f64, b: f64) -> [f64; 4] {
    [a * z.q1, b * z.q2, (1.0 - a) * z.p1, (1.0 - b) * z.p2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YqReport {
    pub a: f64,
    pub b: f64,
    pub matrix: [[f64; 4]; 4],
    /// Ascending.
    pub eigenvalues: [f64; 4],
    pub positive_definite: bool,
}

/// The symmetric matrix of the quadratic form `Y(Q)` for a given `Q`.
pub fn yq_matrix_for(q: &Matrix4<f64>, a: f64, b: f64) -> YqReport {
    let d = diag(a, b);
    let m = q * d + d * q;
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let eigenvalues = [ev[0], ev[1], ev[2], ev[3]];
    YqReport { a, b, matrix: rows4(&m), eigenvalues, positive_definite: eigenvalues[0] > 0.0 }
}

/// The displayed `Y(Q)` matrix, built from its printed entries.
pub fn yq_matrix(a: f64, b: f64) -> YqReport {
    let off14 = (-a + b - 1.0) / 2.0;
    let off23 = (b + 1.0 - a) / 2.0;
    let m = Matrix4::new(
        -16.0 * a, 0.0, 0.0, off14, //
        0.0, 16.0 * b, off23, 0.0, //
        0.0, off23, (1.0 - a) / 4.0, 0.0, //
        off14, 0.0, 0.0, (1.0 - b) / 4.0,
    );
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let eigenvalues = [ev[0], ev[1], ev[2], ev[3]];
    YqReport { a, b, matrix: rows4(&m), eigenvalues, positive_definite: eigenvalues[0] > 0.0 }
}

/// Smooth cut-off in `u = q1 + p2/8`, equal to 1 for `|u| ≤ eps1` and 0 for
/// `|u| ≥ eps2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationSpec {
    pub a: f64,
    pub b: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for InterpolationSpec {
    fn default() -> Self {
        Self { a: -0.5, b: 0.5, eps1: 0.02, eps2: 0.05 }
    }
}

fn psi(x: f64) -> f64 {
    if x > 0.0 { (-1.0 / x).exp() } else { 0.0 }
}

fn dpsi(x: f64) -> f64 {
    if x > 0.0 { psi(x) / (x * x) } else { 0.0 }
}

fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, b) = (psi(t), psi(1.0 - t));
    let den = a + b;
    (a / den, (dpsi(t) * b + a * dpsi(1.0 - t)) / (den * den))
}

impl InterpolationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a < 0.0 && self.b > 0.0 && 0.0 < self.eps1 && self.eps1 < self.eps2) {
            return Err(Error::Config(format!("interpolation spec needs a<0<b and 0<eps1<eps2, got {self:?}")));
        }
        Ok(())
    }

    /// The cut-off and its derivative in `u`.
    pub fn cutoff(&self, u: f64) -> (f64, f64) {
        let w = self.eps2 - self.eps1;
        let (st, dst) = smooth_step((u.abs() - self.eps1) / w);
        (1.0 - st, -dst * u.signum() / w)
    }
}

pub fn neck_variable(z: &PlanarPhaseState) -> f64 {
    z.q1 + z.p2 / 8.0
}

/// Which primary's radial field is interpolated: the second one on
/// `u ≥ 0`, the first on `u < 0`.
fn side_sign(z: &PlanarPhaseState) -> f64 {
    if neck_variable(z) >= 0.0 { 1.0 } else { -1.0 }
}

/// The radial Liouville field `(q1 ∓ (√2−1), q2, 0, 0)` of the primary on the
/// side of `z`. On `u ≥ 0` this is the field of `α0 = (√2−1−q1)dp1 − q2dp2`.
pub fn z0_field(z: &PlanarPhaseState) -> [f64; 4] {
    [z.q1 - side_sign(z) * S, z.q2, 0.0, 0.0]
}

/// Primitive of `α1 − α0`.
pub fn g_primitive(z: &PlanarPhaseState, a: f64, b: f64) -> f64 {
    (1.0 - a) * z.q1 * z.p1 - S * z.p1 + (1.0 - b) * z.p2 * z.q2
}

/// `G` on the side of `z`.
pub fn g_sided(z: &PlanarPhaseState, a: f64, b: f64) -> f64 {
    (1.0 - a) * z.q1 * z.p1 - side_sign(z) * S * z.p1 + (1.0 - b) * z.p2 * z.q2
}

/// `α0` and `α1` as covectors in `(dq1, dq2, dp1, dp2)`.
pub fn alpha0(z: &PlanarPhaseState) -> [f64; 4] {
    [0.0, 0.0, S - z.q1, -z.q2]
}

pub fn alpha1(z: &PlanarPhaseState, a: f64, b: f64) -> [f64; 4] {
    [(1.0 - a) * z.p1, (1.0 - b) * z.p2, -a * z.q1, -b * z.q2]
}

/// The field `V` with `i_V ω = dF` for `ω = dp ∧ dq`: `V = (−∂pF, ∂qF)`.
fn field_of_differential(d: [f64; 4]) -> [f64; 4] {
    [-d[2], -d[3], d[0], d[1]]
}

/// Evaluation of `Z = Z0 + Z_{fG}` with its pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZEvaluation {
    pub z: [f64; 4],
    pub cutoff: f64,
    pub cutoff_derivative: f64,
    pub g: f64,
    pub z0: [f64; 4],
    pub zg: [f64; 4],
    pub zf: [f64; 4],
}

pub fn z_evaluate(z: &PlanarPhaseState, spec: &InterpolationSpec) -> ZEvaluation {
    let (a, b) = (spec.a, spec.b);
    let sg = side_sign(z);
    let (f, df) = spec.cutoff(neck_variable(z));
    let g = g_sided(z, a, b);
    let dg = [(1.0 - a) * z.p1, (1.0 - b) * z.p2, (1.0 - a) * z.q1 - sg * S, (1.0 - b) * z.q2];
    let zg = field_of_differential(dg);
    let zf = field_of_differential([df, 0.0, 0.0, df / 8.0]);
    let z0 = z0_field(z);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = z0[i] + f * zg[i] + g * zf[i];
    }
    ZEvaluation { z: out, cutoff: f, cutoff_derivative: df, g, z0, zg, zf }
}

pub fn z_field(z: &PlanarPhaseState, spec: &InterpolationSpec) -> [f64; 4] {
    z_evaluate(z, spec).z
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `i_V ω` as a covector: `(V_p, −V_q)`.
pub fn contraction(v: [f64; 4]) -> [f64; 4] {
    [v[2], v[3], -v[0], -v[1]]
}

/// `ω(u, w)` for `ω = dp ∧ dq`.
pub fn omega(u: &[f64; 4], w: &[f64; 4]) -> f64 {
    u[2] * w[0] + u[3] * w[1] - u[0] * w[2] - u[1] * w[3]
}

/// `|d(i_V ω)(u, w) − ω(u, w)|` by finite differences along `u` and `w`.
pub fn liouville_residual(field: impl Fn(&PlanarPhaseState) -> [f64; 4], z: &PlanarPhaseState, u: &[f64; 4], w: &[f64; 4], h: f64) -> f64 {
    let alpha_on = |point: [f64; 4], dir: &[f64; 4]| dot4(&contraction(field(&PlanarPhaseState::from_array(point))), dir);
    let base = z.to_array();
    let shift = |d: &[f64; 4], t: f64| {
        let mut p = base;
        for i in 0..4 {
            p[i] += t * d[i];
        }
        p
    };
    // Fourth-order stencil: the cut-off has large higher derivatives.
    let deriv = |d: &[f64; 4], e: &[f64; 4]| {
        let at = |t: f64| alpha_on(shift(d, t), e);
        (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
    };
    let du = deriv(u, w);
    let dw = deriv(w, u);
    (du - dw - omega(u, w)).abs()
}

/// Largest residual of `dG = α1 − α0` at random states.
pub fn dg_residual(seed: u64, n: usize, a: f64, b: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let z: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let st = PlanarPhaseState::from_array(z);
        let grad = crate::numdiff::central_gradient(|w: &[f64; 4]| g_primitive(&PlanarPhaseState::from_array(*w), a, b), &z, 1e-5);
        let a1 = alpha1(&st, a, b);
        let a0 = alpha0(&st);
        for i in 0..4 {
            worst = worst.max((grad[i] - (a1[i] - a0[i])).abs());
        }
    }
    worst
}

/// Largest Liouville residual of `field` over random states and 2-planes in
/// the box `|z_i| ≤ radius`.
pub fn liouville_check(field: impl Fn(&PlanarPhaseState) -> [f64; 4], seed: u64, n: usize, radius: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let z: [f64; 4] = std::array::from_fn(|_| rng.random_range(-radius..radius));
        let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        worst = worst.max(liouville_residual(&field, &PlanarPhaseState::from_array(z), &u, &w, 1e-5));
    }
    worst
}

/// `dH(Z_f)` as displayed, with `f′` factored out.
pub fn dh_zf_display(z: &PlanarPhaseState) -> f64 {
    let (q1, q2) = (z.q1, z.q2);
    let r2 = q1 * q1 + q2 * q2;
    let p2 = z.p1 * z.p1 + z.p2 * z.p2;
    let dist = |c: [f64; 2]| (q1 - c[0]).hypot(q2 - c[1]);
    let a2 = dist(Q_M2) * dist(QBAR_M2);
    let a1 = dist(Q_M1) * dist(QBAR_M1);
    ((r2 + 1.0).powi(2) / 4.0 - 0.125) * z.p1
        - q2 / 8.0
            * ((r2 + 1.0) * p2 / 2.0 + 1.0 / a2 + 1.0 / a1
                + (q1 - r2 + 1.0) * (q1 + r2 + 3.0) / a2.powi(3)
                + (-q1 - r2 + 1.0) * (-q1 + r2 + 3.0) / a1.powi(3)
                - 8.0)
}

/// `dH(Z_f)` by direct differentiation, with `f′` factored out.
pub fn dh_zf_direct(z: &PlanarPhaseState) -> Result<f64> {
    let g = grad_h(z)?;
    Ok(g[2] - g[1] / 8.0)
}

/// Scan of `dH(Z)` on `H⁻¹(c)` inside the box `|q_i| ≤ half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeckGrid {
    pub cells: usize,
    pub half_width: f64,
    pub fibre: usize,
    /// The neck region is `|q1| < neck_half`; the outer sides are the rest.
    pub neck_half: f64,
}

impl Default for NeckGrid {
    fn default() -> Self {
        Self { cells: 160, half_width: 0.2, fibre: 64, neck_half: 0.05 }
    }
}

impl NeckGrid {
    pub fn describe(&self) -> String {
        format!("{}^2 nodes |q_i|<={} x {} fibre angles", self.cells + 1, self.half_width, self.fibre)
    }
}

/// The three summands `(1−f)dH(Z0)`, `f dH(Y)`, `G dH(Z_f)` and the leading
/// part of the last one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZhTerms {
    pub state: [f64; 4],
    pub total: f64,
    pub outer: f64,
    pub weinstein: f64,
    pub interpolation: f64,
    pub interpolation_leading: f64,
}

fn zh_terms(z: &PlanarPhaseState, spec: &InterpolationSpec) -> Result<ZhTerms> {
    let e = z_evaluate(z, spec);
    let dh = grad_h(z)?;
    let y = weinstein_field(z, spec.a, spec.b);
    let d = z.q1 * z.q1 + z.q2 * z.q2 + 1.0;
    Ok(ZhTerms {
        state: z.to_array(),
        total: dot4(&dh, &e.z),
        outer: (1.0 - e.cutoff) * dot4(&dh, &e.z0),
        weinstein: e.cutoff * dot4(&dh, &y),
        interpolation: e.g * dot4(&dh, &e.zf),
        interpolation_leading: e.cutoff_derivative * (-side_sign(z) * S) * (d * d / 4.0 - 0.125) * z.p1 * z.p1,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZhScan {
    pub c: f64,
    pub spec: InterpolationSpec,
    pub neck: ScanReport,
    pub left: ScanReport,
    pub right: ScanReport,
    pub argmin_terms: Option<ZhTerms>,
    /// Samples where `G dH(Z_f)` is negative.
    pub negative_interpolation: usize,
    /// Largest `|dH(Z_f)|` discrepancy between the display and the direct
    /// derivative over samples in the interpolating zone.
    pub display_discrepancy: f64,
    pub pass: bool,
}

impl ZhScan {
    pub fn min(&self) -> f64 {
        self.neck.min.min(self.left.min).min(self.right.min)
    }
}

pub fn zh_scan(c: f64, spec: &InterpolationSpec, grid: &NeckGrid) -> Result<ZhScan> {
    if !(c > L1_ENERGY && c < L1_ENERGY + 0.05) {
        return Err(Error::EnergyOutOfRange { c, reason: "neck scan needs -1 < c < -0.95" });
    }
    spec.validate()?;
    let ng = NodeGrid::new(grid.cells, grid.half_width);
    let n = ng.nodes_per_axis();
    let nodes: Vec<[f64; 2]> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| ng.node(i, j)).collect();
    let per_node: Vec<Vec<(ZhTerms, f64)>> = nodes
        .par_iter()
        .map(|&q| {
            let Ok(u) = potential_value(q) else { return Vec::new() };
            if u > c {
                return Vec::new();
            }
            let r = (8.0 * (c - u)).sqrt();
            (0..grid.fibre)
                .filter_map(|k| {
                    let phi = std::f64::consts::TAU * k as f64 / grid.fibre as f64;
                    let p = momentum_from_kinetic_vector(q, [r * phi.cos(), r * phi.sin()]);
                    let z = PlanarPhaseState::from_qp(q, p);
                    let t = zh_terms(&z, spec).ok()?;
                    let (_, df) = spec.cutoff(neck_variable(&z));
                    let disc = if df != 0.0 {
                        dh_zf_direct(&z).map(|d| (d - dh_zf_display(&z)).abs()).unwrap_or(f64::NAN)
                    } else {
                        0.0
                    };
                    Some((t, disc))
                })
                .collect()
        })
        .collect();
    let all: Vec<(ZhTerms, f64)> = per_node.into_iter().flatten().collect();
    let region = |pred: &dyn Fn(f64) -> bool, label: &str| {
        let pick: Vec<&ZhTerms> = all.iter().map(|(t, _)| t).filter(|t| pred(t.state[0])).collect();
        let min = reduce_min(pick.iter().map(|t| (t.total, t.state.to_vec())));
        ScanReport::positivity(label, grid.describe(), pick.len(), min)
    };
    let h = grid.neck_half;
    let neck = region(&|q1| q1.abs() < h, "Z(H) neck");
    let left = region(&|q1| q1 <= -h, "Z(H) left side");
    let right = region(&|q1| q1 >= h, "Z(H) right side");
    let argmin_terms = reduce_min(all.iter().map(|(t, _)| (t.total, *t))).map(|m| m.1);
    let negative_interpolation = all.iter().filter(|(t, _)| t.interpolation < 0.0).count();
    let display_discrepancy = reduce_max(all.iter().map(|(_, d)| (*d, ()))).map_or(0.0, |m| m.0);
    let pass = neck.pass && left.pass && right.pass;
    Ok(ZhScan { c, spec: *spec, neck, left, right, argmin_terms, negative_interpolation, display_discrepancy, pass })
}

/// Energies tested for a candidate window `ε`.
pub fn window_energies(eps: f64) -> Vec<f64> {
    let mut out = vec![L1_ENERGY + eps / 64.0];
    out.extend((1..=4).map(|j| L1_ENERGY + eps * j as f64 / 4.0));
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonBisection {
    /// Largest window found whose test energies all pass; `None` if even the
    /// lower bracket fails.
    pub epsilon: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// `(ε, pass, min Z(H))` for each trial.
    pub trials: Vec<(f64, bool, f64)>,
}

fn window_passes(eps: f64, spec: &InterpolationSpec, grid: &NeckGrid) -> Result<(bool, f64)> {
    let mut min = f64::INFINITY;
    for c in window_energies(eps) {
        // The top energy of the widest window sits on the precondition edge.
        let c = c.min(L1_ENERGY + 0.05 - 1e-12);
        let scan = zh_scan(c, spec, grid)?;
        min = min.min(scan.min());
        if !scan.pass {
            return Ok((false, min));
        }
    }
    Ok((true, min))
}

/// Bisects the energy window `ε ∈ [lower, upper]` on the scan outcome.
pub fn bisect_epsilon(spec: &InterpolationSpec, grid: &NeckGrid, lower: f64, upper: f64, iterations: usize) -> Result<EpsilonBisection> {
    let mut trials = Vec::new();
    let (ok_hi, m) = window_passes(upper, spec, grid)?;
    trials.push((upper, ok_hi, m));
    if ok_hi {
        return Ok(EpsilonBisection { epsilon: Some(upper), lower, upper, iterations: 0, trials });
    }
    let (ok_lo, m) = window_passes(lower, spec, grid)?;
    trials.push((lower, ok_lo, m));
    if !ok_lo {
        return Ok(EpsilonBisection { epsilon: None, lower, upper, iterations: 0, trials });
    }
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let (ok, m) = window_passes(mid, spec, grid)?;
        trials.push((mid, ok, m));
        if ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(EpsilonBisection { epsilon: Some(lo), lower, upper, iterations, trials })
}

/// The section `{Q = 0} ∩ {q1 + p2/8 = δ}` in coordinates `v = (q1, q2, p1)`:
/// `(v − center)ᵀ A (v − center) = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSection {
    pub delta: f64,
    pub matrix: [[f64; 3]; 3],
    pub center: [f64; 3],
    pub rhs: f64,
    pub eigenvalues: [f64; 3],
    /// Empty unless the section is a non-degenerate ellipsoid.
    pub semi_axes: Vec<f64>,
    pub axis_directions: Vec<[f64; 3]>,
    pub is_point: bool,
}

fn substitution() -> (nalgebra::Matrix4x3<f64>, Vector4<f64>) {
    let l = nalgebra::Matrix4x3::new(
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        0.0, 0.0, 1.0, //
        -8.0, 0.0, 0.0,
    );
    (l, Vector4::new(0.0, 0.0, 0.0, 8.0))
}

pub fn ellipsoid_section_for(q: &Matrix4<f64>, delta: f64) -> Result<EllipsoidSection> {
    let (l, c0) = substitution();
    let c = c0 * delta;
    let a: Matrix3<f64> = l.transpose() * q * l;
    let b: Vector3<f64> = l.transpose() * q * c;
    let inv = a.try_inverse().ok_or(Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    let center = -(inv * b);
    let rhs = (b.transpose() * inv * b)[(0, 0)] - (c.transpose() * q * c)[(0, 0)];
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]];
    let definite = eigenvalues[0] > 0.0;
    let scale = rhs.abs().max(1.0) * 1e-14;
    let is_point = definite && rhs.abs() <= scale;
    let (semi_axes, axis_directions) = if definite && rhs > scale {
        order
            .iter()
            .map(|&i| {
                let v = eig.eigenvectors.column(i);
                ((rhs / eig.eigenvalues[i]).sqrt(), [v[0], v[1], v[2]])
            })
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[(i, j)];
        }
    }
    Ok(EllipsoidSection { delta, matrix: m, center: [center[0], center[1], center[2]], rhs, eigenvalues, semi_axes, axis_directions, is_point })
}

pub fn ellipsoid_section(delta: f64) -> Result<EllipsoidSection> {
    ellipsoid_section_for(&qfull_paper(), delta)
}

pub fn quadratic_value(q: &Matrix4<f64>, z: &[f64; 4]) -> f64 {
    let v = Vector4::from_column_slice(z);
    (v.transpose() * q * v)[(0, 0)]
}

/// `2((p1 + 4q2)²/16 + (2q1 − 3δ)² + 3q2² − 5δ²)`.
pub fn completed_square(q1: f64, q2: f64, p1: f64, delta: f64) -> f64 {
    2.0 * ((p1 + 4.0 * q2).powi(2) / 16.0 + (2.0 * q1 - 3.0 * delta).powi(2) + 3.0 * q2 * q2 - 5.0 * delta * delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadricCheck {
    pub samples: usize,
    /// `max |Q(z) − completed square|` at random `(q1, q2, p1, δ)`.
    pub identity: f64,
    /// `max |Q(z)|` at points sampled on the section ellipsoid.
    pub on_section: f64,
}

/// Both quadric checks for the displayed `Q`, with the section at `delta`.
pub fn quadric_identity(seed: u64, n: usize, delta: f64) -> Result<QuadricCheck> {
    let q = qfull_paper();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut identity: f64 = 0.0;
    for _ in 0..n {
        let (q1, q2, p1, d): (f64, f64, f64, f64) =
            (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
        let z = [q1, q2, p1, 8.0 * (d - q1)];
        identity = identity.max((quadratic_value(&q, &z) - completed_square(q1, q2, p1, d)).abs());
    }
    let sec = ellipsoid_section_for(&q, delta)?;
    let mut on_section: f64 = 0.0;
    if sec.semi_axes.len() == 3 {
        for _ in 0..n {
            let mut dir: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let nrm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            dir.iter_mut().for_each(|x| *x /= nrm);
            let mut v = sec.center;
            for k in 0..3 {
                for i in 0..3 {
                    v[i] += dir[k] * sec.semi_axes[k] * sec.axis_directions[k][i];
                }
            }
            let z = [v[0], v[1], v[2], 8.0 * (delta - v[0])];
            on_section = on_section.max(quadratic_value(&q, &z).abs());
        }
    }
    Ok(QuadricCheck { samples: n, identity, on_section })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weinstein_examples() {
        let y = weinstein_field(&PlanarPhaseState::new(1.0, 1.0, 1.0, 1.0), -0.5, 0.5);
        assert_eq!(y, [-0.5, 0.5, 1.5, 0.5]);
        assert_eq!(weinstein_field(&PlanarPhaseState::ORIGIN, -0.5, 0.5), [0.0; 4]);
    }

    #[test]
    fn displayed_yq_matches_construction() {
        let shown = yq_matrix(-0.5, 0.5);
        assert_eq!(shown.matrix[0][0], 8.0);
        assert_eq!(shown.matrix[1][1], 8.0);
        assert_eq!(shown.matrix[2][2], 0.375);
        assert_eq!(shown.matrix[3][3], 0.125);
        assert_eq!(shown.matrix[0][3], 0.0);
        assert_eq!(shown.matrix[1][2], 1.0);
        let built = yq_matrix_for(&qfull_paper(), -0.5, 0.5);
        for i in 0..4 {
            for j in 0..4 {
                assert!((shown.matrix[i][j] - built.matrix[i][j]).abs() < 1e-15);
            }
        }
        assert!(shown.positive_definite);
        // Both 2x2 blocks have determinant -1/4 at a = b = 0.
        let degenerate = yq_matrix(0.0, 0.0);
        assert!(!degenerate.positive_definite);
        assert!((degenerate.eigenvalues[0] - (0.125 - (0.125f64 * 0.125 + 0.25).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn g_examples() {
        assert_eq!(g_primitive(&PlanarPhaseState::ORIGIN, -0.5, 0.5), 0.0);
        assert!((g_primitive(&PlanarPhaseState::new(0.0, 0.0, 1.0, 0.0), -0.5, 0.5) + S).abs() < 1e-16);
    }

    #[test]
    fn cutoff_shape() {
        let s = InterpolationSpec::default();
        assert_eq!(s.cutoff(0.01), (1.0, 0.0));
        assert_eq!(s.cutoff(-0.06), (0.0, 0.0));
        let (f, df) = s.cutoff(0.03);
        assert!(f > 0.0 && f < 1.0 && df < 0.0);
        assert_eq!(s.cutoff(-0.03).0, f);
        assert!(s.cutoff(-0.03).1 > 0.0);
    }

    #[test]
    fn z_reduces_to_closed_forms() {
        let spec = InterpolationSpec::default();
        let inner = PlanarPhaseState::new(0.01, 0.03, -0.2, 0.05);
        let y = weinstein_field(&inner, spec.a, spec.b);
        let z = z_field(&inner, &spec);
        for i in 0..4 {
            assert!((z[i] - y[i]).abs() < 1e-12);
        }
        let outer = PlanarPhaseState::new(0.1, 0.03, -0.2, 0.05);
        assert_eq!(z_field(&outer, &spec), z0_field(&outer));
    }

    #[test]
    fn collapse_at_zero_delta() {
        assert!(ellipsoid_section(0.0).unwrap().is_point);
        let one = ellipsoid_section(1.0).unwrap();
        assert_eq!(one.semi_axes.len(), 3);
        assert!((one.rhs - 10.0).abs() < 1e-12);
    }

    #[test]
    fn energy_precondition() {
        let err = zh_scan(-1.1, &InterpolationSpec::default(), &NeckGrid::default()).unwrap_err();
        assert!(matches!(err, Error::EnergyOutOfRange { .. }));
    }
}
