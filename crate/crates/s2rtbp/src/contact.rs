//! Contact-condition machinery around the first primary: the coefficient
//! functions of the kinetic term, the `(α, β)` bound `|g|² ≤ αK + β`, the
//! witness `ρ∂ρU − (ρ/4)√(8(c−U))√(α(c−U)+β)` and its grid scans.

use std::f64::consts::{SQRT_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::{cartesian_from_polar, PolarPosition};
use crate::consts::{L1_ENERGY, POLE_RESIDUE, Q_M1, S};
use crate::error::{Error, Result};
use crate::hamiltonian::{eval_u_polar, momentum_from_kinetic_vector, radial_derivative};
use crate::numdiff::richardson;
use crate::report::{reduce_max, reduce_min, ScanReport};

/// `f_i = a_i p_i + b_i` and `g_i = ∂ρ f_i = c_i p_i + d_i` in the polar chart
/// about the first primary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBundle {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl CoefficientBundle {
    pub fn f(&self, p: [f64; 2]) -> [f64; 2] {
        [self.a1 * p[0] + self.b1, self.a2 * p[1] + self.b2]
    }

    pub fn g(&self, p: [f64; 2]) -> [f64; 2] {
        [self.c1 * p[0] + self.d1, self.c2 * p[1] + self.d2]
    }

    /// `(a_i, b_i, c_i, d_i)` for `which ∈ {1, 2}`.
    pub fn component(&self, which: usize) -> (f64, f64, f64, f64) {
        match which {
            1 => (self.a1, self.b1, self.c1, self.d1),
            _ => (self.a2, self.b2, self.c2, self.d2),
        }
    }
}

pub fn coefficients(pos: PolarPosition) -> CoefficientBundle {
    let q = cartesian_from_polar(pos, Q_M1);
    let (sn, cs) = pos.theta.sin_cos();
    let d = q[0] * q[0] + q[1] * q[1] + 1.0;
    let c = 2.0 * (pos.rho - S * cs);
    CoefficientBundle {
        a1: d,
        a2: d,
        b1: 4.0 * q[1] / d,
        b2: -4.0 * q[0] / d,
        c1: c,
        c2: c,
        d1: 4.0 * sn / d - 4.0 * q[1] * c / (d * d),
        d2: -4.0 * cs / d + 4.0 * q[0] * c / (d * d),
    }
}

/// The coefficients as typeset, where `b2` carries the opposite sign.
pub fn coefficients_printed(pos: PolarPosition) -> CoefficientBundle {
    let mut b = coefficients(pos);
    b.b2 = -b.b2;
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootBound {
    /// Real roots `(r⁻, r⁺)` of `(α/8)f_i² − g_i²` in `p_i`, if any.
    pub roots: Option<(f64, f64)>,
    pub t: f64,
    /// Leading coefficient `(α/8)a_i² − c_i²`.
    pub leading: f64,
}

pub fn quadratic_root_bound(pos: PolarPosition, alpha: f64, which: usize) -> Result<RootBound> {
    let (a, b, c, d) = coefficients(pos).component(which);
    let w = alpha / 8.0;
    let a2 = w * a * a - c * c;
    if !(a2 > 0.0) {
        return Err(Error::AlphaTooSmall { leading: a2 });
    }
    let a1 = 2.0 * (w * a * b - c * d);
    let a0 = w * b * b - d * d;
    let disc = a1 * a1 - 4.0 * a2 * a0;
    if disc < 0.0 {
        return Ok(RootBound { roots: None, t: 0.0, leading: a2 });
    }
    let q = -0.5 * (a1 + a1.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a2, a0 / q) };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    Ok(RootBound { roots: Some((lo, hi)), t: lo.abs().max(hi.abs()), leading: a2 })
}

/// Which value of `α` to certify with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaMode {
    /// `8 · 4 (2(√2−1))² ≈ 21.96`.
    #[serde(rename = "paper-21.96")]
    Paper,
    /// Four times the above, `≈ 87.85`.
    #[serde(rename = "strict-87.85")]
    Strict,
    /// Run both and report both.
    #[serde(rename = "both")]
    Both,
}

impl AlphaMode {
    pub fn value(self) -> f64 {
        let base = 32.0 * (2.0 * S) * (2.0 * S);
        match self {
            AlphaMode::Paper => base,
            AlphaMode::Strict | AlphaMode::Both => 4.0 * base,
        }
    }

    /// The single-valued modes to run.
    pub fn expand(self) -> Vec<AlphaMode> {
        match self {
            AlphaMode::Both => vec![AlphaMode::Strict, AlphaMode::Paper],
            m => vec![m],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AlphaMode::Paper => "paper-21.96",
            AlphaMode::Strict => "strict-87.85",
            AlphaMode::Both => "both",
        }
    }
}

impl std::str::FromStr for AlphaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-21.96" => Ok(AlphaMode::Paper),
            "strict-87.85" => Ok(AlphaMode::Strict),
            "both" => Ok(AlphaMode::Both),
            other => Err(Error::Config(format!(
                "unknown alpha mode `{other}` (expected paper-21.96, strict-87.85 or both)"
            ))),
        }
    }
}

/// Constants entering the key inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessConstants {
    pub alpha: f64,
    pub beta: f64,
}

/// The constants obtained from the hand bounds `|c| < 4(√2−1)`, `t < 2`,
/// `|d1| < 3.5` and `|d2| < 2.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandBounds {
    pub c_sq_bound: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta: f64,
}

pub fn hand_bounds() -> HandBounds {
    let c_max = 2.0 * (2.0 * S);
    let m = 2.0;
    let beta1 = (c_max * m + 3.5).powi(2);
    let beta2 = (2.5 + c_max * m).powi(2);
    HandBounds { c_sq_bound: c_max * c_max, beta1, beta2, beta: beta1 + beta2 }
}

/// Uniform polar grid about the first primary: `ρ_k = ρ_max k / n_rho` for
/// `k = 1..n_rho` (open at the outer radius when `open` is set) and
/// `θ_j = 2π j / n_theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarGrid {
    pub rho_max: f64,
    pub n_rho: usize,
    pub n_theta: usize,
    pub open: bool,
}

impl PolarGrid {
    pub fn nodes(&self) -> Vec<PolarPosition> {
        let last = if self.open { self.n_rho - 1 } else { self.n_rho };
        let mut out = Vec::with_capacity(last * self.n_theta);
        for k in 1..=last {
            let rho = self.rho_max * k as f64 / self.n_rho as f64;
            for j in 0..self.n_theta {
                out.push(PolarPosition { rho, theta: TAU * j as f64 / self.n_theta as f64 });
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        format!(
            "polar rho in (0, {:.6}{} n_rho={} x n_theta={}",
            self.rho_max,
            if self.open { ")" } else { "]" },
            self.n_rho,
            self.n_theta
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub alpha_mode: AlphaMode,
    pub alpha: f64,
    pub beta: f64,
    pub beta_components: [f64; 2],
    /// `M_i = sup t_i` over the region.
    pub momentum_caps: [f64; 2],
    pub rho_max: f64,
    /// Energy whose Hill region restricts the suprema.
    pub energy: f64,
    pub sup_c_sq: f64,
    pub inf_a_sq: f64,
    pub d1_range: [f64; 2],
    pub d2_range: [f64; 2],
    pub grid: String,
    pub samples: usize,
    /// Smallest leading coefficient `(α/8)a² − c²` seen.
    pub min_leading: f64,
    pub hand_bounds: HandBounds,
}

impl BoundCertificate {
    pub fn constants(&self) -> WitnessConstants {
        WitnessConstants { alpha: self.alpha, beta: self.beta }
    }
}

/// Measures the suprema over `{U ≤ c} ∩ {ρ < ρ_max}` and assembles `(α, β)`.
pub fn estimate_alpha_beta(mode: AlphaMode, c: f64, grid: &PolarGrid) -> Result<BoundCertificate> {
    if grid.rho_max > S + 1e-15 {
        return Err(Error::Config(format!("certificate radius {} exceeds √2 − 1", grid.rho_max)));
    }
    let mode = match mode {
        AlphaMode::Both => AlphaMode::Strict,
        m => m,
    };
    let alpha = mode.value();
    struct Cell {
        a_sq: f64,
        c_abs: f64,
        d: [f64; 2],
        t: [f64; 2],
        leading: f64,
    }
    let cells: Vec<Result<Option<Cell>>> = grid
        .nodes()
        .into_par_iter()
        .map(|pos| {
            let u = match eval_u_polar(pos) {
                Ok(u) => u.u,
                Err(_) => return Ok(None),
            };
            if u > c + HILL_TOL {
                return Ok(None);
            }
            let co = coefficients(pos);
            let r1 = quadratic_root_bound(pos, alpha, 1)?;
            let r2 = quadratic_root_bound(pos, alpha, 2)?;
            Ok(Some(Cell {
                a_sq: co.a1 * co.a1,
                c_abs: co.c1.abs(),
                d: [co.d1, co.d2],
                t: [r1.t, r2.t],
                leading: r1.leading,
            }))
        })
        .collect();
    let mut kept = Vec::new();
    for cell in cells {
        if let Some(cell) = cell? {
            kept.push(cell);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let fold = |f: &dyn Fn(&Cell) -> f64| reduce_max(kept.iter().map(|x| (f(x), ()))).unwrap().0;
    let fold_min = |f: &dyn Fn(&Cell) -> f64| reduce_min(kept.iter().map(|x| (f(x), ()))).unwrap().0;
    let caps = [fold(&|x| x.t[0]), fold(&|x| x.t[1])];
    let beta1 = fold(&|x| (x.c_abs * caps[0] + x.d[0].abs()).powi(2));
    let beta2 = fold(&|x| (x.c_abs * caps[1] + x.d[1].abs()).powi(2));
    let c_abs = fold(&|x| x.c_abs);
    Ok(BoundCertificate {
        alpha_mode: mode,
        alpha,
        beta: beta1 + beta2,
        beta_components: [beta1, beta2],
        momentum_caps: caps,
        rho_max: grid.rho_max,
        energy: c,
        sup_c_sq: c_abs * c_abs,
        inf_a_sq: fold_min(&|x| x.a_sq),
        d1_range: [fold_min(&|x| x.d[0]), fold(&|x| x.d[0])],
        d2_range: [fold_min(&|x| x.d[1]), fold(&|x| x.d[1])],
        grid: grid.describe(),
        samples: kept.len(),
        min_leading: fold_min(&|x| x.leading),
        hand_bounds: hand_bounds(),
    })
}

/// `(ρ/4)√(8(c−U))√(α(c−U)+β)`, the kinetic part of the witness.
pub fn kinetic_bound(rho: f64, c_minus_u: f64, k: WitnessConstants) -> f64 {
    rho / 4.0 * (8.0 * c_minus_u).sqrt() * (k.alpha * c_minus_u + k.beta).sqrt()
}

/// Slack in the test `U ≤ c`, so that `U(L1) = −1` survives round-off.
pub const HILL_TOL: f64 = 1e-12;

/// Lower bound for `X(H)` on the fibre of `H⁻¹(c)` over `pos`.
pub fn key_inequality(pos: PolarPosition, c: f64, k: WitnessConstants) -> Result<f64> {
    let u = eval_u_polar(pos)?.u;
    if u > c + HILL_TOL {
        return Err(Error::OutsideHillRegion { excess: u - c });
    }
    let dr = radial_derivative(pos)?;
    Ok(pos.rho * dr - kinetic_bound(pos.rho, (c - u).max(0.0), k))
}

/// Minimum over fibre directions of the exact `X(H) = ρ∂ρK + ρ∂ρU` on
/// `H⁻¹(c)` above `pos`.
pub fn direct_xh_min(pos: PolarPosition, c: f64, directions: usize) -> Result<f64> {
    let u = eval_u_polar(pos)?.u;
    if u > c + HILL_TOL {
        return Err(Error::OutsideHillRegion { excess: u - c });
    }
    let q = cartesian_from_polar(pos, Q_M1);
    let co = coefficients(pos);
    let dr = radial_derivative(pos)?;
    let radius = (8.0 * (c - u).max(0.0)).sqrt();
    let mut best = f64::INFINITY;
    for j in 0..directions {
        let phi = TAU * j as f64 / directions as f64;
        let p = momentum_from_kinetic_vector(q, [radius * phi.cos(), radius * phi.sin()]);
        let f = co.f(p);
        let g = co.g(p);
        let xk = pos.rho / 4.0 * (f[0] * g[0] + f[1] * g[1]);
        best = best.min(xk + pos.rho * dr);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitReport {
    pub alpha: f64,
    /// `√(α (408√2 − 577)/(280√2 − 396))` evaluated literally.
    pub closed_form_literal: f64,
    /// The same surd after rationalisation, `√(α (3 − 2√2)/4)`.
    pub closed_form: f64,
    /// `√(α/2) (2 − √2)/2`.
    pub simplified: f64,
    pub extrapolated: f64,
    pub extrapolation_error: f64,
    /// Largest spread of the extrapolated limit across the sampled angles.
    pub angular_spread: f64,
}

/// Limit of the kinetic bound as `ρ → 0⁺` at `c = −1`; the `β` term drops out.
pub fn limit_constant(k: WitnessConstants) -> Result<LimitReport> {
    let alpha = k.alpha;
    let literal = (alpha * (408.0 * SQRT_2 - 577.0) / (280.0 * SQRT_2 - 396.0)).sqrt();
    let closed = (alpha * (3.0 - 2.0 * SQRT_2) / 4.0).sqrt();
    let simplified = (alpha / 2.0).sqrt() * (2.0 - SQRT_2) / 2.0;
    let thetas = [0.0, 0.7, 1.9, 3.0, 4.4, 5.6];
    let mut limits = Vec::new();
    let mut err: f64 = 0.0;
    for &theta in &thetas {
        let vals: Vec<f64> = (0..10)
            .map(|m| {
                let rho = 1e-2 / 2f64.powi(m);
                let u = eval_u_polar(PolarPosition::new(rho, theta))?.u;
                Ok(kinetic_bound(rho, L1_ENERGY - u, k))
            })
            .collect::<Result<_>>()?;
        let (best, e) = richardson(&vals);
        limits.push(best);
        err = err.max(e);
    }
    let hi = limits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = limits.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LimitReport {
        alpha,
        closed_form_literal: literal,
        closed_form: closed,
        simplified,
        extrapolated: limits[0],
        extrapolation_error: err,
        angular_spread: hi - lo,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaurentRow {
    pub theta: f64,
    /// Extrapolated `lim ρ² ∂ρ𝒰_i` (the `ρ⁻¹` coefficient of `ρ∂ρ𝒰_i`).
    pub inverse_coeff: [f64; 3],
    /// Extrapolated `lim ∂ρ𝒰_i` (the `ρ` coefficient of `ρ∂ρ𝒰_i`) for the two
    /// regular terms.
    pub linear_coeff: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaurentReport {
    pub rows: Vec<LaurentRow>,
    /// `(2 − √2)/2`.
    pub expected_pole: f64,
    /// `(√2−1)²/(2−√2)³` and `(2√2−3)/(2−√2)³`, the `cos θ` factors.
    pub expected_linear: [f64; 2],
    pub max_pole_error: f64,
    pub max_linear_error: f64,
}

pub fn laurent_check() -> Result<LaurentReport> {
    let t = (2.0 - SQRT_2).powi(3);
    let expected_linear = [S * S / t, (2.0 * SQRT_2 - 3.0) / t];
    let thetas = [0.0, 0.5, 1.0, std::f64::consts::FRAC_PI_2, 2.5, std::f64::consts::PI, 4.0, 5.5];
    let mut rows = Vec::new();
    let (mut pole_err, mut lin_err): (f64, f64) = (0.0, 0.0);
    for &theta in &thetas {
        let series = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
            let vals: Vec<f64> = (0..10).map(|m| f(1e-2 / 2f64.powi(m))).collect::<Result<_>>()?;
            Ok(richardson(&vals).0)
        };
        let term = |i: usize, rho: f64| crate::hamiltonian::radial_derivatives(PolarPosition::new(rho, theta)).map(|r| r[i]);
        let inv = [
            series(&|rho| term(0, rho).map(|v| rho * rho * v))?,
            series(&|rho| term(1, rho).map(|v| rho * rho * v))?,
            series(&|rho| term(2, rho).map(|v| rho * rho * v))?,
        ];
        let lin = [series(&|rho| term(0, rho))?, series(&|rho| term(1, rho))?];
        pole_err = pole_err.max(inv[0].abs()).max(inv[1].abs()).max((inv[2] - POLE_RESIDUE).abs());
        let cs = theta.cos();
        lin_err = lin_err
            .max((lin[0] - expected_linear[0] * cs).abs())
            .max((lin[1] - expected_linear[1] * cs).abs());
        rows.push(LaurentRow { theta, inverse_coeff: inv, linear_coeff: lin });
    }
    Ok(LaurentReport {
        rows,
        expected_pole: POLE_RESIDUE,
        expected_linear,
        max_pole_error: pole_err,
        max_linear_error: lin_err,
    })
}

/// Node layout of the contact scan: uniform outer and middle annuli and a
/// logarithmic inner disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactScanGrid {
    pub split: f64,
    pub inner_cut: f64,
    pub inner_floor: f64,
    pub n_outer: usize,
    pub n_middle: usize,
    pub n_inner: usize,
    pub n_theta: usize,
    /// Tolerance defining the boundary-equality set at `c = −1`.
    pub zero_tol: f64,
}

impl Default for ContactScanGrid {
    fn default() -> Self {
        Self {
            split: 0.37,
            inner_cut: 0.05,
            inner_floor: 1e-6,
            n_outer: 256,
            n_middle: 512,
            n_inner: 160,
            n_theta: 720,
            zero_tol: 1e-9,
        }
    }
}

impl ContactScanGrid {
    fn outer_radii(&self) -> Vec<f64> {
        (0..=self.n_outer)
            .map(|k| self.split + (S - self.split) * k as f64 / self.n_outer as f64)
            .collect()
    }

    fn middle_radii(&self) -> Vec<f64> {
        (1..self.n_middle)
            .map(|k| self.inner_cut + (self.split - self.inner_cut) * k as f64 / self.n_middle as f64)
            .collect()
    }

    fn inner_radii(&self) -> Vec<f64> {
        let (lo, hi) = (self.inner_floor.ln(), self.inner_cut.ln());
        (0..=self.n_inner)
            .map(|k| (lo + (hi - lo) * k as f64 / self.n_inner as f64).exp())
            .collect()
    }

    fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| TAU * j as f64 / self.n_theta as f64).collect()
    }
}

/// One node of a witness scan; `value` is `None` outside the Hill region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSample {
    pub rho: f64,
    pub theta: f64,
    pub value: Option<f64>,
}

pub fn witness_samples(radii: &[f64], thetas: &[f64], c: f64, k: WitnessConstants) -> Vec<WitnessSample> {
    let nodes: Vec<(f64, f64)> = radii.iter().flat_map(|&r| thetas.iter().map(move |&t| (r, t))).collect();
    nodes
        .into_par_iter()
        .map(|(rho, theta)| WitnessSample {
            rho,
            theta,
            value: key_inequality(PolarPosition { rho, theta }, c, k).ok(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactScan {
    pub c: f64,
    pub constants: WitnessConstants,
    pub outer: ScanReport,
    pub middle: ScanReport,
    pub inner: ScanReport,
    /// Closure below the inner floor: `P/ρ_floor − remainder − kinetic sup`.
    pub inner_closure_margin: f64,
    /// Witness at `(√2−1, 0)` when that node is in the region.
    pub boundary_value: Option<f64>,
    /// Number of nodes with witness below `zero_tol` outside the boundary cell.
    pub stray_zero_nodes: usize,
    pub pass: bool,
}

impl ContactScan {
    pub fn min(&self) -> f64 {
        self.outer.min.min(self.middle.min).min(self.inner.min)
    }
}

fn part_report(label: &str, grid: String, samples: &[WitnessSample], exclude: impl Fn(&WitnessSample) -> bool) -> ScanReport {
    let inside: Vec<&WitnessSample> = samples.iter().filter(|s| s.value.is_some() && !exclude(s)).collect();
    let min = reduce_min(inside.iter().map(|s| (s.value.unwrap(), vec![s.rho, s.theta])));
    ScanReport::positivity(label, grid, inside.len(), min)
}

pub fn certify_contact(c: f64, k: WitnessConstants, grid: &ContactScanGrid) -> Result<ContactScan> {
    if c > L1_ENERGY {
        return Err(Error::EnergyOutOfRange { c, reason: "contact scan requires c <= -1" });
    }
    let thetas = grid.thetas();
    let outer_r = grid.outer_radii();
    let d_rho = (S - grid.split) / grid.n_outer as f64;
    let d_theta = TAU / grid.n_theta as f64;
    let in_boundary_cell = |s: &WitnessSample| {
        let ang = s.theta.min(TAU - s.theta);
        S - s.rho <= d_rho * (1.0 + 1e-9) && ang <= d_theta * (1.0 + 1e-9)
    };
    let at_boundary = |s: &WitnessSample| s.rho == S && s.theta == 0.0;

    let outer = witness_samples(&outer_r, &thetas, c, k);
    let middle = witness_samples(&grid.middle_radii(), &thetas, c, k);
    let inner_r = grid.inner_radii();
    let inner = witness_samples(&inner_r, &thetas, c, k);

    let outer_rep = part_report(
        "outer annulus",
        format!("rho in [{}, sqrt2-1] n={} x theta n={}", grid.split, grid.n_outer + 1, grid.n_theta),
        &outer,
        at_boundary,
    );
    let middle_rep = part_report(
        "middle annulus",
        format!("rho in ({}, {}) n={} x theta n={}", grid.inner_cut, grid.split, grid.n_middle - 1, grid.n_theta),
        &middle,
        |_| false,
    );
    let inner_rep = part_report(
        "inner disk",
        format!("rho log-spaced in [{:e}, {}] n={} x theta n={}", grid.inner_floor, grid.inner_cut, grid.n_inner + 1, grid.n_theta),
        &inner,
        |_| false,
    );

    let boundary_value = outer.iter().find(|s| at_boundary(s)).and_then(|s| s.value);
    let stray = outer
        .iter()
        .chain(&middle)
        .chain(&inner)
        .filter(|s| matches!(s.value, Some(v) if v < grid.zero_tol) && !in_boundary_cell(s))
        .count();
    let cell_negative = outer
        .iter()
        .filter(|s| in_boundary_cell(s))
        .any(|s| matches!(s.value, Some(v) if v < -grid.zero_tol));

    let mut remainder: f64 = 0.0;
    let mut kinetic_sup: f64 = 0.0;
    for s in inner.iter().filter(|s| s.rho <= grid.inner_cut * 0.1) {
        let pos = PolarPosition { rho: s.rho, theta: s.theta };
        let dr = radial_derivative(pos)?;
        remainder = remainder.max((s.rho * dr - POLE_RESIDUE / s.rho).abs());
        let u = eval_u_polar(pos)?.u;
        kinetic_sup = kinetic_sup.max(kinetic_bound(s.rho, c - u, k));
    }
    let closure = POLE_RESIDUE / grid.inner_floor - remainder - kinetic_sup;

    let parts_ok = [&outer_rep, &middle_rep, &inner_rep].iter().all(|r| r.samples == 0 || r.min > 0.0);
    let boundary_ok = match boundary_value {
        Some(v) => v.abs() <= grid.zero_tol,
        None => true,
    };
    let pass = parts_ok && boundary_ok && stray == 0 && !cell_negative && closure > 0.0 && inner_rep.samples > 0;
    Ok(ContactScan {
        c,
        constants: k,
        outer: outer_rep,
        middle: middle_rep,
        inner: inner_rep,
        inner_closure_margin: closure,
        boundary_value,
        stray_zero_nodes: stray,
        pass,
    })
}

/// Scan of the witness with prescribed constants on a polar grid, returning
/// the minimum over nodes other than `(√2−1, 0)`.
pub fn witness_min(c: f64, k: WitnessConstants, grid: &PolarGrid) -> ScanReport {
    let nodes = grid.nodes();
    let vals: Vec<(f64, Vec<f64>)> = nodes
        .into_par_iter()
        .filter(|p| !(p.rho == S && p.theta == 0.0))
        .filter_map(|p| key_inequality(p, c, k).ok().map(|v| (v, vec![p.rho, p.theta])))
        .collect();
    let n = vals.len();
    ScanReport::positivity("witness", grid.describe(), n, reduce_min(vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::PlanarPhaseState;
    use crate::hamiltonian::{kinetic, kinetic_vector};

    #[test]
    fn coefficients_reproduce_kinetic_term() {
        let pos = PolarPosition::new(0.21, 1.3);
        let q = cartesian_from_polar(pos, Q_M1);
        let p = [0.7, -1.1];
        let co = coefficients(pos);
        let f = co.f(p);
        let st = PlanarPhaseState::from_qp(q, p);
        assert!(((f[0] * f[0] + f[1] * f[1]) / 8.0 - kinetic(&st)).abs() < 1e-12);
        let fv = kinetic_vector(&st);
        assert!((fv[0] - f[0]).abs() < 1e-12 && (fv[1] - f[1]).abs() < 1e-12);
    }

    #[test]
    fn printed_b2_has_flipped_sign() {
        let pos = PolarPosition::new(0.2, 0.4);
        let (a, b) = (coefficients(pos), coefficients_printed(pos));
        assert_eq!(a.b2, -b.b2);
        assert_eq!(a.d2, b.d2);
    }

    #[test]
    fn homogeneous_quadratic_has_zero_roots() {
        // On the axis q2 = 0 both b1 and d1 vanish.
        let pos = PolarPosition::new(0.2, 0.0);
        let co = coefficients(pos);
        assert!(co.b1.abs() < 1e-15 && co.d1.abs() < 1e-15);
        let r = quadratic_root_bound(pos, AlphaMode::Paper.value(), 1).unwrap();
        assert_eq!(r.roots, Some((0.0, 0.0)));
        assert_eq!(r.t, 0.0);
    }

    #[test]
    fn alpha_too_small_is_rejected() {
        let err = quadratic_root_bound(PolarPosition::new(0.3, 0.0), 1e-3, 1).unwrap_err();
        assert!(matches!(err, Error::AlphaTooSmall { .. }));
    }

    #[test]
    fn alpha_mode_parsing() {
        assert_eq!("both".parse::<AlphaMode>().unwrap(), AlphaMode::Both);
        assert!("21.96".parse::<AlphaMode>().is_err());
        assert!((AlphaMode::Paper.value() - 21.96).abs() < 5e-3);
        assert!((AlphaMode::Strict.value() - 87.85).abs() < 5e-3);
    }
}
