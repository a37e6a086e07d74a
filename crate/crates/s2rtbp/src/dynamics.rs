//! Integration of the physical flow, the regularized flow on `T*S²`, chart
//! switching near the primaries, and a shooting search for periodic orbits.

use nalgebra::{Matrix2, Matrix4, Vector2};
use serde::{Deserialize, Serialize};

use crate::charts::{dist2, flip, flip_position, moser_lift, moser_project, unflip, PlanarPhaseState, SphereCotangentState};
use crate::consts::{Q_M1, Q_M2};
use crate::error::{Error, Result};
use crate::hamiltonian::{h_value, kinetic_vector, momentum_from_kinetic_vector, potential_value, vector_field, Primary};
use crate::output::Table;
use crate::regularization::{etilde_gradient, etilde_unchecked, Subproblem};

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4)

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Zero selects an automatic first step.
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, h_init: 0.0, h_max: 0.1, max_steps: 5_000_000 }
    }
}

impl IntegratorOptions {
    pub fn halved(&self) -> Self {
        Self { rtol: self.rtol / 2.0, atol: self.atol / 2.0, ..*self }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Dense output at `t0 + theta·h`, `theta ∈ [0, 1]`.
    pub fn eval(&self, theta: f64) -> [f64; N] {
        let r = &self.rcont;
        let t1 = 1.0 - theta;
        std::array::from_fn(|i| r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i]))))
    }
}

pub enum Control<const N: usize> {
    Continue,
    Stop,
    /// Continue from a replacement of `y1`, e.g. after a projection.
    Replace([f64; N]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    pub t_final: f64,
    pub stopped_early: bool,
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], opts: &IntegratorOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

/// Adaptive Dormand–Prince integration from `t0` to `t_end` (either
/// direction). `on_step` sees every accepted step.
pub fn dopri5<const N: usize>(
    mut rhs: impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &IntegratorOptions,
    mut on_step: impl FnMut(&Step<N>) -> Result<Control<N>>,
) -> Result<IntegrationStats> {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;
    let mut h = if opts.h_init > 0.0 {
        opts.h_init
    } else {
        let d0 = error_norm(&y, &[0.0; N], &y, opts);
        let d1 = error_norm(&k1, &[0.0; N], &y, opts);
        if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }
    };
    h = h.min(opts.h_max).min(span);
    let mut stats = IntegrationStats { steps: 0, rejected: 0, t_final: t0, stopped_early: false };
    if span == 0.0 {
        return Ok(stats);
    }
    let mut last_failure = String::new();
    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 1e-15 * t.abs().max(1.0) {
            break;
        }
        if stats.steps >= opts.max_steps {
            return Err(Error::Integration(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
        }
        let hs = dir * h.min(remaining);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration(format!(
                "step size underflow at t = {t}, state {y:?}{}",
                if last_failure.is_empty() { String::new() } else { format!(", last failure: {last_failure}") }
            )));
        }
        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        let mut failed = None;
        for s in 1..7 {
            let ys: [f64; N] = std::array::from_fn(|i| y[i] + hs * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>());
            match rhs(t + C[s] * hs, &ys) {
                Ok(v) => k[s] = v,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            last_failure = e.to_string();
            stats.rejected += 1;
            h *= 0.25;
            continue;
        }
        let y1: [f64; N] = std::array::from_fn(|i| y[i] + hs * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>());
        let err: [f64; N] = std::array::from_fn(|i| hs * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>());
        let en = error_norm(&err, &y, &y1, opts);
        if !en.is_finite() || en > 1.0 {
            stats.rejected += 1;
            h *= if en.is_finite() { (0.9 * en.powf(-0.2)).max(0.2) } else { 0.25 };
            continue;
        }
        let rcont: [[f64; N]; 5] = {
            let r1 = y;
            let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
            let r3: [f64; N] = std::array::from_fn(|i| hs * k[0][i] - r2[i]);
            let r4: [f64; N] = std::array::from_fn(|i| r2[i] - hs * k[6][i] - r3[i]);
            let r5: [f64; N] = std::array::from_fn(|i| hs * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>());
            [r1, r2, r3, r4, r5]
        };
        let step = Step { t0: t, h: hs, y0: y, y1, rcont };
        stats.steps += 1;
        t += hs;
        let control = on_step(&step)?;
        match control {
            Control::Continue => {
                y = y1;
                k1 = k[6];
            }
            Control::Replace(v) => {
                y = v;
                k1 = rhs(t, &y)?;
            }
            Control::Stop => {
                stats.stopped_early = true;
                stats.t_final = t;
                return Ok(stats);
            }
        }
        let fac = if en == 0.0 { 10.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 10.0) };
        h = (h * fac).min(opts.h_max);
    }
    stats.t_final = t;
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Physical,
    /// Regularized chart of the first primary.
    RegularizedM1,
    /// The second primary, handled through the mirror and the first chart.
    RegularizedM2,
}

impl Chart {
    pub fn code(self) -> f64 {
        match self {
            Chart::Physical => 0.0,
            Chart::RegularizedM1 => 1.0,
            Chart::RegularizedM2 => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub s: Option<f64>,
    pub chart: Chart,
    /// Chart state: `(q, p)` or `(ξ, η)`.
    pub state: Vec<f64>,
    /// The chart's own Hamiltonian.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub rejected: usize,
    /// Largest `|H − H0|` over physical samples.
    pub max_energy_drift: f64,
    /// Largest `|Ẽ − Ẽ0|` over regularized samples.
    pub max_regularized_drift: f64,
    /// Largest constraint residual before projection.
    pub max_constraint_drift: f64,
    /// Primary whose switch radius ended a physical run.
    pub switch: Option<Primary>,
}

impl Trajectory {
    fn empty() -> Self {
        Self {
            samples: Vec::new(),
            steps: 0,
            rejected: 0,
            max_energy_drift: 0.0,
            max_regularized_drift: 0.0,
            max_constraint_drift: 0.0,
            switch: None,
        }
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    fn absorb(&mut self, other: Trajectory) {
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.max_energy_drift = self.max_energy_drift.max(other.max_energy_drift);
        self.max_regularized_drift = self.max_regularized_drift.max(other.max_regularized_drift);
        self.max_constraint_drift = self.max_constraint_drift.max(other.max_constraint_drift);
        self.samples.extend(other.samples);
    }

    /// Rows `(t, s, chart, q1, q2, p1, p2, energy)`, regularized samples
    /// mapped to the physical chart (NaN at the projection point).
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["t", "s", "chart", "q1", "q2", "p1", "p2", "energy"])
            .with_comment("chart: 0 physical, 1 regularized at m1, 2 regularized at m2 (mirrored)");
        for smp in &self.samples {
            let z = physical_of_sample(smp).map(|z| z.to_array()).unwrap_or([f64::NAN; 4]);
            t.push(vec![smp.t, smp.s.unwrap_or(f64::NAN), smp.chart.code(), z[0], z[1], z[2], z[3], smp.energy]);
        }
        t
    }
}

/// The physical state represented by a sample.
pub fn physical_of_sample(smp: &Sample) -> Option<PlanarPhaseState> {
    match smp.chart {
        Chart::Physical => Some(PlanarPhaseState::new(smp.state[0], smp.state[1], smp.state[2], smp.state[3])),
        Chart::RegularizedM1 | Chart::RegularizedM2 => {
            let s = SphereCotangentState::from_array(&smp.state[..6]);
            let w = unflip(&moser_project(&s).ok()?, Q_M1);
            Some(if smp.chart == Chart::RegularizedM2 { w.mirrored() } else { w })
        }
    }
}

fn physical_rhs(_t: f64, z: &[f64; 4]) -> Result<[f64; 4]> {
    vector_field(&PlanarPhaseState::from_array(*z))
}

/// Energy drift allowed on physical samples before the run is aborted.
pub const ENERGY_DRIFT_LIMIT: f64 = 1e-6;

/// Integrates Hamilton's equations. With `switch_radius`, stops at the first
/// accepted step within that distance of a primary.
pub fn integrate_physical(z0: &PlanarPhaseState, t_end: f64, opts: &IntegratorOptions, switch_radius: Option<f64>) -> Result<Trajectory> {
    let h0 = h_value(z0)?;
    let mut traj = Trajectory::empty();
    traj.samples.push(Sample { t: 0.0, s: None, chart: Chart::Physical, state: z0.to_array().to_vec(), energy: h0 });
    let mut switch = None;
    let mut drift: f64 = 0.0;
    let stats = dopri5(physical_rhs, 0.0, z0.to_array(), t_end, opts, |step| {
        let z = PlanarPhaseState::from_array(step.y1);
        let h = h_value(&z)?;
        drift = drift.max((h - h0).abs());
        if drift > ENERGY_DRIFT_LIMIT {
            return Err(Error::Integration(format!("energy drift {drift:e} at t = {} exceeds {ENERGY_DRIFT_LIMIT:e}", step.t1())));
        }
        traj.samples.push(Sample { t: step.t1(), s: None, chart: Chart::Physical, state: step.y1.to_vec(), energy: h });
        if let Some(r) = switch_radius {
            for p in [Primary::M1, Primary::M2] {
                if dist2(z.q(), p.position()) < r {
                    switch = Some(p);
                    return Ok(Control::Stop);
                }
            }
        }
        Ok(Control::Continue)
    })?;
    traj.steps = stats.steps;
    traj.rejected = stats.rejected;
    traj.max_energy_drift = drift;
    traj.switch = switch;
    Ok(traj)
}

/// Flow of `F` on `T*S² ⊂ ℝ⁶` from its ambient gradient.
pub fn constrained_field(s: &SphereCotangentState, grad: &[f64; 6]) -> [f64; 6] {
    let (xi, eta) = (s.xi, s.eta);
    let gx = [grad[0], grad[1], grad[2]];
    let ge = [grad[3], grad[4], grad[5]];
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let xge = dot(&xi, &ge);
    let ege = dot(&eta, &ge);
    let xgx = dot(&xi, &gx);
    let mut out = [0.0; 6];
    for i in 0..3 {
        out[i] = ge[i] - xge * xi[i];
        out[3 + i] = -gx[i] - (ege - xgx) * xi[i] + xge * eta[i];
    }
    out
}

/// Regularized chart settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedFlow {
    pub k: f64,
    pub subproblem: Subproblem,
}

/// State `(ξ, η, t)`: the flow of `Ẽ` in `s` with `dt/ds = |y|`.
fn regularized_rhs(flow: RegularizedFlow) -> impl Fn(f64, &[f64; 7]) -> Result<[f64; 7]> {
    move |_s, z| {
        let st = SphereCotangentState::from_array(&z[..6]);
        let (_, g) = etilde_gradient(&st, flow.k, flow.subproblem)?;
        let v = constrained_field(&st, &g);
        let y = flip_position(&st);
        Ok([v[0], v[1], v[2], v[3], v[4], v[5], y[0].hypot(y[1])])
    }
}

/// Constraint drift that aborts a regularized run.
pub const CONSTRAINT_DRIFT_LIMIT: f64 = 1e-6;

/// Gate on `|Ẽ(s0)|` for a regularized start.
pub const LEVEL_GATE: f64 = 1e-9;

enum RegularizedStop {
    None,
    /// Stop once `|y|` exceeds the radius.
    Exit(f64),
    /// Stop when the chart time reaches the target, located on dense output.
    Time(f64),
}

fn run_regularized(
    s0: &SphereCotangentState,
    s_end: f64,
    flow: RegularizedFlow,
    opts: &IntegratorOptions,
    chart: Chart,
    t_offset: f64,
    t_sign: f64,
    stop: RegularizedStop,
) -> Result<(Trajectory, [f64; 7])> {
    let e0 = etilde_unchecked(s0, flow.k, flow.subproblem)?;
    let mut traj = Trajectory::empty();
    let mut state = [s0.xi[0], s0.xi[1], s0.xi[2], s0.eta[0], s0.eta[1], s0.eta[2], 0.0];
    traj.samples.push(Sample { t: t_offset, s: Some(0.0), chart, state: s0.to_array().to_vec(), energy: e0 });
    let mut drift: f64 = 0.0;
    let mut cdrift: f64 = 0.0;
    let rhs = regularized_rhs(flow);
    let stats = dopri5(&rhs, 0.0, state, s_end, opts, |step| {
        let raw = SphereCotangentState::from_array(&step.y1[..6]);
        let (a, b) = raw.constraint_residual();
        cdrift = cdrift.max(a.abs()).max(b.abs());
        if cdrift > CONSTRAINT_DRIFT_LIMIT {
            return Err(Error::ConstraintDrift { drift: cdrift });
        }
        let mut end = step.y1;
        let mut sigma = step.t1();
        let mut halt = false;
        match stop {
            RegularizedStop::Time(target) => {
                if (step.y1[6] - target) * (step.y0[6] - target) <= 0.0 && step.y1[6] != step.y0[6] {
                    let (mut lo, mut hi) = (0.0, 1.0);
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        let v = step.eval(mid)[6];
                        if (v - target) * (step.y0[6] - target) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                        if hi - lo < 1e-16 {
                            break;
                        }
                    }
                    end = step.eval(hi);
                    end[6] = target;
                    sigma = step.t0 + hi * step.h;
                    halt = true;
                }
            }
            RegularizedStop::Exit(r) => {
                let y = flip_position(&raw);
                halt = y[0].hypot(y[1]) > r;
            }
            RegularizedStop::None => {}
        }
        let proj = SphereCotangentState::from_array(&end[..6]).projected();
        let e = etilde_unchecked(&proj, flow.k, flow.subproblem)?;
        drift = drift.max((e - e0).abs());
        let a = proj.to_array();
        let projected = [a[0], a[1], a[2], a[3], a[4], a[5], end[6]];
        traj.samples.push(Sample { t: t_offset + t_sign * end[6], s: Some(sigma), chart, state: a.to_vec(), energy: e });
        state = projected;
        Ok(if halt { Control::Stop } else { Control::Replace(projected) })
    })?;
    traj.steps = stats.steps;
    traj.rejected = stats.rejected;
    traj.max_regularized_drift = drift;
    traj.max_constraint_drift = cdrift;
    Ok((traj, state))
}

/// Flow of `Ẽ` from `s0` over rescaled time `[0, s_end]` (either sign).
/// Sample times `t` are the physical times `∫ |y| ds`.
pub fn integrate_regularized(s0: &SphereCotangentState, s_end: f64, flow: RegularizedFlow, opts: &IntegratorOptions) -> Result<Trajectory> {
    s0.check_constraints(LEVEL_GATE)?;
    let e0 = etilde_unchecked(s0, flow.k, flow.subproblem)?;
    if e0.abs() > LEVEL_GATE {
        return Err(Error::Integration(format!("start is off the zero level (E~ = {e0:e})")));
    }
    Ok(run_regularized(s0, s_end, flow, opts, Chart::RegularizedM1, 0.0, 1.0, RegularizedStop::None)?.0)
}

/// Regularized flow until the chart time reaches `t_target` (either sign).
pub fn regularized_to_time(
    s0: &SphereCotangentState,
    t_target: f64,
    flow: RegularizedFlow,
    opts: &IntegratorOptions,
) -> Result<(SphereCotangentState, Trajectory)> {
    let s_cap = t_target.signum() * 1e6;
    let (traj, end) = run_regularized(s0, s_cap, flow, opts, Chart::RegularizedM1, 0.0, 1.0, RegularizedStop::Time(t_target))?;
    if (end[6] - t_target).abs() > 1e-12 * t_target.abs().max(1.0) {
        return Err(Error::Integration(format!("chart time {} did not reach {t_target}", end[6])));
    }
    Ok((SphereCotangentState::from_array(&end[..6]), traj))
}

/// Lift of a physical state near the first primary.
pub fn lift_near_m1(z: &PlanarPhaseState) -> SphereCotangentState {
    moser_lift(&flip(z, Q_M1))
}

/// Physical flow with automatic switches to the regularized charts within
/// `switch_radius` of a primary, returning to the physical chart beyond twice
/// that radius.
pub fn integrate_hybrid(z0: &PlanarPhaseState, t_end: f64, opts: &IntegratorOptions, switch_radius: f64) -> Result<Trajectory> {
    if t_end < 0.0 {
        return Err(Error::Integration("hybrid runs integrate forward in time".into()));
    }
    let k = h_value(z0)?;
    let mut traj = Trajectory::empty();
    let mut z = *z0;
    let mut t = 0.0;
    let mut legs = 0;
    while t < t_end * (1.0 - 1e-15) {
        legs += 1;
        if legs > 100_000 {
            return Err(Error::Integration("too many chart switches".into()));
        }
        let near = [Primary::M1, Primary::M2].into_iter().find(|p| dist2(z.q(), p.position()) < switch_radius);
        match near {
            None => {
                let mut leg = integrate_physical(&z, t_end - t, opts, Some(switch_radius))?;
                for smp in &mut leg.samples {
                    smp.t += t;
                }
                if !traj.samples.is_empty() {
                    leg.samples.remove(0);
                }
                let last = leg.samples.last().cloned();
                leg.max_energy_drift = leg
                    .samples
                    .iter()
                    .map(|s| (s.energy - k).abs())
                    .fold(0.0, f64::max);
                traj.absorb(leg);
                if let Some(last) = last {
                    t = last.t;
                    z = PlanarPhaseState::new(last.state[0], last.state[1], last.state[2], last.state[3]);
                }
            }
            Some(p) => {
                let (w, chart, sign) = match p {
                    Primary::M1 => (z, Chart::RegularizedM1, 1.0),
                    Primary::M2 => (z.mirrored(), Chart::RegularizedM2, -1.0),
                };
                let s0 = lift_near_m1(&w);
                let flow = RegularizedFlow { k, subproblem: Subproblem::Full };
                let remaining = t_end - t;
                let (mut leg, end) = run_regularized(
                    &s0,
                    sign * 1e6,
                    flow,
                    opts,
                    chart,
                    t,
                    sign,
                    RegularizedStop::Exit(2.0 * switch_radius),
                )?;
                // Trim at t_end if the leg overshoots.
                let overshoot = leg.samples.iter().position(|s| s.t > t_end);
                let end_state = if overshoot.is_some() {
                    // Chart times of this rerun start at zero.
                    let (st, mut short) = regularized_to_time(&s0, sign * remaining, flow, opts)?;
                    for smp in &mut short.samples {
                        smp.chart = chart;
                        smp.t = t + sign * smp.t;
                    }
                    leg = short;
                    st
                } else {
                    SphereCotangentState::from_array(&end[..6])
                };
                if !traj.samples.is_empty() {
                    leg.samples.remove(0);
                }
                let w_end = unflip(&moser_project(&end_state)?, Q_M1);
                let z_end = if p == Primary::M2 { w_end.mirrored() } else { w_end };
                let t_leg = leg.samples.last().map(|s| s.t).unwrap_or(t);
                traj.absorb(leg);
                z = z_end;
                t = t_leg;
                if overshoot.is_some() {
                    t = t_end;
                }
                let h = h_value(&z)?;
                traj.max_energy_drift = traj.max_energy_drift.max((h - k).abs());
            }
        }
    }
    Ok(traj)
}

/// Physical state at time `t` (no chart switching).
pub fn physical_state_at(z0: &PlanarPhaseState, t: f64, opts: &IntegratorOptions) -> Result<PlanarPhaseState> {
    let mut end = z0.to_array();
    let mut drift_ok = Ok(());
    dopri5(physical_rhs, 0.0, z0.to_array(), t, opts, |step| {
        end = step.y1;
        if !step.y1.iter().all(|v| v.is_finite()) {
            drift_ok = Err(Error::Integration("non-finite state".into()));
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    })?;
    drift_ok?;
    Ok(PlanarPhaseState::from_array(end))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartComparison {
    pub checkpoints: Vec<f64>,
    /// Largest Euclidean state difference in `(q, p)`.
    pub max_difference: f64,
    pub regularized_drift: f64,
}

/// Integrates the same physical segment in both charts and compares the
/// states at the checkpoint times.
pub fn compare_charts(z0: &PlanarPhaseState, checkpoints: &[f64], opts: &IntegratorOptions) -> Result<ChartComparison> {
    let k = h_value(z0)?;
    let s0 = lift_near_m1(z0);
    let flow = RegularizedFlow { k, subproblem: Subproblem::Full };
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for &t in checkpoints {
        let zp = physical_state_at(z0, t, opts)?;
        let (sr, traj) = regularized_to_time(&s0, t, flow, opts)?;
        drift = drift.max(traj.max_regularized_drift);
        let zr = unflip(&moser_project(&sr)?, Q_M1);
        let d = zp.to_array().iter().zip(zr.to_array()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d);
    }
    Ok(ChartComparison { checkpoints: checkpoints.to_vec(), max_difference: worst, regularized_drift: drift })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRun {
    pub k: f64,
    pub max_xi0: f64,
    /// `ξ1` changed sign while `1 − ξ0 < 1e−3`.
    pub passed_through: bool,
    pub energy_drift: f64,
    pub constraint_drift: f64,
    pub steps: usize,
}

/// Radial fall from rest at `q_m1 + (r, 0)` in the Kepler subproblem,
/// integrated through the projection point.
pub fn kepler_collision_run(r: f64, s_end: f64, opts: &IntegratorOptions) -> Result<CollisionRun> {
    let z0 = PlanarPhaseState::new(Q_M1[0] + r, 0.0, 0.0, 0.0);
    let s0 = lift_near_m1(&z0);
    // At rest the lift sits on the south pole, where Ẽ = −k|y| − g(y).
    let g0 = -etilde_unchecked(&s0, 0.0, Subproblem::Kepler)?;
    let k = -g0 / r;
    let flow = RegularizedFlow { k, subproblem: Subproblem::Kepler };
    let traj = integrate_regularized(&s0, s_end, flow, opts)?;
    let mut max_xi0 = f64::NEG_INFINITY;
    let mut passed = false;
    let mut prev: Option<&Sample> = None;
    for smp in &traj.samples {
        max_xi0 = max_xi0.max(smp.state[0]);
        if let Some(p) = prev {
            if p.state[1] * smp.state[1] < 0.0 && p.state[0].max(smp.state[0]) > 1.0 - 1e-3 {
                passed = true;
            }
        }
        prev = Some(smp);
    }
    Ok(CollisionRun {
        k,
        max_xi0,
        passed_through: passed,
        energy_drift: traj.max_regularized_drift,
        constraint_drift: traj.max_constraint_drift,
        steps: traj.steps,
    })
}

// ---------------------------------------------------------------------------
// Periodic orbits

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// `q2` increasing through zero.
    Upward,
    Downward,
}

impl Crossing {
    fn sign(self) -> f64 {
        match self {
            Crossing::Upward => 1.0,
            Crossing::Downward => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbitResult {
    pub c: f64,
    pub crossing: Crossing,
    pub initial_state: [f64; 4],
    pub period: f64,
    /// `|z(T) − z(0)|`.
    pub residual: f64,
    pub floquet_moduli: [f64; 4],
    pub energy_drift: f64,
    pub iterations: usize,
}

/// Point of `{q2 = 0} ∩ H⁻¹(c)` with kinetic vector at angle `phi`.
pub fn section_state(c: f64, q1: f64, phi: f64) -> Result<PlanarPhaseState> {
    let q = [q1, 0.0];
    let u = potential_value(q)?;
    if u > c {
        return Err(Error::OutsideHillRegion { excess: u - c });
    }
    let r = (8.0 * (c - u)).sqrt();
    Ok(PlanarPhaseState::from_qp(q, momentum_from_kinetic_vector(q, [r * phi.cos(), r * phi.sin()])))
}

fn wrap(a: f64) -> f64 {
    crate::charts::normalize_angle(a + std::f64::consts::PI) - std::f64::consts::PI
}

/// Next crossing of `q2 = 0` in the given direction, with its time.
pub fn first_return(z0: &PlanarPhaseState, crossing: Crossing, t_max: f64, opts: &IntegratorOptions) -> Result<(PlanarPhaseState, f64)> {
    let sg = crossing.sign();
    let mut hit: Option<([f64; 4], f64)> = None;
    let min_time = 1e-6;
    dopri5(physical_rhs, 0.0, z0.to_array(), t_max, opts, |step| {
        let (a, b) = (step.y0[1] * sg, step.y1[1] * sg);
        if step.t1() > min_time && a < 0.0 && b >= 0.0 {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if step.eval(mid)[1] * sg < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            // One Newton polish on the dense output.
            let theta = 0.5 * (lo + hi);
            let mut y = step.eval(theta);
            let v = vector_field(&PlanarPhaseState::from_array(y))?;
            let dt = -y[1] / v[1];
            for i in 0..4 {
                y[i] += v[i] * dt;
            }
            hit = Some((y, step.t0 + theta * step.h + dt));
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    })?;
    hit.map(|(y, t)| (PlanarPhaseState::from_array(y), t))
        .ok_or_else(|| Error::Integration(format!("no section return before t = {t_max}")))
}

fn phi_of(z: &PlanarPhaseState) -> f64 {
    let f = kinetic_vector(z);
    f[1].atan2(f[0])
}

/// Newton iteration on the return map of `{q2 = 0}` in the unknowns
/// `(q1, φ)`, the momentum being closed by `H = c`.
pub fn find_periodic_orbit(c: f64, seed: &PlanarPhaseState, crossing: Crossing, opts: &IntegratorOptions) -> Result<PeriodicOrbitResult> {
    if c >= -0.95 {
        return Err(Error::EnergyOutOfRange { c, reason: "periodic orbit search needs c < -1 or the neck window" });
    }
    let t_max = 50.0;
    let map = |x: Vector2<f64>| -> Result<(Vector2<f64>, f64, PlanarPhaseState)> {
        let z = section_state(c, x[0], x[1])?;
        let (zr, t) = first_return(&z, crossing, t_max, opts)?;
        Ok((Vector2::new(zr.q1 - x[0], wrap(phi_of(&zr) - x[1])), t, z))
    };
    let mut x = Vector2::new(seed.q1, phi_of(seed));
    let mut iterations = 0;
    let mut res = map(x)?.0.norm();
    while res > 1e-12 && iterations < 40 {
        iterations += 1;
        let (r0, _, _) = map(x)?;
        let hd = 1e-7;
        let mut j = Matrix2::zeros();
        for col in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[col] += hd;
            xm[col] -= hd;
            let d = (map(xp)?.0 - map(xm)?.0) / (2.0 * hd);
            j.set_column(col, &d);
        }
        let dx = j.lu().solve(&(-r0)).ok_or(Error::NoConvergence { iterations, residual: res })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial = x + dx * lambda;
            if let Ok((r, _, _)) = map(trial) {
                if r.norm() < res || r.norm() < 1e-12 {
                    x = trial;
                    res = r.norm();
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (_, period, z) = map(x)?;
    let end = physical_state_at(&z, period, opts)?;
    let residual = z.to_array().iter().zip(end.to_array()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if residual > 1e-8 {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let traj = integrate_physical(&z, period, opts, None)?;
    let floquet_moduli = floquet_moduli(&z, period, opts)?;
    Ok(PeriodicOrbitResult {
        c,
        crossing,
        initial_state: z.to_array(),
        period,
        residual,
        floquet_moduli,
        energy_drift: traj.max_energy_drift,
        iterations,
    })
}

/// Moduli of the eigenvalues of the time-`T` flow map's Jacobian, ascending.
pub fn floquet_moduli(z: &PlanarPhaseState, period: f64, opts: &IntegratorOptions) -> Result<[f64; 4]> {
    let base = z.to_array();
    let mut m = Matrix4::zeros();
    let hd = 1e-7;
    for col in 0..4 {
        let mut a = base;
        let mut b = base;
        a[col] += hd;
        b[col] -= hd;
        let fa = physical_state_at(&PlanarPhaseState::from_array(a), period, opts)?.to_array();
        let fb = physical_state_at(&PlanarPhaseState::from_array(b), period, opts)?.to_array();
        for row in 0..4 {
            m[(row, col)] = (fa[row] - fb[row]) / (2.0 * hd);
        }
    }
    let ev = m.complex_eigenvalues();
    let mut moduli: Vec<f64> = ev.iter().map(|c| c.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    Ok([moduli[0], moduli[1], moduli[2], moduli[3]])
}

/// Seed on `{q2 = 0}` at distance `r` from a primary, moving across the
/// axis: upward right of the first primary, downward left of the second.
pub fn circular_seed(c: f64, primary: Primary, r: f64) -> Result<(PlanarPhaseState, Crossing)> {
    match primary {
        Primary::M1 => Ok((section_state(c, Q_M1[0] + r, std::f64::consts::FRAC_PI_2)?, Crossing::Upward)),
        Primary::M2 => Ok((section_state(c, Q_M2[0] - r, -std::f64::consts::FRAC_PI_2)?, Crossing::Downward)),
    }
}

/// Radius of the circular orbit of the leading `−P/ρ` term at energy `c`,
/// with `P = 1 − √2/2` and the regular part of `U` frozen at the primary.
pub fn circular_radius_estimate(c: f64) -> f64 {
    let p = crate::consts::POLE_RESIDUE;
    let regular = -0.25;
    p / (2.0 * (regular - c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_accuracy() {
        let opts = IntegratorOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
        let mut last = [1.0];
        dopri5(|_, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], 2.0, &opts, |s| {
            last = s.y1;
            Ok(Control::Continue)
        })
        .unwrap();
        assert!((last[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_interpolates() {
        let opts = IntegratorOptions { rtol: 1e-10, atol: 1e-12, h_max: 0.5, ..Default::default() };
        let mut worst: f64 = 0.0;
        dopri5(|t, _y: &[f64; 1]| Ok([t.cos()]), 0.0, [0.0], 3.0, &opts, |s| {
            for k in 0..=10 {
                let th = k as f64 / 10.0;
                let v = s.eval(th)[0];
                worst = worst.max((v - (s.t0 + th * s.h).sin()).abs());
            }
            Ok(Control::Continue)
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn backward_integration() {
        let opts = IntegratorOptions::default();
        let mut last = [1.0];
        dopri5(|_, y: &[f64; 1]| Ok([y[0]]), 0.0, [1.0], -1.0, &opts, |s| {
            last = s.y1;
            Ok(Control::Continue)
        })
        .unwrap();
        assert!((last[0] - (-1.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn geodesic_flow_stays_on_great_circle() {
        // F = |η|²/2 generates the unit-speed great circles.
        let s = SphereCotangentState::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let g = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let v = constrained_field(&s, &g);
        assert_eq!(v, [0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn orbit_search_rejects_high_energy() {
        let z = PlanarPhaseState::new(-0.3, 0.0, 0.0, 1.0);
        assert!(matches!(
            find_periodic_orbit(-0.5, &z, Crossing::Upward, &IntegratorOptions::default()),
            Err(Error::EnergyOutOfRange { .. })
        ));
    }
}
