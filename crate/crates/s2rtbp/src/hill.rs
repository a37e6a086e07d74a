//! Hill regions (components of `{U ≤ c}`) and angular potential profiles.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::{dist2, PolarPosition};
use crate::consts::S;
use crate::error::{Error, Result};
use crate::hamiltonian::{eval_u_polar, potential_value, radial_derivative, Primary};
use crate::numdiff::second_derivative;

/// Square node grid on `[−L, L]²` with `cells + 1` nodes per axis, so an
/// even cell count puts a node column on `q1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeGrid {
    pub cells: usize,
    pub half_width: f64,
}

impl NodeGrid {
    pub fn new(cells: usize, half_width: f64) -> Self {
        Self { cells, half_width }
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.cells + 1
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    pub fn nearest(&self, q: [f64; 2]) -> (usize, usize) {
        let idx = |x: f64| {
            let k = ((x + self.half_width) / self.spacing()).round();
            k.clamp(0.0, self.cells as f64) as usize
        };
        (idx(q[0]), idx(q[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentLabel {
    M1,
    M2,
    Merged,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HillRegionMask {
    pub grid: NodeGrid,
    pub c: f64,
    pub primary: Primary,
    pub label: ComponentLabel,
    /// Row-major over `(i, j)` with `i` the `q1` index.
    #[serde(skip)]
    pub members: Vec<bool>,
    pub member_count: usize,
    pub area: f64,
    /// `[q1_min, q1_max, q2_min, q2_max]` over member nodes.
    pub bbox: [f64; 4],
    /// Largest distance from the primary to a member node.
    pub max_center_distance: f64,
}

impl HillRegionMask {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.members[i * self.grid.nodes_per_axis() + j]
    }

    /// `(inside, margin)` for the closed disk of radius `√2 − 1` about the
    /// primary; `inside` requires a strictly positive margin.
    pub fn disk_containment(&self) -> (bool, f64) {
        let margin = S - self.max_center_distance;
        (margin > 0.0, margin)
    }

    pub fn member_nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let n = self.grid.nodes_per_axis();
        (0..n * n)
            .filter(|&k| self.members[k])
            .map(move |k| self.grid.node(k / n, k % n))
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "q1,q2,member")?;
        let n = self.grid.nodes_per_axis();
        for i in 0..n {
            for j in 0..n {
                let q = self.grid.node(i, j);
                writeln!(
                    w,
                    "{},{},{}",
                    crate::output::fmt17(q[0]),
                    crate::output::fmt17(q[1]),
                    u8::from(self.contains(i, j))
                )?;
            }
        }
        Ok(())
    }
}

/// Potential on every node; collision nodes map to `−∞`.
pub fn potential_grid(grid: &NodeGrid) -> Vec<f64> {
    let n = grid.nodes_per_axis();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).map(move |j| potential_value(grid.node(i, j)).unwrap_or(f64::NEG_INFINITY))
        })
        .collect()
}

pub fn compute_hill_region(c: f64, primary: Primary, grid: &NodeGrid) -> Result<HillRegionMask> {
    let values = potential_grid(grid);
    hill_region_from_values(&values, c, primary, grid)
}

/// Flood fill (4-connectivity) of `{U ≤ c}` from the node nearest the primary.
pub fn hill_region_from_values(values: &[f64], c: f64, primary: Primary, grid: &NodeGrid) -> Result<HillRegionMask> {
    let n = grid.nodes_per_axis();
    let center = primary.position();
    let (si, sj) = grid.nearest(center);
    if values[si * n + sj] > c {
        return Err(Error::EmptyRegion);
    }
    let mut members = vec![false; n * n];
    let mut queue = VecDeque::new();
    members[si * n + sj] = true;
    queue.push_back((si, sj));
    let mut touches_edge = false;
    while let Some((i, j)) = queue.pop_front() {
        if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
            touches_edge = true;
        }
        let mut visit = |a: usize, b: usize| {
            let k = a * n + b;
            if !members[k] && values[k] <= c {
                members[k] = true;
                queue.push_back((a, b));
            }
        };
        if i > 0 {
            visit(i - 1, j);
        }
        if i + 1 < n {
            visit(i + 1, j);
        }
        if j > 0 {
            visit(i, j - 1);
        }
        if j + 1 < n {
            visit(i, j + 1);
        }
    }
    if touches_edge {
        return Err(Error::NotEnclosed);
    }
    let (oi, oj) = grid.nearest(primary.other().position());
    let label = if members[oi * n + oj] {
        ComponentLabel::Merged
    } else {
        match primary {
            Primary::M1 => ComponentLabel::M1,
            Primary::M2 => ComponentLabel::M2,
        }
    };
    let mut count = 0usize;
    let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    let mut max_d: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if members[i * n + j] {
                count += 1;
                let q = grid.node(i, j);
                bbox[0] = bbox[0].min(q[0]);
                bbox[1] = bbox[1].max(q[0]);
                bbox[2] = bbox[2].min(q[1]);
                bbox[3] = bbox[3].max(q[1]);
                max_d = max_d.max(dist2(q, center));
            }
        }
    }
    let h = grid.spacing();
    Ok(HillRegionMask {
        grid: *grid,
        c,
        primary,
        label,
        members,
        member_count: count,
        area: count as f64 * h * h,
        bbox,
        max_center_distance: max_d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `θ ↦ U(ρ, θ)`.
    Potential,
    /// `θ ↦ ∂ρU(ρ, θ)`.
    RadialDerivative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngularProfile {
    pub kind: ProfileKind,
    pub rho: f64,
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub argmin_index: usize,
    pub argmin_theta: f64,
    pub min: f64,
    /// Second `θ`-derivative at `θ = 0` by the three-point stencil (`h = 1e−4`).
    pub second_derivative_at_zero: f64,
}

impl AngularProfile {
    /// `min_θ [F(θ) − F(0)]`.
    pub fn min_excess_over_zero(&self) -> f64 {
        self.values.iter().map(|v| v - self.values[0]).fold(f64::INFINITY, f64::min)
    }
}

pub fn profile_value(kind: ProfileKind, rho: f64, theta: f64) -> f64 {
    let pos = PolarPosition::new(rho, theta);
    match kind {
        ProfileKind::Potential => eval_u_polar(pos).map(|u| u.u).unwrap_or(f64::NAN),
        ProfileKind::RadialDerivative => radial_derivative(pos).unwrap_or(f64::NAN),
    }
}

pub fn angular_profile(kind: ProfileKind, rho: f64, samples: usize) -> Result<AngularProfile> {
    if !(rho > 0.0 && rho <= S + 1e-15) {
        return Err(Error::Config(format!("profile radius {rho} outside (0, √2 − 1]")));
    }
    let thetas: Vec<f64> = (0..samples).map(|k| TAU * k as f64 / samples as f64).collect();
    let values: Vec<f64> = thetas.iter().map(|&t| profile_value(kind, rho, t)).collect();
    let (argmin_index, min) = argmin(&values);
    let second = second_derivative(|t| profile_value(kind, rho, t), 0.0, 1e-4);
    Ok(AngularProfile {
        kind,
        rho,
        argmin_theta: thetas[argmin_index],
        thetas,
        values,
        argmin_index,
        min,
        second_derivative_at_zero: second,
    })
}

pub fn boundary_profile(rho: f64, samples: usize) -> Result<AngularProfile> {
    angular_profile(ProfileKind::Potential, rho, samples)
}

pub fn radial_derivative_profile(rho: f64, samples: usize) -> Result<AngularProfile> {
    angular_profile(ProfileKind::RadialDerivative, rho, samples)
}

/// First minimum wins, so ties resolve to the smallest angle.
fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, &v) in values.iter().enumerate() {
        if v < best.1 {
            best = (k, v);
        }
    }
    best
}

/// Where the angular minimiser of a profile leaves `θ = 0` as `ρ` decreases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub kind: ProfileKind,
    /// Largest scanned radius whose minimiser is not at `θ = 0`.
    pub leaves_zero_below: Option<f64>,
    /// Largest scanned radius whose minimiser is at `θ = π`.
    pub reaches_pi_below: Option<f64>,
    pub rho_step: f64,
}

pub fn argmin_bifurcation(kind: ProfileKind, rho_min: f64, steps: usize, samples: usize) -> BifurcationReport {
    let step = (S - rho_min) / steps as f64;
    let radii: Vec<f64> = (0..=steps).map(|k| S - k as f64 * step).collect();
    let argmins: Vec<f64> = radii
        .par_iter()
        .map(|&rho| {
            let vals: Vec<f64> = (0..samples)
                .map(|k| profile_value(kind, rho, TAU * k as f64 / samples as f64))
                .collect();
            TAU * argmin(&vals).0 as f64 / samples as f64
        })
        .collect();
    let half_cell = PI / samples as f64;
    let leaves = radii.iter().zip(&argmins).find(|(_, &a)| a > half_cell && a < TAU - half_cell);
    let at_pi = radii.iter().zip(&argmins).find(|(_, &a)| (a - PI).abs() < half_cell);
    BifurcationReport {
        kind,
        leaves_zero_below: leaves.map(|(r, _)| *r),
        reaches_pi_below: at_pi.map(|(r, _)| *r),
        rho_step: step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_grid_has_axis_column() {
        let g = NodeGrid::new(1024, 1.0);
        assert_eq!(g.coord(512), 0.0);
        assert_eq!(g.nearest([0.0, 0.0]), (512, 512));
    }

    #[test]
    fn low_energy_region_is_small_and_enclosed() {
        let g = NodeGrid::new(256, 1.0);
        let m = compute_hill_region(-3.0, Primary::M1, &g).unwrap();
        assert_eq!(m.label, ComponentLabel::M1);
        assert!(m.disk_containment().0);
    }

    #[test]
    fn above_critical_energy_merges() {
        let g = NodeGrid::new(256, 1.0);
        let m = compute_hill_region(-0.9, Primary::M1, &g).unwrap();
        assert_eq!(m.label, ComponentLabel::Merged);
    }

    #[test]
    fn unbounded_sublevel_set_is_reported() {
        let g = NodeGrid::new(64, 1.0);
        assert_eq!(compute_hill_region(-0.01, Primary::M1, &g).unwrap_err(), Error::NotEnclosed);
    }

    #[test]
    fn boundary_profile_minimum() {
        let p = boundary_profile(S, 720).unwrap();
        assert_eq!(p.argmin_index, 0);
        assert!((p.min + 1.0).abs() < 1e-12);
    }
}
