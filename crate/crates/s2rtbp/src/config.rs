//! Run configuration: a TOML document with every default embedded.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consts::{L1_ENERGY, S};
use crate::contact::{estimate_alpha_beta, AlphaMode, BoundCertificate, ContactScanGrid, PolarGrid};
use crate::dynamics::IntegratorOptions;
use crate::error::{Error, Result};
use crate::hill::NodeGrid;
use crate::neck::{InterpolationSpec, NeckGrid};
use crate::regularization::CapGrid;

pub const SUBCOMMANDS: [&str; 8] = ["hill", "certify", "kepler", "regularize", "neck", "orbit", "figures", "golden"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand run when none is given on the command line.
    pub command: String,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub hill: HillConfig,
    pub certificate: CertificateConfig,
    pub kepler: KeplerConfig,
    pub regularization: RegularizationConfig,
    pub neck: NeckConfig,
    pub dynamics: DynamicsConfig,
    pub figures: FigureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HillConfig {
    pub energies: Vec<f64>,
    pub grid: NodeGrid,
    pub profile_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub alpha_mode: AlphaMode,
    /// Overrides the measured `β` in the contact scans when set.
    pub beta: Option<f64>,
    /// Energy whose Hill region bounds the coefficient suprema.
    pub bound_energy: f64,
    pub energies: Vec<f64>,
    pub bound_grid: PolarGrid,
    pub scan: ContactScanGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeplerConfig {
    pub k: f64,
    /// Neighbourhood `(1−ξ0)|η| < eps` of the projection point.
    pub eps: f64,
    pub grid: CapGrid,
    pub chart_samples: usize,
    pub pullback_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationConfig {
    pub energies: Vec<f64>,
    pub eps: f64,
    pub grid: CapGrid,
    pub star_grid: CapGrid,
    pub identity_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeckConfig {
    pub interpolation: InterpolationSpec,
    pub grid: NeckGrid,
    /// Energies of the individual `Z(H)` scans, all in `(−1, −0.95)`.
    pub scan_energies: Vec<f64>,
    /// Bisection bracket for the neck width `ε`.
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub bisection_steps: usize,
    pub quadric_samples: usize,
    pub liouville_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub integrator: IntegratorOptions,
    /// Energy of the drift run.
    pub drift_energy: f64,
    pub drift_start: [f64; 2],
    pub drift_angle: f64,
    pub t_end: f64,
    pub switch_radius: f64,
    pub overlap_state: [f64; 4],
    pub overlap_checkpoints: Vec<f64>,
    pub collision_radius: f64,
    pub collision_span: f64,
    pub orbit_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    pub ids: Vec<String>,
    pub theta_samples: usize,
    pub rho_samples: usize,
    pub hill_energy: f64,
    pub hill_grid: NodeGrid,
}

impl CertificateConfig {
    /// Measures the bound certificate for `mode` and applies the `β` override.
    pub fn certificate(&self, mode: AlphaMode) -> Result<BoundCertificate> {
        let mut cert = estimate_alpha_beta(mode, self.bound_energy, &self.bound_grid)?;
        if let Some(beta) = self.beta {
            cert.beta = beta;
        }
        Ok(cert)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: "golden".into(),
            out_dir: PathBuf::from("out"),
            seed: 20_240_917,
            hill: HillConfig {
                energies: vec![L1_ENERGY - 1e-6, -1.5, -3.0],
                grid: NodeGrid::new(1024, 1.0),
                profile_samples: 720,
            },
            certificate: CertificateConfig {
                alpha_mode: AlphaMode::Strict,
                beta: None,
                bound_energy: L1_ENERGY,
                energies: vec![L1_ENERGY, -2.0],
                bound_grid: PolarGrid { rho_max: S, n_rho: 512, n_theta: 720, open: true },
                scan: ContactScanGrid::default(),
            },
            kepler: KeplerConfig {
                k: -2.0,
                eps: 1.0 / 16.0,
                grid: CapGrid { phi_max: (1.0f64 - 1.0 / 32.0).acos(), n_phi: 12, n_psi: 24, n_rays: 48, ray_samples: 256 },
                chart_samples: 100_000,
                pullback_step: 1e-4,
            },
            regularization: RegularizationConfig {
                energies: vec![-1.5, -2.0, -3.0],
                eps: 0.05,
                grid: CapGrid { phi_max: 0.95f64.acos(), n_phi: 12, n_psi: 24, n_rays: 48, ray_samples: 256 },
                star_grid: CapGrid { phi_max: 3.0, n_phi: 8, n_psi: 8, n_rays: 64, ray_samples: 512 },
                identity_samples: 10_000,
            },
            neck: NeckConfig {
                interpolation: InterpolationSpec::default(),
                grid: NeckGrid::default(),
                scan_energies: vec![-0.9999, -0.995, -0.99, -0.975, -0.951],
                eps_lower: 2e-3,
                eps_upper: 0.05,
                bisection_steps: 8,
                quadric_samples: 10_000,
                liouville_samples: 2_000,
            },
            dynamics: DynamicsConfig {
                integrator: IntegratorOptions::default(),
                drift_energy: -2.0,
                drift_start: [-0.3, 0.05],
                drift_angle: 0.7,
                t_end: 50.0,
                switch_radius: 0.05,
                overlap_state: [-0.3, 0.02, 0.5, -0.8],
                overlap_checkpoints: vec![0.01, 0.02, 0.05],
                collision_radius: 0.05,
                collision_span: 3.0,
                orbit_energy: -3.0,
            },
            figures: FigureConfig {
                ids: crate::figures::FIGURE_IDS.iter().map(|s| s.to_string()).collect(),
                theta_samples: 720,
                rho_samples: 256,
                hill_energy: L1_ENERGY,
                hill_grid: NodeGrid::new(512, 1.0),
            },
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok { Ok(()) } else { Err(Error::Config(what())) }
}

fn check_cap(name: &str, g: &CapGrid) -> Result<()> {
    check(g.phi_max > 0.0 && g.phi_max < std::f64::consts::PI, || format!("{name}.phi_max must lie in (0, pi)"))?;
    check(g.n_phi >= 1 && g.n_psi >= 1 && g.n_rays >= 1, || format!("{name} needs at least one ring, azimuth and ray"))?;
    check(g.ray_samples >= 8, || format!("{name}.ray_samples must be at least 8"))
}

fn check_node_grid(name: &str, g: &NodeGrid) -> Result<()> {
    check(g.cells >= 8 && g.cells <= 8192, || format!("{name}.cells must lie in [8, 8192]"))?;
    check(g.half_width > 2.0 * S && g.half_width <= 10.0, || format!("{name}.half_width must lie in (2(sqrt2-1), 10]"))
}

/// Command-line overrides, applied on top of a loaded configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Principal resolution: Hill mask cells, bound-grid radii and neck cells.
    pub grid: Option<usize>,
    /// Energy of the subcommand (its level `k` for `kepler`).
    pub energy: Option<f64>,
    pub alpha_mode: Option<AlphaMode>,
}

impl RunConfig {
    /// Applies `o` for subcommand `command` and validates the result.
    pub fn apply(&mut self, o: &Overrides, command: &str) -> Result<()> {
        self.command = command.to_string();
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.alpha_mode {
            self.certificate.alpha_mode = m;
        }
        if let Some(n) = o.grid {
            self.hill.grid.cells = n;
            self.figures.hill_grid.cells = n;
            self.certificate.bound_grid.n_rho = n;
            self.neck.grid.cells = n;
        }
        if let Some(c) = o.energy {
            match command {
                "hill" => self.hill.energies = vec![c],
                "certify" => self.certificate.energies = vec![c],
                "kepler" => self.kepler.k = c,
                "regularize" => self.regularization.energies = vec![c],
                "neck" => self.neck.scan_energies = vec![c],
                "orbit" => self.dynamics.orbit_energy = c,
                "figures" => self.figures.hill_energy = c,
                _ => return Err(Error::Config(format!("--energy has no meaning for `{command}`"))),
            }
        }
        self.validate()
    }

    pub fn default_toml() -> String {
        toml::to_string_pretty(&Self::default()).expect("default configuration serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        check(SUBCOMMANDS.contains(&self.command.as_str()), || {
            format!("unknown command `{}` (expected one of {})", self.command, SUBCOMMANDS.join(", "))
        })?;
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());

        let h = &self.hill;
        check(!h.energies.is_empty() && finite(&h.energies), || "hill.energies must be non-empty and finite".into())?;
        check(h.energies.iter().all(|&c| c > -20.0 && c < 0.0), || "hill.energies must lie in (-20, 0)".into())?;
        check_node_grid("hill.grid", &h.grid)?;
        check(h.profile_samples >= 8, || "hill.profile_samples must be at least 8".into())?;

        let c = &self.certificate;
        check(c.bound_energy <= L1_ENERGY && c.bound_energy > -20.0, || "certificate.bound_energy must lie in (-20, -1]".into())?;
        check(!c.energies.is_empty() && c.energies.iter().all(|&e| e <= L1_ENERGY && e > -20.0), || {
            "certificate.energies must be non-empty and lie in (-20, -1]".into()
        })?;
        check(c.beta.is_none_or(|b| b.is_finite() && b >= 0.0), || "certificate.beta must be finite and non-negative".into())?;
        let b = &c.bound_grid;
        check(b.rho_max > 0.0 && b.rho_max <= S && b.n_rho >= 2 && b.n_theta >= 4, || {
            "certificate.bound_grid needs 0 < rho_max <= sqrt2-1, n_rho >= 2, n_theta >= 4".into()
        })?;
        let s = &c.scan;
        check(0.0 < s.inner_floor && s.inner_floor < s.inner_cut && s.inner_cut < s.split && s.split < S, || {
            "certificate.scan needs 0 < inner_floor < inner_cut < split < sqrt2-1".into()
        })?;
        check(s.n_outer >= 1 && s.n_middle >= 2 && s.n_inner >= 1 && s.n_theta >= 4, || {
            "certificate.scan resolutions are too small".into()
        })?;
        check(s.zero_tol > 0.0 && s.zero_tol < 1e-3, || "certificate.scan.zero_tol must lie in (0, 1e-3)".into())?;

        let k = &self.kepler;
        check(k.k.is_finite() && k.k < 0.0, || "kepler.k must be negative".into())?;
        check(k.eps > 0.0 && k.eps <= 1.0, || "kepler.eps must lie in (0, 1]".into())?;
        check_cap("kepler.grid", &k.grid)?;
        check(k.chart_samples >= 1, || "kepler.chart_samples must be positive".into())?;
        check(k.pullback_step > 0.0 && k.pullback_step < 0.1, || "kepler.pullback_step must lie in (0, 0.1)".into())?;

        let r = &self.regularization;
        check(!r.energies.is_empty() && r.energies.iter().all(|&e| e < L1_ENERGY && e > -20.0), || {
            "regularization.energies must be non-empty and lie in (-20, -1)".into()
        })?;
        check(r.eps > 0.0 && r.eps <= 1.0, || "regularization.eps must lie in (0, 1]".into())?;
        check_cap("regularization.grid", &r.grid)?;
        check_cap("regularization.star_grid", &r.star_grid)?;
        check(r.identity_samples >= 1, || "regularization.identity_samples must be positive".into())?;

        let n = &self.neck;
        n.interpolation.validate()?;
        check(n.grid.cells >= 4 && n.grid.fibre >= 4 && n.grid.half_width > 0.0 && n.grid.half_width <= 0.5, || {
            "neck.grid needs cells >= 4, fibre >= 4 and 0 < half_width <= 0.5".into()
        })?;
        check(n.grid.neck_half > 0.0 && n.grid.neck_half <= n.grid.half_width, || "neck.grid.neck_half must lie in (0, half_width]".into())?;
        check(!n.scan_energies.is_empty() && n.scan_energies.iter().all(|&e| e > L1_ENERGY && e < -0.95), || {
            "neck.scan_energies must be non-empty and lie in (-1, -0.95)".into()
        })?;
        check(0.0 < n.eps_lower && n.eps_lower < n.eps_upper && n.eps_upper < 0.05 + 1e-12, || {
            "neck bisection bracket must satisfy 0 < eps_lower < eps_upper <= 0.05".into()
        })?;
        check(n.quadric_samples >= 1 && n.liouville_samples >= 1, || "neck sample counts must be positive".into())?;

        let d = &self.dynamics;
        let o = &d.integrator;
        check(o.rtol > 0.0 && o.atol > 0.0 && o.rtol < 1e-2 && o.atol < 1e-2, || "integrator tolerances must lie in (0, 1e-2)".into())?;
        check(o.h_init >= 0.0 && o.h_max > 0.0 && o.max_steps >= 1, || "integrator step settings are invalid".into())?;
        check(d.drift_energy < L1_ENERGY && d.drift_energy > -20.0, || "dynamics.drift_energy must lie in (-20, -1)".into())?;
        check(finite(&d.drift_start) && finite(&[d.drift_angle]), || "dynamics.drift_start must be finite".into())?;
        check(d.t_end > 0.0 && d.t_end <= 1e4, || "dynamics.t_end must lie in (0, 1e4]".into())?;
        check(d.switch_radius > 0.0 && d.switch_radius < 0.2, || "dynamics.switch_radius must lie in (0, 0.2)".into())?;
        check(finite(&d.overlap_state), || "dynamics.overlap_state must be finite".into())?;
        check(!d.overlap_checkpoints.is_empty() && d.overlap_checkpoints.iter().all(|&t| t > 0.0 && t.is_finite()), || {
            "dynamics.overlap_checkpoints must be positive".into()
        })?;
        check(d.collision_radius > 0.0 && d.collision_radius < S, || "dynamics.collision_radius must lie in (0, sqrt2-1)".into())?;
        check(d.collision_span > 0.0 && d.collision_span <= 100.0, || "dynamics.collision_span must lie in (0, 100]".into())?;
        check(d.orbit_energy < -0.95 && d.orbit_energy > -20.0, || "dynamics.orbit_energy must lie in (-20, -0.95)".into())?;

        let f = &self.figures;
        for id in &f.ids {
            crate::figures::check_id(id)?;
        }
        check(f.theta_samples >= 8 && f.rho_samples >= 4, || "figure sample counts are too small".into())?;
        check(f.hill_energy < 0.0 && f.hill_energy > -20.0, || "figures.hill_energy must lie in (-20, 0)".into())?;
        check_node_grid("figures.hill_grid", &f.hill_grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = RunConfig::default_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut cfg = RunConfig::default();
        cfg.neck.interpolation.eps1 = 0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.certificate.energies = vec![-0.5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = RunConfig::default_toml() + "\nbogus = 1\n";
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }
}
