//! Subcommand drivers. Every driver builds its artifacts in memory; nothing
//! touches the disk until [`RunOutcome::write`].

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::charts::{chart_round_trip, PlanarPhaseState};
use crate::config::RunConfig;
use crate::consts::{Q_M1, S};
use crate::contact::{certify_contact, hand_bounds, laurent_check, limit_constant, BoundCertificate, ContactScan, LaurentReport, LimitReport};
use crate::dynamics::{
    circular_radius_estimate, circular_seed, compare_charts, find_periodic_orbit, integrate_hybrid, kepler_collision_run,
    ChartComparison, PeriodicOrbitResult,
};
use crate::error::{Error, Result};
use crate::golden::run_golden;
use crate::hamiltonian::{momentum_from_kinetic_vector, potential_value, Primary};
use crate::hill::{argmin_bifurcation, boundary_profile, compute_hill_region, radial_derivative_profile, ProfileKind};
use crate::neck::{
    bisect_epsilon, dg_residual, ellipsoid_section, ellipsoid_section_for, liouville_check, qfull_measured, quadratic_forms,
    quadric_identity, weinstein_field, yq_matrix, yq_matrix_for, z_field, zh_scan,
};
use crate::output::to_json;
use crate::regularization::{fiberwise_starshape_check, kepler_level_check, kepler_scan, pullback_identities, restricted_scan};

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub artifacts: Vec<Artifact>,
    /// Short human-readable summary for the terminal.
    pub summary: String,
    /// `false` only when a golden row failed.
    pub pass: bool,
}

impl RunOutcome {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for a in &self.artifacts {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.contents)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> Result<Artifact> {
    Ok(Artifact { name: name.to_string(), contents: to_json(value)? + "\n" })
}

fn ok(artifacts: Vec<Artifact>, summary: String) -> RunOutcome {
    RunOutcome { artifacts, summary, pass: true }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.command.as_str() {
        "hill" => run_hill(cfg),
        "certify" => run_certify(cfg),
        "kepler" => run_kepler(cfg),
        "regularize" => run_regularize(cfg),
        "neck" => run_neck(cfg),
        "orbit" => run_orbit(cfg),
        "figures" => run_figures(cfg),
        "golden" => {
            let report = run_golden(cfg)?;
            let artifacts = vec![
                json_artifact("golden.json", &report)?,
                Artifact { name: "golden.csv".into(), contents: report.to_table() },
            ];
            Ok(RunOutcome { artifacts, summary: report.render(), pass: report.pass })
        }
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

#[derive(Serialize)]
struct HillEntry {
    c: f64,
    mask: Option<crate::hill::HillRegionMask>,
    inside_disk: Option<bool>,
    disk_margin: Option<f64>,
    error: Option<String>,
}

fn run_hill(cfg: &RunConfig) -> Result<RunOutcome> {
    let h = &cfg.hill;
    let mut entries = Vec::new();
    let mut artifacts = Vec::new();
    let mut summary = String::new();
    for (k, &c) in h.energies.iter().enumerate() {
        match compute_hill_region(c, Primary::M1, &h.grid) {
            Ok(mask) => {
                let (inside, margin) = mask.disk_containment();
                summary.push_str(&format!("c={c}: {:?} component, {} nodes, disk margin {margin:e}\n", mask.label, mask.member_count));
                let mut buf = Vec::new();
                mask.write_csv(&mut buf)?;
                artifacts.push(Artifact { name: format!("hill_mask_{k}.csv"), contents: String::from_utf8(buf).expect("ASCII") });
                entries.push(HillEntry { c, mask: Some(mask), inside_disk: Some(inside), disk_margin: Some(margin), error: None });
            }
            Err(e) => {
                summary.push_str(&format!("c={c}: {e}\n"));
                entries.push(HillEntry { c, mask: None, inside_disk: None, disk_margin: None, error: Some(e.to_string()) });
            }
        }
    }
    #[derive(Serialize)]
    struct HillReport {
        regions: Vec<HillEntry>,
        boundary_profile: crate::hill::AngularProfile,
        radial_derivative_profile: crate::hill::AngularProfile,
        potential_bifurcation: crate::hill::BifurcationReport,
        derivative_bifurcation: crate::hill::BifurcationReport,
    }
    let report = HillReport {
        regions: entries,
        boundary_profile: boundary_profile(S, h.profile_samples)?,
        radial_derivative_profile: radial_derivative_profile(S, h.profile_samples)?,
        potential_bifurcation: argmin_bifurcation(ProfileKind::Potential, 0.01, 400, h.profile_samples),
        derivative_bifurcation: argmin_bifurcation(ProfileKind::RadialDerivative, 0.01, 400, h.profile_samples),
    };
    summary.push_str(&format!(
        "U(sqrt2-1, .) minimum {} at theta={}; minimiser leaves theta=0 below rho={:?}\n",
        report.boundary_profile.min, report.boundary_profile.argmin_theta, report.potential_bifurcation.leaves_zero_below
    ));
    artifacts.insert(0, json_artifact("hill.json", &report)?);
    Ok(ok(artifacts, summary))
}

fn run_certify(cfg: &RunConfig) -> Result<RunOutcome> {
    #[derive(Serialize)]
    struct ModeReport {
        certificate: BoundCertificate,
        scans: Vec<ContactScan>,
        limit: LimitReport,
    }
    #[derive(Serialize)]
    struct CertifyReport {
        hand_bounds: crate::contact::HandBounds,
        modes: Vec<ModeReport>,
        laurent: LaurentReport,
    }
    let mut modes = Vec::new();
    let mut summary = String::new();
    for mode in cfg.certificate.alpha_mode.expand() {
        let certificate = cfg.certificate.certificate(mode)?;
        let k = certificate.constants();
        let mut scans = Vec::new();
        for &c in &cfg.certificate.energies {
            let scan = certify_contact(c, k, &cfg.certificate.scan)?;
            summary.push_str(&format!(
                "{} alpha={:.4} beta={:.4} c={c}: witness min {:e}, {}\n",
                mode.label(),
                k.alpha,
                k.beta,
                scan.min(),
                if scan.pass { "pass" } else { "fail" }
            ));
            scans.push(scan);
        }
        let limit = limit_constant(k)?;
        modes.push(ModeReport { certificate, scans, limit });
    }
    let report = CertifyReport { hand_bounds: hand_bounds(), modes, laurent: laurent_check()? };
    Ok(ok(vec![json_artifact("certify.json", &report)?], summary))
}

fn run_kepler(cfg: &RunConfig) -> Result<RunOutcome> {
    let k = &cfg.kepler;
    let charts = chart_round_trip(cfg.seed, k.chart_samples, Q_M1, k.pullback_step)?;
    let scan = kepler_scan(k.k, k.eps, &k.grid)?;
    let (solved, level_error) = kepler_level_check(cfg.seed, 10_000, k.k)?;
    let collision = kepler_collision_run(cfg.dynamics.collision_radius, cfg.dynamics.collision_span, &cfg.dynamics.integrator)?;
    #[derive(Serialize)]
    struct KeplerReport {
        charts: crate::charts::ChartRoundTrip,
        scan: crate::regularization::KeplerScan,
        level_solved: usize,
        level_error: f64,
        collision: crate::dynamics::CollisionRun,
    }
    let summary = format!(
        "chart round trip {:e}; min X(Q) {:e}; max |eta| {}; collision passes projection point: {}\n",
        charts.round_trip, scan.xq.min, scan.max_eta, collision.passed_through
    );
    let report = KeplerReport { charts, scan, level_solved: solved, level_error, collision };
    Ok(ok(vec![json_artifact("kepler.json", &report)?], summary))
}

fn run_regularize(cfg: &RunConfig) -> Result<RunOutcome> {
    let r = &cfg.regularization;
    #[derive(Serialize)]
    struct Entry {
        k: f64,
        identities: crate::regularization::IdentityReport,
        scan: crate::regularization::RestrictedScan,
        star_shape: crate::regularization::StarShapeReport,
    }
    let mut entries = Vec::new();
    let mut summary = String::new();
    for &k in &r.energies {
        let identities = pullback_identities(cfg.seed, r.identity_samples, k)?;
        let scan = restricted_scan(k, r.eps, &r.grid)?;
        let star_shape = fiberwise_starshape_check(k, &r.star_grid)?;
        summary.push_str(&format!(
            "k={k}: min X(Etilde) {:e}, g in [{:.4}, {:.4}], star-shape min derivative {:e}\n",
            scan.xe.min, scan.g_range[0], scan.g_range[1], star_shape.derivative.min
        ));
        entries.push(Entry { k, identities, scan, star_shape });
    }
    Ok(ok(vec![json_artifact("regularize.json", &entries)?], summary))
}

fn run_neck(cfg: &RunConfig) -> Result<RunOutcome> {
    let n = &cfg.neck;
    let spec = n.interpolation;
    let measured = qfull_measured();
    let deltas = [0.0, 0.25, 0.5, 1.0];
    #[derive(Serialize)]
    struct NeckReport {
        quadratic_forms: crate::neck::QuadraticForms,
        yq: crate::neck::YqReport,
        yq_hessian: crate::neck::YqReport,
        dg_residual: f64,
        liouville_weinstein: f64,
        liouville_z: f64,
        sections: Vec<crate::neck::EllipsoidSection>,
        sections_hessian: Vec<crate::neck::EllipsoidSection>,
        quadric: crate::neck::QuadricCheck,
        scans: Vec<crate::neck::ZhScan>,
        bisection: crate::neck::EpsilonBisection,
    }
    let report = NeckReport {
        quadratic_forms: quadratic_forms()?,
        yq: yq_matrix(spec.a, spec.b),
        yq_hessian: yq_matrix_for(&measured, spec.a, spec.b),
        dg_residual: dg_residual(cfg.seed, n.liouville_samples, spec.a, spec.b),
        liouville_weinstein: liouville_check(|z| weinstein_field(z, spec.a, spec.b), cfg.seed, n.liouville_samples, 0.2),
        liouville_z: liouville_check(|z| z_field(z, &spec), cfg.seed, n.liouville_samples, 0.2),
        sections: deltas.iter().map(|&d| ellipsoid_section(d)).collect::<Result<_>>()?,
        sections_hessian: deltas.iter().map(|&d| ellipsoid_section_for(&measured, d)).collect::<Result<_>>()?,
        quadric: quadric_identity(cfg.seed, n.quadric_samples, 0.5)?,
        scans: n.scan_energies.iter().map(|&c| zh_scan(c, &spec, &n.grid)).collect::<Result<_>>()?,
        bisection: bisect_epsilon(&spec, &n.grid, n.eps_lower, n.eps_upper, n.bisection_steps)?,
    };
    let mut summary = format!(
        "Y(Q) eigenvalues {:?}; dG residual {:e}; epsilon {:?}\n",
        report.yq.eigenvalues, report.dg_residual, report.bisection.epsilon
    );
    for s in &report.scans {
        summary.push_str(&format!("c={}: min Z(H) {:e}, {}\n", s.c, s.min(), if s.pass { "pass" } else { "fail" }));
    }
    Ok(ok(vec![json_artifact("neck.json", &report)?], summary))
}

fn run_orbit(cfg: &RunConfig) -> Result<RunOutcome> {
    let d = &cfg.dynamics;
    let opts = &d.integrator;
    let q = d.drift_start;
    let kin = (8.0 * (d.drift_energy - potential_value(q)?)).sqrt();
    let z0 = PlanarPhaseState::from_qp(q, momentum_from_kinetic_vector(q, [kin * d.drift_angle.cos(), kin * d.drift_angle.sin()]));
    let traj = integrate_hybrid(&z0, d.t_end, opts, d.switch_radius)?;
    let overlap = compare_charts(&PlanarPhaseState::from_array(d.overlap_state), &d.overlap_checkpoints, opts)?;
    let c = d.orbit_energy;
    let r0 = circular_radius_estimate(c);
    let mut orbits = Vec::new();
    for primary in [Primary::M1, Primary::M2] {
        let (seed, crossing) = circular_seed(c, primary, r0)?;
        orbits.push(find_periodic_orbit(c, &seed, crossing, opts)?);
    }
    #[derive(Serialize)]
    struct OrbitReport {
        initial_state: [f64; 4],
        t_end: f64,
        steps: usize,
        rejected: usize,
        max_energy_drift: f64,
        max_regularized_drift: f64,
        overlap: ChartComparison,
        periodic_orbits: Vec<PeriodicOrbitResult>,
    }
    let summary = format!(
        "t={}: energy drift {:e}; overlap difference {:e}; periods {:?}\n",
        d.t_end,
        traj.max_energy_drift,
        overlap.max_difference,
        orbits.iter().map(|o| o.period).collect::<Vec<_>>()
    );
    let report = OrbitReport {
        initial_state: z0.to_array(),
        t_end: d.t_end,
        steps: traj.steps,
        rejected: traj.rejected,
        max_energy_drift: traj.max_energy_drift,
        max_regularized_drift: traj.max_regularized_drift,
        overlap,
        periodic_orbits: orbits,
    };
    Ok(ok(
        vec![
            json_artifact("orbit.json", &report)?,
            Artifact { name: "trajectory.csv".into(), contents: traj.to_table().to_csv_string() },
        ],
        summary,
    ))
}

fn run_figures(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut artifacts = Vec::new();
    let mut summary = String::new();
    for id in &cfg.figures.ids {
        let t = crate::figures::figure_table(id, cfg)?;
        let name = crate::figures::file_name(id)?;
        summary.push_str(&format!("{id}: {name} ({} rows)\n", t.rows.len()));
        artifacts.push(Artifact { name: name.to_string(), contents: t.to_csv_string() });
    }
    Ok(ok(artifacts, summary))
}
