//! Data behind the figures, one CSV per figure id.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::charts::PolarPosition;
use crate::config::RunConfig;
use crate::consts::S;
use crate::contact::{coefficients, key_inequality, quadratic_root_bound, WitnessConstants};
use crate::error::{Error, Result};
use crate::hamiltonian::{eval_u_polar, radial_derivative};
use crate::hill::{potential_grid, profile_value, ProfileKind};
use crate::output::Table;
use crate::regularization::{near_collision_samples, restricted_parts, Subproblem};

pub const FIGURE_IDS: [&str; 9] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10"];

/// Radius splitting the outer and middle witness annuli.
const SPLIT: f64 = 0.37;
const INNER: f64 = 0.05;

pub fn check_id(id: &str) -> Result<()> {
    if FIGURE_IDS.contains(&id) {
        Ok(())
    } else {
        Err(Error::UnknownFigure { id: id.to_string(), valid: FIGURE_IDS.join(", ") })
    }
}

pub fn file_name(id: &str) -> Result<&'static str> {
    check_id(id)?;
    Ok(match id {
        "fig2" => "U_boundary_profile.csv",
        "fig3" => "root_bounds.csv",
        "fig4" => "d_coefficients.csv",
        "fig5" => "dU_boundary_profile.csv",
        "fig6" => "witness_axis.csv",
        "fig7" => "witness_surface.csv",
        "fig8" => "angular_differences.csv",
        "fig9" => "hill_region.csv",
        _ => "regularized_level.csv",
    })
}

fn thetas(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// `n + 1` nodes from `a` to `b`, with the last one exactly `b`.
fn closed_range(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 }).collect()
}

/// `ρ_k = S k / n` for `k = 1..n`.
fn disk_radii(n: usize) -> Vec<f64> {
    (1..=n).map(|k| if k == n { S } else { S * k as f64 / n as f64 }).collect()
}

fn polar_nodes(radii: &[f64], thetas: &[f64]) -> Vec<PolarPosition> {
    radii.iter().flat_map(|&rho| thetas.iter().map(move |&theta| PolarPosition { rho, theta })).collect()
}

fn witness_constants(cfg: &RunConfig) -> Result<WitnessConstants> {
    Ok(cfg.certificate.certificate(cfg.certificate.alpha_mode)?.constants())
}

fn in_region(pos: PolarPosition, c: f64) -> bool {
    eval_u_polar(pos).is_ok_and(|u| u.u <= c + crate::contact::HILL_TOL)
}

fn profile_table(kind: ProfileKind, cfg: &RunConfig, header: &[&str], comment: &str) -> Table {
    let mut t = Table::new(header).with_comment(comment);
    for th in thetas(cfg.figures.theta_samples) {
        t.push(vec![th, profile_value(kind, S, th)]);
    }
    t
}

/// Builds the table of one figure.
pub fn figure_table(id: &str, cfg: &RunConfig) -> Result<Table> {
    check_id(id)?;
    let fc = &cfg.figures;
    let c = cfg.certificate.bound_energy;
    let table = match id {
        "fig2" => profile_table(
            ProfileKind::Potential,
            cfg,
            &["theta", "U"],
            &format!("U(rho=sqrt2-1, theta) about m1; theta uniform on [0, 2pi) n={}", fc.theta_samples),
        ),
        "fig5" => profile_table(
            ProfileKind::RadialDerivative,
            cfg,
            &["theta", "V"],
            &format!("V(theta) = d/drho U at rho=sqrt2-1 about m1; theta uniform on [0, 2pi) n={}", fc.theta_samples),
        ),
        "fig3" => {
            let alpha = cfg.certificate.alpha_mode.value();
            let nodes = polar_nodes(&disk_radii(fc.rho_samples), &thetas(fc.theta_samples / 4));
            let rows: Vec<Result<Vec<f64>>> = nodes
                .par_iter()
                .map(|&pos| {
                    let r1 = quadratic_root_bound(pos, alpha, 1)?;
                    let r2 = quadratic_root_bound(pos, alpha, 2)?;
                    let (a, b) = r1.roots.unwrap_or((f64::NAN, f64::NAN));
                    let (e, f) = r2.roots.unwrap_or((f64::NAN, f64::NAN));
                    Ok(vec![pos.rho, pos.theta, f64::from(u8::from(in_region(pos, c))), a, b, e, f, r1.t, r2.t])
                })
                .collect();
            let mut t = Table::new(&["rho", "theta", "in_region", "r1_minus", "r1_plus", "r2_minus", "r2_plus", "t1", "t2"])
                .with_comment(format!(
                    "roots of (alpha/8) f_i^2 - g_i^2 in p_i, alpha={} ({}); Hill region at c={c}; rho in (0, sqrt2-1] n={} x theta n={}",
                    alpha,
                    cfg.certificate.alpha_mode.label(),
                    fc.rho_samples,
                    fc.theta_samples / 4
                ));
            for r in rows {
                t.push(r?);
            }
            t
        }
        "fig4" => {
            let nodes = polar_nodes(&disk_radii(fc.rho_samples), &thetas(fc.theta_samples / 4));
            let mut t = Table::new(&["rho", "theta", "in_region", "d1", "d2"]).with_comment(format!(
                "coefficients d1, d2 about m1; Hill region at c={c}; rho in (0, sqrt2-1] n={} x theta n={}",
                fc.rho_samples,
                fc.theta_samples / 4
            ));
            for pos in nodes {
                let co = coefficients(pos);
                t.push(vec![pos.rho, pos.theta, f64::from(u8::from(in_region(pos, c))), co.d1, co.d2]);
            }
            t
        }
        "fig6" => {
            let k = witness_constants(cfg)?;
            let radii = closed_range(SPLIT, S, fc.rho_samples);
            let mut t = Table::new(&["rho", "witness"]).with_comment(format!(
                "rho dU/drho - (rho/4) sqrt(8(c-U)) sqrt(alpha(c-U)+beta) at theta=0, c={c}, alpha={}, beta={}; rho in [{SPLIT}, sqrt2-1] n={}",
                k.alpha,
                k.beta,
                fc.rho_samples + 1
            ));
            for rho in radii {
                t.push(vec![rho, key_inequality(PolarPosition { rho, theta: 0.0 }, c, k).unwrap_or(f64::NAN)]);
            }
            t
        }
        "fig7" => {
            let k = witness_constants(cfg)?;
            let nodes = polar_nodes(&closed_range(INNER, SPLIT, fc.rho_samples), &thetas(fc.theta_samples / 4));
            let vals: Vec<f64> = nodes.par_iter().map(|&pos| key_inequality(pos, c, k).unwrap_or(f64::NAN)).collect();
            let mut t = Table::new(&["rho", "theta", "in_region", "witness"]).with_comment(format!(
                "key-inequality witness (NaN outside the Hill region), c={c}, alpha={}, beta={}; rho in [{INNER}, {SPLIT}] n={} x theta n={}",
                k.alpha,
                k.beta,
                fc.rho_samples + 1,
                fc.theta_samples / 4
            ));
            for (pos, v) in nodes.iter().zip(vals) {
                t.push(vec![pos.rho, pos.theta, f64::from(u8::from(in_region(*pos, c))), v]);
            }
            t
        }
        "fig8" => {
            let nodes = polar_nodes(&disk_radii(fc.rho_samples), &thetas(fc.theta_samples / 4));
            let rows: Vec<Vec<f64>> = nodes
                .par_iter()
                .map(|&pos| {
                    let at = |p: PolarPosition| {
                        (eval_u_polar(p).map_or(f64::NAN, |u| u.u), radial_derivative(p).unwrap_or(f64::NAN))
                    };
                    let (u, du) = at(pos);
                    let (u0, du0) = at(PolarPosition { rho: pos.rho, theta: 0.0 });
                    vec![pos.rho, pos.theta, u - u0, du - du0]
                })
                .collect();
            let mut t = Table::new(&["rho", "theta", "U_minus_U0", "dU_minus_dU0"]).with_comment(format!(
                "U(rho,theta)-U(rho,0) and d/drho U(rho,theta)-d/drho U(rho,0) about m1; rho in (0, sqrt2-1] n={} x theta n={}",
                fc.rho_samples,
                fc.theta_samples / 4
            ));
            for r in rows {
                t.push(r);
            }
            t
        }
        "fig9" => {
            let g = &fc.hill_grid;
            let values = potential_grid(g);
            let n = g.nodes_per_axis();
            let mut t = Table::new(&["q1", "q2", "U", "in_sublevel"]).with_comment(format!(
                "effective potential and the sublevel set U <= {}; {}^2 nodes on [-{w}, {w}]^2",
                fc.hill_energy,
                n,
                w = g.half_width
            ));
            for i in 0..n {
                for j in 0..n {
                    let q = g.node(i, j);
                    let u = values[i * n + j];
                    t.push(vec![q[0], q[1], u, f64::from(u8::from(u <= fc.hill_energy))]);
                }
            }
            t
        }
        _ => {
            let r = &cfg.regularization;
            let k = r.energies[0];
            let samples = near_collision_samples(k, r.eps, &r.grid);
            let mut t = Table::new(&["xi0", "xi1", "xi2", "eta0", "eta1", "eta2", "f", "g", "X_E"]).with_comment(format!(
                "samples of the regularized level Etilde=0 with (1-xi0)|eta| < {}, k={k}; {}",
                r.eps,
                r.grid.describe()
            ));
            for st in samples {
                let p = restricted_parts(&st, k, Subproblem::Full)?;
                t.push(vec![st.xi[0], st.xi[1], st.xi[2], st.eta[0], st.eta[1], st.eta[2], p.f, p.g, p.x_e]);
            }
            t
        }
    };
    Ok(table)
}

/// Writes the requested figures into `dir`; nothing is written unless every
/// table was built.
pub fn write_figures(ids: &[String], cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    for id in ids {
        check_id(id)?;
    }
    let tables: Vec<(&'static str, Table)> =
        ids.iter().map(|id| Ok((file_name(id)?, figure_table(id, cfg)?))).collect::<Result<_>>()?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, t) in tables {
        let p = dir.join(name);
        t.write_file(&p)?;
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_id_lists_valid_ids() {
        let err = check_id("fig11").unwrap_err();
        match err {
            Error::UnknownFigure { id, valid } => {
                assert_eq!(id, "fig11");
                assert!(valid.contains("fig2") && valid.contains("fig10"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn boundary_profile_table() {
        let t = figure_table("fig2", &RunConfig::default()).unwrap();
        assert_eq!(t.rows.len(), 720);
        let min = t.rows.iter().min_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
        assert_eq!(min[0], 0.0);
        assert!((min[1] + 1.0).abs() < 1e-9);
    }
}
