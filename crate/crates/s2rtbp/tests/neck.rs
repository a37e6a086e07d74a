use proptest::prelude::*;
use s2rtbp::charts::PlanarPhaseState;
use s2rtbp::neck::{
    completed_square, liouville_residual, neck_variable, qfull_measured, qfull_paper, quadratic_value, weinstein_field,
    yq_matrix, yq_matrix_for, z0_field, z_field, InterpolationSpec,
};

fn close(a: [f64; 4], b: [f64; 4], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// A state near the neck with `u = q1 + p2/8` set to `u`.
fn with_u(u: f64, q2: f64, p1: f64, p2: f64) -> PlanarPhaseState {
    PlanarPhaseState::new(u - p2 / 8.0, q2, p1, p2)
}

#[test]
fn yq_at_the_default_pair() {
    let shown = yq_matrix(-0.5, 0.5);
    assert!(shown.positive_definite);
    assert!((shown.eigenvalues[0] - 0.125).abs() < 1e-12);
    assert!(yq_matrix_for(&qfull_measured(), -0.5, 0.5).positive_definite);
}

#[test]
fn yq_at_the_origin_is_indefinite() {
    let r = yq_matrix(0.0, 0.0);
    assert!(r.eigenvalues[0] < 0.0 && r.eigenvalues[3] > 0.0);
}

proptest! {
    #[test]
    fn yq_positive_near_default(a in -0.7..-0.3f64, b in 0.35..0.65f64) {
        prop_assert!(yq_matrix(a, b).eigenvalues[0] > 0.0);
        prop_assert!(yq_matrix_for(&qfull_measured(), a, b).eigenvalues[0] > 0.0);
    }

    #[test]
    fn z_matches_closed_forms_off_the_seam(u in -0.2..0.2f64, q2 in -0.2..0.2f64, p1 in -1.0..1.0f64, p2 in -1.0..1.0f64) {
        let spec = InterpolationSpec::default();
        let z = with_u(u, q2, p1, p2);
        let field = z_field(&z, &spec);
        if u.abs() <= spec.eps1 {
            prop_assert!(close(field, weinstein_field(&z, spec.a, spec.b), 1e-12));
        } else if u.abs() >= spec.eps2 {
            prop_assert!(close(field, z0_field(&z), 1e-12));
        }
    }

    #[test]
    fn z_is_continuous(u in -0.2..0.2f64, q2 in -0.2..0.2f64, p1 in -1.0..1.0f64, p2 in -1.0..1.0f64) {
        let spec = InterpolationSpec::default();
        let d = 1e-9;
        let (zl, zr) = (with_u(u - d, q2, p1, p2), with_u(u + d, q2, p1, p2));
        prop_assert!((neck_variable(&zr) - neck_variable(&zl) - 2.0 * d).abs() < 1e-12);
        // The cut-off is steep: slopes of Z in u reach about 7e3 on the seam.
        prop_assert!(close(z_field(&zl, &spec), z_field(&zr, &spec), 2e4 * 2.0 * d));
    }

    #[test]
    fn z_is_liouville(u in -0.06..0.06f64, q2 in -0.2..0.2f64, p1 in -1.0..1.0f64, p2 in -1.0..1.0f64,
                      v in prop::array::uniform4(-1.0..1.0f64), w in prop::array::uniform4(-1.0..1.0f64)) {
        let spec = InterpolationSpec::default();
        let z = with_u(u, q2, p1, p2);
        let r = liouville_residual(|s| z_field(s, &spec), &z, &v, &w, 3e-6);
        prop_assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn quadric_completes_the_square(q1 in -1.0..1.0f64, q2 in -1.0..1.0f64, p1 in -1.0..1.0f64, d in -0.5..0.5f64) {
        let z = [q1, q2, p1, 8.0 * (d - q1)];
        prop_assert!((quadratic_value(&qfull_paper(), &z) - completed_square(q1, q2, p1, d)).abs() < 1e-12);
    }
}
