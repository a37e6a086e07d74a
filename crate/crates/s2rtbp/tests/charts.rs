use proptest::prelude::*;
use s2rtbp::charts::{
    cartesian_from_polar, flip, moser_lift, moser_project, normalize_angle, polar_from_cartesian, unflip, FlipState,
    PlanarPhaseState, PolarPosition,
};
use s2rtbp::consts::{Q_M1, Q_M2};

fn state() -> impl Strategy<Value = PlanarPhaseState> {
    (-2.0..2.0f64, -2.0..2.0f64, -4.0..4.0f64, -4.0..4.0f64).prop_map(|(a, b, c, d)| PlanarPhaseState::new(a, b, c, d))
}

fn dist(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn flip_unflip_is_identity(z in state(), left in any::<bool>()) {
        let c = if left { Q_M1 } else { Q_M2 };
        let back = unflip(&flip(&z, c), c);
        prop_assert!(dist(back.to_array(), z.to_array()) < 1e-15);
    }

    #[test]
    fn lift_lands_on_cotangent_bundle(z in state()) {
        let s = moser_lift(&flip(&z, Q_M1));
        let (unit, tangent) = s.constraint_residual();
        prop_assert!(unit < 1e-14);
        prop_assert!(tangent < 1e-13 * (1.0 + s.eta_norm()));
    }

    #[test]
    fn project_inverts_lift(z in state()) {
        let f = flip(&z, Q_M1);
        let back = moser_project(&moser_lift(&f)).unwrap();
        let scale = 1.0 + dist(z.to_array(), [0.0; 4]);
        let d = dist([back.x[0], back.x[1], back.y[0], back.y[1]], [f.x[0], f.x[1], f.y[0], f.y[1]]);
        prop_assert!(d / scale < 1e-12, "{d}");
    }

    #[test]
    fn polar_round_trip(rho in 1e-3..3.0f64, theta in -10.0..10.0f64) {
        let q = cartesian_from_polar(PolarPosition { rho, theta }, Q_M2);
        let back = polar_from_cartesian(q, Q_M2);
        prop_assert!((back.rho - rho).abs() < 1e-13);
        let dth = normalize_angle(back.theta - theta);
        prop_assert!(dth.abs().min((dth - std::f64::consts::TAU).abs()) < 1e-12);
    }
}

#[test]
fn projection_point_is_rejected() {
    // Large momentum sends xi toward the north pole.
    let s = moser_lift(&FlipState::new([1e9, 0.0], [0.1, 0.0]));
    assert!(moser_project(&s).is_err());
}
