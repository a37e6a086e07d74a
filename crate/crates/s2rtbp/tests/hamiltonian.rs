use proptest::prelude::*;
use s2rtbp::charts::{flip, moser_lift, PlanarPhaseState};
use s2rtbp::consts::{Q_M1, S};
use s2rtbp::hamiltonian::{grad_h, h_value};
use s2rtbp::regularization::{restricted_e, restricted_etilde};

/// States with both primaries and both antipodes at least 0.05 away.
fn regular_state() -> impl Strategy<Value = PlanarPhaseState> {
    (-1.5..1.5f64, -1.5..1.5f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_filter("near a singularity", |&(a, b, _, _)| {
            [-S, S].iter().all(|c| ((a - c).powi(2) + b * b).sqrt() > 0.05)
        })
        .prop_map(|(a, b, c, d)| PlanarPhaseState::new(a, b, c, d))
}

#[test]
fn value_at_lagrange_point() {
    assert!((h_value(&PlanarPhaseState::ORIGIN).unwrap() + 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn mirror_preserves_h(z in regular_state()) {
        let h = h_value(&z).unwrap();
        prop_assert!((h_value(&z.mirrored()).unwrap() - h).abs() < 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn gradient_matches_differences(z in regular_state()) {
        let g = grad_h(&z).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut up = z.to_array();
            let mut dn = z.to_array();
            up[i] += h;
            dn[i] -= h;
            let fd = (h_value(&PlanarPhaseState::from_array(up)).unwrap()
                - h_value(&PlanarPhaseState::from_array(dn)).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-5 * (1.0 + g[i].abs()), "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn regularized_energy_identities(r in 1e-3..0.4f64, th in 0.0..std::f64::consts::TAU,
                                      p1 in -2.0..2.0f64, p2 in -2.0..2.0f64, k in -3.0..-1.0f64) {
        let z = PlanarPhaseState::new(Q_M1[0] + r * th.cos(), r * th.sin(), p1, p2);
        let f = flip(&z, Q_M1);
        let e = restricted_e(&f, k).unwrap();
        let h = h_value(&z).unwrap();
        prop_assert!((e - (h - k) * r).abs() < 1e-10 * (1.0 + h.abs()));
        let et = restricted_etilde(&moser_lift(&f), k).unwrap().e_tilde;
        prop_assert!((et - e).abs() < 1e-10 * (1.0 + e.abs()));
    }
}
