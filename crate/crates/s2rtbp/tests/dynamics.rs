use s2rtbp::charts::PlanarPhaseState;
use s2rtbp::dynamics::{
    circular_radius_estimate, circular_seed, dopri5, find_periodic_orbit, physical_state_at, Control, IntegratorOptions,
};
use s2rtbp::hamiltonian::{h_value, vector_field, Primary};

fn rhs(_t: f64, z: &[f64; 4]) -> s2rtbp::Result<[f64; 4]> {
    vector_field(&PlanarPhaseState::from_array(*z))
}

fn dist(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn start() -> PlanarPhaseState {
    PlanarPhaseState::new(-0.3, 0.05, 0.4, -0.6)
}

/// Endpoint after `t` with every step of size `h` accepted.
fn fixed_step(z0: [f64; 4], t: f64, h: f64) -> [f64; 4] {
    let opts = IntegratorOptions { rtol: 1e6, atol: 1e6, h_init: h, h_max: h, max_steps: 1_000_000 };
    let mut end = z0;
    dopri5(rhs, 0.0, z0, t, &opts, |s| {
        end = s.y1;
        Ok(Control::Continue)
    })
    .unwrap();
    end
}

#[test]
fn flow_is_reversible_under_the_mirror() {
    let opts = IntegratorOptions::default();
    for z0 in [start(), PlanarPhaseState::new(0.25, -0.1, -0.3, 0.2)] {
        let fwd = physical_state_at(&z0, 2.0, &opts).unwrap();
        let back = physical_state_at(&z0.mirrored(), -2.0, &opts).unwrap();
        assert!(dist(back.to_array(), fwd.mirrored().to_array()) < 1e-7);
    }
}

#[test]
fn fixed_step_convergence_is_fifth_order() {
    // Away from both primaries, where a fixed step is adequate.
    let smooth = PlanarPhaseState::new(0.02, 0.1, 0.1, -0.1);
    let z0 = smooth.to_array();
    let exact = physical_state_at(&smooth, 1.0, &IntegratorOptions { rtol: 1e-14, atol: 1e-14, ..Default::default() }).unwrap();
    let e1 = dist(fixed_step(z0, 1.0, 0.02), exact.to_array());
    let e2 = dist(fixed_step(z0, 1.0, 0.01), exact.to_array());
    let ratio = e1 / e2;
    assert!((20.0..45.0).contains(&ratio), "error ratio {ratio} ({e1:e} -> {e2:e})");
}

#[test]
fn drift_shrinks_when_the_tolerance_is_halved() {
    let z0 = start();
    let h0 = h_value(&z0).unwrap();
    let drift = |opts: &IntegratorOptions| {
        let z = physical_state_at(&z0, 10.0, opts).unwrap();
        (h_value(&z).unwrap() - h0).abs()
    };
    let loose = IntegratorOptions { rtol: 1e-8, atol: 1e-8, ..Default::default() };
    let (d1, d2) = (drift(&loose), drift(&loose.halved()));
    assert!(d2 < 0.8 * d1, "{d1:e} -> {d2:e}");
}

#[test]
fn periods_persist_under_tolerance_halving() {
    let c = -3.0;
    let opts = IntegratorOptions::default();
    let (seed, crossing) = circular_seed(c, Primary::M1, circular_radius_estimate(c)).unwrap();
    let a = find_periodic_orbit(c, &seed, crossing, &opts).unwrap();
    let b = find_periodic_orbit(c, &seed, crossing, &opts.halved()).unwrap();
    assert!((a.period - b.period).abs() < 1e-7, "{} vs {}", a.period, b.period);
    assert!(a.residual < 1e-8);
}
