use s2rtbp::consts::S;
use s2rtbp::figures::{figure_table, write_figures, FIGURE_IDS};
use s2rtbp::{Error, RunConfig};

fn small() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.figures.theta_samples = 72;
    cfg.figures.rho_samples = 32;
    cfg
}

#[test]
fn axis_witness_ends_on_the_disk_boundary() {
    let t = figure_table("fig6", &small()).unwrap();
    let last = t.rows.last().unwrap();
    assert_eq!(last[0], S);
    assert!(t.rows.iter().all(|r| r[1] >= 0.0));
}

#[test]
fn surface_witness_is_positive_inside_the_region() {
    let t = figure_table("fig7", &small()).unwrap();
    let inside: Vec<&Vec<f64>> = t.rows.iter().filter(|r| r[2] == 1.0).collect();
    assert!(!inside.is_empty());
    assert!(inside.iter().all(|r| r[3] > 0.0));
}

#[test]
fn unknown_ids_write_nothing() {
    let dir = std::env::temp_dir().join(format!("s2rtbp-fig-{}", std::process::id()));
    let ids = vec!["fig2".to_string(), "fig1".to_string()];
    let err = write_figures(&ids, &small(), &dir).unwrap_err();
    assert!(matches!(err, Error::UnknownFigure { .. }));
    assert!(!dir.exists());
    assert_eq!(FIGURE_IDS.len(), 9);
}
