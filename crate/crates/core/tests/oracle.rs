mod support;

use support::oracle;

const INSTANCES: usize = 120;
const TOL: f64 = 1e-8;

#[test]
fn local_fits_match_normal_equations() {
    let worst = oracle::local_fits(11, INSTANCES);
    assert!(worst < TOL, "{worst}");
}

#[test]
fn index_update_matches_normal_equations() {
    let worst = oracle::index_update(12, INSTANCES);
    assert!(worst < TOL, "{worst}");
}

#[test]
fn initial_regression_matches_normal_equations() {
    let worst = oracle::initial_regression(13, INSTANCES);
    assert!(worst < TOL, "{worst}");
}

#[test]
fn irls_step_matches_normal_equations() {
    let worst = oracle::irls_step(14, INSTANCES);
    assert!(worst < TOL, "{worst}");
}
