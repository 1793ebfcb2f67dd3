use sdc::cavity::CavityGeometry;
use sdc::tolerance::{bmc_tolerance, ToleranceSpec};

/// τ_d^max against dw at the default geometry with τ_f* at 1% of the
/// largest focal length, full sample and iteration counts, seed 0.
#[test]
fn tolerance_shrinks_with_distance() {
    let base = CavityGeometry::default();
    let spec = ToleranceSpec::one_percent_of_max_focal(&base, 0);
    let taus: Vec<f64> = [500.0, 1000.0, 2000.0, 4000.0, 8000.0]
        .iter()
        .map(|&dw| bmc_tolerance(&CavityGeometry { dw, ..base }, &spec).unwrap().tau_d_max)
        .collect();
    println!("tau_d_max at 0.5/1/2/4/8 m: {taus:?}");
    assert!(taus.windows(2).all(|w| w[1] <= w[0]), "{taus:?}");
}

/// τ_d^max against τ_f* at the default geometry, seed 0.
#[test]
fn tolerance_shrinks_with_focal_budget() {
    let base = CavityGeometry::default();
    let taus: Vec<f64> = [0.0, 0.005, 0.01, 0.02, 0.05]
        .iter()
        .map(|&tf| bmc_tolerance(&base, &ToleranceSpec::new(tf, 0)).unwrap().tau_d_max)
        .collect();
    println!("tau_d_max at tau_f 0/0.005/0.01/0.02/0.05: {taus:?}");
    assert!(taus.windows(2).all(|w| w[1] <= w[0]), "{taus:?}");
}
