use proptest::prelude::*;

use sdc::cavity::CavityGeometry;
use sdc::gaussian::{abcd_transform, cavity_mode, DEFAULT_WAVELENGTH_MM};
use sdc::power::{equivalent_params, output_power, power_at, GainSpec, LossBudget};
use sdc::raymatrix::{compose, plane_mirror, retroreflector, telescope, thin_lens, translation, RayMatrix};
use sdc::stability::retune_dt;
use sdc::tolerance::{bmc_tolerance, ToleranceSpec};

fn element() -> impl Strategy<Value = RayMatrix> {
    prop_oneof![
        (0.0..200.0f64).prop_map(translation),
        (10.0..200.0f64, any::<bool>()).prop_map(|(f, neg)| thin_lens(if neg { -f } else { f }).unwrap()),
        Just(plane_mirror()),
        (5.0..100.0f64, 5.0..100.0f64).prop_map(|(f, d)| retroreflector(f, d).unwrap()),
        (10.0..50.0f64, 20.0..150.0f64, -2.0..2.0f64).prop_map(|(a, b, e)| telescope(a, b, a + b + e).unwrap()),
    ]
}

fn stable_geometry() -> impl Strategy<Value = CavityGeometry> {
    (15.0..60.0f64, 15.0..60.0f64, 10.0..40.0f64, 30.0..150.0f64, 500.0..50_000.0f64, -0.3..0.3f64).prop_filter_map(
        "unstable",
        |(f1, f2, f3, f4, dw, frac)| {
            let g = retune_dt(&CavityGeometry::nominal(f1, f2, f3, f4, dw)).ok()?;
            // g is linear in dt here with slope −2·dw/f4².
            let geom = g.with(sdc::Param::Dt, g.dt + frac * f4 * f4 / dw);
            sdc::stability::g_parameter(&geom).ok().filter(|g| g.abs() < 0.95).map(|_| geom)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compositions_are_unimodular(chain in prop::collection::vec(element(), 1..8)) {
        let m = compose(&chain).unwrap();
        prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn composition_is_associative(a in element(), b in element(), c in element()) {
        let left = (c * b) * a;
        let right = c * (b * a);
        prop_assert!(left.max_abs_diff(&right) <= 1e-12 * left.max_abs().max(1.0));
    }

    #[test]
    fn retroreflector_matches_explicit_chain(f in 5.0..100.0f64, d in 5.0..100.0f64) {
        let lens = thin_lens(f).unwrap();
        let explicit = compose(&[translation(f), lens, translation(d), plane_mirror(), translation(d), lens, translation(f)]).unwrap();
        prop_assert!(retroreflector(f, d).unwrap().max_abs_diff(&explicit) <= 1e-10 * explicit.max_abs().max(1.0));
    }

    #[test]
    fn telescope_matches_explicit_chain(f3 in 10.0..50.0f64, f4 in 20.0..150.0f64, e in -5.0..5.0f64) {
        let dt = f3 + f4 + e;
        let explicit = compose(&[translation(f3), thin_lens(f3).unwrap(), translation(dt), thin_lens(f4).unwrap(), translation(f4)]).unwrap();
        prop_assert!(telescope(f3, f4, dt).unwrap().max_abs_diff(&explicit) <= 1e-10 * explicit.max_abs().max(1.0));
    }

    #[test]
    fn mode_reproduces_itself(geom in stable_geometry()) {
        let mode = cavity_mode(&geom, DEFAULT_WAVELENGTH_MM).unwrap();
        let back = abcd_transform(&mode.q0, &mode.round_trip).unwrap();
        prop_assert!((back.q - mode.q0.q).norm() <= 1e-9 * mode.q0.q.norm());
        prop_assert!(mode.w00_at_m1 > 0.0);
    }

    #[test]
    fn output_power_is_non_negative(geom in stable_geometry(), a_g in 0.05..5.0f64, p_in in 0.0..60.0f64) {
        let gain = GainSpec { a_g, p_in, ..GainSpec::default() };
        let row = power_at(&geom, &gain, &LossBudget::default(), DEFAULT_WAVELENGTH_MM);
        prop_assert!(row.p_out >= 0.0 && row.p_out.is_finite());
    }

    #[test]
    fn air_loss_lowers_power_with_distance(dw1 in 0.0..200_000.0f64, extra in 1.0..100_000.0f64) {
        let budget = LossBudget::default();
        let gain = GainSpec::default();
        let near = output_power(&gain, &equivalent_params(&budget, 1.0, 1.0, dw1));
        let far = output_power(&gain, &equivalent_params(&budget, 1.0, 1.0, dw1 + extra));
        prop_assert!(far <= near);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bmc_is_reproducible(seed in any::<u64>(), dw in 300.0..3000.0f64) {
        let geom = retune_dt(&CavityGeometry::nominal(30.0, 30.0, 25.0, 60.0, dw)).unwrap();
        let spec = ToleranceSpec { samples_n: 300, iterations_i: 10, ..ToleranceSpec::new(0.05, seed) };
        let a = bmc_tolerance(&geom, &spec).unwrap();
        let b = bmc_tolerance(&geom, &spec).unwrap();
        prop_assert_eq!(a.tau_d_max.to_bits(), b.tau_d_max.to_bits());
    }
}
