use kamnd::oracle::OracleDiff;
use kamnd::report::{resolve, scan, ConfigError, Settings};
use kamnd::Region;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn resolved_regions_lie_in_the_domain(a in -15.0..15.0f64, b in -15.0..15.0f64, c in -15.0..15.0f64, w in 0.0..10.0f64) {
        let text = format!("{a}:{b},{c}:{}", c + w);
        let s = Settings { model: Some("quadratic".into()), region: Some(text.clone()), ..Settings::default() };
        match resolve(s, None, None) {
            Ok(cfg) => {
                let r = cfg.region.unwrap();
                prop_assert!(a <= b);
                prop_assert!(r.is_subset_of(&Region::cube(2, -10.0, 10.0)), "{text} -> {r}");
                prop_assert!(cfg.grid >= 2 && cfg.samples > 0 && cfg.max_norm > 0);
            }
            Err(ConfigError::BadRegion { .. }) => prop_assert!(a > b),
            Err(ConfigError::RegionOutsideDomain { .. }) => {
                prop_assert!(a.min(b) < -10.0 || a.max(b) > 10.0 || c < -10.0 || c + w > 10.0);
            }
            Err(e) => prop_assert!(false, "{text}: {e}"),
        }
    }

    #[test]
    fn oracle_diff_pass_matches_the_tolerance_rule(p in -1e3..1e3f64, o in -1e3..1e3f64, tol in 1e-12..1e-1f64) {
        let d = OracleDiff::compare("x", p, o, tol);
        let err = (p - o).abs();
        let expect = if o.abs() < 1.0 { err <= tol } else { err / o.abs() <= tol };
        prop_assert_eq!(d.pass, expect);
    }
}

#[test]
fn exactly_one_model_source() {
    let s = Settings {
        model: Some("norm".into()),
        expr: Some("x1 + x2".into()),
        ..Settings::default()
    };
    assert!(matches!(resolve(s, None, None), Err(ConfigError::ConflictingModels(_))));
}

#[test]
fn non_positive_parameters_are_rejected() {
    for f in [
        |s: &mut Settings| s.samples = Some(0),
        |s: &mut Settings| s.max_norm = Some(0),
        |s: &mut Settings| s.grid = Some(1),
        |s: &mut Settings| s.tol_rank = Some(0.0),
        |s: &mut Settings| s.fd_step = Some(-1e-5),
    ] {
        let mut s = Settings {
            model: Some("norm".into()),
            ..Settings::default()
        };
        f(&mut s);
        assert!(resolve(s, None, None).is_err());
    }
}

#[test]
fn scan_outputs_are_byte_identical() {
    let s = || Settings {
        model: Some("quartic".into()),
        grid: Some(48),
        ..Settings::default()
    };
    let a = scan(&resolve(s(), None, None).unwrap()).unwrap().artifacts();
    let b = scan(&resolve(s(), None, None).unwrap()).unwrap().artifacts();
    assert_eq!(a, b);
}
