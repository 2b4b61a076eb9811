use kamnd::hamiltonian::{builtin, default_region, BuiltinParams, BUILTIN_NAMES};
use kamnd::hierarchy::{check_implication, full_hierarchy, HierarchyOptions, Unit};
use kamnd::ConditionId;
use proptest::prelude::*;

fn opts(n: usize, seed: u64) -> HierarchyOptions {
    HierarchyOptions {
        n_samples: n,
        seed,
        ..HierarchyOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn accounting_adds_up(which in 0usize..5, seed in 0u64..1000, n in 50usize..400) {
        let m = builtin(BUILTIN_NAMES[which], &BuiltinParams::default()).unwrap();
        let r = full_hierarchy(&m, &default_region(&m), &opts(n, seed)).unwrap();
        prop_assert_eq!(r.relations.len(), 9);
        for rel in &r.relations {
            prop_assert_eq!(rel.checked + rel.skipped, rel.instances, "{}", rel.relation);
            prop_assert_eq!(rel.skipped, rel.skipped_marginal + rel.skipped_undefined);
            if rel.unit == Unit::Point {
                prop_assert_eq!(rel.instances, n);
            }
            prop_assert!(rel.counterexamples.is_empty(), "{} on {}", rel.relation, m.name);
        }
        prop_assert!(r.passed);
    }
}

#[test]
fn counterexamples_are_clear_cut() {
    // Weak holds for |xi| while Kolmogorov fails everywhere
    let m = builtin("norm", &BuiltinParams::default()).unwrap();
    let r = check_implication(&m, &default_region(&m), ConditionId::Weak, ConditionId::Kolmogorov, &opts(200, 2)).unwrap();
    assert!(!r.passed);
    assert_eq!(r.counterexamples.len(), r.checked);
    for c in &r.counterexamples {
        assert!(c.antecedent.holds && !c.antecedent.marginal);
        assert!(c.consequent.iter().all(|v| !v.holds && !v.marginal));
    }
}

#[test]
fn reports_are_reproducible() {
    let m = builtin("quartic", &BuiltinParams::default()).unwrap();
    let region = default_region(&m);
    let a = full_hierarchy(&m, &region, &opts(300, 9)).unwrap();
    let b = full_hierarchy(&m, &region, &opts(300, 9)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.to_table(), b.to_table());
}
