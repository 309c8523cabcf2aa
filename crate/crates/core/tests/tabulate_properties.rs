mod common;

use informality::ingest::{ObservationRecord, RecodeSet};
use informality::tabulate::{cross_tab, share_table, Category};
use informality::{EmploymentClass, IndeterminatePolicy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(seed: u64, n: usize) -> Vec<(ObservationRecord, EmploymentClass)> {
    let recodes = RecodeSet::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let r = common::random_record(&mut rng, i, &recodes);
            let class = EmploymentClass::ALL[rng.random_range(0..3)];
            (r, class)
        })
        .collect()
}

fn categories() -> impl Strategy<Value = Category> {
    prop::sample::select(Category::ALL.to_vec())
}

fn policies() -> impl Strategy<Value = IndeterminatePolicy> {
    prop_oneof![Just(IndeterminatePolicy::Exclude), Just(IndeterminatePolicy::Informal)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn shares_add_to_100(seed in any::<u64>(), n in 5usize..300, category in categories(), policy in policies()) {
        let rows = rows(seed, n);
        let Ok(t) = share_table(&rows, category, policy) else { return Ok(()) };
        for r in t.rows.iter().filter(|r| !r.empty) {
            prop_assert!((r.pct_formal_within + r.pct_informal_within - 100.0).abs() < 1e-9);
        }
        if t.formal_weight > 0.0 {
            let s: f64 = t.rows.iter().map(|r| r.pct_of_all_formal_across).sum();
            prop_assert!((s - 100.0).abs() < 1e-9);
        }
        if t.informal_weight > 0.0 {
            let s: f64 = t.rows.iter().map(|r| r.pct_of_all_informal_across).sum();
            prop_assert!((s - 100.0).abs() < 1e-9);
        }
        let counted = t.formal_weight + t.informal_weight + t.excluded_weight;
        let input: f64 = rows.iter().map(|(r, _)| r.weight).sum();
        prop_assert!((counted - input).abs() <= 1e-9 * input.max(1.0));
    }

    #[test]
    fn cross_tab_marginals_match(seed in any::<u64>(), n in 5usize..300, a in categories(), b in categories(), policy in policies()) {
        let rows = rows(seed, n);
        let (Ok(t), Ok(x)) = (share_table(&rows, a, policy), cross_tab(&rows, a, b, policy)) else { return Ok(()) };
        let m = x.marginals();
        prop_assert_eq!(m.len(), t.rows.len());
        for ((label, f, i), row) in m.iter().zip(&t.rows) {
            prop_assert_eq!(label, &row.label);
            prop_assert!((f - row.formal_weight).abs() <= 1e-9 * row.formal_weight.max(1.0));
            prop_assert!((i - row.informal_weight).abs() <= 1e-9 * row.informal_weight.max(1.0));
        }
        prop_assert_eq!(x.excluded_weight, t.excluded_weight);
    }
}
