use std::collections::BTreeMap;

use proptest::prelude::*;

use dvts_core::autoscaler::Policy;
use dvts_core::simenv::{run_experiment, Scenario};

/// A shortened scenario that still crosses the workload change.
fn quick() -> Scenario {
    let mut s = Scenario::default();
    s.duration_seconds = 2.0 * 3600.0;
    s.app.change.as_mut().unwrap().at_seconds = 3600.0;
    s.workload.step_interval_seconds = 60.0;
    s.ann.hidden_units = 20;
    s.htm.column_count = 256;
    s.htm.cells_per_column = 8;
    s
}

fn policy() -> impl Strategy<Value = Policy> {
    prop_oneof![
        Just(Policy::Dvts),
        Just(Policy::Static("m1.small".into())),
        Just(Policy::Static("m3.medium".into())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn run_invariants(seed in any::<u64>(), p in policy()) {
        let s = quick();
        let r = run_experiment(&s, &p, seed).unwrap();
        prop_assert!(!r.aborted);

        // Every generated user is served by exactly one serving VM.
        let mut served: BTreeMap<u64, u64> = BTreeMap::new();
        for x in &r.samples {
            *served.entry(x.timestamp.to_bits()).or_default() += x.users as u64;
        }
        for row in &r.timeline {
            let got = served.get(&row.time.to_bits()).copied().unwrap_or(0);
            prop_assert_eq!(got, row.users as u64, "t = {}", row.time);
        }

        // Reported percentages stay physical.
        for x in &r.samples {
            prop_assert!(x.pct_idle >= 0.0 && x.pct_steal >= 0.0);
            prop_assert!(x.pct_idle + x.pct_steal <= 100.0 + 1e-9);
        }

        // Ledger total equals a recount from VM lifetimes.
        let mut recount = 0.0;
        for e in &r.ledger.entries {
            let price = s.catalog.get(&e.vm_type).unwrap().cost_per_hour;
            let blocks = ((e.end - e.start) / 3600.0).ceil().max(1.0);
            recount += blocks * price;
        }
        prop_assert!((recount - r.total_cost()).abs() < 1e-9, "{} vs {}", recount, r.total_cost());
        prop_assert_eq!(r.ledger.entries.len(), r.scale_ups().count() + 1);
    }
}
