//! Property-based invariants over randomized inputs.

mod common;

use proptest::prelude::*;
use pseudothermal::correlate::cross_correlate;
use pseudothermal::detect::TimestampStream;
use pseudothermal::theory::{predict_g2, TheoryParams};

fn stream(events: Vec<u64>, duration_ns: f64) -> TimestampStream {
    TimestampStream {
        events_ns: events,
        duration_ns,
        resolution_ns: 1.0,
        detector_id: 0,
        seed: 0,
    }
}

fn sorted_events(max_t: u64, max_n: usize) -> impl Strategy<Value = Vec<u64>> {
    proptest::collection::vec(0..max_t, 1..max_n).prop_map(|mut v| {
        v.sort_unstable();
        v.dedup();
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_pointer_equals_exhaustive(
        a in sorted_events(100_000, 400),
        b in sorted_events(100_000, 400),
        w in 1u64..8,
        k_max in 10i64..60,
    ) {
        let window = (k_max as f64) * (w as f64);
        let sa = stream(a.clone(), 200_000.0);
        let sb = stream(b.clone(), 200_000.0);
        let hist = cross_correlate(&sa, &sb, w as f64, window).unwrap();
        // exhaustive reference
        let wi = w as i64;
        let mut expected = vec![0u64; (2 * k_max + 1) as usize];
        for &ta in &a {
            for &tb in &b {
                let tau = tb as i64 - ta as i64;
                let k = (2 * tau + wi).div_euclid(2 * wi);
                if k.abs() <= k_max {
                    expected[(k + k_max) as usize] += 1;
                }
            }
        }
        prop_assert_eq!(hist.counts, expected);
    }

    #[test]
    fn quantization_never_moves_an_event_beyond_half_quantum(
        t in 0.0f64..1e9,
        res in 1u64..10,
    ) {
        // same rounding the detector applies
        let q = ((t / res as f64).round_ties_even() as u64) * res;
        let shift = (q as f64 - t).abs();
        prop_assert!(shift <= res as f64 / 2.0 + 1e-9, "t {} -> {} (res {})", t, q, res);
    }

    #[test]
    fn predicted_g2_is_monotone(n in 0usize..16, tau in 0.0f64..2000.0, tau_c in 1.0f64..500.0) {
        let lower = predict_g2(&TheoryParams::ideal(n, tau_c), tau);
        let higher = predict_g2(&TheoryParams::ideal(n + 1, tau_c), tau);
        prop_assert!(higher >= lower);
        let further = predict_g2(&TheoryParams::ideal(n, tau_c), tau + 10.0);
        prop_assert!(further <= lower);
        prop_assert!(lower >= 1.0 && lower <= 2.0);
    }

    #[test]
    fn fold_preserves_total_counts(
        a in sorted_events(50_000, 300),
        b in sorted_events(50_000, 300),
    ) {
        let sa = stream(a, 100_000.0);
        let sb = stream(b, 100_000.0);
        let hist = cross_correlate(&sa, &sb, 2.0, 100.0).unwrap();
        let folded = hist.fold();
        let total: u64 = folded.counts.iter().sum();
        // folding keeps every bin that has a mirror partner
        let z = hist.zero_bin();
        let kept: u64 = hist.counts[..=2 * z].iter().sum();
        prop_assert_eq!(total, kept);
    }
}
