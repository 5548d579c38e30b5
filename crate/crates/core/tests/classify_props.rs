use std::collections::HashMap;

use clozecheck::classify::{assign_label, pr_curve, Cutoff, Label, Phi, Score};
use num_rational::Ratio;
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<(Score, bool)>> {
    prop::collection::vec(
        (1u64..=10).prop_flat_map(|n| (0..=n, Just(n), any::<bool>())).prop_map(|(c, n, g)| (Ratio::new(c, n), g)),
        2..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn supports_count_non_increasing_in_phi(samples in scores(), a in 0u64..=100, b in 0u64..=100) {
        let (lo, hi) = (a.min(b), a.max(b));
        let count = |p: u64| {
            let phi = Phi::new(Ratio::new(p, 100)).unwrap();
            samples.iter().filter(|(s, _)| assign_label(*s, phi) == Label::Supports).count()
        };
        prop_assert!(count(lo) >= count(hi));
    }

    #[test]
    fn pr_points_are_consistent(samples in scores()) {
        prop_assume!(samples.iter().any(|(_, g)| *g) && samples.iter().any(|(_, g)| !*g));
        let curve = pr_curve(&samples).unwrap();
        for pair in curve.windows(2) {
            prop_assert!(pair[0].cutoff < pair[1].cutoff);
            prop_assert!(pair[0].supports_count >= pair[1].supports_count);
        }
        for p in &curve {
            prop_assert_eq!(p.precision * Ratio::from_integer(p.supports_count), Ratio::from_integer(p.true_positives));
            prop_assert!(p.precision <= Ratio::from_integer(1) && p.recall <= Ratio::from_integer(1) && p.f1 <= Ratio::from_integer(1));
        }
        prop_assert_eq!(curve.first().unwrap().cutoff, Cutoff::At(Ratio::new(0, 1)));
        prop_assert_eq!(curve.last().unwrap().cutoff, Cutoff::AboveMax);
    }
}

#[test]
fn score_bounds() {
    for n in 1u64..=10 {
        for c in 0..=n {
            let s: Score = Ratio::new(c, n);
            assert!(s >= Ratio::new(0, 1) && s <= Ratio::new(1, 1));
            assert_eq!(s == Ratio::new(1, 1), c == n);
        }
    }
}

#[test]
fn label_decisions_by_hand() {
    let table: HashMap<(u64, u64), (Label, Label)> = [
        ((1, 1), (Label::Supports, Label::Supports)),
        ((0, 1), (Label::ManualReview, Label::ManualReview)),
        ((2, 3), (Label::ManualReview, Label::ManualReview)),
        ((3, 4), (Label::ManualReview, Label::Supports)),
        ((4, 5), (Label::Supports, Label::Supports)),
        ((7, 10), (Label::ManualReview, Label::Supports)),
        ((5, 7), (Label::ManualReview, Label::Supports)),
    ]
    .into_iter()
    .collect();
    let strict: Phi = "0.76".parse().unwrap();
    let lenient: Phi = "0.67".parse().unwrap();
    for ((c, n), (at_strict, at_lenient)) in table {
        assert_eq!(assign_label(Ratio::new(c, n), strict), at_strict, "{c}/{n} at 0.76");
        assert_eq!(assign_label(Ratio::new(c, n), lenient), at_lenient, "{c}/{n} at 0.67");
    }
}
