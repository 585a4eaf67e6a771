use mitigator_core::confusion::{
    classify_zone, step_affect, AffectState, ConfusionZone, Level, PersistenceLimits, ThresholdPair,
};
use mitigator_core::num::Scalar;
use proptest::prelude::*;

fn thresholds() -> impl Strategy<Value = (f64, f64)> {
    (0.001f64..0.998, 0.001f64..0.998)
        .prop_filter("distinct", |(a, b)| a != b)
        .prop_map(|(a, b)| if a < b { (a, b) } else { (b, a) })
}

fn zone_of<T: Scalar>(level: f64, t_a: f64, t_b: f64) -> ConfusionZone {
    let th = ThresholdPair::new(T::of(t_a), T::of(t_b)).unwrap();
    classify_zone(Level::new(T::of(level)).unwrap(), &th)
}

fn limits() -> impl Strategy<Value = PersistenceLimits> {
    (0u32..5, 0u32..5, 0u32..5).prop_map(|(a, b, c)| PersistenceLimits::new(a, a + b, a + b + c).unwrap())
}

fn zone() -> impl Strategy<Value = ConfusionZone> {
    prop::sample::select(ConfusionZone::ALL.to_vec())
}

proptest! {
    #[test]
    fn classification_matches_interval_rule((t_a, t_b) in thresholds(), level in 0.0f64..=1.0) {
        let expected = if level < t_a {
            ConfusionZone::Engaged
        } else if level <= t_b {
            ConfusionZone::ProductiveConfusion
        } else {
            ConfusionZone::UnproductiveConfusion
        };
        prop_assert_eq!(zone_of::<f64>(level, t_a, t_b), expected);
    }

    #[test]
    fn monotone_in_level((t_a, t_b) in thresholds(), x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(zone_of::<f64>(lo, t_a, t_b).rank() <= zone_of::<f64>(hi, t_a, t_b).rank());
        prop_assert!(zone_of::<f32>(lo, t_a, t_b).rank() <= zone_of::<f32>(hi, t_a, t_b).rank());
    }

    #[test]
    fn boundaries_are_productive((t_a, t_b) in thresholds()) {
        prop_assert_eq!(zone_of::<f64>(t_a, t_a, t_b), ConfusionZone::ProductiveConfusion);
        prop_assert_eq!(zone_of::<f64>(t_b, t_a, t_b), ConfusionZone::ProductiveConfusion);
        prop_assert_eq!(zone_of::<f32>(t_a, t_a, t_b), ConfusionZone::ProductiveConfusion);
        prop_assert_eq!(zone_of::<f32>(t_b, t_a, t_b), ConfusionZone::ProductiveConfusion);
    }

    #[test]
    fn power_of_two_scaling_is_exact((t_a, t_b) in thresholds(), level in 0.0f64..=1.0, k in 1i32..8) {
        let c = 0.5f64.powi(k);
        prop_assert_eq!(zone_of::<f64>(level, t_a, t_b), zone_of::<f64>(level * c, t_a * c, t_b * c));
        let c32 = 0.5f32.powi(k);
        let th = ThresholdPair::new(t_a as f32, t_b as f32).unwrap();
        let scaled = ThresholdPair::new(th.t_a() * c32, th.t_b() * c32).unwrap();
        let l = Level::new(level as f32).unwrap();
        prop_assert_eq!(classify_zone(l, &th), classify_zone(Level::new(l.value() * c32).unwrap(), &scaled));
    }

    #[test]
    fn scaling_preserves_zone_away_from_ties((t_a, t_b) in thresholds(), level in 0.0f64..=1.0, c in 0.01f64..1.0) {
        prop_assume!((level - t_a).abs() > 1e-9 && (level - t_b).abs() > 1e-9);
        prop_assert_eq!(zone_of::<f64>(level, t_a, t_b), zone_of::<f64>(level * c, t_a * c, t_b * c));
    }

    #[test]
    fn random_affect_walks_stay_on_chain(
        lim in limits(),
        walk in prop::collection::vec((zone(), 0u32..10), 1..200),
    ) {
        let mut state = AffectState::Engagement;
        for (z, p) in walk {
            let next = step_affect(state, z, p, &lim);
            prop_assert!(state.may_precede(next), "{:?} -> {:?}", state, next);
            prop_assert!(next.position().abs_diff(state.position()) <= 1);
            if state == AffectState::Disengaged {
                prop_assert_eq!(next, AffectState::Disengaged);
            }
            state = next;
        }
    }

    #[test]
    fn disengaged_is_absorbing(lim in limits(), z in zone(), p in 0u32..100) {
        prop_assert_eq!(step_affect(AffectState::Disengaged, z, p, &lim), AffectState::Disengaged);
    }
}

#[test]
fn partition_on_a_fine_grid() {
    let th = ThresholdPair::new(0.3f64, 0.7).unwrap();
    let mut counts = [0usize; 3];
    for i in 0..=10_000u32 {
        let z = classify_zone(Level::new(f64::from(i) / 10_000.0).unwrap(), &th);
        counts[z.rank() as usize] += 1;
    }
    // [0, 0.3) has 3000 grid points, [0.3, 0.7] has 4001, (0.7, 1] has 3000.
    assert_eq!(counts, [3000, 4001, 3000]);
}

#[test]
fn out_of_range_values_rejected() {
    for v in [-0.01, 1.01, f64::NAN, f64::INFINITY] {
        assert!(Level::new(v).is_err());
    }
    assert!(ThresholdPair::new(0.7, 0.3).is_err());
    assert!(ThresholdPair::new(0.5f32, 0.5).is_err());
    assert!(ThresholdPair::new(0.0, 0.5).is_err());
    assert!(ThresholdPair::new(0.5, 1.0).is_err());
}
