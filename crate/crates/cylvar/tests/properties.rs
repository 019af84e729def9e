//! Property tests for public invariants the artifacts rely on.

use cylvar::integrand::IntegrandSpec;
use cylvar::report::fmt_f64;
use proptest::prelude::*;

proptest! {
    /// Every finite float survives the canonical formatter round-trip;
    /// bytewise CSV determinism depends on it.
    #[test]
    fn fmt_f64_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let parsed: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(parsed, x);
    }

    /// The power family is q-homogeneous, and even under sign flips.
    #[test]
    fn power_family_is_homogeneous_and_even(
        q in 2.0f64..6.0,
        t in 0.0f64..8.0,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let spec = IntegrandSpec::power(2, q).unwrap();
        let value = spec.evaluate(&[a, b]).unwrap();
        let scaled = spec.evaluate(&[t * a, t * b]).unwrap();
        let want = t.powf(q) * value;
        prop_assert!(
            (scaled - want).abs() <= 1e-9 * (1.0 + want.abs()),
            "F(t xi) = {scaled} vs t^q F(xi) = {want}"
        );
        let flipped = spec.evaluate(&[-a, -b]).unwrap();
        prop_assert_eq!(flipped, value);
    }
}
