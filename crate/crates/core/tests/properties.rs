mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn partition_additivity(seed in any::<u64>()) {
        prop_assert_eq!(common::partition_additivity(seed), Ok(()));
    }

    #[test]
    fn norm_preservation(seed in any::<u64>()) {
        prop_assert_eq!(common::norm_preservation(seed), Ok(()));
    }

    #[test]
    fn restriction_coherence(seed in any::<u64>()) {
        prop_assert_eq!(common::restriction_coherence(seed), Ok(()));
    }

    #[test]
    fn ordering_transitivity(seed in any::<u64>()) {
        prop_assert_eq!(common::ordering_transitivity(seed), Ok(()));
    }
}
