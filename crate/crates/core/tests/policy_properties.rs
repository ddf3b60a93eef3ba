use coop_relay::binary_model::{classify, enumerate_states};
use coop_relay::policy_synth::{
    derive_policy, minimize, Decision, KnowledgeSubset, Target, Viewpoint,
};
use proptest::prelude::*;

fn nested_pair() -> impl Strategy<Value = (KnowledgeSubset, KnowledgeSubset)> {
    (any::<u8>(), any::<u8>()).prop_map(|(a, b)| {
        (
            KnowledgeSubset::from_mask(a & b),
            KnowledgeSubset::from_mask(a),
        )
    })
}

#[test]
fn conservative_policies_never_transmit_into_harm() {
    for mask in 0..=255u8 {
        let policy = derive_policy(KnowledgeSubset::from_mask(mask), Viewpoint::Conservative);
        for s in enumerate_states() {
            if classify(s).is_harmful() {
                assert_eq!(
                    policy.decision(s),
                    Decision::Rx,
                    "mask {mask:#x}, state {s}"
                );
            }
        }
    }
}

#[test]
fn full_knowledge_views_converge() {
    let cons = derive_policy(KnowledgeSubset::full(), Viewpoint::Conservative);
    let greed = derive_policy(KnowledgeSubset::full(), Viewpoint::Greedy);
    for s in enumerate_states().filter(|&s| !classify(s).is_d()) {
        assert_eq!(cons.transmits(s), greed.transmits(s), "state {s}");
        assert_eq!(
            cons.transmits(s),
            classify(s).in_a() && !classify(s).is_harmful()
        );
    }
}

#[test]
fn every_subset_minimizes_soundly() {
    for mask in (0..=255u8).step_by(7) {
        for view in [Viewpoint::Conservative, Viewpoint::Greedy] {
            let policy = derive_policy(KnowledgeSubset::from_mask(mask), view);
            let tx = minimize(&policy, Target::TxSet);
            let rx = minimize(&policy, Target::RxSet);
            for bin in policy.care_bins() {
                let bits = policy.knowledge().expand(bin);
                let is_tx = policy.bin_decision(bin) == Decision::Tx;
                assert_eq!(tx.eval_bits(bits), is_tx);
                assert_eq!(rx.eval_bits(bits), !is_tx);
            }
        }
    }
}

proptest! {
    #[test]
    fn conservative_knowledge_is_monotone((small, large) in nested_pair()) {
        let p1 = derive_policy(small, Viewpoint::Conservative);
        let p2 = derive_policy(large, Viewpoint::Conservative);
        for s in enumerate_states() {
            if p1.decision(s) == Decision::Tx {
                prop_assert_ne!(p2.decision(s), Decision::Rx);
                if classify(s).in_a() {
                    prop_assert_eq!(p2.decision(s), Decision::Tx);
                }
            }
        }
    }

    #[test]
    fn greedy_assist_coverage_shrinks_with_knowledge((small, large) in nested_pair()) {
        // A greedy relay that halts in an assisting state knows that state
        // is harmful or unhelpful; extra knowledge cannot bring it back.
        let p1 = derive_policy(small, Viewpoint::Greedy);
        let p2 = derive_policy(large, Viewpoint::Greedy);
        for s in enumerate_states().filter(|&s| classify(s).in_a()) {
            if p2.transmits(s) {
                prop_assert!(p1.transmits(s));
            }
        }
    }
}

#[test]
fn reference_expressions_all_reproduce() {
    let checks = coop_relay::policy_synth::check_reference_expressions();
    assert_eq!(checks.len(), 7);
    for c in checks {
        assert!(
            c.equivalent,
            "{}: minimized {} vs reference {}",
            c.policy, c.minimized, c.reference
        );
    }
}
