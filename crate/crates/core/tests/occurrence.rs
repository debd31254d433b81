mod common;

use std::collections::BTreeSet;

use common::*;
use contract_ledger::automata::ExecState;
use contract_ledger::ledger::{AppendMode, LedgerState, RecordMeta};
use contract_ledger::occurrence::{
    bundle_complete_transfers, bundle_occurrence, factorise, is_bundle_complete, occurring_map,
    occurring_map_transfers, relevant_transfers, transfer_occurrence, View,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn honoured_run_labels_every_step() {
    let c = insurance();
    let run = honoured_run();
    let bl = bundle_occurrence(&c, &run);
    assert_eq!(bl.0.len(), 5);
    assert_eq!(transfer_occurrence(&c, &run).0, run);
    let r = occurring_map_transfers(&c, &run, View::Legal);
    assert_eq!(r.reached, ExecState::Legal("Refunded".into()));
    assert_eq!(r.useful, (0..9).collect());
    assert!(r.useless.is_empty() && r.pending.is_empty());
}

#[test]
fn stranded_claim_becomes_useless_after_timeout() {
    let c = insurance();
    let trace = [
        t("damageEv", "TOP", "BOT"),
        t("damageDoc", "TOP", "customer"),
        t("claim", "TOP", "insurer"),
        t("out0", "TOP", "BOT"),
    ];
    let r = occurring_map_transfers(&c, &trace, View::Exec);
    assert_eq!(r.reached, ExecState::Legal("Out0".into()));
    assert_eq!(r.useless, BTreeSet::from([2]));
    assert_eq!(r.useful, BTreeSet::from([0, 1, 3]));
    // The exec run still passes through Active/{claim}.
    assert_eq!(r.labeling.names().len(), 4);
    assert_eq!(
        factorise(&transfer_occurrence(&c, &trace), &c).unwrap(),
        bundle_occurrence(&c, &trace)
    );
}

#[test]
fn repeated_or_unavailable_transfers_are_useless() {
    let c = insurance();
    let trace = [
        t("offer", "TOP", "customer"),
        t("damageEv", "TOP", "BOT"),
        t("damageEv", "TOP", "BOT"),
    ];
    let r = occurring_map_transfers(&c, &trace, View::Legal);
    assert_eq!(r.useless, BTreeSet::from([0, 2]));
    assert_eq!(r.pending, BTreeSet::from([1]));
    assert!(r.labeling.names().is_empty());
}

#[test]
fn factorise_rejects_non_labelings() {
    let c = insurance();
    let bad = contract_ledger::automata::TransferLabeling(vec![t("offer", "TOP", "customer")]);
    assert!(factorise(&bad, &c).is_err());
}

#[test]
fn bundle_completeness_follows_the_last_record() {
    let c = insurance();
    let run = honoured_run();
    let complete: Vec<bool> = (0..=run.len())
        .map(|n| bundle_complete_transfers(&c, &run[..n]))
        .collect();
    assert_eq!(
        complete,
        vec![true, false, true, false, true, true, true, false, false, true]
    );
}

#[test]
fn ledger_view_uses_the_contract_projection() {
    let reg = registry([insurance(), load(LAUNDERING_JSON)]);
    let mut l = LedgerState::new();
    let records = [
        ("Cd", t("damageEv", "TOP", "BOT")),
        ("Ld", t("m", "bob", "alice")),
        ("Cd", t("damageDoc", "TOP", "customer")),
    ];
    for (i, (cid, x)) in records.into_iter().enumerate() {
        l = l
            .append(&reg, cid, x, RecordMeta::fixed(i as i64, "v"), AppendMode::Strict)
            .unwrap();
    }
    let r = occurring_map(&l, &reg, "Cd", View::Legal).unwrap();
    assert_eq!(r.reached, ExecState::Legal("Active".into()));
    assert_eq!(r.useful, BTreeSet::from([0, 1]));
    assert!(is_bundle_complete(&l, reg.get("Cd").unwrap()));
    assert!(!is_bundle_complete(&l, reg.get("Ld").unwrap()));
    assert!(occurring_map(&l, &reg, "Zz", View::Legal).is_err());
}

#[test]
fn relevance_is_by_resource() {
    let c = insurance();
    let trace = [t("m", "bob", "alice"), t("claim", "TOP", "insurer")];
    assert_eq!(relevant_transfers(&c, &trace), vec![t("claim", "TOP", "insurer")]);
}

fn extended(
    seed: u64,
) -> (
    Vec<contract_ledger::model::Transfer>,
    Vec<contract_ledger::model::Transfer>,
) {
    let c = insurance();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let long = random_trace(&c, &mut rng, 12);
    let cut = rng.gen_range(0..=long.len());
    (long[..cut].to_vec(), long)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn occurring_maps_are_monotone(seed in any::<u64>()) {
        let c = insurance();
        let (short, long) = extended(seed);
        prop_assert!(bundle_occurrence(&c, &short).is_prefix_of(&bundle_occurrence(&c, &long)));
        prop_assert!(transfer_occurrence(&c, &short).is_prefix_of(&transfer_occurrence(&c, &long)));
    }

    #[test]
    fn factorise_after_exec_view_is_legal_view(seed in any::<u64>()) {
        let c = insurance();
        let (_, trace) = extended(seed);
        let tl = transfer_occurrence(&c, &trace);
        prop_assert_eq!(factorise(&tl, &c).unwrap(), bundle_occurrence(&c, &trace));
    }

    #[test]
    fn useless_stays_useless(seed in any::<u64>()) {
        let c = insurance();
        let (short, long) = extended(seed);
        let a = occurring_map_transfers(&c, &short, View::Legal);
        let b = occurring_map_transfers(&c, &long, View::Legal);
        prop_assert!(a.useless.is_subset(&b.useless));
        prop_assert!(a.useful.is_subset(&b.useful));
    }

    #[test]
    fn positions_are_partitioned(seed in any::<u64>()) {
        let c = insurance();
        let (_, trace) = extended(seed);
        let r = occurring_map_transfers(&c, &trace, View::Exec);
        prop_assert!(r.useful.is_disjoint(&r.useless));
        prop_assert!(r.useful.is_disjoint(&r.pending));
        prop_assert!(r.useless.is_disjoint(&r.pending));
        prop_assert_eq!(r.useful.len() + r.useless.len() + r.pending.len(), trace.len());
        // The exec labeling is an initial labeling ending where the scan stopped.
        let run = c.run_exec(&transfer_occurrence(&c, &trace).0).unwrap();
        prop_assert_eq!(c.end_state(&run), r.reached);
    }
}
