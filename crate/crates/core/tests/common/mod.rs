//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use contract_ledger::automata::Contract;
use contract_ledger::ledger::{AppendMode, ContractRegistry, LedgerState, RecordMeta};
use contract_ledger::model::Transfer;
use contract_ledger::query::spec::ContractSpecDocument;

pub const INSURANCE_JSON: &str = include_str!("../fixtures/insurance.json");
pub const LAUNDERING_JSON: &str = include_str!("../fixtures/laundering.json");
pub const INSURANCE_EXEC_GOLDEN: &str = include_str!("../fixtures/insurance_exec.golden");

pub fn load(json: &str) -> Contract {
    ContractSpecDocument::from_json(json).unwrap().to_contract().unwrap()
}

pub fn insurance() -> Contract {
    load(INSURANCE_JSON)
}

pub fn registry(cs: impl IntoIterator<Item = Contract>) -> ContractRegistry {
    cs.into_iter().collect()
}

pub fn t(r: &str, from: &str, to: &str) -> Transfer {
    Transfer::new(r, from, to)
}

/// The nine transfers of the honoured insurance run, ending in Refunded.
pub fn honoured_run() -> Vec<Transfer> {
    vec![
        t("damageEv", "TOP", "BOT"),
        t("damageDoc", "TOP", "customer"),
        t("claim", "TOP", "insurer"),
        t("damageDoc", "customer", "insurer"),
        t("offer", "TOP", "customer"),
        t("accept", "TOP", "insurer"),
        t("refund", "TOP", "customer"),
        t("oldPrem", "customer", "BOT"),
        t("raise", "TOP", "customer"),
    ]
}

/// The run that ends in Rejected after six records.
pub fn rejected_run() -> Vec<Transfer> {
    let mut r = honoured_run()[..5].to_vec();
    r.push(t("reject", "TOP", "insurer"));
    r
}

/// Damage, report, then the first timeout.
pub fn timeout_run() -> Vec<Transfer> {
    vec![
        t("damageEv", "TOP", "BOT"),
        t("damageDoc", "TOP", "customer"),
        t("out0", "TOP", "BOT"),
    ]
}

pub fn ledger(reg: &ContractRegistry, cid: &str, ts: &[Transfer], mode: AppendMode) -> LedgerState {
    let mut l = LedgerState::new();
    for (i, x) in ts.iter().enumerate() {
        l = l
            .append(reg, cid, x.clone(), RecordMeta::fixed(i as i64, "validator-1"), mode)
            .unwrap();
    }
    l
}

pub fn insurance_ledger(ts: &[Transfer]) -> (ContractRegistry, LedgerState) {
    let reg = registry([insurance()]);
    let l = ledger(&reg, "Cd", ts, AppendMode::Permissive);
    (reg, l)
}

/// Bob passes m to Alice, Alice passes it on to George, twice, with
/// unrelated records in between. Expected pairs: (0,2) and (5,6).
pub fn laundering_trace() -> Vec<Transfer> {
    vec![
        t("m", "bob", "alice"),
        t("n", "TOP", "alice"),
        t("m", "alice", "george"),
        t("m", "george", "bob"),
        t("n", "alice", "george"),
        t("m", "bob", "alice"),
        t("m", "alice", "george"),
    ]
}

pub fn laundering_ledger() -> (ContractRegistry, LedgerState) {
    let reg = registry([load(LAUNDERING_JSON)]);
    let l = ledger(&reg, "Ld", &laundering_trace(), AppendMode::Strict);
    (reg, l)
}

pub fn names(ts: &[Transfer]) -> Vec<String> {
    ts.iter().map(Transfer::name).collect()
}

use rand::seq::SliceRandom;
use rand::Rng;

/// A random walk of at most `max_len` steps through the execution automaton.
pub fn random_run<R: Rng>(c: &Contract, rng: &mut R, max_len: usize) -> Vec<Transfer> {
    let mut state = c.exec.initial.clone();
    let mut out = Vec::new();
    let stop = rng.gen_range(0..=max_len);
    while out.len() < stop {
        let Some(&e) = c.exec.outgoing(&state).choose(rng) else {
            break;
        };
        let step = &c.exec.transitions[e];
        out.push(c.rho(&step.action).clone());
        state = step.target.clone();
    }
    out
}

/// Transfers that look plausible for the insurance contract but break it.
pub fn foreign_transfers() -> Vec<Transfer> {
    vec![
        t("damageDoc", "TOP", "insurer"),
        t("claim", "insurer", "customer"),
        t("offer", "customer", "insurer"),
        t("oldPrem", "customer", "insurer"),
        t("refund", "TOP", "insurer"),
    ]
}

/// One third each: runs of the contract, shuffled runs, and runs with one
/// inserted transfer drawn from the contract or from `foreign_transfers`.
pub fn random_trace<R: Rng>(c: &Contract, rng: &mut R, max_len: usize) -> Vec<Transfer> {
    let mut run = random_run(c, rng, max_len);
    match rng.gen_range(0..3) {
        0 => {}
        1 => run.shuffle(rng),
        _ => {
            let mut pool: Vec<Transfer> = c.transfers().cloned().collect();
            pool.extend(foreign_transfers());
            let x = pool.choose(rng).unwrap().clone();
            let at = rng.gen_range(0..=run.len());
            run.insert(at, x);
        }
    }
    run
}
pub mod algebra;
