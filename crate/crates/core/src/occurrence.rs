//! Occurring maps: the maximal initial labeling of a contract embedded in a
//! trace, the useful/useless split of the trace, and bundle completeness.

use std::collections::{BTreeMap, BTreeSet};

use crate::automata::{AutomatonError, BundleLabeling, Contract, ExecState, Labeling, TransferLabeling};
use crate::ledger::{ContractRegistry, LedgerState, TransferRecord};
use crate::model::Transfer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Legal,
    Exec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceResult {
    pub labeling: Labeling,
    /// A legal state for the legal view; possibly a progress state for the exec view.
    pub reached: ExecState,
    /// Positions in the scanned sequence (the contract projection for ledgers).
    pub useful: BTreeSet<usize>,
    pub useless: BTreeSet<usize>,
    /// Outgoing transition index of the reached legal state, mapped to the
    /// actions already performed toward it. Empty entries are omitted.
    pub in_progress: BTreeMap<usize, BTreeSet<String>>,
    /// Positions still pending in `in_progress`.
    pub pending: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceError(pub String);

impl std::fmt::Display for OccurrenceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown contract {}", self.0)
    }
}

impl std::error::Error for OccurrenceError {}

/// Raw result of one left-to-right scan, shared by both views.
#[derive(Debug, Clone, Default)]
struct Scan {
    state: String,
    progress: BTreeMap<String, usize>,
    legal_edges: Vec<usize>,
    exec_positions: Vec<usize>,
    useful: BTreeSet<usize>,
    useless: BTreeSet<usize>,
}

fn scan(c: &Contract, transfers: &[Transfer]) -> Scan {
    let mut s = Scan {
        state: c.legal.initial.clone(),
        ..Scan::default()
    };
    for (i, t) in transfers.iter().enumerate() {
        let available = c.legal.interleaving_actions(&s.state);
        let action = match c.action_of(t) {
            Some(a) if available.contains(a) && !s.progress.contains_key(a) => a.clone(),
            _ => {
                s.useless.insert(i);
                continue;
            }
        };
        s.progress.insert(action, i);
        let done: BTreeSet<String> = s.progress.keys().cloned().collect();
        let completed = c.legal.completed_by(&s.state, &done);
        let Some(&edge) = completed.first() else {
            continue;
        };
        let members = &c.legal.transitions[edge].actions;
        let mut positions: Vec<(usize, &String)> = s.progress.iter().map(|(a, &p)| (p, a)).collect();
        positions.sort();
        for (p, a) in positions {
            s.exec_positions.push(p);
            if members.contains(a) {
                s.useful.insert(p);
            } else {
                s.useless.insert(p);
            }
        }
        s.legal_edges.push(edge);
        s.state = c.legal.transitions[edge].target.clone();
        s.progress.clear();
    }
    s
}

/// The occurring map of `c` on a bare transfer sequence.
pub fn occurring_map_transfers(c: &Contract, transfers: &[Transfer], view: View) -> OccurrenceResult {
    let s = scan(c, transfers);
    let pending: BTreeSet<usize> = s.progress.values().copied().collect();
    let done: BTreeSet<String> = s.progress.keys().cloned().collect();
    let in_progress = c
        .legal
        .outgoing(&s.state)
        .into_iter()
        .filter_map(|e| {
            let hit: BTreeSet<String> = c.legal.transitions[e].actions.intersection(&done).cloned().collect();
            (!hit.is_empty()).then_some((e, hit))
        })
        .collect();
    let (labeling, reached) = match view {
        View::Legal => (
            Labeling::Bundles(BundleLabeling(s.legal_edges.iter().map(|&e| c.bundle(e)).collect())),
            ExecState::Legal(s.state.clone()),
        ),
        View::Exec => {
            let mut positions = s.exec_positions.clone();
            let mut tail: Vec<usize> = pending.iter().copied().collect();
            tail.sort();
            positions.extend(tail);
            let reached = if done.is_empty() {
                ExecState::Legal(s.state.clone())
            } else {
                ExecState::Progress {
                    base: s.state.clone(),
                    done,
                }
            };
            (
                Labeling::Transfers(TransferLabeling(
                    positions.iter().map(|&p| transfers[p].clone()).collect(),
                )),
                reached,
            )
        }
    };
    OccurrenceResult {
        labeling,
        reached,
        useful: s.useful,
        useless: s.useless,
        in_progress,
        pending,
    }
}

/// The transfers of `path` that touch resources of `c`, in order.
pub fn relevant_transfers(c: &Contract, transfers: &[Transfer]) -> Vec<Transfer> {
    transfers
        .iter()
        .filter(|t| c.has_resource(&t.resource))
        .cloned()
        .collect()
}

fn projection(l: &LedgerState, c: &Contract) -> Vec<Transfer> {
    l.project_contract(&c.id)
        .into_iter()
        .map(|r: &TransferRecord| r.transfer.clone())
        .collect()
}

/// The occurring map over the contract's projection of a ledger. Positions in
/// the result index into that projection.
pub fn occurring_map(
    l: &LedgerState,
    registry: &ContractRegistry,
    contract: &str,
    view: View,
) -> Result<OccurrenceResult, OccurrenceError> {
    let c = registry
        .get(contract)
        .ok_or_else(|| OccurrenceError(contract.to_string()))?;
    Ok(occurring_map_transfers(c, &projection(l, c), view))
}

/// `ν^l` restricted to bundle labelings.
pub fn bundle_occurrence(c: &Contract, transfers: &[Transfer]) -> BundleLabeling {
    match occurring_map_transfers(c, transfers, View::Legal).labeling {
        Labeling::Bundles(b) => b,
        Labeling::Transfers(_) => unreachable!("legal view yields bundles"),
    }
}

/// `ν^e` restricted to transfer labelings.
pub fn transfer_occurrence(c: &Contract, transfers: &[Transfer]) -> TransferLabeling {
    match occurring_map_transfers(c, transfers, View::Exec).labeling {
        Labeling::Transfers(t) => t,
        Labeling::Bundles(_) => unreachable!("exec view yields transfers"),
    }
}

/// The bundle labeling underlying an initial transfer labeling.
pub fn factorise(tl: &TransferLabeling, c: &Contract) -> Result<BundleLabeling, AutomatonError> {
    let run = c.run_exec(&tl.0).map_err(|_| AutomatonError::NotAnInitialLabeling)?;
    let legal = c.fold_exec(&run)?;
    c.bundle_labeling(&legal)
}

/// True iff the last transfer completes a bundle. Vacuously true when empty.
pub fn bundle_complete_transfers(c: &Contract, transfers: &[Transfer]) -> bool {
    match transfers.split_last() {
        None => true,
        Some((_, init)) => bundle_occurrence(c, init) != bundle_occurrence(c, transfers),
    }
}

pub fn is_bundle_complete(l: &LedgerState, c: &Contract) -> bool {
    bundle_complete_transfers(c, &projection(l, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::spec::ContractSpecDocument;

    fn cd() -> Contract {
        ContractSpecDocument::from_json(include_str!("../tests/fixtures/insurance.json"))
            .unwrap()
            .to_contract()
            .unwrap()
    }

    fn t(r: &str, a: &str, b: &str) -> Transfer {
        Transfer::new(r, a, b)
    }

    #[test]
    fn first_bundle_then_pending_claim() {
        let c = cd();
        let sigma = [
            t("damageEv", "TOP", "BOT"),
            t("damageDoc", "TOP", "customer"),
            t("claim", "TOP", "insurer"),
        ];
        let r = occurring_map_transfers(&c, &sigma, View::Legal);
        assert_eq!(
            r.labeling.names(),
            vec!["{(damageDoc,TOP,customer),(damageEv,TOP,BOT)}"]
        );
        assert_eq!(r.reached, ExecState::Legal("Active".into()));
        assert_eq!(r.useful, BTreeSet::from([0, 1]));
        assert!(r.useless.is_empty());
        let claimed = c.legal.transition("Active->Claimed").unwrap().0;
        assert_eq!(
            r.in_progress,
            BTreeMap::from([(claimed, BTreeSet::from(["claim".to_string()]))])
        );
        assert_eq!(r.pending, BTreeSet::from([2]));

        let e = occurring_map_transfers(&c, &sigma, View::Exec);
        assert_eq!(e.labeling.names().len(), 3);
        assert_eq!(e.reached.to_string(), "Active/{claim}");
    }

    #[test]
    fn empty_trace() {
        let r = occurring_map_transfers(&cd(), &[], View::Legal);
        assert!(r.labeling.names().is_empty());
        assert_eq!(r.reached, ExecState::Legal("In".into()));
    }

    #[test]
    fn early_offer_is_useless() {
        let r = occurring_map_transfers(&cd(), &[t("offer", "TOP", "customer")], View::Legal);
        assert!(r.labeling.names().is_empty());
        assert_eq!(r.reached, ExecState::Legal("In".into()));
        assert_eq!(r.useless, BTreeSet::from([0]));
    }

    #[test]
    fn repeated_transfer_is_useless() {
        let r = occurring_map_transfers(
            &cd(),
            &[t("damageEv", "TOP", "BOT"), t("damageEv", "TOP", "BOT")],
            View::Legal,
        );
        assert_eq!(r.useless, BTreeSet::from([1]));
        assert_eq!(r.pending, BTreeSet::from([0]));
    }

    #[test]
    fn factorise_examples() {
        let c = cd();
        let two = TransferLabeling(vec![t("damageEv", "TOP", "BOT"), t("damageDoc", "TOP", "customer")]);
        assert_eq!(factorise(&two, &c).unwrap().0.len(), 1);
        assert_eq!(factorise(&TransferLabeling::default(), &c).unwrap().0.len(), 0);
        let bad = TransferLabeling(vec![t("claim", "TOP", "insurer")]);
        assert_eq!(factorise(&bad, &c), Err(AutomatonError::NotAnInitialLabeling));
    }

    #[test]
    fn bundle_complete_examples() {
        let c = cd();
        assert!(bundle_complete_transfers(
            &c,
            &[t("damageEv", "TOP", "BOT"), t("damageDoc", "TOP", "customer")]
        ));
        assert!(!bundle_complete_transfers(&c, &[t("damageEv", "TOP", "BOT")]));
        assert!(bundle_complete_transfers(&c, &[]));
    }
}
