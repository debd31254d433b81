//! The ledger axioms, expanded over the transfers that occur in a universe
//! and checked at every enumerated path.

use std::collections::BTreeSet;

use super::eval::{Evaluator, Model};
use super::{Atom, Formula, LogicError, Modal, Path};
use crate::model::{ActorId, Transfer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomResult {
    pub name: &'static str,
    pub formula: Formula,
    pub counterexample: Option<Path>,
}

impl AxiomResult {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

fn app(t: &Transfer) -> Formula {
    Formula::atom(Atom::App(t.name()))
}

fn app_at(t: &Transfer, n: usize) -> Formula {
    Formula::atom(Atom::AppAt(t.name(), n))
}

/// The four axioms over the primary universe, up to `depth`.
pub fn check_axioms(model: &Model, depth: usize) -> Result<Vec<AxiomResult>, LogicError> {
    let paths = model.primary().enumerate(depth);
    let symbols: BTreeSet<Transfer> = paths
        .iter()
        .flatten()
        .filter_map(|s| Transfer::parse_name(s).ok())
        .collect();

    let no_self = Formula::all(
        symbols
            .iter()
            .filter(|t| t.from == t.to)
            .map(|t| Formula::negate(app(t))),
    );
    let no_from_bottom = Formula::all(
        symbols
            .iter()
            .filter(|t| t.from == ActorId::Bottom)
            .map(|t| Formula::negate(app(t))),
    );

    // Read positionally: the consuming transfer itself mentions r, so the
    // literal "app(r,k,BOT) => ALF no app(r,..)" would refute itself.
    let mut consumed = Vec::new();
    for t in symbols.iter().filter(|t| t.to == ActorId::Bottom) {
        let same_resource: Vec<&Transfer> = symbols.iter().filter(|u| u.resource == t.resource).collect();
        for n in 1..=depth {
            let later = Formula::all(
                (n + 1..=depth).flat_map(|m| same_resource.iter().map(move |u| Formula::negate(app_at(u, m)))),
            );
            consumed.push(Formula::implies(app_at(t, n), Formula::modal(Modal::AllFutures, later)));
        }
    }
    let nothing_after_consumption = Formula::all(consumed);

    let immutability = Formula::all(
        (0..=depth).map(|t| Formula::implies(Formula::atom(Atom::Phi(t + 1)), Formula::atom(Atom::Phi(t)))),
    );

    let axioms = [
        ("no self transfer", no_self),
        ("nothing leaves BOT", no_from_bottom),
        ("nothing moves after consumption", nothing_after_consumption),
        ("reached states stay reached", immutability),
    ];
    let mut out = Vec::new();
    for (name, formula) in axioms {
        let mut ev = Evaluator::new(model);
        let mut counterexample = None;
        for p in &paths {
            if !ev.eval(&formula, p)? {
                counterexample = Some(p.clone());
                break;
            }
        }
        out.push(AxiomResult {
            name,
            formula,
            counterexample,
        });
    }
    Ok(out)
}
