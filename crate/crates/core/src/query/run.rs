//! Evaluating queries against a ledger: free formulas, the contract-state
//! query, hypothetical reasoning, and the repeated-pattern audit.

use std::collections::BTreeSet;

use thiserror::Error;

use super::parser::{parse_query, Directives, ParseError, QueryAst, Vocabulary};
use crate::automata::{Contract, ExecState, Outcome};
use crate::ledger::{ContractRegistry, LedgerState};
use crate::logic::{
    pushforward_exists, Atom, Evaluator, Formula, Gate, LedgerUniverse, LogicError, MapKind, Modal, Model, MonotoneMap,
    Path, Universe, UniverseRef,
};
use crate::model::Transfer;

pub const DEFAULT_HORIZON: usize = 4;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("unknown contract {0}")]
    UnknownContract(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    pub verdict: bool,
    /// Some future quantifier was cut off by the horizon.
    pub truncated: bool,
    /// The step the formula was evaluated at.
    pub at: usize,
    pub formula: Formula,
}

fn check_step(index: usize, l: &LedgerState) -> Result<(), QueryError> {
    if index > l.len() {
        return Err(LogicError::IndexOutOfRange { index, len: l.len() }.into());
    }
    Ok(())
}

fn ledger_model(l: &LedgerState, registry: &ContractRegistry, horizon: usize, gate: Gate) -> Model {
    let u = LedgerUniverse::from_ledger(l, registry, horizon, gate);
    Model::new(Universe::Ledger(u), registry.clone())
}

fn prefix_path(l: &LedgerState, n: usize) -> Path {
    l.records().take(n).map(|r| r.transfer.name()).collect()
}

/// Evaluates a parsed query at the recorded state it points to. Directives
/// in the query override `defaults`; the step defaults to the ledger length.
pub fn run_query(
    l: &LedgerState,
    registry: &ContractRegistry,
    ast: &QueryAst,
    defaults: Directives,
) -> Result<QueryOutcome, QueryError> {
    Vocabulary::from_ledger(l, registry).validate(&ast.formula)?;
    let d = ast.directives.or(defaults);
    let at = d.at.unwrap_or(l.len());
    check_step(at, l)?;
    let model = ledger_model(
        l,
        registry,
        d.horizon.unwrap_or(DEFAULT_HORIZON),
        d.gate.unwrap_or_default(),
    );
    let formula = match d.evolution {
        Some(t) => {
            check_step(t, l)?;
            Formula::and(ast.formula.clone(), Formula::atom(Atom::Phi(t)))
        }
        None => ast.formula.clone(),
    };
    let mut ev = Evaluator::new(&model);
    let verdict = ev.eval(&formula, &prefix_path(l, at))?;
    Ok(QueryOutcome {
        verdict,
        truncated: ev.truncated(),
        at,
        formula,
    })
}

pub fn run_query_text(
    l: &LedgerState,
    registry: &ContractRegistry,
    text: &str,
    defaults: Directives,
) -> Result<QueryOutcome, QueryError> {
    run_query(l, registry, &parse_query(text)?, defaults)
}

/// `¬φ ∧ PAST EXF φ ∧ Φ_i`, evaluated at step `i`: φ fails now, but some
/// earlier recorded state had a future where it holds.
pub fn hypothetical(
    l: &LedgerState,
    registry: &ContractRegistry,
    phi: &Formula,
    i: usize,
    horizon: usize,
    gate: Gate,
) -> Result<QueryOutcome, QueryError> {
    let f = Formula::all([
        Formula::negate(phi.clone()),
        Formula::modal(Modal::SomePast, Formula::modal(Modal::SomeFuture, phi.clone())),
        Formula::atom(Atom::Phi(i)),
    ]);
    let ast = QueryAst {
        directives: Directives {
            at: Some(i),
            horizon: Some(horizon),
            gate: Some(gate),
            evolution: None,
        },
        formula: f,
    };
    run_query(l, registry, &ast, Directives::default())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractStateReport {
    pub contract: String,
    /// Legal states reached by the bundle labelings in the image.
    pub legal: BTreeSet<String>,
    /// Execution states, possibly intermediate, reached by the transfer labelings.
    pub exec: BTreeSet<ExecState>,
    /// Outcome of each final legal state in `legal`.
    pub outcomes: Vec<(String, Outcome)>,
}

fn legal_end(c: &Contract, names: &[String]) -> Option<String> {
    let mut v = c.legal.initial.clone();
    for n in names {
        let e = c.legal.outgoing(&v).into_iter().find(|&e| c.bundle(e).name() == *n)?;
        v = c.legal.transitions[e].target.clone();
    }
    Some(v)
}

fn exec_end(c: &Contract, names: &[String]) -> Option<ExecState> {
    let ts: Vec<Transfer> = names
        .iter()
        .map(|n| Transfer::parse_name(n))
        .collect::<Result<_, _>>()
        .ok()?;
    let run = c.run_exec(&ts).ok()?;
    Some(c.end_state(&run))
}

/// The state of a contract for the ledger state of length `k`, within the
/// evolution after `n` records: the images of `Φ_n ∧ χ_k ∧ ¬χ_(k-1)` along
/// both occurring maps.
pub fn contract_state(
    l: &LedgerState,
    registry: &ContractRegistry,
    contract: &str,
    n: usize,
    k: usize,
) -> Result<ContractStateReport, QueryError> {
    let c = registry
        .get(contract)
        .ok_or_else(|| QueryError::UnknownContract(contract.to_string()))?;
    check_step(n, l)?;
    check_step(k, l)?;
    let model = ledger_model(l, registry, 0, Gate::ContractGated);
    let selector = Formula::and(Formula::atom(Atom::Phi(n)), Formula::exact_length(k));
    let states = Evaluator::new(&model).interpret(&selector, &UniverseRef::Primary, k)?;
    let legal_img = pushforward_exists(&MonotoneMap::Nu(MapKind::Legal, c), &states)?;
    let exec_img = pushforward_exists(&MonotoneMap::Nu(MapKind::Exec, c), &states)?;
    let legal: BTreeSet<String> = legal_img.paths.iter().filter_map(|p| legal_end(c, p)).collect();
    let exec = exec_img.paths.iter().filter_map(|p| exec_end(c, p)).collect();
    let outcomes = legal
        .iter()
        .filter_map(|v| c.legal.finals.get(v).map(|o| (v.clone(), *o)))
        .collect();
    Ok(ContractStateReport {
        contract: contract.to_string(),
        legal,
        exec,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternReport {
    /// Ledger indices of each `first` record and the `then` record it pairs with.
    pub occurrences: Vec<(u64, u64)>,
    /// The pattern occurs again after its first occurrence.
    pub repeated: bool,
}

fn occurs(first: &Transfer, then: &Transfer, i: usize, j: usize) -> Formula {
    Formula::modal(
        Modal::SomePast,
        Formula::and(
            Formula::atom(Atom::AppAt(then.name(), j + 1)),
            Formula::modal(Modal::SomePast, Formula::atom(Atom::AppAt(first.name(), i + 1))),
        ),
    )
}

/// Finds non-overlapping occurrences of `first` followed later by `then`:
/// each `then` pairs with the latest `first` since the previous pair.
/// Every pair is confirmed by evaluating the matching past formula.
pub fn audit_pattern(
    l: &LedgerState,
    registry: &ContractRegistry,
    first: &Transfer,
    then: &Transfer,
) -> Result<PatternReport, QueryError> {
    let mut candidates = Vec::new();
    let mut pending: Option<usize> = None;
    for (pos, r) in l.records().enumerate() {
        if r.transfer == *then {
            if let Some(i) = pending.take() {
                candidates.push((i, pos));
            }
        } else if r.transfer == *first {
            pending = Some(pos);
        }
    }
    let model = ledger_model(l, registry, 0, Gate::ContractGated);
    let mut ev = Evaluator::new(&model);
    let mut occurrences = Vec::new();
    for &(i, j) in &candidates {
        if ev.eval(&occurs(first, then, i, j), &prefix_path(l, j + 1))? {
            occurrences.push((i, j));
        }
    }
    let repeated = match occurrences.as_slice() {
        [(i, j), (i2, j2), ..] => {
            let again = Formula::modal(Modal::SomeFuture, occurs(first, then, *i2, *j2));
            ev.eval(
                &Formula::and(occurs(first, then, *i, *j), again),
                &prefix_path(l, j + 1),
            )?
        }
        _ => false,
    };
    Ok(PatternReport {
        occurrences: occurrences.into_iter().map(|(i, j)| (i as u64, j as u64)).collect(),
        repeated,
    })
}
