//! Python bindings: contracts from JSON specs, ledgers, safety checks and queries.

use contract_ledger::automata::Contract;
use contract_ledger::ledger::{AppendMode, ChainVerdict, ContractRegistry, LedgerState, RecordMeta, SafetyLevel};
use contract_ledger::model::Transfer;
use contract_ledger::occurrence::{occurring_map, View};
use contract_ledger::query::parser::Directives;
use contract_ledger::query::run::{audit_pattern, contract_state, run_query_text};
use contract_ledger::query::spec::ContractSpecDocument;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(contract_ledger_py, LedgerError, PyException);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ledger_err(e: impl ToString) -> PyErr {
    LedgerError::new_err(e.to_string())
}

#[pyclass(name = "Contract", module = "contract_ledger_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyContract {
    inner: Contract,
}

#[pymethods]
impl PyContract {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = ContractSpecDocument::from_json(text).map_err(value_err)?;
        let inner = doc.to_contract().map_err(value_err)?;
        Ok(PyContract { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    fn legal_states(&self) -> Vec<String> {
        self.inner.legal.states.iter().cloned().collect()
    }

    /// One line per state and edge of the execution automaton.
    fn describe_exec(&self) -> String {
        self.inner.exec.describe()
    }

    fn __repr__(&self) -> String {
        format!("Contract({:?})", self.inner.id)
    }
}

fn safety_level(property: &str, resource: Option<&str>) -> PyResult<SafetyLevel> {
    match (property, resource) {
        ("resource", Some(r)) => Ok(SafetyLevel::Resource(r.into())),
        ("resource", None) => Err(value_err("the resource property needs a resource")),
        ("wallet", _) => Ok(SafetyLevel::Wallet),
        ("bundle", _) => Ok(SafetyLevel::Bundle),
        ("contract", _) => Ok(SafetyLevel::Contract),
        (other, _) => Err(value_err(format!("unknown property {other}"))),
    }
}

/// Reached state, then useful, useless and pending positions.
type OccurrenceTuple = (String, Vec<usize>, Vec<usize>, Vec<usize>);

#[pyclass(name = "Ledger", module = "contract_ledger_py")]
pub struct PyLedger {
    state: LedgerState,
    registry: ContractRegistry,
}

impl PyLedger {
    fn contract(&self, id: &str) -> PyResult<&Contract> {
        self.registry
            .get(id)
            .ok_or_else(|| value_err(format!("unknown contract {id}")))
    }
}

#[pymethods]
impl PyLedger {
    #[new]
    #[pyo3(signature = (contracts = Vec::new()))]
    fn new(contracts: Vec<PyContract>) -> Self {
        PyLedger {
            state: LedgerState::new(),
            registry: contracts.into_iter().map(|c| c.inner).collect(),
        }
    }

    /// Parses ledger text. The chain is not verified; call `verify`.
    #[staticmethod]
    #[pyo3(signature = (text, contracts = Vec::new()))]
    fn from_text(text: &str, contracts: Vec<PyContract>) -> PyResult<Self> {
        Ok(PyLedger {
            state: LedgerState::from_text(text).map_err(ledger_err)?,
            registry: contracts.into_iter().map(|c| c.inner).collect(),
        })
    }

    fn register(&mut self, contract: PyContract) {
        self.registry.register(contract.inner);
    }

    /// Appends one record and returns its index.
    #[pyo3(signature = (contract, resource, sender, receiver, validator = "python", timestamp = None, strict = true))]
    #[allow(clippy::too_many_arguments)]
    fn append(
        &mut self,
        contract: &str,
        resource: &str,
        sender: &str,
        receiver: &str,
        validator: &str,
        timestamp: Option<&str>,
        strict: bool,
    ) -> PyResult<usize> {
        let meta = match timestamp {
            Some(ts) => RecordMeta::parse(ts, validator).map_err(value_err)?,
            None => RecordMeta::now(validator),
        };
        let mode = if strict {
            AppendMode::Strict
        } else {
            AppendMode::Permissive
        };
        let t = Transfer::new(resource, sender, receiver);
        self.state = self
            .state
            .append(&self.registry, contract, t, meta, mode)
            .map_err(ledger_err)?;
        Ok(self.state.len() - 1)
    }

    /// `None` for a sound chain, otherwise the first index that fails.
    fn verify(&self) -> Option<u64> {
        match self.state.verify_chain() {
            ChainVerdict::Ok => None,
            ChainVerdict::BrokenAt(i) => Some(i),
        }
    }

    /// Returns `(safe, witness)`; `witness` describes the first violation.
    #[pyo3(signature = (contract, property, resource = None))]
    fn check(&self, contract: &str, property: &str, resource: Option<&str>) -> PyResult<(bool, Option<String>)> {
        let level = safety_level(property, resource)?;
        let report = self.state.check_safety(self.contract(contract)?, &level);
        Ok((report.is_safe(), report.witness.map(|w| w.to_string())))
    }

    /// Evaluates a query and returns `(verdict, truncated_at_horizon)`.
    #[pyo3(signature = (text, at = None, horizon = None))]
    fn query(&self, text: &str, at: Option<usize>, horizon: Option<usize>) -> PyResult<(bool, bool)> {
        let defaults = Directives {
            at,
            horizon,
            ..Directives::default()
        };
        let r = run_query_text(&self.state, &self.registry, text, defaults).map_err(value_err)?;
        Ok((r.verdict, r.truncated))
    }

    /// Legal and execution states of a contract after `at` records.
    #[pyo3(signature = (contract, at = None))]
    fn contract_state(&self, contract: &str, at: Option<usize>) -> PyResult<(Vec<String>, Vec<String>)> {
        let n = self.state.len();
        let r = contract_state(&self.state, &self.registry, contract, n, at.unwrap_or(n)).map_err(value_err)?;
        Ok((
            r.legal.into_iter().collect(),
            r.exec.iter().map(ToString::to_string).collect(),
        ))
    }

    /// Positions of the contract's records that advance it, that are
    /// stranded, and that wait on an open bundle.
    fn occurrence(&self, contract: &str) -> PyResult<OccurrenceTuple> {
        let r = occurring_map(&self.state, &self.registry, contract, View::Exec).map_err(value_err)?;
        Ok((
            r.reached.to_string(),
            r.useful.into_iter().collect(),
            r.useless.into_iter().collect(),
            r.pending.into_iter().collect(),
        ))
    }

    /// Index pairs where `first` is later followed by `then`, both given as `(r,from,to)`.
    fn audit(&self, first: &str, then: &str) -> PyResult<Vec<(u64, u64)>> {
        let first = Transfer::parse_name(first).map_err(value_err)?;
        let then = Transfer::parse_name(then).map_err(value_err)?;
        let r = audit_pattern(&self.state, &self.registry, &first, &then).map_err(value_err)?;
        Ok(r.occurrences)
    }

    fn to_text(&self) -> String {
        self.state.to_text()
    }

    fn __len__(&self) -> usize {
        self.state.len()
    }
}

#[pymodule]
pub fn contract_ledger_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyContract>()?;
    m.add_class::<PyLedger>()?;
    m.add("LedgerError", m.py().get_type::<LedgerError>())?;
    Ok(())
}
