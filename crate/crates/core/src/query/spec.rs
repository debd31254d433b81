//! JSON contract spec documents.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{AutomatonError, Contract, LegalAutomaton, Outcome, Transition};
use crate::model::{ActorId, Allocation, EventSet, ModelError, ResourceId, StateOfAffairs, Transfer};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed contract spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read contract spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("identifier {0} is both an actor and a resource")]
    ActorResourceClash(String),
    #[error("undeclared actor {0}")]
    UnknownActor(String),
    #[error("undeclared resource {0}")]
    UnknownResource(String),
    #[error("unknown outcome {0:?}; expected HON or BRC")]
    BadOutcome(String),
    #[error("contract fails validation: {}", render(.0))]
    Invalid(Vec<AutomatonError>),
}

fn render(errs: &[AutomatonError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDoc {
    pub resource: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from: String,
    pub to: String,
    pub actions: Vec<String>,
}

/// The serialized form of a contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSpecDocument {
    pub id: String,
    pub resources: Vec<String>,
    #[serde(default)]
    pub events: Vec<String>,
    pub actors: Vec<String>,
    pub actions: BTreeMap<String, ActionDoc>,
    pub states: Vec<String>,
    pub initial: String,
    pub finals: BTreeMap<String, String>,
    pub transitions: Vec<TransitionDoc>,
    #[serde(default)]
    pub timeouts: Vec<String>,
    #[serde(default)]
    pub initial_allocations: BTreeMap<String, String>,
}

impl ContractSpecDocument {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec documents always serialize")
    }

    fn actor(&self, name: &str, actors: &BTreeSet<&str>) -> Result<ActorId, SpecError> {
        let a: ActorId = name.parse()?;
        match &a {
            ActorId::Proper(n) if !actors.contains(n.as_str()) => Err(SpecError::UnknownActor(n.clone())),
            _ => Ok(a),
        }
    }

    /// Builds and validates the contract.
    pub fn to_contract(&self) -> Result<Contract, SpecError> {
        let actors: BTreeSet<&str> = self.actors.iter().map(String::as_str).collect();
        let mut resources = BTreeSet::new();
        for r in &self.resources {
            if actors.contains(r.as_str()) {
                return Err(SpecError::ActorResourceClash(r.clone()));
            }
            resources.insert(ResourceId::new(r.as_str())?);
        }
        let mut events = Vec::new();
        for e in &self.events {
            let id = ResourceId::new(e.as_str())?;
            if !resources.contains(&id) {
                return Err(SpecError::UnknownResource(e.clone()));
            }
            events.push(id);
        }
        let events = EventSet::new(events);

        let mut rho = BTreeMap::new();
        for (name, a) in &self.actions {
            let resource = ResourceId::new(a.resource.as_str())?;
            if !resources.contains(&resource) {
                return Err(SpecError::UnknownResource(a.resource.clone()));
            }
            let t = Transfer {
                resource,
                from: self.actor(&a.from, &actors)?,
                to: self.actor(&a.to, &actors)?,
            };
            rho.insert(name.clone(), t);
        }

        let mut allocations = Vec::new();
        for (r, k) in &self.initial_allocations {
            allocations.push(Allocation {
                resource: ResourceId::new(r.as_str())?,
                holder: self.actor(k, &actors)?,
            });
        }
        let initial_soa = StateOfAffairs::new(&resources, &events, allocations)?;

        let mut finals = BTreeMap::new();
        for (v, o) in &self.finals {
            let outcome = match o.as_str() {
                "HON" => Outcome::Honoured,
                "BRC" => Outcome::Breach,
                other => return Err(SpecError::BadOutcome(other.to_string())),
            };
            finals.insert(v.clone(), outcome);
        }

        let transitions = self
            .transitions
            .iter()
            .map(|t| Transition {
                id: t.id.clone().unwrap_or_else(|| format!("{}->{}", t.from, t.to)),
                source: t.from.clone(),
                target: t.to.clone(),
                actions: t.actions.iter().cloned().collect(),
            })
            .collect();

        let legal = LegalAutomaton {
            states: self.states.iter().cloned().collect(),
            initial: self.initial.clone(),
            transitions,
            finals,
            actions: self.actions.keys().cloned().collect(),
            timeouts: self.timeouts.iter().cloned().collect(),
            rho,
            events,
            initial_soa,
        };
        Contract::new(self.id.clone(), legal).map_err(SpecError::Invalid)
    }
}
