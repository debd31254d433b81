use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{validate_transfer, Bundle, EventSet, StateOfAffairs, Transfer};

use super::AutomatonError;

pub type StateId = String;
pub type ActionId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Honoured,
    Breach,
}

impl Outcome {
    pub fn code(self) -> &'static str {
        match self {
            Outcome::Honoured => "HON",
            Outcome::Breach => "BRC",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub source: StateId,
    pub target: StateId,
    pub actions: BTreeSet<ActionId>,
}

/// A contract as a finite state machine whose transitions fire once every
/// action of their label set has been discharged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegalAutomaton {
    pub states: BTreeSet<StateId>,
    pub initial: StateId,
    pub transitions: Vec<Transition>,
    pub finals: BTreeMap<StateId, Outcome>,
    pub actions: BTreeSet<ActionId>,
    pub timeouts: BTreeSet<ActionId>,
    pub rho: BTreeMap<ActionId, Transfer>,
    pub events: EventSet,
    pub initial_soa: StateOfAffairs,
}

impl LegalAutomaton {
    /// Indices of the transitions leaving `v`, in declaration order.
    pub fn outgoing(&self, v: &str) -> Vec<usize> {
        self.transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.source == v)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn transition(&self, id: &str) -> Option<(usize, &Transition)> {
        self.transitions.iter().enumerate().find(|(_, t)| t.id == id)
    }

    /// `U(v)`: every action labelling some transition out of `v`.
    pub fn interleaving_actions(&self, v: &str) -> BTreeSet<ActionId> {
        self.outgoing(v)
            .into_iter()
            .flat_map(|i| self.transitions[i].actions.iter().cloned())
            .collect()
    }

    /// The transitions out of `v` whose whole action set lies inside `done`.
    pub fn completed_by(&self, v: &str, done: &BTreeSet<ActionId>) -> Vec<usize> {
        self.outgoing(v)
            .into_iter()
            .filter(|&i| self.transitions[i].actions.is_subset(done))
            .collect()
    }

    /// `β(η) = {ρ(a) | a ∈ λ(η)}`.
    pub fn bundle(&self, transition: usize) -> Result<Bundle, AutomatonError> {
        let t = &self.transitions[transition];
        let mut members = Vec::with_capacity(t.actions.len());
        for a in &t.actions {
            members.push(
                self.rho
                    .get(a)
                    .cloned()
                    .ok_or_else(|| AutomatonError::InconsistentRho {
                        action: a.clone(),
                        reason: "no transfer assigned".into(),
                    })?,
            );
        }
        Bundle::new(members).map_err(|e| AutomatonError::InconsistentRho {
            action: t.id.clone(),
            reason: e.to_string(),
        })
    }

    /// The action whose transfer is `t`, if any.
    pub fn action_of(&self, t: &Transfer) -> Option<&ActionId> {
        self.rho.iter().find(|(_, x)| *x == t).map(|(a, _)| a)
    }

    pub fn is_final(&self, v: &str) -> bool {
        self.finals.contains_key(v)
    }

    /// Checks every structural invariant and reports all violations found.
    pub fn validate(&self) -> Result<(), Vec<AutomatonError>> {
        let mut errors = Vec::new();

        if !self.states.contains(&self.initial) {
            errors.push(AutomatonError::UnknownState(self.initial.clone()));
        }
        for v in self.finals.keys() {
            if !self.states.contains(v) {
                errors.push(AutomatonError::UnknownState(v.clone()));
            }
        }
        let mut ids = BTreeSet::new();
        for t in &self.transitions {
            if !ids.insert(t.id.as_str()) {
                errors.push(AutomatonError::DuplicateTransition(t.id.clone()));
            }
            for end in [&t.source, &t.target] {
                if !self.states.contains(end) {
                    errors.push(AutomatonError::UnknownState(end.clone()));
                }
            }
            if t.actions.is_empty() {
                errors.push(AutomatonError::EmptyActionSet(t.id.clone()));
            }
            for a in &t.actions {
                if !self.actions.contains(a) {
                    errors.push(AutomatonError::UnknownAction(a.clone()));
                }
                if self.timeouts.contains(a) && t.actions.len() != 1 {
                    errors.push(AutomatonError::TimeoutNotSingleton(t.id.clone()));
                }
            }
        }
        for a in &self.timeouts {
            if !self.actions.contains(a) {
                errors.push(AutomatonError::UnknownAction(a.clone()));
            }
        }
        if !errors.is_empty() {
            errors.dedup();
            return Err(errors);
        }

        // strong determinism
        for (i, a) in self.transitions.iter().enumerate() {
            for b in &self.transitions[i + 1..] {
                if a.source == b.source && (a.actions.is_subset(&b.actions) || b.actions.is_subset(&a.actions)) {
                    errors.push(AutomatonError::NonDeterministic(a.id.clone(), b.id.clone()));
                }
            }
        }

        for v in self.finals.keys() {
            if let Some(&i) = self.outgoing(v).first() {
                errors.push(AutomatonError::FinalHasOutgoing {
                    state: v.clone(),
                    transition: self.transitions[i].id.clone(),
                });
            }
        }
        for v in &self.states {
            if *v != self.initial && !self.finals.contains_key(v) && !self.transitions.iter().any(|t| t.target == *v) {
                errors.push(AutomatonError::Orphan(v.clone()));
            }
        }

        if let Some(cycle) = self.find_cycle() {
            errors.push(AutomatonError::Cyclic(cycle));
        }

        self.check_rho(&mut errors);

        if errors.is_empty() {
            self.check_completion(&mut errors);
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    fn check_rho(&self, errors: &mut Vec<AutomatonError>) {
        let used: BTreeSet<&ActionId> = self.transitions.iter().flat_map(|t| &t.actions).collect();
        let mut seen: BTreeMap<&Transfer, &ActionId> = BTreeMap::new();
        for a in used {
            let Some(t) = self.rho.get(a) else {
                errors.push(AutomatonError::InconsistentRho {
                    action: a.clone(),
                    reason: "no transfer assigned".into(),
                });
                continue;
            };
            if let Err(e) = validate_transfer(t, &self.events) {
                errors.push(AutomatonError::InconsistentRho {
                    action: a.clone(),
                    reason: e.to_string(),
                });
            }
            if self.initial_soa.holder(&t.resource).is_none() {
                errors.push(AutomatonError::InconsistentRho {
                    action: a.clone(),
                    reason: format!("resource {} is not declared", t.resource),
                });
            }
            if let Some(other) = seen.insert(t, a) {
                errors.push(AutomatonError::InconsistentRho {
                    action: a.clone(),
                    reason: format!("shares transfer {t} with action {other}"),
                });
            }
        }
        for i in 0..self.transitions.len() {
            if let Err(e) = self.bundle(i) {
                errors.push(e);
            }
        }
    }

    /// Every reachable progress set `X` at `v` (no outgoing set inside `X`)
    /// and every further action `a` may complete at most one outgoing set.
    fn check_completion(&self, errors: &mut Vec<AutomatonError>) {
        for v in &self.states {
            let universe: Vec<ActionId> = self.interleaving_actions(v).into_iter().collect();
            if universe.len() > super::exec::MAX_INTERLEAVED_ACTIONS {
                errors.push(AutomatonError::TooManyInterleavings {
                    state: v.clone(),
                    actions: universe.len(),
                });
                continue;
            }
            for mask in 0u64..(1u64 << universe.len()) {
                let done: BTreeSet<ActionId> = subset(&universe, mask);
                if !self.completed_by(v, &done).is_empty() {
                    continue;
                }
                for a in universe.iter().filter(|a| !done.contains(*a)) {
                    let mut next = done.clone();
                    next.insert(a.clone());
                    if self.completed_by(v, &next).len() > 1 {
                        errors.push(AutomatonError::AmbiguousCompletion {
                            state: v.clone(),
                            progress: done.clone(),
                            action: a.clone(),
                        });
                    }
                }
            }
        }
    }

    fn find_cycle(&self) -> Option<Vec<StateId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        fn visit<'a>(
            a: &'a LegalAutomaton,
            v: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<StateId>> {
            marks.insert(v, Mark::Active);
            stack.push(v);
            for i in a.outgoing(v) {
                let w = a.transitions[i].target.as_str();
                match marks.get(w).copied().unwrap_or(Mark::New) {
                    Mark::Active => {
                        let start = stack.iter().position(|s| *s == w).unwrap_or(0);
                        let mut cycle: Vec<StateId> = stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(w.to_string());
                        return Some(cycle);
                    }
                    Mark::New => {
                        if let Some(c) = visit(a, w, marks, stack) {
                            return Some(c);
                        }
                    }
                    Mark::Done => {}
                }
            }
            stack.pop();
            marks.insert(v, Mark::Done);
            None
        }
        let mut marks = BTreeMap::new();
        for v in &self.states {
            if marks.get(v.as_str()).copied().unwrap_or(Mark::New) == Mark::New {
                if let Some(c) = visit(self, v, &mut marks, &mut Vec::new()) {
                    return Some(c);
                }
            }
        }
        None
    }
}

pub(crate) fn subset(items: &[ActionId], mask: u64) -> BTreeSet<ActionId> {
    items
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, a)| a.clone())
        .collect()
}
