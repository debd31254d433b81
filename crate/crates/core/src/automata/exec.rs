//! The execution automaton: one transition per single action, with
//! intermediate "progress" states recording which actions out of a legal
//! state have already been performed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::legal::{subset, ActionId, LegalAutomaton, StateId};
use super::AutomatonError;

/// Upper bound on `|U(v)|`; the construction enumerates `2^|U(v)|` subsets.
pub const MAX_INTERLEAVED_ACTIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExecState {
    Legal(StateId),
    Progress { base: StateId, done: BTreeSet<ActionId> },
}

impl ExecState {
    pub fn base(&self) -> &str {
        match self {
            ExecState::Legal(v) => v,
            ExecState::Progress { base, .. } => base,
        }
    }

    pub fn done(&self) -> BTreeSet<ActionId> {
        match self {
            ExecState::Legal(_) => BTreeSet::new(),
            ExecState::Progress { done, .. } => done.clone(),
        }
    }

    pub fn is_legal(&self) -> bool {
        matches!(self, ExecState::Legal(_))
    }

    fn at(base: &str, done: BTreeSet<ActionId>) -> Self {
        if done.is_empty() {
            ExecState::Legal(base.to_string())
        } else {
            ExecState::Progress {
                base: base.to_string(),
                done,
            }
        }
    }
}

impl fmt::Display for ExecState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecState::Legal(v) => f.write_str(v),
            ExecState::Progress { base, done } => {
                let names: Vec<&str> = done.iter().map(String::as_str).collect();
                write!(f, "{}/{{{}}}", base, names.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecTransition {
    pub source: ExecState,
    pub target: ExecState,
    pub action: ActionId,
    /// The legal transition this step completes, when it lands on a legal state.
    pub completes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecAutomaton {
    pub initial: ExecState,
    pub states: BTreeSet<ExecState>,
    pub transitions: Vec<ExecTransition>,
    outgoing: BTreeMap<ExecState, Vec<usize>>,
}

impl ExecAutomaton {
    /// Builds the execution automaton of a legal automaton. The input is
    /// validated first, which guarantees each step completes at most one set.
    pub fn derive(legal: &LegalAutomaton) -> Result<Self, Vec<AutomatonError>> {
        legal.validate()?;
        let mut states: BTreeSet<ExecState> = legal.states.iter().map(|v| ExecState::Legal(v.clone())).collect();
        let mut transitions = Vec::new();

        for v in &legal.states {
            let universe: Vec<ActionId> = legal.interleaving_actions(v).into_iter().collect();
            for mask in 0u64..(1u64 << universe.len()) {
                let done = subset(&universe, mask);
                if !legal.completed_by(v, &done).is_empty() {
                    continue;
                }
                let source = ExecState::at(v, done.clone());
                states.insert(source.clone());
                for a in universe.iter().filter(|a| !done.contains(*a)) {
                    let mut next = done.clone();
                    next.insert(a.clone());
                    let completed = legal.completed_by(v, &next);
                    let (target, completes) = match completed.as_slice() {
                        [] => (ExecState::at(v, next), None),
                        [i] => (ExecState::Legal(legal.transitions[*i].target.clone()), Some(*i)),
                        _ => unreachable!("validated automaton completes at most one set"),
                    };
                    transitions.push(ExecTransition {
                        source: source.clone(),
                        target,
                        action: a.clone(),
                        completes,
                    });
                }
            }
        }

        let mut outgoing: BTreeMap<ExecState, Vec<usize>> = BTreeMap::new();
        for (i, t) in transitions.iter().enumerate() {
            outgoing.entry(t.source.clone()).or_default().push(i);
        }
        Ok(ExecAutomaton {
            initial: ExecState::Legal(legal.initial.clone()),
            states,
            transitions,
            outgoing,
        })
    }

    pub fn outgoing(&self, s: &ExecState) -> &[usize] {
        self.outgoing.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The transition out of `s` labelled `action`, if any (determinism makes it unique).
    pub fn step(&self, s: &ExecState, action: &str) -> Option<usize> {
        self.outgoing(s)
            .iter()
            .copied()
            .find(|&i| self.transitions[i].action == action)
    }

    pub fn progress_states(&self) -> impl Iterator<Item = &ExecState> {
        self.states.iter().filter(|s| !s.is_legal())
    }

    /// One line per state and per transition, sorted; used for golden comparisons.
    pub fn describe(&self) -> String {
        let mut lines: Vec<String> = self.states.iter().map(|s| format!("state {s}")).collect();
        let mut edges: Vec<String> = self
            .transitions
            .iter()
            .map(|t| format!("edge {} --{}--> {}", t.source, t.action, t.target))
            .collect();
        lines.sort();
        edges.sort();
        lines.extend(edges);
        lines.join("\n")
    }
}
