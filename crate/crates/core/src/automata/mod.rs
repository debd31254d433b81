//! Legal and execution contract automata, trajectories and their labelings,
//! and the resource-based reading of a contract (the `γ`, `β`, `ρ` maps).

mod exec;
mod legal;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{ActorId, Bundle, ModelError, ResourceId, StateOfAffairs, Transfer};

pub use exec::{ExecAutomaton, ExecState, ExecTransition, MAX_INTERLEAVED_ACTIONS};
pub use legal::{ActionId, LegalAutomaton, Outcome, StateId, Transition};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
    #[error("duplicate transition id {0}")]
    DuplicateTransition(String),
    #[error("transition {0} has an empty action set")]
    EmptyActionSet(String),
    #[error("transitions {0} and {1} leave the same state with nested action sets")]
    NonDeterministic(String, String),
    #[error("transition {0} mixes a timeout with other actions")]
    TimeoutNotSingleton(String),
    #[error("final state {state} has outgoing transition {transition}")]
    FinalHasOutgoing { state: StateId, transition: String },
    #[error("state {0} is neither initial, final, nor the target of any transition")]
    Orphan(StateId),
    #[error("transition graph has a cycle: {}", .0.join(" -> "))]
    Cyclic(Vec<StateId>),
    #[error("at {state} with progress {progress:?}, action {action} completes several transitions")]
    AmbiguousCompletion {
        state: StateId,
        progress: BTreeSet<ActionId>,
        action: ActionId,
    },
    #[error("inconsistent transfer assignment for {action}: {reason}")]
    InconsistentRho { action: ActionId, reason: String },
    #[error(
        "state {state} interleaves {actions} actions; at most {} are supported",
        MAX_INTERLEAVED_ACTIONS
    )]
    TooManyInterleavings { state: StateId, actions: usize },
    #[error("expected a {expected} trajectory")]
    FlavorMismatch { expected: Flavor },
    #[error("bundle of step {step} is not applicable: {source}")]
    BundleNotApplicable { step: usize, source: Box<ModelError> },
    #[error("not an initial labeling of the contract")]
    NotAnInitialLabeling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flavor {
    Legal,
    Exec,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flavor::Legal => "legal",
            Flavor::Exec => "exec",
        })
    }
}

/// A well-chained sequence of transitions of one automaton. Edges index into
/// `LegalAutomaton::transitions` or `ExecAutomaton::transitions`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trajectory {
    pub flavor: Flavor,
    pub start: ExecState,
    pub edges: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Trajectory) -> bool {
        self.flavor == other.flavor && self.start == other.start && other.edges.starts_with(&self.edges)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BundleLabeling(pub Vec<Bundle>);

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransferLabeling(pub Vec<Transfer>);

impl BundleLabeling {
    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(Bundle::name).collect()
    }

    pub fn is_prefix_of(&self, other: &BundleLabeling) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl TransferLabeling {
    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(Transfer::name).collect()
    }

    pub fn is_prefix_of(&self, other: &TransferLabeling) -> bool {
        other.0.starts_with(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labeling {
    Bundles(BundleLabeling),
    Transfers(TransferLabeling),
}

impl Labeling {
    pub fn names(&self) -> Vec<String> {
        match self {
            Labeling::Bundles(b) => b.names(),
            Labeling::Transfers(t) => t.names(),
        }
    }
}

/// A validated contract: its legal automaton and the derived execution automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub id: String,
    pub legal: LegalAutomaton,
    pub exec: ExecAutomaton,
    pub actors: BTreeSet<ActorId>,
    action_by_transfer: BTreeMap<Transfer, ActionId>,
}

impl Contract {
    pub fn new(id: impl Into<String>, legal: LegalAutomaton) -> Result<Self, Vec<AutomatonError>> {
        let exec = ExecAutomaton::derive(&legal)?;
        let used: BTreeSet<&ActionId> = legal.transitions.iter().flat_map(|t| &t.actions).collect();
        let action_by_transfer = legal
            .rho
            .iter()
            .filter(|(a, _)| used.contains(a))
            .map(|(a, t)| (t.clone(), a.clone()))
            .collect();
        let mut actors: BTreeSet<ActorId> = legal
            .rho
            .values()
            .flat_map(|t| [t.from.clone(), t.to.clone()])
            .collect();
        actors.extend(legal.initial_soa.allocations().map(|a| a.holder));
        actors.insert(ActorId::Top);
        actors.insert(ActorId::Bottom);
        Ok(Contract {
            id: id.into(),
            legal,
            exec,
            actors,
            action_by_transfer,
        })
    }

    pub fn resources(&self) -> BTreeSet<ResourceId> {
        self.legal.initial_soa.resources().cloned().collect()
    }

    pub fn has_resource(&self, r: &ResourceId) -> bool {
        self.legal.initial_soa.holder(r).is_some()
    }

    pub fn initial_holder(&self, r: &ResourceId) -> Option<&ActorId> {
        self.legal.initial_soa.holder(r)
    }

    /// `ρ⁻¹`, restricted to actions that label some transition.
    pub fn action_of(&self, t: &Transfer) -> Option<&ActionId> {
        self.action_by_transfer.get(t)
    }

    /// `TRA_C`: the transfers that discharge some action of the contract.
    pub fn transfers(&self) -> impl Iterator<Item = &Transfer> {
        self.action_by_transfer.keys()
    }

    pub fn bundle(&self, transition: usize) -> Bundle {
        self.legal
            .bundle(transition)
            .expect("validated contract has consistent bundles")
    }

    pub fn rho(&self, action: &str) -> &Transfer {
        &self.legal.rho[action]
    }

    /// Every trajectory starting at `from` (the initial state when `None`),
    /// including the empty one.
    pub fn trajectories(&self, flavor: Flavor, from: Option<&ExecState>) -> Result<Vec<Trajectory>, AutomatonError> {
        let start = match (flavor, from) {
            (Flavor::Legal, None) => ExecState::Legal(self.legal.initial.clone()),
            (Flavor::Exec, None) => self.exec.initial.clone(),
            (Flavor::Legal, Some(s @ ExecState::Legal(v))) if self.legal.states.contains(v) => s.clone(),
            (Flavor::Exec, Some(s)) if self.exec.states.contains(s) => s.clone(),
            (_, Some(s)) => return Err(AutomatonError::UnknownState(s.to_string())),
        };
        let mut out = Vec::new();
        let mut stack = vec![Vec::new()];
        while let Some(edges) = stack.pop() {
            let traj = Trajectory {
                flavor,
                start: start.clone(),
                edges,
            };
            let end = self.end_state(&traj);
            for next in self.successors(flavor, &end) {
                let mut e = traj.edges.clone();
                e.push(next);
                stack.push(e);
            }
            out.push(traj);
        }
        out.sort();
        Ok(out)
    }

    pub fn initial_trajectories(&self, flavor: Flavor) -> Vec<Trajectory> {
        self.trajectories(flavor, None)
            .expect("the initial state always exists")
    }

    fn successors(&self, flavor: Flavor, s: &ExecState) -> Vec<usize> {
        match flavor {
            Flavor::Legal => self.legal.outgoing(s.base()),
            Flavor::Exec => self.exec.outgoing(s).to_vec(),
        }
    }

    pub fn end_state(&self, t: &Trajectory) -> ExecState {
        match (t.flavor, t.edges.last()) {
            (_, None) => t.start.clone(),
            (Flavor::Legal, Some(&e)) => ExecState::Legal(self.legal.transitions[e].target.clone()),
            (Flavor::Exec, Some(&e)) => self.exec.transitions[e].target.clone(),
        }
    }

    pub fn bundle_labeling(&self, t: &Trajectory) -> Result<BundleLabeling, AutomatonError> {
        if t.flavor != Flavor::Legal {
            return Err(AutomatonError::FlavorMismatch {
                expected: Flavor::Legal,
            });
        }
        Ok(BundleLabeling(t.edges.iter().map(|&e| self.bundle(e)).collect()))
    }

    pub fn transfer_labeling(&self, t: &Trajectory) -> Result<TransferLabeling, AutomatonError> {
        if t.flavor != Flavor::Exec {
            return Err(AutomatonError::FlavorMismatch { expected: Flavor::Exec });
        }
        Ok(TransferLabeling(
            t.edges
                .iter()
                .map(|&e| self.rho(&self.exec.transitions[e].action).clone())
                .collect(),
        ))
    }

    pub fn labeling(&self, t: &Trajectory) -> Labeling {
        match t.flavor {
            Flavor::Legal => Labeling::Bundles(self.bundle_labeling(t).expect("flavor checked")),
            Flavor::Exec => Labeling::Transfers(self.transfer_labeling(t).expect("flavor checked")),
        }
    }

    /// `B^{β,in}`: labelings of all initial legal trajectories.
    pub fn initial_bundle_labelings(&self) -> Vec<BundleLabeling> {
        self.initial_trajectories(Flavor::Legal)
            .iter()
            .map(|t| self.bundle_labeling(t).expect("legal"))
            .collect()
    }

    /// `L^{ρ,in}`: labelings of all initial execution trajectories.
    pub fn initial_transfer_labelings(&self) -> Vec<TransferLabeling> {
        let mut out: Vec<TransferLabeling> = self
            .initial_trajectories(Flavor::Exec)
            .iter()
            .map(|t| self.transfer_labeling(t).expect("exec"))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Runs the execution automaton from its initial state. On failure returns
    /// the position of the first transfer it cannot take.
    pub fn run_exec(&self, transfers: &[Transfer]) -> Result<Trajectory, usize> {
        let mut state = self.exec.initial.clone();
        let mut edges = Vec::with_capacity(transfers.len());
        for (i, t) in transfers.iter().enumerate() {
            let action = self.action_of(t).ok_or(i)?;
            let e = self.exec.step(&state, action).ok_or(i)?;
            state = self.exec.transitions[e].target.clone();
            edges.push(e);
        }
        Ok(Trajectory {
            flavor: Flavor::Exec,
            start: self.exec.initial.clone(),
            edges,
        })
    }

    /// The legal trajectory an execution trajectory unfolds: intermediate
    /// states are erased and each completing step becomes its legal edge.
    pub fn fold_exec(&self, t: &Trajectory) -> Result<Trajectory, AutomatonError> {
        if t.flavor != Flavor::Exec {
            return Err(AutomatonError::FlavorMismatch { expected: Flavor::Exec });
        }
        let start = ExecState::Legal(t.start.base().to_string());
        Ok(Trajectory {
            flavor: Flavor::Legal,
            start,
            edges: t
                .edges
                .iter()
                .filter_map(|&e| self.exec.transitions[e].completes)
                .collect(),
        })
    }

    /// The initial legal trajectory whose bundle labeling is `bl`.
    pub fn legal_trajectory_for(&self, bl: &BundleLabeling) -> Option<Trajectory> {
        let mut v = self.legal.initial.clone();
        let mut edges = Vec::new();
        for b in &bl.0 {
            let e = self.legal.outgoing(&v).into_iter().find(|&e| self.bundle(e) == *b)?;
            v = self.legal.transitions[e].target.clone();
            edges.push(e);
        }
        Some(Trajectory {
            flavor: Flavor::Legal,
            start: ExecState::Legal(self.legal.initial.clone()),
            edges,
        })
    }

    /// True iff `tl` flattens `bl` bundle by bundle, each bundle in any order,
    /// and `bl` labels an initial legal trajectory.
    pub fn is_linearisation(&self, tl: &TransferLabeling, bl: &BundleLabeling) -> bool {
        if self.legal_trajectory_for(bl).is_none() {
            return false;
        }
        let mut rest = tl.0.as_slice();
        for b in &bl.0 {
            if rest.len() < b.len() {
                return false;
            }
            let (chunk, tail) = rest.split_at(b.len());
            let chunk_set: BTreeSet<&Transfer> = chunk.iter().collect();
            if chunk_set.len() != b.len() || !chunk.iter().all(|t| b.contains(t)) {
                return false;
            }
            rest = tail;
        }
        rest.is_empty()
    }

    /// `γ` along a legal trajectory: joint application of each edge's bundle
    /// to the initial state of affairs.
    pub fn derive_gamma(&self, t: &Trajectory) -> Result<BTreeSet<StateOfAffairs>, AutomatonError> {
        let bl = self.bundle_labeling(t)?;
        let mut s = self.legal.initial_soa.clone();
        for (step, b) in bl.0.iter().enumerate() {
            s = s
                .apply_bundle(b, &self.legal.events)
                .map_err(|source| AutomatonError::BundleNotApplicable {
                    step,
                    source: Box::new(source),
                })?;
        }
        Ok(BTreeSet::from([s]))
    }

    /// Checks a claimed `γ` entry by containment: the derived state must hold
    /// every listed allocation.
    pub fn gamma_contains(
        &self,
        t: &Trajectory,
        required: &[crate::model::Allocation],
    ) -> Result<bool, AutomatonError> {
        let states = self.derive_gamma(t)?;
        Ok(states.iter().all(|s| required.iter().all(|a| s.contains(a))))
    }

    /// The unique initial legal trajectory ending at `v`, when the automaton is a tree.
    pub fn trajectory_to(&self, v: &str) -> Option<Trajectory> {
        let found: Vec<Trajectory> = self
            .initial_trajectories(Flavor::Legal)
            .into_iter()
            .filter(|t| self.end_state(t).base() == v)
            .collect();
        match found.len() {
            1 => found.into_iter().next(),
            _ => None,
        }
    }
}
