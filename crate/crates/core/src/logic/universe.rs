//! Prefix-closed universes of paths: explicit finite trees and the bounded
//! tree of possible ledger states grown from a recorded trace.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use super::maps::parse_transfers;
use super::Path;
use crate::automata::Contract;
use crate::ledger::{ContractRegistry, LedgerState};
use crate::model::{validate_transfer, ActorId, EventSet, ResourceId, Transfer};
use crate::occurrence::{occurring_map_transfers, relevant_transfers, View};

/// Which tree of a model a path lives in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UniverseRef {
    /// The ledger universe, or the explicit tree a model was built from.
    Primary,
    /// Initial bundle labelings of a contract.
    Bundles(String),
    /// Initial transfer labelings of a contract.
    Transfers(String),
}

impl fmt::Display for UniverseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UniverseRef::Primary => f.write_str("ledger"),
            UniverseRef::Bundles(c) => write!(f, "bundle-labelings:{c}"),
            UniverseRef::Transfers(c) => write!(f, "transfer-labelings:{c}"),
        }
    }
}

/// A finite prefix-closed set of paths.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExplicitTree {
    paths: BTreeSet<Path>,
    children: BTreeMap<Path, Vec<Path>>,
    established: Path,
    initial_holders: BTreeMap<ResourceId, ActorId>,
}

impl ExplicitTree {
    /// The prefix closure of `paths`; always contains the empty path.
    pub fn new(paths: impl IntoIterator<Item = Path>) -> Self {
        let mut all = BTreeSet::from([Vec::new()]);
        for p in paths {
            for k in 1..=p.len() {
                all.insert(p[..k].to_vec());
            }
        }
        let mut children: BTreeMap<Path, Vec<Path>> = BTreeMap::new();
        for p in all.iter().filter(|p| !p.is_empty()) {
            children.entry(p[..p.len() - 1].to_vec()).or_default().push(p.clone());
        }
        ExplicitTree {
            paths: all,
            children,
            established: Vec::new(),
            initial_holders: BTreeMap::new(),
        }
    }

    /// Every word over `alphabet` of length at most `max_len`.
    pub fn all_words(alphabet: &[&str], max_len: usize) -> Self {
        let mut layer: Vec<Path> = vec![Vec::new()];
        let mut all = layer.clone();
        for _ in 0..max_len {
            layer = layer
                .iter()
                .flat_map(|p| {
                    alphabet.iter().map(move |a| {
                        let mut q = p.clone();
                        q.push(a.to_string());
                        q
                    })
                })
                .collect();
            all.extend(layer.iter().cloned());
        }
        ExplicitTree::new(all)
    }

    /// Marks a recorded trace for the evolution atoms; its prefixes are added.
    pub fn with_established(mut self, trace: Path) -> Self {
        let mut paths: Vec<Path> = self.paths.iter().cloned().collect();
        paths.push(trace.clone());
        let holders = std::mem::take(&mut self.initial_holders);
        let mut t = ExplicitTree::new(paths);
        t.established = trace;
        t.initial_holders = holders;
        t
    }

    pub fn with_initial_holders(mut self, holders: BTreeMap<ResourceId, ActorId>) -> Self {
        self.initial_holders = holders;
        self
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.paths.iter()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gate {
    /// Any valid transfer whose source currently holds the resource.
    ResourceSafe,
    /// Additionally, the transfer must advance some contract's execution.
    #[default]
    ContractGated,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gate::ResourceSafe => "resource",
            Gate::ContractGated => "contract",
        })
    }
}

/// Every prefix of the recorded trace, each prolonged by up to `horizon`
/// gated transfers.
pub struct LedgerUniverse {
    trace: Path,
    contracts: Vec<Contract>,
    horizon: usize,
    gate: Gate,
    alphabet: Vec<Transfer>,
    events: EventSet,
    initial_holders: BTreeMap<ResourceId, ActorId>,
    candidates: Mutex<HashMap<Path, Arc<Vec<Transfer>>>>,
}

impl fmt::Debug for LedgerUniverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LedgerUniverse")
            .field("trace", &self.trace)
            .field("horizon", &self.horizon)
            .field("gate", &self.gate)
            .finish_non_exhaustive()
    }
}

impl Clone for LedgerUniverse {
    fn clone(&self) -> Self {
        LedgerUniverse {
            trace: self.trace.clone(),
            contracts: self.contracts.clone(),
            horizon: self.horizon,
            gate: self.gate,
            alphabet: self.alphabet.clone(),
            events: self.events.clone(),
            initial_holders: self.initial_holders.clone(),
            candidates: Mutex::default(),
        }
    }
}

impl LedgerUniverse {
    pub fn new(trace: Vec<Transfer>, contracts: Vec<Contract>, horizon: usize, gate: Gate) -> Self {
        let mut alphabet: BTreeSet<Transfer> = contracts.iter().flat_map(|c| c.legal.rho.values().cloned()).collect();
        alphabet.extend(trace.iter().cloned());
        let events = EventSet::new(contracts.iter().flat_map(|c| c.legal.events.iter().cloned()));
        let mut initial_holders = BTreeMap::new();
        for c in &contracts {
            for a in c.legal.initial_soa.allocations() {
                if a.holder != ActorId::Top {
                    initial_holders.insert(a.resource, a.holder);
                }
            }
        }
        LedgerUniverse {
            trace: trace.iter().map(Transfer::name).collect(),
            contracts,
            horizon,
            gate,
            alphabet: alphabet.into_iter().collect(),
            events,
            initial_holders,
            candidates: Mutex::default(),
        }
    }

    pub fn from_ledger(l: &LedgerState, registry: &ContractRegistry, horizon: usize, gate: Gate) -> Self {
        Self::new(l.transfers(), registry.iter().cloned().collect(), horizon, gate)
    }

    /// Adds transfers the resource-safe gate may use beyond the contracts'
    /// actions and the recorded ones.
    pub fn with_extra_alphabet(mut self, extra: impl IntoIterator<Item = Transfer>) -> Self {
        let mut set: BTreeSet<Transfer> = self.alphabet.into_iter().collect();
        set.extend(extra);
        self.alphabet = set.into_iter().collect();
        self.candidates = Mutex::default();
        self
    }

    pub fn trace(&self) -> &Path {
        &self.trace
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gate(&self) -> Gate {
        self.gate
    }

    pub fn contracts(&self) -> &[Contract] {
        &self.contracts
    }

    /// Length of the common prefix with the trace, and the length beyond it.
    fn branch(&self, p: &[String]) -> (usize, usize) {
        let k = p.iter().zip(&self.trace).take_while(|(a, b)| a == b).count();
        (k, p.len() - k)
    }

    fn holders_after(&self, transfers: &[Transfer]) -> BTreeMap<ResourceId, ActorId> {
        let mut h = self.initial_holders.clone();
        for t in transfers {
            h.insert(t.resource.clone(), t.to.clone());
        }
        h
    }

    /// Transfers the gate admits right after `p`, sorted by name.
    fn gated(&self, p: &[String]) -> Arc<Vec<Transfer>> {
        if let Some(hit) = self.candidates.lock().expect("cache lock").get(p) {
            return hit.clone();
        }
        let transfers = parse_transfers(p);
        let holders = self.holders_after(&transfers);
        let admissible = |t: &Transfer| {
            validate_transfer(t, &self.events).is_ok() && holders.get(&t.resource).unwrap_or(&ActorId::Top) == &t.from
        };
        let mut out: Vec<Transfer> = match self.gate {
            Gate::ResourceSafe => self.alphabet.iter().filter(|t| admissible(t)).cloned().collect(),
            Gate::ContractGated => {
                let mut set = BTreeSet::new();
                for c in &self.contracts {
                    let state = occurring_map_transfers(c, &relevant_transfers(c, &transfers), View::Exec).reached;
                    for &e in c.exec.outgoing(&state) {
                        let t = c.rho(&c.exec.transitions[e].action);
                        if admissible(t) {
                            set.insert(t.clone());
                        }
                    }
                }
                set.into_iter().collect()
            }
        };
        out.sort_by_key(Transfer::name);
        let out = Arc::new(out);
        self.candidates
            .lock()
            .expect("cache lock")
            .insert(p.to_vec(), out.clone());
        out
    }

    pub fn contains(&self, p: &[String]) -> bool {
        let (k, extra) = self.branch(p);
        if extra == 0 {
            return true;
        }
        if extra > self.horizon {
            return false;
        }
        (k..p.len()).all(|i| self.gated(&p[..i]).iter().any(|t| t.name() == p[i]))
    }

    pub fn children(&self, p: &[String]) -> Vec<Path> {
        let (k, extra) = self.branch(p);
        let mut out = Vec::new();
        let recorded = (extra == 0 && k < self.trace.len()).then(|| &self.trace[k]);
        if let Some(next) = recorded {
            out.push(extend(p, next.clone()));
        }
        if extra < self.horizon {
            for t in self.gated(p).iter() {
                let name = t.name();
                if Some(&name) != recorded {
                    out.push(extend(p, name));
                }
            }
        }
        out
    }

    /// At the horizon, with gated continuations that were cut off.
    pub fn is_truncated(&self, p: &[String]) -> bool {
        let (k, extra) = self.branch(p);
        if extra < self.horizon {
            return false;
        }
        let recorded = (extra == 0 && k < self.trace.len()).then(|| self.trace[k].clone());
        self.gated(p).iter().any(|t| Some(t.name()) != recorded)
    }
}

fn extend(p: &[String], s: String) -> Path {
    let mut q = p.to_vec();
    q.push(s);
    q
}

#[derive(Debug, Clone)]
pub enum Universe {
    Tree(ExplicitTree),
    Ledger(LedgerUniverse),
}

impl Universe {
    pub fn contains(&self, p: &[String]) -> bool {
        match self {
            Universe::Tree(t) => t.paths.contains(p),
            Universe::Ledger(l) => l.contains(p),
        }
    }

    pub fn children(&self, p: &[String]) -> Vec<Path> {
        match self {
            Universe::Tree(t) => t.children.get(p).cloned().unwrap_or_default(),
            Universe::Ledger(l) => l.children(p),
        }
    }

    pub fn is_truncated(&self, p: &[String]) -> bool {
        match self {
            Universe::Tree(_) => false,
            Universe::Ledger(l) => l.is_truncated(p),
        }
    }

    /// The recorded trace that the evolution atoms refer to.
    pub fn established(&self) -> &Path {
        match self {
            Universe::Tree(t) => &t.established,
            Universe::Ledger(l) => &l.trace,
        }
    }

    pub fn initial_holder(&self, r: &ResourceId) -> ActorId {
        let holders = match self {
            Universe::Tree(t) => &t.initial_holders,
            Universe::Ledger(l) => &l.initial_holders,
        };
        holders.get(r).cloned().unwrap_or(ActorId::Top)
    }

    /// Every path of length at most `depth`, in depth-first order.
    pub fn enumerate(&self, depth: usize) -> Vec<Path> {
        let mut out = Vec::new();
        let mut stack = vec![Vec::new()];
        while let Some(p) = stack.pop() {
            if p.len() < depth {
                let mut kids = self.children(&p);
                kids.reverse();
                stack.extend(kids);
            }
            out.push(p);
        }
        out
    }

    /// A depth beyond which the universe has no paths.
    pub fn max_depth(&self) -> usize {
        match self {
            Universe::Tree(t) => t.paths.iter().map(Vec::len).max().unwrap_or(0),
            Universe::Ledger(l) => l.trace.len() + l.horizon,
        }
    }
}
