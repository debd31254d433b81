//! Formula evaluation over a model's universes, interpretations as path
//! sets, and the set-level quantifiers along monotone maps.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::maps::{apply_nu, parse_transfers, MapKind, MapRef, MonotoneMap};
use super::universe::{ExplicitTree, Universe, UniverseRef};
use super::{Along, Atom, Formula, LogicError, Modal, Path};
use crate::automata::Contract;
use crate::ledger::ContractRegistry;
use crate::model::ResourceId;
use crate::occurrence::{bundle_complete_transfers, relevant_transfers};

/// A primary universe together with the labeling trees of its contracts.
#[derive(Debug)]
pub struct Model {
    primary: Universe,
    contracts: ContractRegistry,
    bundle_trees: BTreeMap<String, Universe>,
    transfer_trees: BTreeMap<String, Universe>,
}

impl Model {
    pub fn new(primary: Universe, contracts: ContractRegistry) -> Self {
        let mut bundle_trees = BTreeMap::new();
        let mut transfer_trees = BTreeMap::new();
        for c in contracts.iter() {
            let bl = c
                .initial_bundle_labelings()
                .iter()
                .map(|l| l.names())
                .collect::<Vec<_>>();
            let tl = c
                .initial_transfer_labelings()
                .iter()
                .map(|l| l.names())
                .collect::<Vec<_>>();
            bundle_trees.insert(c.id.clone(), Universe::Tree(ExplicitTree::new(bl)));
            transfer_trees.insert(c.id.clone(), Universe::Tree(ExplicitTree::new(tl)));
        }
        Model {
            primary,
            contracts,
            bundle_trees,
            transfer_trees,
        }
    }

    pub fn from_tree(t: ExplicitTree) -> Self {
        Model::new(Universe::Tree(t), ContractRegistry::new())
    }

    pub fn primary(&self) -> &Universe {
        &self.primary
    }

    pub fn contracts(&self) -> &ContractRegistry {
        &self.contracts
    }

    pub fn contract(&self, id: &str) -> Result<&Contract, LogicError> {
        self.contracts
            .get(id)
            .ok_or_else(|| LogicError::UnregisteredMap(id.to_string()))
    }

    pub fn universe(&self, r: &UniverseRef) -> Result<&Universe, LogicError> {
        let missing = |c: &String| LogicError::UnregisteredMap(c.clone());
        match r {
            UniverseRef::Primary => Ok(&self.primary),
            UniverseRef::Bundles(c) => self.bundle_trees.get(c).ok_or_else(|| missing(c)),
            UniverseRef::Transfers(c) => self.transfer_trees.get(c).ok_or_else(|| missing(c)),
        }
    }

    /// Domain and codomain of a registered map.
    pub fn endpoints(&self, m: &MapRef) -> Result<(UniverseRef, UniverseRef), LogicError> {
        if self.contracts.get(&m.contract).is_none() {
            return Err(LogicError::UnregisteredMap(m.to_string()));
        }
        let c = m.contract.clone();
        Ok(match m.kind {
            MapKind::Legal => (UniverseRef::Primary, UniverseRef::Bundles(c)),
            MapKind::Exec => (UniverseRef::Primary, UniverseRef::Transfers(c)),
            MapKind::ExecToLegal => (UniverseRef::Transfers(c.clone()), UniverseRef::Bundles(c)),
        })
    }

    pub fn apply_map(&self, m: &MapRef, p: &[String]) -> Result<Path, LogicError> {
        let c = self
            .contracts
            .get(&m.contract)
            .ok_or_else(|| LogicError::UnregisteredMap(m.to_string()))?;
        apply_nu(m.kind, c, p)
    }

    pub fn monotone_map(&self, m: &MapRef) -> Result<MonotoneMap<'_>, LogicError> {
        Ok(MonotoneMap::Nu(
            m.kind,
            self.contract(&m.contract)
                .map_err(|_| LogicError::UnregisteredMap(m.to_string()))?,
        ))
    }
}

type MemoKey = (usize, UniverseRef, Path);

/// Evaluates one formula at many paths, sharing work between them.
pub struct Evaluator<'m> {
    model: &'m Model,
    root: Option<Rc<Formula>>,
    memo: HashMap<MemoKey, bool>,
    preimages: HashMap<MapRef, Rc<HashMap<Path, Vec<Path>>>>,
    truncated: bool,
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m Model) -> Self {
        Evaluator {
            model,
            root: None,
            memo: HashMap::new(),
            preimages: HashMap::new(),
            truncated: false,
        }
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    /// True once some future quantifier met a path cut off by the horizon.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn eval(&mut self, f: &Formula, p: &[String]) -> Result<bool, LogicError> {
        self.eval_in(f, &UniverseRef::Primary, p)
    }

    pub fn eval_in(&mut self, f: &Formula, u: &UniverseRef, p: &[String]) -> Result<bool, LogicError> {
        if !self.model.universe(u)?.contains(p) {
            return Err(LogicError::PathOutsideUniverse(p.to_vec()));
        }
        // memo entries are keyed by node address inside our own copy
        let root = match &self.root {
            Some(r) if **r == *f => r.clone(),
            _ => {
                self.memo.clear();
                let r = Rc::new(f.clone());
                self.root = Some(r.clone());
                r
            }
        };
        self.node(&root, u, p)
    }

    /// `⟦f⟧` cut at `depth`.
    pub fn interpret(&mut self, f: &Formula, u: &UniverseRef, depth: usize) -> Result<Interpretation, LogicError> {
        let mut paths = BTreeSet::new();
        for p in self.model.universe(u)?.enumerate(depth) {
            if self.eval_in(f, u, &p)? {
                paths.insert(p);
            }
        }
        Ok(Interpretation {
            paths,
            depth_bound: depth,
        })
    }

    fn node(&mut self, f: &Formula, u: &UniverseRef, p: &[String]) -> Result<bool, LogicError> {
        let key = (f as *const Formula as usize, u.clone(), p.to_vec());
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = self.compute(f, u, p)?;
        self.memo.insert(key, v);
        Ok(v)
    }

    fn compute(&mut self, f: &Formula, u: &UniverseRef, p: &[String]) -> Result<bool, LogicError> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => self.atom(a, u, p)?,
            Formula::Not(a) => !self.node(a, u, p)?,
            Formula::And(a, b) => self.node(a, u, p)? && self.node(b, u, p)?,
            Formula::Or(a, b) => self.node(a, u, p)? || self.node(b, u, p)?,
            Formula::Implies(a, b) => !self.node(a, u, p)? || self.node(b, u, p)?,
            Formula::Modal(m, a) => self.modal(*m, f, a, u, p)?,
            Formula::Along(kind, m, a) => self.along(*kind, m, a, u, p)?,
        })
    }

    fn children(&mut self, u: &UniverseRef, p: &[String]) -> Result<Vec<Path>, LogicError> {
        let universe = self.model.universe(u)?;
        if universe.is_truncated(p) {
            self.truncated = true;
        }
        Ok(universe.children(p))
    }

    fn modal(
        &mut self,
        m: Modal,
        whole: &Formula,
        a: &Formula,
        u: &UniverseRef,
        p: &[String],
    ) -> Result<bool, LogicError> {
        let parent = p.split_last().map(|(_, init)| init);
        Ok(match m {
            Modal::SomeFuture => {
                if self.node(a, u, p)? {
                    return Ok(true);
                }
                for c in self.children(u, p)? {
                    if self.node(whole, u, &c)? {
                        return Ok(true);
                    }
                }
                false
            }
            Modal::AllFutures => {
                if !self.node(a, u, p)? {
                    return Ok(false);
                }
                for c in self.children(u, p)? {
                    if !self.node(whole, u, &c)? {
                        return Ok(false);
                    }
                }
                true
            }
            Modal::SomePast => self.node(a, u, p)? || matches!(parent, Some(q) if self.node(whole, u, q)?),
            Modal::AllPasts => self.node(a, u, p)? && parent.map_or(Ok(true), |q| self.node(whole, u, q))?,
            Modal::NextSome => {
                for c in self.children(u, p)? {
                    if self.node(a, u, &c)? {
                        return Ok(true);
                    }
                }
                false
            }
            Modal::NextAll => {
                for c in self.children(u, p)? {
                    if !self.node(a, u, &c)? {
                        return Ok(false);
                    }
                }
                true
            }
            Modal::PrevSome => matches!(parent, Some(q) if self.node(a, u, q)?),
            Modal::PrevAll => parent.map_or(Ok(true), |q| self.node(a, u, q))?,
        })
    }

    fn along(
        &mut self,
        kind: Along,
        m: &MapRef,
        a: &Formula,
        u: &UniverseRef,
        p: &[String],
    ) -> Result<bool, LogicError> {
        let (domain, codomain) = self.model.endpoints(m)?;
        let expected = if kind == Along::Pullback { &domain } else { &codomain };
        if u != expected {
            return Err(LogicError::MapUniverseMismatch {
                map: m.to_string(),
                universe: u.to_string(),
            });
        }
        if kind == Along::Pullback {
            let q = self.model.apply_map(m, p)?;
            if !self.model.universe(&codomain)?.contains(&q) {
                return Err(LogicError::PathOutsideUniverse(q));
            }
            return self.node(a, &codomain, &q);
        }
        let index = self.preimage_index(m, &domain)?;
        let pre = index.get(p).map(Vec::as_slice).unwrap_or(&[]);
        for q in pre {
            let v = self.node(a, &domain, q)?;
            match kind {
                Along::Exists if v => return Ok(true),
                Along::Forall if !v => return Ok(false),
                _ => {}
            }
        }
        Ok(kind == Along::Forall)
    }

    fn preimage_index(&mut self, m: &MapRef, domain: &UniverseRef) -> Result<Rc<HashMap<Path, Vec<Path>>>, LogicError> {
        if let Some(idx) = self.preimages.get(m) {
            return Ok(idx.clone());
        }
        let universe = self.model.universe(domain)?;
        let mut idx: HashMap<Path, Vec<Path>> = HashMap::new();
        for q in universe.enumerate(universe.max_depth()) {
            idx.entry(self.model.apply_map(m, &q)?).or_default().push(q);
        }
        let idx = Rc::new(idx);
        self.preimages.insert(m.clone(), idx.clone());
        Ok(idx)
    }

    fn atom(&mut self, a: &Atom, u: &UniverseRef, p: &[String]) -> Result<bool, LogicError> {
        Ok(match a {
            Atom::Chi(t) => p.len() <= *t,
            Atom::App(s) => p.contains(s),
            Atom::AppAt(s, n) => *n >= 1 && p.get(n - 1) == Some(s),
            Atom::AppLast(s, t) => p.len() <= *t && p.last() == Some(s),
            Atom::Hol { resource, actor, time } => {
                if p.len() < *time {
                    return Ok(false);
                }
                let universe = self.model.universe(u)?;
                let r = ResourceId::from(resource.as_str());
                let mut holder = universe.initial_holder(&r);
                for t in parse_transfers(&p[..*time]) {
                    if t.resource == r {
                        holder = t.to;
                    }
                }
                holder.to_string() == *actor
            }
            Atom::Phi(t) => {
                let est = self.model.universe(u)?.established();
                *t <= est.len() && {
                    let anchor = &est[..*t];
                    p.starts_with(anchor) || anchor.starts_with(p)
                }
            }
            Atom::Zeta(z) => p == z.as_slice(),
            Atom::Bc(cid) => {
                let c = self
                    .model
                    .contracts
                    .get(cid)
                    .ok_or_else(|| LogicError::UnregisteredMap(format!("bc({cid})")))?;
                bundle_complete_transfers(c, &relevant_transfers(c, &parse_transfers(p)))
            }
        })
    }
}

/// A finite set of paths, all of length at most `depth_bound`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Interpretation {
    pub paths: BTreeSet<Path>,
    pub depth_bound: usize,
}

impl Interpretation {
    pub fn new(paths: impl IntoIterator<Item = Path>, depth_bound: usize) -> Self {
        Interpretation {
            paths: paths.into_iter().collect(),
            depth_bound,
        }
    }

    pub fn contains(&self, p: &[String]) -> bool {
        self.paths.contains(p)
    }

    pub fn is_subset(&self, other: &Interpretation) -> bool {
        self.paths.is_subset(&other.paths)
    }
}

/// `⟦f⟧` in the model's primary universe, cut at `depth`.
pub fn interpret_formula(model: &Model, f: &Formula, depth: usize) -> Result<Interpretation, LogicError> {
    Evaluator::new(model).interpret(f, &UniverseRef::Primary, depth)
}

/// The image of `x`.
pub fn pushforward_exists(map: &MonotoneMap, x: &Interpretation) -> Result<Interpretation, LogicError> {
    let paths = x.paths.iter().map(|p| map.apply(p)).collect::<Result<_, _>>()?;
    Ok(Interpretation {
        paths,
        depth_bound: x.depth_bound,
    })
}

/// The codomain paths all of whose preimages in `domain` lie in `x`.
pub fn pushforward_forall(
    map: &MonotoneMap,
    x: &Interpretation,
    domain: &[Path],
    codomain: &[Path],
) -> Result<Interpretation, LogicError> {
    let mut outside = BTreeSet::new();
    for p in domain.iter().filter(|p| !x.contains(p)) {
        outside.insert(map.apply(p)?);
    }
    Ok(Interpretation {
        paths: codomain.iter().filter(|q| !outside.contains(*q)).cloned().collect(),
        depth_bound: x.depth_bound,
    })
}

/// The paths of `domain` whose image lies in `y`.
pub fn pullback(map: &MonotoneMap, y: &Interpretation, domain: &[Path]) -> Result<Interpretation, LogicError> {
    let mut paths = BTreeSet::new();
    for p in domain {
        if y.contains(&map.apply(p)?) {
            paths.insert(p.clone());
        }
    }
    Ok(Interpretation {
        paths,
        depth_bound: domain.iter().map(Vec::len).max().unwrap_or(0),
    })
}

/// The still-possible ledger states after `t` recorded steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evolution {
    pub t: usize,
    pub established: Path,
}

impl Evolution {
    pub fn at(model: &Model, t: usize) -> Result<Evolution, LogicError> {
        let est = model.primary().established();
        if t > est.len() {
            return Err(LogicError::IndexOutOfRange {
                index: t,
                len: est.len(),
            });
        }
        Ok(Evolution {
            t,
            established: est[..t].to_vec(),
        })
    }

    pub fn membership(&self) -> Formula {
        Formula::atom(Atom::Phi(self.t))
    }

    pub fn contains(&self, ev: &mut Evaluator, p: &[String]) -> Result<bool, LogicError> {
        ev.eval(&self.membership(), p)
    }

    /// Satisfaction within the evolution: `f ∧ Φ_t` in the whole universe.
    pub fn satisfies(&self, ev: &mut Evaluator, f: &Formula, p: &[String]) -> Result<bool, LogicError> {
        ev.eval(&Formula::and(f.clone(), self.membership()), p)
    }
}
