//! Resources, actors, states of affairs, transfers and bundles.
//!
//! A state of affairs is a total allocation of every resource token to exactly
//! one actor. Two environment actors exist besides the proper contract parties:
//! `Top` is the source of resources that have not been produced yet and
//! `Bottom` is the sink of consumed resources. Event tokens are resources that
//! can only ever move once, from `Top` to `Bottom`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Reserved spelling of the source environment actor.
pub const TOP: &str = "TOP";
/// Reserved spelling of the sink environment actor.
pub const BOT: &str = "BOT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("empty identifier")]
    EmptyIdentifier,
    #[error("resource {0} is allocated more than once")]
    DuplicateAllocation(ResourceId),
    #[error("resource {0} is not declared")]
    UnknownResource(ResourceId),
    #[error("event {resource} cannot be held by proper actor {actor}")]
    EventHeldByProper { resource: ResourceId, actor: ActorId },
    #[error("self transfer {0}")]
    SelfTransfer(Transfer),
    #[error("transfer {0} takes a resource back from BOT")]
    FromBottom(Transfer),
    #[error("event transfer {0} must be of the form (e,TOP,BOT)")]
    MalformedEventTransfer(Transfer),
    #[error("transfer {transfer} not applicable: {resource} is held by {holder}")]
    NotApplicable {
        transfer: Transfer,
        resource: ResourceId,
        holder: ActorId,
    },
    #[error("bundle not jointly applicable; failing transfers: {}", join_names(.0))]
    NotJointlyApplicable(Vec<Transfer>),
    #[error("bundle must contain at least one transfer")]
    EmptyBundle,
    #[error("bundle moves resource {0} more than once")]
    BundleResourceClash(ResourceId),
    #[error("cannot parse transfer name {0:?}")]
    BadTransferName(String),
}

fn join_names(ts: &[Transfer]) -> String {
    ts.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
}

/// Identifier of a resource token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceId(String);

impl ResourceId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ModelError::EmptyIdentifier);
        }
        Ok(ResourceId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ResourceId {
    /// Panics on the empty string; use [`ResourceId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        ResourceId::new(s).expect("resource id must be non-empty")
    }
}

/// A contract party or one of the two environment actors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActorId {
    Proper(String),
    Top,
    Bottom,
}

impl ActorId {
    pub fn proper(name: impl Into<String>) -> Self {
        ActorId::Proper(name.into())
    }

    pub fn is_proper(&self) -> bool {
        matches!(self, ActorId::Proper(_))
    }

    pub fn is_environment(&self) -> bool {
        !self.is_proper()
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActorId::Proper(n) => f.write_str(n),
            ActorId::Top => f.write_str(TOP),
            ActorId::Bottom => f.write_str(BOT),
        }
    }
}

impl FromStr for ActorId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" => Err(ModelError::EmptyIdentifier),
            TOP => Ok(ActorId::Top),
            BOT => Ok(ActorId::Bottom),
            other => Ok(ActorId::Proper(other.to_string())),
        }
    }
}

impl From<&str> for ActorId {
    fn from(s: &str) -> Self {
        s.parse().expect("actor id must be non-empty")
    }
}

/// `[r,k]`: resource `r` is held by actor `k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allocation {
    pub resource: ResourceId,
    pub holder: ActorId,
}

impl Allocation {
    pub fn new(resource: impl Into<ResourceId>, holder: impl Into<ActorId>) -> Self {
        Allocation {
            resource: resource.into(),
            holder: holder.into(),
        }
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.resource, self.holder)
    }
}

/// The subset of resources that are event tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventSet(BTreeSet<ResourceId>);

impl EventSet {
    pub fn new(events: impl IntoIterator<Item = ResourceId>) -> Self {
        EventSet(events.into_iter().collect())
    }

    pub fn contains(&self, r: &ResourceId) -> bool {
        self.0.contains(r)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ResourceId> {
        self.0.iter()
    }
}

/// `(r, from, to)`: `from` yields resource `r` to `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transfer {
    pub resource: ResourceId,
    pub from: ActorId,
    pub to: ActorId,
}

impl Transfer {
    pub fn new(resource: impl Into<ResourceId>, from: impl Into<ActorId>, to: impl Into<ActorId>) -> Self {
        Transfer {
            resource: resource.into(),
            from: from.into(),
            to: to.into(),
        }
    }

    /// Canonical name, `(resource,from,to)` with `TOP`/`BOT` spelled literally.
    pub fn name(&self) -> String {
        format!("({},{},{})", self.resource, self.from, self.to)
    }

    /// Inverse of [`Transfer::name`]. Actor names cannot contain commas, so the
    /// last two commas delimit the actors; resource ids may contain commas.
    pub fn parse_name(s: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::BadTransferName(s.to_string());
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let mut parts = inner.rsplitn(3, ',');
        let to = parts.next().ok_or_else(bad)?.trim();
        let from = parts.next().ok_or_else(bad)?.trim();
        let resource = parts.next().ok_or_else(bad)?.trim();
        Ok(Transfer {
            resource: ResourceId::new(resource).map_err(|_| bad())?,
            from: from.parse().map_err(|_| bad())?,
            to: to.parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for Transfer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.resource, self.from, self.to)
    }
}

/// Checks the structural invariants every transfer must satisfy.
pub fn validate_transfer(t: &Transfer, events: &EventSet) -> Result<(), ModelError> {
    if t.from == t.to {
        return Err(ModelError::SelfTransfer(t.clone()));
    }
    if t.from == ActorId::Bottom {
        return Err(ModelError::FromBottom(t.clone()));
    }
    if events.contains(&t.resource) && (t.from != ActorId::Top || t.to != ActorId::Bottom) {
        return Err(ModelError::MalformedEventTransfer(t.clone()));
    }
    Ok(())
}

/// A non-empty set of transfers on pairwise distinct resources.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bundle(BTreeSet<Transfer>);

impl Bundle {
    pub fn new(transfers: impl IntoIterator<Item = Transfer>) -> Result<Self, ModelError> {
        let set: BTreeSet<Transfer> = transfers.into_iter().collect();
        if set.is_empty() {
            return Err(ModelError::EmptyBundle);
        }
        let mut seen = BTreeSet::new();
        for t in &set {
            if !seen.insert(&t.resource) {
                return Err(ModelError::BundleResourceClash(t.resource.clone()));
            }
        }
        Ok(Bundle(set))
    }

    pub fn transfers(&self) -> impl Iterator<Item = &Transfer> {
        self.0.iter()
    }

    pub fn contains(&self, t: &Transfer) -> bool {
        self.0.contains(t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The sorted member names, braced: `{(a,x,y),(b,y,z)}`.
    pub fn name(&self) -> String {
        let mut names: Vec<String> = self.0.iter().map(Transfer::name).collect();
        names.sort();
        format!("{{{}}}", names.join(","))
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A total map from the contract's resources to actors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateOfAffairs {
    alloc: BTreeMap<ResourceId, ActorId>,
}

impl StateOfAffairs {
    /// Builds a validated state; resources without an allocation are held by `Top`.
    pub fn new(
        resources: &BTreeSet<ResourceId>,
        events: &EventSet,
        allocations: impl IntoIterator<Item = Allocation>,
    ) -> Result<Self, ModelError> {
        let mut alloc: BTreeMap<ResourceId, ActorId> = BTreeMap::new();
        for a in allocations {
            if !resources.contains(&a.resource) {
                return Err(ModelError::UnknownResource(a.resource));
            }
            if events.contains(&a.resource) && a.holder.is_proper() {
                return Err(ModelError::EventHeldByProper {
                    resource: a.resource,
                    actor: a.holder,
                });
            }
            if alloc.contains_key(&a.resource) {
                return Err(ModelError::DuplicateAllocation(a.resource));
            }
            alloc.insert(a.resource, a.holder);
        }
        for r in resources {
            alloc.entry(r.clone()).or_insert(ActorId::Top);
        }
        Ok(StateOfAffairs { alloc })
    }

    pub fn holder(&self, r: &ResourceId) -> Option<&ActorId> {
        self.alloc.get(r)
    }

    pub fn resources(&self) -> impl Iterator<Item = &ResourceId> {
        self.alloc.keys()
    }

    pub fn allocations(&self) -> impl Iterator<Item = Allocation> + '_ {
        self.alloc.iter().map(|(r, k)| Allocation {
            resource: r.clone(),
            holder: k.clone(),
        })
    }

    /// Allocations to parties other than `Top` and `Bottom`.
    pub fn proper_allocations(&self) -> BTreeSet<Allocation> {
        self.allocations().filter(|a| a.holder.is_proper()).collect()
    }

    pub fn contains(&self, a: &Allocation) -> bool {
        self.alloc.get(&a.resource) == Some(&a.holder)
    }

    pub fn is_applicable(&self, t: &Transfer) -> bool {
        self.alloc.get(&t.resource) == Some(&t.from)
    }

    fn check_applicable(&self, t: &Transfer) -> Result<(), ModelError> {
        match self.alloc.get(&t.resource) {
            None => Err(ModelError::UnknownResource(t.resource.clone())),
            Some(h) if *h != t.from => Err(ModelError::NotApplicable {
                transfer: t.clone(),
                resource: t.resource.clone(),
                holder: h.clone(),
            }),
            Some(_) => Ok(()),
        }
    }

    /// `apl_t(s)`: moves `t.resource` from `t.from` to `t.to`.
    pub fn apply_transfer(&self, t: &Transfer, events: &EventSet) -> Result<Self, ModelError> {
        validate_transfer(t, events)?;
        self.check_applicable(t)?;
        let mut next = self.clone();
        next.alloc.insert(t.resource.clone(), t.to.clone());
        Ok(next)
    }

    /// `jpl_b(s)`: all members at once, or nothing.
    pub fn apply_bundle(&self, b: &Bundle, events: &EventSet) -> Result<Self, ModelError> {
        let failing: Vec<Transfer> = b
            .transfers()
            .filter(|t| validate_transfer(t, events).is_err() || !self.is_applicable(t))
            .cloned()
            .collect();
        if !failing.is_empty() {
            return Err(ModelError::NotJointlyApplicable(failing));
        }
        let mut next = self.clone();
        for t in b.transfers() {
            next.alloc.insert(t.resource.clone(), t.to.clone());
        }
        Ok(next)
    }
}

impl fmt::Display for StateOfAffairs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.allocations().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}
