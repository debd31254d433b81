//! Temporal logic over prefix-closed trees of paths: formulas, universes,
//! evaluation with memoization, the occurring maps as morphisms between
//! trees, and the ledger axioms.

mod axioms;
mod eval;
mod maps;
mod universe;

use std::fmt;

use thiserror::Error;

pub use axioms::{check_axioms, AxiomResult};
pub use eval::{
    interpret_formula, pullback, pushforward_exists, pushforward_forall, Evaluator, Evolution, Interpretation, Model,
};
pub use maps::{MapKind, MapRef, MonotoneMap};
pub use universe::{ExplicitTree, Gate, LedgerUniverse, Universe, UniverseRef};

/// A word over the universe's alphabet. Ledger paths hold transfer names,
/// bundle trees hold bundle names.
pub type Path = Vec<String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("path {0:?} is not in the universe")]
    PathOutsideUniverse(Path),
    #[error("map {0} is not registered")]
    UnregisteredMap(String),
    #[error("map {map} cannot be applied in universe {universe}")]
    MapUniverseMismatch { map: String, universe: String },
    #[error("step {index} is beyond the ledger length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cannot map {0:?}: not an initial labeling")]
    NotAnInitialLabeling(Path),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    /// Path length is at most `t`.
    Chi(usize),
    /// The symbol appears somewhere.
    App(String),
    /// The symbol sits at 1-based position `n`.
    AppAt(String, usize),
    /// Non-empty, at most `t` long, and ending with the symbol.
    AppLast(String, usize),
    /// After the first `time` steps, `actor` holds `resource`.
    Hol {
        resource: String,
        actor: String,
        time: usize,
    },
    /// Membership in the evolution after `t` recorded steps.
    Phi(usize),
    /// Equality with one fixed path.
    Zeta(Path),
    /// The last transfer relevant to the contract completes a bundle.
    Bc(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modal {
    /// Some prolongation (`EXF`).
    SomeFuture,
    /// Every prolongation (`ALF`).
    AllFutures,
    /// Some prefix (`PAST`).
    SomePast,
    /// Every prefix (`ALLP`).
    AllPasts,
    NextSome,
    NextAll,
    PrevSome,
    PrevAll,
}

impl Modal {
    pub const ALL: [Modal; 8] = [
        Modal::SomeFuture,
        Modal::AllFutures,
        Modal::SomePast,
        Modal::AllPasts,
        Modal::NextSome,
        Modal::NextAll,
        Modal::PrevSome,
        Modal::PrevAll,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Modal::SomeFuture => "EXF",
            Modal::AllFutures => "ALF",
            Modal::SomePast => "PAST",
            Modal::AllPasts => "ALLP",
            Modal::NextSome => "NXE",
            Modal::NextAll => "NXA",
            Modal::PrevSome => "PVE",
            Modal::PrevAll => "PVA",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Modal> {
        Modal::ALL.into_iter().find(|m| m.keyword() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Along {
    Pullback,
    Exists,
    Forall,
}

impl Along {
    pub fn keyword(self) -> &'static str {
        match self {
            Along::Pullback => "pullback",
            Along::Exists => "exists",
            Along::Forall => "forall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Modal(Modal, Box<Formula>),
    Along(Along, MapRef, Box<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Self {
        Formula::Atom(a)
    }

    pub fn negate(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn modal(m: Modal, f: Formula) -> Self {
        Formula::Modal(m, Box::new(f))
    }

    pub fn along(kind: Along, map: MapRef, f: Formula) -> Self {
        Formula::Along(kind, map, Box::new(f))
    }

    /// Left-nested conjunction; `True` when empty.
    pub fn all(items: impl IntoIterator<Item = Formula>) -> Self {
        items.into_iter().reduce(Formula::and).unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; `False` when empty.
    pub fn any(items: impl IntoIterator<Item = Formula>) -> Self {
        items.into_iter().reduce(Formula::or).unwrap_or(Formula::False)
    }

    /// The disjunction of `AppAt(θ,n) ∧ Chi(n)` for `n` in `1..=t`, which
    /// denotes the same set as `AppLast(θ,t)`.
    pub fn app_last_expanded(symbol: &str, t: usize) -> Self {
        Formula::any((1..=t).map(|n| {
            Formula::and(
                Formula::atom(Atom::AppAt(symbol.to_string(), n)),
                Formula::atom(Atom::Chi(n)),
            )
        }))
    }

    /// Holds exactly on paths of length `k`.
    pub fn exact_length(k: usize) -> Self {
        match k {
            0 => Formula::atom(Atom::Chi(0)),
            _ => Formula::and(
                Formula::atom(Atom::Chi(k)),
                Formula::negate(Formula::atom(Atom::Chi(k - 1))),
            ),
        }
    }

    /// Every map reference, in syntax order.
    pub fn maps(&self) -> Vec<&MapRef> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Along(_, m, _) = f {
                out.push(m);
            }
        });
        out
    }

    /// Every atom, in syntax order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(a) = f {
                out.push(a);
            }
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => {}
            Formula::Not(a) | Formula::Modal(_, a) | Formula::Along(_, _, a) => a.visit(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// True iff some future quantifier occurs.
    pub fn looks_ahead(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| {
            if let Formula::Modal(m, _) = f {
                found |= matches!(
                    m,
                    Modal::SomeFuture | Modal::AllFutures | Modal::NextSome | Modal::NextAll
                );
            }
        });
        found
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Chi(t) => write!(f, "chi({t})"),
            Atom::App(s) => write!(f, "app({s})"),
            Atom::AppAt(s, n) => write!(f, "app({s},{n})"),
            Atom::AppLast(s, t) => write!(f, "applast({s},{t})"),
            Atom::Hol { resource, actor, time } => write!(f, "hol({resource},{actor},{time})"),
            Atom::Phi(t) => write!(f, "phi({t})"),
            Atom::Zeta(p) => write!(f, "zeta[{}]", p.join(",")),
            Atom::Bc(c) => write!(f, "bc({c})"),
        }
    }
}

/// Fully parenthesized; the query parser reads it back to an equal formula.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(a) => write!(f, "(not {a})"),
            Formula::And(a, b) => write!(f, "({a} and {b})"),
            Formula::Or(a, b) => write!(f, "({a} or {b})"),
            Formula::Implies(a, b) => write!(f, "({a} => {b})"),
            Formula::Modal(m, a) => write!(f, "({} {a})", m.keyword()),
            Formula::Along(k, m, a) => write!(f, "({}[{m}] {a})", k.keyword()),
        }
    }
}
