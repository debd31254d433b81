//! The query language: a recursive-descent parser for formulas with
//! optional evaluation directives, and a validation pass against the
//! identifiers a ledger and its contracts declare.
//!
//! ```text
//! query     := directive* formula
//! directive := "@at" INT | "@horizon" INT | "@evolution" INT | "@gate" ("contract" | "resource")
//! formula   := or ("=>" formula)?
//! or        := and ("or" and)*
//! and       := unary ("and" unary)*
//! unary     := "not" unary | MODAL unary | ("pullback"|"exists"|"forall") "[" MAP "]" unary | primary
//! primary   := "(" formula ")" | "true" | "false" | atom
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ledger::{ContractRegistry, LedgerState};
use crate::logic::{Along, Atom, Formula, Gate, MapRef, Modal};
use crate::model::{ActorId, Bundle, Transfer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: expected {expected}")]
    SyntaxError { pos: usize, expected: String },
    #[error("unknown identifier {0}")]
    UnknownIdentifier(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Directives {
    pub at: Option<usize>,
    pub horizon: Option<usize>,
    pub gate: Option<Gate>,
    pub evolution: Option<usize>,
}

impl Directives {
    /// Fields set here win over `fallback`.
    pub fn or(self, fallback: Directives) -> Directives {
        Directives {
            at: self.at.or(fallback.at),
            horizon: self.horizon.or(fallback.horizon),
            gate: self.gate.or(fallback.gate),
            evolution: self.evolution.or(fallback.evolution),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub directives: Directives,
    pub formula: Formula,
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.directives;
        if let Some(n) = d.at {
            write!(f, "@at {n} ")?;
        }
        if let Some(n) = d.horizon {
            write!(f, "@horizon {n} ")?;
        }
        if let Some(g) = d.gate {
            write!(f, "@gate {g} ")?;
        }
        if let Some(n) = d.evolution {
            write!(f, "@evolution {n} ")?;
        }
        write!(f, "{}", self.formula)
    }
}

pub fn parse_query(text: &str) -> Result<QueryAst, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let directives = p.directives()?;
    let formula = p.formula()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error("end of input"));
    }
    Ok(QueryAst { directives, formula })
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let ast = parse_query(text)?;
    if ast.directives != Directives::default() {
        return Err(ParseError::SyntaxError {
            pos: 0,
            expected: "a formula without directives".into(),
        });
    }
    Ok(ast.formula)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | '\'')
}

impl<'a> Parser<'a> {
    fn error(&self, expected: &str) -> ParseError {
        ParseError::SyntaxError {
            pos: self.pos,
            expected: expected.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("{token:?}")))
        }
    }

    fn peek_word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = self.rest();
        let end = rest.find(|c: char| !is_word_char(c)).unwrap_or(rest.len());
        &rest[..end]
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.peek_word() == w {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn word(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let w = self.peek_word();
        if w.is_empty() {
            return Err(self.error(what));
        }
        self.pos += w.len();
        Ok(w)
    }

    fn number(&mut self) -> Result<usize, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        if end == 0 {
            return Err(self.error("a number"));
        }
        let n = rest[..end].parse().map_err(|_| self.error("a number that fits"))?;
        self.pos += end;
        Ok(n)
    }

    fn directives(&mut self) -> Result<Directives, ParseError> {
        let mut d = Directives::default();
        while self.eat("@") {
            let start = self.pos;
            match self.word("a directive name")? {
                "at" => d.at = Some(self.number()?),
                "horizon" => d.horizon = Some(self.number()?),
                "evolution" => d.evolution = Some(self.number()?),
                "gate" => {
                    d.gate = Some(match self.word("contract or resource")? {
                        "contract" => Gate::ContractGated,
                        "resource" => Gate::ResourceSafe,
                        _ => return Err(self.error("contract or resource")),
                    })
                }
                _ => {
                    self.pos = start;
                    return Err(self.error("at, horizon, evolution or gate"));
                }
            }
        }
        Ok(d)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if self.eat("=>") {
            Ok(Formula::implies(lhs, self.formula()?))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.and()?;
        while self.eat_word("or") {
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.unary()?;
        while self.eat_word("and") {
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let w = self.peek_word();
        if w == "not" {
            self.pos += w.len();
            return Ok(Formula::negate(self.unary()?));
        }
        if let Some(m) = Modal::from_keyword(w) {
            self.pos += w.len();
            return Ok(Formula::modal(m, self.unary()?));
        }
        let along = match w {
            "pullback" => Some(Along::Pullback),
            "exists" => Some(Along::Exists),
            "forall" => Some(Along::Forall),
            _ => None,
        };
        if let Some(kind) = along {
            self.pos += w.len();
            self.expect("[")?;
            let map = self.map_ref()?;
            self.expect("]")?;
            return Ok(Formula::along(kind, map, self.unary()?));
        }
        self.primary()
    }

    fn map_ref(&mut self) -> Result<MapRef, ParseError> {
        let start = self.pos;
        let kind = self.word("nu_l, nu_e or nu_le")?;
        self.expect(":")?;
        let contract = self.word("a contract id")?;
        format!("{kind}:{contract}")
            .parse()
            .map_err(|_| ParseError::SyntaxError {
                pos: start,
                expected: "nu_l, nu_e or nu_le".into(),
            })
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        if self.eat("(") {
            let f = self.formula()?;
            self.expect(")")?;
            return Ok(f);
        }
        let start = self.pos;
        let w = self.peek_word();
        self.pos += w.len();
        let f = match w {
            "true" => Formula::True,
            "false" => Formula::False,
            "chi" => Formula::atom(Atom::Chi(self.parenthesized_number()?)),
            "phi" => Formula::atom(Atom::Phi(self.parenthesized_number()?)),
            "bc" => {
                self.expect("(")?;
                let c = self.word("a contract id")?.to_string();
                self.expect(")")?;
                Formula::atom(Atom::Bc(c))
            }
            "app" => {
                self.expect("(")?;
                let s = self.symbol()?;
                let f = if self.eat(",") {
                    Formula::atom(Atom::AppAt(s, self.number()?))
                } else {
                    Formula::atom(Atom::App(s))
                };
                self.expect(")")?;
                f
            }
            "applast" => {
                self.expect("(")?;
                let s = self.symbol()?;
                self.expect(",")?;
                let t = self.number()?;
                self.expect(")")?;
                Formula::atom(Atom::AppLast(s, t))
            }
            "hol" => self.hol()?,
            "zeta" => {
                self.expect("[")?;
                let mut path = Vec::new();
                if !self.eat("]") {
                    loop {
                        path.push(self.symbol()?);
                        if self.eat("]") {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                Formula::atom(Atom::Zeta(path))
            }
            _ => {
                self.pos = start;
                return Err(self.error("a formula"));
            }
        };
        Ok(f)
    }

    fn parenthesized_number(&mut self) -> Result<usize, ParseError> {
        self.expect("(")?;
        let n = self.number()?;
        self.expect(")")?;
        Ok(n)
    }

    fn hol(&mut self) -> Result<Formula, ParseError> {
        self.expect("(")?;
        let resource = self.word("a resource")?.to_string();
        self.expect(",")?;
        let actor = self.word("an actor")?.to_string();
        self.expect(",")?;
        let (from, to) = if self.eat_word("all") {
            self.expect("[")?;
            let i = self.number()?;
            self.expect("..")?;
            let pos = self.pos;
            let j = self.number()?;
            self.expect("]")?;
            if j < i {
                return Err(ParseError::SyntaxError {
                    pos,
                    expected: format!("an interval end of at least {i}"),
                });
            }
            (i, j)
        } else {
            let t = self.number()?;
            (t, t)
        };
        self.expect(")")?;
        Ok(Formula::all((from..=to).map(|time| {
            Formula::atom(Atom::Hol {
                resource: resource.clone(),
                actor: actor.clone(),
                time,
            })
        })))
    }

    /// A transfer `(r,a,b)`, a bundle `{(..),(..)}`, or a bare identifier.
    fn symbol(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some('(') => Ok(self.transfer()?.name()),
            Some('{') => {
                let start = self.pos;
                self.expect("{")?;
                let mut members = vec![self.transfer()?];
                while self.eat(",") {
                    members.push(self.transfer()?);
                }
                self.expect("}")?;
                Bundle::new(members)
                    .map(|b| b.name())
                    .map_err(|_| ParseError::SyntaxError {
                        pos: start,
                        expected: "a bundle on distinct resources".into(),
                    })
            }
            _ => Ok(self.word("a transfer, bundle or symbol")?.to_string()),
        }
    }

    fn transfer(&mut self) -> Result<Transfer, ParseError> {
        self.expect("(")?;
        let r = self.word("a resource")?;
        self.expect(",")?;
        let a = self.word("an actor")?;
        self.expect(",")?;
        let b = self.word("an actor")?;
        self.expect(")")?;
        Ok(Transfer::new(r, a, b))
    }
}

/// Identifiers a query may mention.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    pub contracts: BTreeSet<String>,
    pub resources: BTreeSet<String>,
    pub actors: BTreeSet<String>,
}

impl Vocabulary {
    pub fn from_ledger(l: &LedgerState, registry: &ContractRegistry) -> Self {
        let mut v = Vocabulary::default();
        v.actors.extend([ActorId::Top.to_string(), ActorId::Bottom.to_string()]);
        for c in registry.iter() {
            v.contracts.insert(c.id.clone());
            v.resources.extend(c.resources().iter().map(|r| r.to_string()));
            v.actors.extend(c.actors.iter().map(|a| a.to_string()));
        }
        for r in l.records() {
            v.resources.insert(r.transfer.resource.to_string());
            v.actors.insert(r.transfer.from.to_string());
            v.actors.insert(r.transfer.to.to_string());
        }
        v
    }

    fn check_transfer(&self, t: &Transfer) -> Result<(), ParseError> {
        if !self.resources.contains(t.resource.as_str()) {
            return Err(ParseError::UnknownIdentifier(t.resource.to_string()));
        }
        for a in [&t.from, &t.to] {
            if !self.actors.contains(&a.to_string()) {
                return Err(ParseError::UnknownIdentifier(a.to_string()));
            }
        }
        Ok(())
    }

    fn check_symbol(&self, s: &str) -> Result<(), ParseError> {
        if let Some(inner) = s.strip_prefix('{').and_then(|x| x.strip_suffix('}')) {
            // bundle names are canonical: members are comma-joined transfer names
            for part in inner.split("),(") {
                let name = format!("({})", part.trim_start_matches('(').trim_end_matches(')'));
                let t = Transfer::parse_name(&name).map_err(|_| ParseError::UnknownIdentifier(s.to_string()))?;
                self.check_transfer(&t)?;
            }
            return Ok(());
        }
        match Transfer::parse_name(s) {
            Ok(t) => self.check_transfer(&t),
            Err(_) => Err(ParseError::UnknownIdentifier(s.to_string())),
        }
    }

    /// Rejects references to undeclared contracts, resources or actors.
    pub fn validate(&self, f: &Formula) -> Result<(), ParseError> {
        for m in f.maps() {
            if !self.contracts.contains(&m.contract) {
                return Err(ParseError::UnknownIdentifier(m.contract.clone()));
            }
        }
        for a in f.atoms() {
            match a {
                Atom::Bc(c) if !self.contracts.contains(c) => {
                    return Err(ParseError::UnknownIdentifier(c.clone()));
                }
                Atom::App(s) | Atom::AppAt(s, _) | Atom::AppLast(s, _) => self.check_symbol(s)?,
                Atom::Zeta(path) => {
                    for s in path {
                        self.check_symbol(s)?;
                    }
                }
                Atom::Hol { resource, actor, .. } => {
                    if !self.resources.contains(resource) {
                        return Err(ParseError::UnknownIdentifier(resource.clone()));
                    }
                    if !self.actors.contains(actor) {
                        return Err(ParseError::UnknownIdentifier(actor.clone()));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn app_at(s: &str, n: usize) -> Formula {
        Formula::atom(Atom::AppAt(s.into(), n))
    }

    #[test]
    fn regression_query_shape() {
        let f = parse_formula("EXF (PAST (app((o,TOP,customer),5)) => chi(9))").unwrap();
        let want = Formula::modal(
            Modal::SomeFuture,
            Formula::implies(
                Formula::modal(Modal::SomePast, app_at("(o,TOP,customer)", 5)),
                Formula::atom(Atom::Chi(9)),
            ),
        );
        assert_eq!(f, want);
    }

    #[test]
    fn negated_evolution() {
        assert_eq!(
            parse_formula("not phi(3)").unwrap(),
            Formula::negate(Formula::atom(Atom::Phi(3)))
        );
    }

    #[test]
    fn holding_conjunction_and_interval() {
        let hol = |t| {
            Formula::atom(Atom::Hol {
                resource: "Eiffel".into(),
                actor: "a".into(),
                time: t,
            })
        };
        assert_eq!(
            parse_formula("hol(Eiffel, a, 4) and hol(Eiffel, a, 5)").unwrap(),
            Formula::and(hol(4), hol(5))
        );
        assert_eq!(
            parse_formula("hol(Eiffel, a, all[4..6])").unwrap(),
            Formula::and(Formula::and(hol(4), hol(5)), hol(6))
        );
        assert!(parse_formula("hol(Eiffel, a, all[6..4])").is_err());
    }

    #[test]
    fn precedence() {
        let a = || Formula::atom(Atom::Chi(1));
        let b = || Formula::atom(Atom::Chi(2));
        let c = || Formula::atom(Atom::Chi(3));
        assert_eq!(
            parse_formula("chi(1) or chi(2) and chi(3)").unwrap(),
            Formula::or(a(), Formula::and(b(), c()))
        );
        assert_eq!(
            parse_formula("chi(1) => chi(2) => chi(3)").unwrap(),
            Formula::implies(a(), Formula::implies(b(), c()))
        );
        assert_eq!(
            parse_formula("not EXF chi(1) and chi(2)").unwrap(),
            Formula::and(Formula::negate(Formula::modal(Modal::SomeFuture, a())), b())
        );
    }

    #[test]
    fn directives_and_maps() {
        let q = parse_query("@at 3 @horizon 6 @gate resource pullback[nu_l:Cd] PAST zeta[]").unwrap();
        assert_eq!(q.directives.at, Some(3));
        assert_eq!(q.directives.horizon, Some(6));
        assert_eq!(q.directives.gate, Some(Gate::ResourceSafe));
        assert_eq!(parse_query(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn bundles_are_canonicalised() {
        let f = parse_formula("zeta[{(b,TOP,x),(a,TOP,y)}]").unwrap();
        assert_eq!(f, Formula::atom(Atom::Zeta(vec!["{(a,TOP,y),(b,TOP,x)}".into()])));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_formula("chi(1) and") {
            Err(ParseError::SyntaxError { pos, .. }) => assert_eq!(pos, 10),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_formula("chi(x)"),
            Err(ParseError::SyntaxError { pos: 4, .. })
        ));
        assert!(parse_formula("@bogus 1 true").is_err());
        assert!(parse_formula("chi(1) chi(2)").is_err());
    }

    #[test]
    fn unknown_identifiers() {
        let mut v = Vocabulary::default();
        v.contracts.insert("Cd".into());
        v.resources.insert("offer".into());
        v.actors.extend(["TOP".to_string(), "customer".to_string()]);
        assert!(v
            .validate(&parse_formula("app((offer,TOP,customer)) and bc(Cd)").unwrap())
            .is_ok());
        assert_eq!(
            v.validate(&parse_formula("bc(Cx)").unwrap()),
            Err(ParseError::UnknownIdentifier("Cx".into()))
        );
        assert_eq!(
            v.validate(&parse_formula("app((offer,TOP,mallory))").unwrap()),
            Err(ParseError::UnknownIdentifier("mallory".into()))
        );
        assert_eq!(
            v.validate(&parse_formula("hol(car,customer,2)").unwrap()),
            Err(ParseError::UnknownIdentifier("car".into()))
        );
    }
}
