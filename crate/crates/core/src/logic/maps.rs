//! Monotone maps between trees: the occurring maps of a contract and
//! explicit finite tables used in tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{LogicError, Path};
use crate::automata::{Contract, TransferLabeling};
use crate::model::Transfer;
use crate::occurrence::{bundle_occurrence, factorise, relevant_transfers, transfer_occurrence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MapKind {
    /// Ledger paths to bundle labelings.
    Legal,
    /// Ledger paths to transfer labelings.
    Exec,
    /// Transfer labelings to bundle labelings.
    ExecToLegal,
}

impl MapKind {
    pub fn prefix(self) -> &'static str {
        match self {
            MapKind::Legal => "nu_l",
            MapKind::Exec => "nu_e",
            MapKind::ExecToLegal => "nu_le",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MapRef {
    pub kind: MapKind,
    pub contract: String,
}

impl MapRef {
    pub fn new(kind: MapKind, contract: impl Into<String>) -> Self {
        MapRef {
            kind,
            contract: contract.into(),
        }
    }
}

impl fmt::Display for MapRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.prefix(), self.contract)
    }
}

impl FromStr for MapRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, contract) = s
            .split_once(':')
            .ok_or_else(|| format!("expected kind:contract, got {s:?}"))?;
        let kind = match kind {
            "nu_l" => MapKind::Legal,
            "nu_e" => MapKind::Exec,
            "nu_le" => MapKind::ExecToLegal,
            other => return Err(format!("unknown map kind {other:?}")),
        };
        if contract.is_empty() {
            return Err("empty contract id".into());
        }
        Ok(MapRef::new(kind, contract))
    }
}

/// Symbols that are not transfer names are ignored by the occurring maps.
pub(crate) fn parse_transfers(p: &[String]) -> Vec<Transfer> {
    p.iter().filter_map(|s| Transfer::parse_name(s).ok()).collect()
}

pub(crate) fn apply_nu(kind: MapKind, c: &Contract, p: &[String]) -> Result<Path, LogicError> {
    let transfers = relevant_transfers(c, &parse_transfers(p));
    Ok(match kind {
        MapKind::Legal => bundle_occurrence(c, &transfers).names(),
        MapKind::Exec => transfer_occurrence(c, &transfers).names(),
        MapKind::ExecToLegal => factorise(&TransferLabeling(transfers), c)
            .map_err(|_| LogicError::NotAnInitialLabeling(p.to_vec()))?
            .names(),
    })
}

/// A map usable with the set-level quantifiers.
#[derive(Debug, Clone)]
pub enum MonotoneMap<'c> {
    Nu(MapKind, &'c Contract),
    Table(BTreeMap<Path, Path>),
    Identity,
}

impl MonotoneMap<'_> {
    pub fn apply(&self, p: &Path) -> Result<Path, LogicError> {
        match self {
            MonotoneMap::Nu(kind, c) => apply_nu(*kind, c, p),
            MonotoneMap::Table(t) => t
                .get(p)
                .cloned()
                .ok_or_else(|| LogicError::PathOutsideUniverse(p.clone())),
            MonotoneMap::Identity => Ok(p.clone()),
        }
    }
}
