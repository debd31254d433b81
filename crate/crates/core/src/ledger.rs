//! Append-only, hash-chained ledger of transfer records and the four nested
//! safety levels a ledger state can satisfy with respect to a contract.
//!
//! Each record is stored as one line of JSON. The line is the canonical byte
//! form: the next record's `prev_hash` is the SHA-256 of exactly those bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::automata::Contract;
use crate::model::{validate_transfer, ActorId, ModelError, ResourceId, Transfer};

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("resource safety violation on {resource}: held by {last_holder}, transfer starts at {attempted_from}")]
    ResourceSafetyViolation {
        resource: ResourceId,
        last_holder: ActorId,
        attempted_from: ActorId,
        /// Ledger index of the record that handed the resource to `last_holder`.
        previous_index: Option<u64>,
    },
    #[error("unknown contract {0}")]
    UnknownContract(String),
    #[error("invalid transfer: {0}")]
    InvalidTransfer(#[from] ModelError),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("hash chain broken at index {0}")]
    ChainBroken(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordMeta {
    pub timestamp: DateTime<Utc>,
    pub validator: String,
}

impl RecordMeta {
    pub fn new(timestamp: DateTime<Utc>, validator: impl Into<String>) -> Self {
        RecordMeta {
            timestamp: truncate_to_seconds(timestamp),
            validator: validator.into(),
        }
    }

    /// Metadata with an RFC 3339 timestamp, converted to UTC.
    pub fn parse(timestamp: &str, validator: impl Into<String>) -> Result<Self, chrono::ParseError> {
        Ok(Self::new(
            DateTime::parse_from_rfc3339(timestamp)?.with_timezone(&Utc),
            validator,
        ))
    }

    pub fn now(validator: impl Into<String>) -> Self {
        Self::new(Utc::now(), validator)
    }

    /// Deterministic metadata for fixtures: `2024-01-01T00:00:00Z` plus `offset` seconds.
    pub fn fixed(offset: i64, validator: impl Into<String>) -> Self {
        let base = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).single().expect("valid date");
        Self::new(base + chrono::Duration::seconds(offset), validator)
    }
}

fn truncate_to_seconds(t: DateTime<Utc>) -> DateTime<Utc> {
    Utc.timestamp_opt(t.timestamp(), 0).single().expect("in range")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferRecord {
    pub index: u64,
    pub contract: String,
    pub transfer: Transfer,
    pub timestamp: DateTime<Utc>,
    pub validator: String,
    pub prev_hash: String,
}

/// On-disk field order is fixed by declaration order here.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    index: u64,
    contract: String,
    resource: String,
    from: String,
    to: String,
    timestamp: String,
    validator: String,
    prev_hash: String,
}

impl TransferRecord {
    pub fn to_line(&self) -> String {
        let line = RecordLine {
            index: self.index,
            contract: self.contract.clone(),
            resource: self.transfer.resource.to_string(),
            from: self.transfer.from.to_string(),
            to: self.transfer.to.to_string(),
            timestamp: self.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            validator: self.validator.clone(),
            prev_hash: self.prev_hash.clone(),
        };
        serde_json::to_string(&line).expect("record lines always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let raw: RecordLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let timestamp = chrono::NaiveDateTime::parse_from_str(&raw.timestamp, TIMESTAMP_FORMAT)
            .map_err(|e| format!("bad timestamp {:?}: {e}", raw.timestamp))?
            .and_utc();
        if raw.prev_hash.len() != 64
            || !raw
                .prev_hash
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return Err(format!("bad prev_hash {:?}", raw.prev_hash));
        }
        let transfer = Transfer {
            resource: ResourceId::new(raw.resource).map_err(|e| e.to_string())?,
            from: raw.from.parse().map_err(|e: ModelError| e.to_string())?,
            to: raw.to.parse().map_err(|e: ModelError| e.to_string())?,
        };
        Ok(TransferRecord {
            index: raw.index,
            contract: raw.contract,
            transfer,
            timestamp,
            validator: raw.validator,
            prev_hash: raw.prev_hash,
        })
    }
}

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AppendMode {
    /// Reject records that would break resource safety of the contract projection.
    #[default]
    Strict,
    /// Log everything; violations are left to the checkers.
    Permissive,
}

/// Contracts registered against a ledger, by id.
#[derive(Debug, Clone, Default)]
pub struct ContractRegistry {
    contracts: BTreeMap<String, Contract>,
}

impl ContractRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, c: Contract) {
        self.contracts.insert(c.id.clone(), c);
    }

    pub fn get(&self, id: &str) -> Option<&Contract> {
        self.contracts.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contract> {
        self.contracts.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.contracts.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }
}

impl FromIterator<Contract> for ContractRegistry {
    fn from_iter<I: IntoIterator<Item = Contract>>(iter: I) -> Self {
        let mut r = ContractRegistry::new();
        for c in iter {
            r.register(c);
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    record: TransferRecord,
    line: String,
}

/// An immutable snapshot of the ledger; appends return a new value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerState {
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainVerdict {
    Ok,
    BrokenAt(u64),
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &TransferRecord> + '_ {
        self.entries.iter().map(|e| &e.record)
    }

    pub fn record(&self, i: usize) -> Option<&TransferRecord> {
        self.entries.get(i).map(|e| &e.record)
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.line.as_str())
    }

    pub fn transfers(&self) -> Vec<Transfer> {
        self.records().map(|r| r.transfer.clone()).collect()
    }

    /// The first `n` records, which is itself a valid ledger state.
    pub fn prefix(&self, n: usize) -> LedgerState {
        LedgerState {
            entries: self.entries[..n.min(self.entries.len())].to_vec(),
        }
    }

    fn head_hash(&self) -> String {
        self.entries
            .last()
            .map(|e| digest_hex(e.line.as_bytes()))
            .unwrap_or_else(|| GENESIS_HASH.to_string())
    }

    /// Appends one record. In strict mode the contract must be registered and
    /// the transfer must start at the resource's current holder.
    pub fn append(
        &self,
        registry: &ContractRegistry,
        contract: &str,
        transfer: Transfer,
        meta: RecordMeta,
        mode: AppendMode,
    ) -> Result<LedgerState, LedgerError> {
        if mode == AppendMode::Strict {
            let c = registry
                .get(contract)
                .ok_or_else(|| LedgerError::UnknownContract(contract.to_string()))?;
            validate_transfer(&transfer, &c.legal.events)?;
            let (holder, previous_index) = self.current_holder(contract, c, &transfer.resource);
            if let Some(h) = holder {
                if h != transfer.from {
                    return Err(LedgerError::ResourceSafetyViolation {
                        resource: transfer.resource,
                        last_holder: h,
                        attempted_from: transfer.from,
                        previous_index,
                    });
                }
            }
        }
        let record = TransferRecord {
            index: self.entries.len() as u64,
            contract: contract.to_string(),
            transfer,
            timestamp: meta.timestamp,
            validator: meta.validator,
            prev_hash: self.head_hash(),
        };
        let line = record.to_line();
        let mut entries = self.entries.clone();
        entries.push(Entry { record, line });
        Ok(LedgerState { entries })
    }

    /// Holder of `r` after the contract's records so far: the last recipient,
    /// else the contract's initial holder. `None` when neither is known.
    fn current_holder(&self, contract: &str, c: &Contract, r: &ResourceId) -> (Option<ActorId>, Option<u64>) {
        self.records()
            .filter(|rec| rec.contract == contract && rec.transfer.resource == *r)
            .last()
            .map(|rec| (Some(rec.transfer.to.clone()), Some(rec.index)))
            .unwrap_or_else(|| (c.initial_holder(r).cloned(), None))
    }

    /// Recomputes every chain pointer and reports the first record that does
    /// not match.
    pub fn verify_chain(&self) -> ChainVerdict {
        let mut prev = GENESIS_HASH.to_string();
        for (i, e) in self.entries.iter().enumerate() {
            let parsed = TransferRecord::from_line(&e.line);
            let ok = e.record.index == i as u64
                && e.record.prev_hash == prev
                && parsed.as_ref() == Ok(&e.record)
                && e.record.to_line() == e.line;
            if !ok {
                return ChainVerdict::BrokenAt(i as u64);
            }
            prev = digest_hex(e.line.as_bytes());
        }
        ChainVerdict::Ok
    }

    /// Verifies raw ledger file contents line by line; unparsable lines count
    /// as breaks at their position.
    pub fn verify_text(text: &str) -> ChainVerdict {
        Self::verify_bytes(text.as_bytes())
    }

    /// Like [`LedgerState::verify_text`] on raw file bytes; a line that is not
    /// UTF-8 counts as a break at its position.
    pub fn verify_bytes(bytes: &[u8]) -> ChainVerdict {
        let mut prev = GENESIS_HASH.to_string();
        for (i, raw) in bytes.split(|&b| b == b'\n').filter(|l| !l.is_empty()).enumerate() {
            let Ok(line) = std::str::from_utf8(raw) else {
                return ChainVerdict::BrokenAt(i as u64);
            };
            let Ok(rec) = TransferRecord::from_line(line) else {
                return ChainVerdict::BrokenAt(i as u64);
            };
            if rec.index != i as u64 || rec.prev_hash != prev || rec.to_line() != line {
                return ChainVerdict::BrokenAt(i as u64);
            }
            prev = digest_hex(raw);
        }
        ChainVerdict::Ok
    }

    /// Parses a ledger file, keeping each line's exact bytes. Chain integrity
    /// is not enforced here; use [`LedgerState::verify_chain`].
    pub fn from_text(text: &str) -> Result<LedgerState, LedgerError> {
        let mut entries = Vec::new();
        for (i, line) in split_lines(text).enumerate() {
            let record =
                TransferRecord::from_line(line).map_err(|reason| LedgerError::Malformed { line: i, reason })?;
            entries.push(Entry {
                record,
                line: line.to_string(),
            });
        }
        Ok(LedgerState { entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.line);
            out.push('\n');
        }
        out
    }

    /// Records of one contract, in ledger order.
    pub fn project_contract(&self, contract: &str) -> Vec<&TransferRecord> {
        self.records().filter(|r| r.contract == contract).collect()
    }

    /// Records moving one resource, in ledger order.
    pub fn project_resource(&self, r: &ResourceId) -> Vec<&TransferRecord> {
        self.records().filter(|rec| rec.transfer.resource == *r).collect()
    }

    /// Checks one safety level of the contract projection.
    pub fn check_safety(&self, c: &Contract, level: &SafetyLevel) -> SafetyReport {
        let projection = self.project_contract(&c.id);
        let verdict = match level {
            SafetyLevel::Resource(r) => resource_safety(&projection, c, r),
            SafetyLevel::Wallet => wallet_safety(&projection, c),
            SafetyLevel::Bundle => bundle_safety(&projection, c),
            SafetyLevel::Contract => contract_safety(&projection, c),
        };
        SafetyReport {
            level: level.clone(),
            witness: verdict.err(),
        }
    }
}

fn split_lines(text: &str) -> impl Iterator<Item = &str> {
    text.split('\n').filter(|l| !l.is_empty())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SafetyLevel {
    Resource(ResourceId),
    Wallet,
    Bundle,
    Contract,
}

impl fmt::Display for SafetyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyLevel::Resource(r) => write!(f, "{r}-safe"),
            SafetyLevel::Wallet => f.write_str("wallet-safe"),
            SafetyLevel::Bundle => f.write_str("bundle-safe"),
            SafetyLevel::Contract => f.write_str("contract-safe"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessKind {
    /// The resource's hand-over chain breaks.
    ChainBreak,
    /// A started bundle's resource moves again before the bundle completes.
    BundleInterrupted,
    /// The execution automaton cannot take this transfer.
    NotInContract,
}

/// Evidence of a violation. `indices` are ledger record indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyWitness {
    pub kind: WitnessKind,
    pub indices: Vec<u64>,
    pub resource: ResourceId,
    pub expected: Option<ActorId>,
    pub actual: Option<ActorId>,
}

impl fmt::Display for SafetyWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(u64::to_string).collect();
        match self.kind {
            WitnessKind::ChainBreak => write!(
                f,
                "chain break on {} at indices [{}]: expected holder {}, transfer from {}",
                self.resource,
                idx.join(","),
                self.expected.as_ref().map(|a| a.to_string()).unwrap_or_default(),
                self.actual.as_ref().map(|a| a.to_string()).unwrap_or_default(),
            ),
            WitnessKind::BundleInterrupted => write!(
                f,
                "{} moved again at index {} before its bundle (started at {}) completed",
                self.resource,
                idx.last().cloned().unwrap_or_default(),
                idx.first().cloned().unwrap_or_default(),
            ),
            WitnessKind::NotInContract => write!(
                f,
                "transfer of {} at index {} leaves every admissible contract execution",
                self.resource,
                idx.join(","),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyReport {
    pub level: SafetyLevel,
    pub witness: Option<SafetyWitness>,
}

impl SafetyReport {
    pub fn is_safe(&self) -> bool {
        self.witness.is_none()
    }
}

fn resource_safety(projection: &[&TransferRecord], c: &Contract, r: &ResourceId) -> Result<(), SafetyWitness> {
    let mut holder = c.initial_holder(r).cloned();
    let mut last_index: Option<u64> = None;
    for rec in projection.iter().filter(|rec| rec.transfer.resource == *r) {
        if let Some(h) = &holder {
            if *h != rec.transfer.from {
                return Err(SafetyWitness {
                    kind: WitnessKind::ChainBreak,
                    indices: last_index.into_iter().chain([rec.index]).collect(),
                    resource: r.clone(),
                    expected: Some(h.clone()),
                    actual: Some(rec.transfer.from.clone()),
                });
            }
        }
        holder = Some(rec.transfer.to.clone());
        last_index = Some(rec.index);
    }
    Ok(())
}

fn wallet_safety(projection: &[&TransferRecord], c: &Contract) -> Result<(), SafetyWitness> {
    let mut resources: BTreeSet<ResourceId> = c.resources();
    resources.extend(projection.iter().map(|rec| rec.transfer.resource.clone()));
    resources
        .iter()
        .filter_map(|r| resource_safety(projection, c, r).err())
        .min_by_key(|w| w.indices.last().copied())
        .map_or(Ok(()), Err)
}

fn bundle_safety(projection: &[&TransferRecord], c: &Contract) -> Result<(), SafetyWitness> {
    wallet_safety(projection, c)?;
    let bundles: Vec<_> = (0..c.legal.transitions.len()).map(|i| c.bundle(i)).collect();
    for (i, rec) in projection.iter().enumerate() {
        let containing: Vec<_> = bundles.iter().filter(|b| b.contains(&rec.transfer)).collect();
        if containing.is_empty() {
            continue;
        }
        for (j, later) in projection.iter().enumerate().skip(i + 1) {
            if later.transfer.resource != rec.transfer.resource {
                continue;
            }
            let encoded: BTreeSet<&Transfer> = projection[..j].iter().map(|r| &r.transfer).collect();
            let completed = containing.iter().any(|b| b.transfers().all(|t| encoded.contains(t)));
            if !completed {
                return Err(SafetyWitness {
                    kind: WitnessKind::BundleInterrupted,
                    indices: vec![rec.index, later.index],
                    resource: rec.transfer.resource.clone(),
                    expected: None,
                    actual: Some(later.transfer.from.clone()),
                });
            }
            // later moves of this resource are judged from `later`'s own position
            break;
        }
    }
    Ok(())
}

fn contract_safety(projection: &[&TransferRecord], c: &Contract) -> Result<(), SafetyWitness> {
    bundle_safety(projection, c)?;
    let transfers: Vec<Transfer> = projection.iter().map(|r| r.transfer.clone()).collect();
    c.run_exec(&transfers).map(|_| ()).map_err(|pos| {
        let rec = projection[pos];
        SafetyWitness {
            kind: WitnessKind::NotInContract,
            indices: vec![rec.index],
            resource: rec.transfer.resource.clone(),
            expected: None,
            actual: Some(rec.transfer.from.clone()),
        }
    })
}
