//! The `cledger` command line. [`run_command`] does all the work in-process
//! so tests can drive it directly.
//!
//! Exit status: 0 for ok/true, 1 for a violation or a false verdict, 2 for
//! usage and I/O errors.

use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::parser::{parse_formula, parse_query, Directives};
use super::run::{audit_pattern, contract_state, hypothetical, run_query, DEFAULT_HORIZON};
use super::spec::ContractSpecDocument;
use crate::ledger::{AppendMode, ChainVerdict, ContractRegistry, LedgerState, RecordMeta, SafetyLevel};
use crate::logic::Gate;
use crate::model::{ActorId, ResourceId, Transfer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cledger",
    version,
    about = "Audit transfer ledgers against contract automata"
)]
struct Cli {
    /// Emit a machine-readable JSON report.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    group: Group,
}

#[derive(Debug, Subcommand)]
enum Group {
    /// Create, extend, verify and check ledger files.
    #[command(subcommand)]
    Ledger(LedgerCmd),
    /// Register contracts and inspect their state.
    #[command(subcommand)]
    Contract(ContractCmd),
    /// Evaluate temporal formulas.
    #[command(subcommand)]
    Query(QueryCmd),
    /// Search the ledger for transfer patterns.
    #[command(subcommand)]
    Audit(AuditCmd),
}

#[derive(Debug, Subcommand)]
enum LedgerCmd {
    /// Create an empty ledger.
    Init { ledger: PathBuf },
    /// Append one transfer record.
    Append(AppendArgs),
    /// Recompute the hash chain.
    Verify { ledger: PathBuf },
    /// Check a safety level of a contract's projection.
    Check {
        ledger: PathBuf,
        #[arg(long)]
        contract: String,
        #[arg(long, value_enum)]
        property: Property,
        /// Required with `--property resource`.
        #[arg(long)]
        resource: Option<String>,
    },
}

#[derive(Debug, Args)]
struct AppendArgs {
    ledger: PathBuf,
    #[arg(long)]
    contract: String,
    #[arg(long)]
    resource: String,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long, default_value = "cli")]
    validator: String,
    /// RFC 3339 timestamp; defaults to now.
    #[arg(long)]
    timestamp: Option<String>,
    /// Log the record even if it breaks resource safety.
    #[arg(long)]
    permissive: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Property {
    Resource,
    Wallet,
    Bundle,
    Contract,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GateArg {
    Contract,
    Resource,
}

impl From<GateArg> for Gate {
    fn from(g: GateArg) -> Gate {
        match g {
            GateArg::Contract => Gate::ContractGated,
            GateArg::Resource => Gate::ResourceSafe,
        }
    }
}

#[derive(Debug, Subcommand)]
enum ContractCmd {
    /// Validate a contract spec and register it with a ledger.
    Add { ledger: PathBuf, spec: PathBuf },
    /// Legal and execution state of a contract at a recorded step.
    State {
        ledger: PathBuf,
        #[arg(long)]
        contract: String,
        /// Length of the ledger state to inspect; defaults to the whole ledger.
        #[arg(long)]
        at: Option<usize>,
        /// Evolution to evaluate in; defaults to the whole ledger.
        #[arg(long)]
        evolution: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum QueryCmd {
    /// Evaluate a formula at a recorded ledger state.
    Eval {
        ledger: PathBuf,
        formula: String,
        #[command(flatten)]
        opts: EvalOpts,
        #[arg(long)]
        evolution: Option<usize>,
    },
    /// Does the formula fail now but hold in a future of some earlier state?
    Hypothetical {
        ledger: PathBuf,
        formula: String,
        #[command(flatten)]
        opts: EvalOpts,
    },
}

#[derive(Debug, Args)]
struct EvalOpts {
    #[arg(long)]
    at: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum)]
    gate: Option<GateArg>,
}

#[derive(Debug, Subcommand)]
enum AuditCmd {
    /// Find occurrences of one transfer followed later by another.
    Pattern {
        ledger: PathBuf,
        /// First transfer, as `(resource,from,to)`.
        #[arg(long)]
        first: String,
        /// Second transfer, as `(resource,from,to)`.
        #[arg(long)]
        then: String,
    },
}

#[derive(Debug, Serialize)]
struct Report {
    command: String,
    verdict: String,
    witnesses: Vec<String>,
    truncated_at_horizon: bool,
}

struct Outcome {
    code: i32,
    report: Report,
}

impl Outcome {
    fn new(command: &str, code: i32, verdict: impl Into<String>) -> Self {
        Outcome {
            code,
            report: Report {
                command: command.to_string(),
                verdict: verdict.into(),
                witnesses: Vec::new(),
                truncated_at_horizon: false,
            },
        }
    }

    fn witness(mut self, w: impl Into<String>) -> Self {
        self.report.witnesses.push(w.into());
        self
    }
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command, writing the
/// report to `out` and usage errors to `err`. Returns the exit status.
pub fn run_command<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let name = command_name(&cli.group);
    let outcome = match dispatch(cli.group) {
        Ok(o) => o,
        Err(Failure(msg)) => Outcome::new(name, EXIT_USAGE, "error").witness(msg),
    };
    let written = if cli.json {
        serde_json::to_string(&outcome.report)
            .map_err(std::io::Error::other)
            .and_then(|s| writeln!(out, "{s}"))
    } else {
        write_human(out, &outcome.report)
    };
    if written.is_err() {
        return EXIT_USAGE;
    }
    outcome.code
}

fn write_human(out: &mut dyn Write, r: &Report) -> std::io::Result<()> {
    writeln!(out, "{}", r.verdict)?;
    for w in &r.witnesses {
        writeln!(out, "  {w}")?;
    }
    if r.truncated_at_horizon {
        writeln!(out, "  (answer relative to the horizon: some futures were cut off)")?;
    }
    Ok(())
}

fn command_name(g: &Group) -> &'static str {
    match g {
        Group::Ledger(LedgerCmd::Init { .. }) => "ledger init",
        Group::Ledger(LedgerCmd::Append(_)) => "ledger append",
        Group::Ledger(LedgerCmd::Verify { .. }) => "ledger verify",
        Group::Ledger(LedgerCmd::Check { .. }) => "ledger check",
        Group::Contract(ContractCmd::Add { .. }) => "contract add",
        Group::Contract(ContractCmd::State { .. }) => "contract state",
        Group::Query(QueryCmd::Eval { .. }) => "query eval",
        Group::Query(QueryCmd::Hypothetical { .. }) => "query hypothetical",
        Group::Audit(AuditCmd::Pattern { .. }) => "audit pattern",
    }
}

/// Directory holding the contracts registered with a ledger file.
pub fn contracts_dir(ledger: &FsPath) -> PathBuf {
    let mut name = ledger.as_os_str().to_owned();
    name.push(".contracts");
    PathBuf::from(name)
}

pub fn load_registry(ledger: &FsPath) -> Result<ContractRegistry, String> {
    let dir = contracts_dir(ledger);
    let mut registry = ContractRegistry::new();
    if !dir.exists() {
        return Ok(registry);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    for f in files {
        let c = ContractSpecDocument::load(&f)
            .and_then(|d| d.to_contract())
            .map_err(|e| format!("{}: {e}", f.display()))?;
        registry.register(c);
    }
    Ok(registry)
}

pub fn load_ledger(path: &FsPath) -> Result<LedgerState, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    LedgerState::from_text(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn dispatch(g: Group) -> Result<Outcome, Failure> {
    match g {
        Group::Ledger(cmd) => ledger_cmd(cmd),
        Group::Contract(cmd) => contract_cmd(cmd),
        Group::Query(cmd) => query_cmd(cmd),
        Group::Audit(AuditCmd::Pattern { ledger, first, then }) => {
            let l = load_ledger(&ledger)?;
            let registry = load_registry(&ledger)?;
            let first = Transfer::parse_name(&first)?;
            let then = Transfer::parse_name(&then)?;
            let report = audit_pattern(&l, &registry, &first, &then)?;
            let n = report.occurrences.len();
            let mut o = Outcome::new(
                "audit pattern",
                if n > 0 { EXIT_OK } else { EXIT_VIOLATION },
                format!("{n} occurrence{}", if n == 1 { "" } else { "s" }),
            );
            for (i, j) in &report.occurrences {
                o = o.witness(format!("({i},{j})"));
            }
            if report.repeated {
                o = o.witness("repeated");
            }
            Ok(o)
        }
    }
}

fn ledger_cmd(cmd: LedgerCmd) -> Result<Outcome, Failure> {
    match cmd {
        LedgerCmd::Init { ledger } => {
            if ledger.exists() {
                return Err(Failure(format!("{} already exists", ledger.display())));
            }
            fs::write(&ledger, "")?;
            fs::create_dir_all(contracts_dir(&ledger))?;
            Ok(Outcome::new(
                "ledger init",
                EXIT_OK,
                format!("initialised {}", ledger.display()),
            ))
        }
        LedgerCmd::Append(a) => append(a),
        LedgerCmd::Verify { ledger } => {
            let bytes = fs::read(&ledger).map_err(|e| format!("{}: {e}", ledger.display()))?;
            Ok(match LedgerState::verify_bytes(&bytes) {
                ChainVerdict::Ok => Outcome::new("ledger verify", EXIT_OK, "chain ok"),
                ChainVerdict::BrokenAt(i) => {
                    Outcome::new("ledger verify", EXIT_VIOLATION, format!("chain broken at index {i}"))
                        .witness(i.to_string())
                }
            })
        }
        LedgerCmd::Check {
            ledger,
            contract,
            property,
            resource,
        } => {
            let l = load_ledger(&ledger)?;
            let registry = load_registry(&ledger)?;
            let c = registry
                .get(&contract)
                .ok_or_else(|| Failure(format!("unknown contract {contract}")))?;
            let level = match (property, resource) {
                (Property::Resource, Some(r)) => SafetyLevel::Resource(ResourceId::new(r)?),
                (Property::Resource, None) => return Err(Failure("--property resource needs --resource".into())),
                (Property::Wallet, _) => SafetyLevel::Wallet,
                (Property::Bundle, _) => SafetyLevel::Bundle,
                (Property::Contract, _) => SafetyLevel::Contract,
            };
            let report = l.check_safety(c, &level);
            Ok(match report.witness {
                None => Outcome::new("ledger check", EXIT_OK, level.to_string()),
                Some(w) => Outcome::new("ledger check", EXIT_VIOLATION, format!("not {level}")).witness(w.to_string()),
            })
        }
    }
}

fn append(a: AppendArgs) -> Result<Outcome, Failure> {
    let l = load_ledger(&a.ledger)?;
    if let ChainVerdict::BrokenAt(i) = l.verify_chain() {
        return Ok(Outcome::new(
            "ledger append",
            EXIT_VIOLATION,
            format!("chain broken at index {i}"),
        ));
    }
    let registry = load_registry(&a.ledger)?;
    let transfer = Transfer {
        resource: ResourceId::new(a.resource)?,
        from: a.from.parse::<ActorId>()?,
        to: a.to.parse::<ActorId>()?,
    };
    let meta = match a.timestamp {
        Some(ts) => RecordMeta::parse(&ts, a.validator)?,
        None => RecordMeta::now(a.validator),
    };
    let mode = if a.permissive {
        AppendMode::Permissive
    } else {
        AppendMode::Strict
    };
    match l.append(&registry, &a.contract, transfer, meta, mode) {
        Ok(next) => {
            let line = next.lines().last().expect("just appended");
            let mut f = fs::OpenOptions::new().append(true).open(&a.ledger)?;
            writeln!(f, "{line}")?;
            Ok(Outcome::new(
                "ledger append",
                EXIT_OK,
                format!("appended record {}", next.len() - 1),
            ))
        }
        Err(crate::ledger::LedgerError::UnknownContract(c)) => Err(Failure(format!("unknown contract {c}"))),
        Err(e) => Ok(Outcome::new("ledger append", EXIT_VIOLATION, "rejected").witness(e.to_string())),
    }
}

fn contract_cmd(cmd: ContractCmd) -> Result<Outcome, Failure> {
    match cmd {
        ContractCmd::Add { ledger, spec } => {
            let doc = ContractSpecDocument::load(&spec)?;
            let c = doc.to_contract()?;
            let dir = contracts_dir(&ledger);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join(format!("{}.json", c.id)), doc.to_json())?;
            Ok(
                Outcome::new("contract add", EXIT_OK, format!("registered contract {}", c.id)).witness(format!(
                    "{} states, {} transitions",
                    c.legal.states.len(),
                    c.legal.transitions.len()
                )),
            )
        }
        ContractCmd::State {
            ledger,
            contract,
            at,
            evolution,
        } => {
            let l = load_ledger(&ledger)?;
            let registry = load_registry(&ledger)?;
            let k = at.unwrap_or(l.len());
            let n = evolution.unwrap_or(l.len()).max(k);
            let r = contract_state(&l, &registry, &contract, n, k)?;
            let legal: Vec<&str> = r.legal.iter().map(String::as_str).collect();
            let mut o = Outcome::new("contract state", EXIT_OK, legal.join(","));
            for v in &r.legal {
                o = o.witness(format!("legal: {v}"));
            }
            for s in &r.exec {
                o = o.witness(format!("exec: {s}"));
            }
            for (v, outcome) in &r.outcomes {
                o = o.witness(format!("outcome: {v} {}", outcome.code()));
            }
            Ok(o)
        }
    }
}

fn query_cmd(cmd: QueryCmd) -> Result<Outcome, Failure> {
    let (name, ledger) = match &cmd {
        QueryCmd::Eval { ledger, .. } => ("query eval", ledger.clone()),
        QueryCmd::Hypothetical { ledger, .. } => ("query hypothetical", ledger.clone()),
    };
    let l = load_ledger(&ledger)?;
    let registry = load_registry(&ledger)?;
    let result = match cmd {
        QueryCmd::Eval {
            formula,
            opts,
            evolution,
            ..
        } => {
            let ast = parse_query(&formula)?;
            let defaults = Directives {
                at: opts.at,
                horizon: opts.horizon,
                gate: opts.gate.map(Gate::from),
                evolution,
            };
            run_query(&l, &registry, &ast, defaults)?
        }
        QueryCmd::Hypothetical { formula, opts, .. } => {
            let phi = parse_formula(&formula)?;
            hypothetical(
                &l,
                &registry,
                &phi,
                opts.at.unwrap_or(l.len()),
                opts.horizon.unwrap_or(DEFAULT_HORIZON),
                opts.gate.map(Gate::from).unwrap_or_default(),
            )?
        }
    };
    let mut o = Outcome::new(
        name,
        if result.verdict { EXIT_OK } else { EXIT_VIOLATION },
        result.verdict.to_string(),
    )
    .witness(format!("at step {}: {}", result.at, result.formula));
    o.report.truncated_at_horizon = result.truncated;
    Ok(o)
}
