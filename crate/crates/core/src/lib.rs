//! Resource-based contracts over an append-only transfer ledger: contract
//! automata, ledger safety checks, occurrence analysis, a temporal logic over
//! ledger evolutions, and the query layer behind the `cledger` binary.

pub mod automata;
pub mod ledger;
pub mod logic;
pub mod model;
pub mod occurrence;
pub mod query;
