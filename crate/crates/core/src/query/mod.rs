//! Contract specs, the query language, and the command-line front end.

pub mod cli;
pub mod parser;
pub mod run;
pub mod spec;
