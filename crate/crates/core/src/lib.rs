//! Purpose-driven data cleaning.
//!
//! A deterministic engine for six column operations, recordable and
//! replayable workflows, an iterative LLM agent that proposes workflows for
//! an analysis purpose, and a benchmark harness that injects errors and
//! scores generated workflows against curated ground truth.

pub mod agent;
pub mod benchmark;
pub mod dates;
pub mod evaluation;
pub mod numeric;
pub mod ops;
pub mod query;
pub mod table;
pub mod workflow;

pub use table::{load_csv, load_table, CellValue, ColumnView, LoadOptions, Table, TableError};
