//! Symbolic evaluation engine: terms, states, step functions, sequence
//! execution and validity checking.

pub mod dag;
pub mod exec;
pub mod state;
pub mod summary;
pub mod term;
pub mod valid;

pub use exec::{call_sites, CoverHit, ExecConfig, Executor, FreshVar, PathEnd, PathOutcome, RunResult, TraceEntry};
pub use state::{Design, State, Val};
pub use summary::{entry_state, instantiate, summarize, NoSummary, Summary, SummaryTable};
pub use term::{Kind, Term};
pub use valid::{check_valid, Compiled, Method, Support, Verdict, DEFAULT_BUDGET_BITS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymError {
    #[error("read of undefined signal `{signal}` at {line}:{col}")]
    Undefined { signal: String, line: u32, col: u32 },
    #[error("state `{state}` of `{vtr}` selects a next state twice")]
    TwoGotos { vtr: String, state: String },
    #[error("fork branches write `{signal}` in the same cycle")]
    ForkConflict { signal: String },
}
