//! Elaboration: build commands, cluster joining, signal classification and
//! `unique` guard checking.

mod build;
mod classify;
pub mod ir;
mod unique;

pub use build::{build, visit_stmts, IMPLICIT_ROOT};
pub use classify::classify_signals;
pub use ir::*;
pub use unique::{check_unique_guards, UniqueReport, UniqueViolation};

use crate::frontend::ResolvedUnit;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ElabError {
    #[error("join target `{0}` is not a declared cluster or instance")]
    JoinUndeclared(String),
    #[error("cluster `{cluster}` is joined twice into `{target}`")]
    DuplicateJoin { cluster: String, target: String },
    #[error("cluster `{cluster}` reaches two instances, `{first}` and `{second}`")]
    ClusterInTwoInstances {
        cluster: String,
        first: String,
        second: String,
    },
    #[error("instance name `{0}` is used twice")]
    DuplicateInstance(String),
    #[error("only one top-level build is supported; found another named `{0}`")]
    MultipleBuilds(String),
    #[error("signal `{signal}` is declared with incompatible shapes {first} and {second}")]
    WidthCollision {
        signal: String,
        first: String,
        second: String,
    },
    #[error("`{name}` used by `{user}` is not part of any instantiated cluster")]
    NotInstantiated { name: String, user: String },
    #[error("`{signal}` is assigned twice in datapath `{datapath}`")]
    DoubleAssign { signal: String, datapath: String },
    #[error("generated name `{0}` collides with a declared name")]
    NameCollision(String),
    #[error("signal `{0}` is driven both by design logic and by a VTR")]
    DesignAndVtrDriver(String),
    #[error("signal `{0}` is driven both inside and outside @e_clk")]
    MixedClocking(String),
    #[error("array `{0}` must be assigned under @e_clk")]
    CombinationalArray(String),
    #[error("combinational cycle: {}", .0.join(" -> "))]
    CombinationalCycle(Vec<String>),
    #[error("{0}")]
    UniqueOverlap(Box<UniqueViolation>),
}

/// Build, classify and check `unique` guards.
pub fn elaborate(unit: &ResolvedUnit) -> Result<DesignIR, ElabError> {
    let ir = classify_signals(build(unit)?)?;
    let report = check_unique_guards(&ir, crate::sym::DEFAULT_BUDGET_BITS);
    if let Some(v) = report.violations.into_iter().next() {
        return Err(ElabError::UniqueOverlap(Box::new(v)));
    }
    Ok(ir)
}
