//! Compiler and deductive verification engine for a transaction-level
//! hardware language.

pub mod elab;
pub mod frontend;
pub mod suite;
pub mod sva;
pub mod sym;
pub mod project;
pub mod proof;
pub mod rtl;
pub mod gallina;

/// Tool version, part of every certificate and closure hash.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
