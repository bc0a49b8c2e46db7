//! SystemVerilog assertion subset and its lowering onto clusters.
//!
//! Supported: boolean expressions, fixed `##N` delays, sequence
//! concatenation, `|->` and `|=>`, and `assert`/`cover property` with a
//! single `@(posedge clk)` clocking event.

mod lower;
mod parse;

pub use lower::{lower_block, lower_to_vtr, LowerOptions};
pub use parse::parse_sva;

use crate::frontend::ast::Expr;
use crate::frontend::Span;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SvaError {
    #[error("{span}: unsupported SVA feature \"{feature}\"")]
    Unsupported { feature: &'static str, span: Span },
    #[error("{span}: {message}")]
    Syntax { message: String, span: Span },
    #[error(
        "property `{label}` needs {needed} concurrent checker instances but the bound is {bound}; raise the activation bound to at least {needed}"
    )]
    Bound {
        label: String,
        needed: u32,
        bound: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SvaUnit {
    pub props: Vec<SvaProperty>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvaKind {
    Assert,
    Cover,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvaProperty {
    pub label: Option<String>,
    pub kind: SvaKind,
    pub clock: String,
    pub body: PropBody,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropBody {
    Seq(SvaSeq),
    Implication {
        ante: SvaSeq,
        /// `|->` when true, `|=>` when false.
        overlapping: bool,
        cons: SvaSeq,
    },
}

/// `##d0 e0 ##d1 e1 ...`; `d0` is zero when there is no leading delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvaSeq {
    pub elems: Vec<SeqElem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqElem {
    pub delay: u32,
    pub expr: Expr,
}

impl SvaSeq {
    /// Cycle offset of each element relative to the first cycle of the sequence.
    pub fn offsets(&self) -> Vec<u32> {
        let mut t = 0;
        self.elems
            .iter()
            .map(|e| {
                t += e.delay;
                t
            })
            .collect()
    }

    pub fn length(&self) -> u32 {
        self.offsets().last().copied().unwrap_or(0)
    }
}
