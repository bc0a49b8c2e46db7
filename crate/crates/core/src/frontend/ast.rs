//! Syntax tree for the PDVL subset. Every node carries the span it was parsed from.

use super::span::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: Span) -> Self {
        Self {
            name: name.into(),
            span,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceUnit {
    pub clusters: Vec<ClusterDecl>,
    pub builds: Vec<BuildDecl>,
}

/// Whether a cluster was written `cluster name { .. }` or `cl_name { .. }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterStyle {
    Keyword,
    Prefixed,
    /// Inline `{ .. }` block inside a `join`.
    Inline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterDecl {
    pub name: Ident,
    pub style: ClusterStyle,
    pub signals: Vec<SignalDecl>,
    pub conditions: Vec<ConditionDecl>,
    pub datapaths: Vec<DatapathDecl>,
    pub transactions: Vec<TransactionDecl>,
    pub vtrs: Vec<VtrDecl>,
    pub svas: Vec<SvaBlock>,
    pub span: Span,
}

impl ClusterDecl {
    pub fn empty(name: Ident, style: ClusterStyle, span: Span) -> Self {
        Self {
            name,
            style,
            signals: Vec::new(),
            conditions: Vec::new(),
            datapaths: Vec::new(),
            transactions: Vec::new(),
            vtrs: Vec::new(),
            svas: Vec::new(),
            span,
        }
    }

    /// Names of all elements (not signals) in declaration-category order.
    pub fn element_names(&self) -> impl Iterator<Item = &Ident> {
        self.conditions
            .iter()
            .map(|c| &c.name)
            .chain(self.datapaths.iter().map(|d| &d.name))
            .chain(self.transactions.iter().map(|t| &t.name))
            .chain(self.vtrs.iter().map(|v| &v.name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalDecl {
    pub name: Ident,
    pub width: u32,
    /// Number of entries for array signals.
    pub depth: Option<u32>,
    pub span: Span,
}

/// `c_x { if (expr) this; }`, or `c_x { }` for a condition that is only driven.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionDecl {
    pub name: Ident,
    pub expr: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatapathDecl {
    pub name: Ident,
    pub assigns: Vec<Assign>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assign {
    pub target: Ident,
    pub index: Option<Expr>,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionDecl {
    pub name: Ident,
    pub body: Vec<TrStmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrStmt {
    /// `d_x;`, `c_x;` or `tr_x;`
    Ref(Ident),
    /// `[unique] @c_x { .. }`
    Guard {
        unique: bool,
        cond: Ident,
        body: Vec<TrStmt>,
        span: Span,
    },
    /// `@e_clk { .. }`
    Clock {
        edge: Ident,
        body: Vec<TrStmt>,
        span: Span,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VtrDecl {
    pub name: Ident,
    pub sequence: Option<SequenceDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDecl {
    pub name: Ident,
    pub states: Vec<StateDecl>,
    pub span: Span,
}

impl SequenceDecl {
    pub fn state(&self, name: &str) -> Option<&StateDecl> {
        self.states.iter().find(|s| s.name.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDecl {
    pub name: Ident,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// A bare identifier; classified by prefix during resolution
    /// (datapath, condition drive, VTR call or state transition).
    Name(Ident),
    Wait { cond: Ident, body: Vec<Stmt> },
    Random(Ident),
    /// `cover cp_x { c_a; .. }` must hold every time it executes;
    /// `reach cp_x { .. }` must hold on at least one execution.
    Cover {
        name: Ident,
        conds: Vec<Ident>,
        exists: bool,
    },
    Fork(Vec<Vec<Stmt>>),
    Exit,
}

/// Raw text of an `sva { .. }` block, lowered by the SVA bridge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvaBlock {
    pub text: String,
    pub span: Span,
    /// Position of the first byte of `text` in the enclosing file.
    pub body_span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildDecl {
    pub name: Ident,
    pub role: Option<Ident>,
    pub items: Vec<BuildItem>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildItem {
    Instance(BuildDecl),
    Join {
        src: JoinSource,
        dst: Ident,
        span: Span,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinSource {
    Named(Ident),
    Inline(ClusterDecl),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Ident(String),
    Literal { width: Option<u32>, value: u64 },
    /// Bit select on a vector or element read on an array.
    Index { base: Ident, index: Box<Expr> },
    Slice { base: Ident, hi: Box<Expr>, lo: Box<Expr> },
    Concat(Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    LogicNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    LogicAnd,
    LogicOr,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::LogicAnd => "&&",
            BinOp::LogicOr => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::LogicOr => 1,
            BinOp::LogicAnd => 2,
            BinOp::Or => 3,
            BinOp::Xor => 4,
            BinOp::And => 5,
            BinOp::Eq | BinOp::Ne => 6,
            BinOp::Lt => 7,
            BinOp::Shl | BinOp::Shr => 8,
            BinOp::Add | BinOp::Sub => 9,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt)
    }
}

/// Element kinds, identified by name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    Condition,
    Datapath,
    Transaction,
    Vtr,
}

impl ElementKind {
    pub fn from_name(name: &str) -> Option<Self> {
        if name.starts_with("c_") {
            Some(ElementKind::Condition)
        } else if name.starts_with("d_") {
            Some(ElementKind::Datapath)
        } else if name.starts_with("tr_") {
            Some(ElementKind::Transaction)
        } else if name.starts_with("vtr_") {
            Some(ElementKind::Vtr)
        } else {
            None
        }
    }

    pub fn noun(self) -> &'static str {
        match self {
            ElementKind::Condition => "condition",
            ElementKind::Datapath => "datapath",
            ElementKind::Transaction => "transaction",
            ElementKind::Vtr => "VTR",
        }
    }
}
