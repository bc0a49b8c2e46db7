//! Name resolution and width inference.
//!
//! Produces a [`ResolvedUnit`] in which every identifier is bound to a
//! declaration and every expression is a [`TExpr`] with explicit widths:
//! implicit zero-extensions become `Zext` nodes and logical operators are
//! rewritten onto 1-bit bitwise operators.

use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;

use super::ast::*;
use super::span::{Diagnostic, DiagnosticKind, Diagnostics, Span};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TExpr {
    pub kind: TKind,
    pub width: u32,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TBin {
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
}

impl TBin {
    pub fn is_comparison(self) -> bool {
        matches!(self, TBin::Eq | TBin::Ne | TBin::Lt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TBin::Add => "+",
            TBin::Sub => "-",
            TBin::And => "&",
            TBin::Or => "|",
            TBin::Xor => "^",
            TBin::Shl => "<<",
            TBin::Shr => ">>",
            TBin::Eq => "==",
            TBin::Ne => "!=",
            TBin::Lt => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TKind {
    /// Scalar signal or condition, by name.
    Signal(String),
    Const(u64),
    Select {
        base: Box<TExpr>,
        hi: u32,
        lo: u32,
    },
    ArrayRead {
        array: String,
        index: Box<TExpr>,
    },
    /// Most significant part first.
    Concat(Vec<TExpr>),
    /// Zero-extend the operand to `self.width`.
    Zext(Box<TExpr>),
    Not(Box<TExpr>),
    /// Operands of all but the shifts have equal width.
    Binary(TBin, Box<TExpr>, Box<TExpr>),
}

impl TExpr {
    pub fn constant(value: u64, width: u32, span: Span) -> Self {
        TExpr {
            kind: TKind::Const(value & mask(width)),
            width,
            span,
        }
    }

    /// Names of signals and conditions read by this expression.
    pub fn reads(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            TKind::Signal(n) => {
                out.insert(n.clone());
            }
            TKind::Const(_) => {}
            TKind::Select { base, .. } => base.reads(out),
            TKind::ArrayRead { array, index } => {
                out.insert(array.clone());
                index.reads(out);
            }
            TKind::Concat(parts) => parts.iter().for_each(|p| p.reads(out)),
            TKind::Zext(e) | TKind::Not(e) => e.reads(out),
            TKind::Binary(_, a, b) => {
                a.reads(out);
                b.reads(out);
            }
        }
    }

    /// Canonical text independent of spans, used for hashing and dumps.
    pub fn canonical(&self) -> String {
        match &self.kind {
            TKind::Signal(n) => n.clone(),
            TKind::Const(v) => format!("{}'h{:x}", self.width, v),
            TKind::Select { base, hi, lo } => format!("{}[{}:{}]", base.canonical(), hi, lo),
            TKind::ArrayRead { array, index } => format!("{}[{}]", array, index.canonical()),
            TKind::Concat(parts) => format!(
                "{{{}}}",
                parts
                    .iter()
                    .map(|p| p.canonical())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            TKind::Zext(e) => format!("zext{}({})", self.width, e.canonical()),
            TKind::Not(e) => format!("~({})", e.canonical()),
            TKind::Binary(op, a, b) => {
                format!("({} {} {})", a.canonical(), op.symbol(), b.canonical())
            }
        }
    }
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalInfo {
    pub name: String,
    pub width: u32,
    pub depth: Option<u32>,
    /// Clusters declaring the signal, with the width each declared.
    pub decls: Vec<(String, u32, Option<u32>, Span)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RCondition {
    pub name: String,
    pub cluster: String,
    pub expr: Option<TExpr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RAssign {
    pub target: String,
    pub index: Option<TExpr>,
    pub expr: TExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RDatapath {
    pub name: String,
    pub cluster: String,
    pub assigns: Vec<RAssign>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RTrStmt {
    Apply(String),
    Drive(String),
    Nested(String),
    Guard {
        unique: bool,
        cond: String,
        body: Vec<RTrStmt>,
    },
    Clock {
        body: Vec<RTrStmt>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RTransaction {
    pub name: String,
    pub cluster: String,
    pub body: Vec<RTrStmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RStmt {
    pub kind: RStmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RStmtKind {
    Apply(String),
    Drive(String),
    /// Index into the owning sequence's states.
    Goto(usize),
    Wait {
        cond: String,
        body: Vec<RStmt>,
    },
    Random(String),
    Cover {
        name: String,
        conds: Vec<String>,
        exists: bool,
    },
    Call(String),
    Fork(Vec<Vec<RStmt>>),
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RState {
    pub name: String,
    pub body: Vec<RStmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RSequence {
    pub name: String,
    pub states: Vec<RState>,
    pub init: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RVtr {
    pub name: String,
    pub cluster: String,
    pub sequence: Option<RSequence>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterInfo {
    pub name: String,
    pub signals: Vec<String>,
    pub elements: Vec<(ElementKind, String)>,
    pub span: Span,
}

/// A name-resolved source unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedUnit {
    pub unit: SourceUnit,
    pub clusters: IndexMap<String, ClusterInfo>,
    pub signals: IndexMap<String, SignalInfo>,
    pub conditions: IndexMap<String, RCondition>,
    pub datapaths: IndexMap<String, RDatapath>,
    pub transactions: IndexMap<String, RTransaction>,
    pub vtrs: IndexMap<String, RVtr>,
}

impl ResolvedUnit {
    pub fn element_kind(&self, name: &str) -> Option<ElementKind> {
        if self.conditions.contains_key(name) {
            Some(ElementKind::Condition)
        } else if self.datapaths.contains_key(name) {
            Some(ElementKind::Datapath)
        } else if self.transactions.contains_key(name) {
            Some(ElementKind::Transaction)
        } else if self.vtrs.contains_key(name) {
            Some(ElementKind::Vtr)
        } else {
            None
        }
    }
}

/// Resolve with the default SVA lowering options.
pub fn resolve(unit: SourceUnit) -> Result<ResolvedUnit, Diagnostics> {
    resolve_with(unit, &crate::sva::LowerOptions::default())
}

pub fn resolve_with(
    unit: SourceUnit,
    sva_opts: &crate::sva::LowerOptions,
) -> Result<ResolvedUnit, Diagnostics> {
    let mut diags = Vec::new();

    // Gather every cluster, including inline join blocks, with SVA lowered in place.
    let mut clusters: Vec<ClusterDecl> = Vec::new();
    for c in &unit.clusters {
        clusters.push(c.clone());
    }
    for b in &unit.builds {
        collect_inline(b, &mut clusters);
    }
    let mut sva_vtrs = HashSet::new();
    for c in clusters.iter_mut() {
        let blocks = std::mem::take(&mut c.svas);
        for (i, block) in blocks.iter().enumerate() {
            match crate::sva::lower_block(block, &c.name.name, i, sva_opts) {
                Ok(lowered) => {
                    sva_vtrs.extend(lowered.vtrs.iter().map(|v| v.name.name.clone()));
                    merge_cluster(c, lowered)
                }
                Err(e) => diags.push(Diagnostic::new(
                    DiagnosticKind::Structure,
                    format!("sva: {e}"),
                    block.span,
                )),
            }
        }
    }
    // Checker VTRs only drive signals the design leaves undriven.
    let driven: HashSet<String> = clusters
        .iter()
        .flat_map(|c| c.datapaths.iter())
        .flat_map(|d| d.assigns.iter().map(|a| a.target.name.clone()))
        .collect();
    for c in clusters.iter_mut() {
        for v in c.vtrs.iter_mut().filter(|v| sva_vtrs.contains(&v.name.name)) {
            for st in v.sequence.iter_mut().flat_map(|s| s.states.iter_mut()) {
                st.body.retain(|s| {
                    !matches!(&s.kind, StmtKind::Random(sig) if driven.contains(&sig.name))
                });
            }
        }
    }

    let mut r = Resolver {
        signals: IndexMap::new(),
        elements: HashMap::new(),
        diags,
    };
    let mut infos = IndexMap::new();
    for c in &clusters {
        let mut info = ClusterInfo {
            name: c.name.name.clone(),
            span: c.span,
            ..Default::default()
        };
        for s in &c.signals {
            info.signals.push(s.name.name.clone());
            let entry = r
                .signals
                .entry(s.name.name.clone())
                .or_insert_with(|| SignalInfo {
                    name: s.name.name.clone(),
                    width: s.width,
                    depth: s.depth,
                    decls: Vec::new(),
                });
            entry
                .decls
                .push((c.name.name.clone(), s.width, s.depth, s.name.span));
        }
        for (kind, name) in cluster_elements(c) {
            info.elements.push((kind, name.name.clone()));
            if let Some((prev_cluster, _)) = r.elements.get(&name.name) {
                r.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    format!(
                        "element `{}` is declared in both `{}` and `{}`",
                        name.name, prev_cluster, c.name.name
                    ),
                    name.span,
                ));
            } else {
                r.elements
                    .insert(name.name.clone(), (c.name.name.clone(), kind));
            }
        }
        infos.insert(c.name.name.clone(), info);
    }
    for (name, info) in r.signals.iter() {
        if r.elements.contains_key(name) {
            r.diags.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                format!("signal `{name}` collides with an element name"),
                info.decls[0].3,
            ));
        }
    }

    let mut out = ResolvedUnit {
        unit: SourceUnit::default(),
        clusters: infos,
        signals: IndexMap::new(),
        conditions: IndexMap::new(),
        datapaths: IndexMap::new(),
        transactions: IndexMap::new(),
        vtrs: IndexMap::new(),
    };
    for c in &clusters {
        let cname = &c.name.name;
        for cond in &c.conditions {
            let expr = cond
                .expr
                .as_ref()
                .and_then(|e| r.expr(e, cname))
                .map(to_bool);
            out.conditions.insert(
                cond.name.name.clone(),
                RCondition {
                    name: cond.name.name.clone(),
                    cluster: cname.clone(),
                    expr,
                    span: cond.span,
                },
            );
        }
        for d in &c.datapaths {
            let assigns = d
                .assigns
                .iter()
                .filter_map(|a| r.assign(a, cname))
                .collect();
            out.datapaths.insert(
                d.name.name.clone(),
                RDatapath {
                    name: d.name.name.clone(),
                    cluster: cname.clone(),
                    assigns,
                    span: d.span,
                },
            );
        }
        for t in &c.transactions {
            let body = r.tr_body(&t.body);
            out.transactions.insert(
                t.name.name.clone(),
                RTransaction {
                    name: t.name.name.clone(),
                    cluster: cname.clone(),
                    body,
                    span: t.span,
                },
            );
        }
        for v in &c.vtrs {
            let sequence = v.sequence.as_ref().and_then(|s| r.sequence(s, &v.name));
            out.vtrs.insert(
                v.name.name.clone(),
                RVtr {
                    name: v.name.name.clone(),
                    cluster: cname.clone(),
                    sequence,
                    span: v.span,
                },
            );
        }
    }
    r.check_transaction_cycles(&out);
    r.check_vtr_recursion(&out);

    if !r.diags.is_empty() {
        return Err(Diagnostics(r.diags));
    }
    out.signals = r.signals;
    out.unit = unit;
    Ok(out)
}

fn collect_inline(b: &BuildDecl, out: &mut Vec<ClusterDecl>) {
    for item in &b.items {
        match item {
            BuildItem::Instance(child) => collect_inline(child, out),
            BuildItem::Join {
                src: JoinSource::Inline(c),
                ..
            } => out.push(c.clone()),
            BuildItem::Join { .. } => {}
        }
    }
}

fn merge_cluster(into: &mut ClusterDecl, from: ClusterDecl) {
    into.signals.extend(from.signals);
    into.conditions.extend(from.conditions);
    into.datapaths.extend(from.datapaths);
    into.transactions.extend(from.transactions);
    into.vtrs.extend(from.vtrs);
}

fn cluster_elements(c: &ClusterDecl) -> Vec<(ElementKind, &Ident)> {
    let mut v = Vec::new();
    v.extend(c.conditions.iter().map(|x| (ElementKind::Condition, &x.name)));
    v.extend(c.datapaths.iter().map(|x| (ElementKind::Datapath, &x.name)));
    v.extend(c.transactions.iter().map(|x| (ElementKind::Transaction, &x.name)));
    v.extend(c.vtrs.iter().map(|x| (ElementKind::Vtr, &x.name)));
    v
}

struct Resolver {
    signals: IndexMap<String, SignalInfo>,
    elements: HashMap<String, (String, ElementKind)>,
    diags: Vec<Diagnostic>,
}

impl Resolver {
    fn err(&mut self, kind: DiagnosticKind, msg: String, span: Span) {
        self.diags.push(Diagnostic::new(kind, msg, span));
    }

    fn is_kind(&self, name: &str, kind: ElementKind) -> bool {
        matches!(self.elements.get(name), Some((_, k)) if *k == kind)
    }

    fn undeclared(&mut self, name: &str, span: Span) {
        let noun = ElementKind::from_name(name)
            .map(|k| k.noun())
            .unwrap_or("signal");
        self.err(
            DiagnosticKind::Undeclared,
            format!("undeclared {noun} `{name}`"),
            span,
        );
    }

    /// Width and depth of a signal as seen from `cluster`.
    fn signal_shape(&mut self, name: &str, cluster: &str, span: Span) -> Option<(u32, Option<u32>)> {
        let Some(info) = self.signals.get(name) else {
            self.undeclared(name, span);
            return None;
        };
        if let Some((_, w, d, _)) = info.decls.iter().find(|(c, ..)| c == cluster) {
            return Some((*w, *d));
        }
        let shapes: HashSet<(u32, Option<u32>)> =
            info.decls.iter().map(|(_, w, d, _)| (*w, *d)).collect();
        if shapes.len() > 1 {
            self.err(
                DiagnosticKind::Width,
                format!("signal `{name}` has conflicting declarations"),
                span,
            );
            return None;
        }
        Some((info.width, info.depth))
    }

    fn expr(&mut self, e: &Expr, cluster: &str) -> Option<TExpr> {
        let span = e.span;
        match &e.kind {
            ExprKind::Ident(name) => {
                if self.is_kind(name, ElementKind::Condition) {
                    return Some(TExpr {
                        kind: TKind::Signal(name.clone()),
                        width: 1,
                        span,
                    });
                }
                if self.elements.contains_key(name) {
                    self.err(
                        DiagnosticKind::Structure,
                        format!("`{name}` is not a signal or condition"),
                        span,
                    );
                    return None;
                }
                let (width, depth) = self.signal_shape(name, cluster, span)?;
                if depth.is_some() {
                    self.err(
                        DiagnosticKind::Structure,
                        format!("array `{name}` must be indexed"),
                        span,
                    );
                    return None;
                }
                Some(TExpr {
                    kind: TKind::Signal(name.clone()),
                    width,
                    span,
                })
            }
            ExprKind::Literal { width, value } => {
                let w = width.unwrap_or_else(|| (64 - value.leading_zeros()).max(1));
                Some(TExpr::constant(*value, w, span))
            }
            ExprKind::Index { base, index } => {
                let (width, depth) = self.signal_shape(&base.name, cluster, base.span)?;
                if depth.is_some() {
                    let index = self.expr(index, cluster)?;
                    return Some(TExpr {
                        kind: TKind::ArrayRead {
                            array: base.name.clone(),
                            index: Box::new(index),
                        },
                        width,
                        span,
                    });
                }
                let bit = self.const_bound(index)?;
                self.select(base, width, bit, bit, span)
            }
            ExprKind::Slice { base, hi, lo } => {
                let (width, depth) = self.signal_shape(&base.name, cluster, base.span)?;
                if depth.is_some() {
                    self.err(
                        DiagnosticKind::Structure,
                        format!("part-select on array `{}`", base.name),
                        span,
                    );
                    return None;
                }
                let hi = self.const_bound(hi)?;
                let lo = self.const_bound(lo)?;
                self.select(base, width, hi, lo, span)
            }
            ExprKind::Concat(parts) => {
                let parts: Vec<TExpr> = parts
                    .iter()
                    .map(|p| self.expr(p, cluster))
                    .collect::<Option<_>>()?;
                let width: u32 = parts.iter().map(|p| p.width).sum();
                if width > 64 {
                    self.err(
                        DiagnosticKind::Width,
                        "concatenation wider than 64 bits".into(),
                        span,
                    );
                    return None;
                }
                Some(TExpr {
                    kind: TKind::Concat(parts),
                    width,
                    span,
                })
            }
            ExprKind::Unary(UnOp::Not, inner) => {
                let inner = self.expr(inner, cluster)?;
                Some(TExpr {
                    width: inner.width,
                    kind: TKind::Not(Box::new(inner)),
                    span,
                })
            }
            ExprKind::Unary(UnOp::LogicNot, inner) => {
                let inner = self.expr(inner, cluster)?;
                Some(not1(to_bool(inner), span))
            }
            ExprKind::Binary(op, l, r) => {
                let l = self.expr(l, cluster);
                let r = self.expr(r, cluster);
                let (l, r) = (l?, r?);
                Some(binary(*op, l, r, span))
            }
        }
    }

    fn const_bound(&mut self, e: &Expr) -> Option<u32> {
        match e.kind {
            ExprKind::Literal { value, .. } if value <= 64 => Some(value as u32),
            _ => {
                self.err(
                    DiagnosticKind::NonConstant,
                    "part-select bounds must be constant".into(),
                    e.span,
                );
                None
            }
        }
    }

    fn select(&mut self, base: &Ident, width: u32, hi: u32, lo: u32, span: Span) -> Option<TExpr> {
        if hi < lo || hi >= width {
            self.err(
                DiagnosticKind::Width,
                format!(
                    "select [{hi}:{lo}] out of range for `{}` of width {width}",
                    base.name
                ),
                span,
            );
            return None;
        }
        Some(TExpr {
            kind: TKind::Select {
                base: Box::new(TExpr {
                    kind: TKind::Signal(base.name.clone()),
                    width,
                    span: base.span,
                }),
                hi,
                lo,
            },
            width: hi - lo + 1,
            span,
        })
    }

    fn assign(&mut self, a: &Assign, cluster: &str) -> Option<RAssign> {
        if self.elements.contains_key(&a.target.name) {
            self.err(
                DiagnosticKind::Structure,
                format!("cannot assign to element `{}`", a.target.name),
                a.target.span,
            );
            return None;
        }
        let (width, depth) = self.signal_shape(&a.target.name, cluster, a.target.span)?;
        let index = match (&a.index, depth) {
            (Some(i), Some(_)) => Some(self.expr(i, cluster)?),
            (None, None) => None,
            (Some(_), None) => {
                self.err(
                    DiagnosticKind::Structure,
                    format!("indexed assignment to non-array `{}`", a.target.name),
                    a.span,
                );
                return None;
            }
            (None, Some(_)) => {
                self.err(
                    DiagnosticKind::Structure,
                    format!("assignment to array `{}` needs an index", a.target.name),
                    a.span,
                );
                return None;
            }
        };
        let expr = self.expr(&a.expr, cluster)?;
        if expr.width > width {
            self.err(
                DiagnosticKind::Width,
                format!(
                    "width mismatch: {}-bit value assigned to {}-bit `{}`",
                    expr.width, width, a.target.name
                ),
                a.span,
            );
            return None;
        }
        Some(RAssign {
            target: a.target.name.clone(),
            index,
            expr: zext(expr, width),
            span: a.span,
        })
    }

    fn tr_body(&mut self, body: &[TrStmt]) -> Vec<RTrStmt> {
        let mut out = Vec::new();
        for s in body {
            match s {
                TrStmt::Ref(n) => match self.elements.get(&n.name).map(|(_, k)| *k) {
                    Some(ElementKind::Datapath) => out.push(RTrStmt::Apply(n.name.clone())),
                    Some(ElementKind::Condition) => out.push(RTrStmt::Drive(n.name.clone())),
                    Some(ElementKind::Transaction) => out.push(RTrStmt::Nested(n.name.clone())),
                    Some(ElementKind::Vtr) => self.err(
                        DiagnosticKind::Structure,
                        format!("transaction body cannot call VTR `{}`", n.name),
                        n.span,
                    ),
                    None => self.undeclared(&n.name, n.span),
                },
                TrStmt::Guard {
                    unique, cond, body, ..
                } => {
                    if !self.is_kind(&cond.name, ElementKind::Condition) {
                        self.undeclared(&cond.name, cond.span);
                    }
                    let body = self.tr_body(body);
                    out.push(RTrStmt::Guard {
                        unique: *unique,
                        cond: cond.name.clone(),
                        body,
                    });
                }
                TrStmt::Clock { edge, body, .. } => {
                    if edge.name != "e_clk" {
                        self.err(
                            DiagnosticKind::Structure,
                            format!("unknown clock edge `{}` (only e_clk is supported)", edge.name),
                            edge.span,
                        );
                    }
                    let body = self.tr_body(body);
                    out.push(RTrStmt::Clock { body });
                }
            }
        }
        out
    }

    fn sequence(&mut self, s: &SequenceDecl, vtr: &Ident) -> Option<RSequence> {
        let names: HashMap<&str, usize> = s
            .states
            .iter()
            .enumerate()
            .map(|(i, st)| (st.name.name.as_str(), i))
            .collect();
        let Some(&init) = names.get("init") else {
            self.err(
                DiagnosticKind::Structure,
                format!("sequence `{}` has no init state", s.name.name),
                s.span,
            );
            return None;
        };
        let states: Vec<RState> = s
            .states
            .iter()
            .map(|st| RState {
                name: st.name.name.clone(),
                body: self.stmts(&st.body, &names, false),
            })
            .collect();
        let seq = RSequence {
            name: s.name.name.clone(),
            states,
            init,
        };
        if !exit_reachable(&seq) {
            self.err(
                DiagnosticKind::Structure,
                format!(
                    "sequence `{}` in `{}` cannot reach exit from init",
                    s.name.name, vtr.name
                ),
                s.span,
            );
        }
        Some(seq)
    }

    fn stmts(&mut self, body: &[Stmt], states: &HashMap<&str, usize>, in_fork: bool) -> Vec<RStmt> {
        let mut out = Vec::new();
        for s in body {
            let kind = match &s.kind {
                StmtKind::Name(n) => match self.elements.get(&n.name).map(|(_, k)| *k) {
                    Some(ElementKind::Datapath) => RStmtKind::Apply(n.name.clone()),
                    Some(ElementKind::Condition) => RStmtKind::Drive(n.name.clone()),
                    Some(ElementKind::Vtr) => RStmtKind::Call(n.name.clone()),
                    Some(ElementKind::Transaction) => {
                        self.err(
                            DiagnosticKind::Structure,
                            format!("transaction `{}` cannot be invoked from a sequence", n.name),
                            n.span,
                        );
                        continue;
                    }
                    None => match states.get(n.name.as_str()) {
                        Some(&i) if !in_fork => RStmtKind::Goto(i),
                        Some(_) => {
                            self.err(
                                DiagnosticKind::Structure,
                                "state transition inside a fork branch".into(),
                                n.span,
                            );
                            continue;
                        }
                        None => {
                            if ElementKind::from_name(&n.name).is_some() {
                                self.undeclared(&n.name, n.span);
                            } else {
                                self.err(
                                    DiagnosticKind::Undeclared,
                                    format!("undeclared state `{}`", n.name),
                                    n.span,
                                );
                            }
                            continue;
                        }
                    },
                },
                StmtKind::Wait { cond, body } => {
                    if !self.is_kind(&cond.name, ElementKind::Condition) {
                        self.undeclared(&cond.name, cond.span);
                    }
                    RStmtKind::Wait {
                        cond: cond.name.clone(),
                        body: self.stmts(body, states, in_fork),
                    }
                }
                StmtKind::Random(sig) => {
                    match self.signals.get(&sig.name) {
                        Some(info) if info.depth.is_none() => {}
                        Some(_) => self.err(
                            DiagnosticKind::Structure,
                            format!("random on array `{}`", sig.name),
                            sig.span,
                        ),
                        None => self.undeclared(&sig.name, sig.span),
                    }
                    RStmtKind::Random(sig.name.clone())
                }
                StmtKind::Cover {
                    name,
                    conds,
                    exists,
                } => {
                    for c in conds {
                        if !self.is_kind(&c.name, ElementKind::Condition) {
                            if self.elements.contains_key(&c.name) || self.signals.contains_key(&c.name) {
                                self.err(
                                    DiagnosticKind::Structure,
                                    format!("cover body may only reference conditions, found `{}`", c.name),
                                    c.span,
                                );
                            } else {
                                self.undeclared(&c.name, c.span);
                            }
                        }
                    }
                    RStmtKind::Cover {
                        name: name.name.clone(),
                        conds: conds.iter().map(|c| c.name.clone()).collect(),
                        exists: *exists,
                    }
                }
                StmtKind::Fork(branches) => RStmtKind::Fork(
                    branches
                        .iter()
                        .map(|b| self.stmts(b, states, true))
                        .collect(),
                ),
                StmtKind::Exit => {
                    if in_fork {
                        self.err(
                            DiagnosticKind::Structure,
                            "exit inside a fork branch".into(),
                            s.span,
                        );
                        continue;
                    }
                    RStmtKind::Exit
                }
            };
            out.push(RStmt { kind, span: s.span });
        }
        out
    }

    fn check_transaction_cycles(&mut self, u: &ResolvedUnit) {
        fn nested(body: &[RTrStmt], out: &mut Vec<String>) {
            for s in body {
                match s {
                    RTrStmt::Nested(n) => out.push(n.clone()),
                    RTrStmt::Guard { body, .. } | RTrStmt::Clock { body } => nested(body, out),
                    _ => {}
                }
            }
        }
        let edges: HashMap<&str, Vec<String>> = u
            .transactions
            .iter()
            .map(|(n, t)| {
                let mut v = Vec::new();
                nested(&t.body, &mut v);
                (n.as_str(), v)
            })
            .collect();
        if let Some(cyc) = find_cycle(&edges) {
            let span = u.transactions[&cyc[0]].span;
            self.err(
                DiagnosticKind::Structure,
                format!("recursive transaction nesting: {}", cyc.join(" -> ")),
                span,
            );
        }
    }

    fn check_vtr_recursion(&mut self, u: &ResolvedUnit) {
        let edges: HashMap<&str, Vec<String>> = u
            .vtrs
            .iter()
            .map(|(n, v)| (n.as_str(), vtr_callees(v)))
            .collect();
        if let Some(cyc) = find_cycle(&edges) {
            let span = u.vtrs[&cyc[0]].span;
            self.err(
                DiagnosticKind::Structure,
                format!("recursive VTR call: {}", cyc.join(" -> ")),
                span,
            );
        }
    }
}

/// VTRs called anywhere in a VTR's sequence, in first-occurrence order.
pub fn vtr_callees(v: &RVtr) -> Vec<String> {
    fn walk(body: &[RStmt], out: &mut Vec<String>) {
        for s in body {
            match &s.kind {
                RStmtKind::Call(n) => {
                    if !out.contains(n) {
                        out.push(n.clone())
                    }
                }
                RStmtKind::Wait { body, .. } => walk(body, out),
                RStmtKind::Fork(bs) => bs.iter().for_each(|b| walk(b, out)),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    if let Some(seq) = &v.sequence {
        for st in &seq.states {
            walk(&st.body, &mut out);
        }
    }
    out
}

fn find_cycle(edges: &HashMap<&str, Vec<String>>) -> Option<Vec<String>> {
    fn dfs<'a>(
        n: &'a str,
        edges: &'a HashMap<&str, Vec<String>>,
        stack: &mut Vec<&'a str>,
        done: &mut HashSet<&'a str>,
    ) -> Option<Vec<String>> {
        if let Some(pos) = stack.iter().position(|s| *s == n) {
            let mut cyc: Vec<String> = stack[pos..].iter().map(|s| s.to_string()).collect();
            cyc.push(n.to_string());
            return Some(cyc);
        }
        if done.contains(n) {
            return None;
        }
        stack.push(n);
        for m in edges.get(n).into_iter().flatten() {
            if let Some((k, _)) = edges.get_key_value(m.as_str()) {
                if let Some(c) = dfs(k, edges, stack, done) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        done.insert(n);
        None
    }
    let mut keys: Vec<&str> = edges.keys().copied().collect();
    keys.sort();
    let mut done = HashSet::new();
    for k in keys {
        if let Some(c) = dfs(k, edges, &mut Vec::new(), &mut done) {
            return Some(c);
        }
    }
    None
}

fn exit_reachable(seq: &RSequence) -> bool {
    fn scan(body: &[RStmt], gotos: &mut Vec<usize>, exits: &mut bool) {
        for s in body {
            match &s.kind {
                RStmtKind::Goto(i) => gotos.push(*i),
                RStmtKind::Exit => *exits = true,
                RStmtKind::Wait { body, .. } => scan(body, gotos, exits),
                RStmtKind::Fork(bs) => bs.iter().for_each(|b| scan(b, gotos, exits)),
                _ => {}
            }
        }
    }
    let mut seen = vec![false; seq.states.len()];
    let mut work = vec![seq.init];
    while let Some(i) = work.pop() {
        if std::mem::replace(&mut seen[i], true) {
            continue;
        }
        let mut gotos = Vec::new();
        let mut exits = false;
        scan(&seq.states[i].body, &mut gotos, &mut exits);
        if exits {
            return true;
        }
        work.extend(gotos);
    }
    false
}

pub fn zext(e: TExpr, width: u32) -> TExpr {
    if e.width >= width {
        return e;
    }
    if let TKind::Const(v) = e.kind {
        return TExpr::constant(v, width, e.span);
    }
    let span = e.span;
    TExpr {
        kind: TKind::Zext(Box::new(e)),
        width,
        span,
    }
}

fn to_bool(e: TExpr) -> TExpr {
    if e.width == 1 {
        return e;
    }
    let span = e.span;
    let zero = TExpr::constant(0, e.width, span);
    TExpr {
        kind: TKind::Binary(TBin::Ne, Box::new(e), Box::new(zero)),
        width: 1,
        span,
    }
}

fn not1(e: TExpr, span: Span) -> TExpr {
    TExpr {
        kind: TKind::Not(Box::new(e)),
        width: 1,
        span,
    }
}

fn binary(op: BinOp, l: TExpr, r: TExpr, span: Span) -> TExpr {
    let tb = match op {
        BinOp::LogicAnd | BinOp::LogicOr => {
            let (l, r) = (to_bool(l), to_bool(r));
            let op = if op == BinOp::LogicAnd { TBin::And } else { TBin::Or };
            return TExpr {
                kind: TKind::Binary(op, Box::new(l), Box::new(r)),
                width: 1,
                span,
            };
        }
        BinOp::Shl | BinOp::Shr => {
            let op = if op == BinOp::Shl { TBin::Shl } else { TBin::Shr };
            return TExpr {
                width: l.width,
                kind: TKind::Binary(op, Box::new(l), Box::new(r)),
                span,
            };
        }
        BinOp::Add => TBin::Add,
        BinOp::Sub => TBin::Sub,
        BinOp::And => TBin::And,
        BinOp::Or => TBin::Or,
        BinOp::Xor => TBin::Xor,
        BinOp::Eq => TBin::Eq,
        BinOp::Ne => TBin::Ne,
        BinOp::Lt => TBin::Lt,
    };
    let w = l.width.max(r.width);
    let (l, r) = (zext(l, w), zext(r, w));
    TExpr {
        kind: TKind::Binary(tb, Box::new(l), Box::new(r)),
        width: if tb.is_comparison() { 1 } else { w },
        span,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse;

    fn resolve_src(src: &str) -> Result<ResolvedUnit, Diagnostics> {
        resolve(parse(src).unwrap())
    }

    #[test]
    fn undeclared_condition_yields_single_diagnostic() {
        let err = resolve_src("cluster a { tr_x { @c_missing { } } }").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].kind, DiagnosticKind::Undeclared);
        assert!(err.0[0].message.contains("undeclared condition `c_missing`"));
    }

    #[test]
    fn comparison_zero_extends_narrow_operand() {
        let u = resolve_src("cluster a { signal x[8]; c_k { if (x == 3'h5) this; } }").unwrap();
        let e = u.conditions["c_k"].expr.as_ref().unwrap();
        let TKind::Binary(TBin::Eq, l, r) = &e.kind else {
            panic!("{e:?}")
        };
        assert_eq!((e.width, l.width, r.width), (1, 8, 8));
    }

    #[test]
    fn assignment_truncation_is_rejected() {
        let err =
            resolve_src("cluster a { signal x[8]; signal y[4]; d_y { y = x; } }").unwrap_err();
        assert_eq!(err.0[0].kind, DiagnosticKind::Width);
    }

    #[test]
    fn non_constant_part_select_is_rejected() {
        let err = resolve_src("cluster a { signal x[8]; signal i[3]; c_k { if (x[i]) this; } }")
            .unwrap_err();
        assert_eq!(err.0[0].kind, DiagnosticKind::NonConstant);
    }

    #[test]
    fn exit_must_be_reachable() {
        let err = resolve_src(
            "cluster a { vtr_v { sequence s { init: { s2; } s2: { init; } } } }",
        )
        .unwrap_err();
        assert!(err.0[0].message.contains("cannot reach exit"));
    }

    #[test]
    fn recursive_vtr_calls_are_rejected() {
        let err = resolve_src(
            "cluster a { vtr_a { sequence s { init: { vtr_b; exit; } } } vtr_b { sequence s { init: { vtr_a; exit; } } } }",
        )
        .unwrap_err();
        assert!(err.0[0].message.contains("recursive VTR call"));
    }

    #[test]
    fn resolve_is_deterministic() {
        let src = "cluster a { signal x[8]; c_k { if (x < 8'h10) this; } d_x { x = x + 1; } }";
        assert_eq!(resolve_src(src).unwrap(), resolve_src(src).unwrap());
    }
}
