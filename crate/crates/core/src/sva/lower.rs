//! Lowering of SVA properties onto cluster elements.
//!
//! Each property becomes a small checker: every boolean of the property is
//! a condition, its past values are kept in 1-bit history registers, and a
//! saturating age counter masks checks that would look before cycle 0. The
//! history registers hold one stage per cycle of the property span, so every
//! overlapping activation is tracked by its own stage. A generated VTR drives
//! the referenced design inputs with fresh symbolic values for a fixed number
//! of cycles and covers the checker verdict in every cycle.

use std::collections::BTreeMap;

use crate::frontend::ast::*;
use crate::frontend::Span;

use super::parse::parse_sva_at;
use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LowerOptions {
    /// Maximum number of simultaneously active checker instances.
    pub bound: u32,
    /// Number of cycles driven by each generated VTR.
    pub trace_len: u32,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions {
            bound: 4,
            trace_len: 8,
        }
    }
}

/// Parse and lower one `sva { .. }` block of `cluster`.
pub fn lower_block(
    block: &SvaBlock,
    cluster: &str,
    index: usize,
    opts: &LowerOptions,
) -> Result<ClusterDecl, SvaError> {
    let unit = parse_sva_at(&block.text, block.body_span)?;
    let prefix = format!("{cluster}_{index}");
    lower_with_span(&unit, &prefix, block.span, opts)
}

/// Lower a parsed unit to a cluster named `sva_<prefix>`.
pub fn lower_to_vtr(unit: &SvaUnit, prefix: &str, opts: &LowerOptions) -> Result<ClusterDecl, SvaError> {
    lower_with_span(unit, prefix, Span::default(), opts)
}

fn lower_with_span(
    unit: &SvaUnit,
    prefix: &str,
    span: Span,
    opts: &LowerOptions,
) -> Result<ClusterDecl, SvaError> {
    let mut out = ClusterDecl::empty(
        Ident::new(format!("sva_{prefix}"), span),
        ClusterStyle::Keyword,
        span,
    );
    for (i, prop) in unit.props.iter().enumerate() {
        let label = prop.label.clone().unwrap_or_else(|| format!("{prefix}_{i}"));
        Lowering {
            label,
            span,
            out: &mut out,
            opts,
        }
        .property(prop)?;
    }
    Ok(out)
}

struct Lowering<'a> {
    label: String,
    span: Span,
    out: &'a mut ClusterDecl,
    opts: &'a LowerOptions,
}

/// A boolean at an absolute cycle offset from the activation start.
struct Elem<'e> {
    id: usize,
    offset: u32,
    expr: &'e Expr,
}

impl Lowering<'_> {
    fn id(&self, name: impl Into<String>) -> Ident {
        Ident::new(name, self.span)
    }

    fn e(&self, kind: ExprKind) -> Expr {
        Expr {
            kind,
            span: self.span,
        }
    }

    fn ident(&self, n: String) -> Expr {
        self.e(ExprKind::Ident(n))
    }

    fn bin(&self, op: BinOp, a: Expr, b: Expr) -> Expr {
        self.e(ExprKind::Binary(op, Box::new(a), Box::new(b)))
    }

    fn lnot(&self, a: Expr) -> Expr {
        self.e(ExprKind::Unary(UnOp::LogicNot, Box::new(a)))
    }

    fn all(&self, terms: Vec<Expr>) -> Expr {
        terms
            .into_iter()
            .reduce(|a, b| self.bin(BinOp::LogicAnd, a, b))
            .unwrap_or_else(|| self.e(ExprKind::Literal {
                width: Some(1),
                value: 1,
            }))
    }

    fn bool_cond(&self, id: usize) -> String {
        format!("c_sva_{}_b{id}", self.label)
    }

    fn hist(&self, id: usize, k: u32) -> String {
        format!("sva_{}_b{id}_d{k}", self.label)
    }

    fn age(&self) -> String {
        format!("sva_{}_age", self.label)
    }

    /// Value of boolean `id` `k` cycles ago; records the needed history depth.
    fn past(&self, depth: &mut BTreeMap<usize, u32>, id: usize, k: u32) -> Expr {
        let d = depth.entry(id).or_insert(0);
        *d = (*d).max(k);
        if k == 0 {
            self.ident(self.bool_cond(id))
        } else {
            self.ident(self.hist(id, k))
        }
    }

    fn valid(&self, span_len: u32, d: u32) -> Option<Expr> {
        (d > 0 && span_len > 0).then(|| {
            let lit = self.e(ExprKind::Literal {
                width: None,
                value: d as u64,
            });
            self.lnot(self.bin(BinOp::Lt, self.ident(self.age()), lit))
        })
    }

    fn property(mut self, prop: &SvaProperty) -> Result<(), SvaError> {
        let (ante, cons): (Vec<Elem>, Vec<Elem>) = match &prop.body {
            PropBody::Seq(s) => (Vec::new(), number(s, 0, 0)),
            PropBody::Implication {
                ante,
                overlapping,
                cons,
            } => {
                let a = number(ante, 0, 0);
                let base = ante.length() + u32::from(!overlapping);
                let c = number(cons, a.len(), base);
                (a, c)
            }
        };
        let span_len = ante
            .iter()
            .chain(&cons)
            .map(|e| e.offset)
            .max()
            .unwrap_or(0);
        let needed = span_len + 1;
        if needed > self.opts.bound {
            return Err(SvaError::Bound {
                label: self.label.clone(),
                needed,
                bound: self.opts.bound,
            });
        }

        let mut depth: BTreeMap<usize, u32> = BTreeMap::new();
        let verdict = match prop.kind {
            SvaKind::Assert => {
                let mut fails = Vec::new();
                for (j, c) in cons.iter().enumerate() {
                    let d = c.offset;
                    let mut terms: Vec<Expr> = self.valid(span_len, d).into_iter().collect();
                    for a in &ante {
                        terms.push(self.past(&mut depth, a.id, d - a.offset));
                    }
                    for p in &cons[..j] {
                        terms.push(self.past(&mut depth, p.id, d - p.offset));
                    }
                    let now = self.past(&mut depth, c.id, 0);
                    terms.push(self.lnot(now));
                    fails.push(self.all(terms));
                }
                let fail = fails
                    .into_iter()
                    .reduce(|a, b| self.bin(BinOp::LogicOr, a, b))
                    .expect("consequent is never empty");
                let fail_name = format!("c_sva_{}_fail", self.label);
                let ok_name = format!("c_sva_{}_ok", self.label);
                let ok_expr = self.lnot(self.ident(fail_name.clone()));
                self.condition(fail_name, fail);
                self.condition(ok_name.clone(), ok_expr);
                ok_name
            }
            SvaKind::Cover => {
                let d = span_len;
                let mut terms: Vec<Expr> = self.valid(span_len, d).into_iter().collect();
                for e in ante.iter().chain(&cons) {
                    terms.push(self.past(&mut depth, e.id, d - e.offset));
                }
                let name = format!("c_sva_{}_match", self.label);
                let all = self.all(terms);
                self.condition(name.clone(), all);
                name
            }
        };

        for e in ante.iter().chain(&cons) {
            let c = e.expr.clone();
            self.condition(self.bool_cond(e.id), c);
        }
        self.registers(&depth, span_len);
        self.vtr(prop, ante.iter().chain(&cons).map(|e| e.expr), verdict);
        Ok(())
    }

    fn condition(&mut self, name: String, expr: Expr) {
        let c = ConditionDecl {
            name: self.id(name),
            expr: Some(expr),
            span: self.span,
        };
        self.out.conditions.push(c);
    }

    fn registers(&mut self, depth: &BTreeMap<usize, u32>, span_len: u32) {
        let mut assigns = Vec::new();
        let assign = |s: &Self, target: String, expr: Expr| Assign {
            target: s.id(target),
            index: None,
            expr,
            span: s.span,
        };
        for (&id, &k) in depth {
            for i in 1..=k {
                self.out.signals.push(SignalDecl {
                    name: self.id(self.hist(id, i)),
                    width: 1,
                    depth: None,
                    span: self.span,
                });
                let src = if i == 1 {
                    self.ident(self.bool_cond(id))
                } else {
                    self.ident(self.hist(id, i - 1))
                };
                assigns.push(assign(self, self.hist(id, i), src));
            }
        }
        if span_len > 0 {
            let width = 32 - span_len.leading_zeros();
            self.out.signals.push(SignalDecl {
                name: self.id(self.age()),
                width,
                depth: None,
                span: self.span,
            });
            let lit = self.e(ExprKind::Literal {
                width: Some(width),
                value: span_len as u64,
            });
            let inc = self.bin(BinOp::Ne, self.ident(self.age()), lit);
            let next = self.bin(BinOp::Add, self.ident(self.age()), inc);
            assigns.push(assign(self, self.age(), next));
        }
        if assigns.is_empty() {
            return;
        }
        let dp = format!("d_sva_{}_step", self.label);
        self.out.datapaths.push(DatapathDecl {
            name: self.id(dp.clone()),
            assigns,
            span: self.span,
        });
        let tr = TransactionDecl {
            name: self.id(format!("tr_sva_{}", self.label)),
            body: vec![TrStmt::Clock {
                edge: self.id("e_clk"),
                body: vec![TrStmt::Ref(self.id(dp))],
                span: self.span,
            }],
            span: self.span,
        };
        self.out.transactions.push(tr);
    }

    fn vtr<'e>(&mut self, prop: &SvaProperty, exprs: impl Iterator<Item = &'e Expr>, verdict: String) {
        let mut inputs: Vec<String> = Vec::new();
        for e in exprs {
            collect_signals(e, &mut inputs);
        }
        let stmt = |kind| Stmt {
            kind,
            span: self.span,
        };
        let n = self.opts.trace_len.max(1);
        let state_name = |i: u32| if i == 0 { "init".to_string() } else { format!("t{i}") };
        let mut states = Vec::new();
        for i in 0..n {
            let mut body: Vec<Stmt> = inputs
                .iter()
                .map(|s| stmt(StmtKind::Random(self.id(s.clone()))))
                .collect();
            body.push(stmt(StmtKind::Cover {
                name: self.id(format!("cp_{}", self.label)),
                conds: vec![self.id(verdict.clone())],
                exists: prop.kind == SvaKind::Cover,
            }));
            body.push(if i + 1 == n {
                stmt(StmtKind::Exit)
            } else {
                stmt(StmtKind::Name(self.id(state_name(i + 1))))
            });
            states.push(StateDecl {
                name: self.id(state_name(i)),
                body,
                span: self.span,
            });
        }
        self.out.vtrs.push(VtrDecl {
            name: self.id(format!("vtr_sva_{}", self.label)),
            sequence: Some(SequenceDecl {
                name: self.id(format!("sva_{}", self.label)),
                states,
                span: self.span,
            }),
            span: self.span,
        });
    }
}

fn number(seq: &SvaSeq, first_id: usize, base: u32) -> Vec<Elem<'_>> {
    seq.offsets()
        .into_iter()
        .zip(&seq.elems)
        .enumerate()
        .map(|(i, (o, e))| Elem {
            id: first_id + i,
            offset: base + o,
            expr: &e.expr,
        })
        .collect()
}

/// Signal names read by `e`, excluding conditions, in first-occurrence order.
fn collect_signals(e: &Expr, out: &mut Vec<String>) {
    let mut push = |n: &str| {
        if !n.starts_with("c_") && !out.iter().any(|x| x == n) {
            out.push(n.to_string());
        }
    };
    match &e.kind {
        ExprKind::Ident(n) => push(n),
        ExprKind::Literal { .. } => {}
        ExprKind::Index { base, index } => {
            push(&base.name);
            collect_signals(index, out);
        }
        ExprKind::Slice { base, .. } => push(&base.name),
        ExprKind::Concat(parts) => parts.iter().for_each(|p| collect_signals(p, out)),
        ExprKind::Unary(_, a) => collect_signals(a, out),
        ExprKind::Binary(_, a, b) => {
            collect_signals(a, out);
            collect_signals(b, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::pretty::print_cluster;

    #[test]
    fn request_ack_lowering_shape() {
        let u = parse_sva("assert property (@(posedge clk) req |-> ##1 ack);").unwrap();
        let c = lower_to_vtr(&u, "t", &LowerOptions::default()).unwrap();
        let text = print_cluster(&c);
        assert!(text.contains("c_sva_t_0_fail { if (!(sva_t_0_age < 1) && sva_t_0_b0_d1 && !c_sva_t_0_b1) this; }"), "{text}");
        assert_eq!(c.vtrs.len(), 1);
        assert_eq!(c.vtrs[0].sequence.as_ref().unwrap().states.len(), 8);
    }

    #[test]
    fn activation_bound_is_enforced() {
        let u = parse_sva("assert property (@(posedge clk) a ##2 b |=> ##2 c);").unwrap();
        let e = lower_to_vtr(&u, "t", &LowerOptions::default()).unwrap_err();
        assert!(matches!(e, SvaError::Bound { needed: 6, bound: 4, .. }));
        let opts = LowerOptions {
            bound: 6,
            ..Default::default()
        };
        assert!(lower_to_vtr(&u, "t", &opts).is_ok());
    }
}
