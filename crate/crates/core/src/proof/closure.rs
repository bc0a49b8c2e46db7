//! Dependency closures of VTRs and their content hashes.
//!
//! The closure of a VTR is every element its execution can observe:
//! called VTRs, applied datapaths, conditions it drives, waits on or
//! covers, the signals those read, and every transaction that writes or
//! drives something in the closure. Each element is serialized from the
//! IR, never from source text, so formatting and comments do not matter.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use crate::elab::{visit_stmts, ActionKind, DesignIR, SignalKind};
use crate::frontend::resolve::{RStmt, RStmtKind, RTrStmt, RVtr, TExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Vtr,
    Condition,
    Datapath,
    Transaction,
    Signal,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node {
    pub kind: NodeKind,
    pub name: String,
}

impl Node {
    fn new(kind: NodeKind, name: &str) -> Self {
        Node {
            kind,
            name: name.to_string(),
        }
    }
}

/// Settings that change verdicts and therefore belong in every hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashParams {
    pub budget_bits: u32,
    pub max_cycles: u32,
    pub tool_version: String,
}

impl Default for HashParams {
    fn default() -> Self {
        HashParams {
            budget_bits: crate::sym::DEFAULT_BUDGET_BITS,
            max_cycles: crate::sym::ExecConfig::default().max_cycles,
            tool_version: crate::VERSION.to_string(),
        }
    }
}

/// Precomputed reverse edges shared by every closure query on one IR.
pub struct DepGraph<'a> {
    ir: &'a DesignIR,
    /// Root transactions that write each signal.
    writers: BTreeMap<String, BTreeSet<String>>,
    /// Root transactions that drive each condition.
    drivers: BTreeMap<String, BTreeSet<String>>,
}

impl<'a> DepGraph<'a> {
    pub fn new(ir: &'a DesignIR) -> Self {
        let mut writers: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, ws) in ir.writes.iter().enumerate() {
            for w in ws {
                writers
                    .entry(ir.signals[i].name.clone())
                    .or_default()
                    .insert(w.transaction.clone());
            }
        }
        let mut drivers: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for a in &ir.actions {
            if let ActionKind::Drive(c) = &a.kind {
                drivers.entry(c.clone()).or_default().insert(a.transaction.clone());
            }
        }
        DepGraph { ir, writers, drivers }
    }

    fn signal_or_condition(&self, name: &str) -> Node {
        if self.ir.conditions.contains_key(name) {
            Node::new(NodeKind::Condition, name)
        } else {
            Node::new(NodeKind::Signal, name)
        }
    }

    fn expr_deps(&self, e: &TExpr, out: &mut Vec<Node>) {
        let mut names = BTreeSet::new();
        e.reads(&mut names);
        out.extend(names.iter().map(|n| self.signal_or_condition(n)));
    }

    fn successors(&self, n: &Node) -> Vec<Node> {
        let ir = self.ir;
        let mut out = Vec::new();
        match n.kind {
            NodeKind::Vtr => {
                if let Some(v) = ir.vtrs.get(&n.name) {
                    visit_stmts(v, &mut |s| match &s.kind {
                        RStmtKind::Apply(d) => out.push(Node::new(NodeKind::Datapath, d)),
                        RStmtKind::Drive(c) => out.push(Node::new(NodeKind::Condition, c)),
                        RStmtKind::Wait { cond, .. } => out.push(Node::new(NodeKind::Condition, cond)),
                        RStmtKind::Random(sig) => out.push(Node::new(NodeKind::Signal, sig)),
                        RStmtKind::Cover { conds, .. } => {
                            out.extend(conds.iter().map(|c| Node::new(NodeKind::Condition, c)))
                        }
                        RStmtKind::Call(c) => out.push(Node::new(NodeKind::Vtr, c)),
                        RStmtKind::Goto(_) | RStmtKind::Fork(_) | RStmtKind::Exit => {}
                    });
                }
            }
            NodeKind::Datapath => {
                if let Some(d) = ir.datapaths.get(&n.name) {
                    for a in &d.assigns {
                        out.push(Node::new(NodeKind::Signal, &a.target));
                        if let Some(i) = &a.index {
                            self.expr_deps(i, &mut out);
                        }
                        self.expr_deps(&a.expr, &mut out);
                    }
                }
            }
            NodeKind::Condition => {
                if let Some(c) = ir.conditions.get(&n.name) {
                    if let Some(e) = &c.expr {
                        self.expr_deps(e, &mut out);
                    }
                }
                for t in self.drivers.get(&n.name).into_iter().flatten() {
                    out.push(Node::new(NodeKind::Transaction, t));
                }
            }
            NodeKind::Signal => {
                for t in self.writers.get(&n.name).into_iter().flatten() {
                    out.push(Node::new(NodeKind::Transaction, t));
                }
            }
            NodeKind::Transaction => {
                if let Some(t) = ir.transactions.get(&n.name) {
                    tr_deps(&t.body, &mut out);
                }
            }
        }
        out
    }

    /// Every node reachable from `vtr`, including itself.
    pub fn closure(&self, vtr: &str) -> BTreeSet<Node> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![Node::new(NodeKind::Vtr, vtr)];
        while let Some(n) = stack.pop() {
            if seen.contains(&n) {
                continue;
            }
            stack.extend(self.successors(&n));
            seen.insert(n);
        }
        seen
    }

    /// Content hash of a closure.
    pub fn hash(&self, closure: &BTreeSet<Node>, params: &HashParams) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "tlv {} budget {} cycles {} clock {}\n",
            params.tool_version, params.budget_bits, params.max_cycles, self.ir.clock
        ));
        for n in closure {
            h.update(self.canonical(n).as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn closure_hash(&self, vtr: &str, params: &HashParams) -> String {
        self.hash(&self.closure(vtr), params)
    }

    fn canonical(&self, n: &Node) -> String {
        let ir = self.ir;
        match n.kind {
            NodeKind::Vtr => match ir.vtrs.get(&n.name) {
                Some(v) => format!("vtr {} {}", n.name, vtr_text(v)),
                None => format!("vtr {} ?", n.name),
            },
            NodeKind::Datapath => match ir.datapaths.get(&n.name) {
                Some(d) => {
                    let assigns: Vec<String> = d
                        .assigns
                        .iter()
                        .map(|a| match &a.index {
                            Some(i) => format!("{}[{}]={}", a.target, i.canonical(), a.expr.canonical()),
                            None => format!("{}={}", a.target, a.expr.canonical()),
                        })
                        .collect();
                    format!("dp {} {}", n.name, assigns.join(";"))
                }
                None => format!("dp {} ?", n.name),
            },
            NodeKind::Condition => match ir.conditions.get(&n.name) {
                Some(c) => format!(
                    "cond {} {} stim={}",
                    n.name,
                    c.expr.as_ref().map(|e| e.canonical()).unwrap_or_default(),
                    c.stim.is_some()
                ),
                None => format!("cond {} ?", n.name),
            },
            NodeKind::Transaction => match ir.transactions.get(&n.name) {
                Some(t) => {
                    let rank = ir.root_transactions.iter().position(|r| r == &n.name);
                    format!("tr {} rank={:?} {}", n.name, rank, tr_text(&t.body))
                }
                None => format!("tr {} ?", n.name),
            },
            NodeKind::Signal => match ir.signal(&n.name) {
                Some(s) => {
                    let kind = match s.kind {
                        SignalKind::Sequential => "seq",
                        SignalKind::Combinational => "comb",
                        SignalKind::Input => "input",
                    };
                    format!("sig {} {} {:?} {}", n.name, s.width, s.depth, kind)
                }
                None => format!("sig {} ?", n.name),
            },
        }
    }
}

fn tr_deps(body: &[RTrStmt], out: &mut Vec<Node>) {
    for s in body {
        match s {
            RTrStmt::Apply(d) => out.push(Node::new(NodeKind::Datapath, d)),
            RTrStmt::Drive(c) => out.push(Node::new(NodeKind::Condition, c)),
            RTrStmt::Nested(t) => out.push(Node::new(NodeKind::Transaction, t)),
            RTrStmt::Guard { cond, body, .. } => {
                out.push(Node::new(NodeKind::Condition, cond));
                tr_deps(body, out);
            }
            RTrStmt::Clock { body } => tr_deps(body, out),
        }
    }
}

fn tr_text(body: &[RTrStmt]) -> String {
    let parts: Vec<String> = body
        .iter()
        .map(|s| match s {
            RTrStmt::Apply(d) => format!("apply {d}"),
            RTrStmt::Drive(c) => format!("drive {c}"),
            RTrStmt::Nested(t) => format!("tr {t}"),
            RTrStmt::Guard { unique, cond, body } => {
                format!("{}@{} {{{}}}", if *unique { "unique " } else { "" }, cond, tr_text(body))
            }
            RTrStmt::Clock { body } => format!("@clk {{{}}}", tr_text(body)),
        })
        .collect();
    parts.join(";")
}

fn stmts_text(body: &[RStmt], states: &[String]) -> String {
    let parts: Vec<String> = body
        .iter()
        .map(|s| match &s.kind {
            RStmtKind::Apply(d) => format!("apply {d}"),
            RStmtKind::Drive(c) => format!("drive {c}"),
            RStmtKind::Goto(i) => format!("goto {}", states[*i]),
            RStmtKind::Wait { cond, body } => format!("@{} {{{}}}", cond, stmts_text(body, states)),
            RStmtKind::Random(sig) => format!("random {sig}"),
            RStmtKind::Cover { name, conds, exists } => {
                format!("{} {} {{{}}}", if *exists { "reach" } else { "cover" }, name, conds.join(","))
            }
            RStmtKind::Call(c) => format!("call {c}"),
            RStmtKind::Fork(bs) => {
                let bs: Vec<String> = bs.iter().map(|b| format!("{{{}}}", stmts_text(b, states))).collect();
                format!("fork {}", bs.join(""))
            }
            RStmtKind::Exit => "exit".to_string(),
        })
        .collect();
    parts.join(";")
}

fn vtr_text(v: &RVtr) -> String {
    match &v.sequence {
        None => "-".to_string(),
        Some(seq) => {
            let names: Vec<String> = seq.states.iter().map(|s| s.name.clone()).collect();
            let states: Vec<String> = seq
                .states
                .iter()
                .map(|s| format!("{}:{{{}}}", s.name, stmts_text(&s.body, &names)))
                .collect();
            format!("{} init={} {}", seq.name, names[seq.init], states.join(" "))
        }
    }
}
