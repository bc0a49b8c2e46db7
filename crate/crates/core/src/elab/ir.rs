//! Elaborated design representation.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde_json::{json, Value};

use crate::frontend::resolve::{RDatapath, RTransaction, RVtr, TExpr};

pub type SigId = usize;
pub type InstId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SignalKind {
    Sequential,
    Combinational,
    /// Driven from outside the design: by a VTR, a condition stimulus or nothing.
    Input,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    /// `/`-separated path from the root.
    pub path: String,
    pub parent: Option<InstId>,
    pub children: Vec<InstId>,
    pub role: Option<String>,
    /// Clusters merged into this instance, in declaration order.
    pub clusters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalItem {
    pub name: String,
    /// Qualified name, `TB/i_duv/x`.
    pub qname: String,
    /// Identifier used in emitted code, `TB_i_duv_x`.
    pub mangled: String,
    pub width: u32,
    pub depth: Option<u32>,
    pub kind: SignalKind,
    /// Combinational signals may be absent from a state when no driver is active.
    pub may_be_undefined: bool,
    pub home: InstId,
    /// Set for condition signals.
    pub condition: bool,
    /// Set for `stim_<c>` inputs through which VTRs drive conditions.
    pub stim_for: Option<String>,
    /// Signals written by VTR sequences.
    pub vtr_written: bool,
}

/// One guarded write of a datapath assignment, flattened out of a transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Write {
    /// Conjunction of condition signals.
    pub guard: Vec<SigId>,
    pub index: Option<TExpr>,
    pub value: TExpr,
    pub datapath: String,
    pub transaction: String,
    pub unique: bool,
    pub clocked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub name: String,
    pub sig: SigId,
    pub instance: InstId,
    pub expr: Option<TExpr>,
    /// Guards under which a transaction drives the condition true.
    pub drives: Vec<Vec<SigId>>,
    pub stim: Option<SigId>,
}

/// A transaction body flattened to guarded actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub guard: Vec<SigId>,
    pub clocked: bool,
    pub unique: bool,
    pub kind: ActionKind,
    /// Root transaction the action was flattened from.
    pub transaction: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    Apply(String),
    Drive(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignIR {
    pub instances: Vec<Instance>,
    pub signals: Vec<SignalItem>,
    pub by_name: HashMap<String, SigId>,
    pub conditions: IndexMap<String, Condition>,
    pub datapaths: IndexMap<String, RDatapath>,
    pub transactions: IndexMap<String, RTransaction>,
    pub vtrs: IndexMap<String, RVtr>,
    /// Instance owning each element.
    pub element_instance: HashMap<String, InstId>,
    /// Transactions not nested in any other transaction.
    pub root_transactions: Vec<String>,
    pub actions: Vec<Action>,
    /// Writes to each signal, in priority order.
    pub writes: Vec<Vec<Write>>,
    /// Combinational signals and conditions in dependency order.
    pub comb_order: Vec<SigId>,
    pub clock: String,
}

impl DesignIR {
    pub fn sig(&self, name: &str) -> Option<SigId> {
        self.by_name.get(name).copied()
    }

    pub fn signal(&self, name: &str) -> Option<&SignalItem> {
        self.sig(name).map(|i| &self.signals[i])
    }

    pub fn sequential(&self) -> impl Iterator<Item = SigId> + '_ {
        (0..self.signals.len()).filter(|&i| self.signals[i].kind == SignalKind::Sequential)
    }

    pub fn inputs(&self) -> impl Iterator<Item = SigId> + '_ {
        (0..self.signals.len()).filter(|&i| self.signals[i].kind == SignalKind::Input)
    }

    /// Instances from `id` up to the root, `id` first.
    pub fn ancestors(&self, mut id: InstId) -> Vec<InstId> {
        let mut out = vec![id];
        while let Some(p) = self.instances[id].parent {
            out.push(p);
            id = p;
        }
        out
    }

    /// JSON document for `--dump-ir`.
    pub fn to_json(&self) -> Value {
        let name = |i: &SigId| self.signals[*i].name.clone();
        let instances: Vec<Value> = self
            .instances
            .iter()
            .map(|i| {
                json!({
                    "path": i.path,
                    "role": i.role,
                    "clusters": i.clusters,
                    "children": i.children.iter().map(|c| &self.instances[*c].path).collect::<Vec<_>>(),
                })
            })
            .collect();
        let signals: Vec<Value> = self
            .signals
            .iter()
            .map(|s| {
                json!({
                    "name": s.qname,
                    "mangled": s.mangled,
                    "width": s.width,
                    "depth": s.depth,
                    "kind": format!("{:?}", s.kind).to_lowercase(),
                    "may_be_undefined": s.may_be_undefined,
                    "condition": s.condition,
                })
            })
            .collect();
        let conditions: Vec<Value> = self
            .conditions
            .values()
            .map(|c| {
                json!({
                    "name": c.name,
                    "instance": self.instances[c.instance].path,
                    "expr": c.expr.as_ref().map(|e| e.canonical()),
                    "drives": c.drives.iter().map(|g| g.iter().map(name).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "stim": c.stim.as_ref().map(name),
                })
            })
            .collect();
        let writes: Vec<Value> = self
            .writes
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_empty())
            .map(|(i, ws)| {
                json!({
                    "target": self.signals[i].qname,
                    "writes": ws.iter().map(|w| json!({
                        "guard": w.guard.iter().map(name).collect::<Vec<_>>(),
                        "index": w.index.as_ref().map(|e| e.canonical()),
                        "value": w.value.canonical(),
                        "datapath": w.datapath,
                        "transaction": w.transaction,
                        "unique": w.unique,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "clock": self.clock,
            "instances": instances,
            "signals": signals,
            "conditions": conditions,
            "root_transactions": self.root_transactions,
            "writes": writes,
            "comb_order": self.comb_order.iter().map(name).collect::<Vec<_>>(),
            "vtrs": self.vtrs.keys().collect::<Vec<_>>(),
        })
    }
}
