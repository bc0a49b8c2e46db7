//! Verilog-2001 netlist emission and a concrete interpreter for the
//! emitted subset.
//!
//! Every instance of the build tree becomes one module. A signal lives in
//! the module of its home instance; inputs and condition stimuli live in
//! the root module as top-level ports. Signals read outside their home
//! subtree travel through ports, arrays packed into flat vectors.
//!
//! Combinational signals without an active driver read as zero.

pub mod interp;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::elab::{DesignIR, InstId, SigId, SignalKind, Write};
use crate::frontend::resolve::{TExpr, TKind};

pub use interp::{Netlist, RtlError, Sim};

/// One emitted file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlFile {
    pub name: String,
    pub module: String,
    pub text: String,
}

/// Module name of every instance, in instance order.
pub fn module_names(ir: &DesignIR) -> Vec<String> {
    let mut used = BTreeSet::new();
    ir.instances
        .iter()
        .map(|i| {
            let base = i.path.replace('/', "_");
            let mut name = base.clone();
            let mut n = 0;
            while used.contains(&name) {
                n += 1;
                name = format!("{base}_{n}");
            }
            used.insert(name.clone());
            name
        })
        .collect()
}

fn root_instance(ir: &DesignIR) -> InstId {
    ir.instances.iter().position(|i| i.parent.is_none()).unwrap_or(0)
}

/// Emit one file per module. The root module comes first.
pub fn emit_rtl(ir: &DesignIR) -> Vec<RtlFile> {
    let plan = Plan::new(ir);
    let names = module_names(ir);
    let mut order = Vec::new();
    let mut stack = vec![plan.root];
    while let Some(i) = stack.pop() {
        order.push(i);
        stack.extend(ir.instances[i].children.iter().rev().copied());
    }
    order
        .into_iter()
        .map(|inst| {
            let text = ModuleWriter::new(ir, &plan, &names, inst).emit();
            RtlFile {
                name: format!("{}.v", names[inst]),
                module: names[inst].clone(),
                text,
            }
        })
        .collect()
}

/// Where each signal is declared and which modules read it.
struct Plan {
    root: InstId,
    owner: Vec<InstId>,
    /// Modules whose own logic reads each signal.
    readers: Vec<BTreeSet<InstId>>,
    /// Instances in each instance's subtree.
    subtree: Vec<BTreeSet<InstId>>,
}

impl Plan {
    fn new(ir: &DesignIR) -> Plan {
        let root = root_instance(ir);
        let owner: Vec<InstId> = ir
            .signals
            .iter()
            .map(|s| if s.kind == SignalKind::Input { root } else { s.home })
            .collect();
        let mut readers = vec![BTreeSet::new(); ir.signals.len()];
        for (i, ws) in ir.writes.iter().enumerate() {
            let m = owner[i];
            let mut names = BTreeSet::new();
            for w in ws {
                write_reads(ir, w, &mut names);
            }
            for n in names {
                if let Some(s) = ir.sig(&n) {
                    readers[s].insert(m);
                }
            }
        }
        for c in ir.conditions.values() {
            let m = owner[c.sig];
            let mut names = BTreeSet::new();
            if let Some(e) = &c.expr {
                e.reads(&mut names);
            }
            let mut ids: BTreeSet<SigId> = names.iter().filter_map(|n| ir.sig(n)).collect();
            ids.extend(c.drives.iter().flatten().copied());
            ids.extend(c.stim);
            for s in ids {
                readers[s].insert(m);
            }
        }
        let mut subtree = vec![BTreeSet::new(); ir.instances.len()];
        for i in 0..ir.instances.len() {
            for a in ir.ancestors(i) {
                subtree[a].insert(i);
            }
        }
        Plan {
            root,
            owner,
            readers,
            subtree,
        }
    }

    fn in_sub(&self, m: InstId, s: SigId) -> bool {
        self.subtree[m].contains(&self.owner[s])
    }

    fn port_in(&self, m: InstId, s: SigId) -> bool {
        !self.in_sub(m, s) && self.readers[s].iter().any(|r| self.subtree[m].contains(r))
    }

    fn port_out(&self, m: InstId, s: SigId) -> bool {
        self.in_sub(m, s) && self.readers[s].iter().any(|r| !self.subtree[m].contains(r))
    }
}

fn write_reads(ir: &DesignIR, w: &Write, out: &mut BTreeSet<String>) {
    w.value.reads(out);
    if let Some(i) = &w.index {
        i.reads(out);
    }
    out.extend(w.guard.iter().map(|g| ir.signals[*g].name.clone()));
}

fn range(width: u32) -> String {
    format!("[{}:0]", width.max(1) - 1)
}

fn konst(v: u64, w: u32) -> String {
    format!("{w}'h{v:x}")
}

struct ModuleWriter<'a> {
    ir: &'a DesignIR,
    plan: &'a Plan,
    names: &'a [String],
    inst: InstId,
    temps: Vec<String>,
}

impl<'a> ModuleWriter<'a> {
    fn new(ir: &'a DesignIR, plan: &'a Plan, names: &'a [String], inst: InstId) -> Self {
        ModuleWriter {
            ir,
            plan,
            names,
            inst,
            temps: Vec::new(),
        }
    }

    fn name(&self, s: SigId) -> &str {
        &self.ir.signals[s].mangled
    }

    fn flat(&self, s: SigId) -> String {
        format!("{}_flat", self.name(s))
    }

    fn is_array(&self, s: SigId) -> bool {
        self.ir.signals[s].depth.is_some()
    }

    fn flat_width(&self, s: SigId) -> u32 {
        let sig = &self.ir.signals[s];
        sig.width * sig.depth.unwrap_or(1)
    }

    /// Whether this module needs a local name for `s`.
    fn visible(&self, s: SigId) -> bool {
        let m = self.inst;
        let p = self.plan;
        if p.owner[s] == m {
            return true;
        }
        if !p.in_sub(m, s) {
            return p.port_in(m, s);
        }
        p.port_out(m, s)
            || p.readers[s].contains(&m)
            || self.ir.instances[m].children.iter().any(|&c| p.port_in(c, s))
    }

    fn emit(mut self) -> String {
        let ir = self.ir;
        let m = self.inst;
        let n = ir.signals.len();
        let is_root = m == self.plan.root;

        let mut ports = vec!["  input wire clk".to_string()];
        let mut decls = Vec::new();
        let mut unpack = Vec::new();
        let mut pack = Vec::new();
        for s in 0..n {
            if !self.visible(s) {
                continue;
            }
            let sig = &ir.signals[s];
            let owned = self.plan.owner[s] == m;
            let array = self.is_array(s);
            let reg = owned && sig.kind == SignalKind::Sequential;
            let r = range(sig.width);
            let name = self.name(s).to_string();
            let port_in = self.plan.port_in(m, s) || (is_root && sig.kind == SignalKind::Input);
            let port_out = self.plan.port_out(m, s);
            if port_in {
                if array {
                    ports.push(format!("  input wire {} {}", range(self.flat_width(s)), self.flat(s)));
                    decls.push(format!("  wire {r} {name} [0:{}];", sig.depth.unwrap_or(1) - 1));
                    for k in 0..sig.depth.unwrap_or(0) {
                        let lo = k * sig.width;
                        unpack.push(format!(
                            "  assign {name}[{k}] = {}[{}:{lo}];",
                            self.flat(s),
                            lo + sig.width - 1
                        ));
                    }
                } else {
                    ports.push(format!("  input wire {r} {name}"));
                }
                continue;
            }
            if array {
                let d = sig.depth.unwrap_or(1);
                let kind = if reg { "reg" } else { "wire" };
                decls.push(format!("  {kind} {r} {name} [0:{}];", d - 1));
                let child_out = !owned;
                if port_out {
                    ports.push(format!("  output wire {} {}", range(self.flat_width(s)), self.flat(s)));
                    if child_out {
                        // The packed vector comes from a child; unpack it here.
                        for k in 0..d {
                            let lo = k * sig.width;
                            unpack.push(format!(
                                "  assign {name}[{k}] = {}[{}:{lo}];",
                                self.flat(s),
                                lo + sig.width - 1
                            ));
                        }
                    }
                } else if child_out {
                    decls.push(format!("  wire {} {};", range(self.flat_width(s)), self.flat(s)));
                    for k in 0..d {
                        let lo = k * sig.width;
                        unpack.push(format!(
                            "  assign {name}[{k}] = {}[{}:{lo}];",
                            self.flat(s),
                            lo + sig.width - 1
                        ));
                    }
                }
                if owned && port_out {
                    let parts: Vec<String> = (0..d).rev().map(|k| format!("{name}[{k}]")).collect();
                    pack.push(format!("  assign {} = {{{}}};", self.flat(s), parts.join(", ")));
                }
                continue;
            }
            let init = if reg { format!(" = {}", konst(0, sig.width)) } else { String::new() };
            if port_out {
                let kind = if reg { "reg" } else { "wire" };
                ports.push(format!("  output {kind} {r} {name}{init}"));
            } else {
                let kind = if reg { "reg" } else { "wire" };
                decls.push(format!("  {kind} {r} {name}{init};"));
            }
        }

        let mut body = Vec::new();
        let mut seq = Vec::new();
        let mut inits = Vec::new();
        for s in 0..n {
            if self.plan.owner[s] != m {
                continue;
            }
            let sig = &ir.signals[s];
            if sig.condition {
                let e = self.condition(s);
                body.push(format!("  assign {} = {e};", self.name(s)));
                continue;
            }
            match sig.kind {
                SignalKind::Input => {}
                SignalKind::Combinational => {
                    let e = self.comb(s);
                    body.push(format!("  assign {} = {e};", self.name(s)));
                }
                SignalKind::Sequential => {
                    if let Some(d) = sig.depth {
                        for k in 0..d {
                            inits.push(format!("    {}[{k}] = {};", self.name(s), konst(0, sig.width)));
                        }
                    }
                    if let Some(block) = self.sequential(s) {
                        seq.push(block);
                    }
                }
            }
        }

        let mut out = String::new();
        let path = &ir.instances[m].path;
        let _ = writeln!(out, "// instance {path}");
        let _ = writeln!(out, "module {} (\n{}\n);", self.names[m], ports.join(",\n"));
        for d in &decls {
            let _ = writeln!(out, "{d}");
        }
        for t in &self.temps {
            let _ = writeln!(out, "{t}");
        }
        if !inits.is_empty() {
            let _ = writeln!(out, "  initial begin\n{}\n  end", inits.join("\n"));
        }
        for l in unpack.iter().chain(&pack).chain(&body) {
            let _ = writeln!(out, "{l}");
        }
        for b in &seq {
            out.push_str(b);
        }
        for &c in &ir.instances[m].children {
            out.push_str(&self.instantiate(c));
        }
        out.push_str("endmodule\n");
        out
    }

    fn instantiate(&self, c: InstId) -> String {
        let mut conns = vec!["    .clk(clk)".to_string()];
        for s in 0..self.ir.signals.len() {
            if self.plan.port_in(c, s) || self.plan.port_out(c, s) {
                let n = if self.is_array(s) { self.flat(s) } else { self.name(s).to_string() };
                conns.push(format!("    .{n}({n})"));
            }
        }
        format!(
            "  {} {} (\n{}\n  );\n",
            self.names[c],
            self.ir.instances[c].name,
            conns.join(",\n")
        )
    }

    fn guard(&self, g: &[SigId]) -> Option<String> {
        if g.is_empty() {
            return None;
        }
        Some(g.iter().map(|s| self.name(*s).to_string()).collect::<Vec<_>>().join(" & "))
    }

    fn condition(&mut self, s: SigId) -> String {
        let c = &self.ir.conditions[&self.ir.signals[s].name];
        let mut terms = Vec::new();
        if let Some(e) = &c.expr {
            terms.push(self.expr(e));
        }
        for g in &c.drives {
            terms.push(match self.guard(g) {
                Some(g) => format!("({g})"),
                None => "1'h1".to_string(),
            });
        }
        if let Some(st) = c.stim {
            terms.push(self.name(st).to_string());
        }
        if terms.is_empty() {
            "1'h0".to_string()
        } else {
            terms.join(" | ")
        }
    }

    /// Priority chain over the writes; the first active guard wins.
    fn comb(&mut self, s: SigId) -> String {
        let width = self.ir.signals[s].width;
        let mut out = String::new();
        for w in &self.ir.writes[s] {
            let v = self.expr(&w.value);
            match self.guard(&w.guard) {
                Some(g) => {
                    let _ = write!(out, "({g}) ? {v} : ");
                }
                None => {
                    out.push_str(&v);
                    return out;
                }
            }
        }
        out.push_str(&konst(0, width));
        out
    }

    fn sequential(&mut self, s: SigId) -> Option<String> {
        let ws = &self.ir.writes[s];
        if ws.is_empty() {
            return None;
        }
        let name = self.name(s).to_string();
        let mut lines = Vec::new();
        if self.is_array(s) {
            // Later nonblocking writes win, so emit lowest priority first.
            for w in ws.iter().rev() {
                let Some(ie) = &w.index else { continue };
                let i = self.expr(ie);
                let v = self.expr(&w.value);
                match self.guard(&w.guard) {
                    Some(g) => lines.push(format!("    if ({g}) {name}[{i}] <= {v};")),
                    None => lines.push(format!("    {name}[{i}] <= {v};")),
                }
            }
        } else if ws.iter().all(|w| w.unique) {
            // Guards were proved pairwise disjoint.
            for w in ws {
                let v = self.expr(&w.value);
                match self.guard(&w.guard) {
                    Some(g) => lines.push(format!("    if ({g}) {name} <= {v};")),
                    None => lines.push(format!("    {name} <= {v};")),
                }
            }
        } else {
            let mut first = true;
            for w in ws {
                let v = self.expr(&w.value);
                let kw = if first { "if" } else { "else if" };
                first = false;
                match self.guard(&w.guard) {
                    Some(g) => lines.push(format!("    {kw} ({g}) {name} <= {v};")),
                    None => {
                        if lines.is_empty() {
                            lines.push(format!("    {name} <= {v};"));
                        } else {
                            lines.push(format!("    else {name} <= {v};"));
                        }
                        break;
                    }
                }
            }
        }
        Some(format!("  always @(posedge clk) begin\n{}\n  end\n", lines.join("\n")))
    }

    /// Hoist `e` into a wire of its exact width and return the wire name.
    fn temp(&mut self, e: &TExpr) -> String {
        let text = self.expr(e);
        let name = format!("_t{}", self.temps.len());
        self.temps.push(format!("  wire {} {name} = {text};", range(e.width)));
        name
    }

    fn expr(&mut self, e: &TExpr) -> String {
        match &e.kind {
            TKind::Signal(n) => self.ir.signal(n).map(|s| s.mangled.clone()).unwrap_or_else(|| n.clone()),
            TKind::Const(v) => konst(*v, e.width),
            TKind::Select { base, hi, lo } => {
                let b = match &base.kind {
                    TKind::Signal(_) => self.expr(base),
                    _ => self.temp(base),
                };
                if hi == lo {
                    format!("{b}[{hi}]")
                } else {
                    format!("{b}[{hi}:{lo}]")
                }
            }
            TKind::ArrayRead { array, index } => {
                let a = self.ir.signal(array).map(|s| s.mangled.clone()).unwrap_or_else(|| array.clone());
                let i = self.expr(index);
                format!("{a}[{i}]")
            }
            TKind::Concat(ps) => {
                let parts: Vec<String> = ps.iter().map(|p| self.expr(p)).collect();
                format!("{{{}}}", parts.join(", "))
            }
            TKind::Zext(a) => {
                let inner = self.expr(a);
                let pad = e.width - a.width;
                if pad == 0 {
                    inner
                } else {
                    format!("{{{}, {inner}}}", konst(0, pad))
                }
            }
            TKind::Not(a) => format!("~({})", self.expr(a)),
            TKind::Binary(op, a, b) => {
                let (x, y) = (self.expr(a), self.expr(b));
                format!("({x} {} {y})", op.symbol())
            }
        }
    }
}

/// Hierarchical simulator name of the net that holds `sig`.
pub fn net_path(ir: &DesignIR, sig: SigId) -> String {
    let s = &ir.signals[sig];
    let root = root_instance(ir);
    let home = if s.kind == SignalKind::Input { root } else { s.home };
    let mut parts: Vec<&str> = ir
        .ancestors(home)
        .into_iter()
        .filter(|&i| i != root)
        .map(|i| ir.instances[i].name.as_str())
        .collect();
    parts.reverse();
    parts.push(&s.mangled);
    parts.join(".")
}

/// Emitted files keyed by file name.
pub fn emit_map(ir: &DesignIR) -> BTreeMap<String, String> {
    emit_rtl(ir).into_iter().map(|f| (f.name, f.text)).collect()
}

/// Name of the root module.
pub fn top_module(ir: &DesignIR) -> String {
    module_names(ir)[root_instance(ir)].clone()
}
