//! Instance hierarchy construction, cluster joining and transaction flattening.

use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;

use crate::frontend::ast::{BuildDecl, BuildItem, JoinSource};
use crate::frontend::resolve::{RStmt, RStmtKind, RTrStmt, ResolvedUnit};

use super::ir::*;
use super::ElabError;

/// Name of the root instance used when a unit has no `build` declaration.
pub const IMPLICIT_ROOT: &str = "top";

/// Build the instance hierarchy and flatten transactions. Signal kinds are
/// left as placeholders until [`super::classify_signals`] runs.
pub fn build(unit: &ResolvedUnit) -> Result<DesignIR, ElabError> {
    let mut b = Builder::default();
    match unit.unit.builds.as_slice() {
        [] => {
            b.instance(IMPLICIT_ROOT, None, None)?;
            for c in unit.clusters.keys() {
                b.joins.push((c.clone(), IMPLICIT_ROOT.to_string()));
            }
        }
        [decl] => b.walk(decl, None)?,
        [_, second, ..] => return Err(ElabError::MultipleBuilds(second.name.name.clone())),
    }
    b.assign_clusters(unit)?;
    b.finish(unit)
}

#[derive(Default)]
struct Builder {
    instances: Vec<Instance>,
    inst_by_name: HashMap<String, InstId>,
    joins: Vec<(String, String)>,
    cluster_inst: HashMap<String, InstId>,
}

impl Builder {
    fn instance(&mut self, name: &str, parent: Option<InstId>, role: Option<String>) -> Result<InstId, ElabError> {
        if self.inst_by_name.contains_key(name) {
            return Err(ElabError::DuplicateInstance(name.to_string()));
        }
        let id = self.instances.len();
        let path = match parent {
            Some(p) => format!("{}/{}", self.instances[p].path, name),
            None => name.to_string(),
        };
        self.instances.push(Instance {
            name: name.to_string(),
            path,
            parent,
            children: Vec::new(),
            role,
            clusters: Vec::new(),
        });
        if let Some(p) = parent {
            self.instances[p].children.push(id);
        }
        self.inst_by_name.insert(name.to_string(), id);
        Ok(id)
    }

    fn walk(&mut self, decl: &BuildDecl, parent: Option<InstId>) -> Result<(), ElabError> {
        let id = self.instance(
            &decl.name.name,
            parent,
            decl.role.as_ref().map(|r| r.name.clone()),
        )?;
        for item in &decl.items {
            match item {
                BuildItem::Instance(child) => self.walk(child, Some(id))?,
                BuildItem::Join { src, dst, .. } => {
                    let src = match src {
                        JoinSource::Named(n) => n.name.clone(),
                        JoinSource::Inline(c) => c.name.name.clone(),
                    };
                    self.joins.push((src, dst.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Each cluster lands in the single instance its join chain reaches.
    fn assign_clusters(&mut self, unit: &ResolvedUnit) -> Result<(), ElabError> {
        let mut seen = HashSet::new();
        let mut edges: HashMap<&str, Vec<&str>> = HashMap::new();
        for (src, dst) in &self.joins {
            if !unit.clusters.contains_key(src) {
                return Err(ElabError::JoinUndeclared(src.clone()));
            }
            if !unit.clusters.contains_key(dst) && !self.inst_by_name.contains_key(dst) {
                return Err(ElabError::JoinUndeclared(dst.clone()));
            }
            if !seen.insert((src, dst)) {
                return Err(ElabError::DuplicateJoin {
                    cluster: src.clone(),
                    target: dst.clone(),
                });
            }
            edges.entry(src).or_default().push(dst);
        }
        for cluster in unit.clusters.keys() {
            let mut reached = BTreeSet::new();
            let mut stack = vec![cluster.as_str()];
            let mut visited = HashSet::new();
            while let Some(n) = stack.pop() {
                if !visited.insert(n) {
                    continue;
                }
                if let Some(&i) = self.inst_by_name.get(n) {
                    reached.insert(i);
                    continue;
                }
                stack.extend(edges.get(n).into_iter().flatten().copied());
            }
            let mut it = reached.into_iter();
            if let Some(first) = it.next() {
                if let Some(second) = it.next() {
                    return Err(ElabError::ClusterInTwoInstances {
                        cluster: cluster.clone(),
                        first: self.instances[first].path.clone(),
                        second: self.instances[second].path.clone(),
                    });
                }
                self.cluster_inst.insert(cluster.clone(), first);
                self.instances[first].clusters.push(cluster.clone());
            }
        }
        Ok(())
    }

    fn finish(self, unit: &ResolvedUnit) -> Result<DesignIR, ElabError> {
        let Builder {
            instances,
            cluster_inst,
            ..
        } = self;
        let inst_of = |cluster: &str| cluster_inst.get(cluster).copied();

        // Signals: one net per name, homed at the deepest common ancestor.
        let mut signals: Vec<SignalItem> = Vec::new();
        let mut by_name: HashMap<String, SigId> = HashMap::new();
        for (name, info) in &unit.signals {
            let decls: Vec<_> = info
                .decls
                .iter()
                .filter_map(|(c, w, d, _)| inst_of(c).map(|i| (i, *w, *d)))
                .collect();
            let Some(&(first_inst, width, depth)) = decls.first() else {
                continue;
            };
            if let Some(&(_, w2, d2)) = decls.iter().find(|(_, w, d)| (*w, *d) != (width, depth)) {
                return Err(ElabError::WidthCollision {
                    signal: name.clone(),
                    first: shape(width, depth),
                    second: shape(w2, d2),
                });
            }
            let home = decls
                .iter()
                .skip(1)
                .fold(first_inst, |acc, (i, ..)| lca(&instances, acc, *i));
            by_name.insert(name.clone(), signals.len());
            signals.push(item(&instances, name, width, depth, home));
        }

        // Elements of instantiated clusters.
        let mut element_instance = HashMap::new();
        let mut conditions = IndexMap::new();
        for (name, c) in &unit.conditions {
            let Some(inst) = inst_of(&c.cluster) else {
                continue;
            };
            element_instance.insert(name.clone(), inst);
            let sig = signals.len();
            by_name.insert(name.clone(), sig);
            let mut s = item(&instances, name, 1, None, inst);
            s.condition = true;
            signals.push(s);
            conditions.insert(
                name.clone(),
                Condition {
                    name: name.clone(),
                    sig,
                    instance: inst,
                    expr: c.expr.clone(),
                    drives: Vec::new(),
                    stim: None,
                },
            );
        }
        let mut datapaths = IndexMap::new();
        for (name, d) in &unit.datapaths {
            if let Some(inst) = inst_of(&d.cluster) {
                element_instance.insert(name.clone(), inst);
                datapaths.insert(name.clone(), d.clone());
            }
        }
        let mut transactions = IndexMap::new();
        for (name, t) in &unit.transactions {
            if let Some(inst) = inst_of(&t.cluster) {
                element_instance.insert(name.clone(), inst);
                transactions.insert(name.clone(), t.clone());
            }
        }
        let mut vtrs = IndexMap::new();
        for (name, v) in &unit.vtrs {
            if let Some(inst) = inst_of(&v.cluster) {
                element_instance.insert(name.clone(), inst);
                vtrs.insert(name.clone(), v.clone());
            }
        }

        let mut ir = DesignIR {
            instances,
            signals,
            by_name,
            conditions,
            datapaths,
            transactions,
            vtrs,
            element_instance,
            root_transactions: Vec::new(),
            actions: Vec::new(),
            writes: Vec::new(),
            comb_order: Vec::new(),
            clock: "e_clk".to_string(),
        };
        check_references(&ir)?;
        flatten(&mut ir)?;
        mark_vtr_writes(&mut ir)?;
        mangle(&mut ir);
        Ok(ir)
    }
}

fn shape(w: u32, d: Option<u32>) -> String {
    match d {
        Some(d) => format!("[{w}][{d}]"),
        None => format!("[{w}]"),
    }
}

fn item(instances: &[Instance], name: &str, width: u32, depth: Option<u32>, home: InstId) -> SignalItem {
    SignalItem {
        name: name.to_string(),
        qname: format!("{}/{}", instances[home].path, name),
        mangled: String::new(),
        width,
        depth,
        kind: SignalKind::Combinational,
        may_be_undefined: false,
        home,
        condition: false,
        stim_for: None,
        vtr_written: false,
    }
}

fn lca(instances: &[Instance], a: InstId, b: InstId) -> InstId {
    let mut up = HashSet::new();
    let mut x = Some(a);
    while let Some(i) = x {
        up.insert(i);
        x = instances[i].parent;
    }
    let mut y = b;
    loop {
        if up.contains(&y) {
            return y;
        }
        match instances[y].parent {
            Some(p) => y = p,
            None => return y,
        }
    }
}

/// Every name read or invoked by an instantiated element must itself be instantiated.
fn check_references(ir: &DesignIR) -> Result<(), ElabError> {
    let need_sig = |n: &str, by: &str| -> Result<(), ElabError> {
        if ir.by_name.contains_key(n) {
            Ok(())
        } else {
            Err(ElabError::NotInstantiated {
                name: n.to_string(),
                user: by.to_string(),
            })
        }
    };
    let need_el = |n: &str, by: &str| -> Result<(), ElabError> {
        if ir.element_instance.contains_key(n) {
            Ok(())
        } else {
            Err(ElabError::NotInstantiated {
                name: n.to_string(),
                user: by.to_string(),
            })
        }
    };
    for c in ir.conditions.values() {
        let mut reads = BTreeSet::new();
        if let Some(e) = &c.expr {
            e.reads(&mut reads);
        }
        for r in reads {
            need_sig(&r, &c.name)?;
        }
    }
    for d in ir.datapaths.values() {
        let mut reads = BTreeSet::new();
        for a in &d.assigns {
            reads.insert(a.target.clone());
            a.expr.reads(&mut reads);
            if let Some(i) = &a.index {
                i.reads(&mut reads);
            }
        }
        for r in reads {
            need_sig(&r, &d.name)?;
        }
    }
    fn tr_refs(body: &[RTrStmt], out: &mut Vec<String>) {
        for s in body {
            match s {
                RTrStmt::Apply(n) | RTrStmt::Drive(n) | RTrStmt::Nested(n) => out.push(n.clone()),
                RTrStmt::Guard { cond, body, .. } => {
                    out.push(cond.clone());
                    tr_refs(body, out);
                }
                RTrStmt::Clock { body } => tr_refs(body, out),
            }
        }
    }
    for t in ir.transactions.values() {
        let mut refs = Vec::new();
        tr_refs(&t.body, &mut refs);
        for r in refs {
            need_el(&r, &t.name)?;
        }
    }
    for v in ir.vtrs.values() {
        let mut err = Ok(());
        visit_stmts(v, &mut |s| {
            if err.is_err() {
                return;
            }
            err = match &s.kind {
                RStmtKind::Apply(n) | RStmtKind::Drive(n) | RStmtKind::Call(n) => need_el(n, &v.name),
                RStmtKind::Wait { cond, .. } => need_el(cond, &v.name),
                RStmtKind::Random(n) => need_sig(n, &v.name),
                RStmtKind::Cover { conds, .. } => conds.iter().try_for_each(|c| need_el(c, &v.name)),
                _ => Ok(()),
            };
        });
        err?;
    }
    Ok(())
}

/// Visit every statement of a VTR's sequence, including nested bodies.
pub fn visit_stmts(v: &crate::frontend::resolve::RVtr, f: &mut impl FnMut(&RStmt)) {
    fn walk(body: &[RStmt], f: &mut impl FnMut(&RStmt)) {
        for s in body {
            f(s);
            match &s.kind {
                RStmtKind::Wait { body, .. } => walk(body, f),
                RStmtKind::Fork(bs) => bs.iter().for_each(|b| walk(b, f)),
                _ => {}
            }
        }
    }
    if let Some(seq) = &v.sequence {
        for st in &seq.states {
            walk(&st.body, f);
        }
    }
}

fn flatten(ir: &mut DesignIR) -> Result<(), ElabError> {
    let mut nested = HashSet::new();
    fn collect_nested(body: &[RTrStmt], out: &mut HashSet<String>) {
        for s in body {
            match s {
                RTrStmt::Nested(n) => {
                    out.insert(n.clone());
                }
                RTrStmt::Guard { body, .. } | RTrStmt::Clock { body } => collect_nested(body, out),
                _ => {}
            }
        }
    }
    for t in ir.transactions.values() {
        collect_nested(&t.body, &mut nested);
    }
    ir.root_transactions = ir
        .transactions
        .keys()
        .filter(|n| !nested.contains(*n))
        .cloned()
        .collect();

    struct Ctx<'a> {
        ir: &'a DesignIR,
        root: String,
        out: Vec<Action>,
    }
    fn walk(cx: &mut Ctx, body: &[RTrStmt], guard: &[SigId], clocked: bool, unique: bool) {
        for s in body {
            match s {
                RTrStmt::Apply(d) => cx.out.push(Action {
                    guard: guard.to_vec(),
                    clocked,
                    unique,
                    kind: ActionKind::Apply(d.clone()),
                    transaction: cx.root.clone(),
                }),
                RTrStmt::Drive(c) => cx.out.push(Action {
                    guard: guard.to_vec(),
                    clocked,
                    unique,
                    kind: ActionKind::Drive(c.clone()),
                    transaction: cx.root.clone(),
                }),
                RTrStmt::Nested(t) => {
                    let body = cx.ir.transactions[t].body.clone();
                    walk(cx, &body, guard, clocked, unique);
                }
                RTrStmt::Guard {
                    unique: u,
                    cond,
                    body,
                } => {
                    let mut g = guard.to_vec();
                    g.push(cx.ir.by_name[cond]);
                    walk(cx, body, &g, clocked, unique || *u);
                }
                RTrStmt::Clock { body } => walk(cx, body, guard, true, unique),
            }
        }
    }
    let mut actions = Vec::new();
    for root in ir.root_transactions.clone() {
        let mut cx = Ctx {
            ir,
            root: root.clone(),
            out: Vec::new(),
        };
        let body = ir.transactions[&root].body.clone();
        walk(&mut cx, &body, &[], false, false);
        actions.extend(cx.out);
    }

    let mut writes: Vec<Vec<Write>> = vec![Vec::new(); ir.signals.len()];
    for a in &actions {
        match &a.kind {
            ActionKind::Apply(d) => {
                let dp = &ir.datapaths[d];
                let mut targets = HashSet::new();
                for asg in &dp.assigns {
                    if !targets.insert(&asg.target) {
                        return Err(ElabError::DoubleAssign {
                            signal: asg.target.clone(),
                            datapath: d.clone(),
                        });
                    }
                    writes[ir.by_name[&asg.target]].push(Write {
                        guard: a.guard.clone(),
                        index: asg.index.clone(),
                        value: asg.expr.clone(),
                        datapath: d.clone(),
                        transaction: a.transaction.clone(),
                        unique: a.unique,
                        clocked: a.clocked,
                    });
                }
            }
            ActionKind::Drive(c) => ir.conditions[c].drives.push(a.guard.clone()),
        }
    }
    ir.actions = actions;
    ir.writes = writes;
    Ok(())
}

/// Mark VTR-written signals and create `stim_<c>` inputs for VTR-driven conditions.
fn mark_vtr_writes(ir: &mut DesignIR) -> Result<(), ElabError> {
    let mut written = BTreeSet::new();
    let mut driven = Vec::new();
    for v in ir.vtrs.values() {
        visit_stmts(v, &mut |s| match &s.kind {
            RStmtKind::Random(n) => {
                written.insert(n.clone());
            }
            RStmtKind::Apply(d) => {
                for a in &ir.datapaths[d].assigns {
                    written.insert(a.target.clone());
                }
            }
            RStmtKind::Drive(c) if !driven.contains(c) => driven.push(c.clone()),
            _ => {}
        });
    }
    for n in written {
        let i = ir.by_name[&n];
        ir.signals[i].vtr_written = true;
    }
    // Stimulus inputs follow declaration order of their conditions.
    let order: Vec<String> = ir
        .conditions
        .keys()
        .filter(|c| driven.contains(c))
        .cloned()
        .collect();
    for c in order {
        let name = format!("stim_{c}");
        if ir.by_name.contains_key(&name) {
            return Err(ElabError::NameCollision(name));
        }
        let home = ir.conditions[&c].instance;
        let mut s = item(&ir.instances, &name, 1, None, home);
        s.kind = SignalKind::Input;
        s.stim_for = Some(c.clone());
        let id = ir.signals.len();
        ir.signals.push(s);
        ir.writes.push(Vec::new());
        ir.by_name.insert(name, id);
        ir.conditions[&c].stim = Some(id);
    }
    Ok(())
}

/// `/` becomes `_`; clashes get a numeric suffix in signal order.
fn mangle(ir: &mut DesignIR) {
    let mut used: HashMap<String, usize> = HashMap::new();
    for s in ir.signals.iter_mut() {
        let base = s.qname.replace('/', "_");
        let mut name = base.clone();
        let mut n = 0;
        while used.contains_key(&name) {
            n += 1;
            name = format!("{base}_{n}");
        }
        used.insert(name.clone(), 1);
        s.mangled = name;
    }
}

#[cfg(test)]
mod tests {
    use crate::project::{compile_sources, test_ir, Source};
    use crate::sva::LowerOptions;

    fn soc() -> crate::elab::DesignIR {
        test_ir(crate::suite::SOC)
    }

    fn err(src: &str) -> String {
        compile_sources(&[Source::new("b.pdvl", src)], &LowerOptions::default())
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn instance_tree_of_the_soc() {
        let ir = soc();
        let paths: Vec<&str> = ir.instances.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths.len(), 5);
        for p in ["TB", "TB/i_duv", "TB/i_duv/i_cpu", "TB/i_duv/i_axi", "TB/i_duv/i_uart"] {
            assert!(paths.contains(&p), "{p} missing from {paths:?}");
        }
        let cpu = ir.instances.iter().find(|i| i.path == "TB/i_duv/i_cpu").unwrap();
        assert!(cpu.clusters.contains(&"cl_cpu".to_string()));
        assert_eq!(ir.instances[cpu.parent.unwrap()].path, "TB/i_duv");
    }

    #[test]
    fn signals_live_in_their_cluster_instance() {
        let ir = soc();
        let pc = ir.signal("pc").unwrap();
        assert_eq!(pc.qname, "TB/i_duv/i_cpu/pc");
        assert_eq!(pc.mangled, "TB_i_duv_i_cpu_pc");
    }

    #[test]
    fn implicit_top_receives_every_cluster() {
        let ir = test_ir("cluster a { signal x[1]; } cluster b { signal y[1]; }");
        assert_eq!(ir.instances.len(), 1);
        assert_eq!(ir.instances[0].clusters, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn join_errors() {
        let e = err("cluster a { signal x[1]; } build T { join a T; join a T; }");
        assert!(e.contains("joined twice"), "{e}");
        let e = err("cluster a { signal x[1]; } build T { build i; join a T; join a i; }");
        assert!(e.contains("reaches two instances"), "{e}");
        let e = err("cluster a { signal x[1]; } build T { join a nowhere; }");
        assert!(e.contains("`nowhere`"), "{e}");
    }
}
