//! Sequential/combinational classification and combinational ordering.

use std::collections::BTreeSet;

use super::ir::*;
use super::ElabError;

/// Assign a kind to every signal, order combinational logic and reject cycles.
pub fn classify_signals(mut ir: DesignIR) -> Result<DesignIR, ElabError> {
    for i in 0..ir.signals.len() {
        let s = &ir.signals[i];
        if s.condition || s.stim_for.is_some() {
            continue;
        }
        let ws = &ir.writes[i];
        let kind = if ws.is_empty() {
            SignalKind::Input
        } else if s.vtr_written {
            return Err(ElabError::DesignAndVtrDriver(s.name.clone()));
        } else if ws.iter().all(|w| w.clocked) {
            SignalKind::Sequential
        } else if ws.iter().all(|w| !w.clocked) {
            if s.depth.is_some() {
                return Err(ElabError::CombinationalArray(s.name.clone()));
            }
            SignalKind::Combinational
        } else {
            return Err(ElabError::MixedClocking(s.name.clone()));
        };
        let s = &mut ir.signals[i];
        s.kind = kind;
        s.may_be_undefined =
            kind == SignalKind::Combinational && ir.writes[i].iter().all(|w| !w.guard.is_empty());
    }

    let deps = comb_dependencies(&ir);
    ir.comb_order = topo_order(&ir, &deps)?;

    // Conditions whose expressions read possibly-undefined signals may be undefined too.
    for &i in &ir.comb_order.clone() {
        if !ir.signals[i].condition {
            continue;
        }
        let undefined = deps[i]
            .iter()
            .any(|&d| ir.signals[d].may_be_undefined && reads_directly(&ir, i, d));
        ir.signals[i].may_be_undefined = undefined;
    }
    Ok(ir)
}

fn reads_directly(ir: &DesignIR, cond: SigId, dep: SigId) -> bool {
    let c = &ir.conditions[&ir.signals[cond].name];
    let mut reads = BTreeSet::new();
    if let Some(e) = &c.expr {
        e.reads(&mut reads);
    }
    reads.contains(&ir.signals[dep].name)
}

/// For each combinational signal, the combinational signals it reads.
fn comb_dependencies(ir: &DesignIR) -> Vec<BTreeSet<SigId>> {
    let is_comb = |i: SigId| ir.signals[i].kind == SignalKind::Combinational;
    let mut deps = vec![BTreeSet::new(); ir.signals.len()];
    let add_reads = |target: SigId, names: &BTreeSet<String>, deps: &mut Vec<BTreeSet<SigId>>| {
        for n in names {
            let d = ir.by_name[n];
            if is_comb(d) {
                deps[target].insert(d);
            }
        }
    };
    for c in ir.conditions.values() {
        let mut reads = BTreeSet::new();
        if let Some(e) = &c.expr {
            e.reads(&mut reads);
        }
        for g in &c.drives {
            for &s in g {
                reads.insert(ir.signals[s].name.clone());
            }
        }
        add_reads(c.sig, &reads, &mut deps);
    }
    for (i, ws) in ir.writes.iter().enumerate() {
        if !is_comb(i) {
            continue;
        }
        let mut reads = BTreeSet::new();
        for w in ws {
            w.value.reads(&mut reads);
            for &g in &w.guard {
                reads.insert(ir.signals[g].name.clone());
            }
        }
        add_reads(i, &reads, &mut deps);
    }
    deps
}

/// Dependency order; ties broken by signal index for determinism.
fn topo_order(ir: &DesignIR, deps: &[BTreeSet<SigId>]) -> Result<Vec<SigId>, ElabError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = ir.signals.len();
    let mut mark = vec![Mark::New; n];
    let mut order = Vec::new();
    let mut stack: Vec<SigId> = Vec::new();

    fn visit(
        i: SigId,
        deps: &[BTreeSet<SigId>],
        mark: &mut [Mark],
        stack: &mut Vec<SigId>,
        order: &mut Vec<SigId>,
    ) -> Result<(), Vec<SigId>> {
        match mark[i] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let pos = stack.iter().position(|&s| s == i).unwrap_or(0);
                let mut cyc = stack[pos..].to_vec();
                cyc.push(i);
                return Err(cyc);
            }
            Mark::New => {}
        }
        mark[i] = Mark::Active;
        stack.push(i);
        for &d in &deps[i] {
            visit(d, deps, mark, stack, order)?;
        }
        stack.pop();
        mark[i] = Mark::Done;
        order.push(i);
        Ok(())
    }

    for i in 0..n {
        if ir.signals[i].kind != SignalKind::Combinational {
            continue;
        }
        if let Err(cyc) = visit(i, deps, &mut mark, &mut stack, &mut order) {
            // Report in the direction values flow: a -> b means b reads a.
            let path: Vec<String> = cyc.iter().rev().map(|&s| ir.signals[s].name.clone()).collect();
            return Err(ElabError::CombinationalCycle(path));
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use crate::elab::SignalKind;
    use crate::project::test_ir;

    const SRC: &str = "cluster cl_a {
  signal inp[4];
  signal reg[4];
  signal mid[4];
  signal out[4];
  signal en[1];
  c_en { if (en == 1'b1) this; }
  d_out { out = mid + 4'd1; }
  d_mid { mid = reg ^ inp; }
  d_reg { reg = out; }
  tr_a { d_out; @c_en { d_mid; } @e_clk { d_reg; } }
}";

    #[test]
    fn kinds_follow_the_writers() {
        let ir = test_ir(SRC);
        let kind = |n: &str| ir.signal(n).unwrap().kind;
        assert_eq!(kind("inp"), SignalKind::Input);
        assert_eq!(kind("en"), SignalKind::Input);
        assert_eq!(kind("reg"), SignalKind::Sequential);
        assert_eq!(kind("mid"), SignalKind::Combinational);
        assert_eq!(kind("out"), SignalKind::Combinational);
    }

    #[test]
    fn guarded_comb_signals_may_be_undefined() {
        let ir = test_ir(SRC);
        assert!(ir.signal("mid").unwrap().may_be_undefined);
        assert!(!ir.signal("reg").unwrap().may_be_undefined);
    }

    #[test]
    fn comb_order_puts_drivers_first() {
        let ir = test_ir(SRC);
        let pos = |n: &str| ir.comb_order.iter().position(|&i| i == ir.sig(n).unwrap()).unwrap();
        assert!(pos("mid") < pos("out"));
        assert!(pos("c_en") < pos("mid"));
    }
}
