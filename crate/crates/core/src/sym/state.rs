//! Symbolic states and the design step functions.

use std::collections::HashMap;

use super::term::Term;
use super::SymError;
use crate::elab::{DesignIR, SigId, SignalKind};
use crate::frontend::resolve::{RTrStmt, TBin, TExpr, TKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Val {
    Scalar(Term),
    Array(Vec<Term>),
}

impl Val {
    pub fn scalar(&self) -> Option<&Term> {
        match self {
            Val::Scalar(t) => Some(t),
            Val::Array(_) => None,
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Val::Scalar(t) => vec![t],
            Val::Array(ts) => ts.iter().collect(),
        }
    }
}

/// Ordered association from signals to values; absent entries are undefined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    vals: Vec<Option<Val>>,
}

impl State {
    pub fn empty(n: usize) -> State {
        State { vals: vec![None; n] }
    }

    pub fn f_get(&self, sig: SigId) -> Option<&Val> {
        self.vals[sig].as_ref()
    }

    pub fn f_set(&mut self, sig: SigId, v: Val) {
        self.vals[sig] = Some(v);
    }

    pub fn f_unset(&mut self, sig: SigId) {
        self.vals[sig] = None;
    }

    /// Defined signals in declaration order.
    pub fn entries(&self) -> impl Iterator<Item = (SigId, &Val)> {
        self.vals.iter().enumerate().filter_map(|(i, v)| v.as_ref().map(|v| (i, v)))
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }
}

/// Step functions bound to one elaborated design.
#[derive(Clone, Copy)]
pub struct Design<'a> {
    pub ir: &'a DesignIR,
}

impl<'a> Design<'a> {
    pub fn new(ir: &'a DesignIR) -> Self {
        Design { ir }
    }

    fn undefined(&self, sig: SigId, e: &TExpr) -> SymError {
        SymError::Undefined {
            signal: self.ir.signals[sig].name.clone(),
            line: e.span.line,
            col: e.span.col,
        }
    }

    /// Sequential signals and inputs at zero; combinational logic undefined.
    pub fn reset_st(&self) -> State {
        let mut st = State::empty(self.ir.signals.len());
        for (i, s) in self.ir.signals.iter().enumerate() {
            if s.condition || s.kind == SignalKind::Combinational {
                continue;
            }
            let zero = Term::konst(0, s.width);
            let v = match s.depth {
                Some(d) => Val::Array(vec![zero; d as usize]),
                None => Val::Scalar(zero),
            };
            st.f_set(i, v);
        }
        st
    }

    pub fn eval(&self, st: &State, e: &TExpr) -> Result<Term, SymError> {
        Ok(match &e.kind {
            TKind::Signal(n) => {
                let sig = self.ir.by_name[n];
                match st.f_get(sig) {
                    Some(Val::Scalar(t)) => t.clone(),
                    _ => return Err(self.undefined(sig, e)),
                }
            }
            TKind::Const(v) => Term::konst(*v, e.width),
            TKind::Select { base, hi, lo } => Term::select(self.eval(st, base)?, *hi, *lo),
            TKind::ArrayRead { array, index } => {
                let sig = self.ir.by_name[array];
                let idx = self.eval(st, index)?;
                let elems = match st.f_get(sig) {
                    Some(Val::Array(ts)) => ts,
                    _ => return Err(self.undefined(sig, e)),
                };
                read_array(elems, &idx, e.width)
            }
            TKind::Concat(ps) => Term::concat(ps.iter().map(|p| self.eval(st, p)).collect::<Result<_, _>>()?),
            TKind::Zext(a) => Term::zext(self.eval(st, a)?, e.width),
            TKind::Not(a) => Term::not(self.eval(st, a)?),
            TKind::Binary(op, a, b) => Term::bin(*op, self.eval(st, a)?, self.eval(st, b)?),
        })
    }

    /// Value of a condition as a guard; undefined conditions do not hold.
    pub fn cond_value(&self, st: &State, sig: SigId) -> Term {
        match st.f_get(sig) {
            Some(Val::Scalar(t)) => t.clone(),
            _ => Term::bit(false),
        }
    }

    pub fn guard_value(&self, st: &State, guard: &[SigId]) -> Term {
        guard
            .iter()
            .fold(Term::bit(true), |acc, &g| Term::and(acc, self.cond_value(st, g)))
    }

    /// Recompute combinational signals and conditions from the others.
    pub fn sim_update(&self, st: &State) -> State {
        let mut st = st.clone();
        for &i in &self.ir.comb_order {
            let s = &self.ir.signals[i];
            let v = if s.condition {
                self.condition_value(&st, i)
            } else {
                self.comb_value(&st, i)
            };
            match v {
                Some(t) => st.f_set(i, Val::Scalar(t)),
                None => st.f_unset(i),
            }
        }
        st
    }

    fn condition_value(&self, st: &State, i: SigId) -> Option<Term> {
        let c = &self.ir.conditions[&self.ir.signals[i].name];
        let mut v = match &c.expr {
            Some(e) => self.eval(st, e).ok()?,
            None => Term::bit(false),
        };
        for g in &c.drives {
            v = Term::or(v, self.guard_value(st, g));
        }
        if let Some(stim) = c.stim {
            v = Term::or(v, self.cond_value(st, stim));
        }
        Some(v)
    }

    fn comb_value(&self, st: &State, i: SigId) -> Option<Term> {
        let width = self.ir.signals[i].width;
        let mut arms = Vec::new();
        for w in &self.ir.writes[i] {
            let g = self.guard_value(st, &w.guard);
            if g.is_false() {
                continue;
            }
            let v = self.eval(st, &w.value).ok()?;
            let last = g.is_true();
            arms.push((g, v));
            if last {
                break;
            }
        }
        if arms.is_empty() {
            return None;
        }
        let mut acc = Term::konst(0, width);
        for (g, v) in arms.into_iter().rev() {
            acc = Term::ite(g, v, acc);
        }
        Some(acc)
    }

    /// Next values of sequential signals, computed from the pre-edge state.
    pub fn next_state(&self, st: &State) -> Result<State, SymError> {
        let mut next = st.clone();
        for i in self.ir.sequential() {
            let ws = &self.ir.writes[i];
            let old = match st.f_get(i) {
                Some(v) => v.clone(),
                None => continue,
            };
            let new = match old {
                Val::Scalar(mut acc) => {
                    for w in ws.iter().rev() {
                        let g = self.guard_value(st, &w.guard);
                        if g.is_false() {
                            continue;
                        }
                        acc = Term::ite(g, self.eval(st, &w.value)?, acc);
                    }
                    Val::Scalar(acc)
                }
                Val::Array(mut elems) => {
                    for w in ws.iter().rev() {
                        let g = self.guard_value(st, &w.guard);
                        if g.is_false() {
                            continue;
                        }
                        let idx = match &w.index {
                            Some(e) => self.eval(st, e)?,
                            None => continue,
                        };
                        let v = self.eval(st, &w.value)?;
                        write_array(&mut elems, &idx, &g, &v);
                    }
                    Val::Array(elems)
                }
            };
            next.f_set(i, new);
        }
        Ok(next)
    }

    /// One clock edge followed by combinational settling.
    pub fn sim_cycle(&self, st: &State) -> Result<State, SymError> {
        Ok(self.sim_update(&self.next_state(st)?))
    }

    /// Sequential reading of a transaction: statements apply in order and
    /// see earlier updates. Symbolic guards merge with the original values.
    pub fn apply_transaction(&self, st: &State, tr: &str) -> Result<State, SymError> {
        let t = &self.ir.transactions[tr];
        let mut st = st.clone();
        self.apply_body(&mut st, &t.body, &Term::bit(true))?;
        Ok(st)
    }

    fn apply_body(&self, st: &mut State, body: &[RTrStmt], guard: &Term) -> Result<(), SymError> {
        for s in body {
            match s {
                RTrStmt::Apply(d) => self.apply_datapath_guarded(st, d, guard)?,
                RTrStmt::Drive(c) => {
                    let sig = self.ir.by_name[c];
                    let old = self.cond_value(st, sig);
                    st.f_set(sig, Val::Scalar(Term::or(old, guard.clone())));
                }
                RTrStmt::Nested(t) => {
                    let body = &self.ir.transactions[t].body;
                    self.apply_body(st, body, guard)?;
                }
                RTrStmt::Guard { cond, body, .. } => {
                    let g = Term::and(guard.clone(), self.cond_value(st, self.ir.by_name[cond]));
                    if !g.is_false() {
                        self.apply_body(st, body, &g)?;
                    }
                }
                RTrStmt::Clock { body } => self.apply_body(st, body, guard)?,
            }
        }
        Ok(())
    }

    /// Apply a datapath unconditionally. Right-hand sides all read the
    /// state before the datapath.
    pub fn apply_datapath(&self, st: &mut State, name: &str) -> Result<Vec<SigId>, SymError> {
        self.apply_datapath_guarded(st, name, &Term::bit(true))?;
        Ok(self.ir.datapaths[name].assigns.iter().map(|a| self.ir.by_name[&a.target]).collect())
    }

    fn apply_datapath_guarded(&self, st: &mut State, name: &str, guard: &Term) -> Result<(), SymError> {
        let dp = &self.ir.datapaths[name];
        let before = st.clone();
        for a in &dp.assigns {
            let sig = self.ir.by_name[&a.target];
            let width = self.ir.signals[sig].width;
            let v = self.eval(&before, &a.expr)?;
            match &a.index {
                None => {
                    let old = before
                        .f_get(sig)
                        .and_then(|v| v.scalar().cloned())
                        .unwrap_or_else(|| Term::konst(0, width));
                    st.f_set(sig, Val::Scalar(Term::ite(guard.clone(), v, old)));
                }
                Some(ie) => {
                    let idx = self.eval(&before, ie)?;
                    let depth = self.ir.signals[sig].depth.unwrap_or(0) as usize;
                    let mut elems = match before.f_get(sig) {
                        Some(Val::Array(ts)) => ts.clone(),
                        _ => vec![Term::konst(0, width); depth],
                    };
                    write_array(&mut elems, &idx, guard, &v);
                    st.f_set(sig, Val::Array(elems));
                }
            }
        }
        Ok(())
    }
}

pub fn read_array(elems: &[Term], idx: &Term, width: u32) -> Term {
    if let Some(i) = idx.as_const() {
        return elems.get(i as usize).cloned().unwrap_or_else(|| Term::konst(0, width));
    }
    let iw = idx.width();
    let mut acc = Term::konst(0, width);
    for (j, t) in elems.iter().enumerate().rev() {
        if iw < 64 && (j as u64) >> iw != 0 {
            continue;
        }
        acc = Term::ite(Term::bin(TBin::Eq, idx.clone(), Term::konst(j as u64, iw)), t.clone(), acc);
    }
    acc
}

pub fn write_array(elems: &mut [Term], idx: &Term, guard: &Term, v: &Term) {
    let iw = idx.width();
    for (j, e) in elems.iter_mut().enumerate() {
        if iw < 64 && (j as u64) >> iw != 0 {
            continue;
        }
        let hit = Term::and(guard.clone(), Term::bin(TBin::Eq, idx.clone(), Term::konst(j as u64, iw)));
        if !hit.is_false() {
            *e = Term::ite(hit, v.clone(), e.clone());
        }
    }
}

/// Substitute concrete values for the variables of every term in a state.
pub fn specialize_state(st: &State, env: &HashMap<String, u64>) -> State {
    let mut memo = HashMap::new();
    let mut f = |n: &str, w: u32| env.get(n).map(|v| Term::konst(*v, w));
    let mut out = st.clone();
    for i in 0..st.len() {
        if let Some(v) = st.f_get(i) {
            let nv = match v {
                Val::Scalar(t) => Val::Scalar(t.subst_memo(&mut f, &mut memo)),
                Val::Array(ts) => Val::Array(ts.iter().map(|t| t.subst_memo(&mut f, &mut memo)).collect()),
            };
            out.f_set(i, nv);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::test_ir;

    const COUNTER: &str = "cluster cl_c {
  signal cnt[3];
  signal dbl[3];
  signal go[1];
  c_go { if (go == 1'b1) this; }
  d_inc { cnt = cnt + 3'd1; }
  d_dbl { dbl = cnt + cnt; }
  tr_c { d_dbl; @e_clk { @c_go { d_inc; } } }
}";

    fn scalar(st: &State, ir: &DesignIR, n: &str) -> Option<u64> {
        st.f_get(ir.sig(n).unwrap()).and_then(|v| v.scalar()).and_then(|t| t.as_const())
    }

    #[test]
    fn reset_state_is_zero_and_settles() {
        let ir = test_ir(COUNTER);
        let d = Design::new(&ir);
        let st = d.sim_update(&d.reset_st());
        assert_eq!(scalar(&st, &ir, "cnt"), Some(0));
        assert_eq!(scalar(&st, &ir, "dbl"), Some(0));
        assert_eq!(scalar(&st, &ir, "c_go"), Some(0));
    }

    #[test]
    fn cycles_follow_the_guard() {
        let ir = test_ir(COUNTER);
        let d = Design::new(&ir);
        let mut st = d.sim_update(&d.reset_st());
        st.f_set(ir.sig("go").unwrap(), Val::Scalar(Term::konst(1, 1)));
        for want in 1..=9u64 {
            st = d.sim_update(&d.sim_cycle(&d.sim_update(&st)).unwrap());
            assert_eq!(scalar(&st, &ir, "cnt"), Some(want % 8));
            assert_eq!(scalar(&st, &ir, "dbl"), Some(2 * want % 8));
        }
        st.f_set(ir.sig("go").unwrap(), Val::Scalar(Term::konst(0, 1)));
        let held = d.sim_update(&d.sim_cycle(&d.sim_update(&st)).unwrap());
        assert_eq!(scalar(&held, &ir, "cnt"), scalar(&st, &ir, "cnt"));
    }

    #[test]
    fn symbolic_guard_gives_a_mux() {
        let ir = test_ir(COUNTER);
        let d = Design::new(&ir);
        let mut st = d.reset_st();
        st.f_set(ir.sig("go").unwrap(), Val::Scalar(Term::var("g", 1)));
        let next = d.sim_cycle(&d.sim_update(&st)).unwrap();
        let cnt = next.f_get(ir.sig("cnt").unwrap()).unwrap().scalar().unwrap().clone();
        for g in 0..2u64 {
            let env = std::collections::HashMap::from([("g".to_string(), g)]);
            assert_eq!(cnt.specialize(&env).as_const(), Some(g));
        }
    }
}
