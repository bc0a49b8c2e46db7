//! VTR summaries: the effect of a VTR as a function of its entry state.
//!
//! A summary is recorded by running the VTR once from a fully symbolic
//! entry state, where every register, input and condition stimulus is a
//! variable `$name` (array elements `$name[k]`). When the run stays on a
//! single path, its exit state and cover terms are functions of those
//! variables and can be instantiated at any call site by substitution.
//! Cover terms are rechecked in the caller's context, so a summary never
//! asserts anything on its own.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dag::{DagWriter, FlatDag};
use super::exec::{ExecConfig, Executor, PathOutcome};
use super::state::{Design, State, Val};
use super::term::Term;
use crate::elab::{DesignIR, SignalKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub vtr: String,
    /// Closure hash of the VTR when the summary was recorded.
    pub closure: String,
    /// Exit state over entry variables `$x` and fresh variables `%j`.
    pub exit: FlatDag,
    /// Registers, inputs and stimuli of the exit state with their node indices.
    pub layout: Vec<(String, Vec<usize>)>,
    pub cycles: u32,
    /// Signal and width of each fresh variable, in creation order.
    pub fresh: Vec<(String, u32)>,
    /// Covers hit inside the call, relative to the VTR: key, existential
    /// flag, and node of the cover term.
    pub covers: Vec<(String, bool, usize)>,
}

/// Signals that carry state across a call boundary.
fn carried(ir: &DesignIR) -> impl Iterator<Item = usize> + '_ {
    (0..ir.signals.len()).filter(|&i| {
        let s = &ir.signals[i];
        s.kind != SignalKind::Combinational && !(s.condition && s.stim_for.is_none())
    })
}

fn entry_name(ir: &DesignIR, sig: usize, k: Option<u32>) -> String {
    match k {
        Some(k) => format!("${}[{k}]", ir.signals[sig].name),
        None => format!("${}", ir.signals[sig].name),
    }
}

/// Settled state in which every carried signal is its entry variable.
pub fn entry_state(ir: &DesignIR) -> State {
    let mut st = State::empty(ir.signals.len());
    for i in carried(ir) {
        let s = &ir.signals[i];
        let v = match s.depth {
            Some(d) => Val::Array((0..d).map(|k| Term::var(&entry_name(ir, i, Some(k)), s.width)).collect()),
            None => Val::Scalar(Term::var(&entry_name(ir, i, None), s.width)),
        };
        st.f_set(i, v);
    }
    Design::new(ir).sim_update(&st)
}

/// Why a VTR has no summary.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NoSummary {
    #[error("`{0}` has no sequence")]
    NoSequence(String),
    #[error("execution of `{0}` depends on its entry state")]
    StateDependent(String),
    #[error("execution of `{vtr}` did not exit: {outcome}")]
    NoExit { vtr: String, outcome: String },
}

/// Record the summary of `vtr`, reusing summaries of its callees from `table`.
pub fn summarize(
    ir: &DesignIR,
    vtr: &str,
    closure: &str,
    cfg: &ExecConfig,
    table: &SummaryTable,
    closures: &HashMap<String, String>,
) -> Result<Summary, NoSummary> {
    if ir.vtrs.get(vtr).and_then(|v| v.sequence.as_ref()).is_none() {
        return Err(NoSummary::NoSequence(vtr.to_string()));
    }
    // The first split already shows the run depends on the entry state.
    let cfg = ExecConfig {
        max_paths: 1,
        trace: false,
        ..cfg.clone()
    };
    let ex = Executor::new(ir, cfg).with_summaries(Some(table), closures.clone());
    let res = ex.run_from(vtr, entry_state(ir));
    let [path] = res.paths.as_slice() else {
        return Err(NoSummary::StateDependent(vtr.to_string()));
    };
    if path.outcome == PathOutcome::PathLimit {
        return Err(NoSummary::StateDependent(vtr.to_string()));
    }
    if path.outcome != PathOutcome::Exited {
        return Err(NoSummary::NoExit {
            vtr: vtr.to_string(),
            outcome: format!("{:?}", path.outcome),
        });
    }
    if !path.pc.is_true() {
        return Err(NoSummary::StateDependent(vtr.to_string()));
    }
    let fresh_idx: HashMap<&str, usize> = path
        .fresh
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    let mut w = DagWriter::new(|n: &str, _| match fresh_idx.get(n) {
        Some(i) => format!("%{i}"),
        None => n.to_string(),
    });
    let mut layout = Vec::new();
    for i in carried(ir) {
        if let Some(v) = path.state.f_get(i) {
            let ids = v.terms().into_iter().map(|t| w.add(t)).collect();
            layout.push((ir.signals[i].name.clone(), ids));
        }
    }
    let covers = path
        .hits
        .iter()
        .map(|h| (h.key.clone(), h.exists, w.add(&h.term)))
        .collect();
    Ok(Summary {
        vtr: vtr.to_string(),
        closure: closure.to_string(),
        exit: w.finish(),
        layout,
        cycles: path.cycles,
        fresh: path.fresh.iter().map(|f| (f.signal.clone(), f.width)).collect(),
        covers,
    })
}

/// Instantiate a summary at a call site. Returns the exit state (settled)
/// and the cover terms, or `None` when a carried signal is undefined in
/// the entry state.
pub fn instantiate(ir: &DesignIR, s: &Summary, entry: &State, fresh: &[Term]) -> Option<(State, Vec<Term>)> {
    let mut env: HashMap<String, Term> = HashMap::new();
    for i in carried(ir) {
        match entry.f_get(i)? {
            Val::Scalar(t) => {
                env.insert(entry_name(ir, i, None), t.clone());
            }
            Val::Array(ts) => {
                for (k, t) in ts.iter().enumerate() {
                    env.insert(entry_name(ir, i, Some(k as u32)), t.clone());
                }
            }
        }
    }
    let mut missing = false;
    let nodes = s.exit.rebuild(|n, w| {
        if let Some(i) = n.strip_prefix('%').and_then(|i| i.parse::<usize>().ok()) {
            return fresh[i].clone();
        }
        match env.get(n) {
            Some(t) => t.clone(),
            None => {
                missing = true;
                Term::var(n, w)
            }
        }
    });
    if missing {
        return None;
    }
    let mut st = State::empty(ir.signals.len());
    for (name, ids) in &s.layout {
        let sig = ir.by_name[name];
        let v = if ir.signals[sig].depth.is_some() {
            Val::Array(ids.iter().map(|i| nodes[*i].clone()).collect())
        } else {
            Val::Scalar(nodes[ids[0]].clone())
        };
        st.f_set(sig, v);
    }
    let st = Design::new(ir).sim_update(&st);
    let covers = s.covers.iter().map(|(_, _, i)| nodes[*i].clone()).collect();
    Some((st, covers))
}

/// Summaries indexed by VTR and closure hash.
#[derive(Debug, Clone, Default)]
pub struct SummaryTable {
    map: HashMap<(String, String), Summary>,
}

impl SummaryTable {
    pub fn insert(&mut self, s: Summary) {
        self.map.insert((s.vtr.clone(), s.closure.clone()), s);
    }

    pub fn get(&self, vtr: &str, closure: &str) -> Option<&Summary> {
        self.map.get(&(vtr.to_string(), closure.to_string()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Summary> {
        self.map.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::test_ir;
    use crate::sym::Executor;

    const SRC: &str = "cluster cl_s {
  signal cnt[4];
  signal acc[4];
  signal step[4];
  d_inc { cnt = cnt + 4'd1; }
  tr_s { @e_clk { d_inc; } }
  d_acc { acc = acc + cnt; }
  c_odd { if (cnt[0:0] == 1'b1) this; }
  c_acc_big { if (4'd8 < acc) this; }
  vtr_add { sequence a { init: { random step; d_acc; s1; } s1: { cover cp_big { c_acc_big; } exit; } } }
  vtr_branchy { sequence b { init: { @c_odd { exit; } } } }
}";

    fn summary(ir: &DesignIR, vtr: &str) -> Result<Summary, NoSummary> {
        summarize(ir, vtr, "h", &ExecConfig::default(), &SummaryTable::default(), &HashMap::new())
    }

    #[test]
    fn instantiation_matches_a_direct_run() {
        let ir = test_ir(SRC);
        let s = summary(&ir, "vtr_add").unwrap();
        assert_eq!(s.fresh, vec![("step".to_string(), 4)]);
        let ex = Executor::new(&ir, ExecConfig::default());
        let d = ex.design();
        for (cnt, acc) in [(0u64, 0u64), (3, 7), (15, 15), (9, 2)] {
            let mut entry = d.reset_st();
            entry.f_set(ir.sig("cnt").unwrap(), Val::Scalar(Term::konst(cnt, 4)));
            entry.f_set(ir.sig("acc").unwrap(), Val::Scalar(Term::konst(acc, 4)));
            let entry = d.sim_update(&entry);
            let direct = ex.run_from("vtr_add", entry.clone());
            assert_eq!(direct.paths.len(), 1);
            let p = &direct.paths[0];
            let fresh = vec![Term::var(&p.fresh[0].name, 4)];
            let (exit, covers) = instantiate(&ir, &s, &entry, &fresh).unwrap();
            assert_eq!(exit, p.state, "cnt={cnt} acc={acc}");
            assert_eq!(covers, vec![p.hits[0].term.clone()]);
        }
    }

    #[test]
    fn entry_dependent_runs_have_no_summary() {
        let ir = test_ir(SRC);
        assert_eq!(summary(&ir, "vtr_branchy").unwrap_err(), NoSummary::StateDependent("vtr_branchy".into()));
    }

    #[test]
    fn entry_state_names_every_carried_signal() {
        let ir = test_ir(SRC);
        let st = entry_state(&ir);
        let cnt = st.f_get(ir.sig("cnt").unwrap()).unwrap().scalar().unwrap();
        assert_eq!(cnt, &Term::var("$cnt", 4));
        assert!(st.f_get(ir.sig("acc").unwrap()).is_some());
    }
}
