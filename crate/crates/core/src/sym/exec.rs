//! Symbolic execution of VTR sequences.
//!
//! A run starts from the settled reset state and executes the root VTR
//! cycle by cycle. Each path carries a state, a path condition and a tree
//! of threads (one per active fork branch). A cycle ends when every thread
//! has yielded: state bodies yield at their end, waits yield while their
//! guard is false. At the boundary the clock edge is applied, condition
//! stimuli are cleared and combinational logic settles.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::state::{Design, State, Val};
use super::summary::{self, Summary, SummaryTable};
use super::term::Term;
use super::valid::{check_valid, Support, Verdict};
use super::SymError;
use crate::elab::{DesignIR, SigId};
use crate::frontend::resolve::{RSequence, RStmt, RStmtKind, RVtr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecConfig {
    pub max_cycles: u32,
    pub max_paths: usize,
    pub budget_bits: u32,
    /// Clock edges at cycle boundaries; untimed runs only settle logic.
    pub timed: bool,
    pub trace: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            max_cycles: 2000,
            max_paths: 256,
            budget_bits: super::DEFAULT_BUDGET_BITS,
            timed: true,
            trace: false,
        }
    }
}

/// One execution of a cover statement.
#[derive(Debug, Clone)]
pub struct CoverHit {
    /// Call path below the root and cover name, `vtr_a::vtr_b::cp_x`.
    pub key: String,
    pub exists: bool,
    pub pc: Term,
    pub term: Term,
    pub via_summary: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreshVar {
    pub name: String,
    pub signal: String,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathOutcome {
    Exited,
    Budget { cycles: u32 },
    WaitNeverTrue { cond: String, cycles: u32 },
    PathLimit,
    Error(SymError),
}

#[derive(Debug, Clone)]
pub struct PathEnd {
    pub pc: Term,
    pub outcome: PathOutcome,
    pub hits: Vec<CoverHit>,
    pub cycles: u32,
    pub fresh: Vec<FreshVar>,
    pub state: State,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub path: usize,
    pub cycle: u32,
    pub state: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub paths: Vec<PathEnd>,
    pub body_runs: BTreeMap<String, u64>,
    pub trace: Vec<TraceEntry>,
}

/// Static labels of call sites: the callee name, suffixed `#k` for the
/// k-th call of the same callee inside one VTR.
pub fn call_sites(v: &RVtr) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut counts: HashMap<String, u32> = HashMap::new();
    crate::elab::visit_stmts(v, &mut |s| {
        if let RStmtKind::Call(c) = &s.kind {
            let n = counts.entry(c.clone()).or_insert(0);
            *n += 1;
            let label = if *n == 1 { c.clone() } else { format!("{c}#{n}") };
            out.push((label, c.clone()));
        }
    });
    out
}

#[derive(Clone)]
enum FrameKind<'a> {
    Vtr {
        name: &'a str,
        seq: &'a RSequence,
        state: usize,
        next: Option<usize>,
    },
    Branch,
}

#[derive(Clone)]
struct Frame<'a> {
    kind: FrameKind<'a>,
    cursors: Vec<(&'a [RStmt], usize)>,
    label: String,
}

#[derive(Clone)]
struct Thread<'a> {
    id: Vec<usize>,
    frames: Vec<Frame<'a>>,
    children: Vec<Thread<'a>>,
    yielded: bool,
    done: bool,
    decision: Option<bool>,
    blocked_on: Option<String>,
}

impl<'a> Thread<'a> {
    fn find(&mut self, id: &[usize]) -> &mut Thread<'a> {
        match id.split_first() {
            None => self,
            Some((k, rest)) => {
                let depth = self.id.len();
                let child = self
                    .children
                    .iter_mut()
                    .find(|c| c.id[depth] == *k)
                    .expect("thread id");
                child.find(rest)
            }
        }
    }

    fn new_cycle(&mut self) {
        self.yielded = false;
        self.blocked_on = None;
        for c in &mut self.children {
            c.new_cycle();
        }
    }

    fn blocked(&self) -> Option<String> {
        self.children
            .iter()
            .find_map(|c| c.blocked())
            .or_else(|| self.blocked_on.clone())
    }
}

/// Everything a path owns except its threads.
#[derive(Clone)]
struct Ctx {
    st: State,
    pc: Term,
    cycle: u32,
    fresh_counts: HashMap<SigId, u32>,
    fresh: Vec<FreshVar>,
    hits: Vec<CoverHit>,
    splits: u64,
    writes: HashMap<SigId, Vec<usize>>,
}

#[derive(Clone)]
struct Path<'a> {
    ctx: Ctx,
    root: Thread<'a>,
    index: usize,
}

enum Step {
    Yield,
    Done,
    Split(Term, Vec<usize>),
    Fail(PathOutcome),
}

pub struct Executor<'a> {
    d: Design<'a>,
    cfg: ExecConfig,
    table: Option<&'a SummaryTable>,
    closures: HashMap<String, String>,
    sites: HashMap<usize, String>,
    body_runs: RefCell<BTreeMap<String, u64>>,
    trace: RefCell<Vec<TraceEntry>>,
}

impl<'a> Executor<'a> {
    pub fn new(ir: &'a DesignIR, cfg: ExecConfig) -> Self {
        let mut sites = HashMap::new();
        for v in ir.vtrs.values() {
            let labels = call_sites(v);
            let mut k = 0;
            crate::elab::visit_stmts(v, &mut |s| {
                if let RStmtKind::Call(_) = s.kind {
                    sites.insert(s as *const RStmt as usize, labels[k].0.clone());
                    k += 1;
                }
            });
        }
        Executor {
            d: Design::new(ir),
            cfg,
            table: None,
            closures: HashMap::new(),
            sites,
            body_runs: RefCell::new(BTreeMap::new()),
            trace: RefCell::new(Vec::new()),
        }
    }

    /// Enable summary reuse, keyed by per-VTR closure hashes.
    pub fn with_summaries(mut self, table: Option<&'a SummaryTable>, closures: HashMap<String, String>) -> Self {
        self.table = table;
        self.closures = closures;
        self
    }

    pub fn design(&self) -> Design<'a> {
        self.d
    }

    /// Run `root` from the settled reset state.
    pub fn run(&self, root: &str) -> RunResult {
        let st = self.d.sim_update(&self.d.reset_st());
        self.run_from(root, st)
    }

    pub fn run_from(&self, root: &str, st: State) -> RunResult {
        let ctx = Ctx {
            st,
            pc: Term::bit(true),
            cycle: 0,
            fresh_counts: HashMap::new(),
            fresh: Vec::new(),
            hits: Vec::new(),
            splits: 0,
            writes: HashMap::new(),
        };
        let mut root_thread = Thread {
            id: vec![],
            frames: vec![],
            children: vec![],
            yielded: false,
            done: false,
            decision: None,
            blocked_on: None,
        };
        let mut ctx = ctx;
        match self.enter(&mut ctx, root, String::new(), false) {
            Ok(Some(f)) => root_thread.frames.push(f),
            Ok(None) => root_thread.done = true,
            Err(e) => {
                return RunResult {
                    paths: vec![PathEnd {
                        pc: ctx.pc.clone(),
                        outcome: PathOutcome::Error(e),
                        hits: vec![],
                        cycles: 0,
                        fresh: vec![],
                        state: ctx.st,
                    }],
                    ..Default::default()
                }
            }
        }
        self.record_trace(0, &ctx);
        let mut work = vec![Path {
            ctx,
            root: root_thread,
            index: 0,
        }];
        let mut created = 1usize;
        let mut ended: Vec<(usize, PathEnd)> = Vec::new();
        while let Some(mut p) = work.pop() {
            match self.run_path(&mut p) {
                Ok(outcome) => ended.push((p.index, finish(p, outcome))),
                Err((g, tid)) => {
                    if created + 1 > self.cfg.max_paths {
                        ended.push((p.index, finish(p, PathOutcome::PathLimit)));
                        continue;
                    }
                    let mut neg = p.clone();
                    neg.index = created;
                    created += 1;
                    let pc_pos = Term::and(p.ctx.pc.clone(), g.clone());
                    let pc_neg = Term::and(neg.ctx.pc.clone(), Term::not(g));
                    p.ctx.pc = pc_pos;
                    p.ctx.splits += 1;
                    p.root.find(&tid[p.root.id.len()..]).decision = Some(true);
                    neg.ctx.pc = pc_neg;
                    neg.ctx.splits += 1;
                    neg.root.find(&tid[neg.root.id.len()..]).decision = Some(false);
                    if !neg.ctx.pc.is_false() {
                        work.push(neg);
                    }
                    if !p.ctx.pc.is_false() {
                        work.push(p);
                    }
                }
            }
        }
        ended.sort_by_key(|(i, _)| *i);
        RunResult {
            paths: ended.into_iter().map(|(_, e)| e).collect(),
            body_runs: self.body_runs.borrow().clone(),
            trace: self.trace.borrow().clone(),
        }
    }

    /// Run a path until it ends (`Ok`) or needs to split (`Err`).
    fn run_path(&self, p: &mut Path<'a>) -> Result<PathOutcome, (Term, Vec<usize>)> {
        loop {
            if p.root.done {
                return Ok(PathOutcome::Exited);
            }
            match self.run_thread(&mut p.ctx, &mut p.root) {
                Step::Done => return Ok(PathOutcome::Exited),
                Step::Split(g, tid) => return Err((g, tid)),
                Step::Fail(o) => return Ok(o),
                Step::Yield => {
                    let blocked = p.root.blocked();
                    if let Err(e) = self.boundary(&mut p.ctx) {
                        return Ok(PathOutcome::Error(e));
                    }
                    p.root.new_cycle();
                    self.record_trace(p.index, &p.ctx);
                    if p.ctx.cycle > self.cfg.max_cycles {
                        let cycles = p.ctx.cycle;
                        return Ok(match blocked {
                            Some(cond) => PathOutcome::WaitNeverTrue { cond, cycles },
                            None => PathOutcome::Budget { cycles },
                        });
                    }
                }
            }
        }
    }

    fn boundary(&self, ctx: &mut Ctx) -> Result<(), SymError> {
        let ir = self.d.ir;
        let mut st = if self.cfg.timed {
            self.d.next_state(&ctx.st)?
        } else {
            ctx.st.clone()
        };
        for c in ir.conditions.values() {
            if let Some(s) = c.stim {
                st.f_set(s, Val::Scalar(Term::bit(false)));
            }
        }
        ctx.st = self.d.sim_update(&st);
        ctx.cycle += 1;
        ctx.writes.clear();
        Ok(())
    }

    fn record_trace(&self, path: usize, ctx: &Ctx) {
        if !self.cfg.trace {
            return;
        }
        let state = ctx
            .st
            .entries()
            .map(|(i, v)| {
                let text = match v {
                    Val::Scalar(t) => t.to_string(),
                    Val::Array(ts) => format!(
                        "[{}]",
                        ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
                    ),
                };
                (self.d.ir.signals[i].name.clone(), text)
            })
            .collect();
        self.trace.borrow_mut().push(TraceEntry {
            path,
            cycle: ctx.cycle,
            state,
        });
    }

    /// Push a frame for `vtr`, or apply a matching summary and return `None`.
    fn enter(&self, ctx: &mut Ctx, vtr: &str, label: String, toplevel: bool) -> Result<Option<Frame<'a>>, SymError> {
        let v = &self.d.ir.vtrs[vtr];
        let seq = match &v.sequence {
            Some(s) => s,
            None => return Ok(None),
        };
        if toplevel {
            let hit = self
                .closures
                .get(vtr)
                .and_then(|c| self.table.and_then(|t| t.get(vtr, c)));
            if let Some(s) = hit {
                if self.apply_summary(ctx, s, &label) {
                    return Ok(None);
                }
            }
        }
        *self.body_runs.borrow_mut().entry(vtr.to_string()).or_insert(0) += 1;
        Ok(Some(Frame {
            kind: FrameKind::Vtr {
                name: &v.name,
                seq,
                state: seq.init,
                next: None,
            },
            cursors: vec![(seq.states[seq.init].body.as_slice(), 0)],
            label,
        }))
    }

    fn apply_summary(&self, ctx: &mut Ctx, s: &Summary, label: &str) -> bool {
        let mut probe = ctx.clone();
        let fresh: Vec<Term> = s
            .fresh
            .iter()
            .map(|(sig, w)| self.fresh_var(&mut probe, self.d.ir.by_name[sig], *w))
            .collect();
        let Some((st, terms)) = summary::instantiate(self.d.ir, s, &ctx.st, &fresh) else {
            return false;
        };
        *ctx = probe;
        ctx.st = st;
        ctx.cycle += s.cycles;
        if s.cycles > 0 {
            ctx.writes.clear();
        }
        for ((key, exists, _), term) in s.covers.iter().zip(terms) {
            ctx.hits.push(CoverHit {
                key: join(label, key),
                exists: *exists,
                pc: ctx.pc.clone(),
                term,
                via_summary: true,
            });
        }
        true
    }

    fn fresh_var(&self, ctx: &mut Ctx, sig: SigId, width: u32) -> Term {
        let n = ctx.fresh_counts.entry(sig).or_insert(0);
        let name = format!("sym_{}_{}", self.d.ir.signals[sig].name, n);
        *n += 1;
        ctx.fresh.push(FreshVar {
            name: name.clone(),
            signal: self.d.ir.signals[sig].name.clone(),
            width,
        });
        Term::var(&name, width)
    }

    fn run_thread(&self, ctx: &mut Ctx, th: &mut Thread<'a>) -> Step {
        if th.done {
            return Step::Done;
        }
        if th.yielded {
            return Step::Yield;
        }
        loop {
            if !th.children.is_empty() {
                let mut all_done = true;
                for c in th.children.iter_mut() {
                    match self.run_thread(ctx, c) {
                        Step::Done => {}
                        Step::Yield => all_done = false,
                        other => return other,
                    }
                }
                if !all_done {
                    th.yielded = true;
                    return Step::Yield;
                }
                th.children.clear();
            }
            let Some(frame) = th.frames.last_mut() else {
                th.done = true;
                return Step::Done;
            };
            let (list, idx) = *frame.cursors.last().expect("cursor");
            if idx >= list.len() {
                if frame.cursors.len() > 1 {
                    frame.cursors.pop();
                    continue;
                }
                match &mut frame.kind {
                    FrameKind::Branch => {
                        th.frames.pop();
                        continue;
                    }
                    FrameKind::Vtr { seq, state, next, .. } => {
                        let ns = next.take().unwrap_or(*state);
                        *state = ns;
                        frame.cursors = vec![(seq.states[ns].body.as_slice(), 0)];
                        th.yielded = true;
                        return Step::Yield;
                    }
                }
            }
            let stmt = &list[idx];
            let advance = |f: &mut Frame<'a>| f.cursors.last_mut().expect("cursor").1 += 1;
            match &stmt.kind {
                RStmtKind::Apply(dp) => {
                    advance(frame);
                    match self.d.apply_datapath(&mut ctx.st, dp) {
                        Ok(sigs) => {
                            for s in sigs {
                                if let Err(e) = self.note_write(ctx, s, &th.id) {
                                    return Step::Fail(PathOutcome::Error(e));
                                }
                            }
                        }
                        Err(e) => return Step::Fail(PathOutcome::Error(e)),
                    }
                    ctx.st = self.d.sim_update(&ctx.st);
                }
                RStmtKind::Drive(c) => {
                    advance(frame);
                    let stim = self.d.ir.conditions[c].stim.expect("VTR-driven condition has a stimulus");
                    ctx.st.f_set(stim, Val::Scalar(Term::bit(true)));
                    ctx.st = self.d.sim_update(&ctx.st);
                }
                RStmtKind::Goto(target) => {
                    advance(frame);
                    if let FrameKind::Vtr { next, name, seq, state } = &mut frame.kind {
                        if next.is_some() {
                            return Step::Fail(PathOutcome::Error(SymError::TwoGotos {
                                vtr: name.to_string(),
                                state: seq.states[*state].name.clone(),
                            }));
                        }
                        *next = Some(*target);
                    }
                }
                RStmtKind::Random(sig) => {
                    advance(frame);
                    let sig = self.d.ir.by_name[sig];
                    let w = self.d.ir.signals[sig].width;
                    let t = self.fresh_var(ctx, sig, w);
                    ctx.st.f_set(sig, Val::Scalar(t));
                    if let Err(e) = self.note_write(ctx, sig, &th.id) {
                        return Step::Fail(PathOutcome::Error(e));
                    }
                    ctx.st = self.d.sim_update(&ctx.st);
                }
                RStmtKind::Wait { cond, body } => {
                    let g = self.d.cond_value(&ctx.st, self.d.ir.by_name[cond]);
                    let enter = match th.decision.take() {
                        Some(d) => d,
                        None => match self.decide(&ctx.pc, &g) {
                            Some(d) => d,
                            None => return Step::Split(g, th.id.clone()),
                        },
                    };
                    if enter {
                        advance(frame);
                        frame.cursors.push((body.as_slice(), 0));
                    } else {
                        th.yielded = true;
                        th.blocked_on = Some(cond.clone());
                        return Step::Yield;
                    }
                }
                RStmtKind::Cover { name, conds, exists } => {
                    advance(frame);
                    let term = conds.iter().fold(Term::bit(true), |acc, c| {
                        Term::and(acc, self.d.cond_value(&ctx.st, self.d.ir.by_name[c]))
                    });
                    ctx.hits.push(CoverHit {
                        key: join(&frame.label, name),
                        exists: *exists,
                        pc: ctx.pc.clone(),
                        term,
                        via_summary: false,
                    });
                }
                RStmtKind::Call(callee) => {
                    advance(frame);
                    let site = &self.sites[&(stmt as *const RStmt as usize)];
                    let label = join(&frame.label, site);
                    let toplevel = th.id.is_empty();
                    match self.enter(ctx, callee, label, toplevel) {
                        Ok(Some(f)) => th.frames.push(f),
                        Ok(None) => {}
                        Err(e) => return Step::Fail(PathOutcome::Error(e)),
                    }
                }
                RStmtKind::Fork(branches) => {
                    advance(frame);
                    let label = frame.label.clone();
                    th.children = branches
                        .iter()
                        .enumerate()
                        .map(|(k, b)| {
                            let mut id = th.id.clone();
                            id.push(k);
                            Thread {
                                id,
                                frames: vec![Frame {
                                    kind: FrameKind::Branch,
                                    cursors: vec![(b.as_slice(), 0)],
                                    label: label.clone(),
                                }],
                                children: vec![],
                                yielded: false,
                                done: false,
                                decision: None,
                                blocked_on: None,
                            }
                        })
                        .collect();
                }
                RStmtKind::Exit => {
                    th.frames.pop();
                    if th.frames.is_empty() {
                        th.done = true;
                        return Step::Done;
                    }
                }
            }
        }
    }

    /// Decide a wait guard without splitting when the path condition settles it.
    fn decide(&self, pc: &Term, g: &Term) -> Option<bool> {
        if g.is_true() {
            return Some(true);
        }
        if g.is_false() {
            return Some(false);
        }
        let quick = self.cfg.budget_bits.min(12);
        let pos = Term::implies(pc.clone(), g.clone());
        if Support::of(&pos).bits() <= quick {
            if matches!(check_valid(&pos, quick), Verdict::Proved { .. }) {
                return Some(true);
            }
            let neg = Term::implies(pc.clone(), Term::not(g.clone()));
            if matches!(check_valid(&neg, quick), Verdict::Proved { .. }) {
                return Some(false);
            }
        }
        None
    }

    /// Reject writes to one signal from two concurrent fork branches in a cycle.
    fn note_write(&self, ctx: &mut Ctx, sig: SigId, tid: &[usize]) -> Result<(), SymError> {
        if tid.is_empty() && ctx.writes.is_empty() {
            return Ok(());
        }
        let prev = ctx.writes.entry(sig).or_insert_with(|| tid.to_vec());
        let related = prev.starts_with(tid) || tid.starts_with(prev);
        if !related {
            return Err(SymError::ForkConflict {
                signal: self.d.ir.signals[sig].name.clone(),
            });
        }
        if tid.len() > prev.len() {
            *prev = tid.to_vec();
        }
        Ok(())
    }
}

fn join(label: &str, name: &str) -> String {
    if label.is_empty() {
        name.to_string()
    } else {
        format!("{label}::{name}")
    }
}

fn finish(p: Path<'_>, outcome: PathOutcome) -> PathEnd {
    PathEnd {
        pc: p.ctx.pc,
        outcome,
        hits: p.ctx.hits,
        cycles: p.ctx.cycle,
        fresh: p.ctx.fresh,
        state: p.ctx.st,
    }
}
