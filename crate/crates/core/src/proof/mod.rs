//! Proof obligations, their discharge by symbolic execution, and the
//! certificate cache that makes re-proving incremental.

pub mod cache;
pub mod closure;
pub mod obligations;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use cache::{cache_dir, CertStore, Certificate};
pub use closure::{DepGraph, HashParams, Node, NodeKind};
pub use obligations::{default_roots, generate_obligations, vtr_levels, FreeVar, Obligation, ObligationError};

use crate::elab::DesignIR;
use crate::sym::{
    call_sites, check_valid, summarize, CoverHit, ExecConfig, Executor, Method, PathEnd, PathOutcome, SummaryTable,
    Support, Term, TraceEntry, Verdict,
};

/// Version tag of the JSON prove report.
pub const REPORT_SCHEMA: &str = "tlv-prove-report/1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProveOptions {
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    pub budget_bits: u32,
    pub max_cycles: u32,
    /// Reuse summaries of called VTRs instead of executing their bodies.
    pub summaries: bool,
    pub trace: bool,
}

impl Default for ProveOptions {
    fn default() -> Self {
        let cfg = ExecConfig::default();
        ProveOptions {
            jobs: 0,
            budget_bits: cfg.budget_bits,
            max_cycles: cfg.max_cycles,
            summaries: true,
            trace: false,
        }
    }
}

impl ProveOptions {
    pub fn exec_config(&self) -> ExecConfig {
        ExecConfig {
            max_cycles: self.max_cycles,
            budget_bits: self.budget_bits,
            trace: self.trace,
            ..ExecConfig::default()
        }
    }

    pub fn hash_params(&self) -> HashParams {
        HashParams {
            budget_bits: self.budget_bits,
            max_cycles: self.max_cycles,
            tool_version: crate::VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObligationResult {
    pub name: String,
    pub root: String,
    pub level: u32,
    pub verdict: Verdict,
    pub time_ms: f64,
    pub cached: bool,
    pub closure: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProveReport {
    pub results: Vec<ObligationResult>,
    /// Obligations discharged in this run rather than taken from the cache.
    pub reproved: usize,
    /// Wall time of the whole run.
    pub wall_ms: f64,
    /// Sum of the discharge times of every reproved obligation.
    pub discharge_ms: f64,
    pub summaries: usize,
    /// Body executions per VTR, over every root run.
    pub body_runs: BTreeMap<String, u64>,
    #[serde(skip)]
    pub traces: BTreeMap<String, Vec<TraceEntry>>,
}

impl ProveReport {
    /// 0 when everything is proved, 1 on any Disproved, else 2.
    pub fn exit_code(&self) -> i32 {
        if self.results.iter().any(|r| r.verdict.is_disproved()) {
            1
        } else if self.results.iter().all(|r| r.verdict.is_proved()) {
            0
        } else {
            2
        }
    }

    pub fn count(&self, f: impl Fn(&Verdict) -> bool) -> usize {
        self.results.iter().filter(|r| f(&r.verdict)).count()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let items: Vec<serde_json::Value> = self
            .results
            .iter()
            .map(|r| {
                let mut v = serde_json::json!({
                    "name": r.name,
                    "verdict": r.verdict.to_string(),
                    "time_ms": r.time_ms,
                    "cached": r.cached,
                    "root": r.root,
                    "level": r.level,
                });
                match &r.verdict {
                    Verdict::Disproved { witness } => v["witness"] = serde_json::json!(witness),
                    Verdict::Unknown { reason } => v["reason"] = serde_json::json!(reason),
                    Verdict::Proved { .. } => {}
                }
                v
            })
            .collect();
        serde_json::json!({
            "schema": REPORT_SCHEMA,
            "tool_version": crate::VERSION,
            "obligations": items,
            "reproved": self.reproved,
            "wall_ms": self.wall_ms,
            "discharge_ms": self.discharge_ms,
            "summaries": self.summaries,
        })
    }
}

/// Verdict of one obligation from the paths of its root's run.
pub fn judge(ob: &Obligation, paths: &[PathEnd], budget_bits: u32) -> Verdict {
    let mut unknown: Option<String> = None;
    let mut reached = false;
    for p in paths {
        let hits: Vec<&CoverHit> = p.hits.iter().filter(|h| h.key == ob.key).collect();
        if let PathOutcome::Error(e) = &p.outcome {
            unknown.get_or_insert_with(|| e.to_string());
            continue;
        }
        if ob.exists {
            for h in &hits {
                reached = true;
                match check_valid(&Term::not(Term::and(h.pc.clone(), h.term.clone())), budget_bits) {
                    Verdict::Disproved { .. } => {
                        let bits = Support::of(&h.term).bits();
                        let method = if bits == 0 {
                            Method::Normalization
                        } else {
                            Method::Enumeration { bits }
                        };
                        return Verdict::Proved { method };
                    }
                    Verdict::Proved { .. } => {}
                    Verdict::Unknown { reason } => {
                        unknown.get_or_insert(reason);
                    }
                }
            }
            if hits.is_empty() && p.outcome != PathOutcome::Exited {
                unknown.get_or_insert_with(|| not_reached(&p.outcome));
            }
            continue;
        }
        for h in &hits {
            reached = true;
            match check_valid(&Term::implies(h.pc.clone(), h.term.clone()), budget_bits) {
                Verdict::Proved { .. } => {}
                d @ Verdict::Disproved { .. } => return d,
                Verdict::Unknown { reason } => {
                    unknown.get_or_insert(reason);
                }
            }
        }
        if hits.is_empty() {
            if p.outcome != PathOutcome::Exited {
                unknown.get_or_insert_with(|| not_reached(&p.outcome));
                continue;
            }
            // A feasible path that exits without covering the point.
            match check_valid(&Term::not(p.pc.clone()), budget_bits) {
                Verdict::Proved { .. } => {}
                d @ Verdict::Disproved { .. } => return d,
                Verdict::Unknown { reason } => {
                    unknown.get_or_insert(reason);
                }
            }
        }
    }
    if let Some(reason) = unknown {
        return Verdict::Unknown { reason };
    }
    if ob.exists {
        return Verdict::Disproved {
            witness: BTreeMap::new(),
        };
    }
    if !reached {
        return Verdict::Unknown {
            reason: "cover point never executed".into(),
        };
    }
    let bits = paths
        .iter()
        .flat_map(|p| &p.hits)
        .filter(|h| h.key == ob.key)
        .map(|h| Support::of(&Term::implies(h.pc.clone(), h.term.clone())).bits())
        .max()
        .unwrap_or(0);
    Verdict::Proved {
        method: if bits == 0 {
            Method::Normalization
        } else {
            Method::Enumeration { bits }
        },
    }
}

fn not_reached(o: &PathOutcome) -> String {
    match o {
        PathOutcome::Budget { cycles } => format!("cover not reached within {cycles} cycles"),
        PathOutcome::WaitNeverTrue { cond, cycles } => {
            format!("cover not reached: waiting on `{cond}` for {cycles} cycles")
        }
        PathOutcome::PathLimit => "cover not reached: path limit exceeded".into(),
        PathOutcome::Error(e) => e.to_string(),
        PathOutcome::Exited => "cover not reached".into(),
    }
}

/// Result of running one root and judging its obligations.
#[derive(Debug, Clone)]
pub struct Discharge {
    pub verdicts: Vec<(Verdict, f64)>,
    pub body_runs: BTreeMap<String, u64>,
    pub trace: Vec<TraceEntry>,
}

/// Run `root` once and judge every obligation in `obs` (all of that root).
pub fn discharge(
    ir: &DesignIR,
    root: &str,
    obs: &[&Obligation],
    cfg: &ExecConfig,
    table: Option<&SummaryTable>,
    closures: &HashMap<String, String>,
) -> Discharge {
    let t0 = Instant::now();
    let res = Executor::new(ir, cfg.clone())
        .with_summaries(table, closures.clone())
        .run(root);
    let run_ms = ms(t0);
    let share = if obs.is_empty() { 0.0 } else { run_ms / obs.len() as f64 };
    let verdicts = obs
        .iter()
        .map(|ob| {
            let t = Instant::now();
            let v = judge(ob, &res.paths, cfg.budget_bits);
            (v, share + ms(t))
        })
        .collect();
    Discharge {
        verdicts,
        body_runs: res.body_runs,
        trace: res.trace,
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// VTRs called, directly or not, from any of `roots`.
fn callees(ir: &DesignIR, roots: &[String]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<String> = roots.to_vec();
    while let Some(v) = stack.pop() {
        if let Some(vtr) = ir.vtrs.get(&v) {
            for (_, c) in call_sites(vtr) {
                if out.insert(c.clone()) {
                    stack.push(c);
                }
            }
        }
    }
    out
}

/// Prove every obligation of `roots`, reusing certificates from `store`
/// and recording new ones in it.
pub fn prove_all(
    ir: &DesignIR,
    roots: &[String],
    store: &mut CertStore,
    opts: &ProveOptions,
) -> Result<ProveReport, ObligationError> {
    let start = Instant::now();
    let obligations = generate_obligations(ir, roots)?;
    let graph = DepGraph::new(ir);
    let params = opts.hash_params();
    let root_hash: HashMap<&str, String> = roots
        .iter()
        .map(|r| (r.as_str(), graph.closure_hash(r, &params)))
        .collect();

    let stale: Vec<String> = roots
        .iter()
        .filter(|r| {
            let h = &root_hash[r.as_str()];
            obligations
                .iter()
                .filter(|o| &o.root == *r)
                .any(|o| store.lookup(&o.name, h).is_none())
        })
        .cloned()
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .expect("thread pool");
    let cfg = opts.exec_config();
    let levels = vtr_levels(ir);

    let (table, closures, runs) = pool.install(|| {
        let mut table = SummaryTable::default();
        let mut closures: HashMap<String, String> = HashMap::new();
        if opts.summaries {
            let called = callees(ir, &stale);
            for v in &called {
                closures.insert(v.clone(), graph.closure_hash(v, &params));
            }
            let mut by_level: BTreeMap<u32, Vec<&String>> = BTreeMap::new();
            for v in &called {
                by_level.entry(levels[v]).or_default().push(v);
            }
            let quiet = ExecConfig { trace: false, ..cfg.clone() };
            for vs in by_level.values() {
                let made: Vec<_> = vs
                    .par_iter()
                    .filter_map(|v| summarize(ir, v, &closures[*v], &quiet, &table, &closures).ok())
                    .collect();
                for s in made {
                    table.insert(s);
                }
            }
        }
        let runs: Vec<(String, Discharge)> = stale
            .par_iter()
            .map(|r| {
                let obs: Vec<&Obligation> = obligations.iter().filter(|o| &o.root == r).collect();
                let t = if opts.summaries { Some(&table) } else { None };
                (r.clone(), discharge(ir, r, &obs, &cfg, t, &closures))
            })
            .collect();
        (table, closures, runs)
    });
    drop(closures);

    let mut report = ProveReport {
        summaries: table.len(),
        ..Default::default()
    };
    let mut fresh: HashMap<&str, (Verdict, f64)> = HashMap::new();
    for (root, d) in &runs {
        for (k, v) in &d.body_runs {
            *report.body_runs.entry(k.clone()).or_insert(0) += v;
        }
        if opts.trace {
            report.traces.insert(root.clone(), d.trace.clone());
        }
        let obs = obligations.iter().filter(|o| &o.root == root);
        for (o, v) in obs.zip(&d.verdicts) {
            fresh.insert(o.name.as_str(), v.clone());
        }
    }
    for o in &obligations {
        let closure = root_hash[o.root.as_str()].clone();
        let (verdict, time_ms, cached) = match fresh.remove(o.name.as_str()) {
            Some((v, t)) => {
                store.record(
                    &o.name,
                    Certificate {
                        closure: closure.clone(),
                        verdict: v.clone(),
                        time_ms: t,
                        level: o.level,
                    },
                );
                report.reproved += 1;
                report.discharge_ms += t;
                (v, t, false)
            }
            None => {
                let c = store.lookup(&o.name, &closure).expect("cached obligation");
                (c.verdict.clone(), 0.0, true)
            }
        };
        report.results.push(ObligationResult {
            name: o.name.clone(),
            root: o.root.clone(),
            level: o.level,
            verdict,
            time_ms,
            cached,
            closure,
        });
    }
    report.wall_ms = ms(start);
    Ok(report)
}
