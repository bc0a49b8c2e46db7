//! The acceptance criteria, one check each. `Ok` carries a summary of what
//! was measured, `Err` the first disagreement found.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use tlv_core::elab::{DesignIR, SignalKind};
use tlv_core::gallina::{self, CoqGate, GallinaOptions};
use tlv_core::proof::{generate_obligations, prove_all, CertStore};
use tlv_core::sva::LowerOptions;
use tlv_core::sym::state::specialize_state;
use tlv_core::sym::{call_sites, Compiled, Design, State, Term, Val, Verdict};
use tlv_core::suite::{MUTATIONS, SOC};

use super::*;

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($c:expr, $($arg:tt)*) => {
        if !$c {
            return Err(format!($($arg)*));
        }
    };
}

/// UART loopback: Proved for the symbolic byte, and the netlist delivers
/// every one of the 256 bytes unchanged.
pub fn uart_loopback_theorem() -> Outcome {
    let ir = soc();
    let t0 = Instant::now();
    let report = prove_fresh(&ir, &names(&["vtr_tx_rx_transfer"]), &serial());
    let secs = t0.elapsed().as_secs_f64();
    let v = verdict(&report, "vtr_tx_rx_transfer::cp_tx_rx_eq");
    ensure!(v.is_proved(), "cp_tx_rx_eq is {v:?}");
    ensure!(secs < 60.0, "proof took {secs:.1} s");
    let rtl = Rtl::new(&ir);
    for b in 0..256u64 {
        let got = uart_loopback(&rtl, b);
        ensure!(got == Some(b), "byte {b:#04x}: monitor received {got:?}");
    }
    Ok(format!("Proved in {:.3} s single-threaded; 256/256 bytes agree", secs))
}

/// State of the SoC core with an ADDI-shaped instruction whose immediate
/// is the variable `imm`, and symbolic registers `r0..r3`.
fn addi_state(ir: &DesignIR, opcode: u64, funct3: u64, rs1: u64, rd: u64) -> State {
    let d = Design::new(ir);
    let mut st = d.reset_st();
    let regs = ir.sig("reg_file").expect("reg_file");
    st.f_set(regs, Val::Array((0..4).map(|k| Term::var(&format!("r{k}"), 8)).collect()));
    let instr = Term::concat(vec![
        Term::konst(0, 4),
        Term::var("imm", 8),
        Term::konst(rs1, 5),
        Term::konst(funct3, 3),
        Term::konst(rd, 5),
        Term::konst(opcode, 7),
    ]);
    st.f_set(ir.sig("instr").expect("instr"), Val::Scalar(instr));
    d.sim_update(&st)
}

fn reg_after_cycle(ir: &DesignIR, st: &State, k: usize) -> Term {
    let after = Design::new(ir).sim_cycle(st).expect("cycle");
    match after.f_get(ir.sig("reg_file").unwrap()) {
        Some(Val::Array(ts)) => ts[k].clone(),
        other => panic!("reg_file is {other:?}"),
    }
}

/// ADDI on the 8-bit core: one cycle writes `src + imm` to the destination,
/// checked against wrapping addition for every source and immediate.
pub fn addi_semantics() -> Outcome {
    let ir = soc();
    let slots: Vec<String> = ["r0", "r1", "r2", "r3", "imm"].iter().map(|s| s.to_string()).collect();
    let mut checked = 0u64;
    for rs1 in 0..4u64 {
        for rd in 0..4u64 {
            let st = addi_state(&ir, 0x13, 0, rs1, rd);
            let prog = Compiled::new(&reg_after_cycle(&ir, &st, rd as usize), &slots);
            let mut vals = vec![0x5a, 0xa5, 0x3c, 0xc3, 0];
            let mut scratch = Vec::new();
            for src in 0..256u64 {
                vals[rs1 as usize] = src;
                for imm in 0..256u64 {
                    vals[4] = imm;
                    let got = prog.eval_with(&vals, &mut scratch);
                    // x0 is never written.
                    let want = if rd == 0 { vals[0] } else { (src + imm) & 0xff };
                    ensure!(got == want, "rs1=x{rs1} rd=x{rd} src={src} imm={imm}: got {got}, want {want}");
                    checked += 1;
                }
            }
        }
    }
    // A different funct3 or opcode leaves the destination alone.
    for (op, f3) in [(0x13, 1), (0x33, 0), (0x23, 0)] {
        let st = addi_state(&ir, op, f3, 1, 2);
        let t = reg_after_cycle(&ir, &st, 2);
        ensure!(t == Term::var("r2", 8), "opcode {op:#x} funct3 {f3} changes x2: {t}");
    }
    Ok(format!("{checked} (rs1, rd, src, imm) cases exact"))
}

const DRIVER_TOP: &str = "vtr_cpu_uart_sequence";

/// The top-level driver gives identical verdicts with and without
/// summaries; with them, no called body runs during discharge.
pub fn summary_reuse() -> Outcome {
    let ir = soc();
    let roots = names(&[DRIVER_TOP]);
    let on = prove_fresh(&ir, &roots, &serial());
    let off = prove_fresh(
        &ir,
        &roots,
        &ProveOptions {
            summaries: false,
            ..serial()
        },
    );
    let verdicts = |r: &ProveReport| r.results.iter().map(|o| (o.name.clone(), o.verdict.clone())).collect::<Vec<_>>();
    ensure!(verdicts(&on) == verdicts(&off), "verdicts differ: {:?} vs {:?}", verdicts(&on), verdicts(&off));
    ensure!(on.results.iter().all(|o| o.verdict.is_proved()), "not all Proved: {:?}", verdicts(&on));
    let lower = reverse_calls(&ir, DRIVER_TOP, false);
    let runs = |r: &ProveReport| lower.iter().map(|v| r.body_runs.get(v).copied().unwrap_or(0)).sum::<u64>();
    ensure!(runs(&off) > 0, "the counter saw no lower-level body without summaries");
    ensure!(runs(&on) == 0, "lower-level bodies ran {} times with summaries", runs(&on));
    Ok(format!(
        "{} verdicts identical; lower-level body runs {} with summaries, {} without",
        on.results.len(),
        runs(&on),
        runs(&off)
    ))
}

/// VTRs reachable from `v` through calls (`up == false`) or through
/// callers (`up == true`), excluding `v` itself.
pub fn reverse_calls(ir: &DesignIR, v: &str, up: bool) -> BTreeSet<String> {
    let mut edges: HashMap<String, Vec<String>> = HashMap::new();
    for (name, vtr) in &ir.vtrs {
        for (_, callee) in call_sites(vtr) {
            if up {
                edges.entry(callee).or_default().push(name.clone());
            } else {
                edges.entry(name.clone()).or_default().push(callee);
            }
        }
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![v.to_string()];
    while let Some(x) = stack.pop() {
        for y in edges.get(&x).into_iter().flatten() {
            if out.insert(y.clone()) {
                stack.push(y.clone());
            }
        }
    }
    out
}

/// A leaf VTR edit and the text that performs it.
pub struct LeafEdit {
    pub vtr: &'static str,
    pub find: &'static str,
    pub replace: &'static str,
}

/// Renames the final state of the ADDI chain.
pub const LEAF_EDIT: LeafEdit = LeafEdit {
    vtr: "vtr_cpu_addi_chain",
    find: "d_instr_addi_x0_a;\n        s4;\n      }\n      s4: {",
    replace: "d_instr_addi_x0_a;\n        s_done;\n      }\n      s_done: {",
};

/// Renames the last state of the data write sequence, which three other
/// VTRs call directly or transitively.
pub const CALLED_LEAF_EDIT: LeafEdit = LeafEdit {
    vtr: "vtr_cpu_uart_tx_data",
    find: "instr2: { d_instr_sb_data; instr3; }\n      instr3: { exit; }",
    replace: "instr2: { d_instr_sb_data; done; }\n      done: { exit; }",
};

pub struct Incremental {
    pub total: usize,
    pub reproved: usize,
    pub expected: usize,
    pub cold_ms: f64,
    pub incr_ms: f64,
}

/// Repetitions of each timed run; the median is reported.
const TIMING_RUNS: usize = 7;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Cold proof of the whole suite, then the proof after `edit` starting
/// from the cold run's certificates.
pub fn incremental_run(edit: &LeafEdit) -> Incremental {
    let ir = soc();
    let roots = soc_roots();
    let opts = serial();
    assert_eq!(SOC.matches(edit.find).count(), 1, "edit of {} must match once", edit.vtr);
    let edited = compile(&SOC.replacen(edit.find, edit.replace, 1));
    let mut cold_ms = Vec::new();
    let mut incr_ms = Vec::new();
    let mut first = None;
    for _ in 0..TIMING_RUNS {
        let mut store = CertStore::default();
        let cold = prove_all(&ir, &roots, &mut store, &opts).expect("obligations");
        let incr = prove_all(&edited, &roots, &mut store, &opts).expect("obligations");
        cold_ms.push(cold.wall_ms);
        incr_ms.push(incr.wall_ms);
        first.get_or_insert((cold, incr));
    }
    let (cold, incr) = first.unwrap();
    let mut affected = reverse_calls(&ir, edit.vtr, true);
    affected.insert(edit.vtr.to_string());
    let expected = cold.results.iter().filter(|o| affected.contains(&o.root)).count();
    Incremental {
        total: cold.results.len(),
        reproved: incr.reproved,
        expected,
        cold_ms: median(cold_ms),
        incr_ms: median(incr_ms),
    }
}

pub fn incremental() -> Outcome {
    let r = incremental_run(&LEAF_EDIT);
    ensure!(r.total >= 25, "only {} obligations", r.total);
    ensure!(
        r.reproved == r.expected,
        "reproved {} obligations, reverse closure holds {}",
        r.reproved,
        r.expected
    );
    let ratio = r.incr_ms / r.cold_ms;
    ensure!(ratio < 0.2, "incremental/cold = {:.1}/{:.1} ms = {ratio:.3}", r.incr_ms, r.cold_ms);
    let c = incremental_run(&CALLED_LEAF_EDIT);
    ensure!(
        c.reproved == c.expected,
        "edit of {}: reproved {}, reverse closure holds {}",
        CALLED_LEAF_EDIT.vtr,
        c.reproved,
        c.expected
    );
    Ok(format!(
        "{} obligations; edit of {} reproved {} = closure {}, median {:.1}/{:.1} ms = {ratio:.3}; \
         edit of {} reproved {} = closure {}, ratio {:.3}",
        r.total,
        LEAF_EDIT.vtr,
        r.reproved,
        r.expected,
        r.incr_ms,
        r.cold_ms,
        CALLED_LEAF_EDIT.vtr,
        c.reproved,
        c.expected,
        c.incr_ms / c.cold_ms
    ))
}

/// Number of clock cycles in each random stimulus sequence.
pub const ORACLE_CYCLES: usize = 6;
pub const ORACLE_RUNS: usize = 1000;

fn var_name(cycle: usize, sig: &str, k: Option<usize>) -> String {
    match k {
        Some(k) => format!("{cycle}:{sig}[{k}]"),
        None => format!("{cycle}:{sig}"),
    }
}

/// Symbolic states for `cycles` cycles: sequential signals start from
/// variables, inputs take fresh variables every cycle.
fn symbolic_run(ir: &DesignIR, cycles: usize) -> Vec<State> {
    let d = Design::new(ir);
    let var = |c: usize, i: usize| {
        let s = &ir.signals[i];
        match s.depth {
            Some(n) => Val::Array((0..n as usize).map(|k| Term::var(&var_name(c, &s.name, Some(k)), s.width)).collect()),
            None => Val::Scalar(Term::var(&var_name(c, &s.name, None), s.width)),
        }
    };
    let mut st = d.reset_st();
    for (i, s) in ir.signals.iter().enumerate() {
        if s.kind != SignalKind::Combinational {
            st.f_set(i, var(0, i));
        }
    }
    let mut out = vec![d.sim_update(&st)];
    for c in 1..cycles {
        let mut next = d.next_state(out.last().unwrap()).expect("next state");
        for (i, s) in ir.signals.iter().enumerate() {
            if s.kind == SignalKind::Input {
                next.f_set(i, var(c, i));
            }
        }
        out.push(d.sim_update(&next));
    }
    out
}

/// Emitted-RTL interpretation equals the specialized symbolic states for
/// random initial states and random inputs in every cycle.
pub fn rtl_equivalence() -> Outcome {
    let ir = soc();
    let rtl = Rtl::new(&ir);
    let states = symbolic_run(&ir, ORACLE_CYCLES);
    let mut vars: BTreeMap<String, u32> = BTreeMap::new();
    for st in &states {
        for (_, v) in st.entries() {
            for t in v.terms() {
                vars.extend(t.vars());
            }
        }
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let (mut compared, mut undefined) = (0u64, 0u64);
    for run in 0..ORACLE_RUNS {
        let env: HashMap<String, u64> = vars
            .iter()
            .map(|(n, w)| (n.clone(), rng.gen::<u64>() & ((1u64 << w) - 1)))
            .collect();
        let mut sim = rtl.sim();
        for (c, st) in states.iter().enumerate() {
            if c > 0 {
                sim.step();
            }
            for (i, s) in ir.signals.iter().enumerate() {
                let drive = if c == 0 { s.kind != SignalKind::Combinational } else { s.kind == SignalKind::Input };
                if !drive {
                    continue;
                }
                let p = rtl.path_of(i);
                match s.depth {
                    Some(n) => {
                        for k in 0..n {
                            sim.set_word(p, k, env[&var_name(c, &s.name, Some(k as usize))]);
                        }
                    }
                    None => {
                        sim.set(p, env[&var_name(c, &s.name, None)]);
                    }
                }
            }
            sim.settle();
            let want = specialize_state(st, &env);
            for (i, s) in ir.signals.iter().enumerate() {
                let p = rtl.path_of(i);
                let Some(v) = want.f_get(i) else {
                    undefined += 1;
                    continue;
                };
                for (k, t) in v.terms().into_iter().enumerate() {
                    let Some(e) = t.as_const() else {
                        return Err(format!("{} is not constant after specialization", s.name));
                    };
                    let got = match s.depth {
                        Some(_) => sim.get_word(p, k as u32),
                        None => sim.get(p),
                    };
                    ensure!(
                        got == Some(e),
                        "run {run}, cycle {c}: {}{} symbolic {e:#x}, RTL {got:?}",
                        s.name,
                        if s.depth.is_some() { format!("[{k}]") } else { String::new() }
                    );
                    compared += 1;
                }
            }
        }
    }
    Ok(format!(
        "{ORACLE_RUNS} sequences x {ORACLE_CYCLES} cycles: {compared} values bit-exact, {undefined} undefined symbolic values skipped"
    ))
}

/// Every mutation is Disproved, and its witness byte really is corrupted
/// by the mutated netlist.
pub fn mutation_detection() -> Outcome {
    let mut lines = Vec::new();
    for m in MUTATIONS {
        let ir = compile(&m.apply(SOC));
        let report = prove_fresh(&ir, &names(&["vtr_tx_rx_transfer"]), &serial());
        let v = verdict(&report, "vtr_tx_rx_transfer::cp_tx_rx_eq");
        let Verdict::Disproved { witness } = v else {
            return Err(format!("{}: {v:?}", m.name));
        };
        let Some(&byte) = witness.get("sym_axi_tx_data_0") else {
            return Err(format!("{}: witness {witness:?} lacks the payload", m.name));
        };
        let got = uart_loopback(&Rtl::new(&ir), byte);
        ensure!(got != Some(byte), "{}: witness {byte:#04x} arrives intact in the netlist", m.name);
        lines.push(format!("{}={byte:#04x}", m.name));
    }
    Ok(format!("{}/{} Disproved; witnesses {}", lines.len(), MUTATIONS.len(), lines.join(" ")))
}

/// A toy design for the bridge: `req` is free, `ack` follows the body.
pub struct Toy {
    pub name: &'static str,
    pub body: &'static str,
    /// `ack` in cycle `t + 1` from `req` and the cycle count `t`.
    pub ack_next: fn(u64, usize) -> u64,
    /// `ack` in the same cycle, for combinational variants.
    pub comb: bool,
}

pub const TOYS: &[Toy] = &[
    Toy {
        name: "registered",
        body: "d_ack { ack = req; } tr_t { @e_clk { d_ack; d_cnt; } }",
        ack_next: |req, _| req,
        comb: false,
    },
    Toy {
        name: "drops_at_4",
        body: "d_ack { ack = req & (cnt != 3'd4); } tr_t { @e_clk { d_ack; d_cnt; } }",
        ack_next: |req, t| req & u64::from(t % 8 != 4),
        comb: false,
    },
    Toy {
        name: "stuck_low",
        body: "d_ack { ack = 1'b0; } tr_t { @e_clk { d_ack; d_cnt; } }",
        ack_next: |_, _| 0,
        comb: false,
    },
    Toy {
        name: "combinational",
        body: "d_ack { ack = req; } tr_t { d_ack; @e_clk { d_cnt; } }",
        ack_next: |req, _| req,
        comb: true,
    },
];

/// A property and its meaning on a finite trace of `(req, ack)` pairs.
pub struct Prop {
    pub text: &'static str,
    pub cover: bool,
    pub holds: fn(&[(u64, u64)]) -> bool,
}

pub const PROPS: &[Prop] = &[
    Prop {
        text: "req |-> ##1 ack",
        cover: false,
        holds: |tr| (0..tr.len().saturating_sub(1)).all(|t| tr[t].0 == 0 || tr[t + 1].1 == 1),
    },
    Prop {
        text: "req |=> ack",
        cover: false,
        holds: |tr| (0..tr.len().saturating_sub(1)).all(|t| tr[t].0 == 0 || tr[t + 1].1 == 1),
    },
    Prop {
        text: "req |-> ack",
        cover: false,
        holds: |tr| tr.iter().all(|&(r, a)| r == 0 || a == 1),
    },
    Prop {
        text: "req ##1 req |-> ##1 ack",
        cover: false,
        holds: |tr| (0..tr.len().saturating_sub(2)).all(|t| !(tr[t].0 == 1 && tr[t + 1].0 == 1) || tr[t + 2].1 == 1),
    },
    Prop {
        text: "req ##1 ack",
        cover: true,
        holds: |tr| (0..tr.len().saturating_sub(1)).any(|t| tr[t].0 == 1 && tr[t + 1].1 == 1),
    },
    Prop {
        text: "req ##1 !ack",
        cover: true,
        holds: |tr| (0..tr.len().saturating_sub(1)).any(|t| tr[t].0 == 1 && tr[t + 1].1 == 0),
    },
];

fn toy_source(toy: &Toy, prop: &Prop) -> String {
    let kind = if prop.cover { "cover" } else { "assert" };
    format!(
        "cluster cl_toy {{\n  signal req[1];\n  signal ack[1];\n  signal cnt[3];\n  d_cnt {{ cnt = cnt + 3'd1; }}\n  {}\n  sva {{\n    p: {kind} property (@(posedge clk) {});\n  }}\n}}\n",
        toy.body, prop.text
    )
}

/// Every `req` sequence of length `len`, as `(req, ack)` traces.
fn all_traces(toy: &Toy, len: usize) -> impl Iterator<Item = Vec<(u64, u64)>> + '_ {
    (0..1u64 << len).map(move |bits| {
        let mut ack = 0;
        (0..len)
            .map(|t| {
                let req = (bits >> t) & 1;
                if toy.comb {
                    ack = (toy.ack_next)(req, t);
                }
                let now = (req, ack);
                if !toy.comb {
                    ack = (toy.ack_next)(req, t);
                }
                now
            })
            .collect()
    })
}

/// Bridge verdicts equal brute-force enumeration of all traces up to length 8.
pub fn sva_bridge() -> Outcome {
    let mut cases = 0;
    for toy in TOYS {
        for prop in PROPS {
            for len in 1..=8usize {
                let opts = LowerOptions {
                    trace_len: len as u32,
                    ..LowerOptions::default()
                };
                let ir = compile_with(&toy_source(toy, prop), &opts);
                let report = prove_fresh(&ir, &names(&["vtr_sva_p"]), &serial());
                let v = verdict(&report, "vtr_sva_p::cp_p");
                let brute = if prop.cover {
                    all_traces(toy, len).any(|tr| (prop.holds)(&tr))
                } else {
                    all_traces(toy, len).all(|tr| (prop.holds)(&tr))
                };
                ensure!(
                    v.is_proved() == brute && !matches!(v, Verdict::Unknown { .. }),
                    "{} / `{}` / length {len}: bridge {v:?}, brute force {}",
                    toy.name,
                    prop.text,
                    if brute { "holds" } else { "fails" }
                );
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (design, property, length) cases agree"))
}

/// Gallina for the SoC passes the structural lint; coqc runs when present.
pub fn gallina() -> Outcome {
    let ir = soc();
    let roots = soc_roots();
    let report = prove_fresh(&ir, &roots, &ProveOptions::default());
    let verdicts: HashMap<String, Verdict> =
        report.results.iter().map(|r| (r.name.clone(), r.verdict.clone())).collect();
    let obligations = generate_obligations(&ir, &roots).map_err(|e| e.to_string())?;
    let files = gallina::emit_all(&ir, &obligations, &verdicts, &GallinaOptions::default());
    if let Err(errors) = gallina::lint_files(&files) {
        return Err(format!("{} lint errors, first: {}", errors.len(), errors[0]));
    }
    let admitted = files.iter().map(|f| f.text.matches("Admitted.").count()).sum::<usize>();
    let proved = report.count(Verdict::is_proved);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let gate = gallina::coq_gate(dir.path(), &files);
    let gate = match gate {
        CoqGate::Skipped => "coqc not installed, type-check gate skipped".to_string(),
        CoqGate::Passed => "coqc accepted every file".to_string(),
        CoqGate::Failed(out) => return Err(format!("coqc rejected the files:\n{out}")),
    };
    ensure!(
        admitted == report.results.len() - proved,
        "{admitted} Admitted for {} obligations not Proved",
        report.results.len() - proved
    );
    Ok(format!(
        "{} files lint clean; {proved} Proved theorems, {admitted} Admitted; {gate}",
        files.len()
    ))
}
