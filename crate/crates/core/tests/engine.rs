//! End-to-end checks of the prover, caches, closures and emitters on the
//! bundled designs.

mod common;

use std::collections::HashMap;
use std::fs;

use tlv_core::gallina::{emit_all, lint_files, GallinaOptions};
use tlv_core::project::{compile_sources, CompileError, Project, Source};
use tlv_core::proof::{generate_obligations, prove_all, CertStore, DepGraph, HashParams, Node, NodeKind, ProveOptions};
use tlv_core::rtl::emit_rtl;
use tlv_core::suite::{HANDSHAKE, MUTATIONS, SOC};
use tlv_core::sva::LowerOptions;
use tlv_core::sym::Verdict;

use common::*;

fn verdicts(r: &tlv_core::proof::ProveReport) -> Vec<(String, Verdict)> {
    let mut v: Vec<_> = r.results.iter().map(|o| (o.name.clone(), o.verdict.clone())).collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

fn hashes(ir: &tlv_core::elab::DesignIR) -> HashMap<String, String> {
    let g = DepGraph::new(ir);
    soc_roots()
        .into_iter()
        .map(|r| {
            let h = g.closure_hash(&r, &HashParams::default());
            (r, h)
        })
        .collect()
}

#[test]
fn cached_and_fresh_verdicts_agree() {
    let ir = soc();
    let roots = soc_roots();
    let dir = tempfile::tempdir().unwrap();
    let mut store = CertStore::default();
    let cold = prove_all(&ir, &roots, &mut store, &ProveOptions::default()).unwrap();
    store.save(dir.path()).unwrap();

    let mut warm_store = CertStore::load(dir.path()).unwrap();
    let warm = prove_all(&ir, &roots, &mut warm_store, &ProveOptions::default()).unwrap();
    assert_eq!(warm.reproved, 0);
    assert!(warm.results.iter().all(|o| o.cached));

    let flushed = prove_fresh(&ir, &roots, &ProveOptions::default());
    assert_eq!(verdicts(&cold), verdicts(&warm));
    assert_eq!(verdicts(&cold), verdicts(&flushed));
}

#[test]
fn changed_parameters_miss_the_cache() {
    let ir = soc();
    let roots = names(&["vtr_cpu_addi_chain"]);
    let mut store = CertStore::default();
    prove_all(&ir, &roots, &mut store, &ProveOptions::default()).unwrap();
    let opts = ProveOptions {
        budget_bits: 19,
        ..ProveOptions::default()
    };
    let again = prove_all(&ir, &roots, &mut store, &opts).unwrap();
    assert_eq!(again.reproved, again.results.len());
}

#[test]
fn parallel_and_serial_runs_agree() {
    let ir = soc();
    let roots = soc_roots();
    let one = prove_fresh(&ir, &roots, &serial());
    let four = prove_fresh(&ir, &roots, &ProveOptions { jobs: 4, ..ProveOptions::default() });
    assert_eq!(verdicts(&one), verdicts(&four));
    assert_eq!(one.results.iter().map(|o| &o.name).collect::<Vec<_>>(), four.results.iter().map(|o| &o.name).collect::<Vec<_>>());

    for m in &MUTATIONS[..3] {
        let ir = compile(&m.apply(SOC));
        let roots = names(&["vtr_tx_rx_transfer", "vtr_uart_tx_frame"]);
        let a = prove_fresh(&ir, &roots, &serial());
        let b = prove_fresh(&ir, &roots, &ProveOptions { jobs: 4, ..ProveOptions::default() });
        assert_eq!(verdicts(&a), verdicts(&b), "{}", m.name);
    }
}

#[test]
fn summaries_do_not_change_any_verdict() {
    let ir = soc();
    let roots = soc_roots();
    let with = prove_fresh(&ir, &roots, &ProveOptions { summaries: true, ..serial() });
    let without = prove_fresh(&ir, &roots, &ProveOptions { summaries: false, ..serial() });
    assert_eq!(verdicts(&with), verdicts(&without));
    assert_eq!(without.summaries, 0);
}

#[test]
fn every_bundled_obligation_is_proved() {
    let report = prove_fresh(&soc(), &soc_roots(), &ProveOptions::default());
    assert_eq!(report.results.len(), 27);
    for o in &report.results {
        assert!(o.verdict.is_proved(), "{}: {:?}", o.name, o.verdict);
    }
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn closure_hashes_ignore_layout_and_comments() {
    let reformatted: String = SOC
        .lines()
        .filter(|l| !l.trim_start().starts_with("//"))
        .map(|l| format!("    {}   // note\n", l.trim()))
        .collect();
    assert_ne!(reformatted, SOC);
    assert_eq!(hashes(&compile(&reformatted)), hashes(&soc()));
}

const SPARE: &str = "
cluster tb_spare {
  signal spare_x[4];
  c_spare { if (spare_x == 4'd3) this; }
  vtr_spare {
    sequence spare {
      init: { random spare_x; cover cp_spare { c_spare; } exit; }
    }
  }
}
";

fn with_spare(cluster: &str) -> String {
    let src = SOC.replace("build TB {", &format!("{cluster}\nbuild TB {{"));
    src.replace("  join tb_uart_frame TB;", "  join tb_uart_frame TB;\n  join tb_spare TB;")
}

#[test]
fn renaming_an_unrelated_cluster_keeps_hashes() {
    let base = hashes(&compile(&with_spare(SPARE)));
    let renamed = SPARE
        .replace("spare_x", "spare_y")
        .replace("vtr_spare", "vtr_extra")
        .replace("c_spare", "c_extra");
    assert_eq!(hashes(&compile(&with_spare(&renamed))), base);
    assert_eq!(base, hashes(&soc()));
}

/// After an edit, exactly the roots whose closure holds the edited element
/// get a new hash.
fn check_edit(find: &str, replace: &str, node: Node) {
    assert_eq!(SOC.matches(find).count(), 1, "{find}");
    let before = soc();
    let after = compile(&SOC.replacen(find, replace, 1));
    let (h0, h1) = (hashes(&before), hashes(&after));
    let g = DepGraph::new(&before);
    let mut changed = 0;
    for r in soc_roots() {
        let holds = g.closure(&r).contains(&node);
        assert_eq!(h0[&r] != h1[&r], holds, "{r}");
        changed += holds as usize;
    }
    assert!(changed > 0);
}

#[test]
fn datapath_edit_changes_exactly_the_closures_holding_it() {
    check_edit(
        "d_addi { dp_out = rs1_dato + imm_i; }",
        "d_addi { dp_out = rs1_dato + imm_i + 8'd1; }",
        Node { kind: NodeKind::Datapath, name: "d_addi".into() },
    );
    check_edit(
        "c_txd_d7 { if (uart_txd == axi_tx_data[7]) this; }",
        "c_txd_d7 { if (uart_txd != axi_tx_data[7]) this; }",
        Node { kind: NodeKind::Condition, name: "c_txd_d7".into() },
    );
}

#[test]
fn emitters_are_deterministic() {
    for src in [SOC, HANDSHAKE] {
        let a = compile(src);
        let b = compile(src);
        assert_eq!(emit_rtl(&a), emit_rtl(&b));
        let obs = generate_obligations(&a, &tlv_core::proof::default_roots(&a)).unwrap();
        let ga = emit_all(&a, &obs, &HashMap::new(), &GallinaOptions::default());
        let gb = emit_all(&b, &obs, &HashMap::new(), &GallinaOptions::default());
        assert_eq!(ga, gb);
        lint_files(&ga).expect("lint");
    }
}

#[test]
fn sva_files_join_the_design() {
    let dir = tempfile::tempdir().unwrap();
    let design = HANDSHAKE.split("  sva {").next().unwrap().to_string() + "}\n";
    fs::write(dir.path().join("hs.pdvl"), design).unwrap();
    fs::write(
        dir.path().join("hs_props.sva"),
        "req_ack: assert property (@(posedge clk) req |-> ##1 ack);\n",
    )
    .unwrap();
    let project = Project::from_files(&[dir.path().join("hs.pdvl"), dir.path().join("hs_props.sva")]).unwrap();
    let ir = project.compile().unwrap().ir;
    assert!(ir.vtrs.contains_key("vtr_sva_req_ack"));
    let report = prove_fresh(&ir, &project.roots(&ir), &serial());
    assert_eq!(report.results.len(), 1);
    assert!(report.results[0].verdict.is_proved(), "{:?}", report.results[0]);
}

#[test]
fn sva_bound_is_reported() {
    let src = "cluster c { signal req[1]; signal ack[1]; d_ack { ack = req; } tr_ack { @e_clk { d_ack; } }
  sva { long: assert property (@(posedge clk) req |-> ##6 ack); } }";
    let err = compile_sources(&[Source::new("b.pdvl", src)], &LowerOptions { bound: 4, trace_len: 8 })
        .expect_err("bound error");
    let text = err.to_string();
    assert!(matches!(err, CompileError::Frontend(_)), "{err:?}");
    assert!(text.contains("`long`") && text.contains("bound is 4"), "{text}");
    compile_sources(&[Source::new("b.pdvl", src)], &LowerOptions { bound: 8, trace_len: 8 }).expect("larger bound");
}
