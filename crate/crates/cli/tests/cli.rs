//! End-to-end runs of the `tlv` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tlv_core::suite::{MUTATIONS, SOC, SOC_CONFIG};

fn tlv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlv"))
        .current_dir(dir)
        .env_remove("TLV_CACHE_DIR")
        .args(args)
        .output()
        .expect("tlv runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A temporary project holding the bundled SoC and its `tlv.toml`.
fn soc_project() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("soc.pdvl"), SOC).unwrap();
    fs::write(dir.path().join("tlv.toml"), SOC_CONFIG).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn compile_reports_the_design_size() {
    let p = soc_project();
    let o = tlv(p.path(), &["compile"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok: 5 instances,"), "{}", stdout(&o));
}

#[test]
fn dump_ir_is_json() {
    let p = soc_project();
    let o = tlv(p.path(), &["compile", "--dump-ir"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["signals"].as_array().unwrap().len() > 10);
    assert!(v["vtrs"].as_array().unwrap().iter().any(|n| n == "vtr_tx_rx_transfer"));
}

#[test]
fn prove_then_prove_again_hits_the_cache() {
    let p = soc_project();
    let o = tlv(p.path(), &["prove", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cold: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cold["schema"], "tlv-prove-report/1");
    let obligations = cold["obligations"].as_array().unwrap();
    assert_eq!(obligations.len(), 27);
    assert_eq!(cold["reproved"], 27);
    for ob in obligations {
        assert_eq!(ob["verdict"], "Proved", "{ob}");
        for key in ["name", "root", "level", "time_ms", "cached"] {
            assert!(ob.get(key).is_some(), "missing {key} in {ob}");
        }
    }
    assert!(p.path().join(".tlvcache/certificates.json").is_file());

    let o = tlv(p.path(), &["prove", "--json"]);
    let warm: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(warm["reproved"], 0);
    assert!(warm["obligations"].as_array().unwrap().iter().all(|ob| ob["cached"] == true));
}

#[test]
fn report_counts_certificates_per_level() {
    let p = soc_project();
    let o = tlv(p.path(), &["report"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("total: 0/27 proved"), "{}", stdout(&o));
    tlv(p.path(), &["prove"]);
    let o = tlv(p.path(), &["report", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["proved"], 27);
    assert_eq!(v["total"], 27);
    let levels = v["levels"].as_array().unwrap();
    let sum: u64 = levels.iter().map(|l| l["total"].as_u64().unwrap()).sum();
    assert_eq!(sum, 27);
}

#[test]
fn cache_dir_comes_from_the_environment() {
    let p = soc_project();
    let cache = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tlv"))
        .current_dir(p.path())
        .env("TLV_CACHE_DIR", cache.path())
        .args(["prove"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(cache.path().join("certificates.json").is_file());
    assert!(!p.path().join(".tlvcache").exists());
}

#[test]
fn mutation_exits_1_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "soc.pdvl", &MUTATIONS[0].apply(SOC));
    let o = tlv(dir.path(), &["prove", "soc.pdvl"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("DISPROVED"), "{out}");
    assert!(out.contains("witness: sym_axi_tx_data_0 = 0x8"), "{out}");
}

#[test]
fn disproved_verdicts_are_not_cached() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "soc.pdvl", &MUTATIONS[0].apply(SOC));
    tlv(dir.path(), &["prove", "soc.pdvl"]);
    let o = tlv(dir.path(), &["prove", "soc.pdvl", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for ob in v["obligations"].as_array().unwrap() {
        if ob["verdict"] == "Disproved" {
            assert_eq!(ob["cached"], false, "{ob}");
        }
    }
}

const WIDE: &str = "cluster cl_w {
  signal x[22];
  c_not_magic { if (x != 22'h12345) this; }
  vtr_w { sequence s { init: { random x; check; } check: { cover cp_w { c_not_magic; } exit; } } }
}
";

#[test]
fn over_budget_is_unknown_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "w.pdvl", WIDE);
    let o = tlv(dir.path(), &["prove", "w.pdvl"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("UNKNOWN"), "{}", stdout(&o));
    // With a budget covering all 22 bits the same obligation is refuted.
    let o = tlv(dir.path(), &["prove", "w.pdvl", "--budget-bits", "22", "--json"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["obligations"][0]["witness"]["sym_x_0"], 0x12345);
}

#[test]
fn syntax_errors_exit_3_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.pdvl", "cluster cl_a {\n  signal x[8]\n}\n");
    let o = tlv(dir.path(), &["prove", "bad.pdvl"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("bad.pdvl:"), "{}", stderr(&o));
}

#[test]
fn missing_project_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = tlv(dir.path(), &["compile"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn emit_sv_writes_one_file_per_module() {
    let p = soc_project();
    let o = tlv(p.path(), &["emit-sv", "--outdir", "rtl"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut files: Vec<String> = fs::read_dir(p.path().join("rtl"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files.len(), 5, "{files:?}");
    assert!(files.iter().all(|f| f.ends_with(".v")));
}

#[test]
fn emit_gallina_lints_and_writes_the_project_file() {
    let p = soc_project();
    let o = tlv(p.path(), &["emit-gallina", "--outdir", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("lint: ok"));
    let coq = p.path().join("out/coq");
    let project = fs::read_to_string(coq.join("_CoqProject")).unwrap();
    assert!(project.starts_with("-Q . TLV"));
    for f in ["tlv_base.v", "tlv_design.v", "tlv_theorems.v"] {
        assert!(coq.join(f).is_file(), "{f}");
        assert!(project.contains(f));
    }
}

#[test]
fn trace_dump_lists_cycles_per_root() {
    let p = soc_project();
    let o = tlv(p.path(), &["prove", "--trace", "trace.json", "--no-summaries"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(p.path().join("trace.json")).unwrap()).unwrap();
    let rows = v["vtr_tx_rx_transfer"].as_array().unwrap();
    assert!(rows.len() > 10);
    assert_eq!(rows[0]["cycle"], 0);
    assert!(rows[0]["state"].get("axi_tx_data").is_some(), "{}", rows[0]);
}
