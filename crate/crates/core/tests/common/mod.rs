//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod criteria;

use std::collections::HashMap;

use tlv_core::elab::{DesignIR, SigId};
use tlv_core::project::{compile_sources, Source};
use tlv_core::proof::{prove_all, CertStore, ProveOptions, ProveReport};
use tlv_core::rtl::{emit_rtl, net_path, top_module, Netlist, Sim};
use tlv_core::sva::LowerOptions;
use tlv_core::sym::Verdict;

pub fn compile(src: &str) -> DesignIR {
    compile_with(src, &LowerOptions::default())
}

pub fn compile_with(src: &str, sva: &LowerOptions) -> DesignIR {
    match compile_sources(&[Source::new("design.pdvl", src)], sva) {
        Ok(c) => c.ir,
        Err(e) => panic!("design does not compile: {e}"),
    }
}

pub fn soc() -> DesignIR {
    compile(tlv_core::suite::SOC)
}

pub fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn soc_roots() -> Vec<String> {
    names(tlv_core::suite::SOC_TOPS)
}

/// Single-threaded options, so timings are comparable across runs.
pub fn serial() -> ProveOptions {
    ProveOptions {
        jobs: 1,
        ..ProveOptions::default()
    }
}

pub fn prove_fresh(ir: &DesignIR, roots: &[String], opts: &ProveOptions) -> ProveReport {
    let mut store = CertStore::default();
    prove_all(ir, roots, &mut store, opts).expect("obligations")
}

pub fn verdict<'a>(r: &'a ProveReport, name: &str) -> &'a Verdict {
    &r.results
        .iter()
        .find(|o| o.name == name)
        .unwrap_or_else(|| panic!("no obligation `{name}`"))
        .verdict
}

/// The emitted netlist of `ir`, parsed back by the bundled interpreter.
pub struct Rtl<'a> {
    pub ir: &'a DesignIR,
    pub netlist: Netlist,
    paths: HashMap<String, String>,
}

impl<'a> Rtl<'a> {
    pub fn new(ir: &'a DesignIR) -> Self {
        let files = emit_rtl(ir);
        let netlist = Netlist::parse(files.iter().map(|f| (f.name.as_str(), f.text.as_str())))
            .expect("emitted RTL parses");
        let paths = ir
            .signals
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), net_path(ir, i)))
            .collect();
        Rtl { ir, netlist, paths }
    }

    pub fn sim(&self) -> Sim {
        let mut sim = Sim::new(&self.netlist, &top_module(self.ir)).expect("top module elaborates");
        sim.settle();
        sim
    }

    pub fn path(&self, name: &str) -> &str {
        self.paths
            .get(name)
            .unwrap_or_else(|| panic!("no signal `{name}`"))
    }

    pub fn path_of(&self, sig: SigId) -> &str {
        self.path(&self.ir.signals[sig].name)
    }

    pub fn set(&self, sim: &mut Sim, name: &str, v: u64) {
        assert!(sim.set(self.path(name), v), "cannot set `{name}`");
    }

    pub fn get(&self, sim: &Sim, name: &str) -> u64 {
        sim.get(self.path(name))
            .unwrap_or_else(|| panic!("cannot read `{name}`"))
    }
}

/// Send `byte` through the AXI write path of the SoC netlist and return
/// what the UART monitor receives, or `None` if nothing arrives.
pub fn uart_loopback(rtl: &Rtl, byte: u64) -> Option<u64> {
    let mut sim = rtl.sim();
    rtl.set(&mut sim, "axi_tx_data", byte);
    rtl.set(&mut sim, "stim_c_axi_trans", 1);
    sim.settle();
    sim.step();
    rtl.set(&mut sim, "stim_c_axi_trans", 0);
    sim.settle();
    // 10 bit periods of 4 clocks plus pipeline slack.
    for _ in 0..200 {
        if rtl.get(&sim, "rx_valid") == 1 {
            return Some(rtl.get(&sim, "uart_rx_data"));
        }
        sim.step();
    }
    None
}
