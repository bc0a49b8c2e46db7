//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines reach the terminal under `cargo test`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::criteria::{self, Outcome};

const CRITERIA: &[(&str, fn() -> Outcome)] = &[
    ("uart loopback theorem", criteria::uart_loopback_theorem),
    ("addi semantics", criteria::addi_semantics),
    ("hierarchy proof reuse", criteria::summary_reuse),
    ("incremental reproving", criteria::incremental),
    ("rtl oracle equivalence", criteria::rtl_equivalence),
    ("mutation detection", criteria::mutation_detection),
    ("sva bridge soundness", criteria::sva_bridge),
    ("gallina emission", criteria::gallina),
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (i, (name, check)) in CRITERIA.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name} ({secs:.1} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name} ({secs:.1} s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
