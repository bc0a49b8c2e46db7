//! Checking that `unique if` guards writing one signal never overlap.

use std::collections::BTreeMap;
use std::fmt;

use super::ir::*;
use crate::sym::{check_valid, Design, State, Term, Val, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniqueViolation {
    pub target: String,
    pub first: (String, Vec<String>),
    pub second: (String, Vec<String>),
    /// Valuation of the free state under which both guards hold; empty when
    /// the check ran out of budget.
    pub witness: BTreeMap<String, u64>,
}

impl fmt::Display for UniqueViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unique guards writing `{}` overlap: [{}] in `{}` and [{}] in `{}`",
            self.target,
            self.first.1.join(" && "),
            self.first.0,
            self.second.1.join(" && "),
            self.second.0
        )?;
        if !self.witness.is_empty() {
            let w: Vec<String> = self.witness.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, " (e.g. {})", w.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UniqueReport {
    pub violations: Vec<UniqueViolation>,
    /// Pairs that could not be decided within the budget.
    pub undecided: Vec<(String, String, String)>,
    pub checked: usize,
}

/// State in which every sequential signal and input is a free variable
/// named after the signal, with combinational logic settled.
pub fn free_state(ir: &DesignIR) -> State {
    let mut st = State::empty(ir.signals.len());
    for (i, s) in ir.signals.iter().enumerate() {
        if s.kind == SignalKind::Combinational || (s.condition && s.stim_for.is_none()) {
            continue;
        }
        let v = match s.depth {
            Some(d) => Val::Array((0..d).map(|k| Term::var(&format!("{}_{k}", s.name), s.width)).collect()),
            None => Val::Scalar(Term::var(&s.name, s.width)),
        };
        st.f_set(i, v);
    }
    Design::new(ir).sim_update(&st)
}

pub fn check_unique_guards(ir: &DesignIR, budget_bits: u32) -> UniqueReport {
    let mut report = UniqueReport::default();
    if !ir.writes.iter().any(|ws| ws.iter().filter(|w| w.unique).count() >= 2) {
        return report;
    }
    let d = Design::new(ir);
    let st = free_state(ir);
    let names = |g: &[SigId]| g.iter().map(|s| ir.signals[*s].name.clone()).collect::<Vec<_>>();
    for (i, ws) in ir.writes.iter().enumerate() {
        let uniq: Vec<&Write> = ws.iter().filter(|w| w.unique).collect();
        for (a, wa) in uniq.iter().enumerate() {
            for wb in &uniq[a + 1..] {
                if wa.guard == wb.guard && wa.transaction == wb.transaction {
                    continue;
                }
                report.checked += 1;
                let both = Term::and(d.guard_value(&st, &wa.guard), d.guard_value(&st, &wb.guard));
                let first = (wa.transaction.clone(), names(&wa.guard));
                let second = (wb.transaction.clone(), names(&wb.guard));
                match check_valid(&Term::not(both), budget_bits) {
                    Verdict::Proved { .. } => {}
                    Verdict::Disproved { witness } => report.violations.push(UniqueViolation {
                        target: ir.signals[i].name.clone(),
                        first,
                        second,
                        witness,
                    }),
                    Verdict::Unknown { .. } => report.undecided.push((
                        ir.signals[i].name.clone(),
                        first.0,
                        second.0,
                    )),
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::test_ir;

    fn design(guard_b: &str) -> String {
        format!(
            "cluster cl_u {{
  signal s[2];
  signal y[4];
  c_a {{ if (s == 2'd1) this; }}
  c_b {{ if ({guard_b}) this; }}
  d_one {{ y = 4'd1; }}
  d_two {{ y = 4'd2; }}
  tr_u {{ @e_clk {{ unique @c_a {{ d_one; }} unique @c_b {{ d_two; }} }} }}
}}"
        )
    }

    #[test]
    fn disjoint_guards_pass() {
        let r = check_unique_guards(&test_ir(&design("s == 2'd2")), 20);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.checked > 0);
    }

    #[test]
    fn overlap_is_an_elaboration_error() {
        let src = design("s < 2'd2");
        let err = crate::project::compile_sources(
            &[crate::project::Source::new("u.pdvl", src)],
            &crate::sva::LowerOptions::default(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("unique guards writing `y` overlap"), "{err}");
        assert!(err.contains("s=1"), "{err}");
    }
}
