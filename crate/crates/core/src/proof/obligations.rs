//! One proof obligation per cover point per root VTR instantiation. A
//! cover name used by several statements of one VTR is a single point.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::elab::DesignIR;
use crate::frontend::resolve::{RStmt, RStmtKind};
use crate::sym::call_sites;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeVar {
    pub signal: String,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    /// `root::call::path::cp_x`.
    pub name: String,
    pub root: String,
    /// Cover key relative to the root, as reported by the executor.
    pub key: String,
    pub cover: String,
    /// VTR containing the cover statement.
    pub owner: String,
    pub conds: Vec<String>,
    /// `reach` covers need one witness instead of holding on every path.
    pub exists: bool,
    /// Height of the root in the call hierarchy; leaves are level 0.
    pub level: u32,
    /// One entry per `random` executed by the root, callees included.
    pub free_vars: Vec<FreeVar>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObligationError {
    #[error("unknown VTR `{0}`")]
    UnknownVtr(String),
    #[error("cover `{cover}` in `{vtr}` refers to undefined condition `{cond}`")]
    UndefinedCondition {
        vtr: String,
        cover: String,
        cond: String,
    },
}

/// VTRs not called by any other VTR, in declaration order.
pub fn default_roots(ir: &DesignIR) -> Vec<String> {
    let mut called = std::collections::HashSet::new();
    for v in ir.vtrs.values() {
        for (_, callee) in call_sites(v) {
            called.insert(callee);
        }
    }
    ir.vtrs
        .keys()
        .filter(|k| !called.contains(*k))
        .cloned()
        .collect()
}

/// Height of every VTR in the call graph.
pub fn vtr_levels(ir: &DesignIR) -> BTreeMap<String, u32> {
    fn level(ir: &DesignIR, v: &str, memo: &mut HashMap<String, u32>) -> u32 {
        if let Some(&l) = memo.get(v) {
            return l;
        }
        let l = match ir.vtrs.get(v) {
            Some(vtr) => call_sites(vtr)
                .iter()
                .map(|(_, c)| level(ir, c, memo) + 1)
                .max()
                .unwrap_or(0),
            None => 0,
        };
        memo.insert(v.to_string(), l);
        l
    }
    let mut memo = HashMap::new();
    ir.vtrs
        .keys()
        .map(|k| (k.clone(), level(ir, k, &mut memo)))
        .collect()
}

pub fn generate_obligations(ir: &DesignIR, roots: &[String]) -> Result<Vec<Obligation>, ObligationError> {
    let levels = vtr_levels(ir);
    let mut out = Vec::new();
    for root in roots {
        if !ir.vtrs.contains_key(root) {
            return Err(ObligationError::UnknownVtr(root.clone()));
        }
        let mut w = Walker {
            ir,
            covers: Vec::new(),
            free: Vec::new(),
        };
        w.vtr(root, "")?;
        for (key, owner, cover, conds, exists) in w.covers {
            out.push(Obligation {
                name: format!("{root}::{key}"),
                root: root.clone(),
                key,
                cover,
                owner,
                conds,
                exists,
                level: levels[root],
                free_vars: w.free.clone(),
            });
        }
    }
    Ok(out)
}

type CoverSite = (String, String, String, Vec<String>, bool);

struct Walker<'a> {
    ir: &'a DesignIR,
    covers: Vec<CoverSite>,
    free: Vec<FreeVar>,
}

impl Walker<'_> {
    fn vtr(&mut self, name: &str, label: &str) -> Result<(), ObligationError> {
        let v = self
            .ir
            .vtrs
            .get(name)
            .ok_or_else(|| ObligationError::UnknownVtr(name.to_string()))?;
        let Some(seq) = &v.sequence else {
            return Ok(());
        };
        let mut sites = call_sites(v).into_iter();
        for st in &seq.states {
            self.stmts(name, label, &st.body, &mut sites)?;
        }
        Ok(())
    }

    fn stmts(
        &mut self,
        vtr: &str,
        label: &str,
        body: &[RStmt],
        sites: &mut impl Iterator<Item = (String, String)>,
    ) -> Result<(), ObligationError> {
        for s in body {
            match &s.kind {
                RStmtKind::Cover { name, conds, exists } => {
                    if let Some(c) = conds.iter().find(|c| !self.ir.conditions.contains_key(*c)) {
                        return Err(ObligationError::UndefinedCondition {
                            vtr: vtr.to_string(),
                            cover: name.clone(),
                            cond: c.clone(),
                        });
                    }
                    // Repeated statements of one cover name form a single point.
                    let key = join(label, name);
                    if self.covers.iter().any(|c| c.0 == key) {
                        continue;
                    }
                    self.covers.push((
                        key,
                        vtr.to_string(),
                        name.clone(),
                        conds.clone(),
                        *exists,
                    ));
                }
                RStmtKind::Random(sig) => {
                    let width = self.ir.signal(sig).map(|s| s.width).unwrap_or(0);
                    self.free.push(FreeVar {
                        signal: sig.clone(),
                        width,
                    });
                }
                RStmtKind::Call(callee) => {
                    let (site, _) = sites.next().expect("call sites follow statement order");
                    self.vtr(callee, &join(label, &site))?;
                }
                RStmtKind::Wait { body, .. } => self.stmts(vtr, label, body, sites)?,
                RStmtKind::Fork(branches) => {
                    for b in branches {
                        self.stmts(vtr, label, b, sites)?;
                    }
                }
                RStmtKind::Apply(_) | RStmtKind::Drive(_) | RStmtKind::Goto(_) | RStmtKind::Exit => {}
            }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::test_ir;

    const SRC: &str = "cluster cl_o {
  signal x[2];
  c_x0 { if (x == 2'd0) this; }
  c_x1 { if (x == 2'd1) this; }
  vtr_leaf { sequence l { init: { random x; cover cp_a { c_x0; } cover cp_a { c_x0; } reach cp_b { c_x1; } exit; } } }
  vtr_mid { sequence m { init: { vtr_leaf; vtr_leaf; exit; } } }
  vtr_top { sequence t { init: { vtr_mid; cover cp_top { c_x1; } exit; } } }
}";

    #[test]
    fn levels_count_call_height() {
        let lv = vtr_levels(&test_ir(SRC));
        assert_eq!(lv["vtr_leaf"], 0);
        assert_eq!(lv["vtr_mid"], 1);
        assert_eq!(lv["vtr_top"], 2);
    }

    #[test]
    fn default_roots_are_uncalled_vtrs() {
        assert_eq!(default_roots(&test_ir(SRC)), vec!["vtr_top".to_string()]);
    }

    #[test]
    fn one_obligation_per_point_and_instantiation() {
        let ir = test_ir(SRC);
        let obs = generate_obligations(&ir, &["vtr_top".into(), "vtr_leaf".into()]).unwrap();
        let names: Vec<&str> = obs.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "vtr_top::vtr_mid::vtr_leaf::cp_a",
                "vtr_top::vtr_mid::vtr_leaf::cp_b",
                "vtr_top::vtr_mid::vtr_leaf#2::cp_a",
                "vtr_top::vtr_mid::vtr_leaf#2::cp_b",
                "vtr_top::cp_top",
                "vtr_leaf::cp_a",
                "vtr_leaf::cp_b",
            ]
        );
        let b = obs.iter().find(|o| o.name == "vtr_leaf::cp_b").unwrap();
        assert!(b.exists);
        assert_eq!(b.owner, "vtr_leaf");
        assert_eq!(b.level, 0);
    }

    #[test]
    fn unknown_roots_are_errors() {
        assert!(generate_obligations(&test_ir(SRC), &["vtr_nope".into()]).is_err());
    }
}
