//! Validity checking by normalization, then bounded enumeration.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;

use super::term::{apply_bin, Kind, Term};
use crate::frontend::resolve::mask;

/// Maximum number of free bits enumerated before giving up.
pub const DEFAULT_BUDGET_BITS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Verdict {
    Proved { method: Method },
    /// Lowest failing valuation in enumeration order.
    Disproved { witness: BTreeMap<String, u64> },
    Unknown { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    Normalization,
    Enumeration { bits: u32 },
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved { .. })
    }

    pub fn is_disproved(&self) -> bool {
        matches!(self, Verdict::Disproved { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Proved { .. } => f.write_str("Proved"),
            Verdict::Disproved { .. } => f.write_str("Disproved"),
            Verdict::Unknown { .. } => f.write_str("Unknown"),
        }
    }
}

/// Bits of each variable that the term actually depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    /// Sorted by variable name.
    pub vars: Vec<(String, u32, u64)>,
}

impl Support {
    pub fn of(t: &Term) -> Support {
        let mut used: BTreeMap<String, (u32, u64)> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            match t.kind() {
                Kind::Var(n) => {
                    let e = used.entry(n.to_string()).or_insert((t.width(), 0));
                    e.1 |= mask(t.width());
                }
                Kind::Select(inner, hi, lo) if matches!(inner.kind(), Kind::Var(_)) => {
                    if let Kind::Var(n) = inner.kind() {
                        let e = used.entry(n.to_string()).or_insert((inner.width(), 0));
                        e.1 |= mask(hi - lo + 1) << lo;
                    }
                }
                _ => stack.extend(t.children()),
            }
        }
        Support {
            vars: used.into_iter().map(|(n, (w, m))| (n, w, m)).collect(),
        }
    }

    pub fn bits(&self) -> u32 {
        self.vars.iter().map(|v| v.2.count_ones()).sum()
    }

    /// Valuation for enumeration index `k`: bit i of `k` feeds the i-th used
    /// bit, walking variables by name and bits from the least significant.
    pub fn valuation(&self, k: u64) -> Vec<u64> {
        let mut i = 0;
        self.vars
            .iter()
            .map(|(_, _, m)| {
                let mut v = 0u64;
                let mut bits = *m;
                while bits != 0 {
                    let b = bits.trailing_zeros();
                    if (k >> i) & 1 == 1 {
                        v |= 1 << b;
                    }
                    i += 1;
                    bits &= bits - 1;
                }
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Const(u64),
    Var(usize),
    Bin(crate::frontend::resolve::TBin, usize, usize, u32),
    Not(usize, u64),
    Select(usize, u32, u64),
    Concat(Vec<(usize, u32)>),
    Ite(usize, usize, usize),
    Copy(usize),
}

/// A term flattened into a straight-line program over `u64` slots.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
    root: usize,
}

impl Compiled {
    /// `slots` gives the variable order expected by [`Compiled::eval`].
    pub fn new(t: &Term, slots: &[String]) -> Compiled {
        let index: HashMap<&str, usize> = slots.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut ops = Vec::new();
        let mut memo: HashMap<usize, usize> = HashMap::new();
        let root = compile(t, &index, &mut ops, &mut memo);
        Compiled { ops, root }
    }

    pub fn eval_with(&self, vars: &[u64], scratch: &mut Vec<u64>) -> u64 {
        scratch.clear();
        for op in &self.ops {
            let v = match op {
                Op::Const(v) => *v,
                Op::Var(i) => vars[*i],
                Op::Bin(op, a, b, w) => apply_bin(*op, scratch[*a], scratch[*b], *w),
                Op::Not(a, m) => !scratch[*a] & m,
                Op::Select(a, lo, m) => (scratch[*a] >> lo) & m,
                Op::Concat(parts) => parts
                    .iter()
                    .fold(0u64, |acc, (p, w)| if *w >= 64 { scratch[*p] } else { (acc << w) | scratch[*p] }),
                Op::Ite(c, a, b) => {
                    if scratch[*c] != 0 {
                        scratch[*a]
                    } else {
                        scratch[*b]
                    }
                }
                Op::Copy(a) => scratch[*a],
            };
            scratch.push(v);
        }
        scratch[self.root]
    }

    pub fn eval(&self, vars: &[u64]) -> u64 {
        self.eval_with(vars, &mut Vec::with_capacity(self.ops.len()))
    }
}

fn compile(t: &Term, index: &HashMap<&str, usize>, ops: &mut Vec<Op>, memo: &mut HashMap<usize, usize>) -> usize {
    if let Some(&i) = memo.get(&t.id()) {
        return i;
    }
    let op = match t.kind() {
        Kind::Const(v) => Op::Const(*v),
        Kind::Var(n) => Op::Var(index[n.as_ref()]),
        Kind::Bin(op, a, b) => {
            let w = a.width();
            let (a, b) = (compile(a, index, ops, memo), compile(b, index, ops, memo));
            Op::Bin(*op, a, b, w)
        }
        Kind::Not(a) => Op::Not(compile(a, index, ops, memo), mask(t.width())),
        Kind::Select(a, _, lo) => Op::Select(compile(a, index, ops, memo), *lo, mask(t.width())),
        Kind::Concat(ps) => Op::Concat(ps.iter().map(|p| (compile(p, index, ops, memo), p.width())).collect()),
        Kind::Ite(c, a, b) => {
            let c = compile(c, index, ops, memo);
            let a = compile(a, index, ops, memo);
            let b = compile(b, index, ops, memo);
            Op::Ite(c, a, b)
        }
        Kind::Zext(a) => Op::Copy(compile(a, index, ops, memo)),
    };
    ops.push(op);
    let i = ops.len() - 1;
    memo.insert(t.id(), i);
    i
}

/// Decide whether a 1-bit term holds for every valuation of its variables.
pub fn check_valid(t: &Term, budget_bits: u32) -> Verdict {
    assert_eq!(t.width(), 1, "validity of a non-boolean term");
    if t.is_true() {
        return Verdict::Proved {
            method: Method::Normalization,
        };
    }
    let support = Support::of(t);
    let bits = support.bits();
    if t.is_false() || bits == 0 {
        // Constant after normalization; the empty valuation decides it.
        let names: Vec<String> = support.vars.iter().map(|v| v.0.clone()).collect();
        let c = Compiled::new(t, &names);
        if c.eval(&vec![0; names.len()]) == 1 {
            return Verdict::Proved {
                method: Method::Enumeration { bits: 0 },
            };
        }
        return Verdict::Disproved {
            witness: names.into_iter().map(|n| (n, 0)).collect(),
        };
    }
    if bits > budget_bits {
        return Verdict::Unknown {
            reason: format!(
                "{bits} free bits exceed the enumeration budget of {budget_bits}; residual: {t}"
            ),
        };
    }
    let names: Vec<String> = support.vars.iter().map(|v| v.0.clone()).collect();
    let compiled = Compiled::new(t, &names);
    let total = 1u64 << bits;
    let failing = (0..total)
        .into_par_iter()
        .map_init(Vec::new, |scratch, k| {
            let vals = support.valuation(k);
            (k, compiled.eval_with(&vals, scratch))
        })
        .find_first(|(_, v)| *v != 1);
    match failing {
        None => Verdict::Proved {
            method: Method::Enumeration { bits },
        },
        Some((k, _)) => {
            let vals = support.valuation(k);
            Verdict::Disproved {
                witness: names.into_iter().zip(vals).collect(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::resolve::TBin;

    #[test]
    fn equality_with_constant_has_lowest_witness() {
        let x = Term::var("x", 8);
        let t = Term::eq(x, Term::konst(0x5a, 8));
        match check_valid(&t, DEFAULT_BUDGET_BITS) {
            Verdict::Disproved { witness } => assert_eq!(witness["x"], 0),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn self_xor_is_proved_by_normalization() {
        let x = Term::var("x", 32);
        let t = Term::eq(Term::bin(TBin::Xor, x.clone(), x), Term::konst(0, 32));
        assert_eq!(
            check_valid(&t, 0),
            Verdict::Proved {
                method: Method::Normalization
            }
        );
    }

    #[test]
    fn only_selected_bits_count() {
        let x = Term::var("x", 32);
        let lo = Term::select(x, 3, 0);
        let t = Term::bin(TBin::Lt, lo, Term::konst(15, 4));
        let s = Support::of(&t);
        assert_eq!(s.bits(), 4);
        match check_valid(&t, 4) {
            Verdict::Disproved { witness } => assert_eq!(witness["x"], 15),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn budget_overflow_is_unknown() {
        let x = Term::var("x", 32);
        let t = Term::bin(TBin::Ne, x, Term::konst(7, 32));
        assert!(matches!(check_valid(&t, 20), Verdict::Unknown { .. }));
    }
}
