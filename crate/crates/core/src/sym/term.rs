//! Symbolic bit-vector terms.
//!
//! Terms are immutable DAGs shared through `Arc`. Every constructor
//! normalizes locally (constant folding, identities, operand ordering for
//! commutative operators), so a term built only from constants is always a
//! single constant.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::frontend::resolve::{mask, TBin};

#[derive(Clone)]
pub struct Term(Arc<Node>);

pub struct Node {
    pub kind: Kind,
    pub width: u32,
    hash: u64,
}

#[derive(Clone, PartialEq, Eq)]
pub enum Kind {
    Const(u64),
    Var(Arc<str>),
    Bin(TBin, Term, Term),
    Not(Term),
    Select(Term, u32, u32),
    /// Most significant part first.
    Concat(Vec<Term>),
    Ite(Term, Term, Term),
    Zext(Term),
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash
                && self.0.width == other.0.width
                && self.0.kind == other.0.kind)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

/// Concrete semantics of a binary operator on operands of width `w`.
pub fn apply_bin(op: TBin, a: u64, b: u64, w: u32) -> u64 {
    let m = mask(w);
    match op {
        TBin::Add => a.wrapping_add(b) & m,
        TBin::Sub => a.wrapping_sub(b) & m,
        TBin::And => a & b,
        TBin::Or => a | b,
        TBin::Xor => a ^ b,
        TBin::Shl => {
            if b >= w as u64 {
                0
            } else {
                (a << b) & m
            }
        }
        TBin::Shr => {
            if b >= w as u64 {
                0
            } else {
                a >> b
            }
        }
        TBin::Eq => (a == b) as u64,
        TBin::Ne => (a != b) as u64,
        TBin::Lt => (a < b) as u64,
    }
}

fn is_commutative(op: TBin) -> bool {
    matches!(
        op,
        TBin::Add | TBin::And | TBin::Or | TBin::Xor | TBin::Eq | TBin::Ne
    )
}

impl Term {
    fn mk(kind: Kind, width: u32) -> Term {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        width.hash(&mut h);
        match &kind {
            Kind::Const(v) => (0u8, v).hash(&mut h),
            Kind::Var(n) => (1u8, n).hash(&mut h),
            Kind::Bin(op, a, b) => (2u8, *op as u8, a.0.hash, b.0.hash).hash(&mut h),
            Kind::Not(a) => (3u8, a.0.hash).hash(&mut h),
            Kind::Select(a, hi, lo) => (4u8, a.0.hash, hi, lo).hash(&mut h),
            Kind::Concat(ps) => {
                5u8.hash(&mut h);
                for p in ps {
                    p.0.hash.hash(&mut h);
                }
            }
            Kind::Ite(c, a, b) => (6u8, c.0.hash, a.0.hash, b.0.hash).hash(&mut h),
            Kind::Zext(a) => (7u8, a.0.hash).hash(&mut h),
        }
        Term(Arc::new(Node {
            kind,
            width,
            hash: h.finish(),
        }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    /// Stable identity of the shared node, valid while the term is alive.
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn konst(value: u64, width: u32) -> Term {
        Term::mk(Kind::Const(value & mask(width)), width)
    }

    pub fn bit(b: bool) -> Term {
        Term::konst(b as u64, 1)
    }

    pub fn var(name: &str, width: u32) -> Term {
        Term::mk(Kind::Var(Arc::from(name)), width)
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.0.kind {
            Kind::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.as_const() == Some(1) && self.width() == 1
    }

    pub fn is_false(&self) -> bool {
        self.as_const() == Some(0)
    }

    fn is_ones(&self) -> bool {
        self.as_const() == Some(mask(self.width()))
    }

    fn ite_const_arms(&self) -> Option<(&Term, u64, u64)> {
        match &self.0.kind {
            Kind::Ite(c, a, b) => Some((c, a.as_const()?, b.as_const()?)),
            _ => None,
        }
    }

    pub fn bin(op: TBin, a: Term, b: Term) -> Term {
        let (mut a, mut b) = (a, b);
        if op != TBin::Shl && op != TBin::Shr {
            debug_assert_eq!(a.width(), b.width(), "operand widths of {op:?}");
        }
        let w = a.width();
        let rw = if op.is_comparison() { 1 } else { w };
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Term::konst(apply_bin(op, x, y, w), rw);
        }
        if is_commutative(op) && (a.as_const().is_some() || (b.as_const().is_none() && a.0.hash > b.0.hash)) {
            std::mem::swap(&mut a, &mut b);
        }
        // Push constant operations through if-then-else with constant arms.
        if let Some(k) = b.as_const() {
            if let Some((c, x, y)) = a.ite_const_arms() {
                return Term::ite(
                    c.clone(),
                    Term::konst(apply_bin(op, x, k, w), rw),
                    Term::konst(apply_bin(op, y, k, w), rw),
                );
            }
        }
        let same = a == b;
        match op {
            TBin::Add if b.is_false() => return a,
            TBin::Sub if b.is_false() => return a,
            TBin::Sub if same => return Term::konst(0, w),
            TBin::And if b.is_false() => return b,
            TBin::And if b.is_ones() || same => return a,
            TBin::Or if b.is_false() || same => return a,
            TBin::Or if b.is_ones() => return b,
            TBin::Xor if b.is_false() => return a,
            TBin::Xor if same => return Term::konst(0, w),
            TBin::Shl | TBin::Shr if b.is_false() => return a,
            TBin::Shl | TBin::Shr if b.as_const().is_some_and(|k| k >= w as u64) => {
                return Term::konst(0, w)
            }
            TBin::Eq if same => return Term::bit(true),
            TBin::Ne | TBin::Lt if same => return Term::bit(false),
            TBin::Lt if b.is_false() => return Term::bit(false),
            TBin::Eq | TBin::Ne if w == 1 && b.as_const().is_some() => {
                let k = b.as_const().unwrap_or(0);
                let positive = (op == TBin::Eq) == (k == 1);
                return if positive { a } else { Term::not(a) };
            }
            _ => {}
        }
        if w == 1 && matches!(op, TBin::And | TBin::Or | TBin::Xor) && (is_not_of(&a, &b) || is_not_of(&b, &a)) {
            return match op {
                TBin::And => Term::bit(false),
                _ => Term::bit(true),
            };
        }
        if matches!(op, TBin::Eq | TBin::Ne) {
            if let Some(t) = simplify_eq(op, &a, &b) {
                return t;
            }
        }
        Term::mk(Kind::Bin(op, a, b), rw)
    }

    pub fn not(a: Term) -> Term {
        let w = a.width();
        if let Some(v) = a.as_const() {
            return Term::konst(!v, w);
        }
        match a.kind() {
            Kind::Not(x) => x.clone(),
            Kind::Bin(TBin::Eq, x, y) => Term::bin(TBin::Ne, x.clone(), y.clone()),
            Kind::Bin(TBin::Ne, x, y) => Term::bin(TBin::Eq, x.clone(), y.clone()),
            _ => Term::mk(Kind::Not(a), w),
        }
    }

    pub fn select(a: Term, hi: u32, lo: u32) -> Term {
        let w = hi - lo + 1;
        debug_assert!(hi < a.width());
        if lo == 0 && w == a.width() {
            return a;
        }
        if let Some(v) = a.as_const() {
            return Term::konst(v >> lo, w);
        }
        match a.kind() {
            Kind::Select(x, _, l2) => return Term::select(x.clone(), hi + l2, lo + l2),
            Kind::Zext(x) => {
                let xw = x.width();
                if lo >= xw {
                    return Term::konst(0, w);
                }
                if hi < xw {
                    return Term::select(x.clone(), hi, lo);
                }
                return Term::zext(Term::select(x.clone(), xw - 1, lo), w);
            }
            Kind::Concat(parts) => {
                // Parts are msb first; walk from the lsb end.
                let mut pieces = Vec::new();
                let mut base = 0;
                for p in parts.iter().rev() {
                    let pw = p.width();
                    let (plo, phi) = (base, base + pw - 1);
                    if phi >= lo && plo <= hi {
                        let s_lo = lo.max(plo) - plo;
                        let s_hi = hi.min(phi) - plo;
                        pieces.push(Term::select(p.clone(), s_hi, s_lo));
                    }
                    base += pw;
                }
                pieces.reverse();
                return Term::concat(pieces);
            }
            Kind::Ite(c, x, y) if x.as_const().is_some() && y.as_const().is_some() => {
                return Term::ite(
                    c.clone(),
                    Term::select(x.clone(), hi, lo),
                    Term::select(y.clone(), hi, lo),
                )
            }
            _ => {}
        }
        Term::mk(Kind::Select(a, hi, lo), w)
    }

    pub fn concat(parts: Vec<Term>) -> Term {
        let mut flat: Vec<Term> = Vec::new();
        for p in parts {
            let items = match p.kind() {
                Kind::Concat(inner) => inner.clone(),
                _ => vec![p],
            };
            for q in items {
                if let (Some(last), Some(v)) = (flat.last(), q.as_const()) {
                    if let Some(lv) = last.as_const() {
                        let w = last.width() + q.width();
                        if w <= 64 {
                            let merged = Term::konst((lv << q.width()) | v, w);
                            flat.pop();
                            flat.push(merged);
                            continue;
                        }
                    }
                }
                flat.push(q);
            }
        }
        // A leading zero constant is a zero-extension.
        if flat.len() == 2 && flat[0].is_false() {
            let w = flat[0].width() + flat[1].width();
            return Term::zext(flat[1].clone(), w);
        }
        if flat.len() == 1 {
            return flat.pop().expect("one part");
        }
        let w = flat.iter().map(|p| p.width()).sum();
        Term::mk(Kind::Concat(flat), w)
    }

    pub fn ite(c: Term, a: Term, b: Term) -> Term {
        debug_assert_eq!(c.width(), 1);
        debug_assert_eq!(a.width(), b.width());
        if let Some(v) = c.as_const() {
            return if v != 0 { a } else { b };
        }
        if a == b {
            return a;
        }
        if a.width() == 1 {
            match (a.as_const(), b.as_const()) {
                (Some(1), Some(0)) => return c,
                (Some(0), Some(1)) => return Term::not(c),
                (Some(1), _) => return Term::bin(TBin::Or, c, b),
                (Some(0), _) => return Term::bin(TBin::And, Term::not(c), b),
                (_, Some(0)) => return Term::bin(TBin::And, c, a),
                (_, Some(1)) => return Term::bin(TBin::Or, Term::not(c), a),
                _ => {}
            }
        }
        if let Kind::Not(inner) = c.kind() {
            return Term::ite(inner.clone(), b, a);
        }
        if let Kind::Ite(c2, x, _) = a.kind() {
            if *c2 == c {
                return Term::ite(c, x.clone(), b);
            }
        }
        if let Kind::Ite(c2, _, z) = b.kind() {
            if *c2 == c {
                return Term::ite(c, a, z.clone());
            }
        }
        let w = a.width();
        Term::mk(Kind::Ite(c, a, b), w)
    }

    pub fn zext(a: Term, width: u32) -> Term {
        debug_assert!(width >= a.width());
        if width == a.width() {
            return a;
        }
        if let Some(v) = a.as_const() {
            return Term::konst(v, width);
        }
        if let Kind::Zext(x) = a.kind() {
            return Term::zext(x.clone(), width);
        }
        Term::mk(Kind::Zext(a), width)
    }

    pub fn and(a: Term, b: Term) -> Term {
        Term::bin(TBin::And, a, b)
    }

    pub fn or(a: Term, b: Term) -> Term {
        Term::bin(TBin::Or, a, b)
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::bin(TBin::Eq, a, b)
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::or(Term::not(a), b)
    }

    /// Children in a fixed order.
    pub fn children(&self) -> Vec<&Term> {
        match self.kind() {
            Kind::Const(_) | Kind::Var(_) => vec![],
            Kind::Bin(_, a, b) => vec![a, b],
            Kind::Not(a) | Kind::Select(a, ..) | Kind::Zext(a) => vec![a],
            Kind::Concat(ps) => ps.iter().collect(),
            Kind::Ite(c, a, b) => vec![c, a, b],
        }
    }

    /// Rebuild the term bottom-up, replacing variables through `f`.
    /// Shared subterms are visited once.
    pub fn substitute(&self, f: &mut impl FnMut(&str, u32) -> Option<Term>) -> Term {
        let mut memo: HashMap<usize, Term> = HashMap::new();
        self.subst_memo(f, &mut memo)
    }

    pub fn subst_memo(&self, f: &mut impl FnMut(&str, u32) -> Option<Term>, memo: &mut HashMap<usize, Term>) -> Term {
        if let Some(t) = memo.get(&self.id()) {
            return t.clone();
        }
        let out = match self.kind() {
            Kind::Const(_) => self.clone(),
            Kind::Var(n) => f(n, self.width()).unwrap_or_else(|| self.clone()),
            Kind::Bin(op, a, b) => Term::bin(*op, a.subst_memo(f, memo), b.subst_memo(f, memo)),
            Kind::Not(a) => Term::not(a.subst_memo(f, memo)),
            Kind::Select(a, hi, lo) => Term::select(a.subst_memo(f, memo), *hi, *lo),
            Kind::Concat(ps) => Term::concat(ps.iter().map(|p| p.subst_memo(f, memo)).collect()),
            Kind::Ite(c, a, b) => Term::ite(
                c.subst_memo(f, memo),
                a.subst_memo(f, memo),
                b.subst_memo(f, memo),
            ),
            Kind::Zext(a) => Term::zext(a.subst_memo(f, memo), self.width()),
        };
        memo.insert(self.id(), out.clone());
        out
    }

    /// Replace variables by constants and renormalize.
    pub fn specialize(&self, env: &HashMap<String, u64>) -> Term {
        self.substitute(&mut |n, w| env.get(n).map(|v| Term::konst(*v, w)))
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            if seen.insert(t.id()) {
                stack.extend(t.children());
            }
        }
        seen.len()
    }

    /// Variables with their widths, sorted by name.
    pub fn vars(&self) -> Vec<(String, u32)> {
        let mut out = std::collections::BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            if let Kind::Var(n) = t.kind() {
                out.insert(n.to_string(), t.width());
            }
            stack.extend(t.children());
        }
        out.into_iter().collect()
    }
}

fn is_not_of(a: &Term, b: &Term) -> bool {
    matches!(a.kind(), Kind::Not(x) if x == b)
}

/// Equalities against constants through zero-extension and concatenation.
fn simplify_eq(op: TBin, a: &Term, b: &Term) -> Option<Term> {
    let pos = op == TBin::Eq;
    let k = b.as_const()?;
    match a.kind() {
        Kind::Zext(x) => {
            if x.width() < 64 && k >> x.width() != 0 {
                return Some(Term::bit(!pos));
            }
            Some(Term::bin(op, x.clone(), Term::konst(k, x.width())))
        }
        Kind::Concat(parts) => {
            let mut acc: Option<Term> = None;
            let mut shift = 0;
            for p in parts.iter().rev() {
                let pk = (k >> shift) & mask(p.width());
                let e = Term::bin(TBin::Eq, p.clone(), Term::konst(pk, p.width()));
                acc = Some(match acc {
                    None => e,
                    Some(prev) => Term::and(prev, e),
                });
                shift += p.width();
            }
            let all = acc?;
            Some(if pos { all } else { Term::not(all) })
        }
        _ => None,
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        render(self, &mut out, 4000);
        f.write_str(&out)
    }
}

fn render(t: &Term, out: &mut String, limit: usize) {
    if out.len() > limit {
        if !out.ends_with('…') {
            out.push('…');
        }
        return;
    }
    match t.kind() {
        Kind::Const(v) => out.push_str(&format!("{}'h{:x}", t.width(), v)),
        Kind::Var(n) => out.push_str(n),
        Kind::Bin(op, a, b) => {
            out.push('(');
            render(a, out, limit);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            render(b, out, limit);
            out.push(')');
        }
        Kind::Not(a) => {
            out.push('~');
            render(a, out, limit);
        }
        Kind::Select(a, hi, lo) => {
            render(a, out, limit);
            if hi == lo {
                out.push_str(&format!("[{hi}]"));
            } else {
                out.push_str(&format!("[{hi}:{lo}]"));
            }
        }
        Kind::Concat(ps) => {
            out.push('{');
            for (i, p) in ps.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render(p, out, limit);
            }
            out.push('}');
        }
        Kind::Ite(c, a, b) => {
            out.push_str("ite(");
            render(c, out, limit);
            out.push_str(", ");
            render(a, out, limit);
            out.push_str(", ");
            render(b, out, limit);
            out.push(')');
        }
        Kind::Zext(a) => {
            out.push_str(&format!("zext{}(", t.width()));
            render(a, out, limit);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_self_is_zero() {
        let x = Term::var("x", 8);
        let t = Term::bin(TBin::Xor, x.clone(), x);
        assert_eq!(t.as_const(), Some(0));
        assert_eq!(t.width(), 8);
    }

    #[test]
    fn constant_folding_is_total() {
        let t = Term::ite(
            Term::bin(TBin::Lt, Term::konst(3, 4), Term::konst(5, 4)),
            Term::concat(vec![Term::konst(1, 2), Term::konst(2, 3)]),
            Term::konst(0, 5),
        );
        assert_eq!(t.as_const(), Some(0b01010));
    }

    #[test]
    fn commutative_operands_are_ordered() {
        let (a, b) = (Term::var("a", 4), Term::var("b", 4));
        assert_eq!(
            Term::bin(TBin::Add, a.clone(), b.clone()),
            Term::bin(TBin::Add, b, a)
        );
    }

    #[test]
    fn select_through_concat_and_zext() {
        let x = Term::var("x", 4);
        let c = Term::concat(vec![x.clone(), Term::konst(0b10, 2)]);
        assert_eq!(Term::select(c.clone(), 5, 2), x);
        assert_eq!(Term::select(c, 1, 0).as_const(), Some(0b10));
        let z = Term::zext(x.clone(), 8);
        assert_eq!(Term::select(z.clone(), 7, 4).as_const(), Some(0));
        assert_eq!(Term::select(z, 3, 0), x);
    }

    #[test]
    fn specialize_folds_to_constant() {
        let x = Term::var("x", 8);
        let t = Term::bin(TBin::Add, x, Term::konst(3, 8));
        let env = HashMap::from([("x".to_string(), 255u64)]);
        assert_eq!(t.specialize(&env).as_const(), Some(2));
    }
}
