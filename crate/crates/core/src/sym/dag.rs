//! Flat, shareable serialization of term DAGs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::term::{Kind, Term};
use crate::frontend::resolve::TBin;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlatNode {
    Const(u64, u32),
    Var(String, u32),
    Bin(TBin, usize, usize),
    Not(usize),
    Select(usize, u32, u32),
    Concat(Vec<usize>),
    Ite(usize, usize, usize),
    Zext(usize, u32),
}

/// Nodes in dependency order; children always precede their parents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatDag {
    pub nodes: Vec<FlatNode>,
}

/// Incremental writer that deduplicates structurally equal nodes.
pub struct DagWriter<'r> {
    dag: FlatDag,
    index: HashMap<FlatNode, usize>,
    memo: HashMap<usize, usize>,
    rename: Box<dyn FnMut(&str, u32) -> String + 'r>,
}

impl<'r> DagWriter<'r> {
    pub fn new(rename: impl FnMut(&str, u32) -> String + 'r) -> Self {
        DagWriter {
            dag: FlatDag::default(),
            index: HashMap::new(),
            memo: HashMap::new(),
            rename: Box::new(rename),
        }
    }

    pub fn add(&mut self, t: &Term) -> usize {
        if let Some(&i) = self.memo.get(&t.id()) {
            return i;
        }
        let node = match t.kind() {
            Kind::Const(v) => FlatNode::Const(*v, t.width()),
            Kind::Var(n) => FlatNode::Var((self.rename)(n, t.width()), t.width()),
            Kind::Bin(op, a, b) => {
                let (a, b) = (self.add(a), self.add(b));
                FlatNode::Bin(*op, a, b)
            }
            Kind::Not(a) => FlatNode::Not(self.add(a)),
            Kind::Select(a, hi, lo) => FlatNode::Select(self.add(a), *hi, *lo),
            Kind::Concat(ps) => FlatNode::Concat(ps.iter().map(|p| self.add(p)).collect()),
            Kind::Ite(c, a, b) => {
                let (c, a, b) = (self.add(c), self.add(a), self.add(b));
                FlatNode::Ite(c, a, b)
            }
            Kind::Zext(a) => FlatNode::Zext(self.add(a), t.width()),
        };
        let i = match self.index.get(&node) {
            Some(&i) => i,
            None => {
                self.dag.nodes.push(node.clone());
                let i = self.dag.nodes.len() - 1;
                self.index.insert(node, i);
                i
            }
        };
        self.memo.insert(t.id(), i);
        i
    }

    pub fn finish(self) -> FlatDag {
        self.dag
    }
}

impl FlatDag {
    /// Rebuild every node, mapping variable names through `var`.
    pub fn rebuild(&self, mut var: impl FnMut(&str, u32) -> Term) -> Vec<Term> {
        let mut out: Vec<Term> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let t = match n {
                FlatNode::Const(v, w) => Term::konst(*v, *w),
                FlatNode::Var(name, w) => var(name, *w),
                FlatNode::Bin(op, a, b) => Term::bin(*op, out[*a].clone(), out[*b].clone()),
                FlatNode::Not(a) => Term::not(out[*a].clone()),
                FlatNode::Select(a, hi, lo) => Term::select(out[*a].clone(), *hi, *lo),
                FlatNode::Concat(ps) => Term::concat(ps.iter().map(|p| out[*p].clone()).collect()),
                FlatNode::Ite(c, a, b) => Term::ite(out[*c].clone(), out[*a].clone(), out[*b].clone()),
                FlatNode::Zext(a, w) => Term::zext(out[*a].clone(), *w),
            };
            out.push(t);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_structure() {
        let x = Term::var("x", 8);
        let s = Term::bin(TBin::Add, x.clone(), Term::konst(1, 8));
        let t = Term::ite(Term::eq(s.clone(), x.clone()), s.clone(), Term::not(s));
        let mut w = DagWriter::new(|n, _| n.to_string());
        let root = w.add(&t);
        let dag = w.finish();
        let back = dag.rebuild(Term::var);
        assert_eq!(back[root], t);
        // x, 1, x+1, ==, ~, ite
        assert_eq!(dag.nodes.len(), 6);
    }
}
