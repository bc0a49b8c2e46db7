//! Canonical source printer. `parse(print(u))` prints back to the same text.

use std::fmt::Write;

use super::ast::*;

pub fn print_unit(unit: &SourceUnit) -> String {
    let mut p = Printer::default();
    for c in &unit.clusters {
        p.cluster(c);
        p.out.push('\n');
    }
    for b in &unit.builds {
        p.build(b);
        p.out.push('\n');
    }
    p.out
}

pub fn print_cluster(c: &ClusterDecl) -> String {
    let mut p = Printer::default();
    p.cluster(c);
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, 0);
    s
}

fn expr(out: &mut String, e: &Expr, parent_prec: u8) {
    match &e.kind {
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::Literal { width: None, value } => {
            let _ = write!(out, "{value}");
        }
        ExprKind::Literal {
            width: Some(w),
            value,
        } => {
            let _ = write!(out, "{w}'h{value:x}");
        }
        ExprKind::Index { base, index } => {
            out.push_str(&base.name);
            out.push('[');
            expr(out, index, 0);
            out.push(']');
        }
        ExprKind::Slice { base, hi, lo } => {
            out.push_str(&base.name);
            out.push('[');
            expr(out, hi, 0);
            out.push(':');
            expr(out, lo, 0);
            out.push(']');
        }
        ExprKind::Concat(parts) => {
            out.push('{');
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, p, 0);
            }
            out.push('}');
        }
        ExprKind::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '~',
                UnOp::LogicNot => '!',
            });
            expr(out, inner, u8::MAX);
        }
        ExprKind::Binary(op, l, r) => {
            let prec = op.precedence();
            let paren = prec <= parent_prec;
            if paren {
                out.push('(');
            }
            expr(out, l, prec - 1);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, r, prec);
            if paren {
                out.push(')');
            }
        }
    }
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn open(&mut self, s: &str) {
        self.line(&format!("{s} {{"));
        self.indent += 1;
    }

    fn close(&mut self, suffix: &str) {
        self.indent -= 1;
        self.line(&format!("}}{suffix}"));
    }

    fn cluster(&mut self, c: &ClusterDecl) {
        match c.style {
            ClusterStyle::Keyword => self.open(&format!("cluster {}", c.name.name)),
            ClusterStyle::Prefixed => self.open(&c.name.name),
            ClusterStyle::Inline => {
                self.line("{");
                self.indent += 1;
            }
        }
        self.cluster_items(c);
        self.close("");
    }

    fn cluster_items(&mut self, c: &ClusterDecl) {
        for s in &c.signals {
            match s.depth {
                Some(d) => self.line(&format!("signal {}[{}][{}];", s.name.name, s.width, d)),
                None => self.line(&format!("signal {}[{}];", s.name.name, s.width)),
            }
        }
        for cond in &c.conditions {
            match &cond.expr {
                Some(e) => self.line(&format!(
                    "{} {{ if ({}) this; }}",
                    cond.name.name,
                    print_expr(e)
                )),
                None => self.line(&format!("{} {{ }}", cond.name.name)),
            }
        }
        for d in &c.datapaths {
            self.open(&d.name.name);
            for a in &d.assigns {
                let target = match &a.index {
                    Some(i) => format!("{}[{}]", a.target.name, print_expr(i)),
                    None => a.target.name.clone(),
                };
                self.line(&format!("{target} = {};", print_expr(&a.expr)));
            }
            self.close("");
        }
        for t in &c.transactions {
            self.open(&t.name.name);
            self.tr_body(&t.body);
            self.close("");
        }
        for v in &c.vtrs {
            self.open(&v.name.name);
            if let Some(seq) = &v.sequence {
                self.open(&format!("sequence {}", seq.name.name));
                for st in &seq.states {
                    self.open(&format!("{}:", st.name.name));
                    self.stmts(&st.body);
                    self.close("");
                }
                self.close("");
            }
            self.close("");
        }
        for s in &c.svas {
            self.open("sva");
            for l in s.text.lines() {
                let l = l.trim();
                if !l.is_empty() {
                    self.line(l);
                }
            }
            self.close("");
        }
    }

    fn tr_body(&mut self, body: &[TrStmt]) {
        for s in body {
            match s {
                TrStmt::Ref(n) => self.line(&format!("{};", n.name)),
                TrStmt::Guard {
                    unique, cond, body, ..
                } => {
                    let kw = if *unique { "unique " } else { "" };
                    self.open(&format!("{kw}@{}", cond.name));
                    self.tr_body(body);
                    self.close("");
                }
                TrStmt::Clock { edge, body, .. } => {
                    self.open(&format!("@{}", edge.name));
                    self.tr_body(body);
                    self.close("");
                }
            }
        }
    }

    fn stmts(&mut self, body: &[Stmt]) {
        for s in body {
            match &s.kind {
                StmtKind::Name(n) => self.line(&format!("{};", n.name)),
                StmtKind::Exit => self.line("exit;"),
                StmtKind::Random(n) => self.line(&format!("random {};", n.name)),
                StmtKind::Wait { cond, body } => {
                    self.open(&format!("@{}", cond.name));
                    self.stmts(body);
                    self.close("");
                }
                StmtKind::Cover {
                    name,
                    conds,
                    exists,
                } => {
                    let kw = if *exists { "reach" } else { "cover" };
                    let body: Vec<String> = conds.iter().map(|c| format!("{};", c.name)).collect();
                    self.line(&format!("{kw} {} {{ {} }}", name.name, body.join(" ")));
                }
                StmtKind::Fork(branches) => {
                    self.line("fork");
                    for b in branches {
                        self.line("{");
                        self.indent += 1;
                        self.stmts(b);
                        self.close("");
                    }
                    self.line("join;");
                }
            }
        }
    }

    fn build(&mut self, b: &BuildDecl) {
        let head = match &b.role {
            Some(r) => format!("build {} {}", b.name.name, r.name),
            None => format!("build {}", b.name.name),
        };
        if b.items.is_empty() {
            self.line(&format!("{head};"));
            return;
        }
        self.open(&head);
        for item in &b.items {
            match item {
                BuildItem::Instance(child) => self.build(child),
                BuildItem::Join { src, dst, .. } => match src {
                    JoinSource::Named(n) => self.line(&format!("join {} {};", n.name, dst.name)),
                    JoinSource::Inline(c) => {
                        self.line("join {");
                        self.indent += 1;
                        self.cluster_items(c);
                        self.close(&format!(" {};", dst.name));
                    }
                },
            }
        }
        self.close("");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::{parse, parse_expr};

    #[test]
    fn expression_parentheses_follow_precedence() {
        let e = parse_expr("(a + b) & (c == d)").unwrap();
        assert_eq!(print_expr(&e), "a + b & c == d");
        let e = parse_expr("(a | b) & c").unwrap();
        assert_eq!(print_expr(&e), "(a | b) & c");
        let e = parse_expr("a - (b - c)").unwrap();
        assert_eq!(print_expr(&e), "a - (b - c)");
    }

    #[test]
    fn inline_join_round_trips() {
        let src = "build TB { join { tr_reg { @e_clk { tr_x; } } } cl_a; }";
        let once = print_unit(&parse(src).unwrap());
        let twice = print_unit(&parse(&once).unwrap());
        assert_eq!(once, twice);
    }
}
