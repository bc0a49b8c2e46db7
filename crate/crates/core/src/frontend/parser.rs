//! Recursive descent parser for the PDVL subset.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{Lexer, Token, TokenKind};
use super::span::{Diagnostic, DiagnosticKind, Diagnostics, Span};

type PResult<T> = Result<T, Diagnostic>;

/// Parse a complete source text.
pub fn parse(text: &str) -> Result<SourceUnit, Diagnostics> {
    let tokens = Lexer::new(text).tokenize().map_err(Diagnostics::single)?;
    let mut p = Parser {
        src: text,
        tokens,
        pos: 0,
        inline_count: 0,
    };
    let unit = p.unit().map_err(Diagnostics::single)?;
    let dups = duplicate_names(&unit);
    if dups.is_empty() {
        Ok(unit)
    } else {
        Err(Diagnostics(dups))
    }
}

/// Parse a standalone expression (used by the SVA bridge and tests).
pub fn parse_expr(text: &str) -> Result<Expr, Diagnostics> {
    let tokens = Lexer::new(text).tokenize().map_err(Diagnostics::single)?;
    let mut p = Parser {
        src: text,
        tokens,
        pos: 0,
        inline_count: 0,
    };
    let e = p.expr().map_err(Diagnostics::single)?;
    if !p.at_eof() {
        return Err(Diagnostics::single(p.unexpected("end of expression")));
    }
    Ok(e)
}

/// Parse one expression starting at token `pos`; returns it with the index of
/// the first token after it. `tokens` must end with `Eof`.
pub fn parse_expr_at(src: &str, tokens: &[Token], pos: usize) -> Result<(Expr, usize), Diagnostic> {
    let mut p = Parser {
        src,
        tokens: tokens.to_vec(),
        pos,
        inline_count: 0,
    };
    let e = p.expr()?;
    Ok((e, p.pos))
}

fn duplicate_names(unit: &SourceUnit) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut clusters = HashSet::new();
    for c in &unit.clusters {
        if !clusters.insert(c.name.name.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                format!("duplicate cluster `{}`", c.name.name),
                c.name.span,
            ));
        }
        check_cluster_dups(c, &mut out);
    }
    for b in &unit.builds {
        check_build_dups(b, &mut out);
    }
    out
}

fn check_build_dups(b: &BuildDecl, out: &mut Vec<Diagnostic>) {
    for item in &b.items {
        match item {
            BuildItem::Instance(child) => check_build_dups(child, out),
            BuildItem::Join {
                src: JoinSource::Inline(c),
                ..
            } => check_cluster_dups(c, out),
            BuildItem::Join { .. } => {}
        }
    }
}

fn check_cluster_dups(c: &ClusterDecl, out: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for name in c.element_names() {
        if !seen.insert(name.name.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                format!("duplicate element `{}` in cluster `{}`", name.name, c.name.name),
                name.span,
            ));
        }
    }
    let mut sigs = HashSet::new();
    for s in &c.signals {
        if !sigs.insert(s.name.name.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                format!("duplicate signal `{}` in cluster `{}`", s.name.name, c.name.name),
                s.name.span,
            ));
        }
    }
    for v in &c.vtrs {
        if let Some(seq) = &v.sequence {
            let mut states = HashSet::new();
            for st in &seq.states {
                if !states.insert(st.name.name.as_str()) {
                    out.push(Diagnostic::new(
                        DiagnosticKind::DuplicateName,
                        format!("duplicate state `{}` in `{}`", st.name.name, v.name.name),
                        st.name.span,
                    ));
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    inline_count: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), TokenKind::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        Diagnostic::new(
            DiagnosticKind::Syntax,
            format!("expected {expected}, found {}", self.peek().describe()),
            self.span(),
        )
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), TokenKind::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), TokenKind::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Span> {
        if self.is_sym(s) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                let span = self.advance().span;
                Ok(Ident::new(name, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn number(&mut self) -> PResult<u64> {
        match *self.peek() {
            TokenKind::Number { value, .. } => {
                self.advance();
                Ok(value)
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn unit(&mut self) -> PResult<SourceUnit> {
        let mut unit = SourceUnit::default();
        while !self.at_eof() {
            if self.is_kw("build") {
                unit.builds.push(self.build()?);
            } else if self.is_kw("cluster") {
                let start = self.advance().span;
                let name = self.ident()?;
                unit.clusters
                    .push(self.cluster_body(name, ClusterStyle::Keyword, start)?);
            } else if matches!(self.peek(), TokenKind::Ident(n) if n.starts_with("cl_")) {
                let name = self.ident()?;
                let start = name.span;
                unit.clusters
                    .push(self.cluster_body(name, ClusterStyle::Prefixed, start)?);
            } else {
                return Err(self.unexpected("`cluster`, a `cl_` cluster or `build`"));
            }
        }
        Ok(unit)
    }

    fn cluster_body(
        &mut self,
        name: Ident,
        style: ClusterStyle,
        start: Span,
    ) -> PResult<ClusterDecl> {
        self.expect_sym("{")?;
        let mut c = ClusterDecl::empty(name, style, start);
        while !self.eat_sym("}") {
            self.item(&mut c)?;
        }
        c.span = start.merge(self.prev_span());
        Ok(c)
    }

    fn item(&mut self, c: &mut ClusterDecl) -> PResult<()> {
        if self.is_kw("signal") {
            c.signals.push(self.signal()?);
            return Ok(());
        }
        if self.is_kw("sva") {
            c.svas.push(self.sva_block()?);
            return Ok(());
        }
        let name = self.ident()?;
        match ElementKind::from_name(&name.name) {
            Some(ElementKind::Condition) => c.conditions.push(self.condition(name)?),
            Some(ElementKind::Datapath) => c.datapaths.push(self.datapath(name)?),
            Some(ElementKind::Transaction) => c.transactions.push(self.transaction(name)?),
            Some(ElementKind::Vtr) => c.vtrs.push(self.vtr(name)?),
            None => {
                return Err(Diagnostic::new(
                    DiagnosticKind::UnknownPrefix,
                    format!(
                        "unknown element-kind prefix on `{}` (expected c_, d_, tr_ or vtr_)",
                        name.name
                    ),
                    name.span,
                ))
            }
        }
        Ok(())
    }

    fn signal(&mut self) -> PResult<SignalDecl> {
        let start = self.expect_kw("signal")?;
        let name = self.ident()?;
        self.expect_sym("[")?;
        let wspan = self.span();
        let width = self.number()?;
        self.expect_sym("]")?;
        if !(1..=64).contains(&width) {
            return Err(Diagnostic::new(
                DiagnosticKind::Width,
                "signal width must be between 1 and 64",
                wspan,
            ));
        }
        let depth = if self.eat_sym("[") {
            let dspan = self.span();
            let d = self.number()?;
            self.expect_sym("]")?;
            if d == 0 || d > 4096 {
                return Err(Diagnostic::new(
                    DiagnosticKind::Width,
                    "array depth must be between 1 and 4096",
                    dspan,
                ));
            }
            Some(d as u32)
        } else {
            None
        };
        self.expect_sym(";")?;
        Ok(SignalDecl {
            name,
            width: width as u32,
            depth,
            span: start.merge(self.prev_span()),
        })
    }

    fn sva_block(&mut self) -> PResult<SvaBlock> {
        let start = self.expect_kw("sva")?;
        let open = self.expect_sym("{")?;
        let mut depth = 1;
        let body_start = open.end;
        let mut body_end = body_start;
        while depth > 0 {
            if self.at_eof() {
                return Err(self.unexpected("`}` closing sva block"));
            }
            let t = self.advance();
            match t.kind {
                TokenKind::Sym("{") => depth += 1,
                TokenKind::Sym("}") => {
                    depth -= 1;
                    body_end = t.span.start;
                }
                _ => {}
            }
        }
        Ok(SvaBlock {
            text: self.src[body_start..body_end].to_string(),
            span: start.merge(self.prev_span()),
            body_span: Span::new(body_start, body_end, open.line, open.col + 1),
        })
    }

    fn condition(&mut self, name: Ident) -> PResult<ConditionDecl> {
        self.expect_sym("{")?;
        let expr = if self.is_kw("if") {
            self.advance();
            self.expect_sym("(")?;
            let e = self.expr()?;
            self.expect_sym(")")?;
            self.expect_kw("this")?;
            self.expect_sym(";")?;
            Some(e)
        } else {
            None
        };
        self.expect_sym("}")?;
        Ok(ConditionDecl {
            span: name.span.merge(self.prev_span()),
            name,
            expr,
        })
    }

    fn datapath(&mut self, name: Ident) -> PResult<DatapathDecl> {
        self.expect_sym("{")?;
        let mut assigns = Vec::new();
        while !self.eat_sym("}") {
            let target = self.ident()?;
            let index = if self.eat_sym("[") {
                let e = self.expr()?;
                self.expect_sym("]")?;
                Some(e)
            } else {
                None
            };
            self.expect_sym("=")?;
            let expr = self.expr()?;
            self.expect_sym(";")?;
            assigns.push(Assign {
                span: target.span.merge(self.prev_span()),
                target,
                index,
                expr,
            });
        }
        Ok(DatapathDecl {
            span: name.span.merge(self.prev_span()),
            name,
            assigns,
        })
    }

    fn transaction(&mut self, name: Ident) -> PResult<TransactionDecl> {
        let body = self.tr_block()?;
        Ok(TransactionDecl {
            span: name.span.merge(self.prev_span()),
            name,
            body,
        })
    }

    fn tr_block(&mut self) -> PResult<Vec<TrStmt>> {
        self.expect_sym("{")?;
        let mut body = Vec::new();
        while !self.eat_sym("}") {
            body.push(self.tr_stmt()?);
        }
        Ok(body)
    }

    fn tr_stmt(&mut self) -> PResult<TrStmt> {
        let start = self.span();
        let unique = if self.is_kw("unique") {
            self.advance();
            true
        } else {
            false
        };
        if self.eat_sym("@") {
            let cond = self.ident()?;
            let body = self.tr_block()?;
            let span = start.merge(self.prev_span());
            if cond.name.starts_with("e_") {
                if unique {
                    return Err(Diagnostic::new(
                        DiagnosticKind::Syntax,
                        "`unique` cannot qualify a clock edge",
                        start,
                    ));
                }
                return Ok(TrStmt::Clock {
                    edge: cond,
                    body,
                    span,
                });
            }
            return Ok(TrStmt::Guard {
                unique,
                cond,
                body,
                span,
            });
        }
        if unique {
            return Err(self.unexpected("`@` after `unique`"));
        }
        let name = self.ident()?;
        self.expect_sym(";")?;
        Ok(TrStmt::Ref(name))
    }

    fn vtr(&mut self, name: Ident) -> PResult<VtrDecl> {
        self.expect_sym("{")?;
        let sequence = if self.is_kw("sequence") {
            Some(self.sequence()?)
        } else {
            None
        };
        self.expect_sym("}")?;
        Ok(VtrDecl {
            span: name.span.merge(self.prev_span()),
            name,
            sequence,
        })
    }

    fn sequence(&mut self) -> PResult<SequenceDecl> {
        let start = self.expect_kw("sequence")?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut states = Vec::new();
        while !self.eat_sym("}") {
            let sname = self.ident()?;
            self.expect_sym(":")?;
            let body = self.stmt_block()?;
            states.push(StateDecl {
                span: sname.span.merge(self.prev_span()),
                name: sname,
                body,
            });
        }
        Ok(SequenceDecl {
            name,
            states,
            span: start.merge(self.prev_span()),
        })
    }

    fn stmt_block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut body = Vec::new();
        while !self.eat_sym("}") {
            body.push(self.stmt()?);
        }
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kind = if self.eat_sym("@") {
            let cond = self.ident()?;
            let body = self.stmt_block()?;
            StmtKind::Wait { cond, body }
        } else if self.is_kw("exit") {
            self.advance();
            self.expect_sym(";")?;
            StmtKind::Exit
        } else if self.is_kw("random") {
            self.advance();
            let sig = self.ident()?;
            self.expect_sym(";")?;
            StmtKind::Random(sig)
        } else if self.is_kw("cover") || self.is_kw("reach") {
            let exists = self.is_kw("reach");
            self.advance();
            let name = self.ident()?;
            self.expect_sym("{")?;
            let mut conds = Vec::new();
            while !self.eat_sym("}") {
                conds.push(self.ident()?);
                self.expect_sym(";")?;
            }
            StmtKind::Cover {
                name,
                conds,
                exists,
            }
        } else if self.is_kw("fork") {
            self.advance();
            let mut branches = Vec::new();
            while self.is_sym("{") {
                branches.push(self.stmt_block()?);
            }
            if branches.is_empty() {
                return Err(self.unexpected("`{` starting a fork branch"));
            }
            self.expect_kw("join")?;
            self.expect_sym(";")?;
            StmtKind::Fork(branches)
        } else {
            let name = self.ident()?;
            self.expect_sym(";")?;
            StmtKind::Name(name)
        };
        Ok(Stmt {
            kind,
            span: start.merge(self.prev_span()),
        })
    }

    fn build(&mut self) -> PResult<BuildDecl> {
        let start = self.expect_kw("build")?;
        let name = self.ident()?;
        let role = match self.peek() {
            TokenKind::Ident(_) => Some(self.ident()?),
            _ => None,
        };
        let mut items = Vec::new();
        if self.eat_sym("{") {
            while !self.eat_sym("}") {
                items.push(self.build_item()?);
            }
        } else {
            self.expect_sym(";")?;
        }
        Ok(BuildDecl {
            name,
            role,
            items,
            span: start.merge(self.prev_span()),
        })
    }

    fn build_item(&mut self) -> PResult<BuildItem> {
        if self.is_kw("build") {
            return Ok(BuildItem::Instance(self.build()?));
        }
        let start = self.expect_kw("join")?;
        let src = if self.is_sym("{") {
            self.inline_count += 1;
            let name = Ident::new(format!("__join{}", self.inline_count), self.span());
            JoinSource::Inline(self.cluster_body(name, ClusterStyle::Inline, self.span())?)
        } else {
            JoinSource::Named(self.ident()?)
        };
        let dst = self.ident()?;
        self.expect_sym(";")?;
        Ok(BuildItem::Join {
            src,
            dst,
            span: start.merge(self.prev_span()),
        })
    }

    // Expressions: precedence climbing over `BinOp::precedence`.

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let TokenKind::Sym(s) = self.peek() else {
            return None;
        };
        Some(match *s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "&" => BinOp::And,
            "|" => BinOp::Or,
            "^" => BinOp::Xor,
            "<<" => BinOp::Shl,
            ">>" => BinOp::Shr,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "&&" => BinOp::LogicAnd,
            "||" => BinOp::LogicOr,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.merge(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let op = if self.eat_sym("~") {
            Some(UnOp::Not)
        } else if self.eat_sym("!") {
            Some(UnOp::LogicNot)
        } else {
            None
        };
        match op {
            Some(op) => {
                let inner = self.unary()?;
                Ok(Expr {
                    span: start.merge(inner.span),
                    kind: ExprKind::Unary(op, Box::new(inner)),
                })
            }
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            TokenKind::Number { width, value } => {
                self.advance();
                Ok(Expr {
                    kind: ExprKind::Literal { width, value },
                    span: start,
                })
            }
            TokenKind::Sym("(") => {
                self.advance();
                let mut e = self.expr()?;
                self.expect_sym(")")?;
                e.span = start.merge(self.prev_span());
                Ok(e)
            }
            TokenKind::Sym("{") => {
                self.advance();
                let mut parts = vec![self.expr()?];
                while self.eat_sym(",") {
                    parts.push(self.expr()?);
                }
                self.expect_sym("}")?;
                Ok(Expr {
                    kind: ExprKind::Concat(parts),
                    span: start.merge(self.prev_span()),
                })
            }
            TokenKind::Ident(_) => {
                let base = self.ident()?;
                if !self.eat_sym("[") {
                    return Ok(Expr {
                        span: base.span,
                        kind: ExprKind::Ident(base.name),
                    });
                }
                let first = self.expr()?;
                let kind = if self.eat_sym(":") {
                    let lo = self.expr()?;
                    ExprKind::Slice {
                        base,
                        hi: Box::new(first),
                        lo: Box::new(lo),
                    }
                } else {
                    ExprKind::Index {
                        base,
                        index: Box::new(first),
                    }
                };
                self.expect_sym("]")?;
                Ok(Expr {
                    kind,
                    span: start.merge(self.prev_span()),
                })
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_has_no_clusters() {
        let u = parse("").unwrap();
        assert!(u.clusters.is_empty() && u.builds.is_empty());
    }

    #[test]
    fn unknown_prefix_is_reported() {
        let err = parse("cluster a { foo_x { } }").unwrap_err();
        assert_eq!(err.0[0].kind, DiagnosticKind::UnknownPrefix);
    }

    #[test]
    fn duplicate_elements_are_reported() {
        let err = parse("cluster a { c_x { } c_x { } }").unwrap_err();
        assert_eq!(err.0[0].kind, DiagnosticKind::DuplicateName);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse("cluster a {\n  signal x[8]\n}").unwrap_err();
        let d = &err.0[0];
        assert_eq!(d.kind, DiagnosticKind::Syntax);
        assert_eq!(d.span.line, 3);
    }

    #[test]
    fn precedence_of_comparison_over_logical_and() {
        let e = parse_expr("a == 1 && b == 2").unwrap();
        assert!(matches!(e.kind, ExprKind::Binary(BinOp::LogicAnd, _, _)));
    }

    #[test]
    fn fork_join_statement() {
        let u = parse(
            "cluster t { vtr_a { sequence s { init: { fork { vtr_b; } { vtr_c; } join; exit; } } } }",
        )
        .unwrap();
        let seq = u.clusters[0].vtrs[0].sequence.as_ref().unwrap();
        assert!(matches!(seq.states[0].body[0].kind, StmtKind::Fork(ref b) if b.len() == 2));
    }
}
