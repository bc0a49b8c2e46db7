//! Parser for the SVA subset.

use crate::frontend::lexer::{Lexer, Token, TokenKind};
use crate::frontend::parser::parse_expr_at;
use crate::frontend::Span;

use super::*;

const LIVENESS: &[&str] = &[
    "s_eventually",
    "eventually",
    "always",
    "s_always",
    "until",
    "s_until",
    "until_with",
    "s_until_with",
    "nexttime",
    "s_nexttime",
];

/// Parse SVA text whose first byte sits at line 1, column 1.
pub fn parse_sva(text: &str) -> Result<SvaUnit, SvaError> {
    parse_sva_at(text, Span::new(0, 0, 1, 1))
}

/// Parse SVA text embedded in a larger file; `base` locates the first byte.
pub(crate) fn parse_sva_at(text: &str, base: Span) -> Result<SvaUnit, SvaError> {
    let mut tokens = Lexer::new(text).tokenize().map_err(|d| SvaError::Syntax {
        message: d.message,
        span: relocate(d.span, base),
    })?;
    for t in tokens.iter_mut() {
        t.span = relocate(t.span, base);
    }
    reject_unsupported(&tokens)?;
    let mut p = P {
        text,
        toks: tokens,
        pos: 0,
    };
    let mut unit = SvaUnit::default();
    while !matches!(p.peek(), TokenKind::Eof) {
        unit.props.push(p.property()?);
    }
    Ok(unit)
}

fn relocate(s: Span, base: Span) -> Span {
    let col = if s.line == 1 { s.col + base.col - 1 } else { s.col };
    Span::new(s.start + base.start, s.end + base.start, s.line + base.line - 1, col)
}

fn reject_unsupported(toks: &[Token]) -> Result<(), SvaError> {
    for (i, t) in toks.iter().enumerate() {
        let next = toks.get(i + 1).map(|t| &t.kind);
        let feature = match &t.kind {
            TokenKind::Ident(n) if LIVENESS.contains(&n.as_str()) => Some("liveness"),
            TokenKind::Ident(n) => match n.as_str() {
                "intersect" => Some("intersect"),
                "throughout" => Some("throughout"),
                "within" => Some("within"),
                "first_match" => Some("first_match"),
                "disable" => Some("disable iff"),
                "negedge" => Some("negedge clocking"),
                "and" | "or" | "not" => Some("sequence operators and/or/not"),
                _ => None,
            },
            TokenKind::Sym("##") if matches!(next, Some(TokenKind::Sym("["))) => {
                Some("delay range")
            }
            TokenKind::Sym("[")
                if matches!(
                    next,
                    Some(TokenKind::Sym("*")) | Some(TokenKind::Sym("=")) | Some(TokenKind::Sym("-"))
                ) =>
            {
                Some("repetition")
            }
            _ => None,
        };
        if let Some(feature) = feature {
            return Err(SvaError::Unsupported {
                feature,
                span: t.span,
            });
        }
    }
    Ok(())
}

struct P<'a> {
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl P<'_> {
    fn peek(&self) -> &TokenKind {
        &self.toks[self.pos].kind
    }

    fn peek_at(&self, off: usize) -> &TokenKind {
        &self.toks[(self.pos + off).min(self.toks.len() - 1)].kind
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T, SvaError> {
        Err(SvaError::Syntax {
            message: format!("expected {expected}, found {}", self.peek().describe()),
            span: self.span(),
        })
    }

    fn sym(&mut self, s: &str) -> Result<(), SvaError> {
        if matches!(self.peek(), TokenKind::Sym(x) if *x == s) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), TokenKind::Sym(x) if *x == s)
    }

    fn kw(&mut self, k: &str) -> Result<(), SvaError> {
        if matches!(self.peek(), TokenKind::Ident(x) if x == k) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{k}`"))
        }
    }

    fn ident(&mut self) -> Result<String, SvaError> {
        match self.peek().clone() {
            TokenKind::Ident(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.err("identifier"),
        }
    }

    fn property(&mut self) -> Result<SvaProperty, SvaError> {
        let start = self.span();
        let label = if matches!(self.peek(), TokenKind::Ident(_))
            && matches!(self.peek_at(1), TokenKind::Sym(":"))
        {
            let l = self.ident()?;
            self.bump();
            Some(l)
        } else {
            None
        };
        let kind = match self.peek() {
            TokenKind::Ident(k) if k == "assert" => SvaKind::Assert,
            TokenKind::Ident(k) if k == "cover" => SvaKind::Cover,
            _ => return self.err("`assert` or `cover`"),
        };
        self.bump();
        self.kw("property")?;
        self.sym("(")?;
        self.sym("@")?;
        self.sym("(")?;
        self.kw("posedge")?;
        let clock = self.ident()?;
        self.sym(")")?;
        let ante = self.seq()?;
        let body = if self.is_sym("|->") || self.is_sym("|=>") {
            let overlapping = self.is_sym("|->");
            self.bump();
            let cons = self.seq()?;
            PropBody::Implication {
                ante,
                overlapping,
                cons,
            }
        } else {
            PropBody::Seq(ante)
        };
        self.sym(")")?;
        self.sym(";")?;
        Ok(SvaProperty {
            label,
            kind,
            clock,
            body,
            span: start.merge(self.toks[self.pos.saturating_sub(1)].span),
        })
    }

    fn delay(&mut self) -> Result<u32, SvaError> {
        self.sym("##")?;
        match *self.peek() {
            TokenKind::Number { value, .. } if value <= 64 => {
                self.bump();
                Ok(value as u32)
            }
            _ => self.err("constant delay"),
        }
    }

    fn seq(&mut self) -> Result<SvaSeq, SvaError> {
        let mut elems = Vec::new();
        let mut delay = if self.is_sym("##") { self.delay()? } else { 0 };
        loop {
            let (expr, next) =
                parse_expr_at(self.text, &self.toks, self.pos).map_err(|d| SvaError::Syntax {
                    message: d.message,
                    span: d.span,
                })?;
            self.pos = next;
            elems.push(SeqElem { delay, expr });
            if !self.is_sym("##") {
                return Ok(SvaSeq { elems });
            }
            delay = self.delay()?;
        }
    }
}
