//! Tokenizer for `.pdvl` sources.
//!
//! Comments in `//`, `/* */` and `(* *)` form are skipped.

use super::span::{Diagnostic, DiagnosticKind, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    /// `7'h13` carries `Some(7)`; a bare decimal literal carries `None`.
    Number { width: Option<u32>, value: u64 },
    Sym(&'static str),
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Number { .. } => "number".to_string(),
            TokenKind::Sym(s) => format!("`{s}`"),
            TokenKind::Eof => "end of file".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    "|->", "|=>", "##", "&&", "||", "==", "!=", "<<", ">>", "<=", ">=", "{", "}", "(", ")", "[",
    "]", ";", ":", ",", "@", "=", "<", ">", "&", "|", "^", "~", "!", "+", "-", "?", ".", "*",
];

pub struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let tok = self.next_token()?;
            let eof = tok.kind == TokenKind::Eof;
            out.push(tok);
            if eof {
                return Ok(out);
            }
        }
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek(0) {
            self.pos += 1;
            if c == b'\n' {
                self.line += 1;
                self.col = 1;
            } else if c & 0xC0 != 0x80 {
                self.col += 1;
            }
        }
    }

    fn here(&self) -> Span {
        Span::new(self.pos, self.pos, self.line, self.col)
    }

    fn skip_trivia(&mut self) -> Result<(), Diagnostic> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_ascii_whitespace() => self.bump(),
                (Some(b'/'), Some(b'/')) => {
                    while let Some(c) = self.peek(0) {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some(b'/'), Some(b'*')) => self.block_comment(b'*', b'/')?,
                (Some(b'('), Some(b'*')) if self.peek(2) != Some(b')') => {
                    self.block_comment(b'*', b')')?
                }
                _ => return Ok(()),
            }
        }
    }

    fn block_comment(&mut self, a: u8, b: u8) -> Result<(), Diagnostic> {
        let start = self.here();
        self.bump();
        self.bump();
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(x), Some(y)) if x == a && y == b => {
                    self.bump();
                    self.bump();
                    return Ok(());
                }
                (Some(_), _) => self.bump(),
                (None, _) => {
                    return Err(Diagnostic::new(
                        DiagnosticKind::Syntax,
                        "unterminated comment",
                        start,
                    ))
                }
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, Diagnostic> {
        let start = self.here();
        let Some(c) = self.peek(0) else {
            return Ok(Token {
                kind: TokenKind::Eof,
                span: start,
            });
        };
        let kind = if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            while matches!(self.peek(0), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'$')
            {
                self.bump();
            }
            TokenKind::Ident(self.src[start.start..self.pos].to_string())
        } else if c.is_ascii_digit() || c == b'\'' {
            self.number(start)?
        } else if let Some(sym) = SYMBOLS
            .iter()
            .find(|s| self.src[self.pos..].starts_with(**s))
        {
            for _ in 0..sym.len() {
                self.bump();
            }
            TokenKind::Sym(sym)
        } else {
            let ch = self.src[self.pos..].chars().next().unwrap_or('?');
            return Err(Diagnostic::new(
                DiagnosticKind::Syntax,
                format!("unexpected character `{ch}`"),
                start,
            ));
        };
        Ok(Token {
            kind,
            span: Span::new(start.start, self.pos, start.line, start.col),
        })
    }

    fn digits(&mut self, radix: u32) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if c == b'_' {
                self.bump();
            } else if (c as char).is_digit(radix) {
                s.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn number(&mut self, start: Span) -> Result<TokenKind, Diagnostic> {
        let err = |msg: &str| Diagnostic::new(DiagnosticKind::Syntax, msg.to_string(), start);
        let lead = self.digits(10);
        if self.peek(0) != Some(b'\'') {
            let value = lead
                .parse::<u64>()
                .map_err(|_| err("integer literal out of range"))?;
            return Ok(TokenKind::Number { width: None, value });
        }
        self.bump();
        let radix = match self.peek(0).map(|c| c.to_ascii_lowercase()) {
            Some(b'h') => 16,
            Some(b'b') => 2,
            Some(b'd') => 10,
            Some(b'o') => 8,
            _ => return Err(err("expected base `h`, `b`, `d` or `o` after `'`")),
        };
        self.bump();
        let body = self.digits(radix);
        if body.is_empty() {
            return Err(err("missing digits in sized literal"));
        }
        let value =
            u64::from_str_radix(&body, radix).map_err(|_| err("literal out of range"))?;
        let width = if lead.is_empty() {
            None
        } else {
            let w = lead
                .parse::<u32>()
                .map_err(|_| err("literal width out of range"))?;
            if w == 0 || w > 64 {
                return Err(err("literal width must be between 1 and 64"));
            }
            if w < 64 && value >> w != 0 {
                return Err(err("literal value does not fit its width"));
            }
            Some(w)
        };
        Ok(TokenKind::Number { width, value })
    }
}
