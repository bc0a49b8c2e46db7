//! Cycle-based interpreter for the Verilog subset the emitter produces.
//!
//! Supported: ANSI module headers, `wire`/`reg` vectors and word arrays,
//! continuous `assign`, `always @(posedge clk)` with `if`/`else` and
//! nonblocking assignments, `initial` blocks, declaration initializers and
//! instances with named port connections. All values are unsigned; an
//! operator's width is the larger of its operand widths, comparisons are
//! one bit wide and assignments truncate or zero-extend to the target.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RtlError {
    #[error("{file}:{line}: {message}")]
    Syntax { file: String, line: u32, message: String },
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("module `{module}`: unknown name `{name}`")]
    UnknownName { module: String, name: String },
    #[error("module `{module}`: port connection `.{port}` must name a signal")]
    Connection { module: String, port: String },
    #[error("combinational loop through `{0}`")]
    Loop(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num { width: Option<u32>, value: u64 },
    Sym(&'static str),
}

const SYMS: &[&str] = &[
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "(", ")", "[", "]", "{", "}", ",", ";", ":", ".", "=", "<", ">",
    "+", "-", "&", "|", "^", "~", "!", "?", "@", "#",
];

fn lex(file: &str, text: &str) -> Result<Vec<(Tok, u32)>, RtlError> {
    let b = text.as_bytes();
    let mut i = 0;
    let mut line = 1;
    let mut out = Vec::new();
    let err = |line, message: String| RtlError::Syntax {
        file: file.to_string(),
        line,
        message,
    };
    while i < b.len() {
        let c = b[i];
        if c == b'\n' {
            line += 1;
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if b[i..].starts_with(b"//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            out.push((Tok::Ident(text[s..i].to_string()), line));
        } else if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let lead: u64 = text[s..i].parse().map_err(|_| err(line, "number too large".into()))?;
            if i < b.len() && b[i] == b'\'' {
                let radix = match b.get(i + 1).map(|c| c.to_ascii_lowercase()) {
                    Some(b'h') => 16,
                    Some(b'b') => 2,
                    Some(b'd') => 10,
                    Some(b'o') => 8,
                    _ => return Err(err(line, "bad base in sized constant".into())),
                };
                i += 2;
                let s = i;
                while i < b.len() && (b[i].is_ascii_hexdigit() || b[i] == b'_') {
                    i += 1;
                }
                let digits: String = text[s..i].chars().filter(|c| *c != '_').collect();
                let value = u64::from_str_radix(&digits, radix).map_err(|e| err(line, format!("constant: {e}")))?;
                out.push((
                    Tok::Num {
                        width: Some(lead as u32),
                        value,
                    },
                    line,
                ));
            } else {
                out.push((Tok::Num { width: None, value: lead }, line));
            }
        } else {
            let sym = SYMS
                .iter()
                .find(|s| b[i..].starts_with(s.as_bytes()))
                .ok_or_else(|| err(line, format!("unexpected character `{}`", c as char)))?;
            out.push((Tok::Sym(sym), line));
            i += sym.len();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Expr {
    Num { width: u32, value: u64 },
    Name(String),
    /// `a[i]`: array word or bit select, decided by the declaration.
    Index(String, Box<Expr>),
    Part(Box<Expr>, u32, u32),
    Unary(&'static str, Box<Expr>),
    Binary(&'static str, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Repeat(u32, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LValue {
    name: String,
    index: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Stmt {
    Block(Vec<Stmt>),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    Assign { lv: LValue, e: Expr, nonblocking: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Decl {
    name: String,
    width: u32,
    /// Array bounds `[lo:hi]`.
    words: Option<(u32, u32)>,
    /// Initial value of a `reg`, or the continuous driver of a `wire`.
    init: Option<Expr>,
    reg: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Port {
    decl: Decl,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Instance {
    module: String,
    name: String,
    conns: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Module {
    name: String,
    ports: Vec<Port>,
    decls: Vec<Decl>,
    assigns: Vec<(LValue, Expr)>,
    always: Vec<Stmt>,
    initial: Vec<Stmt>,
    instances: Vec<Instance>,
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<(Tok, u32)>,
    pos: usize,
}

type P<T> = Result<T, RtlError>;

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> P<T> {
        let line = self.toks.get(self.pos).or(self.toks.last()).map(|t| t.1).unwrap_or(0);
        Err(RtlError::Syntax {
            file: self.file.to_string(),
            line,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sym(&mut self, s: &str) -> P<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn kw(&mut self, k: &str) -> P<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected `{k}`"))
        }
    }

    fn ident(&mut self) -> P<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected an identifier"),
        }
    }

    fn number(&mut self) -> P<u32> {
        match self.peek() {
            Some(Tok::Num { value, .. }) => {
                let v = *value as u32;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn modules(&mut self) -> P<Vec<Module>> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            out.push(self.module()?);
        }
        Ok(out)
    }

    fn range(&mut self) -> P<u32> {
        if self.eat_sym("[") {
            let hi = self.number()?;
            self.sym(":")?;
            let lo = self.number()?;
            self.sym("]")?;
            Ok(hi - lo + 1)
        } else {
            Ok(1)
        }
    }

    fn decl_tail(&mut self, width: u32, reg: bool) -> P<Decl> {
        let name = self.ident()?;
        let words = if self.eat_sym("[") {
            let lo = self.number()?;
            self.sym(":")?;
            let hi = self.number()?;
            self.sym("]")?;
            Some((lo.min(hi), lo.max(hi)))
        } else {
            None
        };
        let init = if self.eat_sym("=") { Some(self.expr()?) } else { None };
        Ok(Decl {
            name,
            width,
            words,
            init,
            reg,
        })
    }

    fn module(&mut self) -> P<Module> {
        self.kw("module")?;
        let name = self.ident()?;
        let mut m = Module {
            name,
            ports: Vec::new(),
            decls: Vec::new(),
            assigns: Vec::new(),
            always: Vec::new(),
            initial: Vec::new(),
            instances: Vec::new(),
        };
        self.sym("(")?;
        if !self.is_sym(")") {
            loop {
                if !(self.eat_kw("input") || self.eat_kw("output")) {
                    return self.err("expected a port direction");
                }
                let reg = !self.eat_kw("wire") && self.eat_kw("reg");
                let width = self.range()?;
                let decl = self.decl_tail(width, reg)?;
                m.ports.push(Port { decl });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.sym(")")?;
        self.sym(";")?;
        loop {
            if self.eat_kw("endmodule") {
                return Ok(m);
            }
            let reg = self.is_kw("reg");
            if self.eat_kw("wire") || self.eat_kw("reg") {
                let width = self.range()?;
                m.decls.push(self.decl_tail(width, reg)?);
                self.sym(";")?;
            } else if self.eat_kw("assign") {
                let lv = self.lvalue()?;
                self.sym("=")?;
                let e = self.expr()?;
                self.sym(";")?;
                m.assigns.push((lv, e));
            } else if self.eat_kw("always") {
                self.sym("@")?;
                self.sym("(")?;
                self.kw("posedge")?;
                self.kw("clk")?;
                self.sym(")")?;
                m.always.push(self.stmt()?);
            } else if self.eat_kw("initial") {
                m.initial.push(self.stmt()?);
            } else if matches!(self.peek(), Some(Tok::Ident(_))) {
                let module = self.ident()?;
                let name = self.ident()?;
                self.sym("(")?;
                let mut conns = Vec::new();
                if !self.is_sym(")") {
                    loop {
                        self.sym(".")?;
                        let port = self.ident()?;
                        self.sym("(")?;
                        let e = self.expr()?;
                        self.sym(")")?;
                        conns.push((port, e));
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.sym(")")?;
                self.sym(";")?;
                m.instances.push(Instance { module, name, conns });
            } else {
                return self.err("expected a module item");
            }
        }
    }

    fn lvalue(&mut self) -> P<LValue> {
        let name = self.ident()?;
        let index = if self.eat_sym("[") {
            let e = self.expr()?;
            self.sym("]")?;
            Some(e)
        } else {
            None
        };
        Ok(LValue { name, index })
    }

    fn stmt(&mut self) -> P<Stmt> {
        if self.eat_kw("begin") {
            let mut body = Vec::new();
            while !self.eat_kw("end") {
                if self.peek().is_none() {
                    return self.err("expected `end`");
                }
                body.push(self.stmt()?);
            }
            return Ok(Stmt::Block(body));
        }
        if self.eat_kw("if") {
            self.sym("(")?;
            let c = self.expr()?;
            self.sym(")")?;
            let t = self.stmt()?;
            let e = if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
            return Ok(Stmt::If(c, Box::new(t), e));
        }
        let lv = self.lvalue()?;
        let nonblocking = if self.eat_sym("<=") {
            true
        } else {
            self.sym("=")?;
            false
        };
        let e = self.expr()?;
        self.sym(";")?;
        Ok(Stmt::Assign { lv, e, nonblocking })
    }

    fn expr(&mut self) -> P<Expr> {
        let c = self.binary(0)?;
        if self.eat_sym("?") {
            let a = self.expr()?;
            self.sym(":")?;
            let b = self.expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn binary(&mut self, level: usize) -> P<Expr> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["|"],
            &["^"],
            &["&"],
            &["==", "!="],
            &["<", "<=", ">", ">="],
            &["<<", ">>"],
            &["+", "-"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut a = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(s)) if LEVELS[level].contains(s) => *s,
                _ => return Ok(a),
            };
            self.pos += 1;
            let b = self.binary(level + 1)?;
            a = Expr::Binary(op, Box::new(a), Box::new(b));
        }
    }

    fn unary(&mut self) -> P<Expr> {
        for op in ["~", "!", "-"] {
            if self.eat_sym(op) {
                let op: &'static str = SYMS.iter().find(|s| **s == op).copied().unwrap_or("~");
                return Ok(Expr::Unary(op, Box::new(self.unary()?)));
            }
        }
        let mut e = self.primary()?;
        while self.is_sym("[") {
            // Part select of an indexed word.
            self.pos += 1;
            let hi = self.number()?;
            let lo = if self.eat_sym(":") { self.number()? } else { hi };
            self.sym("]")?;
            e = Expr::Part(Box::new(e), hi, lo);
        }
        Ok(e)
    }

    fn primary(&mut self) -> P<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num { width, value }) => {
                self.pos += 1;
                Ok(Expr::Num {
                    width: width.unwrap_or(32),
                    value,
                })
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if !self.is_sym("[") {
                    return Ok(Expr::Name(name));
                }
                self.pos += 1;
                let i = self.expr()?;
                if self.eat_sym(":") {
                    let lo = self.number()?;
                    self.sym("]")?;
                    let Expr::Num { value: hi, .. } = i else {
                        return self.err("part select bounds must be constants");
                    };
                    return Ok(Expr::Part(Box::new(Expr::Name(name)), hi as u32, lo));
                }
                self.sym("]")?;
                Ok(Expr::Index(name, Box::new(i)))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.sym(")")?;
                Ok(e)
            }
            Some(Tok::Sym("{")) => {
                self.pos += 1;
                let first = self.expr()?;
                if self.is_sym("{") {
                    let Expr::Num { value, .. } = first else {
                        return self.err("replication count must be a constant");
                    };
                    self.pos += 1;
                    let e = self.expr()?;
                    self.sym("}")?;
                    self.sym("}")?;
                    return Ok(Expr::Repeat(value as u32, Box::new(e)));
                }
                let mut parts = vec![first];
                while self.eat_sym(",") {
                    parts.push(self.expr()?);
                }
                self.sym("}")?;
                Ok(Expr::Concat(parts))
            }
            _ => self.err("expected an expression"),
        }
    }
}

/// Parsed modules of one or more files.
#[derive(Debug, Clone, Default)]
pub struct Netlist {
    modules: HashMap<String, Module>,
}

impl Netlist {
    pub fn parse<'a>(files: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Netlist, RtlError> {
        let mut modules = HashMap::new();
        for (file, text) in files {
            let mut p = Parser {
                file,
                toks: lex(file, text)?,
                pos: 0,
            };
            for m in p.modules()? {
                modules.insert(m.name.clone(), m);
            }
        }
        Ok(Netlist { modules })
    }

    pub fn module_names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.modules.keys().map(String::as_str).collect();
        v.sort();
        v
    }
}

fn mask(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

#[derive(Debug, Clone)]
struct Net {
    name: String,
    width: u32,
    /// First word index of an array.
    base: u32,
    array: bool,
    vals: Vec<u64>,
}

/// Expression with names bound to nets.
#[derive(Debug, Clone)]
enum CExpr {
    Num(u64, u32),
    Net(usize, u32),
    Word(usize, Box<CExpr>, u32),
    Bit(Box<CExpr>, Box<CExpr>),
    Part(Box<CExpr>, u32, u32),
    Unary(&'static str, Box<CExpr>),
    Binary(&'static str, Box<CExpr>, Box<CExpr>),
    Cond(Box<CExpr>, Box<CExpr>, Box<CExpr>),
    Concat(Vec<CExpr>),
    Repeat(u32, Box<CExpr>),
}

#[derive(Debug, Clone)]
struct CLValue {
    net: usize,
    index: Option<CExpr>,
}

#[derive(Debug, Clone)]
enum CStmt {
    Block(Vec<CStmt>),
    If(CExpr, Box<CStmt>, Option<Box<CStmt>>),
    Assign { lv: CLValue, e: CExpr },
}

/// A flattened, running instance of a netlist.
#[derive(Debug, Clone)]
pub struct Sim {
    nets: Vec<Net>,
    /// Hierarchical names, `u1.u2.name`; top-level names have no prefix.
    names: HashMap<String, usize>,
    assigns: Vec<(CLValue, CExpr)>,
    always: Vec<CStmt>,
}

struct Builder<'a> {
    netlist: &'a Netlist,
    nets: Vec<Net>,
    names: HashMap<String, usize>,
    assigns: Vec<(CLValue, CExpr)>,
    always: Vec<CStmt>,
    initial: Vec<CStmt>,
    inits: Vec<(usize, CExpr)>,
}

impl Builder<'_> {
    fn net(&mut self, d: &Decl) -> usize {
        let (base, array, n) = match d.words {
            Some((lo, hi)) => (lo, true, (hi - lo + 1) as usize),
            None => (0, false, 1),
        };
        self.nets.push(Net {
            name: d.name.clone(),
            width: d.width,
            base,
            array,
            vals: vec![0; n],
        });
        self.nets.len() - 1
    }

    fn instantiate(&mut self, module: &str, prefix: &str, bound: HashMap<String, usize>) -> Result<(), RtlError> {
        let m = self
            .netlist
            .modules
            .get(module)
            .ok_or_else(|| RtlError::UnknownModule(module.to_string()))?;
        let mut scope = HashMap::new();
        for p in &m.ports {
            let id = match bound.get(&p.decl.name) {
                Some(&id) => id,
                None => self.net(&p.decl),
            };
            scope.insert(p.decl.name.clone(), id);
        }
        for d in &m.decls {
            let id = self.net(d);
            scope.insert(d.name.clone(), id);
        }
        for (n, id) in &scope {
            self.names.insert(format!("{prefix}{n}"), *id);
        }
        for d in m.ports.iter().map(|p| &p.decl).chain(&m.decls) {
            if let Some(e) = &d.init {
                let e = self.compile(m, &scope, e)?;
                let net = scope[&d.name];
                if d.reg {
                    self.inits.push((net, e));
                } else {
                    self.assigns.push((CLValue { net, index: None }, e));
                }
            }
        }
        for (lv, e) in &m.assigns {
            let lv = self.lvalue(m, &scope, lv)?;
            let e = self.compile(m, &scope, e)?;
            self.assigns.push((lv, e));
        }
        for s in &m.always {
            let s = self.stmt(m, &scope, s)?;
            self.always.push(s);
        }
        for s in &m.initial {
            let s = self.stmt(m, &scope, s)?;
            self.initial.push(s);
        }
        for inst in &m.instances {
            let mut b = HashMap::new();
            for (port, e) in &inst.conns {
                let Expr::Name(n) = e else {
                    return Err(RtlError::Connection {
                        module: m.name.clone(),
                        port: port.clone(),
                    });
                };
                b.insert(port.clone(), self.lookup(m, &scope, n)?);
            }
            self.instantiate(&inst.module, &format!("{prefix}{}.", inst.name), b)?;
        }
        Ok(())
    }

    fn lookup(&self, m: &Module, scope: &HashMap<String, usize>, n: &str) -> Result<usize, RtlError> {
        scope.get(n).copied().ok_or_else(|| RtlError::UnknownName {
            module: m.name.clone(),
            name: n.to_string(),
        })
    }

    fn lvalue(&self, m: &Module, scope: &HashMap<String, usize>, lv: &LValue) -> Result<CLValue, RtlError> {
        Ok(CLValue {
            net: self.lookup(m, scope, &lv.name)?,
            index: lv.index.as_ref().map(|e| self.compile(m, scope, e)).transpose()?,
        })
    }

    fn stmt(&self, m: &Module, scope: &HashMap<String, usize>, s: &Stmt) -> Result<CStmt, RtlError> {
        Ok(match s {
            Stmt::Block(b) => CStmt::Block(b.iter().map(|s| self.stmt(m, scope, s)).collect::<Result<_, _>>()?),
            Stmt::If(c, t, e) => CStmt::If(
                self.compile(m, scope, c)?,
                Box::new(self.stmt(m, scope, t)?),
                e.as_ref().map(|e| self.stmt(m, scope, e).map(Box::new)).transpose()?,
            ),
            Stmt::Assign { lv, e, .. } => CStmt::Assign {
                lv: self.lvalue(m, scope, lv)?,
                e: self.compile(m, scope, e)?,
            },
        })
    }

    fn compile(&self, m: &Module, scope: &HashMap<String, usize>, e: &Expr) -> Result<CExpr, RtlError> {
        let c = |e: &Expr| self.compile(m, scope, e).map(Box::new);
        Ok(match e {
            Expr::Num { width, value } => CExpr::Num(value & mask(*width), *width),
            Expr::Name(n) => {
                let id = self.lookup(m, scope, n)?;
                CExpr::Net(id, self.nets[id].width)
            }
            Expr::Index(n, i) => {
                let id = self.lookup(m, scope, n)?;
                let net = &self.nets[id];
                if net.array {
                    CExpr::Word(id, c(i)?, net.width)
                } else {
                    CExpr::Bit(Box::new(CExpr::Net(id, net.width)), c(i)?)
                }
            }
            Expr::Part(b, hi, lo) => CExpr::Part(c(b)?, *hi, *lo),
            Expr::Unary(op, a) => CExpr::Unary(op, c(a)?),
            Expr::Binary(op, a, b) => CExpr::Binary(op, c(a)?, c(b)?),
            Expr::Cond(x, a, b) => CExpr::Cond(c(x)?, c(a)?, c(b)?),
            Expr::Concat(ps) => CExpr::Concat(ps.iter().map(|p| self.compile(m, scope, p)).collect::<Result<_, _>>()?),
            Expr::Repeat(n, a) => CExpr::Repeat(*n, c(a)?),
        })
    }
}

fn reads(e: &CExpr, out: &mut Vec<usize>) {
    match e {
        CExpr::Num(..) => {}
        CExpr::Net(n, _) => out.push(*n),
        CExpr::Word(n, i, _) => {
            out.push(*n);
            reads(i, out);
        }
        CExpr::Bit(a, b) | CExpr::Binary(_, a, b) => {
            reads(a, out);
            reads(b, out);
        }
        CExpr::Part(a, ..) | CExpr::Unary(_, a) | CExpr::Repeat(_, a) => reads(a, out),
        CExpr::Cond(x, a, b) => {
            reads(x, out);
            reads(a, out);
            reads(b, out);
        }
        CExpr::Concat(ps) => ps.iter().for_each(|p| reads(p, out)),
    }
}

impl Sim {
    /// Flatten `top` and apply initializers and `initial` blocks.
    pub fn new(netlist: &Netlist, top: &str) -> Result<Sim, RtlError> {
        let mut b = Builder {
            netlist,
            nets: Vec::new(),
            names: HashMap::new(),
            assigns: Vec::new(),
            always: Vec::new(),
            initial: Vec::new(),
            inits: Vec::new(),
        };
        b.instantiate(top, "", HashMap::new())?;
        let order = comb_order(&b.nets, &b.assigns)?;
        let assigns = order.into_iter().map(|i| b.assigns[i].clone()).collect();
        let mut sim = Sim {
            nets: b.nets,
            names: b.names,
            assigns,
            always: b.always,
        };
        for (n, e) in &b.inits {
            let (v, _) = sim.eval(e);
            let w = sim.nets[*n].width;
            sim.nets[*n].vals.iter_mut().for_each(|x| *x = v & mask(w));
        }
        let mut pending = Vec::new();
        for s in &b.initial {
            sim.exec(s, &mut pending);
        }
        sim.commit(pending);
        sim.settle();
        Ok(sim)
    }

    fn id(&self, name: &str) -> Option<usize> {
        self.names.get(name).copied()
    }

    /// Value of a scalar net by hierarchical name, `u1.u2.name`.
    pub fn get(&self, name: &str) -> Option<u64> {
        self.id(name).map(|i| self.nets[i].vals[0])
    }

    pub fn get_word(&self, name: &str, k: u32) -> Option<u64> {
        let n = &self.nets[self.id(name)?];
        n.vals.get(k.checked_sub(n.base)? as usize).copied()
    }

    pub fn set(&mut self, name: &str, v: u64) -> bool {
        match self.id(name) {
            Some(i) => {
                let w = self.nets[i].width;
                self.nets[i].vals[0] = v & mask(w);
                true
            }
            None => false,
        }
    }

    pub fn set_word(&mut self, name: &str, k: u32, v: u64) -> bool {
        let Some(i) = self.id(name) else { return false };
        let n = &mut self.nets[i];
        match k.checked_sub(n.base).and_then(|j| n.vals.get_mut(j as usize)) {
            Some(x) => {
                *x = v & mask(n.width);
                true
            }
            None => false,
        }
    }

    /// Recompute every continuous assignment.
    pub fn settle(&mut self) {
        for i in 0..self.assigns.len() {
            let (v, _) = self.eval(&self.assigns[i].1);
            let lv = self.assigns[i].0.clone();
            self.store(&lv, v);
        }
    }

    /// One rising clock edge followed by settling.
    pub fn step(&mut self) {
        let mut pending = Vec::new();
        for s in &self.always {
            self.exec(s, &mut pending);
        }
        self.commit(pending);
        self.settle();
    }

    fn commit(&mut self, pending: Vec<(usize, Option<u64>, u64)>) {
        for (n, idx, v) in pending {
            self.write(n, idx, v);
        }
    }

    fn write(&mut self, n: usize, idx: Option<u64>, v: u64) {
        let net = &mut self.nets[n];
        let w = net.width;
        match idx {
            None => net.vals[0] = v & mask(w),
            Some(i) if net.array => {
                if let Some(x) = (i as u32).checked_sub(net.base).and_then(|j| net.vals.get_mut(j as usize)) {
                    *x = v & mask(w);
                }
            }
            Some(i) if i < w as u64 => {
                net.vals[0] = (net.vals[0] & !(1 << i)) | ((v & 1) << i);
            }
            Some(_) => {}
        }
    }

    fn store(&mut self, lv: &CLValue, v: u64) {
        let idx = lv.index.as_ref().map(|e| self.eval(e).0);
        self.write(lv.net, idx, v);
    }

    fn exec(&self, s: &CStmt, pending: &mut Vec<(usize, Option<u64>, u64)>) {
        match s {
            CStmt::Block(b) => b.iter().for_each(|s| self.exec(s, pending)),
            CStmt::If(c, t, e) => {
                if self.eval(c).0 != 0 {
                    self.exec(t, pending);
                } else if let Some(e) = e {
                    self.exec(e, pending);
                }
            }
            CStmt::Assign { lv, e } => {
                // Blocking writes only occur in initial blocks, which
                // commit before anything reads them.
                let idx = lv.index.as_ref().map(|i| self.eval(i).0);
                pending.push((lv.net, idx, self.eval(e).0));
            }
        }
    }

    fn eval(&self, e: &CExpr) -> (u64, u32) {
        match e {
            CExpr::Num(v, w) => (*v, *w),
            CExpr::Net(n, w) => (self.nets[*n].vals[0], *w),
            CExpr::Word(n, i, w) => {
                let net = &self.nets[*n];
                let i = self.eval(i).0;
                let v = (i as u32)
                    .checked_sub(net.base)
                    .and_then(|j| net.vals.get(j as usize))
                    .copied()
                    .unwrap_or(0);
                (v, *w)
            }
            CExpr::Bit(a, i) => {
                let (v, w) = self.eval(a);
                let i = self.eval(i).0;
                ((if i < w as u64 { (v >> i) & 1 } else { 0 }), 1)
            }
            CExpr::Part(a, hi, lo) => {
                let (v, _) = self.eval(a);
                let w = hi - lo + 1;
                ((v >> lo) & mask(w), w)
            }
            CExpr::Unary(op, a) => {
                let (v, w) = self.eval(a);
                match *op {
                    "~" => (!v & mask(w), w),
                    "!" => ((v == 0) as u64, 1),
                    _ => (v.wrapping_neg() & mask(w), w),
                }
            }
            CExpr::Binary(op, a, b) => {
                let (x, wa) = self.eval(a);
                let (y, wb) = self.eval(b);
                let w = wa.max(wb);
                let m = mask(w);
                match *op {
                    "+" => (x.wrapping_add(y) & m, w),
                    "-" => (x.wrapping_sub(y) & m, w),
                    "&" => (x & y, w),
                    "|" => (x | y, w),
                    "^" => (x ^ y, w),
                    "<<" => ((if y >= 64 { 0 } else { x << y }) & mask(wa), wa),
                    ">>" => ((if y >= 64 { 0 } else { x >> y }), wa),
                    "==" => ((x == y) as u64, 1),
                    "!=" => ((x != y) as u64, 1),
                    "<" => ((x < y) as u64, 1),
                    "<=" => ((x <= y) as u64, 1),
                    ">" => ((x > y) as u64, 1),
                    ">=" => ((x >= y) as u64, 1),
                    "&&" => ((x != 0 && y != 0) as u64, 1),
                    _ => ((x != 0 || y != 0) as u64, 1),
                }
            }
            CExpr::Cond(c, a, b) => {
                let (a, wa) = self.eval(a);
                let (b, wb) = self.eval(b);
                let w = wa.max(wb);
                (if self.eval(c).0 != 0 { a } else { b }, w)
            }
            CExpr::Concat(ps) => {
                let mut v = 0u64;
                let mut w = 0u32;
                for p in ps {
                    let (pv, pw) = self.eval(p);
                    v = if pw >= 64 { pv } else { (v << pw) | pv };
                    w += pw;
                }
                (v & mask(w), w)
            }
            CExpr::Repeat(n, a) => {
                let (pv, pw) = self.eval(a);
                let mut v = 0u64;
                for _ in 0..*n {
                    v = if pw >= 64 { pv } else { (v << pw) | pv };
                }
                (v & mask(pw * n), pw * n)
            }
        }
    }

    /// Hierarchical names of all nets, sorted.
    pub fn names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.names.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

/// Order continuous assignments so that every net is written before it is read.
fn comb_order(nets: &[Net], assigns: &[(CLValue, CExpr)]) -> Result<Vec<usize>, RtlError> {
    let mut writers: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, (lv, _)) in assigns.iter().enumerate() {
        writers.entry(lv.net).or_default().push(i);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; assigns.len()];
    let mut order = Vec::new();
    for start in 0..assigns.len() {
        if mark[start] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
        mark[start] = 1;
        stack.push((start, deps(start, assigns, &writers)));
        while let Some((node, pending)) = stack.last_mut() {
            let node = *node;
            match pending.pop() {
                Some(d) if mark[d] == 0 => {
                    mark[d] = 1;
                    let ds = deps(d, assigns, &writers);
                    stack.push((d, ds));
                }
                Some(d) if mark[d] == 1 && d != node => {
                    return Err(RtlError::Loop(nets[assigns[d].0.net].name.clone()));
                }
                Some(_) => {}
                None => {
                    mark[node] = 2;
                    order.push(node);
                    stack.pop();
                }
            }
        }
    }
    Ok(order)
}

fn deps(i: usize, assigns: &[(CLValue, CExpr)], writers: &HashMap<usize, Vec<usize>>) -> Vec<usize> {
    let mut rs = Vec::new();
    reads(&assigns[i].1, &mut rs);
    if let Some(ix) = &assigns[i].0.index {
        reads(ix, &mut rs);
    }
    let mut out: Vec<usize> = rs
        .into_iter()
        .flat_map(|n| writers.get(&n).cloned().unwrap_or_default())
        .filter(|&j| j != i)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_counts() {
        let src = "module top (input wire clk, input wire [0:0] en);\n  reg [3:0] n = 4'h0;\n  wire [3:0] next = (n + 4'h1);\n  always @(posedge clk) begin\n    if (en) n <= next;\n  end\nendmodule\n";
        let nl = Netlist::parse([("top.v", src)]).unwrap();
        let mut sim = Sim::new(&nl, "top").unwrap();
        sim.set("en", 1);
        for _ in 0..17 {
            sim.step();
        }
        assert_eq!(sim.get("n"), Some(1));
        assert_eq!(sim.get("next"), Some(2));
    }

    #[test]
    fn ports_alias_nets_across_instances() {
        let a = "module leaf (input wire clk, input wire [7:0] x, output wire [7:0] y);\n  assign y = {x[3:0], x[7:4]};\nendmodule\n";
        let b = "module top (input wire clk, input wire [7:0] x);\n  wire [7:0] y;\n  leaf u (\n    .clk(clk),\n    .x(x),\n    .y(y)\n  );\nendmodule\n";
        let nl = Netlist::parse([("a.v", a), ("b.v", b)]).unwrap();
        let mut sim = Sim::new(&nl, "top").unwrap();
        sim.set("x", 0x1e);
        sim.settle();
        assert_eq!(sim.get("y"), Some(0xe1));
        assert_eq!(sim.get("u.y"), Some(0xe1));
    }

    #[test]
    fn combinational_loop_is_rejected() {
        let src = "module top (input wire clk);\n  wire [0:0] a;\n  wire [0:0] b;\n  assign a = ~b;\n  assign b = a;\nendmodule\n";
        let nl = Netlist::parse([("t.v", src)]).unwrap();
        assert!(matches!(Sim::new(&nl, "top"), Err(RtlError::Loop(_))));
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let err = Netlist::parse([("t.v", "module top (input wire clk);\n  assign = 1;\nendmodule\n")]).unwrap_err();
        assert!(matches!(err, RtlError::Syntax { line: 2, .. }), "{err}");
    }
}
