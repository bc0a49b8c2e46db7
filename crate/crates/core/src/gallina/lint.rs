//! Structural lint for emitted Gallina: balanced delimiters, terminated
//! sentences, no duplicate definitions, and every identifier defined in an
//! earlier sentence, an earlier file, or the standard library.

use std::collections::HashSet;
use std::fmt;

/// Standard-library names the emitted files may reference.
const STDLIB: &[&str] = &[
    "list", "bool", "nat", "option", "prod", "true", "false", "nil", "cons", "Some", "None", "O", "S",
    "pair", "fst", "snd", "andb", "orb", "xorb", "negb", "implb", "Bool.eqb", "Nat.eqb", "Nat.ltb",
    "Nat.min", "Nat.mul", "Nat.add", "Nat.sub", "map", "app", "firstn", "skipn", "repeat", "length",
    "nth", "rev", "fold_left", "existsb", "forallb", "In", "in_or_app", "in_map", "forallb_forall",
    "eq", "Type", "Prop", "Set",
];

const KEYWORDS: &[&str] = &[
    "fun", "forall", "exists", "let", "in", "match", "with", "end", "if", "then", "else", "as", "return",
    "fix", "by", "Definition", "Fixpoint", "Inductive", "Theorem", "Lemma", "Proof", "Qed", "Admitted",
    "Require", "Import", "Export", "From",
];

const TACTICS: &[&str] = &[
    "intros", "induction", "destruct", "injection", "simpl", "left", "right", "apply", "exact", "rewrite",
    "assert", "vm_compute", "reflexivity", "discriminate", "all", "try", "repeat", "split", "auto",
];

/// Vernacular commands introducing a name.
const DEFINERS: &[&str] = &["Definition", "Fixpoint", "Inductive", "Theorem", "Lemma"];

/// Names emitted code must not redefine.
pub fn is_reserved(name: &str) -> bool {
    STDLIB.contains(&name) || KEYWORDS.contains(&name) || TACTICS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintError {
    pub file: String,
    pub line: u32,
    pub message: String,
}

impl fmt::Display for LintError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num,
    Punct(String),
    /// Sentence terminator.
    Dot,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Tokenize, skipping nested comments. Returns tokens with their lines.
fn lex(file: &str, text: &str) -> Result<Vec<(Tok, u32)>, LintError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let err = |line, message: String| LintError {
        file: file.to_string(),
        line,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '(' && chars.get(i + 1) == Some(&'*') {
            let start = line;
            let mut depth = 0;
            loop {
                if i >= chars.len() {
                    return Err(err(start, "unterminated comment".into()));
                }
                if chars[i] == '(' && chars.get(i + 1) == Some(&'*') {
                    depth += 1;
                    i += 2;
                } else if chars[i] == '*' && chars.get(i + 1) == Some(&')') {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
            }
        } else if c == '"' {
            return Err(err(line, "string literals are not emitted".into()));
        } else if c == '_' && !chars.get(i + 1).is_some_and(|n| is_ident_char(*n)) {
            out.push((Tok::Punct("_".into()), line));
            i += 1;
        } else if is_ident_start(c) {
            let mut s = String::new();
            loop {
                while i < chars.len() && is_ident_char(chars[i]) {
                    s.push(chars[i]);
                    i += 1;
                }
                // Qualified names: `Nat.eqb`.
                if i + 1 < chars.len() && chars[i] == '.' && is_ident_start(chars[i + 1]) {
                    s.push('.');
                    i += 1;
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(s), line));
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push((Tok::Num, line));
        } else if c == '.' {
            let next = chars.get(i + 1).copied();
            if next.is_none() || next.is_some_and(char::is_whitespace) {
                out.push((Tok::Dot, line));
                i += 1;
            } else {
                return Err(err(line, format!("unexpected `.{}`", next.unwrap_or(' '))));
            }
        } else {
            // Multi-character operators are kept whole.
            const OPS: &[&str] = &[":=", "=>", "->", "::", "++", "<-", "|", "(", ")", "[", "]", "{", "}", ":", ";", ",", "=", "_", "*", "<", ">", "&", "+", "-"];
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let op = OPS
                .iter()
                .find(|o| rest.starts_with(**o))
                .ok_or_else(|| err(line, format!("unexpected character `{c}`")))?;
            out.push((Tok::Punct(op.to_string()), line));
            i += op.chars().count();
        }
    }
    Ok(out)
}

fn check_balance(file: &str, toks: &[(Tok, u32)]) -> Result<(), LintError> {
    let mut stack: Vec<(&str, u32)> = Vec::new();
    for (t, line) in toks {
        let Tok::Punct(p) = t else { continue };
        let p = p.as_str();
        match p {
            "(" | "[" | "{" => stack.push((p, *line)),
            ")" | "]" | "}" => {
                let want = match p {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    Some((open, l)) => {
                        return Err(LintError {
                            file: file.into(),
                            line: *line,
                            message: format!("`{p}` closes `{open}` opened on line {l}"),
                        })
                    }
                    None => {
                        return Err(LintError {
                            file: file.into(),
                            line: *line,
                            message: format!("unmatched `{p}`"),
                        })
                    }
                }
            }
            _ => {}
        }
    }
    if let Some((open, l)) = stack.pop() {
        return Err(LintError {
            file: file.into(),
            line: l,
            message: format!("`{open}` is never closed"),
        });
    }
    Ok(())
}

fn ident(t: &Tok) -> Option<&str> {
    match t {
        Tok::Ident(s) => Some(s),
        _ => None,
    }
}

fn is_punct(t: &Tok, p: &str) -> bool {
    matches!(t, Tok::Punct(q) if q == p)
}

/// Names bound by a binder list starting at `i`, up to a depth-0 token in
/// `stop`. Names inside a type annotation are references, not binders.
fn binders(toks: &[&Tok], mut i: usize, stop: &[&str], out: &mut HashSet<String>) {
    let mut depth = 0i32;
    let mut in_type_at: Option<i32> = None;
    while i < toks.len() {
        let t = toks[i];
        match t {
            Tok::Punct(p) if p == "(" => depth += 1,
            Tok::Punct(p) if p == ")" => {
                if in_type_at == Some(depth) {
                    in_type_at = None;
                }
                depth -= 1;
                if depth < 0 {
                    return;
                }
            }
            Tok::Punct(p) if depth == 0 && stop.contains(&p.as_str()) => return,
            Tok::Punct(p) if p == ":" && in_type_at.is_none() => in_type_at = Some(depth),
            Tok::Ident(s) if in_type_at.is_none() => {
                out.insert(s.clone());
            }
            Tok::Dot => return,
            _ => {}
        }
        i += 1;
    }
}

/// Lint a list of `(file name, text)` in dependency order.
pub fn lint(files: &[(String, String)]) -> Result<(), Vec<LintError>> {
    let mut errors = Vec::new();
    let mut globals: HashSet<String> = HashSet::new();
    let mut modules: HashSet<String> = HashSet::new();
    let known: HashSet<&str> = STDLIB.iter().chain(KEYWORDS).chain(TACTICS).copied().collect();
    for (file, text) in files {
        match lint_file(file, text, &known, &mut globals, &modules) {
            Ok(()) => {}
            Err(mut e) => errors.append(&mut e),
        }
        if let Some(stem) = file.strip_suffix(".v") {
            modules.insert(stem.rsplit('/').next().unwrap_or(stem).to_string());
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn lint_file(
    file: &str,
    text: &str,
    known: &HashSet<&str>,
    globals: &mut HashSet<String>,
    modules: &HashSet<String>,
) -> Result<(), Vec<LintError>> {
    let toks = lex(file, text).map_err(|e| vec![e])?;
    check_balance(file, &toks).map_err(|e| vec![e])?;
    let mut errors = Vec::new();
    let err = |line: u32, message: String| LintError {
        file: file.to_string(),
        line,
        message,
    };
    if let Some((t, line)) = toks.last() {
        if *t != Tok::Dot {
            errors.push(err(*line, "last sentence is not terminated".into()));
        }
    }
    // Locals bound by the current theorem statement stay in scope for its proof.
    let mut proof_locals: HashSet<String> = HashSet::new();
    let mut in_proof = false;
    for sentence in toks.split(|(t, _)| *t == Tok::Dot) {
        if sentence.is_empty() {
            continue;
        }
        let line = sentence[0].1;
        let ts: Vec<&Tok> = sentence.iter().map(|(t, _)| t).collect();
        let head = ident(ts[0]).unwrap_or("");
        match head {
            "Require" | "Import" | "Export" => continue,
            "From" => {
                for t in ts.iter().skip(3) {
                    if let Some(m) = ident(t) {
                        if m != "Import" && !modules.contains(m) {
                            errors.push(err(line, format!("module `{m}` is not an earlier file")));
                        }
                    }
                }
                continue;
            }
            "Proof" => {
                in_proof = true;
                continue;
            }
            "Qed" | "Admitted" => {
                in_proof = false;
                proof_locals.clear();
                continue;
            }
            _ => {}
        }
        let mut locals: HashSet<String> = HashSet::new();
        let mut defined: Option<String> = None;
        if DEFINERS.contains(&head) {
            match ts.get(1).and_then(|t| ident(t)) {
                Some(name) => defined = Some(name.to_string()),
                None => errors.push(err(line, format!("`{head}` without a name"))),
            }
            binders(&ts, 2, &[":", ":="], &mut locals);
        }
        if in_proof {
            locals.extend(proof_locals.iter().cloned());
        }
        // Names of an inductive type's constructors.
        let mut ctors = Vec::new();
        if head == "Inductive" {
            let mut depth = 0;
            let mut after_assign = false;
            for (k, t) in ts.iter().enumerate() {
                match t {
                    Tok::Punct(p) if p == "(" => depth += 1,
                    Tok::Punct(p) if p == ")" => depth -= 1,
                    Tok::Punct(p) if p == ":=" && depth == 0 => {
                        after_assign = true;
                        if let Some(n) = ts.get(k + 1).and_then(|t| ident(t)) {
                            ctors.push(n.to_string());
                            binders(&ts, k + 2, &["|"], &mut locals);
                        }
                    }
                    Tok::Punct(p) if p == "|" && depth == 0 && after_assign => {
                        if let Some(n) = ts.get(k + 1).and_then(|t| ident(t)) {
                            ctors.push(n.to_string());
                            binders(&ts, k + 2, &["|"], &mut locals);
                        }
                    }
                    _ => {}
                }
            }
        }
        let is_ctor = |s: &str| ctors.iter().any(|c| c == s) || globals.contains(s) || known.contains(s);
        for (k, t) in ts.iter().enumerate() {
            match ident(t) {
                Some("fun") => binders(&ts, k + 1, &["=>"], &mut locals),
                Some("forall") => binders(&ts, k + 1, &[","], &mut locals),
                Some("let") => {
                    if let Some(n) = ts.get(k + 1).and_then(|t| ident(t)) {
                        locals.insert(n.to_string());
                    }
                }
                Some("intros") => {
                    for t in &ts[k + 1..] {
                        if let Some(n) = ident(t) {
                            locals.insert(n.to_string());
                        }
                    }
                }
                Some("as") => {
                    // Intro patterns: `as [|b l]`, `as H`.
                    let mut j = k + 1;
                    let mut depth = 0;
                    while j < ts.len() {
                        match ts[j] {
                            Tok::Punct(p) if p == "[" => depth += 1,
                            Tok::Punct(p) if p == "]" => {
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            Tok::Ident(n) => {
                                locals.insert(n.clone());
                                if depth == 0 {
                                    break;
                                }
                            }
                            _ if depth == 0 => break,
                            _ => {}
                        }
                        j += 1;
                    }
                }
                Some("assert") => {
                    if let (Some(Tok::Punct(p)), Some(n)) = (ts.get(k + 1), ts.get(k + 2).and_then(|t| ident(t))) {
                        if p == "(" {
                            locals.insert(n.to_string());
                        }
                    }
                }
                _ => {}
            }
            // Match arms: pattern variables sit between `|` and `=>`.
            if is_punct(t, "|") && head != "Inductive" {
                let mut j = k + 1;
                while j < ts.len() && !is_punct(ts[j], "=>") && !is_punct(ts[j], "|") {
                    if let Some(n) = ident(ts[j]) {
                        if !is_ctor(n) {
                            locals.insert(n.to_string());
                        }
                    }
                    j += 1;
                }
            }
        }
        for (t, l) in sentence {
            let Some(n) = ident(t) else { continue };
            if Some(n) == defined.as_deref() && head != "Fixpoint" {
                continue;
            }
            let ok = known.contains(n)
                || globals.contains(n)
                || locals.contains(n)
                || ctors.iter().any(|c| c == n)
                || Some(n) == defined.as_deref();
            if !ok {
                errors.push(err(*l, format!("`{n}` is not defined before use")));
            }
        }
        if in_proof {
            proof_locals.extend(locals.iter().cloned());
        }
        if let Some(name) = defined {
            if head == "Theorem" || head == "Lemma" {
                proof_locals = locals.clone();
            }
            if !globals.insert(name.clone()) || known.contains(name.as_str()) {
                errors.push(err(line, format!("`{name}` is defined twice")));
            }
        }
        for c in ctors {
            if !globals.insert(c.clone()) || known.contains(c.as_str()) {
                errors.push(err(line, format!("constructor `{c}` is defined twice")));
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> Result<(), Vec<LintError>> {
        lint(&[("a.v".to_string(), text.to_string())])
    }

    #[test]
    fn accepts_definitions_in_order() {
        let src = "Definition f (x : nat) : nat := S x.\nDefinition g (y : nat) : nat := f (f y).\n";
        assert_eq!(one(src), Ok(()));
    }

    #[test]
    fn rejects_forward_reference() {
        let src = "Definition g (y : nat) : nat := f y.\nDefinition f (x : nat) : nat := x.\n";
        let e = one(src).unwrap_err();
        assert!(e[0].message.contains("`f`"), "{e:?}");
        assert_eq!(e[0].line, 1);
    }

    #[test]
    fn rejects_unbalanced_and_unterminated() {
        assert!(one("Definition f (x : nat : nat := x.\n").is_err());
        assert!(one("Definition f (x : nat) : nat := x\n").is_err());
        assert!(one("(* open comment\nDefinition f := 0.\n").is_err());
    }

    #[test]
    fn match_pattern_variables_are_bound() {
        let src = "Definition hd (l : list bool) : bool :=\n  match l with\n  | x :: _ => x\n  | nil => false\n  end.\n";
        assert_eq!(one(src), Ok(()));
    }

    #[test]
    fn inductive_constructors_become_global() {
        let src = "Inductive t : Type :=\n  | a\n  | b (l : list bool).\nDefinition k (v : t) : bool := match v with | a => true | b _ => false end.\n";
        assert_eq!(one(src), Ok(()));
    }

    #[test]
    fn duplicate_definitions_are_reported() {
        let e = one("Definition f := 0.\nDefinition f := 1.\n").unwrap_err();
        assert!(e[0].message.contains("twice"));
    }

    #[test]
    fn import_must_name_an_earlier_file() {
        let files = vec![
            ("base.v".to_string(), "Definition z := 0.\n".to_string()),
            ("top.v".to_string(), "From TLV Require Import base.\nDefinition y := z.\n".to_string()),
        ];
        assert_eq!(lint(&files), Ok(()));
        let bad = vec![("top.v".to_string(), "From TLV Require Import base.\n".to_string())];
        assert!(lint(&bad).is_err());
    }
}
