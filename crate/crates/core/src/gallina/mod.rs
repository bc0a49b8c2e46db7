//! Gallina emission: a base library with the state list and bit-vector
//! helpers, a design library with one Definition per element, and one
//! Theorem per proof obligation.
//!
//! Bit-vectors are `list bool`, least significant bit first. Sequences run
//! on a small fuel-bounded statement machine defined in the design library.

pub mod lint;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use crate::elab::{DesignIR, SigId, SignalKind};
use crate::frontend::resolve::{RStmt, RStmtKind, RTrStmt, TBin, TExpr, TKind};
use crate::proof::{vtr_levels, Obligation};
use crate::sym::{ExecConfig, Verdict, DEFAULT_BUDGET_BITS};

pub use lint::{lint, LintError};

pub const BASE_FILE: &str = "tlv_base.v";
pub const DESIGN_FILE: &str = "tlv_design.v";
pub const THEOREM_FILE: &str = "tlv_theorems.v";
/// Logical path the files are mapped to in `_CoqProject`.
pub const LOGICAL_ROOT: &str = "TLV";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GallinaFile {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GallinaOptions {
    pub budget_bits: u32,
    pub max_cycles: u32,
}

impl Default for GallinaOptions {
    fn default() -> Self {
        GallinaOptions {
            budget_bits: DEFAULT_BUDGET_BITS,
            max_cycles: ExecConfig::default().max_cycles,
        }
    }
}

/// Names defined by the emitted libraries themselves.
const LIBRARY_NAMES: &[&str] = &[
    "bv_zero", "bv_fit", "bv_bit", "bv_not", "bv_map2", "bv_and", "bv_or", "bv_xor", "bv_add_c", "bv_add",
    "bv_sub", "bv_eqb", "bv_ltb_acc", "bv_ltb", "bv_to_nat_cap", "bv_shl", "bv_shr", "bv_select",
    "bv_read", "arr_set", "arr_write", "all_buses", "all_buses_complete", "forallb_buses", "t_item",
    "i_nil", "t_state", "st_nil", "st_cons", "item_id", "f_set", "f_get", "sim_update", "next_state",
    "sim_cycle", "two_cycles", "clear_stims", "boundary", "init_st", "reset_st", "t_stmt", "s_apply",
    "s_drive", "s_goto", "s_random", "s_wait", "s_cover", "s_call", "s_exit", "t_vtr", "t_run", "mk_run",
    "r_st", "r_cov", "r_cyc", "t_frame", "mk_frame", "state_body", "run_map", "run_cover", "run_random",
    "run_step", "max_cycles", "fuel", "machine", "start", "covered", "reached", "st", "nx", "a", "r", "v",
    "x", "l", "s", "n", "k", "b", "f", "g", "i", "m",
];

/// Identifier for signal `sig` as a `t_item` constructor.
fn item_name(ir: &DesignIR, sig: SigId) -> String {
    let s = &ir.signals[sig];
    if s.condition {
        return format!("cv_{}", s.name);
    }
    let reserved = LIBRARY_NAMES.contains(&s.name.as_str()) || lint::is_reserved(&s.name) || s.name.starts_with("get_");
    if reserved {
        format!("{}_sig", s.name)
    } else {
        s.name.clone()
    }
}

fn getter(ir: &DesignIR, sig: SigId) -> String {
    format!("get_{}", item_name(ir, sig))
}

fn bus(w: u32) -> String {
    format!("t_bus{w}")
}

fn arr(w: u32, d: u32) -> String {
    format!("t_arr{w}x{d}")
}

fn sig_type(ir: &DesignIR, sig: SigId) -> String {
    let s = &ir.signals[sig];
    match s.depth {
        Some(d) => arr(s.width, d),
        None => bus(s.width),
    }
}

/// Constant as a bit list, least significant bit first.
fn konst(v: u64, w: u32) -> String {
    let mut out = String::from("(");
    for i in 0..w {
        let bit = i < 64 && (v >> i) & 1 == 1;
        out.push_str(if bit { "true :: " } else { "false :: " });
    }
    out.push_str("nil)");
    out
}

fn zero_of(ir: &DesignIR, sig: SigId) -> String {
    let s = &ir.signals[sig];
    match s.depth {
        Some(d) => format!("(repeat (bv_zero {}) {d})", s.width),
        None => format!("(bv_zero {})", s.width),
    }
}

fn collect_eq_widths(e: &TExpr, out: &mut BTreeSet<u32>) {
    match &e.kind {
        TKind::Signal(_) | TKind::Const(_) => {}
        TKind::Select { base, .. } => collect_eq_widths(base, out),
        TKind::ArrayRead { index, .. } => collect_eq_widths(index, out),
        TKind::Concat(ps) => ps.iter().for_each(|p| collect_eq_widths(p, out)),
        TKind::Zext(a) | TKind::Not(a) => collect_eq_widths(a, out),
        TKind::Binary(op, a, b) => {
            if matches!(op, TBin::Eq | TBin::Ne) {
                out.insert(a.width);
            }
            collect_eq_widths(a, out);
            collect_eq_widths(b, out);
        }
    }
}

fn all_exprs(ir: &DesignIR) -> Vec<&TExpr> {
    let mut out = Vec::new();
    for c in ir.conditions.values() {
        out.extend(c.expr.iter());
    }
    for ws in &ir.writes {
        for w in ws {
            out.push(&w.value);
            out.extend(w.index.iter());
        }
    }
    for d in ir.datapaths.values() {
        for a in &d.assigns {
            out.push(&a.expr);
            out.extend(a.index.iter());
        }
    }
    out
}

const BASE_PRELUDE: &str = r"Require Import Coq.Lists.List Coq.Bool.Bool Coq.Arith.PeanoNat.

(* Bit-vectors: lists of booleans, least significant bit first. *)

Fixpoint bv_zero (n : nat) : list bool :=
  match n with
  | O => nil
  | S m => false :: bv_zero m
  end.

Definition bv_fit (n : nat) (v : list bool) : list bool := firstn n (v ++ bv_zero n).

Definition bv_bit (v : list bool) : bool :=
  match v with
  | x :: _ => x
  | nil => false
  end.

Definition bv_not (v : list bool) : list bool := map negb v.

Fixpoint bv_map2 (f : bool -> bool -> bool) (a b : list bool) : list bool :=
  match a, b with
  | x :: a', y :: b' => f x y :: bv_map2 f a' b'
  | _, _ => nil
  end.

Definition bv_and (a b : list bool) : list bool := bv_map2 andb a b.
Definition bv_or (a b : list bool) : list bool := bv_map2 orb a b.
Definition bv_xor (a b : list bool) : list bool := bv_map2 xorb a b.

Fixpoint bv_add_c (c : bool) (a b : list bool) : list bool :=
  match a, b with
  | x :: a', y :: b' => xorb (xorb x y) c :: bv_add_c (orb (andb x y) (andb c (xorb x y))) a' b'
  | _, _ => nil
  end.

Definition bv_add (a b : list bool) : list bool := bv_add_c false a b.
Definition bv_sub (a b : list bool) : list bool := bv_add_c true a (bv_not b).

Fixpoint bv_eqb (a b : list bool) : bool :=
  match a, b with
  | nil, nil => true
  | x :: a', y :: b' => andb (Bool.eqb x y) (bv_eqb a' b')
  | _, _ => false
  end.

(* The most significant differing bit decides. *)
Fixpoint bv_ltb_acc (acc : bool) (a b : list bool) : bool :=
  match a, b with
  | x :: a', y :: b' => bv_ltb_acc (if Bool.eqb x y then acc else y) a' b'
  | _, _ => acc
  end.

Definition bv_ltb (a b : list bool) : bool := bv_ltb_acc false a b.

(* Unsigned value, saturated at cap. *)
Definition bv_to_nat_cap (cap : nat) (v : list bool) : nat :=
  fold_left (fun n x => Nat.min cap (Nat.add (Nat.mul 2 n) (if x then 1 else 0))) (rev v) 0.

Definition bv_shl (a : list bool) (n : nat) : list bool := firstn (length a) (repeat false n ++ a).
Definition bv_shr (a : list bool) (n : nat) : list bool := firstn (length a) (skipn n a ++ bv_zero (length a)).
Definition bv_select (lo n : nat) (a : list bool) : list bool := firstn n (skipn lo a).

Definition bv_read (w d : nat) (arr : list (list bool)) (i : list bool) : list bool :=
  nth (bv_to_nat_cap d i) arr (bv_zero w).

Fixpoint arr_set (arr : list (list bool)) (i : nat) (v : list bool) : list (list bool) :=
  match arr, i with
  | nil, _ => nil
  | _ :: t, O => v :: t
  | x :: t, S j => x :: arr_set t j v
  end.

Definition arr_write (d : nat) (arr : list (list bool)) (i v : list bool) : list (list bool) :=
  arr_set arr (bv_to_nat_cap d i) v.

(* Enumeration of every bus of a given width. *)

Fixpoint all_buses (n : nat) : list (list bool) :=
  match n with
  | O => nil :: nil
  | S m => map (cons false) (all_buses m) ++ map (cons true) (all_buses m)
  end.

Lemma all_buses_complete : forall n l, length l = n -> In l (all_buses n).
Proof.
  induction n as [|n IH]; intros l H.
  - destruct l as [|b l]; [left; reflexivity | discriminate H].
  - destruct l as [|b l]; [discriminate H |].
    simpl in H. injection H as H.
    simpl. apply in_or_app.
    destruct b; [right | left]; apply in_map; apply IH; exact H.
Qed.

Lemma forallb_buses : forall n (P : list bool -> bool),
  forallb P (all_buses n) = true -> forall l, length l = n -> P l = true.
Proof.
  intros n P H l Hl.
  rewrite forallb_forall in H.
  apply H. apply all_buses_complete. exact Hl.
Qed.
";

/// Bus types, `t_item`, `t_state`, `f_set`/`f_get`, typed getters and
/// per-width equality.
pub fn emit_base_library(ir: &DesignIR) -> GallinaFile {
    let mut t = String::from("(* Generated by tlv: base library. *)\n\n");
    t.push_str(BASE_PRELUDE);
    let mut widths: BTreeSet<u32> = ir.signals.iter().map(|s| s.width).collect();
    let mut eq_widths = widths.clone();
    for e in all_exprs(ir) {
        collect_eq_widths(e, &mut eq_widths);
    }
    widths.extend(eq_widths.iter().copied());
    let arrays: BTreeSet<(u32, u32)> = ir
        .signals
        .iter()
        .filter_map(|s| s.depth.map(|d| (s.width, d)))
        .collect();
    t.push_str("\n(* Design state. *)\n\n");
    for w in &widths {
        let _ = writeln!(t, "Definition {} : Type := list bool.", bus(*w));
    }
    for (w, d) in &arrays {
        let _ = writeln!(t, "Definition {} : Type := list (list bool).", arr(*w, *d));
    }
    t.push_str("\nInductive t_item : Type :=\n  | i_nil");
    for i in 0..ir.signals.len() {
        let _ = write!(t, "\n  | {} (l : {})", item_name(ir, i), sig_type(ir, i));
    }
    t.push_str(".\n\n");
    t.push_str("Inductive t_state : Type :=\n  | st_nil\n  | st_cons (s : t_item) (l : t_state).\n\n");
    t.push_str("Definition item_id (s : t_item) : nat :=\n  match s with\n  | i_nil => 0");
    for i in 0..ir.signals.len() {
        let _ = write!(t, "\n  | {} _ => {}", item_name(ir, i), i + 1);
    }
    t.push_str("\n  end.\n\n");
    t.push_str(
        "Fixpoint f_set (s : t_item) (st : t_state) : t_state :=
  match st with
  | st_nil => st_cons s st_nil
  | st_cons x l => if Nat.eqb (item_id x) (item_id s) then st_cons s l else st_cons x (f_set s l)
  end.

Fixpoint f_get (n : nat) (st : t_state) : t_item :=
  match st with
  | st_nil => i_nil
  | st_cons x l => if Nat.eqb (item_id x) n then x else f_get n l
  end.
",
    );
    for i in 0..ir.signals.len() {
        let _ = write!(
            t,
            "\nDefinition {} (st : t_state) : {} :=\n  match f_get {} st with\n  | {} l => l\n  | _ => {}\n  end.\n",
            getter(ir, i),
            sig_type(ir, i),
            i + 1,
            item_name(ir, i),
            zero_of(ir, i)
        );
    }
    t.push('\n');
    for w in &eq_widths {
        let _ = writeln!(
            t,
            "Definition f_equal{w} (a b : {}) : bool := bv_eqb a b.",
            bus(*w)
        );
    }
    GallinaFile {
        name: BASE_FILE.to_string(),
        text: t,
    }
}

struct Ctx<'a> {
    ir: &'a DesignIR,
    /// Name of the state variable expressions read.
    st: &'a str,
}

impl Ctx<'_> {
    fn expr(&self, e: &TExpr) -> String {
        let ir = self.ir;
        match &e.kind {
            TKind::Signal(n) => format!("({} {})", getter(ir, ir.by_name[n]), self.st),
            TKind::Const(v) => konst(*v, e.width),
            TKind::Select { base, hi, lo } => {
                format!("(bv_select {lo} {} {})", hi - lo + 1, self.expr(base))
            }
            TKind::ArrayRead { array, index } => {
                let sig = ir.by_name[array];
                let d = ir.signals[sig].depth.unwrap_or(0);
                format!(
                    "(bv_read {} {d} ({} {}) {})",
                    e.width,
                    getter(ir, sig),
                    self.st,
                    self.expr(index)
                )
            }
            TKind::Concat(ps) => {
                let parts: Vec<String> = ps.iter().rev().map(|p| self.expr(p)).collect();
                format!("({})", parts.join(" ++ "))
            }
            TKind::Zext(a) => format!("({} ++ bv_zero {})", self.expr(a), e.width.saturating_sub(a.width)),
            TKind::Not(a) => format!("(bv_not {})", self.expr(a)),
            TKind::Binary(op, a, b) => {
                let (x, y) = (self.expr(a), self.expr(b));
                match op {
                    TBin::Add => format!("(bv_add {x} {y})"),
                    TBin::Sub => format!("(bv_sub {x} {y})"),
                    TBin::And => format!("(bv_and {x} {y})"),
                    TBin::Or => format!("(bv_or {x} {y})"),
                    TBin::Xor => format!("(bv_xor {x} {y})"),
                    TBin::Shl => format!("(bv_shl {x} (bv_to_nat_cap {} {y}))", a.width),
                    TBin::Shr => format!("(bv_shr {x} (bv_to_nat_cap {} {y}))", a.width),
                    TBin::Eq => format!("(f_equal{} {x} {y} :: nil)", a.width),
                    TBin::Ne => format!("(negb (f_equal{} {x} {y}) :: nil)", a.width),
                    TBin::Lt => format!("(bv_ltb {x} {y} :: nil)"),
                }
            }
        }
    }

    fn cond(&self, sig: SigId) -> String {
        format!("bv_bit ({} {})", getter(self.ir, sig), self.st)
    }
}

fn guard_conj(ctx: &Ctx, g: &[SigId]) -> String {
    // Left-nested conjunction: andb (andb g1 g2) g3.
    let mut it = g.iter();
    let Some(first) = it.next() else {
        return "true".into();
    };
    let mut acc = format!("({})", ctx.cond(*first));
    for c in it {
        acc = format!("(andb {acc} ({}))", ctx.cond(*c));
    }
    acc
}

/// Order transactions so nested ones precede their users.
fn transaction_order(ir: &DesignIR) -> Vec<String> {
    fn nested(body: &[RTrStmt], out: &mut Vec<String>) {
        for s in body {
            match s {
                RTrStmt::Nested(n) => out.push(n.clone()),
                RTrStmt::Guard { body, .. } | RTrStmt::Clock { body } => nested(body, out),
                _ => {}
            }
        }
    }
    fn visit(ir: &DesignIR, t: &str, done: &mut Vec<String>, seen: &mut BTreeSet<String>) {
        if !seen.insert(t.to_string()) {
            return;
        }
        let mut deps = Vec::new();
        if let Some(tr) = ir.transactions.get(t) {
            nested(&tr.body, &mut deps);
        }
        for d in deps {
            visit(ir, &d, done, seen);
        }
        done.push(t.to_string());
    }
    let mut done = Vec::new();
    let mut seen = BTreeSet::new();
    for t in ir.transactions.keys() {
        visit(ir, t, &mut done, &mut seen);
    }
    done
}

fn tr_body(ctx: &Ctx, body: &[RTrStmt], indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    let ir = ctx.ir;
    for s in body {
        match s {
            RTrStmt::Apply(d) => {
                let _ = writeln!(out, "{pad}let st := {d} st in");
            }
            RTrStmt::Drive(c) => {
                let sig = ir.by_name[c];
                let _ = writeln!(out, "{pad}let st := f_set ({} (true :: nil)) st in", item_name(ir, sig));
            }
            RTrStmt::Nested(t) => {
                let _ = writeln!(out, "{pad}let st := {t} st in");
            }
            RTrStmt::Guard { cond, body, .. } => {
                let sig = ir.by_name[cond];
                let _ = writeln!(out, "{pad}let st := if {} then", ctx.cond(sig));
                tr_body(ctx, body, indent + 4, out);
                let _ = writeln!(out, "{pad}    st");
                let _ = writeln!(out, "{pad}  else st in");
            }
            RTrStmt::Clock { body } => tr_body(ctx, body, indent, out),
        }
    }
}

/// Conditions, datapaths, transactions, the cycle functions, the statement
/// machine and one Definition per VTR sequence.
pub fn emit_design_library(ir: &DesignIR, opts: &GallinaOptions) -> GallinaFile {
    let mut t = String::from("(* Generated by tlv: design library. *)\n\n");
    let _ = writeln!(t, "Require Import Coq.Lists.List Coq.Bool.Bool Coq.Arith.PeanoNat.");
    let _ = writeln!(t, "From {LOGICAL_ROOT} Require Import {}.\n", BASE_FILE.trim_end_matches(".v"));
    let ctx = Ctx { ir, st: "st" };

    t.push_str("(* Conditions. *)\n\n");
    for c in ir.conditions.values() {
        let mut terms = Vec::new();
        if let Some(e) = &c.expr {
            terms.push(format!("bv_bit {}", ctx.expr(e)));
        }
        for g in &c.drives {
            terms.push(guard_conj(&ctx, g));
        }
        if let Some(s) = c.stim {
            terms.push(format!("({})", ctx.cond(s)));
        }
        let v = terms
            .into_iter()
            .reduce(|a, b| format!("orb ({a}) ({b})"))
            .unwrap_or_else(|| "false".into());
        let _ = writeln!(
            t,
            "Definition {} (st : t_state) : t_state :=\n  f_set ({} (({v}) :: nil)) st.\n",
            c.name,
            item_name(ir, c.sig)
        );
    }

    t.push_str("(* Datapaths: every right-hand side reads the state before the datapath. *)\n\n");
    for d in ir.datapaths.values() {
        let _ = writeln!(t, "Definition {} (st : t_state) : t_state :=", d.name);
        let mut body = String::from("st");
        for a in d.assigns.iter().rev() {
            let sig = ir.by_name[&a.target];
            let v = ctx.expr(&a.expr);
            let item = match &a.index {
                None => format!("{} {v}", item_name(ir, sig)),
                Some(ie) => format!(
                    "{} (arr_write {} ({} st) {} {v})",
                    item_name(ir, sig),
                    ir.signals[sig].depth.unwrap_or(0),
                    getter(ir, sig),
                    ctx.expr(ie)
                ),
            };
            body = format!("f_set ({item})\n    ({body})");
        }
        let _ = writeln!(t, "  {body}.\n");
    }

    t.push_str("(* Transactions, read sequentially. *)\n\n");
    for name in transaction_order(ir) {
        let tr = &ir.transactions[&name];
        let _ = writeln!(t, "Definition {name} (st : t_state) : t_state :=");
        tr_body(&ctx, &tr.body, 2, &mut t);
        t.push_str("  st.\n\n");
    }

    t.push_str("(* Combinational signals: the first active write wins; no active write reads as zero. *)\n\n");
    for &i in &ir.comb_order {
        let s = &ir.signals[i];
        if s.condition {
            continue;
        }
        let mut v = format!("bv_zero {}", s.width);
        for w in ir.writes[i].iter().rev() {
            v = format!("if {} then {} else {v}", guard_conj(&ctx, &w.guard), ctx.expr(&w.value));
        }
        let _ = writeln!(
            t,
            "Definition upd_{} (st : t_state) : t_state :=\n  f_set ({} ({v})) st.\n",
            item_name(ir, i),
            item_name(ir, i)
        );
    }

    t.push_str("Definition sim_update (st : t_state) : t_state :=\n");
    for &i in &ir.comb_order {
        let s = &ir.signals[i];
        if s.condition {
            let _ = writeln!(t, "  let st := {} st in", s.name);
        } else {
            let _ = writeln!(t, "  let st := upd_{} st in", item_name(ir, i));
        }
    }
    t.push_str("  st.\n\n");

    t.push_str("Definition next_state (st : t_state) : t_state :=\n  let nx := st in\n");
    for i in ir.sequential() {
        let s = &ir.signals[i];
        let ws = &ir.writes[i];
        if ws.is_empty() {
            continue;
        }
        let v = match s.depth {
            None => {
                let mut v = format!("{} st", getter(ir, i));
                for w in ws.iter().rev() {
                    v = format!("if {} then {} else {v}", guard_conj(&ctx, &w.guard), ctx.expr(&w.value));
                }
                v
            }
            Some(d) => {
                let mut v = format!("{} st", getter(ir, i));
                for w in ws.iter().rev() {
                    let Some(ie) = &w.index else { continue };
                    v = format!(
                        "let a := {v} in if {} then arr_write {d} a {} {} else a",
                        guard_conj(&ctx, &w.guard),
                        ctx.expr(ie),
                        ctx.expr(&w.value)
                    );
                }
                v
            }
        };
        let _ = writeln!(t, "  let nx := f_set ({} ({v})) nx in", item_name(ir, i));
    }
    t.push_str("  nx.\n\n");
    t.push_str("Definition sim_cycle (st : t_state) : t_state := sim_update (next_state st).\n\n");
    t.push_str("Definition two_cycles (st : t_state) : t_state :=\n  sim_cycle (sim_cycle st).\n\n");

    t.push_str("Definition clear_stims (st : t_state) : t_state :=\n");
    let mut clear = String::from("st");
    for c in ir.conditions.values() {
        if let Some(s) = c.stim {
            clear = format!("f_set ({} (false :: nil)) ({clear})", item_name(ir, s));
        }
    }
    let _ = writeln!(t, "  {clear}.\n");
    t.push_str("Definition boundary (st : t_state) : t_state := sim_update (clear_stims (next_state st)).\n\n");

    t.push_str("Definition init_st : t_state :=\n ");
    let mut close = 0;
    for (i, s) in ir.signals.iter().enumerate() {
        if s.condition || s.kind == SignalKind::Combinational {
            continue;
        }
        let _ = write!(t, " st_cons ({} {}) (\n ", item_name(ir, i), zero_of(ir, i));
        close += 1;
    }
    let _ = writeln!(t, " st_nil{}.\n", ")".repeat(close));
    t.push_str("Definition reset_st : t_state := sim_update init_st.\n\n");

    emit_machine(ir, opts, &ctx, &mut t);
    GallinaFile {
        name: DESIGN_FILE.to_string(),
        text: t,
    }
}

const MACHINE: &str = r"(* Sequences run as statement lists. A frame holds a sequence's states,
   the current state, the pending statement lists and the next state. *)

Inductive t_stmt : Type :=
  | s_apply (f : t_state -> t_state)
  | s_drive (f : t_state -> t_state)
  | s_goto (n : nat)
  | s_random (f : list bool -> t_state -> t_state)
  | s_wait (g : t_state -> bool) (body : list t_stmt)
  | s_cover (k : nat) (g : t_state -> bool)
  | s_call (init : nat) (states : list (list t_stmt))
  | s_exit.

Definition t_vtr : Type := prod nat (list (list t_stmt)).

Inductive t_run : Type :=
  | mk_run (st : t_state) (free : list (list bool)) (cov : list (prod nat bool)) (cyc : nat).

Definition r_st (r : t_run) : t_state := match r with | mk_run st _ _ _ => st end.
Definition r_cov (r : t_run) : list (prod nat bool) := match r with | mk_run _ _ cv _ => cv end.
Definition r_cyc (r : t_run) : nat := match r with | mk_run _ _ _ cy => cy end.

Inductive t_frame : Type :=
  | mk_frame (states : list (list t_stmt)) (cur : nat) (cursors : list (list t_stmt)) (next : option nat).

Definition state_body (ss : list (list t_stmt)) (n : nat) : list t_stmt := nth n ss nil.

Definition run_map (f : t_state -> t_state) (r : t_run) : t_run :=
  match r with | mk_run st fr cv cy => mk_run (sim_update (f st)) fr cv cy end.

Definition run_cover (k : nat) (b : bool) (r : t_run) : t_run :=
  match r with | mk_run st fr cv cy => mk_run st fr (cv ++ ((k, b) :: nil)) cy end.

Definition run_random (f : list bool -> t_state -> t_state) (r : t_run) : t_run :=
  match r with
  | mk_run st (v :: vs) cv cy => mk_run (sim_update (f v st)) vs cv cy
  | mk_run st nil cv cy => mk_run (sim_update (f nil st)) nil cv cy
  end.

Definition run_step (r : t_run) : t_run :=
  match r with | mk_run st fr cv cy => mk_run (boundary st) fr cv (S cy) end.
";

const MACHINE_LOOP: &str = r"Fixpoint machine (fuel : nat) (fs : list t_frame) (r : t_run) : t_run :=
  match fuel with
  | O => r
  | S fuel' =>
    match fs with
    | nil => r
    | mk_frame ss cur cs nxt :: rest =>
      match cs with
      | nil => r
      | nil :: nil =>
        let n := match nxt with | Some m => m | None => cur end in
        let r' := run_step r in
        if Nat.ltb max_cycles (r_cyc r') then r'
        else machine fuel' (mk_frame ss n (state_body ss n :: nil) None :: rest) r'
      | nil :: outer => machine fuel' (mk_frame ss cur outer nxt :: rest) r
      | (s :: tl) :: outer =>
        let fr := mk_frame ss cur (tl :: outer) nxt in
        match s with
        | s_apply f => machine fuel' (fr :: rest) (run_map f r)
        | s_drive f => machine fuel' (fr :: rest) (run_map f r)
        | s_goto m => machine fuel' (mk_frame ss cur (tl :: outer) (Some m) :: rest) r
        | s_random f => machine fuel' (fr :: rest) (run_random f r)
        | s_wait g body =>
          if g (r_st r) then machine fuel' (mk_frame ss cur (body :: tl :: outer) nxt :: rest) r
          else
            let r' := run_step r in
            if Nat.ltb max_cycles (r_cyc r') then r'
            else machine fuel' (mk_frame ss cur cs nxt :: rest) r'
        | s_cover k g => machine fuel' (fr :: rest) (run_cover k (g (r_st r)) r)
        | s_call i ss' => machine fuel' (mk_frame ss' i (state_body ss' i :: nil) None :: fr :: rest) r
        | s_exit => machine fuel' rest r
        end
      end
    end
  end.

Definition start (v : t_vtr) (free : list (list bool)) (st : t_state) : t_run :=
  machine fuel (mk_frame (snd v) (fst v) (state_body (snd v) (fst v) :: nil) None :: nil) (mk_run st free nil 0).

(* An assert cover holds on every hit and is hit at least once. *)
Definition covered (k : nat) (r : t_run) : bool :=
  andb (existsb (fun e => Nat.eqb (fst e) k) (r_cov r))
       (forallb (fun e => implb (Nat.eqb (fst e) k) (snd e)) (r_cov r)).

Definition reached (k : nat) (r : t_run) : bool :=
  existsb (fun e => andb (Nat.eqb (fst e) k) (snd e)) (r_cov r).
";

/// Cover statements in declaration order, numbered; keyed by (VTR, cover).
fn cover_ids(ir: &DesignIR) -> IndexedCovers {
    let mut out = IndexedCovers::default();
    for (name, v) in &ir.vtrs {
        crate::elab::visit_stmts(v, &mut |s| {
            if let RStmtKind::Cover { name: c, exists, .. } = &s.kind {
                let key = (name.clone(), c.clone());
                if !out.ids.contains_key(&key) {
                    out.ids.insert(key.clone(), out.order.len());
                    out.order.push((key, *exists));
                }
            }
        });
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for ((_, c), _) in &out.order {
        *counts.entry(c.as_str()).or_default() += 1;
    }
    out.names = out
        .order
        .iter()
        .map(|((v, c), _)| {
            if counts[c.as_str()] > 1 {
                format!("{c}_{}", v.trim_start_matches("vtr_"))
            } else {
                c.clone()
            }
        })
        .collect();
    out
}

#[derive(Default)]
struct IndexedCovers {
    ids: HashMap<(String, String), usize>,
    order: Vec<((String, String), bool)>,
    /// Gallina predicate name per id.
    names: Vec<String>,
}

fn uses_fork(ir: &DesignIR, vtr: &str, seen: &mut BTreeSet<String>) -> bool {
    if !seen.insert(vtr.to_string()) {
        return false;
    }
    let Some(v) = ir.vtrs.get(vtr) else { return false };
    let mut fork = false;
    let mut callees = Vec::new();
    crate::elab::visit_stmts(v, &mut |s| match &s.kind {
        RStmtKind::Fork(_) => fork = true,
        RStmtKind::Call(c) => callees.push(c.clone()),
        _ => {}
    });
    fork || callees.iter().any(|c| uses_fork(ir, c, seen))
}

/// Statements a sequence may execute within one cycle, calls expanded.
fn expanded_size(ir: &DesignIR, vtr: &str, memo: &mut HashMap<String, u64>) -> u64 {
    if let Some(&n) = memo.get(vtr) {
        return n;
    }
    memo.insert(vtr.to_string(), 1);
    let mut n = 1u64;
    if let Some(v) = ir.vtrs.get(vtr) {
        let mut callees = Vec::new();
        crate::elab::visit_stmts(v, &mut |s| {
            n += 1;
            if let RStmtKind::Call(c) = &s.kind {
                callees.push(c.clone());
            }
        });
        for c in callees {
            n = n.saturating_add(expanded_size(ir, &c, memo));
        }
    }
    let n = n.min(1 << 16);
    memo.insert(vtr.to_string(), n);
    n
}

fn emit_machine(ir: &DesignIR, opts: &GallinaOptions, ctx: &Ctx, t: &mut String) {
    t.push_str(MACHINE);
    let mut memo = HashMap::new();
    let steps = ir
        .vtrs
        .keys()
        .map(|v| expanded_size(ir, v, &mut memo))
        .max()
        .unwrap_or(1)
        * 2
        + 2;
    let _ = writeln!(t, "\nDefinition max_cycles : nat := {}.", opts.max_cycles.min(4999));
    let _ = writeln!(t, "Definition fuel : nat := Nat.mul (S max_cycles) {}.\n", steps.min(4999));
    t.push_str(MACHINE_LOOP);

    let covers = cover_ids(ir);
    t.push_str("\n(* Cover predicates. *)\n\n");
    for (k, ((_, _), exists)) in covers.order.iter().enumerate() {
        let f = if *exists { "reached" } else { "covered" };
        let _ = writeln!(t, "Definition {} (r : t_run) : bool := {f} {k} r.", covers.names[k]);
    }

    t.push_str("\n(* Sequences, callees first. *)\n");
    let levels = vtr_levels(ir);
    let mut order: Vec<&String> = ir.vtrs.keys().collect();
    order.sort_by_key(|v| levels.get(*v).copied().unwrap_or(0));
    for name in order {
        let v = &ir.vtrs[name];
        let Some(seq) = &v.sequence else {
            let _ = writeln!(t, "\nDefinition p_{name} : t_vtr := (0, nil :: nil).");
            let _ = writeln!(
                t,
                "Definition {name} (free : list (list bool)) (st : t_state) : t_run := mk_run st free nil 0."
            );
            continue;
        };
        if uses_fork(ir, name, &mut BTreeSet::new()) {
            let _ = writeln!(t, "\n(* {name} uses fork, which the statement machine does not model. *)");
            continue;
        }
        let states: Vec<String> = seq
            .states
            .iter()
            .map(|s| stmts(ir, ctx, name, &covers, &s.body, 4))
            .collect();
        let _ = writeln!(
            t,
            "\nDefinition p_{name} : t_vtr :=\n  ({},\n   {} :: nil).",
            seq.init,
            states.join("\n   :: ")
        );
        let _ = writeln!(
            t,
            "Definition {name} (free : list (list bool)) (st : t_state) : t_run := start p_{name} free st."
        );
    }
}

fn stmts(ir: &DesignIR, ctx: &Ctx, owner: &str, covers: &IndexedCovers, body: &[RStmt], indent: usize) -> String {
    let mut parts = Vec::new();
    for s in body {
        let p = match &s.kind {
            RStmtKind::Apply(d) => format!("s_apply {d}"),
            RStmtKind::Drive(c) => {
                let stim = ir.conditions[c].stim.expect("VTR-driven condition has a stimulus");
                format!("s_drive (fun st => f_set ({} (true :: nil)) st)", item_name(ir, stim))
            }
            RStmtKind::Goto(n) => format!("s_goto {n}"),
            RStmtKind::Random(sig) => {
                let sig = ir.by_name[sig];
                format!(
                    "s_random (fun v st => f_set ({} (bv_fit {} v)) st)",
                    item_name(ir, sig),
                    ir.signals[sig].width
                )
            }
            RStmtKind::Wait { cond, body } => {
                let sig = ir.by_name[cond];
                format!(
                    "s_wait (fun st => {}) {}",
                    ctx.cond(sig),
                    stmts(ir, ctx, owner, covers, body, indent + 2)
                )
            }
            RStmtKind::Cover { name, conds, .. } => {
                let k = covers.ids[&(owner.to_string(), name.clone())];
                let sigs: Vec<SigId> = conds.iter().map(|c| ir.by_name[c]).collect();
                format!("s_cover {k} (fun st => {})", guard_conj(ctx, &sigs))
            }
            RStmtKind::Call(c) => {
                if ir.vtrs.get(c).is_some_and(|v| v.sequence.is_none()) {
                    continue;
                }
                format!("s_call (fst p_{c}) (snd p_{c})")
            }
            RStmtKind::Fork(_) => unreachable!("sequences with fork are skipped"),
            RStmtKind::Exit => "s_exit".to_string(),
        };
        parts.push(format!("({p})"));
    }
    if parts.is_empty() {
        return "nil".into();
    }
    let pad = " ".repeat(indent);
    format!("({} :: nil)", parts.join(&format!("\n{pad}:: ")))
}

/// `th_<root>` for a root's only obligation, else `th_<root>_<key>`.
pub fn theorem_name(ob: &Obligation, single: bool) -> String {
    let root = ob.root.trim_start_matches("vtr_");
    if single {
        format!("th_{root}")
    } else {
        let key: String = ob
            .key
            .replace("::", "__")
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
            .collect();
        format!("th_{root}_{key}")
    }
}

/// Binder names of an obligation's free values, `sym_<signal>_<n>`.
fn binder_names(ob: &Obligation) -> Vec<(String, u32)> {
    let mut counts: HashMap<&str, u32> = HashMap::new();
    ob.free_vars
        .iter()
        .map(|f| {
            let n = counts.entry(f.signal.as_str()).or_insert(0);
            let name = format!("sym_{}_{}", f.signal, n);
            *n += 1;
            (name, f.width)
        })
        .collect()
}

/// One Theorem per obligation. `verdicts` maps obligation names to the
/// internal verdicts; a missing verdict counts as Unknown.
pub fn emit_theorems(
    ir: &DesignIR,
    obligations: &[Obligation],
    verdicts: &HashMap<String, Verdict>,
    opts: &GallinaOptions,
) -> GallinaFile {
    let mut t = String::from("(* Generated by tlv: coverage theorems. *)\n");
    if obligations.is_empty() {
        return GallinaFile {
            name: THEOREM_FILE.to_string(),
            text: t,
        };
    }
    let _ = writeln!(t, "\nRequire Import Coq.Lists.List Coq.Bool.Bool.");
    let _ = writeln!(
        t,
        "From {LOGICAL_ROOT} Require Import {} {}.",
        BASE_FILE.trim_end_matches(".v"),
        DESIGN_FILE.trim_end_matches(".v")
    );
    let covers = cover_ids(ir);
    let mut per_root: BTreeMap<&str, usize> = BTreeMap::new();
    for ob in obligations {
        *per_root.entry(ob.root.as_str()).or_default() += 1;
    }
    for ob in obligations {
        let name = theorem_name(ob, per_root[ob.root.as_str()] == 1);
        let _ = writeln!(t, "\n(* {} *)", ob.name);
        if uses_fork(ir, &ob.root, &mut BTreeSet::new()) {
            let _ = writeln!(t, "(* Not emitted: {} uses fork. *)", ob.root);
            continue;
        }
        let Some(&k) = covers.ids.get(&(ob.owner.clone(), ob.cover.clone())) else {
            continue;
        };
        let vars = binder_names(ob);
        let free_list = if vars.is_empty() {
            "nil".to_string()
        } else {
            format!(
                "({} :: nil)",
                vars.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(" :: ")
            )
        };
        let body = format!("{} ({} {free_list} reset_st) = true", covers.names[k], ob.root);
        let mut stmt = String::new();
        for (n, w) in &vars {
            let _ = writeln!(stmt, "  forall {n} : {}, length {n} = {w} ->", bus(*w));
        }
        let _ = write!(stmt, "  {body}");
        let verdict = verdicts.get(&ob.name);
        let bits: u32 = vars.iter().map(|(_, w)| *w).sum();
        match verdict {
            Some(Verdict::Disproved { witness }) => {
                let w: Vec<String> = witness.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                let _ = writeln!(t, "(* Disproved; witness: {}. Stated without a proof. *)", w.join(", "));
                let _ = writeln!(t, "Definition {name}_statement : Prop :=\n{stmt}.");
            }
            Some(Verdict::Proved { .. }) if bits <= opts.budget_bits => {
                let _ = writeln!(t, "Theorem {name} :\n{stmt}.");
                t.push_str("Proof.\n");
                if vars.is_empty() {
                    t.push_str("  vm_compute. reflexivity.\nQed.\n");
                    continue;
                }
                let intros: Vec<String> = vars
                    .iter()
                    .enumerate()
                    .map(|(i, (n, _))| format!("{n} H{i}"))
                    .collect();
                let _ = writeln!(t, "  intros {}.", intros.join(" "));
                let mut pred = body.trim_end_matches(" = true").to_string();
                for (n, w) in vars.iter().rev() {
                    pred = format!("forallb (fun {n} => {pred}) (all_buses {w})");
                }
                let _ = writeln!(t, "  assert (E : {pred} = true) by (vm_compute; reflexivity).");
                let mut proof = "E".to_string();
                for (i, (n, w)) in vars.iter().enumerate() {
                    proof = format!("(forallb_buses {w} _ {proof} {n} H{i})");
                }
                let _ = writeln!(t, "  exact {proof}.\nQed.");
            }
            other => {
                let why = match other {
                    Some(Verdict::Proved { .. }) => format!(
                        "enumerating {bits} bits exceeds the budget of {} bits",
                        opts.budget_bits
                    ),
                    Some(Verdict::Unknown { reason }) => format!("internal verdict Unknown: {reason}"),
                    _ => "no internal verdict".to_string(),
                };
                let _ = writeln!(t, "(* Admitted: {why}. *)");
                let _ = writeln!(t, "Theorem {name} :\n{stmt}.\nProof.\nAdmitted.");
            }
        }
    }
    GallinaFile {
        name: THEOREM_FILE.to_string(),
        text: t,
    }
}

/// All three files in dependency order.
pub fn emit_all(
    ir: &DesignIR,
    obligations: &[Obligation],
    verdicts: &HashMap<String, Verdict>,
    opts: &GallinaOptions,
) -> Vec<GallinaFile> {
    vec![
        emit_base_library(ir),
        emit_design_library(ir, opts),
        emit_theorems(ir, obligations, verdicts, opts),
    ]
}

/// `_CoqProject` listing the files in dependency order.
pub fn coq_project(files: &[GallinaFile]) -> String {
    let mut s = format!("-Q . {LOGICAL_ROOT}\n");
    for f in files {
        s.push_str(&f.name);
        s.push('\n');
    }
    s
}

/// Lint emitted files in order.
pub fn lint_files(files: &[GallinaFile]) -> Result<(), Vec<LintError>> {
    let pairs: Vec<(String, String)> = files.iter().map(|f| (f.name.clone(), f.text.clone())).collect();
    lint(&pairs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoqGate {
    /// No `coqc` on the PATH.
    Skipped,
    Passed,
    Failed(String),
}

/// Type-check written files with `coqc` when it is installed.
pub fn coq_gate(dir: &Path, files: &[GallinaFile]) -> CoqGate {
    if Command::new("coqc").arg("--version").output().is_err() {
        return CoqGate::Skipped;
    }
    for f in files {
        let out = Command::new("coqc")
            .current_dir(dir)
            .args(["-Q", ".", LOGICAL_ROOT, &f.name])
            .output();
        match out {
            Ok(o) if o.status.success() => {}
            Ok(o) => return CoqGate::Failed(String::from_utf8_lossy(&o.stderr).into_owned()),
            Err(e) => return CoqGate::Failed(e.to_string()),
        }
    }
    CoqGate::Passed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::{compile_sources, Source};
    use crate::proof::generate_obligations;
    use crate::sva::LowerOptions;

    fn soc() -> DesignIR {
        compile_sources(&[Source::new("soc.pdvl", crate::suite::SOC)], &LowerOptions::default())
            .unwrap()
            .ir
    }

    fn soc_files() -> Vec<GallinaFile> {
        let ir = soc();
        let roots: Vec<String> = crate::suite::SOC_TOPS.iter().map(|s| s.to_string()).collect();
        let obs = generate_obligations(&ir, &roots).unwrap();
        let mut store = crate::proof::CertStore::default();
        let report = crate::proof::prove_all(&ir, &roots, &mut store, &Default::default()).unwrap();
        let verdicts = report.results.into_iter().map(|r| (r.name, r.verdict)).collect();
        emit_all(&ir, &obs, &verdicts, &GallinaOptions::default())
    }

    #[test]
    fn soc_files_pass_the_lint() {
        let files = soc_files();
        if let Err(es) = lint_files(&files) {
            let shown: Vec<String> = es.iter().take(10).map(|e| e.to_string()).collect();
            panic!("{} lint errors:\n{}", es.len(), shown.join("\n"));
        }
    }

    fn design(src: &str) -> DesignIR {
        compile_sources(&[Source::new("t.pdvl", src)], &LowerOptions::default())
            .unwrap()
            .ir
    }

    #[test]
    fn constructors_are_typed_by_width() {
        let ir = design("cluster cl_rv {\n  signal instr[32];\n  signal pc[20];\n  signal reg_file[32][32];\n  d_pc { pc = pc + 20'd4; }\n  tr_pc { @e_clk { d_pc; } }\n}\n");
        let base = emit_base_library(&ir).text;
        for want in ["| instr (l : t_bus32)", "| pc (l : t_bus20)", "| reg_file (l : t_arr32x32)"] {
            assert!(base.contains(want), "missing `{want}`");
        }
        assert!(base.contains("Inductive t_state : Type :=\n  | st_nil\n  | st_cons (s : t_item) (l : t_state)."));
        assert!(base.contains("Definition f_equal32 (a b : t_bus32) : bool"));
    }

    #[test]
    fn design_library_mirrors_the_elements() {
        let ir = soc();
        let d = emit_design_library(&ir, &GallinaOptions::default()).text;
        for want in [
            "Definition c_instr_i_addi (st : t_state) : t_state :=",
            "Definition d_addi (st : t_state) : t_state :=",
            "Definition tr_rv32i_addi (st : t_state) : t_state :=",
            "Definition sim_update (st : t_state) : t_state :=",
            "Definition sim_cycle (st : t_state) : t_state :=",
            "Definition two_cycles (st : t_state) : t_state :=\n  sim_cycle (sim_cycle st).",
        ] {
            assert!(d.contains(want), "missing `{want}`");
        }
    }

    #[test]
    fn uart_theorem_has_the_coverage_shape() {
        let th = &soc_files()[2].text;
        assert!(th.contains(
            "Theorem th_tx_rx_transfer :\n  forall sym_axi_tx_data_0 : t_bus8, length sym_axi_tx_data_0 = 8 ->\n  cp_tx_rx_eq (vtr_tx_rx_transfer (sym_axi_tx_data_0 :: nil) reset_st) = true."
        ));
        assert_eq!(th.matches("\nTheorem ").count(), 27);
        assert!(!th.contains("Admitted"));
    }

    #[test]
    fn emission_is_deterministic() {
        assert_eq!(soc_files(), soc_files());
    }

    #[test]
    fn zero_obligations_give_a_header_only() {
        let ir = soc();
        let f = emit_theorems(&ir, &[], &HashMap::new(), &GallinaOptions::default());
        assert_eq!(f.text.lines().count(), 1);
        assert!(f.text.starts_with("(*"));
    }

    #[test]
    fn escape_hatches_follow_the_verdict() {
        let ir = soc();
        let roots = vec!["vtr_tx_rx_transfer".to_string()];
        let obs = generate_obligations(&ir, &roots).unwrap();
        let name = obs[0].name.clone();
        let opts = GallinaOptions::default();
        let unknown = HashMap::from([(name.clone(), Verdict::Unknown { reason: "budget".into() })]);
        let t = emit_theorems(&ir, &obs, &unknown, &opts).text;
        assert!(t.contains("Proof.\nAdmitted."));
        let proved = HashMap::from([(name.clone(), Verdict::Proved { method: crate::sym::Method::Normalization })]);
        let narrow = GallinaOptions { budget_bits: 4, ..opts };
        let t = emit_theorems(&ir, &obs, &proved, &narrow).text;
        assert!(t.contains("exceeds the budget of 4 bits") && t.contains("Admitted."));
        let disproved = HashMap::from([(name, Verdict::Disproved { witness: [("sym_axi_tx_data_0".to_string(), 3)].into() })]);
        let t = emit_theorems(&ir, &obs, &disproved, &opts).text;
        assert!(!t.contains("Theorem") && t.contains("Definition th_tx_rx_transfer_statement : Prop"));
        assert!(t.contains("sym_axi_tx_data_0 = 3"));
    }

    #[test]
    fn coq_project_lists_files_in_dependency_order() {
        let p = coq_project(&soc_files());
        assert_eq!(p, "-Q . TLV\ntlv_base.v\ntlv_design.v\ntlv_theorems.v\n");
    }

    #[test]
    fn lint_catches_a_missing_definition() {
        let mut files = soc_files();
        files[1].text = files[1].text.replacen("Definition d_addi ", "Definition d_addi_gone ", 1);
        let errs = lint_files(&files).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("`d_addi`")), "{errs:?}");
    }
}

