//! Randomized checks of the engine invariants.

mod common;

use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use tlv_core::elab::SignalKind;
use tlv_core::frontend::pretty::print_expr;
use tlv_core::frontend::resolve::TBin;
use tlv_core::frontend::{parse, parse_expr, print_unit};
use tlv_core::proof::{CertStore, Certificate};
use tlv_core::sym::state::specialize_state;
use tlv_core::sym::{check_valid, Compiled, Design, Method, State, Term, Val, Verdict};

use common::*;

/// Expression over 8-bit `a`, `b` and 1-bit `c`, with a reference evaluator
/// written independently of the term library.
#[derive(Debug, Clone)]
enum E {
    A,
    B,
    C,
    K(u64, u32),
    Bin(TBin, Box<E>, Box<E>),
    Not(Box<E>),
    Ite(Box<E>, Box<E>, Box<E>),
    /// Swap the nibbles of an 8-bit value with a select/concat pair.
    Swap(Box<E>),
    /// Low bit of an 8-bit value.
    Low(Box<E>),
}

impl E {
    fn width(&self) -> u32 {
        match self {
            E::A | E::B | E::Swap(_) => 8,
            E::C | E::Low(_) => 1,
            E::K(_, w) => *w,
            E::Bin(op, a, _) => {
                if matches!(op, TBin::Eq | TBin::Ne | TBin::Lt) {
                    1
                } else {
                    a.width()
                }
            }
            E::Not(a) => a.width(),
            E::Ite(_, a, _) => a.width(),
        }
    }

    fn eval(&self, a: u64, b: u64, c: u64) -> u64 {
        let m = |w: u32| (1u64 << w) - 1;
        match self {
            E::A => a,
            E::B => b,
            E::C => c,
            E::K(v, _) => *v,
            E::Bin(op, x, y) => {
                let w = x.width();
                let (x, y) = (x.eval(a, b, c), y.eval(a, b, c));
                match op {
                    TBin::Add => (x + y) % (1 << w),
                    TBin::Sub => (x + (1 << w) - y) % (1 << w),
                    TBin::And => x & y,
                    TBin::Or => x | y,
                    TBin::Xor => x ^ y,
                    TBin::Shl => (if y >= w as u64 { 0 } else { x << y }) & m(w),
                    TBin::Shr => if y >= w as u64 { 0 } else { x >> y },
                    TBin::Eq => (x == y) as u64,
                    TBin::Ne => (x != y) as u64,
                    TBin::Lt => (x < y) as u64,
                }
            }
            E::Not(x) => !x.eval(a, b, c) & m(x.width()),
            E::Ite(k, x, y) => {
                if k.eval(a, b, c) == 1 {
                    x.eval(a, b, c)
                } else {
                    y.eval(a, b, c)
                }
            }
            E::Swap(x) => {
                let v = x.eval(a, b, c);
                ((v & 0xf) << 4) | (v >> 4)
            }
            E::Low(x) => x.eval(a, b, c) & 1,
        }
    }

    fn term(&self) -> Term {
        match self {
            E::A => Term::var("a", 8),
            E::B => Term::var("b", 8),
            E::C => Term::var("c", 1),
            E::K(v, w) => Term::konst(*v, *w),
            E::Bin(op, x, y) => Term::bin(*op, x.term(), y.term()),
            E::Not(x) => Term::not(x.term()),
            E::Ite(k, x, y) => Term::ite(k.term(), x.term(), y.term()),
            E::Swap(x) => {
                let t = x.term();
                Term::concat(vec![Term::select(t.clone(), 3, 0), Term::select(t, 7, 4)])
            }
            E::Low(x) => Term::select(x.term(), 0, 0),
        }
    }
}

const ARITH: [TBin; 7] = [TBin::Add, TBin::Sub, TBin::And, TBin::Or, TBin::Xor, TBin::Shl, TBin::Shr];
const CMP: [TBin; 3] = [TBin::Eq, TBin::Ne, TBin::Lt];
const LOGIC: [TBin; 3] = [TBin::And, TBin::Or, TBin::Xor];

fn byte_expr() -> impl Strategy<Value = E> {
    let leaf = prop_oneof![Just(E::A), Just(E::B), (0u64..256).prop_map(|v| E::K(v, 8))];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (prop::sample::select(ARITH.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, x, y)| E::Bin(op, Box::new(x), Box::new(y))),
            inner.clone().prop_map(|x| E::Not(Box::new(x))),
            inner.clone().prop_map(|x| E::Swap(Box::new(x))),
            (prop::sample::select(CMP.to_vec()), inner.clone(), inner.clone(), inner.clone(), inner)
                .prop_map(|(op, p, q, x, y)| E::Ite(
                    Box::new(E::Bin(op, Box::new(p), Box::new(q))),
                    Box::new(x),
                    Box::new(y)
                )),
        ]
    })
}

fn bit_expr() -> impl Strategy<Value = E> {
    let leaf = prop_oneof![
        Just(E::C),
        (0u64..2).prop_map(|v| E::K(v, 1)),
        (prop::sample::select(CMP.to_vec()), byte_expr(), byte_expr())
            .prop_map(|(op, x, y)| E::Bin(op, Box::new(x), Box::new(y))),
        byte_expr().prop_map(|x| E::Low(Box::new(x))),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (prop::sample::select(LOGIC.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, x, y)| E::Bin(op, Box::new(x), Box::new(y))),
            inner.prop_map(|x| E::Not(Box::new(x))),
        ]
    })
}

fn env(a: u64, b: u64, c: u64) -> HashMap<String, u64> {
    HashMap::from([("a".into(), a), ("b".into(), b), ("c".into(), c)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Normalizing constructors agree with direct evaluation, both after
    /// specialization and through the compiled evaluator.
    #[test]
    fn terms_match_reference_semantics(e in byte_expr(), a in 0u64..256, b in 0u64..256) {
        let t = e.term();
        prop_assert_eq!(t.width(), 8);
        let want = e.eval(a, b, 0);
        prop_assert_eq!(t.specialize(&env(a, b, 0)).as_const(), Some(want));
        let slots = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        prop_assert_eq!(Compiled::new(&t, &slots).eval(&[a, b, 0]), want);
    }

    /// Specializing part of the variables first gives the same value.
    #[test]
    fn specialization_commutes(e in byte_expr(), a in 0u64..256, b in 0u64..256) {
        let t = e.term();
        let partial = t.specialize(&HashMap::from([("a".to_string(), a)]));
        prop_assert_eq!(partial.specialize(&env(a, b, 0)).as_const(), Some(e.eval(a, b, 0)));
    }

    /// Proved exactly when no valuation falsifies; witnesses falsify.
    #[test]
    fn check_valid_agrees_with_enumeration(e in bit_expr()) {
        let t = e.term();
        let counter = (0..256u64)
            .flat_map(|a| (0..256u64).flat_map(move |b| (0..2u64).map(move |c| (a, b, c))))
            .find(|&(a, b, c)| e.eval(a, b, c) == 0);
        match check_valid(&t, 20) {
            Verdict::Proved { .. } => prop_assert!(counter.is_none(), "Proved but {:?} falsifies", counter),
            Verdict::Disproved { witness } => {
                let get = |n: &str| witness.get(n).copied().unwrap_or(0);
                prop_assert_eq!(e.eval(get("a"), get("b"), get("c")), 0, "witness {:?}", witness);
            }
            Verdict::Unknown { reason } => prop_assert!(false, "Unknown within budget: {}", reason),
        }
    }

    /// Printing is a fixed point of parse and print.
    #[test]
    fn expression_printing_round_trips(e in byte_expr()) {
        let text = source(&e);
        let once = print_expr(&parse_expr(&text).expect("generated text parses"));
        let twice = print_expr(&parse_expr(&once).expect("printed text parses"));
        prop_assert_eq!(once, twice);
    }

    /// Certificates survive a save and load unchanged.
    #[test]
    fn certificate_store_round_trips(
        certs in prop::collection::btree_map(
            "[a-z_]{1,12}(::[a-z_]{1,8})?",
            (any::<u64>(), 0u32..4, 0u32..3, any::<u8>()),
            0..12,
        )
    ) {
        let mut store = CertStore::default();
        for (name, (h, level, kind, w)) in &certs {
            let verdict = match kind {
                0 => Verdict::Proved { method: Method::Normalization },
                1 => Verdict::Proved { method: Method::Enumeration { bits: *w as u32 % 21 } },
                _ => Verdict::Unknown { reason: format!("reason {w}") },
            };
            store.record(name, Certificate {
                closure: format!("{h:016x}"),
                verdict,
                time_ms: *w as f64 / 4.0,
                level: *level,
            });
        }
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path()).unwrap();
        let back = CertStore::load(dir.path()).unwrap();
        prop_assert_eq!(back.certificates, store.certificates);
    }
}

/// Source text of `e` with explicit parentheses and sized literals.
fn source(e: &E) -> String {
    match e {
        E::A => "a".into(),
        E::B => "b".into(),
        E::C => "c".into(),
        E::K(v, w) => format!("{w}'d{v}"),
        E::Bin(op, x, y) => format!("({} {} {})", source(x), op.symbol(), source(y)),
        E::Not(x) => format!("~{}", source(x)),
        E::Ite(k, x, y) => format!("(({}) & {}) | (~{} & {})", source(k), source(x), source(k), source(y)),
        E::Swap(x) => format!("{{{}, {}}}", source(x), source(x)),
        E::Low(x) => format!("({} & 8'h01)", source(x)),
    }
}

/// A random concrete valuation of every non-combinational SoC signal.
fn soc_state(ir: &tlv_core::elab::DesignIR, seed: u64) -> State {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let d = Design::new(ir);
    let mut st = d.reset_st();
    for (i, s) in ir.signals.iter().enumerate() {
        if s.kind == SignalKind::Combinational {
            continue;
        }
        let mut r = || Term::konst(rng.gen::<u64>() & ((1u64 << s.width) - 1), s.width);
        let v = match s.depth {
            Some(n) => Val::Array((0..n).map(|_| r()).collect()),
            None => Val::Scalar(r()),
        };
        st.f_set(i, v);
    }
    st
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sim_update_is_idempotent(seed in any::<u64>()) {
        let ir = soc();
        let d = Design::new(&ir);
        let once = d.sim_update(&soc_state(&ir, seed));
        prop_assert_eq!(d.sim_update(&once), once);
    }

    /// Cycling a concrete state equals specializing the cycled symbolic state.
    #[test]
    fn sim_cycle_commutes_with_specialization(seed in any::<u64>()) {
        let ir = soc();
        let d = Design::new(&ir);
        let concrete = soc_state(&ir, seed);
        let mut symbolic = d.reset_st();
        let mut env = HashMap::new();
        for (i, v) in concrete.entries() {
            let s = &ir.signals[i];
            let var = |k: Option<usize>, t: &Term| {
                let name = match k {
                    Some(k) => format!("{}[{k}]", s.name),
                    None => s.name.clone(),
                };
                (name.clone(), t.as_const().unwrap(), Term::var(&name, s.width))
            };
            let sv = match v {
                Val::Scalar(t) => {
                    let (n, x, t) = var(None, t);
                    env.insert(n, x);
                    Val::Scalar(t)
                }
                Val::Array(ts) => Val::Array(ts.iter().enumerate().map(|(k, t)| {
                    let (n, x, t) = var(Some(k), t);
                    env.insert(n, x);
                    t
                }).collect()),
            };
            symbolic.f_set(i, sv);
        }
        let sym = d.sim_cycle(&d.sim_update(&symbolic)).unwrap();
        let conc = d.sim_cycle(&d.sim_update(&concrete)).unwrap();
        // A comb signal with no firing driver is absent on concrete states
        // and reads 0 under symbolic guards.
        let spec = specialize_state(&sym, &env);
        for i in 0..ir.signals.len() {
            match (spec.f_get(i), conc.f_get(i)) {
                (a, Some(b)) => prop_assert_eq!(a, Some(b), "signal {}", ir.signals[i].name),
                (Some(Val::Scalar(t)), None) => {
                    prop_assert_eq!(ir.signals[i].kind, SignalKind::Combinational);
                    prop_assert_eq!(t.as_const(), Some(0), "signal {}", ir.signals[i].name);
                }
                (a, None) => prop_assert!(a.is_none(), "signal {}", ir.signals[i].name),
            }
        }
    }

    /// Permuting the join commands of the SoC build leaves the design unchanged.
    #[test]
    fn join_order_does_not_matter(perm in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle()) {
        let src = tlv_core::suite::SOC;
        let start = src.find("  join cl_cpu i_cpu;").unwrap();
        let end = src[start..].find("}\n").unwrap() + start;
        let joins: Vec<&str> = src[start..end].lines().collect();
        prop_assume!(joins.len() == perm.len());
        let shuffled: Vec<&str> = perm.iter().map(|&i| joins[i]).collect();
        let edited = format!("{}{}\n{}", &src[..start], shuffled.join("\n"), &src[end..]);
        prop_assert_eq!(summary(&compile(&edited)), summary(&soc()));
    }
}

/// Order-free view of the elaborated design.
fn summary(ir: &tlv_core::elab::DesignIR) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for s in &ir.signals {
        out.insert(format!("sig {}", s.qname), format!("{} {:?} {:?}", s.width, s.depth, s.kind));
    }
    for (i, inst) in ir.instances.iter().enumerate() {
        let mut cl = inst.clusters.clone();
        cl.sort();
        out.insert(format!("inst {}", inst.path), format!("{cl:?} {i}"));
    }
    for (n, w) in ir.signals.iter().zip(&ir.writes) {
        let mut ws: Vec<String> = w.iter().map(|w| format!("{:?}", w.value.canonical())).collect();
        ws.sort();
        out.insert(format!("writes {}", n.name), ws.join(";"));
    }
    out
}

#[test]
fn bundled_sources_print_to_a_fixed_point() {
    for src in [tlv_core::suite::SOC, tlv_core::suite::HANDSHAKE] {
        let once = print_unit(&parse(src).unwrap());
        let twice = print_unit(&parse(&once).unwrap());
        assert_eq!(once, twice);
    }
}
