#![allow(dead_code)]

use bohmlab::reduce::Fuel;
use bohmlab::term::{Name, Term};
use proptest::prelude::*;

pub fn fuel() -> Fuel {
    Fuel::default()
}

/// Shape of a term with binders resolved later.
#[derive(Debug, Clone)]
pub enum Raw {
    Var(usize),
    Lam(Box<Raw>),
    App(Box<Raw>, Box<Raw>),
}

const BINDERS: [&str; 3] = ["x", "y", "z"];
const FREE: [&str; 2] = ["a", "b"];

impl Raw {
    /// Binders cycle through x, y, z so shadowing happens. A variable with
    /// no binder in reach becomes free (`a`, `b`) unless `closed`, in which
    /// case the term is wrapped in one extra binder.
    pub fn to_term(&self, closed: bool) -> Term {
        fn go(r: &Raw, env: &mut Vec<Name>, closed: bool) -> Term {
            match r {
                Raw::Var(i) => {
                    if env.is_empty() {
                        Term::var(FREE[*i % FREE.len()])
                    } else if closed || *i < env.len() {
                        Term::var(env[env.len() - 1 - (*i % env.len())].clone())
                    } else {
                        Term::var(FREE[*i % FREE.len()])
                    }
                }
                Raw::Lam(b) => {
                    let x = Name::new(BINDERS[env.len() % BINDERS.len()]);
                    env.push(x.clone());
                    let body = go(b, env, closed);
                    env.pop();
                    Term::abs(x, body)
                }
                Raw::App(f, a) => Term::app(go(f, env, closed), go(a, env, closed)),
            }
        }
        if closed {
            let mut env = vec![Name::new("w")];
            Term::abs("w", go(self, &mut env, true))
        } else {
            go(self, &mut Vec::new(), false)
        }
    }
}

pub fn raw(depth: u32) -> impl Strategy<Value = Raw> {
    let leaf = (0usize..4).prop_map(Raw::Var);
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|b| Raw::Lam(Box::new(b))),
            (inner.clone(), inner).prop_map(|(f, a)| Raw::App(Box::new(f), Box::new(a))),
        ]
    })
}

pub fn open_term() -> impl Strategy<Value = Term> {
    raw(5).prop_map(|r| r.to_term(false))
}

pub fn closed_term() -> impl Strategy<Value = Term> {
    raw(5).prop_map(|r| r.to_term(true))
}

/// β-normal shapes: `λ⃗x. v N₁ … N_k` with normal arguments.
#[derive(Debug, Clone)]
pub struct NormalShape {
    pub binders: usize,
    pub head: usize,
    pub args: Vec<NormalShape>,
}

pub fn normal_shape(depth: u32) -> impl Strategy<Value = NormalShape> {
    let leaf = (0usize..3, 0usize..4).prop_map(|(b, h)| NormalShape { binders: b, head: h, args: vec![] });
    leaf.prop_recursive(depth, 16, 3, |inner| {
        (0usize..3, 0usize..4, prop::collection::vec(inner, 0..3))
            .prop_map(|(binders, head, args)| NormalShape { binders, head, args })
    })
}

impl NormalShape {
    /// A closed β-normal term: the root has at least one binder and every
    /// head picks one of the binders in scope.
    pub fn to_term(&self) -> Term {
        fn go(s: &NormalShape, env: &mut Vec<Name>, next: &mut usize) -> Term {
            let n = if env.is_empty() { s.binders.max(1) } else { s.binders };
            let start = env.len();
            for _ in 0..n {
                env.push(Name::new(&format!("v{next}")));
                *next += 1;
            }
            let head = env[env.len() - 1 - (s.head % env.len())].clone();
            let args: Vec<Term> = s.args.iter().map(|a| go(a, env, next)).collect();
            let binders: Vec<Name> = env.drain(start..).collect();
            Term::lams(binders, Term::apps(Term::var(head), args))
        }
        go(self, &mut Vec::new(), &mut 0)
    }
}

pub fn normal_closed() -> impl Strategy<Value = Term> {
    normal_shape(3).prop_map(|s| s.to_term())
}

/// `Y (λj x z₁…z_k. x (j z₁) … (j z_k))`: the infinite expansion of the
/// identity along the complete k-ary tree.
pub fn j_k(k: usize) -> Term {
    let zs: Vec<String> = (1..=k).map(|i| format!("z{i}")).collect();
    let body = format!(
        "Y (\\j x {}.x {})",
        zs.join(" "),
        zs.iter().map(|z| format!("(j {z})")).collect::<Vec<_>>().join(" ")
    );
    bohmlab::zoo::resolve_constants(&bohmlab::term::t(&body))
}

/// All finite η-expansions of the identity of size below `p`.
pub fn small_etas(p: usize) -> Vec<Term> {
    bohmlab::eta::trees_below(p).iter().map(bohmlab::eta::tree_to_eta).collect()
}

/// `λy.Q ↦ Q` with `y` renamed to `x`.
pub fn body(q: &Term) -> Term {
    match q.kind() {
        bohmlab::term::TermKind::Abs(y, b) => bohmlab::term::substitute(b, y, &Term::var("x")),
        _ => panic!("not an abstraction"),
    }
}

/// Parses a term and resolves zoo constants in it.
pub fn term(src: &str) -> Term {
    bohmlab::zoo::resolve_constants(&bohmlab::term::parse(src).expect("term parses"))
}
