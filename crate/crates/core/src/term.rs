//! Lambda terms: representation, alpha-equivalence, substitution, parsing, printing.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

/// Stack headroom for the recursive traversals. Terms built by fixed-point
/// unfolding can be thousands of levels deep.
pub(crate) fn deep<R>(f: impl FnOnce() -> R) -> R {
    stacker::maybe_grow(128 * 1024, 4 * 1024 * 1024, f)
}

/// Identifier of a variable.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Name {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when `s` is a legal identifier.
    pub fn is_valid(s: &str) -> bool {
        !s.is_empty() && s.chars().all(is_name_char)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_name_char(c: char) -> bool {
    !(c.is_whitespace() || matches!(c, '(' | ')' | '\\' | '.' | 'λ'))
}

/// Returns `base` if it is not taken, otherwise the digit-stripped stem of
/// `base` followed by the smallest positive suffix that is not taken.
pub fn fresh_name(base: &Name, taken: impl Fn(&Name) -> bool) -> Name {
    if !taken(base) {
        return base.clone();
    }
    let s = base.as_str();
    let stem = s.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { s } else { stem };
    (1u64..)
        .map(|i| Name::new(&format!("{stem}{i}")))
        .find(|n| !taken(n))
        .expect("unbounded suffix search")
}

/// A child index path into a tree; empty is the root.
pub type Position = Vec<usize>;

pub enum TermKind {
    Var(Name),
    Abs(Name, Term),
    App(Term, Term),
}

/// Immutable, cheaply clonable lambda term. Equality and hashing are
/// insensitive to the names of bound variables.
#[derive(Clone)]
pub struct Term(Arc<TermKind>);

thread_local! {
    static HOLE: Term = Term(Arc::new(TermKind::Var(Name::new("_"))));
}

// Iterative teardown so that very deep terms do not overflow the stack.
impl Drop for TermKind {
    fn drop(&mut self) {
        fn take(t: &mut Term) -> Option<Term> {
            HOLE.try_with(|h| std::mem::replace(t, h.clone())).ok()
        }
        let mut stack: Vec<Term> = Vec::new();
        match self {
            TermKind::Var(_) => return,
            TermKind::Abs(_, b) => stack.extend(take(b)),
            TermKind::App(f, a) => {
                stack.extend(take(f));
                stack.extend(take(a));
            }
        }
        while let Some(t) = stack.pop() {
            if let Ok(mut kind) = Arc::try_unwrap(t.0) {
                match &mut kind {
                    TermKind::Var(_) => {}
                    TermKind::Abs(_, b) => stack.extend(take(b)),
                    TermKind::App(f, a) => {
                        stack.extend(take(f));
                        stack.extend(take(a));
                    }
                }
            }
        }
    }
}

impl Term {
    pub fn var(name: impl Into<Name>) -> Term {
        Term(Arc::new(TermKind::Var(name.into())))
    }

    pub fn abs(binder: impl Into<Name>, body: Term) -> Term {
        Term(Arc::new(TermKind::Abs(binder.into(), body)))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term(Arc::new(TermKind::App(f, a)))
    }

    /// `f a1 ... an`
    pub fn apps(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(f, Term::app)
    }

    /// `λx1 ... xn. body`
    pub fn lams<N: Into<Name>>(binders: impl IntoIterator<Item = N>, body: Term) -> Term {
        let bs: Vec<Name> = binders.into_iter().map(Into::into).collect();
        bs.into_iter().rev().fold(body, |b, x| Term::abs(x, b))
    }

    pub fn kind(&self) -> &TermKind {
        &self.0
    }

    pub fn ptr_eq(a: &Term, b: &Term) -> bool {
        Arc::ptr_eq(&a.0, &b.0)
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self.kind() {
            TermKind::Var(x) => Some(x),
            _ => None,
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        deep(|| match self.kind() {
            TermKind::Var(_) => 1,
            TermKind::Abs(_, b) => 1 + b.size(),
            TermKind::App(f, a) => 1 + f.size() + a.size(),
        })
    }

    /// Splits `λx⃗.B` into its leading binders and body.
    pub fn strip_lams(&self) -> (Vec<Name>, Term) {
        let mut binders = Vec::new();
        let mut t = self.clone();
        while let TermKind::Abs(x, b) = t.kind() {
            binders.push(x.clone());
            let b = b.clone();
            t = b;
        }
        (binders, t)
    }

    /// Splits `h A1 ... An` into its head and arguments.
    pub fn spine(&self) -> (Term, Vec<Term>) {
        let mut args = Vec::new();
        let mut t = self.clone();
        while let TermKind::App(f, a) = t.kind() {
            args.push(a.clone());
            let f = f.clone();
            t = f;
        }
        args.reverse();
        (t, args)
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn has_free(&self, x: &Name) -> bool {
        deep(|| match self.kind() {
            TermKind::Var(y) => y == x,
            TermKind::Abs(y, b) => y != x && b.has_free(x),
            TermKind::App(f, a) => f.has_free(x) || a.has_free(x),
        })
    }

    /// Every name occurring anywhere in the term, bound or free.
    pub fn all_names(&self) -> HashSet<Name> {
        fn go(t: &Term, out: &mut HashSet<Name>) {
            deep(|| match t.kind() {
                TermKind::Var(x) => {
                    out.insert(x.clone());
                }
                TermKind::Abs(x, b) => {
                    out.insert(x.clone());
                    go(b, out);
                }
                TermKind::App(f, a) => {
                    go(f, out);
                    go(a, out);
                }
            })
        }
        let mut out = HashSet::new();
        go(self, &mut out);
        out
    }

    /// Closes the term by abstracting its free variables in sorted order.
    pub fn closure(&self) -> Term {
        Term::lams(self.free_vars(), self.clone())
    }
}

fn collect_free(t: &Term, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    deep(|| match t.kind() {
        TermKind::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        TermKind::Abs(x, b) => {
            bound.push(x.clone());
            collect_free(b, bound, out);
            bound.pop();
        }
        TermKind::App(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
    })
}

// ---------------------------------------------------------------- alpha

fn lookup(env: &[&Name], x: &Name) -> Option<usize> {
    env.iter().rev().position(|y| *y == x)
}

fn alpha_eq<'a>(a: &'a Term, b: &'a Term, ea: &mut Vec<&'a Name>, eb: &mut Vec<&'a Name>, same: bool) -> bool {
    if same && Term::ptr_eq(a, b) {
        return true;
    }
    deep(|| match (a.kind(), b.kind()) {
        (TermKind::Var(x), TermKind::Var(y)) => match (lookup(ea, x), lookup(eb, y)) {
            (Some(i), Some(j)) => i == j,
            (None, None) => x == y,
            _ => false,
        },
        (TermKind::Abs(x, p), TermKind::Abs(y, q)) => {
            ea.push(x);
            eb.push(y);
            let r = alpha_eq(p, q, ea, eb, same && x == y);
            ea.pop();
            eb.pop();
            r
        }
        (TermKind::App(f, p), TermKind::App(g, q)) => {
            alpha_eq(f, g, ea, eb, same) && alpha_eq(p, q, ea, eb, same)
        }
        _ => false,
    })
}

impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        alpha_eq(self, other, &mut Vec::new(), &mut Vec::new(), true)
    }
}

impl Eq for Term {}

fn hash_term<'a, H: Hasher>(t: &'a Term, env: &mut Vec<&'a Name>, h: &mut H) {
    deep(|| match t.kind() {
        TermKind::Var(x) => match lookup(env, x) {
            Some(i) => {
                0u8.hash(h);
                i.hash(h);
            }
            None => {
                1u8.hash(h);
                x.hash(h);
            }
        },
        TermKind::Abs(x, b) => {
            2u8.hash(h);
            env.push(x);
            hash_term(b, env, h);
            env.pop();
        }
        TermKind::App(f, a) => {
            3u8.hash(h);
            hash_term(f, env, h);
            hash_term(a, env, h);
        }
    })
}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        hash_term(self, &mut Vec::new(), state)
    }
}

// --------------------------------------------------------- substitution

/// `m[x := n]`, renaming binders of `m` only when they would capture a
/// free variable of `n`.
pub fn substitute(m: &Term, x: &Name, n: &Term) -> Term {
    let fv = n.free_vars();
    subst_opt(m, x, n, &fv).unwrap_or_else(|| m.clone())
}

/// Simultaneous substitution of several variables.
pub fn substitute_many(m: &Term, pairs: &[(Name, Term)]) -> Term {
    if pairs.is_empty() {
        return m.clone();
    }
    // Route through fresh intermediates so the substitutions do not interact.
    let mut avoid: HashSet<Name> = m.all_names();
    for (x, n) in pairs {
        avoid.insert(x.clone());
        avoid.extend(n.all_names());
    }
    let mut t = m.clone();
    let mut temps = Vec::new();
    for (x, _) in pairs {
        let tmp = fresh_name(&Name::new("t"), |c| avoid.contains(c));
        avoid.insert(tmp.clone());
        t = substitute(&t, x, &Term::var(tmp.clone()));
        temps.push(tmp);
    }
    for (tmp, (_, n)) in temps.iter().zip(pairs) {
        t = substitute(&t, tmp, n);
    }
    t
}

fn subst_opt(m: &Term, x: &Name, n: &Term, fv_n: &BTreeSet<Name>) -> Option<Term> {
    deep(|| match m.kind() {
        TermKind::Var(y) => (y == x).then(|| n.clone()),
        TermKind::App(f, a) => {
            let f2 = subst_opt(f, x, n, fv_n);
            let a2 = subst_opt(a, x, n, fv_n);
            if f2.is_none() && a2.is_none() {
                None
            } else {
                Some(Term::app(f2.unwrap_or_else(|| f.clone()), a2.unwrap_or_else(|| a.clone())))
            }
        }
        TermKind::Abs(y, body) => {
            if y == x {
                return None;
            }
            if fv_n.contains(y) {
                if !body.has_free(x) {
                    return None;
                }
                let fv_body = body.free_vars();
                let z = fresh_name(y, |c| fv_n.contains(c) || fv_body.contains(c) || c == x);
                let renamed = substitute(body, y, &Term::var(z.clone()));
                let b2 = subst_opt(&renamed, x, n, fv_n).unwrap_or(renamed);
                Some(Term::abs(z, b2))
            } else {
                subst_opt(body, x, n, fv_n).map(|b| Term::abs(y.clone(), b))
            }
        }
    })
}

// -------------------------------------------------------------- printing

/// Renders with `\` binders, multi-binder sugar and minimal parentheses.
pub fn print(t: &Term) -> String {
    let mut s = String::new();
    write_term(t, &mut s);
    s
}

fn write_term(t: &Term, out: &mut String) {
    deep(|| match t.kind() {
        TermKind::Var(x) => out.push_str(x.as_str()),
        TermKind::Abs(..) => {
            let (bs, body) = t.strip_lams();
            out.push('\\');
            for (i, b) in bs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(b.as_str());
            }
            out.push('.');
            write_term(&body, out);
        }
        TermKind::App(..) => {
            let (h, args) = t.spine();
            if matches!(h.kind(), TermKind::Abs(..)) {
                out.push('(');
                write_term(&h, out);
                out.push(')');
            } else {
                write_term(&h, out);
            }
            for a in &args {
                out.push(' ');
                if matches!(a.kind(), TermKind::Var(_)) {
                    write_term(a, out);
                } else {
                    out.push('(');
                    write_term(a, out);
                    out.push(')');
                }
            }
        }
    })
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

// --------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Lam,
    Dot,
    LParen,
    RParen,
    Ident(String),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut toks = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        match c {
            c if c.is_whitespace() => {
                it.next();
            }
            '\\' | 'λ' => {
                it.next();
                toks.push((i, Tok::Lam));
            }
            '.' => {
                it.next();
                toks.push((i, Tok::Dot));
            }
            '(' => {
                it.next();
                toks.push((i, Tok::LParen));
            }
            ')' => {
                it.next();
                toks.push((i, Tok::RParen));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = it.peek() {
                    if !is_name_char(c) {
                        break;
                    }
                    s.push(c);
                    it.next();
                }
                toks.push((i, Tok::Ident(s)));
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: &str) -> Result<T, ParseError> {
        Err(ParseError { offset: self.offset(), message: msg.to_string() })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Lam) => self.lam(),
            _ => self.app(),
        }
    }

    fn lam(&mut self) -> Result<Term, ParseError> {
        self.pos += 1;
        let mut binders = Vec::new();
        while let Some(Tok::Ident(s)) = self.peek() {
            binders.push(Name::new(s));
            self.pos += 1;
        }
        if binders.is_empty() {
            return self.err("expected a binder name");
        }
        if self.peek() != Some(&Tok::Dot) {
            return self.err("expected '.'");
        }
        self.pos += 1;
        let body = deep(|| self.term())?;
        Ok(Term::lams(binders, body))
    }

    fn app(&mut self) -> Result<Term, ParseError> {
        let mut acc: Option<Term> = None;
        loop {
            let next = match self.peek() {
                Some(Tok::Ident(s)) => {
                    let t = Term::var(Name::new(s));
                    self.pos += 1;
                    t
                }
                Some(Tok::LParen) => {
                    self.pos += 1;
                    let t = deep(|| self.term())?;
                    if self.peek() != Some(&Tok::RParen) {
                        return self.err("expected ')'");
                    }
                    self.pos += 1;
                    t
                }
                // A trailing abstraction extends to the right as far as possible.
                Some(Tok::Lam) if acc.is_some() => deep(|| self.lam())?,
                _ => break,
            };
            acc = Some(match acc {
                None => next,
                Some(f) => Term::app(f, next),
            });
        }
        match acc {
            Some(t) => Ok(t),
            None => self.err("expected a term"),
        }
    }
}

pub fn parse(text: &str) -> Result<Term, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected input after term");
    }
    Ok(t)
}

/// Parses a term known to be well formed. Panics otherwise.
pub fn t(text: &str) -> Term {
    parse(text).unwrap_or_else(|e| panic!("bad built-in term {text:?}: {e}"))
}
