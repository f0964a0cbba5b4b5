//! Fuel-bounded head reduction, normal forms and three-valued probes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::term::{deep, substitute, Name, Term, TermKind};

pub const DEFAULT_FUEL: u64 = 20_000;
pub const DEFAULT_WINDOW: usize = 64;

/// Step budget for a reduction run, plus the size of the window used to
/// spot a term recurring on the head-reduction trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fuel {
    pub steps: u64,
    pub cycle_window: usize,
}

impl Fuel {
    pub fn new(steps: u64) -> Fuel {
        Fuel { steps, cycle_window: DEFAULT_WINDOW }
    }

    pub fn with_window(self, cycle_window: usize) -> Fuel {
        Fuel { cycle_window, ..self }
    }

    pub fn scaled(self, factor: u64) -> Fuel {
        Fuel { steps: self.steps.saturating_mul(factor), ..self }
    }
}

impl Default for Fuel {
    fn default() -> Fuel {
        Fuel::new(DEFAULT_FUEL)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome<T> {
    Value(T),
    /// An alpha-identical term recurred on the head-reduction trace.
    Diverged,
    /// The step budget ran out.
    Exhausted,
}

impl<T> Outcome<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Outcome::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Outcome<U> {
        match self {
            Outcome::Value(v) => Outcome::Value(f(v)),
            Outcome::Diverged => Outcome::Diverged,
            Outcome::Exhausted => Outcome::Exhausted,
        }
    }
}

/// Three-valued verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::Yes
        } else {
            Tri::No
        }
    }

    pub fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::No, _) | (_, Tri::No) => Tri::No,
            (Tri::Yes, Tri::Yes) => Tri::Yes,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::Yes, _) | (_, Tri::Yes) => Tri::Yes,
            (Tri::No, Tri::No) => Tri::No,
            _ => Tri::Unknown,
        }
    }

    /// Conjunction over an iterator, stopping at the first `No`.
    pub fn all(items: impl IntoIterator<Item = Tri>) -> Tri {
        let mut acc = Tri::Yes;
        for t in items {
            acc = acc.and(t);
            if acc == Tri::No {
                break;
            }
        }
        acc
    }

    pub fn is_yes(self) -> bool {
        self == Tri::Yes
    }

    pub fn is_no(self) -> bool {
        self == Tri::No
    }

    /// Exit status convention: 0 yes, 1 no, 2 unknown.
    pub fn exit_code(self) -> i32 {
        match self {
            Tri::Yes => 0,
            Tri::No => 1,
            Tri::Unknown => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Tri::Yes => "Yes",
            Tri::No => "No",
            Tri::Unknown => "Unknown",
        }
    }
}

impl std::fmt::Display for Tri {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    Diverged,
    Exhausted,
}

impl<T> From<Stop> for Outcome<T> {
    fn from(s: Stop) -> Outcome<T> {
        match s {
            Stop::Diverged => Outcome::Diverged,
            Stop::Exhausted => Outcome::Exhausted,
        }
    }
}

/// Mutable step counter shared by the sub-runs of one reduction.
pub(crate) struct Budget {
    pub left: u64,
    pub used: u64,
    pub window: usize,
}

impl Budget {
    pub fn new(fuel: Fuel) -> Budget {
        Budget { left: fuel.steps, used: 0, window: fuel.cycle_window }
    }

    fn spend(&mut self) -> Result<(), Stop> {
        if self.left == 0 {
            return Err(Stop::Exhausted);
        }
        self.left -= 1;
        self.used += 1;
        Ok(())
    }
}

/// A head normal form `λx⃗. h A⃗`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hnf {
    pub binders: Vec<Name>,
    pub head: Name,
    pub args: Vec<Term>,
}

impl Hnf {
    pub fn to_term(&self) -> Term {
        Term::lams(self.binders.iter().cloned(), Term::apps(Term::var(self.head.clone()), self.args.iter().cloned()))
    }
}

/// Brent-style cycle detection: one saved term, re-saved at growing
/// intervals capped by the window, so any cycle of period at most the
/// window is found after a bounded number of extra steps.
struct Cycles {
    cap: usize,
    saved: Option<Term>,
    power: usize,
    since: usize,
}

impl Cycles {
    fn new(cap: usize) -> Cycles {
        Cycles { cap, saved: None, power: 1, since: 0 }
    }

    /// Records `t`; true when it equals the saved term.
    fn recurs(&mut self, t: Term) -> bool {
        if self.cap == 0 {
            return false;
        }
        if self.saved.as_ref() == Some(&t) {
            return true;
        }
        self.since += 1;
        if self.saved.is_none() || self.since >= self.power {
            self.saved = Some(t);
            self.since = 0;
            self.power = (self.power * 2).min(self.cap);
        }
        false
    }
}

fn rebuild(binders: &[Name], head: &Term, args: &VecDeque<Term>) -> Term {
    Term::lams(binders.iter().cloned(), Term::apps(head.clone(), args.iter().cloned()))
}

pub(crate) fn hnf_in(m: &Term, budget: &mut Budget) -> Result<Hnf, Stop> {
    let mut binders: Vec<Name> = Vec::new();
    let mut head = m.clone();
    let mut args: VecDeque<Term> = VecDeque::new();
    let mut cycles = Cycles::new(budget.window);
    loop {
        let next = match head.kind() {
            TermKind::Var(x) => {
                return Ok(Hnf { binders, head: x.clone(), args: args.into_iter().collect() });
            }
            TermKind::App(f, a) => {
                args.push_front(a.clone());
                f.clone()
            }
            TermKind::Abs(x, body) => match args.pop_front() {
                None => {
                    binders.push(x.clone());
                    body.clone()
                }
                Some(a) => {
                    budget.spend()?;
                    let reduct = substitute(body, x, &a);
                    let (h2, extra) = reduct.spine();
                    for e in extra.into_iter().rev() {
                        args.push_front(e);
                    }
                    if cycles.recurs(rebuild(&binders, &h2, &args)) {
                        return Err(Stop::Diverged);
                    }
                    h2
                }
            },
        };
        head = next;
    }
}

/// Principal head normal form, split into binders, head variable and arguments.
pub fn hnf_parts(m: &Term, fuel: Fuel) -> Outcome<Hnf> {
    match hnf_in(m, &mut Budget::new(fuel)) {
        Ok(h) => Outcome::Value(h),
        Err(s) => s.into(),
    }
}

/// Reduces the head redex until a head normal form appears.
pub fn head_normalize(m: &Term, fuel: Fuel) -> Outcome<Term> {
    hnf_parts(m, fuel).map(|h| h.to_term())
}

pub(crate) fn nf_in(m: &Term, budget: &mut Budget) -> Result<Term, Stop> {
    deep(|| {
        let h = hnf_in(m, budget)?;
        let mut args = Vec::with_capacity(h.args.len());
        for a in &h.args {
            args.push(nf_in(a, budget)?);
        }
        Ok(Term::lams(h.binders, Term::apps(Term::var(h.head), args)))
    })
}

/// Leftmost-outermost β-normal form.
pub fn beta_nf(m: &Term, fuel: Fuel) -> Outcome<Term> {
    beta_nf_counted(m, fuel).0
}

/// Like [`beta_nf`], also reporting the number of contractions performed.
pub fn beta_nf_counted(m: &Term, fuel: Fuel) -> (Outcome<Term>, u64) {
    let mut b = Budget::new(fuel);
    let r = match nf_in(m, &mut b) {
        Ok(t) => Outcome::Value(t),
        Err(s) => s.into(),
    };
    (r, b.used)
}

/// η-normal form of a β-normal term (one bottom-up pass suffices there).
pub fn eta_nf(m: &Term) -> Term {
    deep(|| match m.kind() {
        TermKind::Var(_) => m.clone(),
        TermKind::App(f, a) => Term::app(eta_nf(f), eta_nf(a)),
        TermKind::Abs(x, body) => {
            let b = eta_nf(body);
            if let TermKind::App(f, a) = b.kind() {
                if a.as_var() == Some(x) && !f.has_free(x) {
                    return f.clone();
                }
            }
            Term::abs(x.clone(), b)
        }
    })
}

pub fn beta_eta_nf(m: &Term, fuel: Fuel) -> Outcome<Term> {
    beta_nf(m, fuel).map(|t| eta_nf(&t))
}

/// Does `m` βη-reduce to `target`? Both sides are normalized and compared.
pub fn beta_eta_reduces_to(m: &Term, target: &Term, fuel: Fuel) -> Tri {
    let a = beta_eta_nf(m, fuel);
    let b = beta_eta_nf(target, fuel);
    match (a, b) {
        (Outcome::Value(x), Outcome::Value(y)) => Tri::from_bool(x == y),
        _ => Tri::Unknown,
    }
}

pub fn is_solvable(m: &Term, fuel: Fuel) -> Tri {
    match hnf_parts(m, fuel) {
        Outcome::Value(_) => Tri::Yes,
        Outcome::Diverged => Tri::No,
        Outcome::Exhausted => Tri::Unknown,
    }
}

pub fn omega() -> Term {
    let w = Term::abs("x", Term::app(Term::var("x"), Term::var("x")));
    Term::app(w.clone(), w)
}

/// Smallest `k ≤ max_k` such that `m Ω…Ω` (k copies) is provably unsolvable.
pub fn find_omega_count(m: &Term, max_k: usize, fuel: Fuel) -> Option<usize> {
    let om = omega();
    let mut t = m.clone();
    for k in 0..=max_k {
        if is_solvable(&t, fuel) == Tri::No {
            return Some(k);
        }
        t = Term::app(t, om.clone());
    }
    None
}

/// One leftmost-outermost β-step, if any redex exists.
pub fn step_normal_order(m: &Term) -> Option<Term> {
    deep(|| match m.kind() {
        TermKind::Var(_) => None,
        TermKind::Abs(x, b) => step_normal_order(b).map(|b2| Term::abs(x.clone(), b2)),
        TermKind::App(f, a) => {
            if let TermKind::Abs(x, body) = f.kind() {
                return Some(substitute(body, x, a));
            }
            if let Some(f2) = step_normal_order(f) {
                return Some(Term::app(f2, a.clone()));
            }
            step_normal_order(a).map(|a2| Term::app(f.clone(), a2))
        }
    })
}

impl std::ops::Not for Tri {
    type Output = Tri;

    fn not(self) -> Tri {
        match self {
            Tri::Yes => Tri::No,
            Tri::No => Tri::Yes,
            Tri::Unknown => Tri::Unknown,
        }
    }
}
