//! Separators witnessing an infinite η-difference, Böhm-out context
//! synthesis, and separation certificates.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{bt, freshen};
use crate::eta::{eta_shaped_id, hstar_eq, looks_like_infinite_eta, PROBE_DEPTH};
use crate::reduce::{beta_nf, beta_nf_counted, hnf_parts, omega, Fuel, Hnf, Outcome, Tri};
use crate::term::{parse, print, t, Name, Position, Term};
use crate::zoo;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SepError {
    #[error("no head normal form within fuel at position {0:?}")]
    NoHeadNormalForm(Position),
    #[error("head normal forms are not similar at position {0:?}")]
    NotSimilar(Position),
    #[error("position {0:?} is not a common position")]
    BadIndex(Position),
    #[error("{0:?} is not a separator: no argument looks like an infinite η-expansion")]
    NotASeparator(Position),
    #[error("hypotheses not met: {0}")]
    Hypotheses(String),
    #[error("no separator found within depth {0}")]
    NoSeparator(usize),
    #[error("malformed certificate: {0}")]
    BadCertificate(String),
}

/// `C[ ] = (λy⃗.[ ]) A₁ … A_k`.
#[derive(Clone, PartialEq, Eq)]
pub struct HeadContext {
    pub binders: Vec<Name>,
    pub args: Vec<Term>,
}

impl HeadContext {
    pub fn applicative(args: Vec<Term>) -> HeadContext {
        HeadContext { binders: Vec::new(), args }
    }

    pub fn instantiate(&self, m: &Term) -> Term {
        Term::apps(Term::lams(self.binders.iter().cloned(), m.clone()), self.args.iter().cloned())
    }

    /// The same context with `extra` trailing identities.
    pub fn padded(&self, extra: usize) -> HeadContext {
        let mut c = self.clone();
        c.args.extend(std::iter::repeat_with(zoo::i).take(extra));
        c
    }
}

impl fmt::Display for HeadContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.binders.is_empty() {
            write!(f, "[]")?;
        } else {
            let names: Vec<&str> = self.binders.iter().map(|n| n.as_str()).collect();
            write!(f, "(\\{}.[])", names.join(" "))?;
        }
        for a in &self.args {
            write!(f, " ({})", print(a))?;
        }
        Ok(())
    }
}

impl fmt::Debug for HeadContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Serialized form: binder names and printed argument terms.
#[derive(Serialize, Deserialize)]
struct ContextRepr {
    binders: Vec<String>,
    args: Vec<String>,
}

impl Serialize for HeadContext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ContextRepr {
            binders: self.binders.iter().map(|n| n.as_str().to_string()).collect(),
            args: self.args.iter().map(print).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HeadContext {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<HeadContext, D::Error> {
        let r = ContextRepr::deserialize(d)?;
        let mut binders = Vec::new();
        for b in &r.binders {
            if !Name::is_valid(b) {
                return Err(serde::de::Error::custom(format!("bad binder name {b:?}")));
            }
            binders.push(Name::new(b));
        }
        let args = r
            .args
            .iter()
            .map(|a| parse(a).map_err(|e| serde::de::Error::custom(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(HeadContext { binders, args })
    }
}

/// How the non-normalization of the second term was observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    /// A reduction cycle was found.
    Diverged,
    /// Fuel ran out.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub context: HeadContext,
    pub separator: Position,
    pub k: usize,
    /// β-steps taken by `C[M] ↠ I`.
    pub m_steps: u64,
    pub n_confidence: Confidence,
    /// Depth to which `bt(C[N])` was checked.
    pub depth: usize,
    /// One-line rendering of `bt(C[N])` to that depth.
    pub sketch: String,
}

impl SeparationCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<SeparationCertificate, SepError> {
        serde_json::from_str(s).map_err(|e| SepError::BadCertificate(e.to_string()))
    }

    pub fn padded(&self, extra: usize) -> SeparationCertificate {
        SeparationCertificate { context: self.context.padded(extra), ..self.clone() }
    }
}

// ------------------------------------------------------- aligned walking

type Env = Vec<(Name, usize)>;

fn lookup(env: &Env, x: &Name) -> Option<usize> {
    env.iter().rev().find(|(n, _)| n == x).map(|(_, i)| *i)
}

#[derive(Clone)]
struct Side {
    term: Term,
    env: Env,
}

/// Both hnfs at one common position, with binder identities aligned: the
/// shared prefix of binders gets shared ids.
struct Level {
    hm: Hnf,
    hn: Hnf,
    em: Env,
    en: Env,
}

fn open(s: &Side, fuel: Fuel) -> Option<Hnf> {
    let h = hnf_parts(&s.term, fuel).value()?;
    let mut scope: HashSet<Name> = s.term.free_vars().into_iter().collect();
    scope.extend(s.env.iter().map(|(n, _)| n.clone()));
    let (binders, head, args) = freshen(&h.binders, &h.head, &h.args, &scope);
    Some(Hnf { binders, head, args })
}

impl Level {
    fn new(sm: &Side, sn: &Side, next: &mut usize, fuel: Fuel, pos: &[usize]) -> Result<Level, SepError> {
        let err = || SepError::NoHeadNormalForm(pos.to_vec());
        let hm = open(sm, fuel).ok_or_else(err)?;
        let hn = open(sn, fuel).ok_or_else(err)?;
        let (mut em, mut en) = (sm.env.clone(), sn.env.clone());
        let common = hm.binders.len().min(hn.binders.len());
        for j in 0..hm.binders.len().max(hn.binders.len()) {
            if let Some(b) = hm.binders.get(j) {
                em.push((b.clone(), *next));
            }
            if j >= common {
                *next += 1;
            }
            if let Some(b) = hn.binders.get(j) {
                en.push((b.clone(), *next));
            }
            *next += 1;
        }
        Ok(Level { hm, hn, em, en })
    }

    fn similar(&self) -> bool {
        let same_head = match (lookup(&self.em, &self.hm.head), lookup(&self.en, &self.hn.head)) {
            (Some(a), Some(b)) => a == b,
            (None, None) => self.hm.head == self.hn.head,
            _ => false,
        };
        let dm = self.hm.binders.len() as isize - self.hm.args.len() as isize;
        let dn = self.hn.binders.len() as isize - self.hn.args.len() as isize;
        same_head && dm == dn
    }

    /// 1-based `i` such that `N_{m+i}` looks like an infinite η-expansion of
    /// `x_{n+i}`, if the second side has the extra binders.
    fn witness(&self, fuel: Fuel) -> Option<usize> {
        let (n, m) = (self.hm.binders.len(), self.hm.args.len());
        let p = self.hn.binders.len().checked_sub(n)?;
        (1..=p).find(|&i| looks_like_infinite_eta(&self.hn.args[m + i - 1], &self.hn.binders[n + i - 1], fuel))
    }

    fn common_args(&self) -> usize {
        self.hm.args.len().min(self.hn.args.len())
    }

    fn child(&self, j: usize) -> (Side, Side) {
        (
            Side { term: self.hm.args[j].clone(), env: self.em.clone() },
            Side { term: self.hn.args[j].clone(), env: self.en.clone() },
        )
    }
}

fn root(m: &Term) -> Side {
    Side { term: m.clone(), env: Vec::new() }
}

/// All separators of length `< depth`, breadth-first, leftmost first.
pub fn find_morris_separators(m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Vec<Position> {
    let mut out = Vec::new();
    let mut next = 0;
    let mut queue: VecDeque<(Position, Side, Side)> = VecDeque::from([(Vec::new(), root(m), root(n))]);
    while let Some((pos, sm, sn)) = queue.pop_front() {
        if pos.len() >= depth {
            continue;
        }
        let Ok(lv) = Level::new(&sm, &sn, &mut next, fuel, &pos) else { continue };
        if !lv.similar() {
            continue;
        }
        if lv.witness(fuel).is_some() {
            out.push(pos.clone());
        }
        for j in 0..lv.common_args() {
            let (cm, cn) = lv.child(j);
            let mut p = pos.clone();
            p.push(j);
            queue.push_back((p, cm, cn));
        }
    }
    out
}

pub fn find_morris_separator(m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Option<Position> {
    find_morris_separators(m, n, depth, fuel).into_iter().next()
}

// ------------------------------------------------------------- Böhm-out

enum Shape {
    /// Descend into child `child`; `n`, `m` from the side with fewer binders.
    Step { n: usize, m: usize, p: usize, child: usize },
    Base { n: usize, m: usize, p: usize, i: usize },
}

impl Shape {
    fn min_k(&self) -> usize {
        match *self {
            Shape::Step { n, m, p, .. } => n + m + p + 1,
            Shape::Base { n, m, p, .. } => n + m + p,
        }
    }

    fn args(&self, k: usize, tupler: &Term) -> Vec<Term> {
        let u = |j: usize| zoo::u(k, j).expect("projection index within k");
        let mut out = Vec::new();
        match *self {
            Shape::Step { n, m, p, child } => {
                out.extend(std::iter::repeat_n(tupler.clone(), n + p));
                out.extend(std::iter::repeat_with(omega).take(k - m - p));
                out.push(u(child + 1));
            }
            Shape::Base { n, m, p, i } => {
                out.extend(std::iter::repeat_n(tupler.clone(), n));
                out.extend(std::iter::repeat_with(zoo::i).take(p));
                out.extend(std::iter::repeat_with(omega).take(k - m - p));
                out.push(u(m + i));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BohmOut {
    pub context: HeadContext,
    /// Arity of the tupler used throughout.
    pub k: usize,
}

/// Builds a context sending `m` to `I` and `n` to an infinite η-expansion
/// of `I`, by walking `sigma`. The free variables of the pair become
/// context binders, each filled with the tupler.
pub fn bohm_out(m: &Term, n: &Term, sigma: &[usize], fuel: Fuel) -> Result<BohmOut, SepError> {
    let mut shapes = Vec::new();
    let (mut sm, mut sn) = (root(m), root(n));
    let mut next = 0;
    for depth in 0..=sigma.len() {
        let pos = &sigma[..depth];
        let lv = Level::new(&sm, &sn, &mut next, fuel, pos)?;
        if !lv.similar() {
            return Err(SepError::NotSimilar(pos.to_vec()));
        }
        let (nm, nn) = (lv.hm.binders.len(), lv.hn.binders.len());
        if depth == sigma.len() {
            let i = lv.witness(fuel).ok_or_else(|| SepError::NotASeparator(pos.to_vec()))?;
            shapes.push(Shape::Base { n: nm, m: lv.hm.args.len(), p: nn - nm, i });
            break;
        }
        let j = sigma[depth];
        if j >= lv.common_args() {
            return Err(SepError::BadIndex(sigma[..=depth].to_vec()));
        }
        let (n_small, m_small) =
            if nm <= nn { (nm, lv.hm.args.len()) } else { (nn, lv.hn.args.len()) };
        shapes.push(Shape::Step { n: n_small, m: m_small, p: nm.abs_diff(nn), child: j });
        (sm, sn) = lv.child(j);
    }
    let k = shapes.iter().map(Shape::min_k).max().unwrap_or(1).max(1);
    let tupler = zoo::tupler(k);
    let mut fv: Vec<Name> = m.free_vars().into_iter().chain(n.free_vars()).collect();
    fv.sort();
    fv.dedup();
    let mut args: Vec<Term> = fv.iter().map(|_| tupler.clone()).collect();
    for s in &shapes {
        args.extend(s.args(k, &tupler));
    }
    Ok(BohmOut { context: HeadContext { binders: fv, args }, k })
}

// ------------------------------------------------------------ pipeline

/// Looks for a separating context for `m` (normalizing) and `n` (not
/// normalizing, H*-equal to `m` as far as `depth` shows).
pub fn separate(m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Result<SeparationCertificate, SepError> {
    if beta_nf(m, fuel).value().is_none() {
        return Err(SepError::Hypotheses("first term has no normal form within fuel".into()));
    }
    let conf = match beta_nf(n, fuel) {
        Outcome::Value(_) => return Err(SepError::Hypotheses("second term has a normal form".into())),
        Outcome::Diverged => Confidence::Diverged,
        Outcome::Exhausted => Confidence::Exhausted,
    };
    if hstar_eq(m, n, depth, fuel) == Tri::No {
        return Err(SepError::Hypotheses("terms differ in H*".into()));
    }
    for sigma in find_morris_separators(m, n, depth, fuel) {
        let Ok(b) = bohm_out(m, n, &sigma, fuel) else { continue };
        if let Some(cert) = certify(b, sigma, conf, m, n, depth, fuel) {
            return Ok(cert);
        }
    }
    Err(SepError::NoSeparator(depth))
}

/// As [`separate`] at a given separator.
pub fn separate_at(
    m: &Term,
    n: &Term,
    sigma: &[usize],
    depth: usize,
    fuel: Fuel,
) -> Result<SeparationCertificate, SepError> {
    let conf = match beta_nf(n, fuel) {
        Outcome::Value(_) => return Err(SepError::Hypotheses("second term has a normal form".into())),
        Outcome::Diverged => Confidence::Diverged,
        Outcome::Exhausted => Confidence::Exhausted,
    };
    let b = bohm_out(m, n, sigma, fuel)?;
    certify(b, sigma.to_vec(), conf, m, n, depth, fuel).ok_or_else(|| SepError::NotASeparator(sigma.to_vec()))
}

fn certify(
    b: BohmOut,
    separator: Position,
    n_confidence: Confidence,
    m: &Term,
    n: &Term,
    depth: usize,
    fuel: Fuel,
) -> Option<SeparationCertificate> {
    let (out, steps) = beta_nf_counted(&b.context.instantiate(m), fuel);
    if out.value()? != zoo::i() {
        return None;
    }
    let depth = depth.max(PROBE_DEPTH);
    let sketch = bt(&b.context.instantiate(n), depth, fuel).render_line();
    let cert = SeparationCertificate { context: b.context, separator, k: b.k, m_steps: steps, n_confidence, depth, sketch };
    (verify_separation(&cert, m, n, depth, fuel) == Tri::Yes).then_some(cert)
}

/// Re-checks a certificate: `C[m] ↠β I`, and `bt(C[n])` to `depth` is an
/// η-expansion of the identity without ⊥ that reaches the frontier.
pub fn verify_separation(cert: &SeparationCertificate, m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Tri {
    let side_a = match beta_nf(&cert.context.instantiate(m), fuel) {
        Outcome::Value(v) => Tri::from_bool(v == t("\\x.x")),
        _ => Tri::Unknown,
    };
    if side_a == Tri::No {
        return Tri::No;
    }
    let u = bt(&cert.context.instantiate(n), depth, fuel);
    let side_b = if u.has_bottom() {
        Tri::No
    } else if eta_shaped_id(&u) {
        if u.reaches_cut() {
            Tri::Yes
        } else if u.has_unresolved() {
            Tri::Unknown
        } else {
            Tri::No
        }
    } else if u.has_unresolved() {
        Tri::Unknown
    } else {
        Tri::No
    };
    side_a.and(side_b)
}

/// A pair with two separators: the root, where the second term has an
/// extra argument expanding along the complete binary tree, and `⟨1,0⟩`,
/// where it has `J z` in place of `z`.
pub fn example_pair() -> (Term, Term) {
    let m = t("\\x.x (\\z0.y x z0) (\\z0 z1.x z0 z1)");
    let j2 = zoo::build("Y (\\j x a b.x (j a) (j b))", &[("Y", zoo::y())]);
    let n = zoo::build("\\x w.x (y x) (\\z0.x (J z0)) (J2 w)", &[("J", zoo::j()), ("J2", j2)]);
    (m, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fuel() -> Fuel {
        Fuel::default()
    }

    fn u(n: usize, k: usize) -> Term {
        zoo::u(n, k).unwrap()
    }

    #[test]
    fn example_pair_has_both_separators() {
        let (m, n) = example_pair();
        assert_eq!(find_morris_separator(&m, &n, 3, fuel()), Some(vec![]));
        let all = find_morris_separators(&m, &n, 3, fuel());
        assert_eq!(all, vec![vec![], vec![1, 0]]);
        assert_eq!(find_morris_separators(&m, &n, 2, fuel()), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn no_separator_between_equal_terms() {
        assert_eq!(find_morris_separator(&zoo::i(), &zoo::i(), 4, fuel()), None);
        assert_eq!(find_morris_separator(&zoo::i(), &zoo::one(), 4, fuel()), None);
    }

    #[test]
    fn root_context_projects_the_extra_argument() {
        let (m, n) = example_pair();
        let b = bohm_out(&m, &n, &[], fuel()).unwrap();
        assert_eq!(b.k, 4);
        let p = zoo::tupler(4);
        let want = vec![p.clone(), p, zoo::i(), omega(), u(4, 3)];
        assert_eq!(b.context.binders, vec![Name::new("y")]);
        assert_eq!(b.context.args, want);
    }

    #[test]
    fn deep_context_matches_the_construction() {
        let (m, n) = example_pair();
        let b = bohm_out(&m, &n, &[1, 0], fuel()).unwrap();
        assert_eq!(b.k, 5);
        let p = zoo::tupler(5);
        let o = omega;
        let want = vec![
            p.clone(),
            // root: P^2 Ω^2 U_2
            p.clone(),
            p.clone(),
            o(),
            o(),
            u(5, 2),
            // ⟨1⟩: P^2 Ω^3 U_1
            p.clone(),
            p,
            o(),
            o(),
            o(),
            u(5, 1),
            // ⟨1,0⟩: I Ω^4 U_1
            zoo::i(),
            o(),
            o(),
            o(),
            o(),
            u(5, 1),
        ];
        assert_eq!(b.context.args, want);
        let cm = beta_nf(&b.context.instantiate(&m), fuel()).value().unwrap();
        assert_eq!(cm, zoo::i());
        let un = bt(&b.context.instantiate(&n), 5, fuel());
        assert!(eta_shaped_id(&un) && un.reaches_cut() && !un.has_bottom());
    }

    #[test]
    fn hand_written_context_extracts_the_deep_subterm() {
        // []P₃ Ω U³₂ U¹₁ Ω Ω U³₁ with y left free, built by hand with a
        // smaller tupler than the general construction picks.
        let (m, n) = example_pair();
        let ctx = HeadContext::applicative(vec![
            zoo::tupler(3),
            omega(),
            u(3, 2),
            u(1, 1),
            omega(),
            omega(),
            u(3, 1),
        ]);
        let v = bt(&ctx.instantiate(&n), 4, fuel());
        assert!(!v.has_bottom() && eta_shaped_id(&v) && v.reaches_cut());
        assert_eq!(beta_nf(&ctx.instantiate(&m), fuel()).value(), Some(zoo::i()));
    }

    #[test]
    fn base_case_on_a_one_level_pair() {
        let m = t("\\x.y");
        let n = zoo::build("\\x z.y (J z)", &[("J", zoo::j())]);
        let b = bohm_out(&m, &n, &[], fuel()).unwrap();
        assert_eq!(b.k, 2);
        assert_eq!(b.context.args, vec![zoo::tupler(2), zoo::tupler(2), zoo::i(), omega(), u(2, 1)]);
        assert_eq!(beta_nf(&b.context.instantiate(&m), fuel()).value(), Some(zoo::i()));
    }

    #[test]
    fn bohm_out_rejects_non_separators() {
        let (m, n) = example_pair();
        assert!(matches!(bohm_out(&m, &n, &[1], fuel()), Err(SepError::NotASeparator(_))));
        assert!(matches!(bohm_out(&m, &n, &[5], fuel()), Err(SepError::BadIndex(_))));
        assert!(matches!(bohm_out(&zoo::k(), &zoo::f(), &[], fuel()), Err(SepError::NotSimilar(_))));
    }

    #[test]
    fn separate_and_verify() {
        let (m, n) = example_pair();
        let cert = separate(&m, &n, 4, fuel()).unwrap();
        assert_eq!(cert.separator, Vec::<usize>::new());
        assert_eq!(verify_separation(&cert, &m, &n, cert.depth, fuel()), Tri::Yes);
        let padded = cert.padded(1);
        assert_eq!(verify_separation(&padded, &m, &n, cert.depth, fuel()), Tri::Yes);
        let deep = separate_at(&m, &n, &[1, 0], 5, fuel()).unwrap();
        assert_eq!(verify_separation(&deep, &m, &n, 5, fuel()), Tri::Yes);
    }

    #[test]
    fn certificates_round_trip_through_json() {
        let (m, n) = example_pair();
        let cert = separate(&m, &n, 4, fuel()).unwrap();
        let back = SeparationCertificate::from_json(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
        assert_eq!(verify_separation(&back, &m, &n, cert.depth, fuel()), Tri::Yes);
    }

    #[test]
    fn tampered_certificates_fail() {
        let (m, n) = example_pair();
        let cert = separate(&m, &n, 4, fuel()).unwrap();
        let args = &cert.context.args;
        let om = args.iter().position(|a| *a == omega()).unwrap();
        let id = args.iter().position(|a| *a == zoo::i()).unwrap();
        let mut bad = cert.clone();
        bad.context.args.swap(om, id);
        assert_ne!(verify_separation(&bad, &m, &n, cert.depth, fuel()), Tri::Yes);
        // Ω only fills discarded tuple slots, so overwriting it is harmless.
        let mut filler = cert.clone();
        filler.context.args[om] = zoo::i();
        assert_eq!(verify_separation(&filler, &m, &n, cert.depth, fuel()), Tri::Yes);
        let mut bad = cert.clone();
        bad.context.args.pop();
        assert_ne!(verify_separation(&bad, &m, &n, cert.depth, fuel()), Tri::Yes);
    }

    #[test]
    fn trivial_context_and_filtered_pairs() {
        let triv = SeparationCertificate {
            context: HeadContext::applicative(vec![]),
            separator: vec![],
            k: 1,
            m_steps: 0,
            n_confidence: Confidence::Exhausted,
            depth: 4,
            sketch: String::new(),
        };
        assert_eq!(verify_separation(&triv, &zoo::i(), &zoo::i(), 4, fuel()), Tri::No);
        assert!(separate(&zoo::i(), &zoo::i(), 4, fuel()).is_err());
        assert!(separate(&zoo::i(), &zoo::k(), 4, fuel()).is_err());
        assert!(separate(&zoo::i(), &zoo::j(), 4, fuel()).is_ok());
    }
}
