//! Code-driven tree transformers: rebuilding a Böhm tree from the code of
//! a term, wrapping every node with a stream element, and computing the
//! η-join of two terms.
//!
//! All three work on closed terms. A node's subterms are closed over the
//! node's binders, encoded, decoded again and processed with the names of
//! the binders above them passed in, so every recursive step goes through a
//! real code.

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::bt::{bt_scoped, ApproxBT};
use crate::eta::{enumerate_eta, iota, le_h};
use crate::godel::{decode_term, encode_term, GodelError, TermCode};
use crate::reduce::{beta_nf, hnf_parts, omega, Fuel, Hnf, Outcome, Tri};
use crate::term::{deep, fresh_name, Name, Position, Term};
use crate::zoo;

/// Maps a position to a stream index.
pub type PositionPolicy = Arc<dyn Fn(&[usize]) -> u128 + Send + Sync>;

pub fn constant_policy(q: u128) -> PositionPolicy {
    Arc::new(move |_| q)
}

/// Where wrapper elements come from.
#[derive(Clone)]
pub enum StreamSpec {
    /// A λ-term `S`; element `q` is `π_q S`.
    Object(Term),
    /// Element `q` is computed directly.
    Meta(Arc<dyn Fn(u128) -> Term + Send + Sync>),
    /// Finitely many elements; indices past the end give `Ω`.
    Truncated(Vec<Term>),
    /// Elements `0..=n` of `base`; later indices give `Ω`.
    Restricted { base: Box<StreamSpec>, n: u128 },
}

impl StreamSpec {
    /// `[I, I, …]`
    pub fn id() -> StreamSpec {
        StreamSpec::Meta(Arc::new(|_| zoo::i()))
    }

    /// `[η₀, η₁, …]`
    pub fn eta() -> StreamSpec {
        StreamSpec::Meta(Arc::new(enumerate_eta))
    }

    /// The η-stream as a λ-term.
    pub fn eta_object() -> StreamSpec {
        StreamSpec::Object(crate::eta::eta_stream_term())
    }

    /// `[η₀, …, η_n]` followed by divergence.
    pub fn eta_truncated(n: u128) -> StreamSpec {
        StreamSpec::Truncated((0..=n).map(enumerate_eta).collect())
    }

    pub fn element(&self, q: u128) -> Term {
        match self {
            StreamSpec::Object(s) => Term::app(zoo::proj(q as usize), s.clone()),
            StreamSpec::Meta(f) => f(q),
            StreamSpec::Truncated(items) => usize::try_from(q).ok().and_then(|i| items.get(i)).cloned().unwrap_or_else(omega),
            StreamSpec::Restricted { base, n } => {
                if q <= *n {
                    base.element(q)
                } else {
                    omega()
                }
            }
        }
    }
}

impl fmt::Debug for StreamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamSpec::Object(t) => write!(f, "Object({t:?})"),
            StreamSpec::Meta(_) => f.write_str("Meta(..)"),
            StreamSpec::Truncated(v) => write!(f, "Truncated({} elements)", v.len()),
            StreamSpec::Restricted { base, n } => write!(f, "Restricted({base:?}, {n})"),
        }
    }
}

/// What a transformer run looked at.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    /// Stream indices requested, with the position of the node.
    pub lookups: Vec<(Position, u128)>,
    /// Nodes abandoned because an index could not be computed.
    pub diagnostics: Vec<String>,
}

enum Wrap<'a> {
    None,
    Stream { stream: &'a StreamSpec, policy: PositionPolicy },
    Join { stream: &'a StreamSpec },
}

struct Run<'a> {
    fuel: Fuel,
    wrap: Wrap<'a>,
    trace: RefCell<Trace>,
}

/// Decodes `λb⃗.a` after a trip through its code.
fn reclose(binders: &[Name], body: &Term) -> Result<Term, GodelError> {
    decode_term(&encode_term(&Term::lams(binders.iter().cloned(), body.clone()))?)
}

/// Names for the binders of `h`: the first ones are the names passed in,
/// the rest are fresh. Returns (all names, own names, head name).
fn name_binders(h: &Hnf, applied: &[Name], scope: &HashSet<Name>) -> (Vec<Name>, Vec<Name>, Name) {
    let mut all: Vec<Name> = applied.to_vec();
    let mut own = Vec::new();
    for b in &h.binders[applied.len()..] {
        let n = fresh_name(b, |c| scope.contains(c) || all.contains(c));
        all.push(n.clone());
        own.push(n);
    }
    let head = match h.binders.iter().rposition(|b| b == &h.head) {
        Some(i) => all[i].clone(),
        None => h.head.clone(),
    };
    (all, own, head)
}

impl<'a> Run<'a> {
    fn new(fuel: Fuel, wrap: Wrap<'a>) -> Run<'a> {
        Run { fuel, wrap, trace: RefCell::new(Trace::default()) }
    }

    fn diag(&self, msg: String) -> ApproxBT {
        self.trace.borrow_mut().diagnostics.push(msg);
        ApproxBT::Unresolved(None)
    }

    /// Tree of `c a⃗` for a closed `c` with the stream wrapper (if any).
    fn single(&self, c: &Term, applied: &[Name], sigma: &mut Position, depth: usize, scope: &HashSet<Name>) -> ApproxBT {
        deep(|| {
            let h = match hnf_parts(c, self.fuel) {
                Outcome::Value(h) => h,
                Outcome::Diverged => return ApproxBT::Bottom,
                Outcome::Exhausted => return ApproxBT::Unresolved(None),
            };
            if depth == 0 {
                return ApproxBT::Cut(None);
            }
            if h.binders.len() < applied.len() {
                return self.diag(format!("node at {sigma:?} has fewer binders than expected"));
            }
            let (_, own, head) = name_binders(&h, applied, scope);
            let mut inner_scope = scope.clone();
            inner_scope.extend(own.iter().cloned());
            let mut passed = applied.to_vec();
            passed.extend(own.iter().cloned());
            let closures: Vec<Result<Term, GodelError>> = h.args.iter().map(|a| reclose(&h.binders, a)).collect();
            let child = |i: usize, d: usize, sigma: &mut Position, sc: &HashSet<Name>| -> ApproxBT {
                sigma.push(i);
                let r = match &closures[i] {
                    Ok(ci) => self.single(ci, &passed, sigma, d, sc),
                    Err(e) => self.diag(format!("child {i} at {sigma:?}: {e}")),
                };
                sigma.pop();
                r
            };
            match &self.wrap {
                Wrap::Stream { stream, policy } => {
                    let q = policy(sigma);
                    self.trace.borrow_mut().lookups.push((sigma.clone(), q));
                    let k = h.args.len();
                    let sigma_here = sigma.clone();
                    self.plug(&stream.element(q), own, head, k, depth, &inner_scope, |i, d, sc| {
                        let mut s = sigma_here.clone();
                        child(i, d, &mut s, sc)
                    })
                }
                _ => {
                    let children = (0..h.args.len()).map(|i| child(i, depth - 1, sigma, &inner_scope)).collect();
                    ApproxBT::Node { binders: own, head, children }
                }
            }
        })
    }

    /// Tree of `λown. e (head Υ₁ … Υ_k)`, where `make(i, d, scope)` gives `Υᵢ` at depth `d`.
    #[allow(clippy::too_many_arguments)]
    fn plug(
        &self,
        e: &Term,
        own: Vec<Name>,
        head: Name,
        k: usize,
        depth: usize,
        scope: &HashSet<Name>,
        make: impl Fn(usize, usize, &HashSet<Name>) -> ApproxBT,
    ) -> ApproxBT {
        let hole = fresh_name(&Name::new("h"), |c| scope.contains(c));
        let mut sc = scope.clone();
        sc.insert(hole.clone());
        let t = bt_scoped(&Term::app(e.clone(), Term::var(hole.clone())), depth, self.fuel, &sc);
        fn fill(
            u: ApproxBT,
            level: usize,
            depth: usize,
            hole: &Name,
            head: &Name,
            k: usize,
            sc: &mut HashSet<Name>,
            make: &dyn Fn(usize, usize, &HashSet<Name>) -> ApproxBT,
        ) -> ApproxBT {
            match u {
                ApproxBT::Node { binders, head: h, children } => {
                    let added: Vec<Name> = binders.iter().filter(|b| sc.insert((*b).clone())).cloned().collect();
                    let mut out: Vec<ApproxBT> = Vec::new();
                    let is_hole = &h == hole;
                    if is_hole {
                        out.extend((0..k).map(|i| make(i, depth - level - 1, sc)));
                    }
                    for c in children {
                        out.push(fill(c, level + 1, depth, hole, head, k, sc, make));
                    }
                    for b in added {
                        sc.remove(&b);
                    }
                    ApproxBT::Node { binders, head: if is_hole { head.clone() } else { h }, children: out }
                }
                ApproxBT::Cut(Some(t)) if t.has_free(hole) => ApproxBT::Cut(None),
                ApproxBT::Unresolved(Some(t)) if t.has_free(hole) => ApproxBT::Unresolved(None),
                other => other,
            }
        }
        match fill(t, 0, depth, &hole, &head, k, &mut sc, &make) {
            ApproxBT::Node { binders, head, children } => {
                ApproxBT::Node { binders: own.into_iter().chain(binders).collect(), head, children }
            }
            ApproxBT::Cut(_) => ApproxBT::Cut(None),
            ApproxBT::Unresolved(_) => ApproxBT::Unresolved(None),
            ApproxBT::Bottom => ApproxBT::Bottom,
        }
    }

    /// η-join of the closed terms `cm a⃗` and `cn a⃗`.
    fn join(&self, cm: &Term, cn: &Term, applied: &[Name], sigma: &mut Position, depth: usize, scope: &HashSet<Name>) -> ApproxBT {
        deep(|| {
            let a = le_h(cm, cn, self.fuel);
            if a.is_yes() {
                return self.join_node(cm, cn, applied, sigma, depth, scope);
            }
            let b = le_h(cn, cm, self.fuel);
            if b.is_yes() {
                return self.join_node(cn, cm, applied, sigma, depth, scope);
            }
            if a == Tri::No && b == Tri::No {
                ApproxBT::Bottom
            } else {
                ApproxBT::Unresolved(None)
            }
        })
    }

    /// Emits the node for `m ≤_h n`.
    fn join_node(&self, m: &Term, n: &Term, applied: &[Name], sigma: &mut Position, depth: usize, scope: &HashSet<Name>) -> ApproxBT {
        if depth == 0 {
            return ApproxBT::Cut(None);
        }
        let (Outcome::Value(hm), Outcome::Value(hn)) = (hnf_parts(m, self.fuel), hnf_parts(n, self.fuel)) else {
            return ApproxBT::Unresolved(None);
        };
        let Wrap::Join { stream } = &self.wrap else { unreachable!("join without a stream") };
        let nb = hm.binders.len();
        let k = hm.args.len();
        if hm.binders.len() < applied.len() {
            return self.diag(format!("node at {sigma:?} has fewer binders than expected"));
        }
        // Index of λy z⃗.y Q⃗ among the expansions of the identity.
        let y = fresh_name(&Name::new("y"), |c| hn.binders.contains(c) || hn.args.iter().any(|a| a.has_free(c)));
        let expansion = Term::lams(
            std::iter::once(y.clone()).chain(hn.binders[nb..].iter().cloned()),
            Term::apps(Term::var(y), hn.args[k..].iter().cloned()),
        );
        let q = match beta_nf(&expansion, self.fuel) {
            Outcome::Value(nf) => match encode_term(&nf) {
                Ok(code) => iota(&code, self.fuel),
                Err(_) => None,
            },
            _ => None,
        };
        let Some(q) = q else {
            return self.diag(format!("no expansion index at {sigma:?}"));
        };
        self.trace.borrow_mut().lookups.push((sigma.clone(), q));
        let (_, own, head) = name_binders(&hm, applied, scope);
        let mut inner_scope = scope.clone();
        inner_scope.extend(own.iter().cloned());
        let mut passed = applied.to_vec();
        passed.extend(own.iter().cloned());
        let pairs: Vec<Result<(Term, Term), GodelError>> = (0..k)
            .map(|i| Ok((reclose(&hm.binders, &hm.args[i])?, reclose(&hn.binders[..nb], &hn.args[i])?)))
            .collect();
        let sigma_here = sigma.clone();
        self.plug(&stream.element(q), own, head, k, depth, &inner_scope, |i, d, sc| {
            let mut s = sigma_here.clone();
            s.push(i);
            match &pairs[i] {
                Ok((a, b)) => self.join(a, b, &passed, &mut s, d, sc),
                Err(e) => self.diag(format!("child {i} at {s:?}: {e}")),
            }
        })
    }
}

fn closed(c: &TermCode) -> Result<Term, GodelError> {
    decode_term(c)
}

/// Rebuilds the Böhm tree of the term coded by `c`.
pub fn phi(c: &TermCode, depth: usize, fuel: Fuel) -> Result<ApproxBT, GodelError> {
    let m = closed(c)?;
    let run = Run::new(fuel, Wrap::None);
    Ok(run.single(&m, &[], &mut Vec::new(), depth, &HashSet::new()))
}

/// Rebuilds the tree of the term coded by `c`, wrapping the node at each
/// position `τ` in element `f(σ⋆τ)` of the stream.
pub fn psi(
    f: &PositionPolicy,
    c: &TermCode,
    sigma: &[usize],
    s: &StreamSpec,
    depth: usize,
    fuel: Fuel,
) -> Result<ApproxBT, GodelError> {
    psi_traced(f, c, sigma, s, depth, fuel).map(|(u, _)| u)
}

pub fn psi_traced(
    f: &PositionPolicy,
    c: &TermCode,
    sigma: &[usize],
    s: &StreamSpec,
    depth: usize,
    fuel: Fuel,
) -> Result<(ApproxBT, Trace), GodelError> {
    let m = closed(c)?;
    let run = Run::new(fuel, Wrap::Stream { stream: s, policy: f.clone() });
    let u = run.single(&m, &[], &mut sigma.to_vec(), depth, &HashSet::new());
    Ok((u, run.trace.into_inner()))
}

/// The η-join of the terms coded by `cm` and `cn`, with wrappers taken from `s`.
pub fn etamax(cm: &TermCode, cn: &TermCode, s: &StreamSpec, depth: usize, fuel: Fuel) -> Result<ApproxBT, GodelError> {
    etamax_traced(cm, cn, s, depth, fuel).map(|(u, _)| u)
}

pub fn etamax_traced(
    cm: &TermCode,
    cn: &TermCode,
    s: &StreamSpec,
    depth: usize,
    fuel: Fuel,
) -> Result<(ApproxBT, Trace), GodelError> {
    let (m, n) = (closed(cm)?, closed(cn)?);
    let run = Run::new(fuel, Wrap::Join { stream: s });
    let u = run.join(&m, &n, &[], &mut Vec::new(), depth, &HashSet::new());
    Ok((u, run.trace.into_inner()))
}

/// [`etamax`] on closed terms.
pub fn etamax_terms(m: &Term, n: &Term, s: &StreamSpec, depth: usize, fuel: Fuel) -> Result<ApproxBT, GodelError> {
    etamax(&encode_term(m)?, &encode_term(n)?, s, depth, fuel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::bt;
    use crate::eta::le_eta_src;
    use crate::eta::Src;
    use crate::term::t;
    use crate::zoo::{named_stream, NamedStream};

    fn f() -> Fuel {
        Fuel::default()
    }

    fn code(m: &Term) -> TermCode {
        encode_term(m).unwrap()
    }

    #[test]
    fn phi_rebuilds_trees() {
        assert_eq!(phi(&code(&omega()), 4, f()).unwrap(), ApproxBT::Bottom);
        let one3 = zoo::one_n(3);
        assert_eq!(phi(&code(&one3), 5, f()).unwrap(), bt(&one3, 5, f()));
        let si = named_stream(NamedStream::SI);
        assert_eq!(phi(&code(&si), 4, f()).unwrap(), bt(&si, 4, f()));
        assert!(phi(&TermCode(3u32.into()), 4, f()).is_err());
    }

    #[test]
    fn psi_with_identity_stream_is_invisible() {
        let pol: PositionPolicy = Arc::new(|s: &[usize]| s.len() as u128 * 3 + 1);
        for m in [zoo::one_n(2), zoo::k(), named_stream(NamedStream::S1Star), zoo::j()] {
            let u = psi(&pol, &code(&m), &[], &StreamSpec::id(), 4, f()).unwrap();
            assert_eq!(u, bt(&m, 4, f()), "{m:?}");
        }
    }

    #[test]
    fn psi_with_eta_stream_expands() {
        let pol: PositionPolicy = Arc::new(|s: &[usize]| (s.len() as u128 + s.iter().sum::<usize>() as u128) % 5);
        for m in [zoo::k(), named_stream(NamedStream::SI), zoo::b()] {
            let u = psi(&pol, &code(&m), &[], &StreamSpec::eta(), 4, f()).unwrap();
            assert_eq!(le_eta_src(&Src::Term(m.clone()), &Src::Tree(u), 4, f()), Tri::Yes, "{m:?}");
        }
        let zero = constant_policy(0);
        let m = named_stream(NamedStream::S1);
        assert_eq!(psi(&zero, &code(&m), &[], &StreamSpec::eta(), 4, f()).unwrap(), phi(&code(&m), 4, f()).unwrap());
    }

    #[test]
    fn etamax_picks_either_side() {
        let si = code(&named_stream(NamedStream::SI));
        let s1s = code(&named_stream(NamedStream::S1Star));
        let up = etamax(&si, &s1s, &StreamSpec::eta(), 4, f()).unwrap();
        assert_eq!(up, bt(&named_stream(NamedStream::S1Star), 4, f()));
        let down = etamax(&si, &s1s, &StreamSpec::id(), 4, f()).unwrap();
        assert_eq!(down, bt(&named_stream(NamedStream::SI), 4, f()));
        assert_eq!(etamax(&s1s, &si, &StreamSpec::eta(), 4, f()).unwrap(), up);
    }

    #[test]
    fn etamax_on_unrelated_heads_is_bottom() {
        let u = etamax(&code(&zoo::k()), &code(&zoo::f()), &StreamSpec::eta(), 3, f()).unwrap();
        assert_eq!(u, ApproxBT::Bottom);
    }

    #[test]
    fn object_stream_gives_same_trees() {
        let m = code(&t("\\x.x (\\y.y)"));
        let n = code(&t("\\x z.x (\\y.y) z"));
        let a = etamax(&m, &n, &StreamSpec::eta(), 4, f()).unwrap();
        let b = etamax(&m, &n, &StreamSpec::eta_object(), 4, Fuel::new(200_000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stream_contents_do_not_change_lookups() {
        let si = code(&named_stream(NamedStream::SI));
        let s1 = code(&named_stream(NamedStream::S1));
        let (_, t1) = etamax_traced(&si, &s1, &StreamSpec::eta(), 4, f()).unwrap();
        let (_, t2) = etamax_traced(&si, &s1, &StreamSpec::id(), 4, f()).unwrap();
        assert_eq!(t1.lookups, t2.lookups);
        assert!(!t1.lookups.is_empty());
    }
}
