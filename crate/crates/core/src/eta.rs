//! Finite η-expansions of the identity, their enumeration, infinite
//! expansions built from trees, and the η-relations on Böhm trees.

use std::cell::Cell;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::bt::{bt, bt_eq, bt_scoped, freshen, ApproxBT, NakedTree};
use crate::godel::{decode_term, TermCode};
use crate::reduce::{beta_eta_reduces_to, beta_nf, hnf_parts, Fuel, Outcome, Tri};
use crate::term::{deep, Name, Term, TermKind};
use crate::zoo;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EtaError {
    #[error("not a finite η-expansion of the identity")]
    NotEtaExpansion,
    #[error("tree has too many nodes to index")]
    TooLarge,
}

// ------------------------------------------------------------ finite trees

/// A finite ordered tree, standing for the branching shape of an
/// η-expansion of the identity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn leaf() -> Tree {
        Tree { children: Vec::new() }
    }

    pub fn node(children: Vec<Tree>) -> Tree {
        Tree { children }
    }

    /// A unary path with `n` edges.
    pub fn path(n: usize) -> Tree {
        (0..n).fold(Tree::leaf(), |t, _| Tree::node(vec![t]))
    }

    /// Every node has `k` children, down to `height` edges.
    pub fn complete(k: usize, height: usize) -> Tree {
        if height == 0 {
            return Tree::leaf();
        }
        let c = Tree::complete(k, height - 1);
        Tree::node(vec![c; k])
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Tree::node_count).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        self.children.iter().map(|c| c.height() + 1).max().unwrap_or(0)
    }

    /// Child counts in breadth-first order.
    pub fn bfs_code(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut queue = std::collections::VecDeque::from([self]);
        while let Some(t) = queue.pop_front() {
            out.push(t.children.len());
            queue.extend(t.children.iter());
        }
        out
    }

    /// Inverse of [`Tree::bfs_code`].
    pub fn from_bfs(code: &[usize]) -> Option<Tree> {
        // First pass: parent links in BFS order.
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); code.len()];
        let mut next = 1usize;
        for (i, &c) in code.iter().enumerate() {
            if i >= next {
                return None;
            }
            for _ in 0..c {
                if next >= code.len() {
                    return None;
                }
                kids[i].push(next);
                next += 1;
            }
        }
        if next != code.len() || code.is_empty() {
            return None;
        }
        let mut built: Vec<Option<Tree>> = vec![None; code.len()];
        for i in (0..code.len()).rev() {
            let ch = kids[i].iter().map(|&j| built[j].take().expect("child built")).collect();
            built[i] = Some(Tree::node(ch));
        }
        built[0].take()
    }

    /// `|leaf| = 0`, otherwise the maximum of the arity and each child's size plus one.
    pub fn size(&self) -> usize {
        let below = self.children.iter().map(|c| c.size() + 1).max().unwrap_or(0);
        below.max(self.children.len())
    }

    pub fn to_naked(&self) -> NakedTree {
        fn go(t: &Tree, pos: &mut Vec<usize>, out: &mut BTreeMap<Vec<usize>, usize>) {
            out.insert(pos.clone(), t.children.len());
            for (i, c) in t.children.iter().enumerate() {
                pos.push(i);
                go(c, pos, out);
                pos.pop();
            }
        }
        let mut counts = BTreeMap::new();
        go(self, &mut Vec::new(), &mut counts);
        NakedTree::from_counts(counts)
    }

    /// The finite tree described by a table without frontier.
    pub fn from_naked(t: &NakedTree) -> Option<Tree> {
        if let NakedTree::Table { frontier, .. } = t {
            if !frontier.is_empty() {
                return None;
            }
        } else {
            return None;
        }
        fn go(t: &NakedTree, pos: &mut Vec<usize>) -> Option<Tree> {
            let k = t.count(pos)?;
            let mut ch = Vec::with_capacity(k);
            for i in 0..k {
                pos.push(i);
                ch.push(go(t, pos)?);
                pos.pop();
            }
            Some(Tree::node(ch))
        }
        go(t, &mut Vec::new())
    }

    /// Every tree with at most `max_nodes` nodes, in enumeration order.
    pub fn all_up_to(max_nodes: usize) -> Vec<Tree> {
        let mut out = Vec::new();
        let mut i = 0u128;
        loop {
            let t = eta_tree(i).expect("small index");
            if t.node_count() > max_nodes {
                return out;
            }
            out.push(t);
            i += 1;
        }
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return f.write_str("·");
        }
        f.write_str("(")?;
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c:?}")?;
        }
        f.write_str(")")
    }
}

// ------------------------------------------------------------- enumeration

/// Trees are indexed up to this many nodes; beyond it the counts leave `u128`.
pub const MAX_INDEXED_NODES: usize = 64;

/// `count[d][u]`: ways to finish a breadth-first code with `d` nodes still
/// waiting for a child count and `u` nodes left to place.
fn counts() -> &'static Vec<Vec<u128>> {
    static TABLE: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = MAX_INDEXED_NODES + 1;
        let mut c = vec![vec![0u128; n]; n + 1];
        c[0][0] = 1;
        for u in 0..n {
            // Only states with d + u ≤ n are reachable.
            for d in 1..=n - u {
                let mut s = 0u128;
                for k in 0..=u {
                    s = s.checked_add(c[d - 1 + k][u - k]).expect("count fits");
                }
                c[d][u] = s;
            }
        }
        c
    })
}

fn trees_with(nodes: usize) -> u128 {
    counts()[1][nodes - 1]
}

/// Position of `t` in the enumeration: by node count, then breadth-first
/// code in lexicographic order.
pub fn eta_index(t: &Tree) -> Result<u128, EtaError> {
    let code = t.bfs_code();
    let n = code.len();
    if n > MAX_INDEXED_NODES {
        return Err(EtaError::TooLarge);
    }
    let c = counts();
    let mut idx: u128 = (1..n).map(trees_with).sum();
    let (mut d, mut u) = (1usize, n - 1);
    for &k in &code {
        for smaller in 0..k {
            idx += c[d - 1 + smaller][u - smaller];
        }
        d = d - 1 + k;
        u -= k;
    }
    Ok(idx)
}

/// The tree at position `i`, when it has at most [`MAX_INDEXED_NODES`] nodes.
pub fn eta_tree(mut i: u128) -> Option<Tree> {
    let c = counts();
    let mut n = 1;
    while i >= trees_with(n) {
        i -= trees_with(n);
        n += 1;
        if n > MAX_INDEXED_NODES {
            return None;
        }
    }
    let mut code = Vec::with_capacity(n);
    let (mut d, mut u) = (1usize, n - 1);
    while d > 0 {
        let mut k = 0;
        loop {
            let here = c[d - 1 + k][u - k];
            if i < here {
                break;
            }
            i -= here;
            k += 1;
        }
        code.push(k);
        d = d - 1 + k;
        u -= k;
    }
    Tree::from_bfs(&code)
}

/// The `i`-th η-expansion of the identity.
pub fn enumerate_eta(i: u128) -> Term {
    tree_to_eta(&eta_tree(i).expect("index within the enumerable range"))
}

/// `λy.exp(T, y)` where `exp(T, v) = λz⃗. v exp(T₁,z₁)…exp(T_m,z_m)`.
pub fn tree_to_eta(t: &Tree) -> Term {
    fn exp(t: &Tree, v: Name, next: &mut usize) -> Term {
        deep(|| {
            let zs: Vec<Name> = t
                .children
                .iter()
                .map(|_| {
                    *next += 1;
                    Name::new(&format!("z{}", *next))
                })
                .collect();
            let args: Vec<Term> = t.children.iter().zip(&zs).map(|(c, z)| exp(c, z.clone(), next)).collect();
            Term::lams(zs, Term::apps(Term::var(v), args))
        })
    }
    let y = Name::new("y");
    Term::abs(y.clone(), exp(t, y, &mut 0))
}

/// Reads the tree off a β-normal `λy.λz⃗.y Q⃗` whose arguments are, recursively,
/// expansions of the matching `zᵢ`.
pub fn eta_to_tree(q: &Term) -> Result<Tree, EtaError> {
    fn shape(t: &Term, v: &Name) -> Result<Tree, EtaError> {
        deep(|| {
            let (zs, body) = t.strip_lams();
            let distinct: HashSet<&Name> = zs.iter().collect();
            if distinct.len() != zs.len() || distinct.contains(v) {
                return Err(EtaError::NotEtaExpansion);
            }
            let (head, args) = body.spine();
            if head.as_var() != Some(v) || args.len() != zs.len() {
                return Err(EtaError::NotEtaExpansion);
            }
            let children = args.iter().zip(&zs).map(|(a, z)| shape(a, z)).collect::<Result<_, _>>()?;
            Ok(Tree::node(children))
        })
    }
    match q.kind() {
        TermKind::Abs(y, rest) => shape(rest, y),
        _ => Err(EtaError::NotEtaExpansion),
    }
}

/// Size of a finite η-expansion given in β-normal form.
pub fn eta_size(q: &Term) -> Result<usize, EtaError> {
    eta_to_tree(q).map(|t| t.size())
}

/// Does `q` βη-reduce to the identity?
pub fn is_finite_eta_id(q: &Term, fuel: Fuel) -> Tri {
    beta_eta_reduces_to(q, &zoo::i(), fuel)
}

/// Is `q` β-equal to a member of ETA of size below `p`?
pub fn in_eta_below(q: &Term, p: usize, fuel: Fuel) -> Tri {
    match beta_nf(q, fuel) {
        Outcome::Value(nf) => match eta_to_tree(&nf) {
            Ok(t) => Tri::from_bool(t.size() < p),
            Err(_) => Tri::No,
        },
        Outcome::Diverged => Tri::No,
        Outcome::Exhausted => {
            if looks_like_infinite_eta_id(q, fuel) {
                Tri::No
            } else {
                Tri::Unknown
            }
        }
    }
}

/// Index of the η-expansion that the term coded by `c` is β-equal to.
pub fn iota(c: &TermCode, fuel: Fuel) -> Option<u128> {
    let m = decode_term(c).ok()?;
    let nf = beta_nf(&m, fuel).value()?;
    eta_index(&eta_to_tree(&nf).ok()?).ok()
}

/// Every tree of size below `p`. The set is finite: size bounds both arity
/// and height.
pub fn trees_below(p: usize) -> Vec<Tree> {
    fn at_most(s: usize) -> Vec<Tree> {
        let mut out = vec![Tree::leaf()];
        if s == 0 {
            return out;
        }
        let smaller = at_most(s - 1);
        let mut rows: Vec<Vec<Tree>> = vec![vec![]];
        for _ in 0..s {
            let mut next = Vec::new();
            for r in &rows {
                for c in &smaller {
                    let mut r2 = r.clone();
                    r2.push(c.clone());
                    next.push(r2);
                }
            }
            out.extend(next.iter().cloned().map(Tree::node));
            rows = next;
        }
        out
    }
    if p == 0 {
        Vec::new()
    } else {
        at_most(p - 1)
    }
}

/// Largest index of a member of ETA with size below `p`.
pub fn eta_bound_index(p: usize) -> Option<u128> {
    trees_below(p).iter().filter_map(|t| eta_index(t).ok()).max()
}

// --------------------------------------------------- infinite expansions

/// Approximant of the expansion of the identity whose branching follows `t`.
pub fn jt(t: &NakedTree, depth: usize) -> ApproxBT {
    fn go(t: &NakedTree, pos: &mut Vec<usize>, head: Name, extra: Option<Name>, depth: usize, next: &mut usize) -> ApproxBT {
        if depth == 0 || t.is_frontier(pos) {
            return ApproxBT::Cut(None);
        }
        let Some(k) = t.count(pos) else {
            return ApproxBT::Cut(None);
        };
        let zs: Vec<Name> = (0..k)
            .map(|_| {
                let n = Name::new(&if *next == 0 { "z".to_string() } else { format!("z{next}") });
                *next += 1;
                n
            })
            .collect();
        let mut children = Vec::with_capacity(k);
        for (i, z) in zs.iter().enumerate() {
            pos.push(i);
            children.push(go(t, pos, z.clone(), None, depth - 1, next));
            pos.pop();
        }
        let binders = extra.into_iter().chain(zs).collect();
        ApproxBT::Node { binders, head, children }
    }
    let x = Name::new("x");
    go(t, &mut Vec::new(), x.clone(), Some(x), depth, &mut 0)
}

/// Does the approximant look like an η-expansion of `v` down to its frontier?
pub fn eta_shaped(u: &ApproxBT, v: &Name) -> bool {
    match u {
        ApproxBT::Cut(_) => true,
        ApproxBT::Node { binders, head, children } => {
            binders.len() == children.len()
                && head == v
                && !binders.contains(v)
                && children.iter().zip(binders).all(|(c, z)| eta_shaped(c, z))
        }
        _ => false,
    }
}

/// Like [`eta_shaped`] for a closed expansion `λx z⃗.x …`.
pub fn eta_shaped_id(u: &ApproxBT) -> bool {
    match u {
        ApproxBT::Cut(_) => true,
        ApproxBT::Node { binders, head, children } => match binders.split_first() {
            Some((x, zs)) => {
                zs.len() == children.len()
                    && head == x
                    && !zs.contains(x)
                    && children.iter().zip(zs).all(|(c, z)| eta_shaped(c, z))
            }
            None => false,
        },
        _ => false,
    }
}

/// Depth used when probing whether a non-normalizing term is an infinite
/// η-expansion.
pub const PROBE_DEPTH: usize = 5;

/// Evidence that `q` is an infinite η-expansion of the variable `v`: its
/// approximant is η-shaped, free of ⊥, reaches the frontier, and `q` was
/// not seen to normalize. Sound only up to [`PROBE_DEPTH`].
pub fn looks_like_infinite_eta(q: &Term, v: &Name, fuel: Fuel) -> bool {
    let mut scope: HashSet<Name> = q.free_vars().into_iter().collect();
    scope.insert(v.clone());
    let u = bt_scoped(q, PROBE_DEPTH, fuel, &scope);
    eta_shaped(&u, v) && u.reaches_cut() && beta_eta_reduces_to(q, &Term::var(v.clone()), fuel) != Tri::Yes
}

/// As [`looks_like_infinite_eta`] for a term standing for an expansion of the identity.
pub fn looks_like_infinite_eta_id(q: &Term, fuel: Fuel) -> bool {
    let u = bt(q, PROBE_DEPTH, fuel);
    eta_shaped_id(&u) && u.reaches_cut() && is_finite_eta_id(q, fuel) != Tri::Yes
}

// ------------------------------------------------- object-level stream

/// A closed stream `[η₀,[η₁,…]]` written as a λ-term. It walks the
/// breadth-first codes in enumeration order with Scott numerals and lists,
/// and assembles each expansion from its code.
pub fn eta_stream_term() -> Term {
    static CACHE: OnceLock<Term> = OnceLock::new();
    CACHE.get_or_init(build_eta_stream).clone()
}

fn build_eta_stream() -> Term {
    let y = zoo::y();
    let b = |src: &str, defs: &[(&str, Term)]| zoo::build(src, defs);
    let zero = b("\\z s.z", &[]);
    let suc = b("\\n z s.s n", &[]);
    let pred = b("\\n.n ZERO (\\p.p)", &[("ZERO", zero.clone())]);
    let isz = b("\\n a c.n a (\\p.c)", &[]);
    let add = b("Y (\\add m n.m n (\\p.SUC (add p n)))", &[("Y", y.clone()), ("SUC", suc.clone())]);
    let sub = b("Y (\\sub m n.n m (\\q.sub (PRED m) q))", &[("Y", y.clone()), ("PRED", pred.clone())]);
    let nil = b("\\n c.n", &[]);
    let cons = b("\\a l n c.c a l", &[]);
    let append = b("Y (\\app l m.l m (\\a r.CONS a (app r m)))", &[("Y", y.clone()), ("CONS", cons.clone())]);
    // take c elements from p, reversing them onto acc, then k acc rest
    let take = b(
        "Y (\\take c p acc k.c (k acc p) (\\c2.p ZERO (\\a r.take c2 r (CONS a acc) k)))",
        &[("Y", y.clone()), ("ZERO", zero.clone()), ("CONS", cons.clone())],
    );
    // Build [a₁…a_m] = λy z⃗.y (a₁ z₁)…(a_m z_m)
    let build_node = b(
        "\\as.\\y.Y (\\bb as acc.as acc (\\a rest.\\z.bb rest (acc (a z)))) as y",
        &[("Y", y.clone())],
    );
    // Consumes the reversed breadth-first code, keeping finished subtrees
    // in a queue whose front holds the latest ones.
    let go = b(
        "Y (\\go l p.l (p ZERO (\\a r.a)) (\\c l2.TAKE c p NIL (\\ch rest.go l2 (APPEND rest (CONS (BUILD ch) NIL)))))",
        &[
            ("Y", y.clone()),
            ("ZERO", zero.clone()),
            ("TAKE", take),
            ("NIL", nil.clone()),
            ("APPEND", append),
            ("CONS", cons.clone()),
            ("BUILD", build_node),
        ],
    );
    let to_eta = b("\\rev.GO rev NIL", &[("GO", go), ("NIL", nil.clone())]);
    // gen d u rev k: every completion of the code, then the stream k.
    // A lone waiting node must take at least one child while nodes remain.
    let gen = b(
        "Y (\\gen d u rev k.ISZ d (\\y.y (TOETA rev) k) \
           (Y (\\loop c r.gen (ADD (PRED d) c) (SUB u c) (CONS c rev) (ISZ r k (loop (SUC c) (PRED r)))) \
              (ISZ (PRED d) (ISZ u ZERO (SUC ZERO)) ZERO) \
              (SUB u (ISZ (PRED d) (ISZ u ZERO (SUC ZERO)) ZERO))))",
        &[
            ("Y", y.clone()),
            ("ISZ", isz),
            ("TOETA", to_eta),
            ("ADD", add),
            ("PRED", pred.clone()),
            ("SUB", sub),
            ("CONS", cons),
            ("SUC", suc.clone()),
            ("ZERO", zero.clone()),
        ],
    );
    b(
        "Y (\\all n.GEN (SUC ZERO) (PRED n) NIL (all (SUC n))) (SUC ZERO)",
        &[("Y", y), ("GEN", gen), ("SUC", suc), ("ZERO", zero), ("PRED", pred), ("NIL", nil)],
    )
}

// ------------------------------------------------------------- relations

/// Something to compare: a term unfolded on demand, or an approximant.
#[derive(Clone, Debug)]
pub enum Src {
    Term(Term),
    Tree(ApproxBT),
}

enum View {
    Bottom,
    Unknown,
    Frontier,
    Node { binders: Vec<Name>, head: Name, children: Vec<Src> },
}

fn view(src: &Src, fuel: Fuel) -> View {
    match src {
        Src::Term(t) => match hnf_parts(t, fuel) {
            Outcome::Value(h) => {
                let scope: HashSet<Name> = t.free_vars().into_iter().collect();
                let (binders, head, args) = freshen(&h.binders, &h.head, &h.args, &scope);
                View::Node { binders, head, children: args.into_iter().map(Src::Term).collect() }
            }
            Outcome::Diverged => View::Bottom,
            Outcome::Exhausted => View::Unknown,
        },
        Src::Tree(u) => match u {
            ApproxBT::Bottom => View::Bottom,
            ApproxBT::Unresolved(_) => View::Unknown,
            ApproxBT::Cut(None) => View::Frontier,
            ApproxBT::Cut(Some(t)) => view(&Src::Term(t.clone()), fuel),
            ApproxBT::Node { binders, head, children } => View::Node {
                binders: binders.clone(),
                head: head.clone(),
                children: children.iter().cloned().map(Src::Tree).collect(),
            },
        },
    }
}

/// Binder identities, innermost last.
#[derive(Clone, Default)]
struct Env(Vec<(Name, usize)>);

impl Env {
    fn with(&self, names: &[Name], ids: &[usize]) -> Env {
        let mut e = self.clone();
        e.0.extend(names.iter().cloned().zip(ids.iter().copied()));
        e
    }

    fn id(&self, x: &Name) -> Option<usize> {
        self.0.iter().rev().find(|(n, _)| n == x).map(|(_, i)| *i)
    }
}

fn same(x: &Name, ex: &Env, y: &Name, ey: &Env) -> bool {
    match (ex.id(x), ey.id(y)) {
        (Some(a), Some(b)) => a == b,
        (None, None) => x == y,
        _ => false,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Rel {
    Eta,
    EtaOmega,
    EtaP(usize),
    /// Common upper bound under possibly infinite expansions, both ways.
    Merge,
}

enum SizeInfo {
    Exact(usize),
    AtLeast(usize),
    NotEta,
    Unknown,
}

struct Checker {
    fuel: Fuel,
    rel: Rel,
    next: Cell<usize>,
}

impl Checker {
    fn new(rel: Rel, fuel: Fuel) -> Checker {
        Checker { fuel, rel, next: Cell::new(0) }
    }

    fn ids(&self, n: usize) -> Vec<usize> {
        let s = self.next.get();
        self.next.set(s + n);
        (s..s + n).collect()
    }

    fn le(&self, u: &Src, eu: &Env, v: &Src, ev: &Env, depth: usize) -> Tri {
        deep(|| match (view(u, self.fuel), view(v, self.fuel)) {
            (View::Unknown, _) | (_, View::Unknown) => Tri::Unknown,
            (View::Bottom, View::Bottom) => Tri::Yes,
            (View::Bottom, _) | (_, View::Bottom) => Tri::No,
            _ if depth == 0 => Tri::Yes,
            (View::Frontier, _) | (_, View::Frontier) => Tri::Yes,
            (
                View::Node { binders: bu, head: hu, children: cu },
                View::Node { binders: bv, head: hv, children: cv },
            ) => {
                if self.rel == Rel::Merge && bu.len() > bv.len() {
                    self.node(&bv, &hv, &cv, ev, &bu, &hu, &cu, eu, depth)
                } else {
                    self.node(&bu, &hu, &cu, eu, &bv, &hv, &cv, ev, depth)
                }
            }
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn node(
        &self,
        bu: &[Name],
        hu: &Name,
        cu: &[Src],
        eu: &Env,
        bv: &[Name],
        hv: &Name,
        cv: &[Src],
        ev: &Env,
        depth: usize,
    ) -> Tri {
        let n = bu.len();
        if bv.len() < n {
            return Tri::No;
        }
        let m = bv.len() - n;
        let k = cu.len();
        if cv.len() != k + m {
            return Tri::No;
        }
        if let Rel::EtaP(p) = self.rel {
            if m > p {
                return Tri::No;
            }
        }
        let common = self.ids(n);
        let zids = self.ids(m);
        let eu2 = eu.with(bu, &common);
        let ev2 = ev.with(&bv[..n], &common).with(&bv[n..], &zids);
        if !same(hu, &eu2, hv, &ev2) {
            return Tri::No;
        }
        let mut acc = Tri::Yes;
        for j in 0..k {
            acc = acc.and(self.le(&cu[j], &eu2, &cv[j], &ev2, depth - 1));
            if acc.is_no() {
                return acc;
            }
        }
        for i in 0..m {
            let z = &bv[n + i];
            let q = &cv[k + i];
            let r = match self.rel {
                Rel::Eta => self.reduces_to_var(q, z),
                Rel::EtaP(p) => match self.eta_size(q, z) {
                    SizeInfo::Exact(s) => Tri::from_bool(s < p),
                    SizeInfo::AtLeast(s) => Tri::from_bool(s < p),
                    SizeInfo::NotEta => Tri::No,
                    SizeInfo::Unknown => Tri::Unknown,
                },
                Rel::EtaOmega | Rel::Merge => {
                    let zu = eu2.with(std::slice::from_ref(z), &zids[i..=i]);
                    self.le(&Src::Term(Term::var(z.clone())), &zu, q, &ev2, depth - 1)
                }
            };
            acc = acc.and(r);
            if acc.is_no() {
                return acc;
            }
            for c in &cv[..k] {
                acc = acc.and(!self.occurs(c, z, depth - 1));
                if acc.is_no() {
                    return acc;
                }
            }
        }
        acc
    }

    /// Does `z` occur free in the tree of `src` (within `depth` levels)?
    fn occurs(&self, src: &Src, z: &Name, depth: usize) -> Tri {
        deep(|| match src {
            Src::Term(t) => {
                if !t.has_free(z) {
                    return Tri::No;
                }
                if depth == 0 {
                    return Tri::Unknown;
                }
                match view(src, self.fuel) {
                    View::Bottom => Tri::No,
                    View::Node { binders, head, children } => {
                        if binders.contains(z) {
                            Tri::No
                        } else if &head == z {
                            Tri::Yes
                        } else {
                            children.iter().fold(Tri::No, |a, c| a.or(self.occurs(c, z, depth - 1)))
                        }
                    }
                    _ => Tri::Unknown,
                }
            }
            Src::Tree(u) => match u {
                ApproxBT::Bottom | ApproxBT::Cut(None) => Tri::No,
                ApproxBT::Cut(Some(t)) | ApproxBT::Unresolved(Some(t)) => {
                    if t.has_free(z) {
                        Tri::Unknown
                    } else {
                        Tri::No
                    }
                }
                ApproxBT::Unresolved(None) => Tri::Unknown,
                ApproxBT::Node { binders, head, children } => {
                    if binders.contains(z) {
                        Tri::No
                    } else if head == z {
                        Tri::Yes
                    } else {
                        children.iter().fold(Tri::No, |a, c| a.or(self.occurs(&Src::Tree(c.clone()), z, depth)))
                    }
                }
            },
        })
    }

    fn reduces_to_var(&self, q: &Src, z: &Name) -> Tri {
        match q {
            Src::Term(t) => match beta_eta_reduces_to(t, &Term::var(z.clone()), self.fuel) {
                Tri::Unknown if looks_like_infinite_eta(t, z, self.fuel) => Tri::No,
                r => r,
            },
            Src::Tree(_) => match self.eta_size(q, z) {
                SizeInfo::Exact(_) | SizeInfo::AtLeast(_) => Tri::Yes,
                SizeInfo::NotEta => Tri::No,
                SizeInfo::Unknown => Tri::Unknown,
            },
        }
    }

    /// Size of `λz.q` as a member of ETA, or a lower bound when the tree is cut.
    fn eta_size(&self, q: &Src, z: &Name) -> SizeInfo {
        match q {
            Src::Term(t) => {
                let lam = Term::abs(z.clone(), t.clone());
                match beta_nf(&lam, self.fuel) {
                    Outcome::Value(nf) if nf.is_closed() => match eta_to_tree(&nf) {
                        Ok(tr) => SizeInfo::Exact(tr.size()),
                        Err(_) => SizeInfo::NotEta,
                    },
                    Outcome::Value(_) | Outcome::Diverged => SizeInfo::NotEta,
                    Outcome::Exhausted => {
                        if looks_like_infinite_eta(t, z, self.fuel) {
                            SizeInfo::NotEta
                        } else {
                            SizeInfo::Unknown
                        }
                    }
                }
            }
            Src::Tree(u) => match u {
                ApproxBT::Bottom => SizeInfo::NotEta,
                ApproxBT::Unresolved(_) => SizeInfo::Unknown,
                ApproxBT::Cut(None) => SizeInfo::AtLeast(0),
                ApproxBT::Cut(Some(t)) => self.eta_size(&Src::Term(t.clone()), z),
                ApproxBT::Node { binders, head, children } => {
                    let distinct: HashSet<&Name> = binders.iter().collect();
                    if head != z || binders.contains(z) || binders.len() != children.len() || distinct.len() != binders.len()
                    {
                        return SizeInfo::NotEta;
                    }
                    let mut size = children.len();
                    let mut cut = false;
                    let mut unknown = false;
                    for (c, w) in children.iter().zip(binders) {
                        match self.eta_size(&Src::Tree(c.clone()), w) {
                            SizeInfo::Exact(s) => size = size.max(s + 1),
                            SizeInfo::AtLeast(s) => {
                                size = size.max(s + 1);
                                cut = true;
                            }
                            SizeInfo::NotEta => return SizeInfo::NotEta,
                            SizeInfo::Unknown => unknown = true,
                        }
                    }
                    if unknown {
                        SizeInfo::Unknown
                    } else if cut {
                        SizeInfo::AtLeast(size)
                    } else {
                        SizeInfo::Exact(size)
                    }
                }
            },
        }
    }
}

fn run(rel: Rel, u: &Src, v: &Src, depth: usize, fuel: Fuel) -> Tri {
    Checker::new(rel, fuel).le(u, &Env::default(), v, &Env::default(), depth)
}

/// Is `v` a finitary η-expansion of `u`, to `depth` levels?
pub fn le_eta_src(u: &Src, v: &Src, depth: usize, fuel: Fuel) -> Tri {
    run(Rel::Eta, u, v, depth, fuel)
}

pub fn le_eta_omega_src(u: &Src, v: &Src, depth: usize, fuel: Fuel) -> Tri {
    run(Rel::EtaOmega, u, v, depth, fuel)
}

pub fn le_eta_p_src(u: &Src, v: &Src, p: usize, depth: usize, fuel: Fuel) -> Tri {
    run(Rel::EtaP(p), u, v, depth, fuel)
}

pub fn le_eta(m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Tri {
    le_eta_src(&Src::Term(m.clone()), &Src::Term(n.clone()), depth, fuel)
}

pub fn le_eta_omega(m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Tri {
    le_eta_omega_src(&Src::Term(m.clone()), &Src::Term(n.clone()), depth, fuel)
}

pub fn le_eta_p(m: &Term, n: &Term, p: usize, depth: usize, fuel: Fuel) -> Tri {
    le_eta_p_src(&Src::Term(m.clone()), &Src::Term(n.clone()), p, depth, fuel)
}

/// Do `m` and `n` have a common upper bound under possibly infinite
/// η-expansions, to `depth` levels?
pub fn hstar_eq(m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Tri {
    run(Rel::Merge, &Src::Term(m.clone()), &Src::Term(n.clone()), depth, fuel)
}

/// Head comparison: does `n` look like an η-expansion of `m` at the root?
///
/// Heads are compared by binding position among the shared binders and by
/// name otherwise, so a head bound by one of `n`'s extra binders may match
/// a free variable of `m` with the same name.
pub fn le_h(m: &Term, n: &Term, fuel: Fuel) -> Tri {
    let hm = match hnf_parts(m, fuel) {
        Outcome::Value(h) => h,
        Outcome::Diverged => return Tri::No,
        Outcome::Exhausted => return Tri::Unknown,
    };
    let hn = match hnf_parts(n, fuel) {
        Outcome::Value(h) => h,
        Outcome::Diverged => return Tri::No,
        Outcome::Exhausted => return Tri::Unknown,
    };
    let nb = hm.binders.len();
    if hn.binders.len() < nb {
        return Tri::No;
    }
    let m_extra = hn.binders.len() - nb;
    if hn.args.len() != hm.args.len() + m_extra {
        return Tri::No;
    }
    let slot = |binders: &[Name], limit: usize, x: &Name| -> Result<usize, Name> {
        match binders.iter().rposition(|b| b == x) {
            Some(i) if i < limit => Ok(i),
            _ => Err(x.clone()),
        }
    };
    if slot(&hm.binders, nb, &hm.head) != slot(&hn.binders, nb, &hn.head) {
        return Tri::No;
    }
    let k = hm.args.len();
    let mut acc = Tri::Yes;
    for i in 0..m_extra {
        let z = &hn.binders[nb + i];
        let q = &hn.args[k + i];
        let r = match is_finite_eta_id(&Term::abs(z.clone(), q.clone()), fuel) {
            Tri::Unknown if looks_like_infinite_eta(q, z, fuel) => Tri::No,
            r => r,
        };
        acc = acc.and(r);
        if acc.is_no() {
            break;
        }
    }
    acc
}

pub fn sim_h(m: &Term, n: &Term, fuel: Fuel) -> Tri {
    le_h(m, n, fuel).and(le_h(n, m, fuel))
}

pub fn lt_h(m: &Term, n: &Term, fuel: Fuel) -> Tri {
    le_h(m, n, fuel).and(!le_h(n, m, fuel))
}

// ---------------------------------------------------------------- theories

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theory {
    /// Equal Böhm trees.
    B,
    /// βη-conversion, witnessed with expansions of size below `p`.
    BetaEta(usize),
    /// Countably many finite η-expansions.
    Hplus,
    /// Countably many possibly infinite η-expansions.
    Hstar,
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theory::B => f.write_str("B"),
            Theory::BetaEta(p) => write!(f, "Beta:{p}"),
            Theory::Hplus => f.write_str("H+"),
            Theory::Hstar => f.write_str("H*"),
        }
    }
}

impl FromStr for Theory {
    type Err = String;
    fn from_str(s: &str) -> Result<Theory, String> {
        match s {
            "B" => Ok(Theory::B),
            "H+" | "Hplus" => Ok(Theory::Hplus),
            "H*" | "Hstar" => Ok(Theory::Hstar),
            _ => {
                let p = s
                    .strip_prefix("Beta:")
                    .or_else(|| s.strip_prefix("BetaEta:"))
                    .ok_or_else(|| format!("unknown theory {s:?}"))?;
                p.parse().map(Theory::BetaEta).map_err(|_| format!("bad bound in {s:?}"))
            }
        }
    }
}

/// Closes both terms over the union of their free variables.
pub fn close_pair(m: &Term, n: &Term) -> (Term, Term) {
    let mut fv = m.free_vars();
    fv.extend(n.free_vars());
    (Term::lams(fv.iter().cloned(), m.clone()), Term::lams(fv, n.clone()))
}

/// Equality in `theory`, checked to `depth` levels.
pub fn theory_eq(m: &Term, n: &Term, theory: Theory, depth: usize, fuel: Fuel) -> Tri {
    match theory {
        Theory::B => bt_eq(m, n, depth, fuel),
        Theory::Hstar => hstar_eq(m, n, depth, fuel),
        Theory::Hplus | Theory::BetaEta(_) => {
            let (cm, cn) = close_pair(m, n);
            let p = match crate::transform::etamax_terms(&cm, &cn, &crate::transform::StreamSpec::eta(), depth, fuel)
            {
                Ok(p) => Src::Tree(p),
                Err(_) => return Tri::Unknown,
            };
            let (sm, sn) = (Src::Term(cm), Src::Term(cn));
            match theory {
                Theory::BetaEta(b) => {
                    let l = le_eta_p_src(&sm, &p, b, depth, fuel);
                    if l.is_no() {
                        return l;
                    }
                    l.and(le_eta_p_src(&sn, &p, b, depth, fuel))
                }
                _ => {
                    let l = le_eta_src(&sm, &p, depth, fuel);
                    if l.is_no() {
                        return l;
                    }
                    l.and(le_eta_src(&sn, &p, depth, fuel))
                }
            }
        }
    }
}
