//! Depth-bounded Böhm-tree approximants.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::reduce::{hnf_parts, Fuel, Outcome, Tri};
use crate::term::{deep, fresh_name, substitute_many, Name, Position, Term};

/// A Böhm tree cut off at a depth budget.
///
/// `Cut` and `Unresolved` keep the term found at that position (when known)
/// so that a consumer can resume unfolding below the frontier.
#[derive(Clone)]
pub enum ApproxBT {
    /// Provably unsolvable.
    Bottom,
    /// Solvable, but the depth budget is spent.
    Cut(Option<Term>),
    /// Fuel ran out before a head normal form appeared.
    Unresolved(Option<Term>),
    Node { binders: Vec<Name>, head: Name, children: Vec<ApproxBT> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BtError {
    #[error("position {0:?} is not in the tree")]
    PositionUndefined(Position),
    #[error("head reduction diverged")]
    Diverged,
    #[error("fuel exhausted")]
    Exhausted,
    #[error("tree contains an unresolved leaf")]
    UnresolvedPresent,
}

/// Computes the approximant showing `depth` levels of nodes.
pub fn bt(m: &Term, depth: usize, fuel: Fuel) -> ApproxBT {
    let scope: HashSet<Name> = m.free_vars().into_iter().collect();
    bt_scoped(m, depth, fuel, &scope)
}

/// As [`bt`], with binders chosen to avoid every name in `scope`. The free
/// variables of `m` must be in `scope`.
pub fn bt_scoped(m: &Term, depth: usize, fuel: Fuel, scope: &HashSet<Name>) -> ApproxBT {
    deep(|| {
        let h = match hnf_parts(m, fuel) {
            Outcome::Value(h) => h,
            Outcome::Diverged => return ApproxBT::Bottom,
            Outcome::Exhausted => return ApproxBT::Unresolved(Some(m.clone())),
        };
        if depth == 0 {
            return ApproxBT::Cut(Some(m.clone()));
        }
        let (binders, head, args) = freshen(&h.binders, &h.head, &h.args, scope);
        let mut inner = scope.clone();
        inner.extend(binders.iter().cloned());
        let children = args.iter().map(|a| bt_scoped(a, depth - 1, fuel, &inner)).collect();
        ApproxBT::Node { binders, head, children }
    })
}

/// Renames the binders of `λb⃗.h a⃗` away from `scope` (and from each other).
pub(crate) fn freshen(
    binders: &[Name],
    head: &Name,
    args: &[Term],
    scope: &HashSet<Name>,
) -> (Vec<Name>, Name, Vec<Term>) {
    let mut chosen: Vec<Name> = Vec::with_capacity(binders.len());
    for b in binders {
        let n = fresh_name(b, |c| scope.contains(c) || chosen.contains(c));
        chosen.push(n);
    }
    // Only the last binder of a repeated name is visible in the body.
    let mut pairs: Vec<(Name, Term)> = Vec::new();
    let mut head2 = head.clone();
    let mut seen: HashSet<&Name> = HashSet::new();
    for (old, new) in binders.iter().zip(&chosen).rev() {
        if !seen.insert(old) {
            continue;
        }
        if old == head && head2 == *head {
            head2 = new.clone();
        }
        if old != new {
            pairs.push((old.clone(), Term::var(new.clone())));
        }
    }
    let args = args.iter().map(|a| substitute_many(a, &pairs)).collect();
    (chosen, head2, args)
}

impl ApproxBT {
    pub fn is_bottom(&self) -> bool {
        matches!(self, ApproxBT::Bottom)
    }

    pub fn is_node(&self) -> bool {
        matches!(self, ApproxBT::Node { .. })
    }

    pub fn children(&self) -> &[ApproxBT] {
        match self {
            ApproxBT::Node { children, .. } => children,
            _ => &[],
        }
    }

    pub fn has_unresolved(&self) -> bool {
        match self {
            ApproxBT::Unresolved(_) => true,
            ApproxBT::Node { children, .. } => children.iter().any(|c| c.has_unresolved()),
            _ => false,
        }
    }

    pub fn has_bottom(&self) -> bool {
        match self {
            ApproxBT::Bottom => true,
            ApproxBT::Node { children, .. } => children.iter().any(|c| c.has_bottom()),
            _ => false,
        }
    }

    pub fn reaches_cut(&self) -> bool {
        match self {
            ApproxBT::Cut(_) => true,
            ApproxBT::Node { children, .. } => children.iter().any(|c| c.reaches_cut()),
            _ => false,
        }
    }

    /// Number of node levels, counting a leaf as zero.
    pub fn levels(&self) -> usize {
        match self {
            ApproxBT::Node { children, .. } => 1 + children.iter().map(|c| c.levels()).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Subtree at a position of resolved nodes.
    pub fn at(&self, pos: &[usize]) -> Option<&ApproxBT> {
        match pos.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children().get(*i)?.at(rest),
        }
    }

    /// Cuts the tree after `depth` node levels. Residual terms are dropped
    /// at new frontier points.
    pub fn truncate(&self, depth: usize) -> ApproxBT {
        match self {
            ApproxBT::Node { binders, head, children } => {
                if depth == 0 {
                    ApproxBT::Cut(None)
                } else {
                    ApproxBT::Node {
                        binders: binders.clone(),
                        head: head.clone(),
                        children: children.iter().map(|c| c.truncate(depth - 1)).collect(),
                    }
                }
            }
            other => other.clone(),
        }
    }

    /// Multi-line rendering, two spaces of indentation per level.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        render_lines(self, 0, &mut out);
        out
    }

    /// Single-line rendering in applicative notation.
    pub fn render_line(&self) -> String {
        let mut out = String::new();
        render_inline(self, &mut out, false);
        out
    }

    pub fn to_json(&self) -> Value {
        match self {
            ApproxBT::Bottom => json!({"leaf": "bottom"}),
            ApproxBT::Cut(_) => json!({"leaf": "cut"}),
            ApproxBT::Unresolved(_) => json!({"leaf": "unresolved"}),
            ApproxBT::Node { binders, head, children } => json!({
                "binders": binders.iter().map(|b| b.as_str()).collect::<Vec<_>>(),
                "head": head.as_str(),
                "children": children.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            }),
        }
    }
}

fn node_label(binders: &[Name], head: &Name) -> String {
    if binders.is_empty() {
        head.to_string()
    } else {
        let bs: Vec<&str> = binders.iter().map(|b| b.as_str()).collect();
        format!("λ{}.{}", bs.join(" "), head)
    }
}

fn leaf_symbol(u: &ApproxBT) -> &'static str {
    match u {
        ApproxBT::Bottom => "⊥",
        ApproxBT::Cut(_) => "…",
        ApproxBT::Unresolved(_) => "?",
        ApproxBT::Node { .. } => "",
    }
}

fn render_lines(u: &ApproxBT, indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
    match u {
        ApproxBT::Node { binders, head, children } => {
            out.push_str(&node_label(binders, head));
            out.push('\n');
            for c in children {
                render_lines(c, indent + 1, out);
            }
        }
        leaf => {
            out.push_str(leaf_symbol(leaf));
            out.push('\n');
        }
    }
}

fn render_inline(u: &ApproxBT, out: &mut String, as_arg: bool) {
    match u {
        ApproxBT::Node { binders, head, children } => {
            let wrap = as_arg && (!binders.is_empty() || !children.is_empty());
            if wrap {
                out.push('(');
            }
            out.push_str(&node_label(binders, head));
            for c in children {
                out.push(' ');
                render_inline(c, out, true);
            }
            if wrap {
                out.push(')');
            }
        }
        leaf => out.push_str(leaf_symbol(leaf)),
    }
}

impl fmt::Display for ApproxBT {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_line())
    }
}

impl fmt::Debug for ApproxBT {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_line())
    }
}

// ------------------------------------------------------------ comparison

/// Binder environment mapping names to de Bruijn levels.
#[derive(Default, Clone)]
pub(crate) struct Levels {
    names: Vec<Name>,
}

impl Levels {
    pub fn push_all(&mut self, bs: &[Name]) {
        self.names.extend(bs.iter().cloned());
    }

    pub fn pop_n(&mut self, n: usize) {
        let len = self.names.len();
        self.names.truncate(len - n);
    }

    /// Level of the innermost binder named `x`, if bound.
    pub fn level(&self, x: &Name) -> Option<usize> {
        self.names.iter().rposition(|y| y == x)
    }
}

/// Variable identity across two scopes: same binding level, or both free
/// with the same name.
pub(crate) fn same_var(x: &Name, ex: &Levels, y: &Name, ey: &Levels) -> bool {
    match (ex.level(x), ey.level(y)) {
        (Some(i), Some(j)) => i == j,
        (None, None) => x == y,
        _ => false,
    }
}

fn eq_in(u: &ApproxBT, v: &ApproxBT, eu: &mut Levels, ev: &mut Levels) -> bool {
    match (u, v) {
        (ApproxBT::Bottom, ApproxBT::Bottom) => true,
        (ApproxBT::Cut(_), ApproxBT::Cut(_)) => true,
        (ApproxBT::Unresolved(_), ApproxBT::Unresolved(_)) => true,
        (
            ApproxBT::Node { binders: b1, head: h1, children: c1 },
            ApproxBT::Node { binders: b2, head: h2, children: c2 },
        ) => {
            if b1.len() != b2.len() || c1.len() != c2.len() {
                return false;
            }
            eu.push_all(b1);
            ev.push_all(b2);
            let r = same_var(h1, eu, h2, ev) && c1.iter().zip(c2).all(|(p, q)| eq_in(p, q, eu, ev));
            eu.pop_n(b1.len());
            ev.pop_n(b2.len());
            r
        }
        _ => false,
    }
}

/// Structural equality up to renaming of binders; residual terms are ignored.
impl PartialEq for ApproxBT {
    fn eq(&self, other: &ApproxBT) -> bool {
        eq_in(self, other, &mut Levels::default(), &mut Levels::default())
    }
}

fn bt_eq_in(u: &ApproxBT, v: &ApproxBT, eu: &mut Levels, ev: &mut Levels) -> Tri {
    use ApproxBT::*;
    match (u, v) {
        (Bottom, Bottom) | (Cut(_), Cut(_)) => Tri::Yes,
        (Unresolved(_), _) | (_, Unresolved(_)) => Tri::Unknown,
        (Bottom, _) | (_, Bottom) => Tri::No,
        (Cut(_), _) | (_, Cut(_)) => Tri::Unknown,
        (Node { binders: b1, head: h1, children: c1 }, Node { binders: b2, head: h2, children: c2 }) => {
            if b1.len() != b2.len() || c1.len() != c2.len() {
                return Tri::No;
            }
            eu.push_all(b1);
            ev.push_all(b2);
            let r = if !same_var(h1, eu, h2, ev) {
                Tri::No
            } else {
                let mut acc = Tri::Yes;
                for (p, q) in c1.iter().zip(c2) {
                    acc = acc.and(bt_eq_in(p, q, eu, ev));
                    if acc == Tri::No {
                        break;
                    }
                }
                acc
            };
            eu.pop_n(b1.len());
            ev.pop_n(b2.len());
            r
        }
    }
}

/// Three-valued comparison of two approximants.
pub fn approx_eq(u: &ApproxBT, v: &ApproxBT) -> Tri {
    bt_eq_in(u, v, &mut Levels::default(), &mut Levels::default())
}

/// Equality in the theory of Böhm trees, checked to `depth` levels.
pub fn bt_eq(m: &Term, n: &Term, depth: usize, fuel: Fuel) -> Tri {
    approx_eq(&bt(m, depth, fuel), &bt(n, depth, fuel))
}

fn bot_le_in(u: &ApproxBT, v: &ApproxBT, eu: &mut Levels, ev: &mut Levels) -> Tri {
    use ApproxBT::*;
    match (u, v) {
        (Bottom, _) => Tri::Yes,
        (Unresolved(_), _) | (_, Unresolved(_)) => Tri::Unknown,
        (_, Bottom) => Tri::No,
        (Cut(_), Cut(_)) => Tri::Yes,
        (Cut(_), _) | (_, Cut(_)) => Tri::Unknown,
        (Node { binders: b1, head: h1, children: c1 }, Node { binders: b2, head: h2, children: c2 }) => {
            if b1.len() != b2.len() || c1.len() != c2.len() {
                return Tri::No;
            }
            eu.push_all(b1);
            ev.push_all(b2);
            let r = if !same_var(h1, eu, h2, ev) {
                Tri::No
            } else {
                Tri::all(c1.iter().zip(c2).map(|(p, q)| bot_le_in(p, q, eu, ev)))
            };
            eu.pop_n(b1.len());
            ev.pop_n(b2.len());
            r
        }
    }
}

/// Is `u` obtained from `v` by replacing some subtrees with ⊥?
pub fn bot_le(u: &ApproxBT, v: &ApproxBT) -> Tri {
    bot_le_in(u, v, &mut Levels::default(), &mut Levels::default())
}

/// The subterm reached by following argument indices through principal
/// head normal forms.
pub fn subterm_at(m: &Term, pos: &[usize], fuel: Fuel) -> Result<Term, BtError> {
    let mut cur = m.clone();
    for (depth, &i) in pos.iter().enumerate() {
        let h = match hnf_parts(&cur, fuel) {
            Outcome::Value(h) => h,
            Outcome::Diverged => return Err(BtError::Diverged),
            Outcome::Exhausted => return Err(BtError::Exhausted),
        };
        match h.args.get(i) {
            Some(a) => cur = a.clone(),
            None => return Err(BtError::PositionUndefined(pos[..=depth].to_vec())),
        }
    }
    Ok(cur)
}

// ----------------------------------------------------------- naked trees

/// Child count at a position, `None` outside the tree.
pub type ChildCounts = Arc<dyn Fn(&[usize]) -> Option<usize> + Send + Sync>;

/// A tree given by the number of children at each position.
#[derive(Clone)]
pub enum NakedTree {
    /// Finite table. `frontier` holds positions known to exist whose
    /// child count lies beyond the observed depth.
    Table { counts: BTreeMap<Position, usize>, frontier: BTreeSet<Position> },
    /// Total generator: child count at a position, `None` outside the domain.
    Generator(ChildCounts),
}

impl NakedTree {
    pub fn empty() -> NakedTree {
        NakedTree::Table { counts: BTreeMap::new(), frontier: BTreeSet::new() }
    }

    /// Finite tree from a table of child counts (no frontier).
    pub fn from_counts(counts: BTreeMap<Position, usize>) -> NakedTree {
        NakedTree::Table { counts, frontier: BTreeSet::new() }
    }

    pub fn generator(f: impl Fn(&[usize]) -> Option<usize> + Send + Sync + 'static) -> NakedTree {
        NakedTree::Generator(Arc::new(f))
    }

    /// The complete `k`-ary infinite tree.
    pub fn complete(k: usize) -> NakedTree {
        NakedTree::generator(move |_| Some(k))
    }

    /// Child count at `pos`, when `pos` is in the known domain.
    pub fn count(&self, pos: &[usize]) -> Option<usize> {
        match self {
            NakedTree::Table { counts, .. } => counts.get(pos).copied(),
            NakedTree::Generator(f) => {
                // Walk from the root so that the domain stays prefix-closed.
                for d in 0..pos.len() {
                    match f(&pos[..d]) {
                        Some(k) if pos[d] < k => {}
                        _ => return None,
                    }
                }
                f(pos)
            }
        }
    }

    pub fn is_frontier(&self, pos: &[usize]) -> bool {
        match self {
            NakedTree::Table { frontier, .. } => frontier.contains(pos),
            NakedTree::Generator(_) => false,
        }
    }

    /// Child-count table down to `depth` levels (positions of length < depth).
    pub fn table_to(&self, depth: usize) -> BTreeMap<Position, usize> {
        let mut out = BTreeMap::new();
        let mut stack: Vec<Position> = vec![vec![]];
        while let Some(p) = stack.pop() {
            if p.len() >= depth {
                continue;
            }
            if let Some(k) = self.count(&p) {
                out.insert(p.clone(), k);
                for i in 0..k {
                    let mut q = p.clone();
                    q.push(i);
                    stack.push(q);
                }
            }
        }
        out
    }

    /// Number of positions, for finite tables.
    pub fn node_count(&self) -> Option<usize> {
        match self {
            NakedTree::Table { counts, frontier } if frontier.is_empty() => Some(counts.len()),
            _ => None,
        }
    }
}

impl fmt::Debug for NakedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NakedTree::Table { counts, frontier } => {
                f.debug_struct("NakedTree").field("counts", counts).field("frontier", frontier).finish()
            }
            NakedTree::Generator(_) => f.write_str("NakedTree(<generator>)"),
        }
    }
}

/// Erases labels, keeping the branching structure.
pub fn naked(u: &ApproxBT) -> Result<NakedTree, BtError> {
    fn go(
        u: &ApproxBT,
        pos: &mut Position,
        counts: &mut BTreeMap<Position, usize>,
        frontier: &mut BTreeSet<Position>,
    ) -> Result<(), BtError> {
        match u {
            ApproxBT::Bottom => Ok(()),
            ApproxBT::Unresolved(_) => Err(BtError::UnresolvedPresent),
            ApproxBT::Cut(_) => {
                frontier.insert(pos.clone());
                Ok(())
            }
            ApproxBT::Node { children, .. } => {
                counts.insert(pos.clone(), children.len());
                for (i, c) in children.iter().enumerate() {
                    pos.push(i);
                    go(c, pos, counts, frontier)?;
                    pos.pop();
                }
                Ok(())
            }
        }
    }
    let mut counts = BTreeMap::new();
    let mut frontier = BTreeSet::new();
    go(u, &mut Vec::new(), &mut counts, &mut frontier)?;
    Ok(NakedTree::Table { counts, frontier })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::omega;
    use crate::term::t;

    fn f() -> Fuel {
        Fuel::default()
    }

    const Y: &str = "\\f.(\\x.f (x x)) (\\x.f (x x))";

    #[test]
    fn omega_is_bottom() {
        for d in 0..4 {
            assert!(bt(&omega(), d, f()).is_bottom());
        }
    }

    #[test]
    fn one_cubed_ladder() {
        let one3 = t("\\x z.x ((\\x z.x ((\\x z.x ((\\u.u) z)) z)) z)");
        let u = bt(&one3, 5, f());
        assert_eq!(u.render_text(), "λx z.x\n  λz1.z\n    λz2.z1\n      z2\n");
        assert_eq!(u, bt(&t("\\a b.a (\\c.b (\\d.c d))"), 5, f()));
    }

    #[test]
    fn y_at_depth_three() {
        let u = bt(&t(Y), 3, f());
        assert_eq!(u.render_line(), "λf.f (f (f …))");
        assert_eq!(u.levels(), 3);
    }

    #[test]
    fn depth_zero_probes() {
        assert!(matches!(bt(&t("\\x.x"), 0, f()), ApproxBT::Cut(Some(_))));
        assert!(bt(&omega(), 0, f()).is_bottom());
        let j = t(&format!("({Y}) (\\j x z.x (j z))"));
        assert!(matches!(bt(&j, 0, Fuel::new(1)), ApproxBT::Unresolved(Some(_))));
    }

    #[test]
    fn binders_avoid_free_variables() {
        // λx.y x with free x elsewhere: binder must not be printed as a clash.
        let m = t("(\\y u.y u) x");
        let u = bt(&m, 3, f());
        match &u {
            ApproxBT::Node { binders, head, .. } => {
                assert_ne!(binders[0].as_str(), "x");
                assert_eq!(head.as_str(), "x");
            }
            _ => panic!(),
        }
        assert_eq!(u.render_text(), "λu.x\n  u\n");
    }

    #[test]
    fn naked_tables() {
        let one1 = t("\\x z.x ((\\u.u) z)");
        let nk = naked(&bt(&one1, 3, f())).unwrap();
        let want: BTreeMap<Position, usize> = [(vec![], 1), (vec![0], 0)].into_iter().collect();
        match &nk {
            NakedTree::Table { counts, frontier } => {
                assert_eq!(counts, &want);
                assert!(frontier.is_empty());
            }
            _ => panic!(),
        }
        assert_eq!(naked(&ApproxBT::Bottom).unwrap().table_to(5).len(), 0);
        assert_eq!(naked(&bt(&omega(), 3, f())).unwrap().table_to(5).len(), 0);
        assert_eq!(naked(&ApproxBT::Unresolved(None)).unwrap_err(), BtError::UnresolvedPresent);
    }

    #[test]
    fn bot_le_examples() {
        assert_eq!(bot_le(&ApproxBT::Bottom, &bt(&t("\\x.x"), 2, f())), Tri::Yes);
        let lhs = bt(&Term::abs("x", Term::app(t("y"), omega())), 2, f());
        let rhs = bt(&t("\\x.y (\\z.z)"), 2, f());
        assert_eq!(bot_le(&lhs, &rhs), Tri::Yes);
        assert_eq!(bot_le(&rhs, &lhs), Tri::No);
        assert_eq!(bot_le(&bt(&t("\\x.x"), 2, f()), &bt(&t("\\x y.x"), 2, f())), Tri::No);
    }

    #[test]
    fn bt_eq_examples() {
        assert_eq!(bt_eq(&t("\\x.x"), &t("(\\z.z) (\\x.x)"), 4, f()), Tri::Yes);
        let yg = t(&format!("({Y}) g"));
        let gyg = t(&format!("g (({Y}) g)"));
        for d in 0..6 {
            assert_eq!(bt_eq(&yg, &gyg, d, f()), Tri::Yes);
        }
        assert_eq!(bt_eq(&t("\\x.x"), &t("\\x y.x"), 4, f()), Tri::No);
    }

    #[test]
    fn subterm_positions() {
        let m = t("\\x.y a b");
        assert_eq!(subterm_at(&m, &[0], f()).unwrap(), t("a"));
        assert_eq!(subterm_at(&m, &[], f()).unwrap(), m);
        assert_eq!(subterm_at(&t("\\x.x"), &[0], f()), Err(BtError::PositionUndefined(vec![0])));
        assert_eq!(subterm_at(&omega(), &[0], f()), Err(BtError::Diverged));
    }

    #[test]
    fn truncation_matches_shallower_unfolding() {
        let yg = t(&format!("({Y}) (\\h x.x h h)"));
        let deep5 = bt(&yg, 5, f());
        for d in 0..5 {
            assert_eq!(deep5.truncate(d), bt(&yg, d, f()));
        }
    }

    #[test]
    fn json_shape() {
        let u = bt(&t("\\x.x (\\y.y)"), 3, f());
        assert_eq!(
            u.to_json().to_string(),
            r#"{"binders":["x"],"children":[{"binders":["y"],"children":[],"head":"y"}],"head":"x"}"#
        );
        assert_eq!(ApproxBT::Bottom.to_json().to_string(), r#"{"leaf":"bottom"}"#);
    }
}
