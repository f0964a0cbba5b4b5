mod common;

use std::collections::BTreeSet;

use bohmlab::bt::{bt, bt_eq};
use bohmlab::eta::{
    self, enumerate_eta, eta_bound_index, eta_index, eta_size, in_eta_below, is_finite_eta_id, iota, le_eta, le_eta_p,
    le_eta_p_src, theory_eq, trees_below, tree_to_eta, Src, Theory,
};
use bohmlab::godel::{decode_seq, decode_term, encode_seq, encode_term};
use bohmlab::reduce::{beta_nf, head_normalize, is_solvable, Fuel, Outcome, Tri};
use bohmlab::separation::{self, verify_separation};
use bohmlab::term::{parse, print, substitute, Name, Term, TermKind};
use bohmlab::transform::{etamax_terms, etamax_traced, StreamSpec};
use bohmlab::zoo;
use common::*;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn nf(t: &Term) -> Term {
    beta_nf(t, fuel()).value().expect("normalizes")
}

// ----------------------------------------------------------------- terms

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn print_then_parse_is_identity(t in open_term()) {
        prop_assert_eq!(parse(&print(&t)).unwrap(), t);
    }

    #[test]
    fn substituting_a_variable_for_itself(t in open_term(), x in prop::sample::select(vec!["a", "b", "x"])) {
        let x = Name::new(x);
        prop_assert_eq!(substitute(&t, &x, &Term::var(x.clone())), t);
    }

    #[test]
    fn free_variables_after_substitution(m in open_term(), n in open_term(), x in prop::sample::select(vec!["a", "b"])) {
        let x = Name::new(x);
        let r = substitute(&m, &x, &n);
        let mut bound: BTreeSet<Name> = m.free_vars();
        bound.remove(&x);
        bound.extend(n.free_vars());
        if m.has_free(&x) {
            prop_assert_eq!(r.free_vars(), bound);
        } else {
            prop_assert!(r.free_vars().is_subset(&bound));
            prop_assert_eq!(r, m);
        }
    }
}

// ------------------------------------------------------------- reduction

/// Paths (0 = function / body, 1 = argument) to every β-redex.
fn redexes(t: &Term, path: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    match t.kind() {
        TermKind::Var(_) => {}
        TermKind::Abs(_, b) => {
            path.push(0);
            redexes(b, path, out);
            path.pop();
        }
        TermKind::App(f, a) => {
            if matches!(f.kind(), TermKind::Abs(..)) {
                out.push(path.clone());
            }
            path.push(0);
            redexes(f, path, out);
            path.pop();
            path.push(1);
            redexes(a, path, out);
            path.pop();
        }
    }
}

fn contract_at(t: &Term, path: &[u8]) -> Term {
    match (t.kind(), path.split_first()) {
        (TermKind::App(f, a), None) => match f.kind() {
            TermKind::Abs(x, b) => substitute(b, x, a),
            _ => unreachable!(),
        },
        (TermKind::Abs(x, b), Some((0, rest))) => Term::abs(x.clone(), contract_at(b, rest)),
        (TermKind::App(f, a), Some((0, rest))) => Term::app(contract_at(f, rest), a.clone()),
        (TermKind::App(f, a), Some((1, rest))) => Term::app(f.clone(), contract_at(a, rest)),
        _ => unreachable!(),
    }
}

/// Reduces redexes chosen by `choices` until none are left.
fn random_order_nf(t: &Term, choices: &[usize], limit: usize) -> Option<Term> {
    let mut t = t.clone();
    for step in 0..limit {
        let mut rs = Vec::new();
        redexes(&t, &mut Vec::new(), &mut rs);
        if rs.is_empty() {
            return Some(t);
        }
        let pick = choices[step % choices.len()] % rs.len();
        t = contract_at(&t, &rs[pick]);
        if t.size() > 5000 {
            return None;
        }
    }
    None
}

proptest! {
    #![proptest_config(cfg(128))]

    #[test]
    fn head_normalization_is_deterministic(t in closed_term()) {
        let f = Fuel::new(500);
        prop_assert_eq!(head_normalize(&t, f), head_normalize(&t, f));
    }

    #[test]
    fn more_fuel_never_flips_a_verdict(t in closed_term()) {
        let small = is_solvable(&t, Fuel::new(200));
        let large = is_solvable(&t, Fuel::new(5000));
        if small != Tri::Unknown {
            prop_assert_eq!(small, large);
        }
        let e_small = is_finite_eta_id(&t, Fuel::new(200));
        let e_large = is_finite_eta_id(&t, Fuel::new(5000));
        if e_small != Tri::Unknown {
            prop_assert_eq!(e_small, e_large);
        }
    }

    #[test]
    fn any_reduction_order_reaches_the_same_normal_form(
        t in closed_term(),
        choices in prop::collection::vec(0usize..64, 1..16),
    ) {
        if let Outcome::Value(n) = beta_nf(&t, Fuel::new(2000)) {
            if let Some(r) = random_order_nf(&t, &choices, 2000) {
                prop_assert_eq!(r, n);
            }
        }
    }
}

// ------------------------------------------------------------ Böhm trees

proptest! {
    #![proptest_config(cfg(96))]

    #[test]
    fn shallower_trees_are_truncations(t in closed_term(), d in 1usize..5) {
        let f = Fuel::new(2000);
        let deep = bt(&t, d + 2, f);
        let shallow = bt(&t, d, f);
        if !deep.has_unresolved() && !shallow.has_unresolved() {
            prop_assert_eq!(deep.truncate(d), shallow);
        }
    }

    #[test]
    fn componentwise_equal_lists_give_equal_streams(items in prop::collection::vec(normal_closed(), 1..4)) {
        // N_i = I M_i is β-equal, so bt_eq holds per component.
        let others: Vec<Term> = items.iter().map(|m| Term::app(zoo::i(), m.clone())).collect();
        for (m, n) in items.iter().zip(&others) {
            prop_assert_eq!(bt_eq(m, n, 6, fuel()), Tri::Yes);
        }
        let j = items.len() - 1;
        let sm = zoo::truncate(&items, j).unwrap();
        let sn = zoo::truncate(&others, j).unwrap();
        prop_assert_eq!(bt_eq(&sm, &sn, j + 1, fuel()), Tri::Yes);
    }

    #[test]
    fn bt_equality_is_preserved_by_applicative_contexts(
        m in normal_closed(),
        args in prop::collection::vec(normal_closed(), 0..3),
    ) {
        let n = Term::app(zoo::i(), m.clone());
        prop_assume!(bt_eq(&m, &n, 4, fuel()) == Tri::Yes);
        let cm = Term::apps(m, args.iter().cloned());
        let cn = Term::apps(n, args.iter().cloned());
        prop_assert_ne!(bt_eq(&cm, &cn, 4, Fuel::new(2000)), Tri::No);
    }
}

// ---------------------------------------------------------------- zoo

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn projections_pick_stream_elements(items in prop::collection::vec(normal_closed(), 7..8)) {
        let s = zoo::truncate(&items, 6).unwrap();
        for (i, item) in items.iter().enumerate() {
            let got = nf(&Term::app(zoo::proj(i), s.clone()));
            prop_assert_eq!(got, nf(item));
        }
    }

    #[test]
    fn tupler_collects_its_arguments(
        xs in prop::collection::vec(normal_closed(), 0..6),
        extra in prop::collection::vec(normal_closed(), 0..6),
        k in 1usize..=6,
    ) {
        let n = xs.len().min(k);
        let rest = (k - n).min(extra.len());
        prop_assume!(n + rest == k);
        let all: Vec<Term> = xs[..n].iter().chain(&extra[..rest]).cloned().collect();
        let applied = Term::apps(zoo::tupler(k), all.iter().cloned());
        prop_assert_eq!(nf(&applied), nf(&zoo::tuple(&all)));
        for i in 1..=k {
            let picked = nf(&Term::app(zoo::tuple(&all), zoo::u(k, i).unwrap()));
            prop_assert_eq!(picked, nf(&all[i - 1]));
        }
    }

    #[test]
    fn named_streams_project(i in 0usize..4) {
        let x = Term::var("x");
        let cases = [
            (zoo::NamedStream::SI, x.clone()),
            (zoo::NamedStream::S1, Term::app(zoo::one(), x.clone())),
            (zoo::NamedStream::S1Star, Term::app(zoo::one_n(i + 1), x.clone())),
        ];
        for (s, want) in cases {
            let e = Term::app(zoo::proj(i), Term::app(zoo::named_stream(s), x.clone()));
            prop_assert_eq!(bt_eq(&e, &want, 6, fuel()), Tri::Yes, "{}", s.name());
        }
    }
}

// ---------------------------------------------------------------- codes

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn term_codes_round_trip(t in closed_term()) {
        prop_assert_eq!(decode_term(&encode_term(&t).unwrap()).unwrap(), t);
    }

    #[test]
    fn sequence_codes_round_trip(s in prop::collection::vec(0usize..50, 0..6)) {
        prop_assert_eq!(decode_seq(&encode_seq(&s)), s);
    }
}

// ------------------------------------------------------------------- η

/// Randomly η-expands variable occurrences in argument position.
fn expand_some(t: &Term, picks: &[bool], at: &mut usize) -> Term {
    match t.kind() {
        TermKind::Var(_) => t.clone(),
        TermKind::Abs(x, b) => Term::abs(x.clone(), expand_some(b, picks, at)),
        TermKind::App(f, a) => {
            let f2 = expand_some(f, picks, at);
            let a2 = expand_some(a, picks, at);
            *at += 1;
            if picks[*at % picks.len()] {
                Term::app(f2, Term::app(zoo::one(), a2))
            } else {
                Term::app(f2, a2)
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn theory_chain_never_contradicts(
        m in normal_closed(),
        other in normal_closed(),
        picks in prop::collection::vec(any::<bool>(), 1..6),
        related in any::<bool>(),
    ) {
        let n = if related { nf(&expand_some(&m, &picks, &mut 0)) } else { other };
        let chain = [Theory::B, Theory::BetaEta(3), Theory::Hplus, Theory::Hstar];
        let v: Vec<Tri> = chain.iter().map(|&th| theory_eq(&m, &n, th, 4, fuel())).collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                prop_assert!(!(v[i] == Tri::Yes && v[j] == Tri::No), "{:?} for {} / {}", v, print(&m), print(&n));
            }
        }
    }

    #[test]
    fn etamax_is_an_upper_bound_of_hplus_equal_terms(
        m in normal_closed(),
        picks in prop::collection::vec(any::<bool>(), 1..6),
    ) {
        let n = nf(&expand_some(&m, &picks, &mut 0));
        prop_assume!(theory_eq(&m, &n, Theory::Hplus, 4, fuel()) == Tri::Yes);
        let p = Src::Tree(etamax_terms(&m, &n, &StreamSpec::eta(), 4, fuel()).unwrap());
        prop_assert_eq!(eta::le_eta_src(&Src::Term(m.clone()), &p, 4, fuel()), Tri::Yes);
        prop_assert_eq!(eta::le_eta_src(&Src::Term(n.clone()), &p, 4, fuel()), Tri::Yes);
    }

    #[test]
    fn lookups_do_not_depend_on_stream_contents(
        m in normal_closed(),
        picks in prop::collection::vec(any::<bool>(), 1..6),
    ) {
        let n = nf(&expand_some(&m, &picks, &mut 0));
        let (cm, cn) = (encode_term(&m).unwrap(), encode_term(&n).unwrap());
        let (a, ta) = etamax_traced(&cm, &cn, &StreamSpec::eta(), 4, fuel()).unwrap();
        let (b, tb) = etamax_traced(&cm, &cn, &StreamSpec::id(), 4, fuel()).unwrap();
        prop_assert_eq!(ta.lookups, tb.lookups);
        prop_assert_eq!(a.has_bottom(), b.has_bottom());
    }

    #[test]
    fn bounded_relation_is_monotone(i in 0u128..40, j in 0u128..40, p in 0usize..4) {
        let (a, b) = (enumerate_eta(i), enumerate_eta(j));
        if le_eta_p(&a, &b, p, 4, fuel()) == Tri::Yes {
            for q in p..p + 3 {
                prop_assert_eq!(le_eta_p(&a, &b, q, 4, fuel()), Tri::Yes);
            }
            prop_assert_eq!(le_eta(&a, &b, 4, fuel()), Tri::Yes);
        }
    }

    #[test]
    fn bounded_relation_composes_additively(i in 0u128..30, j in 0u128..30) {
        let (m, w, n) = (zoo::i(), enumerate_eta(i), enumerate_eta(j));
        let least = |a: &Term, b: &Term| (0..6).find(|&p| le_eta_p(a, b, p, 5, fuel()) == Tri::Yes);
        if let (Some(p1), Some(p2)) = (least(&m, &w), least(&w, &n)) {
            prop_assert_eq!(le_eta_p(&m, &n, p1 + p2, 5, fuel()), Tri::Yes);
        }
    }
}

#[test]
fn infinite_expansions_applied_to_identity_stay_infinite() {
    for k in 1..=3 {
        let q = Term::app(j_k(k), zoo::i());
        let u = bt(&q, 5, fuel());
        assert!(!u.has_bottom(), "k = {k}");
        assert_eq!(eta::le_eta_omega(&zoo::i(), &q, 5, fuel()), Tri::Yes, "k = {k}");
        assert!(eta::looks_like_infinite_eta_id(&q, fuel()), "k = {k}");
    }
}

#[test]
fn adding_expansions_adds_sizes() {
    // λy.Q ∈ ETA^(p) and Q ≤η^(p′) Q′ give λy.Q′ ∈ ETA^(p+p′).
    let etas = small_etas(3);
    for a in &etas {
        let p = eta_size(a).unwrap() + 1;
        for b in &etas {
            let (q, q2) = (body(a), body(b));
            for p2 in 0..3 {
                if le_eta_p(&q, &q2, p2, 4, fuel()) == Tri::Yes {
                    assert_eq!(in_eta_below(b, p + p2, fuel()), Tri::Yes, "{} vs {}", print(a), print(b));
                }
            }
        }
    }
}

#[test]
fn expansions_built_from_small_parts_are_small() {
    // m ≤ p and λz_i.Q_i ∈ ETA^(p) give |λy z⃗.y Q⃗| < p + 1.
    for p in 1..=3 {
        let parts = small_etas(p);
        for m in 0..=p.min(2) {
            let mut combos: Vec<Vec<&Term>> = vec![vec![]];
            for _ in 0..m {
                combos = combos.iter().flat_map(|c| parts.iter().map(move |q| [c.clone(), vec![q]].concat())).collect();
            }
            for combo in combos {
                let zs: Vec<String> = (0..m).map(|i| format!("z{i}")).collect();
                let args: Vec<Term> = combo.iter().zip(&zs).map(|(q, z)| Term::app((*q).clone(), Term::var(z.as_str()))).collect();
                let whole = Term::lams(
                    std::iter::once("y".to_string()).chain(zs.iter().cloned()).map(|s| Name::new(&s)),
                    Term::apps(Term::var("y"), args),
                );
                let size = eta_size(&nf(&whole)).unwrap();
                assert!(size < p + 1, "p = {p}: {}", print(&whole));
            }
        }
    }
}

#[test]
fn bound_index_is_the_largest_iota() {
    for p in 1..=3 {
        let direct = small_etas(p).iter().map(|q| iota(&encode_term(q).unwrap(), fuel()).unwrap()).max();
        assert_eq!(eta_bound_index(p), direct, "p = {p}");
    }
}

#[test]
fn joins_of_bounded_expansions_stay_bounded() {
    // For λz.Q, λz.Q′ in ETA^(p), their join over the η-stream is above
    // each by ≤η^(p).
    for p in 1..=3 {
        let etas = small_etas(p);
        for a in &etas {
            for b in &etas {
                let j = Src::Tree(etamax_terms(a, b, &StreamSpec::eta(), 5, fuel()).unwrap());
                for side in [a, b] {
                    assert_eq!(
                        le_eta_p_src(&Src::Term(side.clone()), &j, p, 5, fuel()),
                        Tri::Yes,
                        "p = {p}: {} ⊔ {}",
                        print(a),
                        print(b)
                    );
                }
            }
        }
    }
}

#[test]
fn common_lower_bound_gives_bounded_join() {
    // M ≥η^(p) P ≤η^(p) N: the join of M and N sits above both by ≤η^(p).
    let p = 2;
    let base = parse("\\f.f (\\x.x) (\\x.x)").unwrap();
    let m = zoo::resolve_constants(&parse("\\f.f One (\\x.x)").unwrap());
    let n = zoo::resolve_constants(&parse("\\f.f (\\x.x) One^2").unwrap());
    assert_eq!(le_eta_p(&base, &m, p, 4, fuel()), Tri::Yes);
    assert_eq!(le_eta_p(&base, &n, p, 4, fuel()), Tri::Yes);
    let j = Src::Tree(etamax_terms(&m, &n, &StreamSpec::eta(), 4, fuel()).unwrap());
    assert_eq!(le_eta_p_src(&Src::Term(m), &j, p, 4, fuel()), Tri::Yes);
    assert_eq!(le_eta_p_src(&Src::Term(n), &j, p, 4, fuel()), Tri::Yes);
}

#[test]
fn a_finite_part_of_the_stream_suffices() {
    let pairs = [("\\x.x", "One", 1), ("\\x y.x y", "\\x y.x (One y)", 1), ("\\x.x", "One^2", 2)];
    for (m, n, p) in pairs {
        let m = zoo::resolve_constants(&parse(m).unwrap());
        let n = zoo::resolve_constants(&parse(n).unwrap());
        assert_eq!(le_eta_p(&m, &n, p, 4, fuel()), Tri::Yes);
        let cut = eta_bound_index(p + 1).unwrap();
        let restricted = StreamSpec::Restricted { base: Box::new(StreamSpec::eta()), n: cut };
        let full = etamax_terms(&m, &n, &StreamSpec::eta(), 4, fuel()).unwrap();
        let part = etamax_terms(&m, &n, &restricted, 4, fuel()).unwrap();
        assert_eq!(full, part);
    }
}

#[test]
fn eta_index_round_trips_for_small_trees() {
    for t in trees_below(4) {
        let q = tree_to_eta(&t);
        let i = eta_index(&t).unwrap();
        assert_eq!(enumerate_eta(i), q);
    }
}

// ------------------------------------------------------------ separation

/// Replaces one argument that is a bare variable with `J` applied to it.
fn plant_j(t: &Term, target: usize, seen: &mut usize) -> Term {
    match t.kind() {
        TermKind::Var(_) => t.clone(),
        TermKind::Abs(x, b) => Term::abs(x.clone(), plant_j(b, target, seen)),
        TermKind::App(f, a) => {
            let f2 = plant_j(f, target, seen);
            if a.as_var().is_some() {
                let hit = *seen == target;
                *seen += 1;
                if hit {
                    return Term::app(f2, Term::app(zoo::j(), a.clone()));
                }
                return Term::app(f2, a.clone());
            }
            Term::app(f2, plant_j(a, target, seen))
        }
    }
}

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn separation_certificates_verify(m in normal_shape(2).prop_map(|s| s.to_term()), target in 0usize..4) {
        let mut count = 0;
        let n = plant_j(&m, target, &mut count);
        prop_assume!(target < count);
        let depth = 2 + m.size().min(4);
        match separation::separate(&m, &n, depth, fuel()) {
            Ok(cert) => {
                prop_assert_eq!(verify_separation(&cert, &m, &n, cert.depth, fuel()), Tri::Yes);
                prop_assert_eq!(verify_separation(&cert.padded(1), &m, &n, cert.depth, fuel()), Tri::Yes);
            }
            Err(separation::SepError::NoSeparator(_)) => {}
            Err(e) => prop_assert!(false, "{e} for {} / {}", print(&m), print(&n)),
        }
    }
}

// ------------------------------------------------------------------- CLI

#[test]
fn structured_reports_are_reproducible() {
    let run = |args: &[&str]| {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = bohmlab::cli::run(std::iter::once("bohmlab").chain(args.iter().copied()), &mut out, &mut err);
        (code, out)
    };
    for args in [
        &["--format", "json", "bt", "S_1star x", "--depth", "4"][..],
        &["--format", "json", "eq", "S_I", "S_1", "--theory", "Beta", "--p", "1", "--depth", "4"],
        &["--format", "json", "etamax", "S_I", "S_1star", "--depth", "3"],
    ] {
        assert_eq!(run(args), run(args));
    }
}
