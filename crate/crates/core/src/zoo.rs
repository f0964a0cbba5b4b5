//! Named combinators, Church arithmetic, tuples, streams and the Eq combinator.

use thiserror::Error;

use crate::term::{fresh_name, parse, substitute_many, Name, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZooError {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("list too short: need {needed} elements, got {got}")]
    ListTooShort { needed: usize, got: usize },
    #[error("unknown constant {0:?}")]
    Unknown(String),
}

/// Parses `src` and replaces the listed free names by closed terms.
pub(crate) fn build(src: &str, defs: &[(&str, Term)]) -> Term {
    let body = parse(src).unwrap_or_else(|e| panic!("bad built-in term {src:?}: {e}"));
    let pairs: Vec<(Name, Term)> = defs.iter().map(|(n, t)| (Name::new(n), t.clone())).collect();
    substitute_many(&body, &pairs)
}

fn p(src: &str) -> Term {
    build(src, &[])
}

pub fn i() -> Term {
    p("\\x.x")
}

pub fn k() -> Term {
    p("\\x y.x")
}

/// `λxy.y`
pub fn f() -> Term {
    p("\\x y.y")
}

/// Composition `λxyz.x(yz)`.
pub fn b() -> Term {
    p("\\x y z.x (y z)")
}

pub fn omega() -> Term {
    p("(\\x.x x) (\\x.x x)")
}

pub fn y() -> Term {
    p("\\f.(\\x.f (x x)) (\\x.f (x x))")
}

/// The infinite η-expansion of the identity following the unary tree.
pub fn j() -> Term {
    build("Y (\\j x z0.x (j z0))", &[("Y", y())])
}

/// `1⁰ = I`, `1ⁿ⁺¹ = λxz.x(1ⁿ z)`.
pub fn one_n(n: usize) -> Term {
    let mut t = i();
    for _ in 0..n {
        t = build("\\x z0.x (O z0)", &[("O", t)]);
    }
    t
}

/// `1 = 1¹`
pub fn one() -> Term {
    p("\\x z.x z")
}

/// `Uⁿ_k = λx₁…xₙ.x_k`, 1-based.
pub fn u(n: usize, k: usize) -> Result<Term, ZooError> {
    if k == 0 || k > n {
        return Err(ZooError::IndexOutOfRange(format!("U[{n},{k}]")));
    }
    let xs: Vec<Name> = (1..=n).map(|i| Name::new(&format!("x{i}"))).collect();
    Ok(Term::lams(xs.clone(), Term::var(xs[k - 1].clone())))
}

/// The tupler `Pₙ = λx₁…xₙ.[x₁,…,xₙ]`.
pub fn tupler(n: usize) -> Term {
    let xs: Vec<Term> = (1..=n).map(|i| Term::var(format!("x{i}").as_str())).collect();
    let names: Vec<Name> = (1..=n).map(|i| Name::new(&format!("x{i}"))).collect();
    Term::lams(names, tuple(&xs))
}

/// `[M₁,…,Mₙ] = λy.y M₁ … Mₙ`
pub fn tuple(items: &[Term]) -> Term {
    let fv: Vec<Name> = items.iter().flat_map(|t| t.free_vars()).collect();
    let yv = fresh_name(&Name::new("y"), |c| fv.contains(c));
    Term::abs(yv.clone(), Term::apps(Term::var(yv), items.iter().cloned()))
}

/// `πᵢ = λy.y F…F K` with `i` copies of F.
pub fn proj(i: usize) -> Term {
    let mut args: Vec<Term> = (0..i).map(|_| f()).collect();
    args.push(k());
    Term::abs("y", Term::apps(Term::var("y"), args))
}

pub fn church(n: usize) -> Term {
    let mut body = Term::var("x");
    for _ in 0..n {
        body = Term::app(Term::var("f"), body);
    }
    Term::lams(["f", "x"], body)
}

/// Reads back a Church numeral in normal form.
pub fn church_value(t: &Term) -> Option<usize> {
    let (bs, mut body) = t.strip_lams();
    if bs.len() != 2 || bs[0] == bs[1] {
        return None;
    }
    let mut n = 0;
    loop {
        if body.as_var() == Some(&bs[1]) {
            return Some(n);
        }
        let (h, args) = body.spine();
        if h.as_var() != Some(&bs[0]) || args.len() != 1 {
            return None;
        }
        body = args[0].clone();
        n += 1;
    }
}

pub fn succ() -> Term {
    p("\\n f x.f (n f x)")
}

pub fn pred() -> Term {
    p("\\n f x.n (\\g h.h (g f)) (\\u.x) (\\u.u)")
}

/// `ifz n a b` is `a` when `n = 0` and `b` otherwise.
pub fn ifz() -> Term {
    p("\\n a b.n (\\u.b) a")
}

/// `Y(λm n.[G n, m(succ n)]) ⌜0⌝`
pub fn make_stream(generator: &Term) -> Term {
    build(
        "Y (\\m n.\\y.y (G n) (m (SUCC n))) C0",
        &[("Y", y()), ("G", generator.clone()), ("SUCC", succ()), ("C0", church(0))],
    )
}

/// `[S₀,[S₁,…,[Sₙ,Ω]…]]`
pub fn truncate(elements: &[Term], n: usize) -> Result<Term, ZooError> {
    if elements.len() < n + 1 {
        return Err(ZooError::ListTooShort { needed: n + 1, got: elements.len() });
    }
    let mut acc = omega();
    for e in elements[..=n].iter().rev() {
        acc = tuple(&[e.clone(), acc]);
    }
    Ok(acc)
}

/// The named streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedStream {
    /// `S_I x = [x,[x,…]]`
    SI,
    /// `S_1 x = [1x,[1x,…]]`
    S1,
    /// `S_1* x = [1¹x,[1²x,…]]`
    S1Star,
    /// `S_J x = [Jx,[Jx,…]]`
    SJ,
    /// `S_I^Ω y x = [yx,[yΩx,[yΩΩx,…]]]`
    SIOmega,
    /// `S_η^Ω y x = [y(η₀x),[yΩ(η₁x),…]]`
    SEtaOmega,
    /// `[I,[I,…]]`
    IdStream,
    /// `[η₀,[η₁,…]]`
    EtaStream,
}

impl NamedStream {
    pub const ALL: [NamedStream; 8] = [
        NamedStream::SI,
        NamedStream::S1,
        NamedStream::S1Star,
        NamedStream::SJ,
        NamedStream::SIOmega,
        NamedStream::SEtaOmega,
        NamedStream::IdStream,
        NamedStream::EtaStream,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedStream::SI => "S_I",
            NamedStream::S1 => "S_1",
            NamedStream::S1Star => "S_1star",
            NamedStream::SJ => "S_J",
            NamedStream::SIOmega => "S_IOmega",
            NamedStream::SEtaOmega => "S_etaOmega",
            NamedStream::IdStream => "IdStream",
            NamedStream::EtaStream => "EtaStream",
        }
    }
}

pub fn named_stream(which: NamedStream) -> Term {
    match which {
        NamedStream::SI => build("Y (\\m x.\\y.y x (m x))", &[("Y", y())]),
        NamedStream::S1 => build("Y (\\m x.\\y.y (ONE x) (m x))", &[("Y", y()), ("ONE", one())]),
        NamedStream::S1Star => {
            let fgen = tuple(&[p("\\z x y.x (z y)"), one()]);
            build(
                "Y (\\m n x.\\y.y (FG n x) (m (SUCC n) x)) C0",
                &[("Y", y()), ("FG", fgen), ("SUCC", succ()), ("C0", church(0))],
            )
        }
        NamedStream::SJ => build("Y (\\m x.\\y.y (J x) (m x))", &[("Y", y()), ("J", j())]),
        NamedStream::SIOmega => {
            build("Y (\\s y x.\\p.p (y x) (s (y OM) x))", &[("Y", y()), ("OM", omega())])
        }
        NamedStream::SEtaOmega => build(
            "Y (\\s e y x.\\p.p (y (e K x)) (s (e F) (y OM) x)) ETAS",
            &[("Y", y()), ("OM", omega()), ("K", k()), ("F", f()), ("ETAS", crate::eta::eta_stream_term())],
        ),
        NamedStream::IdStream => make_stream(&p("\\n.\\x.x")),
        NamedStream::EtaStream => crate::eta::eta_stream_term(),
    }
}

/// `Eq n s = ifz(n, λz.s I z K, Eq (pred n) (λzw.s(Kz)wF))`
pub fn eq_combinator() -> Term {
    build(
        "Y (\\e n s.IFZ n (\\z.s I z K) (e (PRED n) (\\z w.s (K z) w F)))",
        &[("Y", y()), ("IFZ", ifz()), ("PRED", pred()), ("I", i()), ("K", k()), ("F", f())],
    )
}

/// Resolves a constant name as accepted on the command line.
pub fn constant(name: &str) -> Result<Term, ZooError> {
    let bracket = |prefix: &str| -> Option<Vec<usize>> {
        let rest = name.strip_prefix(prefix)?.strip_prefix('[')?.strip_suffix(']')?;
        rest.split(',').map(|s| s.trim().parse().ok()).collect()
    };
    let t = match name {
        "I" => i(),
        "K" => k(),
        "F" => f(),
        "B" => b(),
        "Y" => y(),
        "Omega" | "Ω" => omega(),
        "J" => j(),
        "One" => one(),
        "succ" => succ(),
        "pred" => pred(),
        "ifz" => ifz(),
        "Eq" => eq_combinator(),
        _ => {
            if let Some(s) = NamedStream::ALL.iter().find(|s| s.name() == name) {
                return Ok(named_stream(*s));
            }
            if let Some(n) = name.strip_prefix("One^").and_then(|s| s.parse().ok()) {
                return Ok(one_n(n));
            }
            if let Some(v) = bracket("U") {
                return match v.as_slice() {
                    [n, k] => u(*n, *k),
                    _ => Err(ZooError::Unknown(name.to_string())),
                };
            }
            if let Some([n]) = bracket("P").as_deref() {
                return Ok(tupler(*n));
            }
            if let Some([n]) = bracket("C").as_deref() {
                return Ok(church(*n));
            }
            if let Some([n]) = bracket("pi").as_deref() {
                return Ok(proj(*n));
            }
            if let Some([n]) = bracket("eta").as_deref() {
                return Ok(crate::eta::enumerate_eta(*n as u128));
            }
            return Err(ZooError::Unknown(name.to_string()));
        }
    };
    Ok(t)
}

/// Replaces every free variable that names a constant by its definition.
pub fn resolve_constants(t: &Term) -> Term {
    let pairs: Vec<(Name, Term)> =
        t.free_vars().into_iter().filter_map(|n| constant(n.as_str()).ok().map(|c| (n, c))).collect();
    substitute_many(t, &pairs)
}
