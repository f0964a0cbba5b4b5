//! Numeric codes for position sequences and closed terms.
//!
//! Sequences: `#ε = 0`, `#(σ.n) = ⟨#σ, n⟩ + 1` with the Cantor pairing
//! `⟨a, b⟩ = (a+b)(a+b+1)/2 + b`.
//!
//! Closed terms: translate to de Bruijn indices, then emit bits
//! `λ.M ↦ 00 M`, `M N ↦ 01 M N`, index `i ↦ 1^{i+1} 0`. The code is the
//! number whose binary expansion is `1` followed by those bits.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::term::{deep, Name, Position, Term, TermKind};
use crate::zoo;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GodelError {
    #[error("term has free variables and cannot be encoded")]
    OpenTermNotEncodable,
    #[error("not a valid term code: {0}")]
    BadCode(String),
    #[error("code {0} is too large to quote as a numeral")]
    TooLarge(String),
}

/// Code of a closed term.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermCode(pub BigUint);

impl TermCode {
    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

impl fmt::Display for TermCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for TermCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl FromStr for TermCode {
    type Err = GodelError;
    fn from_str(s: &str) -> Result<TermCode, GodelError> {
        s.trim().parse::<BigUint>().map(TermCode).map_err(|_| GodelError::BadCode(s.to_string()))
    }
}

impl Serialize for TermCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for TermCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<TermCode, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ------------------------------------------------------------ sequences

fn pair(a: &BigUint, b: &BigUint) -> BigUint {
    let s = a + b;
    (&s * (&s + 1u32)) / 2u32 + b
}

fn unpair(z: &BigUint) -> (BigUint, BigUint) {
    // w = floor((sqrt(8z+1) - 1) / 2)
    let w = ((z * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    let t = (&w * (&w + 1u32)) / 2u32;
    let b = z - t;
    let a = &w - &b;
    (a, b)
}

/// Extends the code of `σ` to the code of `σ.n`.
pub fn extend_seq(code: &BigUint, n: usize) -> BigUint {
    pair(code, &BigUint::from(n)) + 1u32
}

pub fn encode_seq(sigma: &[usize]) -> BigUint {
    sigma.iter().fold(BigUint::zero(), |c, &n| extend_seq(&c, n))
}

pub fn decode_seq(code: &BigUint) -> Position {
    let mut out = Vec::new();
    let mut c = code.clone();
    while !c.is_zero() {
        let (a, b) = unpair(&(c - 1u32));
        out.push(b.to_usize().expect("sequence entry fits in usize"));
        c = a;
    }
    out.reverse();
    out
}

// ---------------------------------------------------------------- terms

fn emit_bits(t: &Term, env: &mut Vec<Name>, bits: &mut Vec<bool>) -> Result<(), GodelError> {
    deep(|| match t.kind() {
        TermKind::Var(x) => {
            let i = env.iter().rev().position(|y| y == x).ok_or(GodelError::OpenTermNotEncodable)?;
            bits.extend(std::iter::repeat_n(true, i + 1));
            bits.push(false);
            Ok(())
        }
        TermKind::Abs(x, b) => {
            bits.extend([false, false]);
            env.push(x.clone());
            let r = emit_bits(b, env, bits);
            env.pop();
            r
        }
        TermKind::App(f, a) => {
            bits.extend([false, true]);
            emit_bits(f, env, bits)?;
            emit_bits(a, env, bits)
        }
    })
}

pub fn encode_term(m: &Term) -> Result<TermCode, GodelError> {
    let mut bits = vec![true];
    emit_bits(m, &mut Vec::new(), &mut bits)?;
    // BigUint::from_radix_be wants digits most significant first.
    let digits: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
    Ok(TermCode(BigUint::from_radix_be(&digits, 2).expect("binary digits")))
}

struct BitReader {
    bits: Vec<bool>,
    pos: usize,
}

impl BitReader {
    fn next(&mut self) -> Result<bool, GodelError> {
        let b = *self.bits.get(self.pos).ok_or_else(|| GodelError::BadCode("truncated bit string".into()))?;
        self.pos += 1;
        Ok(b)
    }
}

fn binder_name(depth: usize) -> Name {
    Name::new(&format!("v{depth}"))
}

fn read_term(r: &mut BitReader, depth: usize) -> Result<Term, GodelError> {
    deep(|| {
        if !r.next()? {
            if !r.next()? {
                Ok(Term::abs(binder_name(depth), read_term(r, depth + 1)?))
            } else {
                let f = read_term(r, depth)?;
                let a = read_term(r, depth)?;
                Ok(Term::app(f, a))
            }
        } else {
            let mut i = 0usize;
            while r.next()? {
                i += 1;
            }
            if i >= depth {
                return Err(GodelError::BadCode(format!("index {i} exceeds binder depth {depth}")));
            }
            Ok(Term::var(binder_name(depth - 1 - i)))
        }
    })
}

pub fn decode_term(c: &TermCode) -> Result<Term, GodelError> {
    let s = c.0.to_str_radix(2);
    let mut chars = s.chars();
    if chars.next() != Some('1') {
        return Err(GodelError::BadCode(c.to_string()));
    }
    let mut r = BitReader { bits: chars.map(|ch| ch == '1').collect(), pos: 0 };
    let t = read_term(&mut r, 0)?;
    if r.pos != r.bits.len() {
        return Err(GodelError::BadCode(format!("{} trailing bits", r.bits.len() - r.pos)));
    }
    Ok(t)
}

/// Largest code turned into a Church numeral by [`quote`].
pub const QUOTE_LIMIT: u64 = 1 << 20;

/// The Church numeral of the code of `m`.
pub fn quote(m: &Term) -> Result<Term, GodelError> {
    let c = encode_term(m)?;
    match c.0.to_u64() {
        Some(n) if n <= QUOTE_LIMIT => Ok(zoo::church(n as usize)),
        _ => Err(GodelError::TooLarge(c.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::t;

    #[test]
    fn sequence_codes() {
        assert_eq!(encode_seq(&[]), BigUint::zero());
        assert_eq!(decode_seq(&encode_seq(&[1, 0])), vec![1, 0]);
        let s = encode_seq(&[3, 1]);
        assert_eq!(extend_seq(&s, 2), encode_seq(&[3, 1, 2]));
    }

    #[test]
    fn sequence_codes_are_a_bijection_on_small_sequences() {
        let mut seen = std::collections::HashSet::new();
        let mut all: Vec<Vec<usize>> = vec![vec![]];
        for len in 1..4 {
            let prev: Vec<Vec<usize>> = all.iter().filter(|s| s.len() == len - 1).cloned().collect();
            for p in prev {
                for n in 0..4 {
                    let mut q = p.clone();
                    q.push(n);
                    all.push(q);
                }
            }
        }
        for s in &all {
            let c = encode_seq(s);
            assert_eq!(&decode_seq(&c), s);
            assert!(seen.insert(c));
        }
        // Every small number decodes to something that re-encodes to it.
        for n in 0u32..500 {
            let c = BigUint::from(n);
            assert_eq!(encode_seq(&decode_seq(&c)), c);
        }
    }

    #[test]
    fn term_code_goldens() {
        assert_eq!(encode_term(&t("\\x.x")).unwrap().0, BigUint::from(0b10010u32));
        assert_eq!(encode_term(&t("\\x y.x")).unwrap().0, BigUint::from(0b1000_0110u32));
        assert_ne!(encode_term(&t("\\x.x")).unwrap(), encode_term(&t("\\x y.x")).unwrap());
        assert_eq!(encode_term(&t("\\x.x y")), Err(GodelError::OpenTermNotEncodable));
    }

    #[test]
    fn decode_round_trip_and_rejects_non_codes() {
        for s in ["\\x.x", "\\x y.x", "\\x y.y", "\\x y z.x (y z)", "(\\x.x x) (\\x.x x)"] {
            let m = t(s);
            assert_eq!(decode_term(&encode_term(&m).unwrap()).unwrap(), m);
        }
        for bad in [0u32, 1, 2, 3, 0b110, 0b10011] {
            assert!(decode_term(&TermCode(BigUint::from(bad))).is_err(), "{bad}");
        }
    }

    fn terms_up_to(size: usize, names: &[&str]) -> Vec<Term> {
        // size counts variables, abstractions and applications
        let mut by_size: Vec<Vec<Term>> = vec![vec![]];
        for n in 1..=size {
            let mut out = Vec::new();
            if n == 1 {
                out.extend(names.iter().map(|x| Term::var(Name::new(x))));
            }
            for b in &by_size[n - 1] {
                for x in names {
                    out.push(Term::abs(Name::new(x), b.clone()));
                }
            }
            for l in 1..n.saturating_sub(1) {
                let r = n - 1 - l;
                for f in &by_size[l] {
                    for a in &by_size[r] {
                        out.push(Term::app(f.clone(), a.clone()));
                    }
                }
            }
            by_size.push(out);
        }
        by_size.into_iter().flatten().collect()
    }

    #[test]
    fn closed_terms_of_size_five_round_trip_injectively() {
        let mut codes: std::collections::HashMap<TermCode, Term> = std::collections::HashMap::new();
        let mut closed = 0;
        for m in terms_up_to(5, &["x", "y"]) {
            if !m.is_closed() {
                continue;
            }
            closed += 1;
            let c = encode_term(&m).unwrap();
            assert_eq!(decode_term(&c).unwrap(), m);
            if let Some(prev) = codes.get(&c) {
                assert_eq!(prev, &m, "code collision between α-distinct terms");
            }
            codes.insert(c, m);
        }
        assert!(closed > 20);
    }

    #[test]
    fn encoding_is_linear_in_term_size() {
        let big = crate::zoo::church(5000);
        let start = std::time::Instant::now();
        let c = encode_term(&big).unwrap();
        assert_eq!(decode_term(&c).unwrap(), big);
        assert!(start.elapsed() < std::time::Duration::from_secs(5));
    }

    #[test]
    fn quoting() {
        let q = quote(&t("\\x.x")).unwrap();
        assert_eq!(zoo::church_value(&q), Some(18));
        let codes: std::collections::HashSet<_> =
            [zoo::i(), zoo::k(), zoo::f(), zoo::b()].iter().map(|m| quote(m).unwrap()).collect();
        assert_eq!(codes.len(), 4);
        assert_eq!(crate::reduce::beta_nf(&q, crate::reduce::Fuel::default()).value(), Some(q.clone()));
        assert!(matches!(quote(&zoo::named_stream(zoo::NamedStream::SI)), Err(GodelError::TooLarge(_))));
    }
}
