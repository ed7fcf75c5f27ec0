//! Element literals for the command line.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := atom ['^' INT]
//! atom   := 'W' '[' rational (',' rational)* ']'
//!         | 'R' '(' rational ';' rational (',' rational)* ')'
//!         | 'adj' '(' expr ')'
//!         | '(' rational ('+' | '-') rational 'i' ')'
//!         | rational ['i']
//!         | '(' expr ')'
//! ```
//!
//! A leading or binary `-` becomes multiplication by the scalar `-1`, and all
//! numbers are kept as exact rationals so that printing and re-parsing gives
//! back the same tree.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::character::{Character, QComplex};
use crate::error::{Error, Result};
use crate::fock::{FockRep, ResolventSymbol, ResolventWord};
use crate::linalg::{self, CMatrix};
use crate::rational::{self, Rational};
use crate::symplectic::{SymplecticSpace, VecX};
use crate::weyl::WeylElement;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ElementExpr {
    Weyl(VecX),
    Resolvent { lambda: Rational, f: VecX },
    Scalar(QComplex),
    Add(Box<ElementExpr>, Box<ElementExpr>),
    Mul(Box<ElementExpr>, Box<ElementExpr>),
    Adj(Box<ElementExpr>),
    Pow(Box<ElementExpr>, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Weyl,
    Resolvent,
}

impl Family {
    fn letter(self) -> char {
        match self {
            Family::Weyl => 'W',
            Family::Resolvent => 'R',
        }
    }
}

impl ElementExpr {
    /// Generator family, or `None` for pure scalars.
    pub fn family(&self) -> Option<Family> {
        match self {
            ElementExpr::Weyl(_) => Some(Family::Weyl),
            ElementExpr::Resolvent { .. } => Some(Family::Resolvent),
            ElementExpr::Scalar(_) => None,
            ElementExpr::Add(a, b) | ElementExpr::Mul(a, b) => a.family().or(b.family()),
            ElementExpr::Adj(a) | ElementExpr::Pow(a, _) => a.family(),
        }
    }

    pub fn to_weyl(&self, space: &Arc<SymplecticSpace>) -> Result<WeylElement> {
        Ok(match self {
            ElementExpr::Weyl(f) => WeylElement::generator(space, f.clone())?,
            ElementExpr::Resolvent { .. } => return Err(Error::WrongFamily("Weyl")),
            ElementExpr::Scalar(z) => WeylElement::scalar(space, z.to_complex64()),
            ElementExpr::Add(a, b) => a.to_weyl(space)?.add(&b.to_weyl(space)?)?,
            ElementExpr::Mul(a, b) => a.to_weyl(space)?.multiply(&b.to_weyl(space)?)?,
            ElementExpr::Adj(a) => a.to_weyl(space)?.adjoint(),
            ElementExpr::Pow(a, n) => a.to_weyl(space)?.pow(*n)?,
        })
    }

    /// Matrix of the expression in a truncated Fock representation.
    pub fn to_fock(&self, rep: &FockRep) -> Result<CMatrix> {
        Ok(match self {
            ElementExpr::Weyl(_) => return Err(Error::WrongFamily("resolvent")),
            ElementExpr::Resolvent { lambda, f } => rep.resolvent_matrix(rational::to_f64(lambda), f)?,
            ElementExpr::Scalar(z) => linalg::identity(rep.dim()) * z.to_complex64(),
            ElementExpr::Add(a, b) => a.to_fock(rep)? + b.to_fock(rep)?,
            ElementExpr::Mul(a, b) => a.to_fock(rep)? * b.to_fock(rep)?,
            ElementExpr::Adj(a) => a.to_fock(rep)?.adjoint(),
            ElementExpr::Pow(a, n) => {
                let m = a.to_fock(rep)?;
                (0..*n).fold(linalg::identity(rep.dim()), |acc, _| acc * &m)
            }
        })
    }

    /// Exact value under a character of the abelian quotient.
    pub fn character_value(&self, chi: &Character) -> Result<QComplex> {
        Ok(match self {
            ElementExpr::Weyl(_) => return Err(Error::WrongFamily("resolvent")),
            ElementExpr::Resolvent { lambda, f } => chi.resolvent(lambda, f)?,
            ElementExpr::Scalar(z) => z.clone(),
            ElementExpr::Add(a, b) => &a.character_value(chi)? + &b.character_value(chi)?,
            ElementExpr::Mul(a, b) => &a.character_value(chi)? * &b.character_value(chi)?,
            ElementExpr::Adj(a) => a.character_value(chi)?.conj(),
            ElementExpr::Pow(a, n) => a.character_value(chi)?.pow(*n),
        })
    }

    /// The word for a product of resolvent generators, adjoints and powers.
    pub fn as_word(&self) -> Option<ResolventWord> {
        match self {
            ElementExpr::Resolvent { lambda, f } => ResolventWord::symbol(lambda.clone(), f.clone()).ok(),
            ElementExpr::Mul(a, b) => Some(a.as_word()?.concat(&b.as_word()?)),
            ElementExpr::Adj(a) => Some(a.as_word()?.adjoint()),
            ElementExpr::Pow(a, n) => {
                let w = a.as_word()?;
                Some((0..*n).fold(ResolventWord::default(), |acc, _| acc.concat(&w)))
            }
            _ => None,
        }
    }

    pub fn from_word(word: &ResolventWord) -> Option<ElementExpr> {
        let symbol = |s: &ResolventSymbol| {
            let r = ElementExpr::Resolvent { lambda: s.lambda.clone(), f: s.f.clone() };
            if s.adjoint {
                ElementExpr::Adj(Box::new(r))
            } else {
                r
            }
        };
        let mut iter = word.factors.iter();
        let first = symbol(iter.next()?);
        Some(iter.fold(first, |acc, s| ElementExpr::Mul(Box::new(acc), Box::new(symbol(s)))))
    }
}

fn write_vec(f: &mut fmt::Formatter<'_>, v: &VecX) -> fmt::Result {
    let parts: Vec<String> = v.coords().iter().map(rational::format_rational).collect();
    f.write_str(&parts.join(","))
}

impl fmt::Display for ElementExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paren = |f: &mut fmt::Formatter<'_>, e: &ElementExpr, wrap: bool| {
            if wrap {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            ElementExpr::Weyl(v) => {
                f.write_str("W[")?;
                write_vec(f, v)?;
                f.write_str("]")
            }
            ElementExpr::Resolvent { lambda, f: v } => {
                write!(f, "R({}; ", rational::format_rational(lambda))?;
                write_vec(f, v)?;
                f.write_str(")")
            }
            ElementExpr::Scalar(z) => write!(f, "{z}"),
            ElementExpr::Add(a, b) => {
                paren(f, a, false)?;
                f.write_str("+")?;
                paren(f, b, matches!(**b, ElementExpr::Add(..)))
            }
            ElementExpr::Mul(a, b) => {
                paren(f, a, matches!(**a, ElementExpr::Add(..)))?;
                f.write_str("*")?;
                paren(f, b, matches!(**b, ElementExpr::Add(..) | ElementExpr::Mul(..)))
            }
            ElementExpr::Adj(a) => write!(f, "adj({a})"),
            ElementExpr::Pow(a, n) => {
                let atomic = matches!(
                    **a,
                    ElementExpr::Weyl(_) | ElementExpr::Resolvent { .. } | ElementExpr::Scalar(_) | ElementExpr::Adj(_)
                );
                paren(f, a, !atomic)?;
                write!(f, "^{n}")
            }
        }
    }
}

/// Parses an element literal over `space` (vector arity `2d`).
pub fn parse_element(src: &str, space: &SymplecticSpace) -> Result<ElementExpr> {
    let mut p = Parser { src, pos: 0, arity: space.dim(), family: None };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.error(format!("unexpected {:?}", p.rest_preview())));
    }
    Ok(e)
}

/// Splits a comma-separated list of expressions at top-level commas only.
pub fn split_top_level(src: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in src.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(src[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = src[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    arity: usize,
    family: Option<(Family, usize)>,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { pos: self.pos, msg: msg.into() }
    }

    fn error_at(&self, pos: usize, msg: impl Into<String>) -> Error {
        Error::Parse { pos, msg: msg.into() }
    }

    fn rest_preview(&self) -> String {
        self.src[self.pos..].chars().take(12).collect()
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, ch: char) -> bool {
        if self.peek() == Some(ch) {
            self.pos += ch.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: char) -> Result<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{ch}'")))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<ElementExpr> {
        let mut lhs = if self.eat('-') { negate(self.term()?) } else { self.term()? };
        loop {
            if self.eat('+') {
                let rhs = self.term()?;
                lhs = ElementExpr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat('-') {
                let rhs = negate(self.term()?);
                lhs = ElementExpr::Add(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<ElementExpr> {
        let mut lhs = self.factor()?;
        while self.eat('*') {
            let rhs = self.factor()?;
            lhs = ElementExpr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ElementExpr> {
        let base = self.atom()?;
        if self.eat('^') {
            self.skip_ws();
            let start = self.pos;
            let digits = self.src[self.pos..].chars().take_while(char::is_ascii_digit).count();
            self.pos += digits;
            let n: u32 = self.src[start..self.pos]
                .parse()
                .map_err(|_| self.error_at(start, "expected a positive integer exponent"))?;
            if n == 0 {
                return Err(self.error_at(start, "exponent must be positive"));
            }
            return Ok(ElementExpr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ElementExpr> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.peek() {
            Some('W') => {
                self.pos += 1;
                self.note_family(Family::Weyl, start)?;
                self.expect('[')?;
                let v = self.vector(start)?;
                self.expect(']')?;
                Ok(ElementExpr::Weyl(v))
            }
            Some('R') => {
                self.pos += 1;
                self.note_family(Family::Resolvent, start)?;
                self.expect('(')?;
                self.skip_ws();
                let lambda_pos = self.pos;
                let lambda = self.number(true)?;
                if lambda.is_zero() {
                    return Err(self.error_at(lambda_pos, "lambda must be nonzero"));
                }
                self.expect(';')?;
                let f = self.vector(start)?;
                self.expect(')')?;
                Ok(ElementExpr::Resolvent { lambda, f })
            }
            Some('a') if self.eat_keyword("adj") => {
                self.expect('(')?;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(ElementExpr::Adj(Box::new(inner)))
            }
            Some('(') => {
                if let Some(z) = self.try_complex() {
                    return Ok(ElementExpr::Scalar(z));
                }
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(ch) if ch.is_ascii_digit() || ch == '.' => {
                let value = self.number(false)?;
                if self.eat('i') {
                    Ok(ElementExpr::Scalar(QComplex::new(Rational::zero(), value)))
                } else {
                    Ok(ElementExpr::Scalar(QComplex::real(value)))
                }
            }
            Some(_) => Err(self.error(format!("unexpected {:?}", self.rest_preview()))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn note_family(&mut self, family: Family, pos: usize) -> Result<()> {
        match self.family {
            None => {
                self.family = Some((family, pos));
                Ok(())
            }
            Some((seen, _)) if seen == family => Ok(()),
            Some((seen, _)) => {
                Err(self.error_at(pos, format!("cannot mix W and R ({} after {})", family.letter(), seen.letter())))
            }
        }
    }

    fn vector(&mut self, start: usize) -> Result<VecX> {
        let mut coords = vec![self.number(true)?];
        while self.eat(',') {
            coords.push(self.number(true)?);
        }
        if coords.len() != self.arity {
            return Err(self.error_at(start, format!("expected {} coordinates, found {}", self.arity, coords.len())));
        }
        Ok(VecX::new(coords))
    }

    /// A rational literal: integer, `p/q`, or decimal with optional exponent.
    fn number(&mut self, signed: bool) -> Result<Rational> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = self.pos;
        if signed && end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        let body_start = end;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.' || bytes[end] == b'/') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut e = end + 1;
            if e < bytes.len() && (bytes[e] == b'-' || bytes[e] == b'+') {
                e += 1;
            }
            if e < bytes.len() && bytes[e].is_ascii_digit() {
                end = e;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
            }
        }
        if end == body_start {
            return Err(self.error_at(start, "expected a number"));
        }
        let text = &self.src[start..end];
        let value =
            rational::parse_rational(text).map_err(|_| self.error_at(start, format!("invalid number {text:?}")))?;
        self.pos = end;
        Ok(value)
    }

    /// `(x+yi)`, `(x-yi)` or `(yi)`; restores the position on failure.
    fn try_complex(&mut self) -> Option<QComplex> {
        let save = self.pos;
        let attempt = (|| {
            self.expect('(').ok()?;
            let first = self.number(true).ok()?;
            if self.eat('i') {
                self.expect(')').ok()?;
                return Some(QComplex::new(Rational::zero(), first));
            }
            let sign = if self.eat('+') {
                Rational::one()
            } else if self.eat('-') {
                -Rational::one()
            } else {
                return None;
            };
            let second = self.number(false).ok()?;
            if !self.eat('i') {
                return None;
            }
            self.expect(')').ok()?;
            Some(QComplex::new(first, sign * second))
        })();
        if attempt.is_none() {
            self.pos = save;
        }
        attempt
    }
}

fn negate(e: ElementExpr) -> ElementExpr {
    ElementExpr::Mul(Box::new(ElementExpr::Scalar(QComplex::real(-Rational::one()))), Box::new(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn space(d: usize) -> Arc<SymplecticSpace> {
        Arc::new(SymplecticSpace::standard(d).unwrap())
    }

    fn parse(src: &str) -> Result<ElementExpr> {
        parse_element(src, &space(1))
    }

    #[test]
    fn weyl_product_example() {
        let s = space(1);
        let e = parse("W[1,0]*W[0,1]").unwrap();
        assert_eq!(
            e,
            ElementExpr::Mul(
                Box::new(ElementExpr::Weyl(VecX::from_ints(&[1, 0]))),
                Box::new(ElementExpr::Weyl(VecX::from_ints(&[0, 1])))
            )
        );
        let v = e.to_weyl(&s).unwrap();
        let expected =
            WeylElement::generator(&s, VecX::from_ints(&[1, 1])).unwrap().scale(Complex64::from_polar(1.0, -0.5));
        assert!(v.max_coeff_diff(&expected) < 1e-15);
    }

    #[test]
    fn adjoint_example() {
        let s = space(1);
        let v = parse("adj(W[1,0])").unwrap().to_weyl(&s).unwrap();
        let expected = WeylElement::generator(&s, VecX::from_ints(&[-1, 0])).unwrap();
        assert_eq!(v.max_coeff_diff(&expected), 0.0);
    }

    #[test]
    fn errors_carry_positions() {
        match parse("W[1]") {
            Err(Error::Parse { pos: 0, msg }) => assert!(msg.contains("expected 2 coordinates")),
            other => panic!("{other:?}"),
        }
        match parse("W[1,0] + R(1; 1,0)") {
            Err(Error::Parse { pos: 9, msg }) => assert!(msg.contains("cannot mix W and R")),
            other => panic!("{other:?}"),
        }
        match parse("R(0; 1,0)") {
            Err(Error::Parse { pos: 2, msg }) => assert_eq!(msg, "lambda must be nonzero"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("W[1,0] *"), Err(Error::Parse { pos: 8, .. })));
        assert!(matches!(parse("W[1,0])"), Err(Error::Parse { pos: 6, .. })));
        assert!(matches!(parse("W[1,0]^0"), Err(Error::Parse { .. })));
        assert!(matches!(parse("W[1/0,0]"), Err(Error::Parse { pos: 2, .. })));
    }

    #[test]
    fn precedence() {
        let e = parse("W[1,0]+W[0,1]*W[1,1]").unwrap();
        assert!(matches!(&e, ElementExpr::Add(_, b) if matches!(**b, ElementExpr::Mul(..))));
        let s = space(1);
        let a = parse("W[1,0] + (1/2+3i)*W[0,1]").unwrap().to_weyl(&s).unwrap();
        let b = parse("W[2,-1] - W[0,1]^2").unwrap().to_weyl(&s).unwrap();
        let lhs = parse(&format!("adj(({}) * ({}))", "W[1,0] + (1/2+3i)*W[0,1]", "W[2,-1] - W[0,1]^2"))
            .unwrap()
            .to_weyl(&s)
            .unwrap();
        let rhs = b.adjoint().multiply(&a.adjoint()).unwrap();
        assert!(lhs.max_coeff_diff(&rhs) < 1e-12);
    }

    #[test]
    fn scalars_and_complex_literals() {
        assert_eq!(parse("(1/2-3i)").unwrap(), ElementExpr::Scalar(QComplex::new(q("1/2"), q("-3"))));
        assert_eq!(parse("(-2i)").unwrap(), ElementExpr::Scalar(QComplex::new(q("0"), q("-2"))));
        assert_eq!(parse("0.25").unwrap(), ElementExpr::Scalar(QComplex::real(q("1/4"))));
        assert_eq!(parse("3i").unwrap(), ElementExpr::Scalar(QComplex::new(q("0"), q("3"))));
        // a parenthesised sum of scalars is not a complex literal
        assert!(matches!(parse("(1 + W[0,1])").unwrap(), ElementExpr::Add(..)));
    }

    #[test]
    fn resolvent_words() {
        let e = parse("R(1; 1,0) * adj(R(-1/2; 0,1))^2").unwrap();
        assert_eq!(e.family(), Some(Family::Resolvent));
        let w = e.as_word().unwrap();
        assert_eq!(w.factors.len(), 3);
        assert!(w.factors[1].adjoint && w.factors[2].adjoint);
        let back = ElementExpr::from_word(&w).unwrap();
        assert_eq!(back.as_word().unwrap(), w);
        assert!(parse("R(1; 1,0) + 2").unwrap().as_word().is_none());
    }

    #[test]
    fn character_and_fock_agree_on_scalars() {
        let chi = Character::new(VecX::from_ints(&[2, 0]));
        let v = parse("R(1; 1,0)").unwrap().character_value(&chi).unwrap();
        assert_eq!(v, QComplex::new(q("-2/5"), q("-1/5")));
        let rep = FockRep::new(1, 4).unwrap();
        let m = parse("R(2; 0,0) * (2+0i)").unwrap().to_fock(&rep).unwrap();
        assert!(linalg::max_abs_diff(&m, &(linalg::identity(4) * Complex64::new(0.0, -1.0))) < 1e-15);
        assert!(matches!(parse("W[1,0]").unwrap().to_fock(&rep), Err(Error::WrongFamily(_))));
        assert!(matches!(parse("R(1; 1,0)").unwrap().to_weyl(&space(1)), Err(Error::WrongFamily(_))));
    }

    #[test]
    fn split_lists() {
        assert_eq!(
            split_top_level("W[1,0], adj(W[0,1]*W[1,1]) ,R(1; 2,3)"),
            vec!["W[1,0]", "adj(W[0,1]*W[1,1])", "R(1; 2,3)"]
        );
        assert!(split_top_level("").is_empty());
    }

    fn q(s: &str) -> Rational {
        rational::parse_rational(s).unwrap()
    }

    fn arb_rational() -> impl Strategy<Value = Rational> {
        (-20i64..=20, 1i64..=6).prop_map(|(p, d)| Rational::new(p.into(), d.into()))
    }

    fn arb_expr(family: Family) -> impl Strategy<Value = ElementExpr> {
        let vec2 = proptest::collection::vec(arb_rational(), 2).prop_map(VecX::new);
        let gen = match family {
            Family::Weyl => vec2.prop_map(ElementExpr::Weyl).boxed(),
            Family::Resolvent => (arb_rational().prop_filter("nonzero", |l| !l.is_zero()), vec2)
                .prop_map(|(lambda, f)| ElementExpr::Resolvent { lambda, f })
                .boxed(),
        };
        let scalar = (arb_rational(), arb_rational()).prop_map(|(a, b)| ElementExpr::Scalar(QComplex::new(a, b)));
        let leaf = prop_oneof![3 => gen, 1 => scalar];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ElementExpr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ElementExpr::Mul(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| ElementExpr::Adj(Box::new(a))),
                (inner, 1u32..4).prop_map(|(a, n)| ElementExpr::Pow(Box::new(a), n)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in prop_oneof![arb_expr(Family::Weyl), arb_expr(Family::Resolvent)]) {
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
