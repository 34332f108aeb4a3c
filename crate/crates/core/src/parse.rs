//! Polynomial expression parser.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | '+' unary | power
//! power  := atom ('^' UINT)?
//! atom   := UINT | VAR | 'i' | '(' expr ')'
//! ```
//!
//! Variables are `x1..xN` in real mode and `z1..zN` in complex mode. A
//! rational literal such as `1/2` is the quotient of two integer atoms; the
//! divisor of `/` must evaluate to a nonzero constant.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Coeff, ComplexRational, MultiPoly, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn var_prefix(self) -> &'static str {
        match self {
            Field::Real => "x",
            Field::Complex => "z",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(Error::InvalidArgument(format!("unknown field `{other}`"))),
        }
    }
}

/// A parsed polynomial of either field.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyPoly {
    Real(MultiPoly<Rational>),
    Complex(MultiPoly<ComplexRational>),
}

impl AnyPoly {
    pub fn nvars(&self) -> usize {
        match self {
            AnyPoly::Real(p) => p.nvars(),
            AnyPoly::Complex(p) => p.nvars(),
        }
    }

    pub fn field(&self) -> Field {
        match self {
            AnyPoly::Real(_) => Field::Real,
            AnyPoly::Complex(_) => Field::Complex,
        }
    }

    pub fn render(&self) -> String {
        match self {
            AnyPoly::Real(p) => p.render("x"),
            AnyPoly::Complex(p) => p.render("z"),
        }
    }
}

pub fn parse_poly(src: &str, nvars: usize, field: Field) -> Result<AnyPoly> {
    match field {
        Field::Real => parse_real(src, nvars).map(AnyPoly::Real),
        Field::Complex => parse_complex(src, nvars).map(AnyPoly::Complex),
    }
}

pub fn parse_real(src: &str, nvars: usize) -> Result<MultiPoly<Rational>> {
    Parser::<Rational>::new(src, nvars, "x")?.parse_all()
}

pub fn parse_complex(src: &str, nvars: usize) -> Result<MultiPoly<ComplexRational>> {
    Parser::<ComplexRational>::new(src, nvars, "z")?.parse_all()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        if c.is_whitespace() {
            k += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, pos));
            k += 1;
        } else if c.is_ascii_digit() {
            let start = k;
            while k < chars.len() && chars[k].1.is_ascii_digit() {
                k += 1;
            }
            let digits: String = chars[start..k].iter().map(|&(_, c)| c).collect();
            out.push((Tok::Int(digits.parse().expect("ascii digits")), pos));
        } else if c.is_ascii_alphabetic() {
            let start = k;
            while k < chars.len() && chars[k].1.is_ascii_alphanumeric() {
                k += 1;
            }
            let name: String = chars[start..k].iter().map(|&(_, c)| c).collect();
            out.push((Tok::Ident(name), pos));
        } else {
            return Err(Error::Syntax {
                pos,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<C> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    nvars: usize,
    prefix: &'static str,
    _c: std::marker::PhantomData<C>,
}

impl<C: Coeff> Parser<C> {
    fn new(src: &str, nvars: usize, prefix: &'static str) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::InvalidArgument("nvars must be positive".into()));
        }
        Ok(Self {
            toks: tokenize(src)?,
            at: 0,
            nvars,
            prefix,
            _c: std::marker::PhantomData,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn parse_all(mut self) -> Result<MultiPoly<C>> {
        let p = self.expr()?;
        match self.peek() {
            Tok::End => Ok(p),
            _ => Err(Error::Syntax {
                pos: self.pos(),
                msg: "unexpected trailing input".into(),
            }),
        }
    }

    fn expr(&mut self) -> Result<MultiPoly<C>> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<MultiPoly<C>> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = &acc * &self.unary()?;
                }
                Tok::Slash => {
                    let (_, pos) = self.bump();
                    let d = self.unary()?;
                    if !d.is_constant() || d.is_zero() {
                        return Err(Error::BadDivision { pos });
                    }
                    acc = divide_by_constant(&acc, &d.constant_term()).ok_or(Error::BadDivision { pos })?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<MultiPoly<C>> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(-self.unary()?)
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<MultiPoly<C>> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        let (_, caret_pos) = self.bump();
        match self.bump() {
            (Tok::Int(k), pos) => {
                let k: u32 = k.try_into().map_err(|_| Error::NonConstantExponent { pos })?;
                Ok(base.pow(k))
            }
            (Tok::End, _) => Err(Error::Syntax {
                pos: caret_pos,
                msg: "expected exponent after `^`".into(),
            }),
            (_, pos) => Err(Error::NonConstantExponent { pos }),
        }
    }

    fn atom(&mut self) -> Result<MultiPoly<C>> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Int(v) => Ok(MultiPoly::constant(self.nvars, C::from_rational(Rational::from_integer(v)))),
            Tok::Ident(name) => self.variable(&name, pos),
            Tok::LParen => {
                let inner = self.expr()?;
                match self.bump() {
                    (Tok::RParen, _) => Ok(inner),
                    (_, p) => Err(Error::Syntax {
                        pos: p,
                        msg: "expected `)`".into(),
                    }),
                }
            }
            Tok::End => Err(Error::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                pos,
                msg: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<MultiPoly<C>> {
        if name == "i" {
            return C::imaginary_unit()
                .map(|u| MultiPoly::constant(self.nvars, u))
                .ok_or_else(|| Error::UnknownVariable {
                    name: name.into(),
                    pos,
                });
        }
        if name == self.prefix && self.nvars == 1 {
            return Ok(MultiPoly::var(1, 0));
        }
        let idx = name
            .strip_prefix(self.prefix)
            .and_then(|rest| {
                if rest.starts_with('0') {
                    None
                } else {
                    rest.parse::<usize>().ok()
                }
            })
            .filter(|&i| i >= 1 && i <= self.nvars);
        match idx {
            Some(i) => Ok(MultiPoly::var(self.nvars, i - 1)),
            None => Err(Error::UnknownVariable {
                name: name.into(),
                pos,
            }),
        }
    }
}

fn divide_by_constant<C: Coeff>(p: &MultiPoly<C>, d: &C) -> Option<MultiPoly<C>> {
    d.inverse().map(|inv| p.scale(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q, qi};

    #[test]
    fn half_square() {
        let p = parse_real("x1^2/2", 1).unwrap();
        assert_eq!(p, MultiPoly::var(1, 0).pow(2).div_rational(&qi(2)));
        assert_eq!(p.coeff(&[2]), q(1, 2));
    }

    #[test]
    fn sum_of_cubes() {
        let p = parse_complex("z1^3+z2^3", 2).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.terms().all(|(_, c)| *c == ComplexRational::new(qi(1), qi(0))));
    }

    #[test]
    fn dangling_caret() {
        let src = "x1*x2 + x1^";
        match parse_real(src, 2) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, src.len() - 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(parse_real("x3", 2), Err(Error::UnknownVariable { pos: 0, .. })));
        assert!(matches!(parse_real("x1^x2", 2), Err(Error::NonConstantExponent { pos: 3 })));
        assert!(matches!(parse_real("z1", 1), Err(Error::UnknownVariable { .. })));
        assert!(matches!(parse_real("x", 2), Err(Error::UnknownVariable { .. })));
        assert_eq!(parse_real("x^2/2", 1).unwrap(), parse_real("x1^2/2", 1).unwrap());
        assert!(matches!(parse_real("i*x1", 1), Err(Error::UnknownVariable { .. })));
        assert!(matches!(parse_real("x1/x1", 1), Err(Error::BadDivision { .. })));
        assert!(matches!(parse_real("x1/0", 1), Err(Error::BadDivision { .. })));
        assert!(matches!(parse_real("(x1", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse_real("x1 $", 1), Err(Error::Syntax { pos: 3, .. })));
        assert!(matches!(parse_real("x1 x1", 1), Err(Error::Syntax { .. })));
    }

    #[test]
    fn complex_literals() {
        let p = parse_complex("(1+2*i)*z1 + i/2", 1).unwrap();
        assert_eq!(p.coeff(&[1]), ComplexRational::new(qi(1), qi(2)));
        assert_eq!(p.constant_term(), ComplexRational::new(qi(0), q(1, 2)));
        let r = parse_complex("z1/(1+i)", 1).unwrap();
        assert_eq!(r.coeff(&[1]), ComplexRational::new(q(1, 2), q(-1, 2)));
    }

    #[test]
    fn expansion_and_unary_minus() {
        let p = parse_real("-(x1 - x2)^2 + 2*x1*x2", 2).unwrap();
        let expect = parse_real("-x1^2 - x2^2 + 4*x1*x2", 2).unwrap();
        assert_eq!(p, expect);
    }

    #[test]
    fn print_parse_idempotent_on_examples() {
        for (src, n) in [("x1^2/2", 1), ("x1^3/3 - 7/5*x1*x2 + 3", 2), ("-x1", 1), ("0", 1)] {
            let p = parse_real(src, n).unwrap();
            let again = parse_real(&p.render("x"), n).unwrap();
            assert_eq!(p, again, "{src}");
        }
        for (src, n) in [("z1^3+z2^3", 2), ("(2-i)*z1^2 - i*z1 + 1/3", 1)] {
            let p = parse_complex(src, n).unwrap();
            let again = parse_complex(&p.render("z"), n).unwrap();
            assert_eq!(p, again, "{src}");
        }
    }
}
