//! Sparse multivariate polynomials with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::Ratio<i128>;

/// A polynomial variable.
///
/// `X(n)` is an edge weight printed as `x<n>`. `Glue` is a generator of the
/// gluing exterior algebra attached to cut vertex `cut` (1-based), printed as
/// `e<cut>_<slot>` with a trailing `*` on the dual side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(u32),
    Glue { cut: u16, slot: u8, dual: bool },
}

impl Var {
    /// Parses `x<n>` (the only form accepted in input files).
    pub fn parse_edge(s: &str) -> Result<Var> {
        let digits = s
            .strip_prefix('x')
            .ok_or_else(|| Error::Parse(format!("variable `{s}` must look like x<n>")))?;
        let n: u32 = digits
            .parse()
            .map_err(|_| Error::Parse(format!("variable `{s}` must look like x<n>")))?;
        Ok(Var::X(n))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::X(n) => write!(f, "x{n}"),
            Var::Glue { cut, slot, dual } => {
                write!(f, "e{cut}_{slot}")?;
                if dual {
                    write!(f, "*")?;
                }
                Ok(())
            }
        }
    }
}

/// A monomial: variables in increasing order with nonzero exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(Var, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_powers<I: IntoIterator<Item = (Var, i32)>>(it: I) -> Self {
        let mut m = BTreeMap::new();
        for (v, e) in it {
            *m.entry(v).or_insert(0) += e;
        }
        Monomial(m.into_iter().filter(|&(_, e)| e != 0).collect())
    }

    pub fn powers(&self) -> &[(Var, i32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, v: Var) -> i32 {
        self.0
            .binary_search_by(|(w, _)| w.cmp(&v))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn has_negative(&self) -> bool {
        self.0.iter().any(|&(_, e)| e < 0)
    }

    pub fn total_degree(&self) -> i64 {
        self.0.iter().map(|&(_, e)| e as i64).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        out.push((a[i].0, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Splits into the part built from `keep` variables and the rest.
    pub fn split<F: Fn(Var) -> bool>(&self, keep: F) -> (Monomial, Monomial) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().partition(|(v, _)| keep(*v));
        (Monomial(a), Monomial(b))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// A finite sum of monomials with nonzero rational coefficients.
///
/// Negative exponents are only allowed when `laurent` is set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MultiPoly {
    terms: BTreeMap<Monomial, Rational>,
    laurent: bool,
}

impl MultiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(Monomial::one(), c)
    }

    pub fn integer(c: i128) -> Self {
        Self::constant(Rational::from_integer(c))
    }

    pub fn var(v: Var) -> Self {
        Self::monomial(Monomial::var(v), Rational::one())
    }

    pub fn monomial(m: Monomial, c: Rational) -> Self {
        let laurent = m.has_negative();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        MultiPoly { terms, laurent }
    }

    /// `v^e`, allowing negative `e`.
    pub fn laurent_power(v: Var, e: i32) -> Self {
        let mut p = Self::monomial(Monomial::from_powers([(v, e)]), Rational::one());
        p.laurent = true;
        p
    }

    pub fn is_laurent(&self) -> bool {
        self.laurent
    }

    pub fn into_laurent(mut self) -> Self {
        self.laurent = true;
        self
    }

    /// Checks the exponent invariant for non-Laurent polynomials.
    pub fn validate(&self) -> Result<()> {
        if !self.laurent && self.terms.keys().any(Monomial::has_negative) {
            return Err(Error::Validation(
                "negative exponent in a non-Laurent polynomial".into(),
            ));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).copied().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        if m.has_negative() {
            self.laurent = true;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = *e.get() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn scale(&self, c: Rational) -> Self {
        if c.is_zero() {
            return MultiPoly { terms: BTreeMap::new(), laurent: self.laurent };
        }
        MultiPoly {
            terms: self.terms.iter().map(|(m, a)| (m.clone(), *a * c)).collect(),
            laurent: self.laurent,
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: Rational) -> Self {
        let mut out = MultiPoly { terms: BTreeMap::new(), laurent: self.laurent };
        for (n, a) in &self.terms {
            out.add_term(n.mul(m), *a * c);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = MultiPoly::one();
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Sum of coefficients, i.e. the value with every variable set to 1.
    pub fn eval_ones(&self) -> Rational {
        self.terms.values().copied().sum()
    }

    /// Numeric evaluation with a caller-supplied value per variable.
    pub fn eval_f64<F: Fn(Var) -> f64>(&self, val: F) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let c = *c.numer() as f64 / *c.denom() as f64;
                m.powers().iter().fold(c, |acc, &(v, e)| acc * val(v).powi(e))
            })
            .sum()
    }

    /// Largest coefficient magnitude; zero for the zero polynomial.
    pub fn max_abs_coeff(&self) -> Rational {
        self.terms.values().map(|c| c.abs()).max().unwrap_or_else(Rational::zero)
    }

    /// Replaces every coefficient by its absolute value.
    pub fn abs_coeffs(&self) -> Self {
        MultiPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.abs())).collect(),
            laurent: self.laurent,
        }
    }

    /// Renames variables monomial by monomial.
    pub fn map_vars<F: Fn(Var) -> Var>(&self, f: F) -> Self {
        let mut out = MultiPoly { terms: BTreeMap::new(), laurent: self.laurent };
        for (m, c) in &self.terms {
            out.add_term(Monomial::from_powers(m.powers().iter().map(|&(v, e)| (f(v), e))), *c);
        }
        out
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            match (m.is_one(), a.is_one()) {
                (true, _) => write!(f, "{a}")?,
                (false, true) => write!(f, "{m}")?,
                (false, false) => write!(f, "{a}*{m}")?,
            }
        }
        Ok(())
    }
}

impl Add<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&MultiPoly> for MultiPoly {
    fn add_assign(&mut self, rhs: &MultiPoly) {
        self.laurent |= rhs.laurent;
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), *c);
        }
    }
}

impl Sub<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        out.laurent |= rhs.laurent;
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -*c);
        }
        out
    }
}

impl Mul<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly { terms: BTreeMap::new(), laurent: self.laurent || rhs.laurent };
        for (a, x) in &self.terms {
            for (b, y) in &rhs.terms {
                out.add_term(a.mul(b), *x * *y);
            }
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(-Rational::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<MultiPoly> for MultiPoly {
            type Output = MultiPoly;
            fn $f(self, rhs: MultiPoly) -> MultiPoly {
                (&self).$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        -&self
    }
}

impl std::iter::Sum for MultiPoly {
    fn sum<I: Iterator<Item = MultiPoly>>(iter: I) -> Self {
        let mut acc = MultiPoly::zero();
        for p in iter {
            acc += &p;
        }
        acc
    }
}
