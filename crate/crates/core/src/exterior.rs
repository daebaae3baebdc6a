//! Elements of the exterior algebra on `e^i_1, e^i_2` (i = 1..k) with
//! polynomial coefficients, and the pairing with the dual algebra.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::poly::{Monomial, MultiPoly, Rational, Var};

/// Index of `e^cut_slot` among the `2k` generators.
pub fn generator_index(cut: u16, slot: u8) -> usize {
    2 * (cut as usize - 1) + (slot as usize - 1)
}

/// `sum_I c_I e_I` where `e_I` is the wedge of the generators in `I`,
/// taken in increasing index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExteriorElement {
    k: usize,
    dual: bool,
    parts: BTreeMap<u64, MultiPoly>,
}

impl ExteriorElement {
    pub fn zero(k: usize, dual: bool) -> Self {
        ExteriorElement { k, dual, parts: BTreeMap::new() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    /// Reads a polynomial whose gluing variables each appear to the first
    /// power and all carry the given `dual` flag.
    pub fn from_polynomial(p: &MultiPoly, k: usize, dual: bool) -> Result<Self> {
        if 2 * k > 64 {
            return Err(Error::Capacity { what: "gluing generators", limit: 64, actual: 2 * k });
        }
        let mut out = Self::zero(k, dual);
        for (m, c) in p.terms() {
            let (glue, rest) = m.split(|v| matches!(v, Var::Glue { .. }));
            let mut mask = 0u64;
            for &(v, e) in glue.powers() {
                let Var::Glue { cut, slot, dual: d } = v else { unreachable!() };
                if d != dual || cut == 0 || cut as usize > k || !(1..=2).contains(&slot) || e != 1 {
                    return Err(Error::Validation(format!("unexpected gluing factor {v}^{e}")));
                }
                mask |= 1 << generator_index(cut, slot);
            }
            out.add(mask, rest, *c);
        }
        Ok(out)
    }

    fn add(&mut self, mask: u64, m: Monomial, c: Rational) {
        let entry = self.parts.entry(mask).or_default();
        entry.add_term(m, c);
        if entry.is_zero() {
            self.parts.remove(&mask);
        }
    }

    pub fn component(&self, mask: u64) -> MultiPoly {
        self.parts.get(&mask).cloned().unwrap_or_default()
    }

    pub fn components(&self) -> impl Iterator<Item = (&u64, &MultiPoly)> {
        self.parts.iter()
    }
}

/// `<w, w*> = sum_I c_I c*_I`: basis elements pair to one with their own
/// duals and to zero otherwise.
pub fn pair(w: &ExteriorElement, w_dual: &ExteriorElement) -> Result<MultiPoly> {
    if w.dual || !w_dual.dual || w.k != w_dual.k {
        return Err(Error::Validation("pairing needs an element and a dual element of equal rank".into()));
    }
    let mut out = MultiPoly::zero();
    for (mask, c) in &w.parts {
        if let Some(d) = w_dual.parts.get(mask) {
            out += &(c * d);
        }
    }
    Ok(out)
}

impl fmt::Display for ExteriorElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "0");
        }
        for (n, (mask, c)) in self.parts.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for g in 0..2 * self.k {
                if mask >> g & 1 == 1 {
                    write!(f, "*e{}_{}", g / 2 + 1, g % 2 + 1)?;
                    if self.dual {
                        write!(f, "*")?;
                    }
                }
            }
        }
        Ok(())
    }
}
