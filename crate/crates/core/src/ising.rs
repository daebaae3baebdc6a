//! Ising partition functions and the high-temperature expansion in terms
//! of even subsets.

use std::collections::HashMap;

use num_traits::Zero;

use crate::error::{capacity, Error, Result};
use crate::graph::{even_subsets, Graph, Weight};
use crate::poly::{Monomial, MultiPoly, Rational, Var};

/// Largest vertex count for the spin-configuration sum.
pub const ISING_VERTEX_LIMIT: usize = 20;
/// Largest edge count for the expanded high-temperature side.
pub const VDW_EDGE_LIMIT: usize = 20;

fn edge_vars(g: &Graph) -> Result<Vec<Var>> {
    g.edges()
        .iter()
        .enumerate()
        .map(|(i, e)| match e.weight {
            Weight::Var(v) => Ok(v),
            _ => Err(Error::Validation(format!(
                "edge {i} needs a variable weight for the Ising model"
            ))),
        })
        .collect()
}

/// `prod_{e not in T} x_e * prod_{e in T} x_e^-1`.
fn flipped_monomial(vars: &[Var], t: u128) -> Monomial {
    Monomial::from_powers(
        vars.iter().enumerate().map(|(i, &v)| (v, if t >> i & 1 == 1 { -1 } else { 1 })),
    )
}

fn laurent_from_counts(vars: &[Var], counts: &HashMap<u128, i128>, scale: Rational) -> MultiPoly {
    let mut p = MultiPoly::zero().into_laurent();
    for (&t, &c) in counts {
        if c != 0 {
            p.add_term(flipped_monomial(vars, t), Rational::from_integer(c) * scale);
        }
    }
    p
}

/// `Z = sum over spins of prod_e x_e^(s_u s_v)`, as a Laurent polynomial.
pub fn ising_partition_direct(g: &Graph) -> Result<MultiPoly> {
    let n = g.vertex_count();
    capacity("vertex count for spin sum", ISING_VERTEX_LIMIT, n)?;
    let vars = edge_vars(g)?;
    let masks: Vec<(u64, u64)> = g.edges().iter().map(|e| (1 << e.u, 1 << e.v)).collect();
    let mut counts: HashMap<u128, i128> = HashMap::new();
    for spins in 0u64..(1u64 << n) {
        let mut t = 0u128;
        for (i, &(a, b)) in masks.iter().enumerate() {
            if (spins & a != 0) != (spins & b != 0) {
                t |= 1 << i;
            }
        }
        *counts.entry(t).or_insert(0) += 1;
    }
    Ok(laurent_from_counts(&vars, &counts, Rational::from_integer(1)))
}

/// Both sides of the high-temperature identity, denominators cleared.
#[derive(Clone, Debug)]
pub struct VdwCheck {
    /// The spin sum.
    pub lhs: MultiPoly,
    /// `2^(|V|-|E|) sum_{E' even} prod_{E'} (x - 1/x) prod_{E \ E'} (x + 1/x)`.
    pub rhs: MultiPoly,
}

impl VdwCheck {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }

    pub fn difference(&self) -> MultiPoly {
        &self.lhs - &self.rhs
    }
}

/// Expands the even-subset side term by term and compares it with the spin sum.
pub fn van_der_waerden_check(g: &Graph) -> Result<VdwCheck> {
    let m = g.edge_count();
    capacity("edge count for expansion", VDW_EDGE_LIMIT, m)?;
    let vars = edge_vars(g)?;
    let lhs = ising_partition_direct(g)?;
    let evens = even_subsets(g)?;
    // Each product of binomials is expanded over T, the edges contributing 1/x.
    let mut coeff = vec![0i128; 1 << m];
    for s in &evens {
        let bits = s.bits() as u64;
        for (t, c) in coeff.iter_mut().enumerate() {
            if (t as u64 & bits).count_ones() % 2 == 0 {
                *c += 1;
            } else {
                *c -= 1;
            }
        }
    }
    let counts: HashMap<u128, i128> = coeff
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c != 0)
        .map(|(t, c)| (t as u128, c))
        .collect();
    let exp = g.vertex_count() as i32 - m as i32;
    let scale = if exp >= 0 {
        Rational::from_integer(1i128 << exp)
    } else {
        Rational::new(1, 1i128 << (-exp))
    };
    let rhs = laurent_from_counts(&vars, &counts, scale);
    debug_assert!(!scale.is_zero());
    Ok(VdwCheck { lhs, rhs })
}
