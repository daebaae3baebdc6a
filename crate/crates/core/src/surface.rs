//! Graphs drawn on a disk with `2g` attached bridges, spin structures on the
//! resulting surface and the signs they induce on even subsets.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::graph::{even_subsets, EdgeSubset, Graph};
use crate::linalg::solve_rational;
use crate::poly::{Monomial, MultiPoly, Rational};

pub const MAX_GENUS: usize = 2;

/// A graph together with, for every edge, how often it runs over each
/// bridge. Bridges `2i-1` and `2i` form handle `i`; their core curves give
/// the homology basis `a_i`, `b_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedGraph {
    graph: Graph,
    genus: usize,
    r: Vec<Vec<i64>>,
    rotation: Option<Vec<Vec<usize>>>,
}

impl EmbeddedGraph {
    pub fn new(
        graph: Graph,
        genus: usize,
        r: Vec<Vec<i64>>,
        rotation: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if genus > MAX_GENUS {
            return Err(Error::Validation(format!("genus {genus} exceeds {MAX_GENUS}")));
        }
        if r.len() != graph.edge_count() {
            return Err(Error::Validation(format!(
                "{} crossing vectors for {} edges",
                r.len(),
                graph.edge_count()
            )));
        }
        for (i, v) in r.iter().enumerate() {
            if v.len() != 2 * genus {
                return Err(Error::Validation(format!(
                    "edge {i} has a crossing vector of length {}, expected {}",
                    v.len(),
                    2 * genus
                )));
            }
            if v.iter().any(|&x| x < 0) {
                return Err(Error::Validation(format!("edge {i} has a negative crossing count")));
            }
        }
        if let Some(rot) = &rotation {
            validate_rotation(&graph, rot)?;
        }
        Ok(EmbeddedGraph { graph, genus, r, rotation })
    }

    /// A planar drawing: no bridges, no rotation system.
    pub fn planar(graph: Graph) -> Self {
        let r = vec![Vec::new(); graph.edge_count()];
        EmbeddedGraph { graph, genus: 0, r, rotation: None }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn crossings(&self, edge: usize) -> &[i64] {
        &self.r[edge]
    }

    pub fn rotation(&self) -> Option<&[Vec<usize>]> {
        self.rotation.as_deref()
    }

    /// Total crossing vector of a set of edges.
    pub fn crossing_sum(&self, s: EdgeSubset) -> Vec<i64> {
        let mut out = vec![0; 2 * self.genus];
        for i in s.iter() {
            for (o, x) in out.iter_mut().zip(&self.r[i]) {
                *o += x;
            }
        }
        out
    }

    /// Homology class of an even subset in the `a_1, b_1, a_2, b_2` basis.
    pub fn homology_class(&self, s: EdgeSubset) -> Vec<u8> {
        self.crossing_sum(s).iter().map(|x| x.rem_euclid(2) as u8).collect()
    }
}

fn validate_rotation(g: &Graph, rot: &[Vec<usize>]) -> Result<()> {
    if rot.len() != g.vertex_count() {
        return Err(Error::Validation("rotation system needs one list per vertex".into()));
    }
    let mut expected = vec![Vec::new(); g.vertex_count()];
    for (i, e) in g.edges().iter().enumerate() {
        expected[e.u].push(i);
        expected[e.v].push(i);
    }
    for (v, (mut want, list)) in expected.into_iter().zip(rot).enumerate() {
        let mut have = list.clone();
        want.sort();
        have.sort();
        if want != have {
            return Err(Error::Validation(format!(
                "rotation at vertex {v} is not a cyclic order of its incident edges"
            )));
        }
    }
    Ok(())
}

/// A quadratic form on first homology, determined by its values on the
/// basis: `q(a_i)` is bit `2(i-1)`, `q(b_i)` is bit `2(i-1)+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuadraticForm {
    genus: usize,
    values: u8,
}

impl QuadraticForm {
    pub fn new(genus: usize, values: u8) -> Result<Self> {
        if genus > MAX_GENUS || (values as usize) >= 1 << (2 * genus) {
            return Err(Error::Validation(format!(
                "quadratic form {values:#b} does not fit genus {genus}"
            )));
        }
        Ok(QuadraticForm { genus, values })
    }

    /// From the list `q(a_1), q(b_1), q(a_2), q(b_2), ...`.
    pub fn from_basis_values(vals: &[u8]) -> Result<Self> {
        if vals.len() % 2 != 0 || vals.iter().any(|&v| v > 1) {
            return Err(Error::Validation("basis values must be 2g bits".into()));
        }
        let values = vals.iter().enumerate().fold(0u8, |acc, (i, &v)| acc | v << i);
        QuadraticForm::new(vals.len() / 2, values)
    }

    /// All `4^g` forms in index order.
    pub fn all(genus: usize) -> Vec<QuadraticForm> {
        (0..1u8 << (2 * genus)).map(|values| QuadraticForm { genus, values }).collect()
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn index(&self) -> u8 {
        self.values
    }

    pub fn on_a(&self, i: usize) -> u8 {
        self.values >> (2 * i) & 1
    }

    pub fn on_b(&self, i: usize) -> u8 {
        self.values >> (2 * i + 1) & 1
    }

    pub fn basis_values(&self) -> Vec<u8> {
        (0..2 * self.genus).map(|i| self.values >> i & 1).collect()
    }

    /// The genus-one form seen by handle `i` alone.
    pub fn handle(&self, i: usize) -> QuadraticForm {
        QuadraticForm { genus: 1, values: self.values >> (2 * i) & 0b11 }
    }

    /// Value on a class given by crossing totals (only parities matter).
    pub fn eval(&self, x: &[i64]) -> u8 {
        sign_exponent(x, *self).rem_euclid(2) as u8
    }

    pub fn arf(&self) -> u8 {
        (0..self.genus).map(|i| self.on_a(i) & self.on_b(i)).sum::<u8>() % 2
    }
}

impl fmt::Display for QuadraticForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.genus {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "q(a{})={},q(b{})={}", i + 1, self.on_a(i), i + 1, self.on_b(i))?;
        }
        Ok(())
    }
}

/// `sum_i r_{2i-1} r_{2i} + r_{2i-1} q(a_i) + r_{2i} q(b_i)`.
fn sign_exponent(r: &[i64], q: QuadraticForm) -> i64 {
    (0..q.genus)
        .map(|i| {
            let (x, y) = (r[2 * i], r[2 * i + 1]);
            x * y + x * q.on_a(i) as i64 + y * q.on_b(i) as i64
        })
        .sum()
}

/// Mod-2 intersection number of two classes.
pub fn intersection(x: &[u8], y: &[u8]) -> u8 {
    x.chunks(2).zip(y.chunks(2)).map(|(a, b)| a[0] & b[1] ^ a[1] & b[0]).fold(0, |s, t| s ^ t)
}

/// The sign `(-1)^q([s])` of an even subset, read off the bridge crossings.
pub fn even_subset_sign(eg: &EmbeddedGraph, s: EdgeSubset, q: QuadraticForm) -> Result<i8> {
    if q.genus != eg.genus {
        return Err(Error::Validation(format!(
            "form of genus {} on a surface of genus {}",
            q.genus, eg.genus
        )));
    }
    if !eg.graph.is_even(s) {
        return Err(Error::Validation(format!("{s:?} is not an even subset")));
    }
    Ok(if sign_exponent(&eg.crossing_sum(s), q) % 2 == 0 { 1 } else { -1 })
}

/// `sum over even E' of (-1)^q([E']) x^E'`.
pub fn signed_even_polynomial(eg: &EmbeddedGraph, q: QuadraticForm) -> Result<MultiPoly> {
    let mut p = MultiPoly::zero();
    for s in even_subsets(&eg.graph)? {
        if let Some(m) = eg.graph.weight_monomial(s) {
            p.add_term(m, Rational::from_integer(even_subset_sign(eg, s, q)? as i128));
        }
    }
    Ok(p)
}

/// `c(M) = sum_i r_{2i-1}(M) r_{2i}(M)`, the crossing number of the drawing of `M`.
pub fn crossing_count(eg: &EmbeddedGraph, m: EdgeSubset) -> i64 {
    let r = eg.crossing_sum(m);
    r.chunks(2).map(|h| h[0] * h[1]).sum()
}

/// Outcome of reconstructing the unsigned even polynomial from the signed ones.
#[derive(Clone, Debug)]
pub struct ArfReconstruction {
    /// Coefficient of every form's signed polynomial.
    pub coefficients: Vec<(QuadraticForm, Rational)>,
    /// Whether the coefficients are `(-1)^Arf(q) / 2^g`.
    pub canonical: bool,
}

/// Checks `E_G = 2^-g sum_q (-1)^Arf(q) E_{G,q}`. If that fails, solves for
/// whatever coefficients do reproduce `E_G` and reports them.
pub fn arf_reconstruction_check(eg: &EmbeddedGraph) -> Result<ArfReconstruction> {
    let forms = QuadraticForm::all(eg.genus);
    let signed: Vec<MultiPoly> =
        forms.iter().map(|&q| signed_even_polynomial(eg, q)).collect::<Result<_>>()?;
    let target = crate::graph::even_polynomial(&eg.graph)?;
    let denom = Rational::from_integer(1 << eg.genus);
    let canonical: Vec<Rational> = forms
        .iter()
        .map(|q| if q.arf() == 0 { Rational::one() } else { -Rational::one() } / denom)
        .collect();
    let combo = |c: &[Rational]| -> MultiPoly {
        signed.iter().zip(c).map(|(p, &k)| p.scale(k)).sum()
    };
    if combo(&canonical) == target {
        return Ok(ArfReconstruction {
            coefficients: forms.into_iter().zip(canonical).collect(),
            canonical: true,
        });
    }
    let mut rows: BTreeMap<Monomial, Vec<Rational>> = BTreeMap::new();
    for (j, p) in signed.iter().enumerate() {
        for (m, c) in p.terms() {
            rows.entry(m.clone()).or_insert_with(|| vec![Rational::zero(); forms.len()])[j] = *c;
        }
    }
    for (m, _) in target.terms() {
        rows.entry(m.clone()).or_insert_with(|| vec![Rational::zero(); forms.len()]);
    }
    let b: Vec<Rational> = rows.keys().map(|m| target.coeff(m)).collect();
    let a: Vec<Vec<Rational>> = rows.into_values().collect();
    let c = solve_rational(a, b).ok_or_else(|| {
        Error::Inconsistent("no linear combination of signed polynomials gives E_G".into())
    })?;
    Ok(ArfReconstruction { coefficients: forms.into_iter().zip(c).collect(), canonical: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two loops at one vertex, one around each cycle of a torus.
    fn bouquet() -> EmbeddedGraph {
        let g = Graph::from_pairs(1, &[(0, 0), (0, 0)]).unwrap();
        EmbeddedGraph::new(g, 1, vec![vec![1, 0], vec![0, 1]], None).unwrap()
    }

    #[test]
    fn arf_values() {
        let arfs: Vec<u8> = QuadraticForm::all(1).iter().map(QuadraticForm::arf).collect();
        assert_eq!(arfs, vec![0, 0, 0, 1]);
        let q = QuadraticForm::from_basis_values(&[1, 1, 1, 1]).unwrap();
        assert_eq!(q.arf(), 0);
        let q = QuadraticForm::from_basis_values(&[1, 1, 0, 1]).unwrap();
        assert_eq!(q.arf(), 1);
    }

    #[test]
    fn form_is_quadratic_refinement() {
        for q in QuadraticForm::all(2) {
            for x in 0..16u8 {
                for y in 0..16u8 {
                    let xv: Vec<u8> = (0..4).map(|i| x >> i & 1).collect();
                    let yv: Vec<u8> = (0..4).map(|i| y >> i & 1).collect();
                    let s: Vec<i64> = xv.iter().zip(&yv).map(|(a, b)| (a ^ b) as i64).collect();
                    let xi: Vec<i64> = xv.iter().map(|&a| a as i64).collect();
                    let yi: Vec<i64> = yv.iter().map(|&a| a as i64).collect();
                    assert_eq!(q.eval(&s), q.eval(&xi) ^ q.eval(&yi) ^ intersection(&xv, &yv));
                }
            }
        }
    }

    #[test]
    fn bouquet_signs() {
        let eg = bouquet();
        // Subsets: {}, {a}, {b}, {a,b}. The last has sign (-1)^(1 + q(a) + q(b)).
        let q = QuadraticForm::from_basis_values(&[0, 0]).unwrap();
        let p = signed_even_polynomial(&eg, q).unwrap();
        assert_eq!(p.to_string(), "1 + x1 - x1*x2 + x2");
        let q = QuadraticForm::from_basis_values(&[1, 1]).unwrap();
        let p = signed_even_polynomial(&eg, q).unwrap();
        assert_eq!(p.to_string(), "1 - x1 - x1*x2 - x2");
    }

    #[test]
    fn bouquet_reconstruction_is_canonical() {
        let r = arf_reconstruction_check(&bouquet()).unwrap();
        assert!(r.canonical);
        assert_eq!(r.coefficients[3].1, Rational::new(-1, 2));
    }

    #[test]
    fn odd_subset_rejected() {
        let g = Graph::from_pairs(2, &[(0, 1)]).unwrap();
        let eg = EmbeddedGraph::planar(g);
        let q = QuadraticForm::new(0, 0).unwrap();
        assert!(even_subset_sign(&eg, EdgeSubset::from_indices(1, [0]), q).is_err());
    }

    #[test]
    fn rotation_must_cover_incident_edges() {
        let g = Graph::from_pairs(2, &[(0, 1)]).unwrap();
        assert!(EmbeddedGraph::new(g.clone(), 0, vec![vec![]], Some(vec![vec![0], vec![]])).is_err());
        assert!(EmbeddedGraph::new(g, 0, vec![vec![]], Some(vec![vec![0], vec![0]])).is_ok());
    }
}
