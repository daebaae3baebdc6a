//! Multigraphs with weighted edges and exhaustive enumeration of even
//! subsets and perfect matchings.

use std::fmt;

use num_traits::One;

use crate::error::{capacity, Error, Result};
use crate::poly::{Monomial, MultiPoly, Rational, Var};

/// Largest edge count accepted by the exhaustive subset scans.
pub const EXHAUSTIVE_EDGE_LIMIT: usize = 24;
/// Largest cycle-space dimension accepted by [`even_subsets`].
pub const CYCLE_SPACE_LIMIT: usize = 24;
/// Search-node budget for [`perfect_matchings`].
pub const MATCHING_NODE_BUDGET: usize = 50_000_000;
/// Edge subsets are stored as bitmasks of this width.
pub const MAX_EDGES: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Weight {
    Var(Var),
    One,
    Zero,
}

impl Weight {
    pub fn monomial(self) -> Option<Monomial> {
        match self {
            Weight::Var(v) => Some(Monomial::var(v)),
            Weight::One => Some(Monomial::one()),
            Weight::Zero => None,
        }
    }

    pub fn var(self) -> Option<Var> {
        match self {
            Weight::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: Weight,
}

impl Edge {
    pub fn new(u: usize, v: usize, weight: Weight) -> Self {
        Edge { u, v, weight }
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    pub fn other(&self, w: usize) -> usize {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Validates endpoints, the edge-count ceiling and that no variable
    /// labels two edges.
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::Validation("graph has no vertices".into()));
        }
        capacity("edge count", MAX_EDGES, edges.len())?;
        let mut seen = std::collections::HashSet::new();
        for (i, e) in edges.iter().enumerate() {
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(Error::Validation(format!(
                    "edge {i} has endpoint outside 0..{vertex_count}"
                )));
            }
            if let Weight::Var(v) = e.weight {
                if !seen.insert(v) {
                    return Err(Error::Validation(format!("variable {v} labels two edges")));
                }
            }
        }
        Ok(Graph { vertex_count, edges })
    }

    /// Edges labelled x1, x2, ... in the given order.
    pub fn from_pairs(vertex_count: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| Edge::new(u, v, Weight::Var(Var::X(i as u32 + 1))))
            .collect();
        Graph::new(vertex_count, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    /// For every vertex, the incident `(edge index, other endpoint)` pairs.
    /// Loops are listed once.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = vec![Vec::new(); self.vertex_count];
        for (i, e) in self.edges.iter().enumerate() {
            inc[e.u].push((i, e.v));
            if !e.is_loop() {
                inc[e.v].push((i, e.u));
            }
        }
        inc
    }

    pub fn full_subset(&self) -> EdgeSubset {
        EdgeSubset::from_indices(self.edge_count(), 0..self.edge_count())
    }

    /// Degree of every vertex in the subset (a loop counts twice).
    pub fn degrees(&self, s: EdgeSubset) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for i in s.iter() {
            let e = &self.edges[i];
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    pub fn is_even(&self, s: EdgeSubset) -> bool {
        self.degrees(s).iter().all(|d| d % 2 == 0)
    }

    pub fn is_perfect_matching(&self, s: EdgeSubset) -> bool {
        s.iter().all(|i| !self.edges[i].is_loop()) && self.degrees(s).iter().all(|&d| d == 1)
    }

    /// Product of edge weights; `None` if some edge has weight zero.
    pub fn weight_monomial(&self, s: EdgeSubset) -> Option<Monomial> {
        let mut m = Monomial::one();
        for i in s.iter() {
            m = m.mul(&self.edges[i].weight.monomial()?);
        }
        Some(m)
    }

    /// Number of connected components (isolated vertices included).
    pub fn component_count(&self) -> usize {
        let mut dsu = Dsu::new(self.vertex_count);
        for e in &self.edges {
            dsu.union(e.u, e.v);
        }
        (0..self.vertex_count).filter(|&v| dsu.find(v) == v).count()
    }

    /// Same graph with all edges of weight 1.
    pub fn unweighted(&self) -> Graph {
        let edges = self.edges.iter().map(|e| Edge::new(e.u, e.v, Weight::One)).collect();
        Graph { vertex_count: self.vertex_count, edges }
    }
}

/// A subset of the edges of a graph, stored as a bitmask over edge indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeSubset {
    bits: u128,
    len: u16,
}

impl EdgeSubset {
    pub fn empty(len: usize) -> Self {
        assert!(len <= MAX_EDGES);
        EdgeSubset { bits: 0, len: len as u16 }
    }

    pub fn from_bits(len: usize, bits: u128) -> Self {
        assert!(len <= MAX_EDGES);
        assert!(len == MAX_EDGES || bits >> len == 0, "bits beyond edge count");
        EdgeSubset { bits, len: len as u16 }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, it: I) -> Self {
        let mut s = Self::empty(len);
        for i in it {
            s.insert(i);
        }
        s
    }

    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn edge_len(&self) -> usize {
        self.len as usize
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len as usize);
        self.bits |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.bits &= !(1 << i);
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn symmetric_difference(&self, other: &EdgeSubset) -> EdgeSubset {
        EdgeSubset { bits: self.bits ^ other.bits, len: self.len }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.bits;
        (0..self.len as usize).filter(move |&i| bits >> i & 1 == 1)
    }
}

impl fmt::Debug for EdgeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Every even subset, by a Gray-code walk over all `2^|E|` subsets.
/// Results are sorted by bitmask.
pub fn enumerate_even_subsets(g: &Graph) -> Result<Vec<EdgeSubset>> {
    let m = g.edge_count();
    capacity("edge count for exhaustive scan", EXHAUSTIVE_EDGE_LIMIT, m)?;
    capacity("vertex count for exhaustive scan", 128, g.vertex_count())?;
    let flips: Vec<u128> = g
        .edges()
        .iter()
        .map(|e| if e.is_loop() { 0 } else { (1u128 << e.u) | (1u128 << e.v) })
        .collect();
    let mut out = Vec::new();
    let (mut bits, mut parity) = (0u128, 0u128);
    out.push(EdgeSubset::from_bits(m, 0));
    for step in 1u64..(1u64 << m) {
        let i = step.trailing_zeros() as usize;
        bits ^= 1 << i;
        parity ^= flips[i];
        if parity == 0 {
            out.push(EdgeSubset::from_bits(m, bits));
        }
    }
    out.sort();
    Ok(out)
}

/// Every even subset, as the span of a fundamental cycle basis.
/// Results are sorted by bitmask.
pub fn even_subsets(g: &Graph) -> Result<Vec<EdgeSubset>> {
    let basis = cycle_basis(g);
    capacity("cycle space dimension", CYCLE_SPACE_LIMIT, basis.len())?;
    let m = g.edge_count();
    let mut out = Vec::with_capacity(1 << basis.len());
    let mut bits = 0u128;
    out.push(EdgeSubset::from_bits(m, 0));
    for step in 1u64..(1u64 << basis.len()) {
        bits ^= basis[step.trailing_zeros() as usize];
        out.push(EdgeSubset::from_bits(m, bits));
    }
    out.sort();
    Ok(out)
}

/// Fundamental cycles of a spanning forest, one per non-forest edge.
pub fn cycle_basis(g: &Graph) -> Vec<u128> {
    let n = g.vertex_count();
    let inc = g.incidence();
    // BFS forest: parent edge and depth per vertex.
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut in_tree = vec![false; g.edge_count()];
    for root in 0..n {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(e, w) in &inc[v] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    parent[w] = Some(e);
                    in_tree[e] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut basis = Vec::new();
    for (i, e) in g.edges().iter().enumerate() {
        if in_tree[i] {
            continue;
        }
        let mut bits = 1u128 << i;
        let (mut a, mut b) = (e.u, e.v);
        while a != b {
            if depth[a] < depth[b] {
                std::mem::swap(&mut a, &mut b);
            }
            let pe = parent[a].expect("non-root vertex has a parent edge");
            bits ^= 1 << pe;
            a = g.edge(pe).other(a);
        }
        basis.push(bits);
    }
    basis
}

/// Every perfect matching, by a Gray-code walk over all `2^|E|` subsets.
/// Results are sorted by bitmask.
pub fn enumerate_matchings(g: &Graph) -> Result<Vec<EdgeSubset>> {
    let m = g.edge_count();
    capacity("edge count for exhaustive scan", EXHAUSTIVE_EDGE_LIMIT, m)?;
    let n = g.vertex_count();
    let mut out = Vec::new();
    if n % 2 == 1 {
        return Ok(out);
    }
    let mut deg = vec![0u32; n];
    // Vertices whose degree differs from 1; loops make a subset invalid.
    let mut bad = n;
    let mut loops = 0usize;
    let mut bits = 0u128;
    for step in 1u64..(1u64 << m) {
        let i = step.trailing_zeros() as usize;
        let adding = bits >> i & 1 == 0;
        bits ^= 1 << i;
        let e = g.edge(i);
        if e.is_loop() {
            if adding {
                loops += 1;
            } else {
                loops -= 1;
            }
        }
        for w in [e.u, e.v].into_iter().filter(|_| !e.is_loop()) {
            let before = deg[w] == 1;
            if adding {
                deg[w] += 1;
            } else {
                deg[w] -= 1;
            }
            let after = deg[w] == 1;
            match (before, after) {
                (true, false) => bad += 1,
                (false, true) => bad -= 1,
                _ => {}
            }
        }
        if bad == 0 && loops == 0 {
            out.push(EdgeSubset::from_bits(m, bits));
        }
    }
    out.sort();
    Ok(out)
}

/// Every perfect matching, by backtracking on the lowest unmatched vertex.
/// Results are sorted by bitmask.
pub fn perfect_matchings(g: &Graph) -> Result<Vec<EdgeSubset>> {
    let n = g.vertex_count();
    let m = g.edge_count();
    let mut out = Vec::new();
    if n % 2 == 1 {
        return Ok(out);
    }
    let inc: Vec<Vec<(usize, usize)>> = g
        .incidence()
        .into_iter()
        .map(|l| l.into_iter().filter(|&(e, _)| !g.edge(e).is_loop()).collect())
        .collect();
    let mut matched = vec![false; n];
    let mut nodes = 0usize;
    fn rec(
        inc: &[Vec<(usize, usize)>],
        matched: &mut [bool],
        bits: u128,
        m: usize,
        nodes: &mut usize,
        out: &mut Vec<EdgeSubset>,
    ) -> Result<()> {
        *nodes += 1;
        capacity("matching search nodes", MATCHING_NODE_BUDGET, *nodes)?;
        let Some(v) = matched.iter().position(|&x| !x) else {
            out.push(EdgeSubset::from_bits(m, bits));
            return Ok(());
        };
        matched[v] = true;
        for &(e, w) in &inc[v] {
            if !matched[w] {
                matched[w] = true;
                rec(inc, matched, bits | 1 << e, m, nodes, out)?;
                matched[w] = false;
            }
        }
        matched[v] = false;
        Ok(())
    }
    rec(&inc, &mut matched, 0, m, &mut nodes, &mut out)?;
    out.sort();
    Ok(out)
}

fn polynomial_of(g: &Graph, subsets: &[EdgeSubset]) -> MultiPoly {
    let mut p = MultiPoly::zero();
    for &s in subsets {
        if let Some(mono) = g.weight_monomial(s) {
            p.add_term(mono, Rational::one());
        }
    }
    p
}

/// Sum over even subsets of the product of their edge weights.
pub fn even_polynomial(g: &Graph) -> Result<MultiPoly> {
    Ok(polynomial_of(g, &even_subsets(g)?))
}

/// Sum over perfect matchings of the product of their edge weights.
pub fn matching_polynomial(g: &Graph) -> Result<MultiPoly> {
    Ok(polynomial_of(g, &perfect_matchings(g)?))
}

/// Weighted sum over an explicit list of subsets.
pub fn subset_polynomial(g: &Graph, subsets: &[EdgeSubset]) -> MultiPoly {
    polynomial_of(g, subsets)
}

pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
