//! Skew-symmetric adjacency matrices, exact and floating-point Pfaffians,
//! and the sign each perfect matching receives in the Pfaffian expansion.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{capacity, Error, Result};
use crate::graph::{perfect_matchings, EdgeSubset, Graph};
use crate::poly::{MultiPoly, Rational};

/// Largest matrix order for [`pfaffian_exact`].
pub const PFAFFIAN_EXACT_LIMIT: usize = 64;
/// Search-node budget for [`pfaffian_exact`].
pub const PFAFFIAN_NODE_BUDGET: usize = 20_000_000;
/// Largest matrix order for [`determinant_exact`].
pub const DETERMINANT_EXACT_LIMIT: usize = 16;

/// A direction for every edge: `true` means from `u` to `v` as stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Orientation(pub Vec<bool>);

impl Orientation {
    /// Every edge points from its smaller endpoint to its larger one.
    pub fn increasing(g: &Graph) -> Self {
        Orientation(g.edges().iter().map(|e| e.u <= e.v).collect())
    }

    pub fn from_bits(g: &Graph, bits: u128) -> Self {
        let base = Self::increasing(g);
        Orientation(base.0.iter().enumerate().map(|(i, &f)| f ^ (bits >> i & 1 == 1)).collect())
    }

    pub fn tail_head(&self, g: &Graph, e: usize) -> (usize, usize) {
        let ed = g.edge(e);
        if self.0[e] {
            (ed.u, ed.v)
        } else {
            (ed.v, ed.u)
        }
    }

    pub fn reverse(&mut self, e: usize) {
        self.0[e] = !self.0[e];
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub trait SkewEntry: Clone + PartialEq {
    fn zero_entry() -> Self;
    fn is_zero_entry(&self) -> bool;
    fn negate(&self) -> Self;
    fn add(&self, other: &Self) -> Self;
}

impl SkewEntry for MultiPoly {
    fn zero_entry() -> Self {
        MultiPoly::zero()
    }
    fn is_zero_entry(&self) -> bool {
        self.is_zero()
    }
    fn negate(&self) -> Self {
        -self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
}

impl SkewEntry for Complex64 {
    fn zero_entry() -> Self {
        Complex64::zero()
    }
    fn is_zero_entry(&self) -> bool {
        *self == Complex64::zero()
    }
    fn negate(&self) -> Self {
        -*self
    }
    fn add(&self, other: &Self) -> Self {
        *self + *other
    }
}

/// A skew-symmetric matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: SkewEntry> SkewMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SkewMatrix { n, a: vec![T::zero_entry(); n * n] }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.a[i * self.n + j]
    }

    /// Sets `a[i][j] = v` and `a[j][i] = -v`.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert_ne!(i, j, "diagonal of a skew matrix is zero");
        self.a[j * self.n + i] = v.negate();
        self.a[i * self.n + j] = v;
    }

    /// Adds `v` to `a[i][j]` and `-v` to `a[j][i]`.
    pub fn add_to(&mut self, i: usize, j: usize, v: &T) {
        let cur = self.get(i, j).add(v);
        self.set(i, j, cur);
    }

    /// `b[i][j] = a[p[i]][p[j]]`.
    pub fn permuted(&self, p: &[usize]) -> Self {
        let mut b = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                b.a[i * self.n + j] = self.get(p[i], p[j]).clone();
            }
        }
        b
    }
}

impl SkewMatrix<Complex64> {
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| *self.get(i, j))
    }
}

/// Skew adjacency matrix of a directed graph with vertices placed in the
/// given order: `order[k]` is the vertex in row `k`. Loops are dropped.
pub fn skew_adjacency_ordered(
    g: &Graph,
    d: &Orientation,
    order: &[usize],
) -> Result<SkewMatrix<MultiPoly>> {
    check_orientation(g, d)?;
    let pos = positions(g.vertex_count(), order)?;
    let mut m = SkewMatrix::zeros(g.vertex_count());
    for (i, e) in g.edges().iter().enumerate() {
        if e.is_loop() {
            continue;
        }
        let Some(mono) = e.weight.monomial() else { continue };
        let (t, h) = d.tail_head(g, i);
        m.add_to(pos[t], pos[h], &MultiPoly::monomial(mono, Rational::one()));
    }
    Ok(m)
}

/// Skew adjacency matrix in the natural vertex order.
pub fn skew_adjacency(g: &Graph, d: &Orientation) -> Result<SkewMatrix<MultiPoly>> {
    let order: Vec<usize> = (0..g.vertex_count()).collect();
    skew_adjacency_ordered(g, d, &order)
}

fn check_orientation(g: &Graph, d: &Orientation) -> Result<()> {
    if d.len() != g.edge_count() {
        return Err(Error::Validation(format!(
            "orientation has {} entries for {} edges",
            d.len(),
            g.edge_count()
        )));
    }
    Ok(())
}

/// Inverse of a vertex order, validated as a permutation.
pub fn positions(n: usize, order: &[usize]) -> Result<Vec<usize>> {
    let mut pos = vec![usize::MAX; n];
    if order.len() != n {
        return Err(Error::Validation("vertex order must list every vertex once".into()));
    }
    for (k, &v) in order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return Err(Error::Validation("vertex order must list every vertex once".into()));
        }
        pos[v] = k;
    }
    Ok(pos)
}

/// Pfaffian by expansion along the first remaining row.
pub fn pfaffian_exact(m: &SkewMatrix<MultiPoly>) -> Result<MultiPoly> {
    let n = m.order();
    capacity("matrix order for exact Pfaffian", PFAFFIAN_EXACT_LIMIT, n)?;
    if n % 2 == 1 {
        return Ok(MultiPoly::zero());
    }
    let nbrs: Vec<Vec<usize>> =
        (0..n).map(|i| (i + 1..n).filter(|&j| !m.get(i, j).is_zero()).collect()).collect();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut nodes = 0usize;
    fn rec(
        m: &SkewMatrix<MultiPoly>,
        nbrs: &[Vec<usize>],
        remaining: u64,
        acc: &MultiPoly,
        nodes: &mut usize,
        out: &mut MultiPoly,
    ) -> Result<()> {
        *nodes += 1;
        capacity("Pfaffian expansion nodes", PFAFFIAN_NODE_BUDGET, *nodes)?;
        if remaining == 0 {
            *out += acc;
            return Ok(());
        }
        let i = remaining.trailing_zeros() as usize;
        let rest = remaining & !(1 << i);
        for &j in &nbrs[i] {
            if rest >> j & 1 == 0 {
                continue;
            }
            let between = (rest & ((1u64 << j) - 1)).count_ones();
            let mut next = acc * m.get(i, j);
            if between % 2 == 1 {
                next = -next;
            }
            rec(m, nbrs, rest & !(1 << j), &next, nodes, out)?;
        }
        Ok(())
    }
    let mut out = MultiPoly::zero();
    rec(m, &nbrs, full, &MultiPoly::one(), &mut nodes, &mut out)?;
    Ok(out)
}

/// Determinant by dynamic programming over column subsets.
pub fn determinant_exact(m: &SkewMatrix<MultiPoly>) -> Result<MultiPoly> {
    let n = m.order();
    capacity("matrix order for exact determinant", DETERMINANT_EXACT_LIMIT, n)?;
    let mut dp: Vec<MultiPoly> = vec![MultiPoly::zero(); 1 << n];
    dp[0] = MultiPoly::one();
    for mask in 0usize..(1 << n) {
        if dp[mask].is_zero() {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == n {
            continue;
        }
        let cur = dp[mask].clone();
        for c in 0..n {
            if mask >> c & 1 == 1 || m.get(row, c).is_zero() {
                continue;
            }
            let inversions = (mask >> c).count_ones();
            let mut t = &cur * m.get(row, c);
            if inversions % 2 == 1 {
                t = -t;
            }
            dp[mask | 1 << c] += &t;
        }
    }
    Ok(dp.pop().expect("table is nonempty"))
}

/// Pfaffian of a dense complex skew matrix by Parlett-Reid elimination
/// with partial pivoting.
pub fn pfaffian_numeric(a: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Validation("matrix is not square".into()));
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..n {
            if (a[(i, j)] + a[(j, i)]).norm() > 1e-12 * scale.max(1.0) {
                return Err(Error::Validation(format!("matrix is not skew at ({i},{j})")));
            }
        }
    }
    if n % 2 == 1 {
        return Ok(Complex64::zero());
    }
    let mut a = a.clone();
    let mut pf = Complex64::one();
    let tiny = f64::EPSILON * scale;
    for k in (0..n - 1).step_by(2) {
        let kp = (k + 1..n)
            .max_by(|&x, &y| a[(x, k)].norm().total_cmp(&a[(y, k)].norm()))
            .expect("nonempty pivot range");
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        if piv.norm() <= tiny {
            return Ok(Complex64::zero());
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<Complex64> = (k + 2..n).map(|j| a[(k, j)] / piv).collect();
            let col: Vec<Complex64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}

/// Determinant by LU decomposition.
pub fn determinant_numeric(a: &DMatrix<Complex64>) -> Complex64 {
    a.clone().lu().determinant()
}

/// The sign of the term of `M` in the Pfaffian of `A(G, D)` with rows in
/// the given vertex order.
pub fn matching_sign(g: &Graph, m: EdgeSubset, d: &Orientation, order: &[usize]) -> Result<i8> {
    check_orientation(g, d)?;
    if !g.is_perfect_matching(m) {
        return Err(Error::Validation(format!("{m:?} is not a perfect matching")));
    }
    let pos = positions(g.vertex_count(), order)?;
    let mut arcs = Vec::with_capacity(m.count());
    let mut sign = 1i8;
    for e in m.iter() {
        let (t, h) = d.tail_head(g, e);
        let (pt, ph) = (pos[t], pos[h]);
        if pt > ph {
            sign = -sign;
        }
        arcs.push((pt.min(ph), pt.max(ph)));
    }
    if crossing_parity(&arcs) {
        sign = -sign;
    }
    Ok(sign)
}

/// Parity of the number of crossing pairs of chords `(a, b)`, `a < b`.
pub fn crossing_parity(arcs: &[(usize, usize)]) -> bool {
    let mut odd = false;
    for (i, &(a, b)) in arcs.iter().enumerate() {
        for &(c, d) in &arcs[i + 1..] {
            if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                odd = !odd;
            }
        }
    }
    odd
}

/// Signed matching polynomial `sum_M sign(M, D) x^M` computed from matching
/// signs rather than from a Pfaffian.
pub fn signed_matching_polynomial(
    g: &Graph,
    d: &Orientation,
    order: &[usize],
) -> Result<MultiPoly> {
    let mut p = MultiPoly::zero();
    for m in perfect_matchings(g)? {
        if let Some(mono) = g.weight_monomial(m) {
            p.add_term(mono, Rational::from_integer(matching_sign(g, m, d, order)? as i128));
        }
    }
    Ok(p)
}

/// Number of cycles of `M xor N` along which an even number of edges
/// agree with a traversal direction.
pub fn d_even_cycles(g: &Graph, m: EdgeSubset, n: EdgeSubset, d: &Orientation) -> usize {
    let diff = m.symmetric_difference(&n);
    let mut partner_m = vec![usize::MAX; g.vertex_count()];
    let mut partner_n = vec![usize::MAX; g.vertex_count()];
    for e in diff.iter() {
        let ed = g.edge(e);
        let slot = if m.contains(e) { &mut partner_m } else { &mut partner_n };
        slot[ed.u] = e;
        slot[ed.v] = e;
    }
    let mut seen = vec![false; g.edge_count()];
    let mut count = 0;
    for start in diff.iter() {
        if seen[start] {
            continue;
        }
        let mut v = g.edge(start).u;
        let mut e = start;
        let mut agree = 0;
        loop {
            seen[e] = true;
            let (t, _) = d.tail_head(g, e);
            if t == v {
                agree += 1;
            }
            v = g.edge(e).other(v);
            e = if m.contains(e) { partner_n[v] } else { partner_m[v] };
            if e == start {
                break;
            }
        }
        if agree % 2 == 0 {
            count += 1;
        }
    }
    count
}

/// Checks `sign(M) sign(N) = (-1)^(number of D-even cycles of M xor N)` for
/// every pair of perfect matchings.
pub fn even_cycle_law_check(g: &Graph, d: &Orientation) -> Result<bool> {
    check_orientation(g, d)?;
    let order: Vec<usize> = (0..g.vertex_count()).collect();
    let ms = perfect_matchings(g)?;
    let signs: Vec<i8> =
        ms.iter().map(|&m| matching_sign(g, m, d, &order)).collect::<Result<_>>()?;
    for i in 0..ms.len() {
        for j in i..ms.len() {
            let law = if d_even_cycles(g, ms[i], ms[j], d) % 2 == 0 { 1 } else { -1 };
            if signs[i] * signs[j] != law {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Var;

    fn x(n: u32) -> MultiPoly {
        MultiPoly::var(Var::X(n))
    }

    #[test]
    fn generic_four_by_four() {
        // Pf = a12 a34 - a13 a24 + a14 a23 with a_ij labelled x1..x6.
        let mut m = SkewMatrix::zeros(4);
        let mut k = 1;
        for i in 0..4 {
            for j in i + 1..4 {
                m.set(i, j, x(k));
                k += 1;
            }
        }
        let pf = pfaffian_exact(&m).unwrap();
        let want = &(&(&x(1) * &x(6)) - &(&x(2) * &x(5))) + &(&x(3) * &x(4));
        assert_eq!(pf, want);
        assert_eq!(determinant_exact(&m).unwrap(), &pf * &pf);
    }

    #[test]
    fn four_cycle_signs() {
        let g = Graph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        // Three edges along the cycle, one against: the union cycle is D-odd.
        let d = Orientation(vec![true, true, true, false]);
        let pf = pfaffian_exact(&skew_adjacency(&g, &d).unwrap()).unwrap();
        assert_eq!(pf.to_string(), "x1*x3 + x2*x4");
        assert_eq!(d_even_cycles(&g, EdgeSubset::from_bits(4, 0b0101), EdgeSubset::from_bits(4, 0b1010), &d), 0);
        assert!(even_cycle_law_check(&g, &d).unwrap());
        // All four along the cycle: D-even, opposite signs.
        let d2 = Orientation(vec![true, true, true, true]);
        let pf2 = pfaffian_exact(&skew_adjacency(&g, &d2).unwrap()).unwrap();
        assert_eq!(pf2.to_string(), "x1*x3 - x2*x4");
        assert!(even_cycle_law_check(&g, &d2).unwrap());
    }

    #[test]
    fn numeric_matches_exact_on_small_matrix() {
        let mut m = SkewMatrix::<Complex64>::zeros(4);
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut k = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                m.set(i, j, Complex64::new(vals[k], 0.0));
                k += 1;
            }
        }
        let pf = pfaffian_numeric(&m.to_dense()).unwrap();
        assert!((pf - Complex64::new(1.0 * 6.0 - 2.0 * 5.0 + 3.0 * 4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn non_skew_rejected() {
        let a = DMatrix::from_element(2, 2, Complex64::one());
        assert!(pfaffian_numeric(&a).is_err());
    }
}
