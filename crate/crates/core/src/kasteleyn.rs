//! Orientations whose Pfaffian signs follow the crossing parity of each
//! matching, and the expansion of the matching polynomial over `4^g`
//! Pfaffians.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::graph::{perfect_matchings, Graph};
use crate::linalg::{solve_rational, Gf2System};
use crate::pfaffian::{matching_sign, pfaffian_exact, skew_adjacency, Orientation};
use crate::poly::{MultiPoly, Rational};
use crate::surface::{crossing_count, EmbeddedGraph};

/// Faces of a rotation system, each as the cyclic list of half-edges that
/// bound it. Half-edge `2e` sits at `u` of edge `e`, `2e + 1` at `v`; for a
/// loop the first listed occurrence is `2e`.
pub fn trace_faces(g: &Graph, rotation: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let h = 2 * g.edge_count();
    // Position of every half-edge within its vertex's rotation.
    let mut at = vec![(0usize, 0usize); h];
    let mut rot_halves: Vec<Vec<usize>> = Vec::with_capacity(rotation.len());
    for (v, list) in rotation.iter().enumerate() {
        let mut halves = Vec::with_capacity(list.len());
        let mut loop_seen = std::collections::HashSet::new();
        for &e in list {
            let ed = g.edge(e);
            let half = if ed.is_loop() {
                if loop_seen.insert(e) {
                    2 * e
                } else {
                    2 * e + 1
                }
            } else if ed.u == v {
                2 * e
            } else {
                2 * e + 1
            };
            at[half] = (v, halves.len());
            halves.push(half);
        }
        rot_halves.push(halves);
    }
    let next = |half: usize| -> usize {
        let (v, k) = at[half ^ 1];
        let list = &rot_halves[v];
        list[(k + 1) % list.len()]
    };
    let mut seen = vec![false; h];
    let mut faces = Vec::new();
    for start in 0..h {
        if seen[start] {
            continue;
        }
        let mut face = Vec::new();
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            face.push(x);
            x = next(x);
        }
        faces.push(face);
    }
    faces
}

/// Checks `V - E + F = 2c - 2g` for the surface defined by the rotation.
pub fn euler_check(eg: &EmbeddedGraph) -> Result<()> {
    let Some(rot) = eg.rotation() else { return Ok(()) };
    let g = eg.graph();
    let isolated = (0..g.vertex_count()).filter(|&v| rot[v].is_empty()).count();
    let f = trace_faces(g, rot).len() + isolated;
    let chi = g.vertex_count() as i64 - g.edge_count() as i64 + f as i64;
    let want = 2 * g.component_count() as i64 - 2 * eg.genus() as i64;
    if chi != want {
        return Err(Error::Validation(format!(
            "rotation system has Euler characteristic {chi}, genus {} needs {want}",
            eg.genus()
        )));
    }
    Ok(())
}

/// Face-by-face construction on a plane graph: every face except one per
/// component gets an odd number of edges oriented along its boundary.
fn planar_orientation(g: &Graph, rotation: &[Vec<usize>]) -> Orientation {
    let faces = trace_faces(g, rotation);
    let mut face_of = vec![0usize; 2 * g.edge_count()];
    for (f, face) in faces.iter().enumerate() {
        for &h in face {
            face_of[h] = f;
        }
    }
    let mut d = Orientation::increasing(g);
    let mut fixed = vec![false; g.edge_count()];
    let mut dsu = crate::graph::Dsu::new(g.vertex_count());
    for (i, e) in g.edges().iter().enumerate() {
        if dsu.union(e.u, e.v) {
            fixed[i] = true;
        }
    }
    // Dual forest over the edges left unoriented.
    let mut dual: Vec<Vec<(usize, usize)>> = vec![Vec::new(); faces.len()];
    for e in 0..g.edge_count() {
        if !fixed[e] {
            let (a, b) = (face_of[2 * e], face_of[2 * e + 1]);
            dual[a].push((e, b));
            dual[b].push((e, a));
        }
    }
    let mut visited = vec![false; faces.len()];
    let mut post = Vec::new();
    for root in 0..faces.len() {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, None::<usize>, 0usize)];
        while let Some(top) = stack.last_mut() {
            let (f, via) = (top.0, top.1);
            if top.2 < dual[f].len() {
                let (e, h) = dual[f][top.2];
                top.2 += 1;
                if !visited[h] {
                    visited[h] = true;
                    stack.push((h, Some(e), 0));
                }
            } else {
                if let Some(e) = via {
                    post.push((f, e));
                }
                stack.pop();
            }
        }
    }
    for (f, e) in post {
        let along = faces[f]
            .iter()
            .filter(|&&h| h / 2 != e)
            .filter(|&&h| d.0[h / 2] ^ (h % 2 == 1))
            .count();
        let mine = faces[f].iter().find(|&&h| h / 2 == e).copied().expect("edge bounds face");
        // Make the count along the boundary odd.
        let want_along = along % 2 == 0;
        d.0[e] = want_along ^ (mine % 2 == 1);
        fixed[e] = true;
    }
    d
}

/// Flips of the increasing orientation that make every weighted matching
/// carry the sign `(-1)^c(M)`. Edges in `forced` keep the given direction.
pub fn solve_orientation(eg: &EmbeddedGraph, forced: &[(usize, bool)]) -> Result<Orientation> {
    let g = eg.graph();
    let base = Orientation::increasing(g);
    let order: Vec<usize> = (0..g.vertex_count()).collect();
    let mut flip_forced = vec![None; g.edge_count()];
    for &(e, dir) in forced {
        flip_forced[e] = Some(base.0[e] != dir);
    }
    let mut sys = Gf2System::new(g.edge_count());
    for m in perfect_matchings(g)? {
        if g.weight_monomial(m).is_none() {
            continue;
        }
        let mut rhs = matching_sign(g, m, &base, &order)? < 0;
        rhs ^= crossing_count(eg, m).rem_euclid(2) == 1;
        let mut free = Vec::new();
        for e in m.iter() {
            match flip_forced[e] {
                Some(f) => rhs ^= f,
                None => free.push(e),
            }
        }
        if !sys.add(sys.row_from_indices(free), rhs) {
            return Err(Error::Inconsistent(format!(
                "no orientation gives matching {m:?} the sign (-1)^c(M)"
            )));
        }
    }
    let x = sys.solution();
    let mut d = base;
    for e in 0..g.edge_count() {
        let flip = flip_forced[e].unwrap_or(x[e]);
        if flip {
            d.reverse(e);
        }
    }
    Ok(d)
}

/// An orientation `D_0` with `sign(M, D_0) = (-1)^c(M)` for every matching.
///
/// Genus zero with a rotation system uses the face construction; otherwise
/// the sign conditions are solved directly over GF(2).
pub fn kasteleyn_orientation(eg: &EmbeddedGraph) -> Result<Orientation> {
    euler_check(eg)?;
    match eg.rotation() {
        Some(rot) if eg.genus() == 0 => Ok(planar_orientation(eg.graph(), rot)),
        _ => solve_orientation(eg, &[]),
    }
}

/// Whether every weighted matching has sign `(-1)^c(M)` under `d`.
pub fn satisfies_sign_law(eg: &EmbeddedGraph, d: &Orientation) -> Result<bool> {
    let g = eg.graph();
    let order: Vec<usize> = (0..g.vertex_count()).collect();
    for m in perfect_matchings(g)? {
        if g.weight_monomial(m).is_none() {
            continue;
        }
        let want = if crossing_count(eg, m).rem_euclid(2) == 0 { 1 } else { -1 };
        if matching_sign(g, m, d, &order)? != want {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `D_S`: `d` with every edge reversed whose crossings over the bridges in
/// `s` (bit `j` for bridge `j + 1`) sum to an odd number.
pub fn twisted_orientation(eg: &EmbeddedGraph, d: &Orientation, s: u8) -> Orientation {
    let mut out = d.clone();
    for e in 0..eg.graph().edge_count() {
        let r = eg.crossings(e);
        let total: i64 = (0..r.len()).filter(|&j| s >> j & 1 == 1).map(|j| r[j]).sum();
        if total % 2 != 0 {
            out.reverse(e);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct ArfPfaffianEntry {
    /// Bridge set as a bitmask: bit `j` is bridge `j + 1`.
    pub bridges: u8,
    pub coef: Rational,
    pub pfaffian: MultiPoly,
}

impl ArfPfaffianEntry {
    pub fn bridge_list(&self) -> Vec<usize> {
        (0..8).filter(|j| self.bridges >> j & 1 == 1).map(|j| j + 1).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ArfPfaffianTable {
    pub orientation: Orientation,
    pub entries: Vec<ArfPfaffianEntry>,
    /// Whether `sum_S c_S Pf(A(G, D_S))` equals the matching polynomial.
    pub holds: bool,
    /// Whether the coefficients are the closed-form ones.
    pub canonical: bool,
}

/// `(-1)^(sum_i s_{2i-1} s_{2i}) / 2^g`.
pub fn canonical_coefficient(genus: usize, s: u8) -> Rational {
    let e: u32 = (0..genus).map(|i| (s >> (2 * i) & s >> (2 * i + 1) & 1) as u32).sum();
    let sign = if e % 2 == 0 { Rational::one() } else { -Rational::one() };
    sign / Rational::from_integer(1 << genus)
}

/// Writes the matching polynomial as a combination of the `4^g` Pfaffians
/// `Pf(A(G, D_S))`. Falls back to solving for the coefficients when the
/// closed form does not reproduce it.
pub fn arf_pfaffian_formula(eg: &EmbeddedGraph) -> Result<ArfPfaffianTable> {
    let g = eg.graph();
    let d0 = kasteleyn_orientation(eg)?;
    let target = crate::graph::matching_polynomial(g)?;
    let subsets: Vec<u8> = (0..1u8 << (2 * eg.genus())).collect();
    let pfs: Vec<MultiPoly> = subsets
        .iter()
        .map(|&s| pfaffian_exact(&skew_adjacency(g, &twisted_orientation(eg, &d0, s))?))
        .collect::<Result<_>>()?;
    let canon: Vec<Rational> = subsets.iter().map(|&s| canonical_coefficient(eg.genus(), s)).collect();
    let combine = |c: &[Rational]| -> MultiPoly { pfs.iter().zip(c).map(|(p, &k)| p.scale(k)).sum() };
    let (coefs, canonical) = if combine(&canon) == target {
        (canon, true)
    } else {
        let mut rows: std::collections::BTreeMap<crate::poly::Monomial, Vec<Rational>> =
            Default::default();
        for (j, p) in pfs.iter().enumerate() {
            for (m, c) in p.terms() {
                rows.entry(m.clone()).or_insert_with(|| vec![Rational::zero(); pfs.len()])[j] = *c;
            }
        }
        for (m, _) in target.terms() {
            rows.entry(m.clone()).or_insert_with(|| vec![Rational::zero(); pfs.len()]);
        }
        let b: Vec<Rational> = rows.keys().map(|m| target.coeff(m)).collect();
        let c = solve_rational(rows.into_values().collect(), b).ok_or_else(|| {
            Error::Inconsistent("no combination of twisted Pfaffians gives P_G".into())
        })?;
        (c, false)
    };
    let holds = combine(&coefs) == target;
    let entries = subsets
        .into_iter()
        .zip(coefs)
        .zip(pfs)
        .map(|((bridges, coef), pfaffian)| ArfPfaffianEntry { bridges, coef, pfaffian })
        .collect();
    Ok(ArfPfaffianTable { orientation: d0, entries, holds, canonical })
}

/// `sum_M (-1)^c(M) x^M`, the target of the Kasteleyn Pfaffian.
pub fn crossing_signed_matchings(eg: &EmbeddedGraph) -> Result<MultiPoly> {
    let g = eg.graph();
    let mut p = MultiPoly::zero();
    for m in perfect_matchings(g)? {
        if let Some(mono) = g.weight_monomial(m) {
            let s = if crossing_count(eg, m).rem_euclid(2) == 0 { 1 } else { -1 };
            p.add_term(mono, Rational::from_integer(s));
        }
    }
    Ok(p)
}
