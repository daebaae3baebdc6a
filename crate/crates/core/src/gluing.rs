//! Splitting a graph along a cut into two pieces, closing each piece with
//! a gadget carrying gluing variables, and checking that pairing the
//! pieces' polynomials recovers the polynomial of the whole graph.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::exterior::{pair, ExteriorElement};
use crate::graph::{even_polynomial, matching_polynomial, perfect_matchings, Edge, EdgeSubset, Graph, Weight};
use crate::kasteleyn::solve_orientation;
use crate::pfaffian::{matching_sign, pfaffian_exact, skew_adjacency, skew_adjacency_ordered, Orientation};
use crate::poly::{MultiPoly, Var};
use crate::surface::{even_subset_sign, signed_even_polynomial, EmbeddedGraph, QuadraticForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Side(u8),
    /// Position along the cut, 0-based.
    Cut(usize),
}

/// A separating curve meeting the graph in `vertices` (in order along the
/// curve), with every other vertex and every edge assigned to side 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    vertices: Vec<usize>,
    region: Vec<Region>,
    edge_side: Vec<u8>,
}

impl Cut {
    /// `vertex_side` covers every non-cut vertex; `edge_side` is needed only
    /// for edges whose endpoints are both on the cut.
    pub fn new(
        g: &Graph,
        vertices: Vec<usize>,
        vertex_side: &BTreeMap<usize, u8>,
        edge_side: &BTreeMap<usize, u8>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Validation("cut has no vertices".into()));
        }
        let n = g.vertex_count();
        let mut region = vec![None; n];
        for (i, &v) in vertices.iter().enumerate() {
            if v >= n || region[v].is_some() {
                return Err(Error::Validation(format!("cut vertex {v} out of range or repeated")));
            }
            region[v] = Some(Region::Cut(i));
        }
        for (&v, &s) in vertex_side {
            if v >= n || !(1..=2).contains(&s) {
                return Err(Error::Validation(format!("bad side entry {v}: {s}")));
            }
            match region[v] {
                None => region[v] = Some(Region::Side(s)),
                Some(Region::Cut(_)) => {
                    return Err(Error::Validation(format!("cut vertex {v} also given a side")))
                }
                Some(Region::Side(_)) => unreachable!("map keys are unique"),
            }
        }
        let region: Vec<Region> = region
            .into_iter()
            .enumerate()
            .map(|(v, r)| r.ok_or_else(|| Error::Validation(format!("vertex {v} has no side"))))
            .collect::<Result<_>>()?;
        let mut sides = Vec::with_capacity(g.edge_count());
        for (i, e) in g.edges().iter().enumerate() {
            let given = edge_side.get(&i).copied();
            let derived = match (region[e.u], region[e.v]) {
                (Region::Side(a), Region::Side(b)) if a != b => {
                    return Err(Error::Validation(format!("edge {i} joins the two sides")))
                }
                (Region::Side(a), _) | (_, Region::Side(a)) => Some(a),
                (Region::Cut(_), Region::Cut(_)) => None,
            };
            let s = match (derived, given) {
                (Some(a), Some(b)) if a != b => {
                    return Err(Error::Validation(format!("edge {i} side {b} contradicts its endpoints")))
                }
                (Some(a), _) => a,
                (None, Some(b)) if (1..=2).contains(&b) => b,
                _ => {
                    return Err(Error::Validation(format!(
                        "edge {i} lies on the cut and needs an explicit side"
                    )))
                }
            };
            sides.push(s);
        }
        Ok(Cut { vertices, region, edge_side: sides })
    }

    pub fn k(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn region(&self, v: usize) -> Region {
        self.region[v]
    }

    pub fn edge_side(&self, e: usize) -> u8 {
        self.edge_side[e]
    }

    /// Non-cut vertices of a side, in increasing order.
    pub fn side_vertices(&self, side: u8) -> Vec<usize> {
        (0..self.region.len()).filter(|&v| self.region[v] == Region::Side(side)).collect()
    }

    /// Side 1, then the cut in curve order, then side 2.
    pub fn adapted_order(&self) -> Vec<usize> {
        let mut order = self.side_vertices(1);
        order.extend(&self.vertices);
        order.extend(self.side_vertices(2));
        order
    }
}

/// The gadget glued onto each side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gadget {
    /// Paths `v3 - v2 - v^i` with all `v3` merged into one hub.
    Target,
    /// Paths `u_{6i-4} - v2 - v^i` hanging off a path `u_1 .. u_{6k}`
    /// with chords `u_{3j-2} u_{3j}`.
    Core,
}

/// One side of the cut together with its gadget.
#[derive(Clone, Debug)]
pub struct Piece {
    pub side: u8,
    pub gadget: Gadget,
    pub embedded: EmbeddedGraph,
    /// Piece vertex of each graph vertex on this side or on the cut.
    pub vertex_of: Vec<Option<usize>>,
    /// Piece edge of each graph edge on this side.
    pub edge_of: Vec<Option<usize>>,
    /// Piece edges belonging to the gadget, in construction order.
    pub gadget_edges: Vec<usize>,
}

impl Piece {
    pub fn graph(&self) -> &Graph {
        self.embedded.graph()
    }
}

fn glue_weight(side: u8, cut: usize, top: bool) -> Weight {
    // Side 1: v3v2 -> e_1, v2v1 -> e_2. Side 2 swaps the slots.
    let slot = match (side, top) {
        (1, true) | (2, false) => 1,
        _ => 2,
    };
    Weight::Var(Var::Glue { cut: cut as u16 + 1, slot, dual: side == 2 })
}

/// Builds the piece for one side. Vertices are numbered so that the
/// natural order is side, cut, gadget for side 1 and gadget, cut, side for
/// side 2.
pub fn build_piece(eg: &EmbeddedGraph, cut: &Cut, side: u8, gadget: Gadget) -> Result<Piece> {
    let g = eg.graph();
    let k = cut.k();
    let own = cut.side_vertices(side);
    let extra = match gadget {
        Gadget::Target => k + 1,
        Gadget::Core => 7 * k,
    };
    let (side_base, cut_base, extra_base) = if side == 1 {
        (0, own.len(), own.len() + k)
    } else {
        (extra + k, extra, 0)
    };
    let mut vertex_of = vec![None; g.vertex_count()];
    for (i, &v) in own.iter().enumerate() {
        vertex_of[v] = Some(side_base + i);
    }
    for (i, &v) in cut.vertices().iter().enumerate() {
        vertex_of[v] = Some(cut_base + i);
    }
    let n = own.len() + k + extra;
    let genus = if eg.genus() == 2 { 1 } else { 0 };
    let mut edges = Vec::new();
    let mut r = Vec::new();
    let mut edge_of = vec![None; g.edge_count()];
    for (i, e) in g.edges().iter().enumerate() {
        if cut.edge_side(i) != side {
            continue;
        }
        let (u, v) = (vertex_of[e.u].expect("side vertex"), vertex_of[e.v].expect("side vertex"));
        edge_of[i] = Some(edges.len());
        edges.push(Edge::new(u, v, e.weight));
        let full = eg.crossings(i);
        r.push(if genus == 1 {
            full[2 * (side as usize - 1)..2 * side as usize].to_vec()
        } else {
            Vec::new()
        });
    }
    let v2 = |i: usize| extra_base + i;
    let cutv = |i: usize| cut_base + i;
    let mut gadget_edges = Vec::new();
    let mut push = |edges: &mut Vec<Edge>, r: &mut Vec<Vec<i64>>, e: Edge| {
        gadget_edges.push(edges.len());
        edges.push(e);
        r.push(vec![0; 2 * genus]);
    };
    match gadget {
        Gadget::Target => {
            let hub = extra_base + k;
            for i in 0..k {
                push(&mut edges, &mut r, Edge::new(hub, v2(i), glue_weight(side, i, true)));
                push(&mut edges, &mut r, Edge::new(v2(i), cutv(i), glue_weight(side, i, false)));
            }
        }
        Gadget::Core => {
            let u = |t: usize| extra_base + k + t - 1;
            for i in 0..k {
                let top = u(6 * (i + 1) - 4);
                push(&mut edges, &mut r, Edge::new(top, v2(i), glue_weight(side, i, true)));
                push(&mut edges, &mut r, Edge::new(v2(i), cutv(i), glue_weight(side, i, false)));
            }
            for t in 1..6 * k {
                push(&mut edges, &mut r, Edge::new(u(t), u(t + 1), Weight::One));
            }
            for j in 1..=2 * k {
                push(&mut edges, &mut r, Edge::new(u(3 * j - 2), u(3 * j), Weight::One));
            }
        }
    }
    let graph = Graph::new(n, edges)?;
    let embedded = EmbeddedGraph::new(graph, genus, r, None)?;
    Ok(Piece { side, gadget, embedded, vertex_of, edge_of, gadget_edges })
}

fn check_handles(eg: &EmbeddedGraph, cut: &Cut) -> Result<()> {
    if eg.genus() != 2 {
        return Err(Error::Validation(format!(
            "signed gluing needs a genus-2 embedding, got genus {}",
            eg.genus()
        )));
    }
    for e in 0..eg.graph().edge_count() {
        let r = eg.crossings(e);
        let other = if cut.edge_side(e) == 1 { &r[2..4] } else { &r[0..2] };
        if other.iter().any(|&x| x != 0) {
            return Err(Error::Validation(format!(
                "edge {e} on side {} crosses a bridge of the other handle",
                cut.edge_side(e)
            )));
        }
    }
    Ok(())
}

fn check_dimer_parity(cut: &Cut) -> Result<()> {
    if cut.k() % 2 != 0 {
        return Err(Error::Validation("dimer gluing needs an even number of cut vertices".into()));
    }
    for s in 1..=2 {
        if cut.side_vertices(s).len() % 2 != 0 {
            return Err(Error::Validation(format!(
                "dimer gluing needs an even number of vertices on side {s}"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    UnsignedIsing,
    SignedIsing,
    UnsignedDimer,
    SignedDimer,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Theorem::UnsignedIsing => "unsigned-ising",
            Theorem::SignedIsing => "signed-ising",
            Theorem::UnsignedDimer => "unsigned-dimer",
            Theorem::SignedDimer => "signed-dimer",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlueReport {
    pub theorem: Theorem,
    /// Polynomial of the whole graph.
    pub lhs: MultiPoly,
    /// Pairing of the two pieces.
    pub rhs: MultiPoly,
    /// Sign relating the Pfaffian in input vertex order to the one in
    /// cut-adapted order (`lhs`). Always 1 for the other theorems.
    pub epsilon: i8,
}

impl GlueReport {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

fn pair_pieces(p1: &MultiPoly, p2: &MultiPoly, k: usize) -> Result<MultiPoly> {
    let w1 = ExteriorElement::from_polynomial(p1, k, false)?;
    let w2 = ExteriorElement::from_polynomial(p2, k, true)?;
    pair(&w1, &w2)
}

/// Even subsets of `G` against the pairing of the two target pieces.
pub fn verify_unsigned_ising_glue(eg: &EmbeddedGraph, cut: &Cut) -> Result<GlueReport> {
    let p1 = build_piece(eg, cut, 1, Gadget::Target)?;
    let p2 = build_piece(eg, cut, 2, Gadget::Target)?;
    let lhs = even_polynomial(eg.graph())?;
    let rhs = pair_pieces(&even_polynomial(p1.graph())?, &even_polynomial(p2.graph())?, cut.k())?;
    Ok(GlueReport { theorem: Theorem::UnsignedIsing, lhs, rhs, epsilon: 1 })
}

/// Signed even subsets under `q`, with each piece signed by its handle's form.
pub fn verify_signed_ising_glue(eg: &EmbeddedGraph, cut: &Cut, q: QuadraticForm) -> Result<GlueReport> {
    check_handles(eg, cut)?;
    let p1 = build_piece(eg, cut, 1, Gadget::Target)?;
    let p2 = build_piece(eg, cut, 2, Gadget::Target)?;
    let lhs = signed_even_polynomial(eg, q)?;
    let s1 = signed_even_polynomial(&p1.embedded, q.handle(0))?;
    let s2 = signed_even_polynomial(&p2.embedded, q.handle(1))?;
    let rhs = pair_pieces(&s1, &s2, cut.k())?;
    Ok(GlueReport { theorem: Theorem::SignedIsing, lhs, rhs, epsilon: 1 })
}

/// Perfect matchings of `G` against the pairing of the two core pieces.
pub fn verify_unsigned_dimer_glue(eg: &EmbeddedGraph, cut: &Cut) -> Result<GlueReport> {
    check_dimer_parity(cut)?;
    let p1 = build_piece(eg, cut, 1, Gadget::Core)?;
    let p2 = build_piece(eg, cut, 2, Gadget::Core)?;
    let lhs = matching_polynomial(eg.graph())?;
    let rhs =
        pair_pieces(&matching_polynomial(p1.graph())?, &matching_polynomial(p2.graph())?, cut.k())?;
    Ok(GlueReport { theorem: Theorem::UnsignedDimer, lhs, rhs, epsilon: 1 })
}

/// Orientation of a piece: graph edges as in `d`, gadget edges from `gadget_dirs`.
pub fn piece_orientation(
    eg: &EmbeddedGraph,
    piece: &Piece,
    d: &Orientation,
    gadget_dirs: &[bool],
) -> Orientation {
    let g = eg.graph();
    let pg = piece.graph();
    let mut out = vec![true; pg.edge_count()];
    for (e, pe) in piece.edge_of.iter().enumerate() {
        if let Some(pe) = *pe {
            let (t, _) = d.tail_head(g, e);
            let pt = piece.vertex_of[t].expect("endpoint in piece");
            out[pe] = pg.edge(pe).u == pt;
        }
    }
    for (i, &pe) in piece.gadget_edges.iter().enumerate() {
        out[pe] = gadget_dirs[i];
    }
    Orientation(out)
}

/// Sign of the permutation taking the natural order to `order`.
pub fn permutation_sign(order: &[usize]) -> i8 {
    let mut seen = vec![false; order.len()];
    let mut sign = 1i8;
    for start in 0..order.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = order[x];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Pfaffian of `G` (cut-adapted order) against the pairing of the piece
/// Pfaffians, with gadget edges directed by [`core_orientation`].
pub fn verify_signed_dimer_glue(eg: &EmbeddedGraph, cut: &Cut, d: &Orientation) -> Result<GlueReport> {
    check_dimer_parity(cut)?;
    let g = eg.graph();
    if d.len() != g.edge_count() {
        return Err(Error::Validation("orientation does not match the graph".into()));
    }
    let core = core_orientation(cut.k())?;
    let p1 = build_piece(eg, cut, 1, Gadget::Core)?;
    let p2 = build_piece(eg, cut, 2, Gadget::Core)?;
    let order = cut.adapted_order();
    let lhs = pfaffian_exact(&skew_adjacency_ordered(g, d, &order)?)?;
    let f1 = pfaffian_exact(&skew_adjacency(p1.graph(), &piece_orientation(eg, &p1, d, &core.side1))?)?;
    let f2 = pfaffian_exact(&skew_adjacency(p2.graph(), &piece_orientation(eg, &p2, d, &core.side2))?)?;
    let rhs = pair_pieces(&f1, &f2, cut.k())?;
    Ok(GlueReport { theorem: Theorem::SignedDimer, lhs, rhs, epsilon: permutation_sign(&order) })
}

/// Perfect matchings of the gadget covering exactly the piece vertices
/// left free by `fixed`.
pub fn gadget_completions(piece: &Piece, fixed: EdgeSubset) -> Result<Vec<EdgeSubset>> {
    let pg = piece.graph();
    let mut covered = vec![false; pg.vertex_count()];
    for e in fixed.iter() {
        let ed = pg.edge(e);
        if covered[ed.u] || covered[ed.v] {
            return Ok(Vec::new());
        }
        covered[ed.u] = true;
        covered[ed.v] = true;
    }
    let edges: Vec<Edge> = piece.gadget_edges.iter().map(|&e| *pg.edge(e)).collect();
    let mut keep: Vec<usize> = (0..pg.vertex_count()).filter(|&v| !covered[v]).collect();
    keep.sort();
    let index: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut sub_edges = Vec::new();
    let mut back = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        if let (Some(&a), Some(&b)) = (index.get(&e.u), index.get(&e.v)) {
            sub_edges.push(Edge::new(a, b, Weight::One));
            back.push(piece.gadget_edges[i]);
        }
    }
    if keep.is_empty() {
        return Ok(vec![fixed]);
    }
    let sub = Graph::new(keep.len(), sub_edges)?;
    Ok(perfect_matchings(&sub)?
        .into_iter()
        .map(|m| {
            let mut out = fixed;
            for i in m.iter() {
                out.insert(back[i]);
            }
            out
        })
        .collect())
}

/// Restriction of a graph subset to one side, as piece edges.
pub fn restrict_to_piece(piece: &Piece, s: EdgeSubset) -> EdgeSubset {
    let mut out = EdgeSubset::empty(piece.graph().edge_count());
    for e in s.iter() {
        if let Some(pe) = piece.edge_of[e] {
            out.insert(pe);
        }
    }
    out
}

/// Directions of the gadget edges on both sides, in [`Piece::gadget_edges`] order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreOrientation {
    pub side1: Vec<bool>,
    pub side2: Vec<bool>,
}

fn core_cache() -> &'static Mutex<HashMap<usize, CoreOrientation>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, CoreOrientation>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// The cut vertices alone, with every pair joined once on each side.
fn model_instance(k: usize) -> Result<(EmbeddedGraph, Cut)> {
    let mut pairs = Vec::new();
    let mut sides = BTreeMap::new();
    for side in 1..=2u8 {
        for a in 0..k {
            for b in a + 1..k {
                sides.insert(pairs.len(), side);
                pairs.push((a, b));
            }
        }
    }
    let g = Graph::from_pairs(k, &pairs)?;
    let cut = Cut::new(&g, (0..k).collect(), &BTreeMap::new(), &sides)?;
    Ok((EmbeddedGraph::planar(g), cut))
}

/// Gadget directions making every matching's sign factor across the cut.
///
/// The sign ratio between `G` and the two pieces depends only on which cut
/// vertices the side-1 edges cover, so it is enough to impose the
/// condition on a model graph where every even set of cut vertices occurs.
/// The resulting GF(2) system is solved with the same direction for each
/// gadget edge on both sides when possible.
pub fn core_orientation(k: usize) -> Result<CoreOrientation> {
    if let Some(c) = core_cache().lock().expect("cache lock").get(&k) {
        return Ok(c.clone());
    }
    if k % 2 != 0 || k == 0 {
        return Err(Error::Validation("core needs an even, positive number of cut vertices".into()));
    }
    let (eg, cut) = model_instance(k)?;
    let g = eg.graph();
    let d = Orientation::increasing(g);
    let order = cut.adapted_order();
    let p1 = build_piece(&eg, &cut, 1, Gadget::Core)?;
    let p2 = build_piece(&eg, &cut, 2, Gadget::Core)?;
    let ne = p1.gadget_edges.len();
    let all_up = vec![true; ne];
    let d1 = piece_orientation(&eg, &p1, &d, &all_up);
    let d2 = piece_orientation(&eg, &p2, &d, &all_up);
    let pos1: HashMap<usize, usize> = p1.gadget_edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let pos2: HashMap<usize, usize> = p2.gadget_edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut equations = Vec::new();
    for m in perfect_matchings(g)? {
        let sg = matching_sign(g, m, &d, &order)?;
        let c1 = gadget_completions(&p1, restrict_to_piece(&p1, m))?;
        let c2 = gadget_completions(&p2, restrict_to_piece(&p2, m))?;
        if c1.len() != 1 || c2.len() != 1 {
            return Err(Error::Inconsistent(format!(
                "matching {m:?} has {} and {} gadget completions",
                c1.len(),
                c2.len()
            )));
        }
        let s1 = matching_sign(p1.graph(), c1[0], &d1, &(0..p1.graph().vertex_count()).collect::<Vec<_>>())?;
        let s2 = matching_sign(p2.graph(), c2[0], &d2, &(0..p2.graph().vertex_count()).collect::<Vec<_>>())?;
        let used1: Vec<usize> = c1[0].iter().filter_map(|e| pos1.get(&e).copied()).collect();
        let used2: Vec<usize> = c2[0].iter().filter_map(|e| pos2.get(&e).copied()).collect();
        equations.push((used1, used2, sg * s1 * s2 < 0));
    }
    let solve = |shared: bool| -> Option<CoreOrientation> {
        let n = if shared { ne } else { 2 * ne };
        let mut sys = crate::linalg::Gf2System::new(n);
        for (u1, u2, rhs) in &equations {
            let off = if shared { 0 } else { ne };
            let row = sys.row_from_indices(u1.iter().copied().chain(u2.iter().map(|&i| i + off)));
            if !sys.add(row, *rhs) {
                return None;
            }
        }
        let x = sys.solution();
        let side1: Vec<bool> = (0..ne).map(|i| !x[i]).collect();
        let side2: Vec<bool> = if shared { side1.clone() } else { (0..ne).map(|i| !x[ne + i]).collect() };
        Some(CoreOrientation { side1, side2 })
    };
    let c = solve(true)
        .or_else(|| solve(false))
        .ok_or_else(|| Error::Inconsistent(format!("no gadget orientation for k = {k}")))?;
    core_cache().lock().expect("cache lock").insert(k, c.clone());
    Ok(c)
}

/// Checks that the core path with chords, minus the attachment points of
/// a set `A` of cut vertices, has exactly one perfect matching when `|A|`
/// is even and none when it is odd.
pub fn core_uniqueness_check(k: usize) -> Result<bool> {
    for a in 0u32..(1 << k) {
        let attached = |t: usize| (1..=k).any(|i| a >> (i - 1) & 1 == 1 && t == 6 * i - 4);
        let keep: Vec<usize> = (1..=6 * k).filter(|&t| !attached(t)).collect();
        let index: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let candidates = (1..6 * k).map(|t| (t, t + 1)).chain((1..=2 * k).map(|j| (3 * j - 2, 3 * j)));
        let pairs: Vec<(usize, usize)> = candidates
            .filter_map(|(x, y)| Some((*index.get(&x)?, *index.get(&y)?)))
            .collect();
        let count = perfect_matchings(&Graph::from_pairs(keep.len(), &pairs)?)?.len();
        if count != if a.count_ones() % 2 == 0 { 1 } else { 0 } {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Term-by-term form of the signed Ising gluing: every even subset extends
/// uniquely to both pieces and its sign is the product of the piece signs.
pub fn signed_ising_term_check(eg: &EmbeddedGraph, cut: &Cut, q: QuadraticForm) -> Result<bool> {
    check_handles(eg, cut)?;
    let p1 = build_piece(eg, cut, 1, Gadget::Target)?;
    let p2 = build_piece(eg, cut, 2, Gadget::Target)?;
    for s in crate::graph::even_subsets(eg.graph())? {
        let sign = even_subset_sign(eg, s, q)?;
        let mut prod = 1;
        for (p, h) in [(&p1, q.handle(0)), (&p2, q.handle(1))] {
            let base = restrict_to_piece(p, s);
            let ext: Vec<EdgeSubset> = target_extensions(p, base);
            if ext.len() != 1 {
                return Ok(false);
            }
            prod *= even_subset_sign(&p.embedded, ext[0], h)?;
        }
        if prod != sign {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Gadget edge sets making `base` even in a target piece.
fn target_extensions(p: &Piece, base: EdgeSubset) -> Vec<EdgeSubset> {
    let pg = p.graph();
    let n = p.gadget_edges.len();
    (0u64..1 << n)
        .map(|bits| {
            let mut s = base;
            for i in 0..n {
                if bits >> i & 1 == 1 {
                    s.insert(p.gadget_edges[i]);
                }
            }
            s
        })
        .filter(|&s| pg.is_even(s))
        .collect()
}

/// Term-by-term form of the signed dimer gluing: for every matching the
/// sign in `G` (cut-adapted order) is the product of the piece signs.
pub fn signed_dimer_term_check(eg: &EmbeddedGraph, cut: &Cut, d: &Orientation) -> Result<bool> {
    check_dimer_parity(cut)?;
    let g = eg.graph();
    let core = core_orientation(cut.k())?;
    let order = cut.adapted_order();
    let p1 = build_piece(eg, cut, 1, Gadget::Core)?;
    let p2 = build_piece(eg, cut, 2, Gadget::Core)?;
    let d1 = piece_orientation(eg, &p1, d, &core.side1);
    let d2 = piece_orientation(eg, &p2, d, &core.side2);
    let id1: Vec<usize> = (0..p1.graph().vertex_count()).collect();
    let id2: Vec<usize> = (0..p2.graph().vertex_count()).collect();
    for m in perfect_matchings(g)? {
        let c1 = gadget_completions(&p1, restrict_to_piece(&p1, m))?;
        let c2 = gadget_completions(&p2, restrict_to_piece(&p2, m))?;
        if c1.len() != 1 || c2.len() != 1 {
            return Ok(false);
        }
        let s = matching_sign(g, m, d, &order)?;
        let s1 = matching_sign(p1.graph(), c1[0], &d1, &id1)?;
        let s2 = matching_sign(p2.graph(), c2[0], &d2, &id2)?;
        if s != s1 * s2 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A Kasteleyn orientation of `G` plus the cut chords `v^i v^(i+1)`, the
/// chords directed from `v^1` towards `v^k`. Returns the directions of the
/// edges of `G` only.
pub fn glue_orientation(eg: &EmbeddedGraph, cut: &Cut) -> Result<Orientation> {
    let g = eg.graph();
    let mut edges = g.edges().to_vec();
    let mut r: Vec<Vec<i64>> = (0..g.edge_count()).map(|e| eg.crossings(e).to_vec()).collect();
    let mut forced = Vec::new();
    for w in cut.vertices().windows(2) {
        forced.push((edges.len(), true));
        edges.push(Edge::new(w[0], w[1], Weight::Zero));
        r.push(vec![0; 2 * eg.genus()]);
    }
    let gp = EmbeddedGraph::new(Graph::new(g.vertex_count(), edges)?, eg.genus(), r, None)?;
    let d = solve_orientation(&gp, &forced)?;
    Ok(Orientation(d.0[..g.edge_count()].to_vec()))
}
