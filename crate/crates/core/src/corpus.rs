//! Seeded genus-2 instances with a separating cut, used as the fixture
//! corpus for the gluing checks.
//!
//! Each side is a small grid drawn in a square whose opposite sides are
//! joined by the two bridges of one handle; one row and one column wrap
//! around. The cut runs past the bottom-right corner of both squares, the
//! second square being the first one turned half a turn, so its cut order
//! is reversed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gluing::Cut;
use crate::graph::{matching_polynomial, Edge, Graph, Weight};
use crate::io::InstanceFile;
use crate::poly::Var;
use crate::surface::EmbeddedGraph;

pub const CORPUS_SEED: u64 = 0x5eed_2c07;
pub const CORPUS_SIZE: usize = 56;
/// Edges assigned to one side, cut connections included.
pub const MAX_SIDE_EDGES: usize = 12;

#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub embedded: EmbeddedGraph,
    pub cut: Cut,
}

impl Instance {
    pub fn to_file(&self) -> InstanceFile {
        InstanceFile::from_instance(Some(self.name.clone()), &self.embedded, Some(&self.cut))
    }

    pub fn from_file(f: &InstanceFile) -> Result<Self> {
        let embedded = f.embedded()?;
        let cut = f
            .cut(embedded.graph())?
            .ok_or_else(|| Error::Validation("instance file has no cut".into()))?;
        Ok(Instance { name: f.name.clone().unwrap_or_default(), embedded, cut })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Own(usize),
    /// Position along this side's boundary path order.
    Cut(usize),
}

struct Side {
    vertices: usize,
    edges: Vec<(End, End, [i64; 2])>,
}

/// A `w x h` grid in the unit square picture. Column `cb` wraps over the
/// b-bridge and row `ra` over the a-bridge; the corner region then sees the
/// bottom row from `cb` rightwards and the right column up to `ra`.
fn side(rng: &mut ChaCha8Rng, k: usize) -> Side {
    let (w, h) = *[(2, 2), (2, 3), (3, 2)].choose(rng).expect("nonempty");
    let id = |i: usize, j: usize| j * w + i;
    let mut edges = Vec::new();
    for j in 0..h {
        for i in 0..w {
            if i + 1 < w {
                edges.push((End::Own(id(i, j)), End::Own(id(i + 1, j)), [0, 0]));
            }
            if j + 1 < h {
                edges.push((End::Own(id(i, j)), End::Own(id(i, j + 1)), [0, 0]));
            }
        }
    }
    let cb = rng.gen_range(0..w);
    let ra = rng.gen_range(0..h);
    edges.push((End::Own(id(w - 1, ra)), End::Own(id(0, ra)), [1, 0]));
    edges.push((End::Own(id(cb, 0)), End::Own(id(cb, h - 1)), [0, 1]));

    let mut path: Vec<usize> = (cb..w).map(|i| id(i, 0)).collect();
    path.extend((1..=ra).map(|j| id(w - 1, j)));
    let mut pos: Vec<usize> = (0..k).map(|_| rng.gen_range(0..path.len())).collect();
    pos.sort();
    for c in 0..k {
        edges.push((End::Cut(c), End::Own(path[pos[c]]), [0, 0]));
        let next_free = if c + 1 < k { pos[c + 1] } else { path.len() - 1 };
        if pos[c] < next_free && rng.gen_bool(0.4) {
            edges.push((End::Cut(c), End::Own(path[pos[c] + 1]), [0, 0]));
        }
    }
    if rng.gen_bool(0.3) {
        let c = rng.gen_range(0..k - 1);
        edges.push((End::Cut(c), End::Cut(c + 1), [0, 0]));
    }
    // thin out grid edges until the side fits
    while edges.len() > MAX_SIDE_EDGES || (edges.len() > 9 && rng.gen_bool(0.25)) {
        let planar: Vec<usize> = (0..edges.len())
            .filter(|&i| matches!(edges[i], (End::Own(_), End::Own(_), [0, 0])))
            .collect();
        let Some(&drop) = planar.choose(rng) else { break };
        edges.remove(drop);
    }
    Side { vertices: w * h, edges }
}

fn instance(rng: &mut ChaCha8Rng, k: usize, name: String) -> Result<Instance> {
    let s1 = side(rng, k);
    let s2 = side(rng, k);
    let n = s1.vertices + s2.vertices + k;
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    // canonical ids: side 1, side 2, cut
    let own = |s: u8, v: usize| if s == 1 { v } else { s1.vertices + v };
    let cut_id = |c: usize| s1.vertices + s2.vertices + c;
    let mut raw = Vec::new();
    for (s, spec) in [(1u8, &s1), (2u8, &s2)] {
        for &(a, b, r) in &spec.edges {
            let map = |e: End| match e {
                End::Own(v) => label[own(s, v)],
                End::Cut(c) => label[cut_id(if s == 1 { c } else { k - 1 - c })],
            };
            let mut rr = [0i64; 4];
            rr[2 * (s as usize - 1)] = r[0];
            rr[2 * (s as usize - 1) + 1] = r[1];
            let cut_edge = matches!((a, b), (End::Cut(_), End::Cut(_)));
            raw.push((map(a), map(b), rr, s, cut_edge));
        }
    }
    raw.shuffle(rng);
    let edges: Vec<Edge> = raw
        .iter()
        .enumerate()
        .map(|(i, &(u, v, ..))| Edge::new(u, v, Weight::Var(Var::X(i as u32 + 1))))
        .collect();
    let r: Vec<Vec<i64>> = raw.iter().map(|x| x.2.to_vec()).collect();
    let g = Graph::new(n, edges)?;
    let mut vertex_side = BTreeMap::new();
    for v in 0..s1.vertices {
        vertex_side.insert(label[own(1, v)], 1u8);
    }
    for v in 0..s2.vertices {
        vertex_side.insert(label[own(2, v)], 2u8);
    }
    let edge_side: BTreeMap<usize, u8> =
        raw.iter().enumerate().filter(|(_, x)| x.4).map(|(i, x)| (i, x.3)).collect();
    let cut_vertices: Vec<usize> = (0..k).map(|c| label[cut_id(c)]).collect();
    let cut = Cut::new(&g, cut_vertices, &vertex_side, &edge_side)?;
    let embedded = EmbeddedGraph::new(g, 2, r, None)?;
    Ok(Instance { name, embedded, cut })
}

/// `count` instances, alternating `k = 2` and `k = 4`, each with at least
/// one perfect matching.
pub fn generate(seed: u64, count: usize) -> Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let k = if out.len() % 2 == 0 { 2 } else { 4 };
        let inst = instance(&mut rng, k, format!("g2-{:03}", out.len()))?;
        if !matching_polynomial(inst.embedded.graph())?.is_zero() {
            out.push(inst);
        }
    }
    Ok(out)
}

/// The default fixture corpus.
pub fn default_corpus() -> Result<Vec<Instance>> {
    generate(CORPUS_SEED, CORPUS_SIZE)
}

/// Instance with the fewest edges (first on ties).
pub fn smallest(corpus: &[Instance]) -> Option<&Instance> {
    corpus.iter().min_by_key(|i| i.embedded.graph().edge_count())
}

/// The `w x h` grid on a torus, every row and column closing up over one
/// bridge; edges whose bit is set in `drop` are left out. Edge order: for
/// each vertex in row-major order, its right neighbour then its upper one.
pub fn torus_grid(w: usize, h: usize, drop: u128) -> Result<EmbeddedGraph> {
    if w < 2 || h < 2 {
        return Err(Error::Validation("torus grid needs at least two rows and columns".into()));
    }
    let id = |i: usize, j: usize| j * w + i;
    let mut pairs = Vec::new();
    for j in 0..h {
        for i in 0..w {
            pairs.push((id(i, j), id((i + 1) % w, j), vec![(i + 1 == w) as i64, 0]));
            pairs.push((id(i, j), id(i, (j + 1) % h), vec![0, (j + 1 == h) as i64]));
        }
    }
    let (edges, r): (Vec<Edge>, Vec<Vec<i64>>) = pairs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| drop >> i & 1 == 0)
        .enumerate()
        .map(|(n, (_, (u, v, r)))| (Edge::new(u, v, Weight::Var(Var::X(n as u32 + 1))), r))
        .unzip();
    EmbeddedGraph::new(Graph::new(w * h, edges)?, 1, r, None)
}

/// Loads every `*.json` instance in a directory, sorted by file name.
pub fn load_dir(dir: &std::path::Path) -> Result<Vec<Instance>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            Instance::from_file(&InstanceFile::read(p)?)
                .map_err(|e| Error::Validation(format!("{}: {e}", p.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gluing::Region;

    #[test]
    fn sides_respect_limits() {
        let corpus = generate(7, 12).unwrap();
        for inst in &corpus {
            let g = inst.embedded.graph();
            for s in 1..=2u8 {
                let count = (0..g.edge_count()).filter(|&e| inst.cut.edge_side(e) == s).count();
                assert!(count <= MAX_SIDE_EDGES);
                assert_eq!(inst.cut.side_vertices(s).len() % 2, 0);
            }
            assert!([2, 4].contains(&inst.cut.k()));
            for v in inst.cut.vertices() {
                assert!(matches!(inst.cut.region(*v), Region::Cut(_)));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(3, 4).unwrap();
        let b = generate(3, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.embedded, y.embedded);
            assert_eq!(x.cut, y.cut);
        }
    }

    #[test]
    fn torus_grid_counts() {
        let eg = torus_grid(2, 2, 0).unwrap();
        assert_eq!(eg.graph().edge_count(), 8);
        assert_eq!(crate::graph::perfect_matchings(eg.graph()).unwrap().len(), 8);
        let eg = torus_grid(3, 2, 0b11).unwrap();
        assert_eq!(eg.graph().edge_count(), 10);
        assert_eq!(eg.crossings(0), &[0, 0]);
    }

    #[test]
    fn file_roundtrip() {
        let inst = &generate(5, 1).unwrap()[0];
        let back = Instance::from_file(&InstanceFile::parse(&inst.to_file().to_json().unwrap()).unwrap()).unwrap();
        assert_eq!(back.embedded, inst.embedded);
        assert_eq!(back.cut, inst.cut);
    }
}
