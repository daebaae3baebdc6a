//! JSON instance files: a graph, optionally with crossing vectors and a
//! rotation system, a cut, and an orientation.
//!
//! ```json
//! {
//!   "vertices": 4,
//!   "genus": 1,
//!   "edges": [{"u": 0, "v": 1, "var": "x1", "r": [1, 0]}, ...],
//!   "cut": {"vertices": [1, 3], "side": {"0": 1, "2": 2}, "edge_sides": {"5": 1}},
//!   "orientation": [true, false, ...]
//! }
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gluing::{Cut, Region};
use crate::graph::{Edge, Graph, Weight};
use crate::pfaffian::Orientation;
use crate::poly::Var;
use crate::surface::EmbeddedGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub u: usize,
    pub v: usize,
    /// `x<n>`, `"1"` or `"0"`; defaults to `x<index + 1>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
    /// Crossing counts with the bridges, length `2 * genus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutEntry {
    pub vertices: Vec<usize>,
    /// Side (1 or 2) of every vertex off the cut, keyed by vertex index.
    pub side: BTreeMap<String, u8>,
    /// Side of edges joining two cut vertices, keyed by edge index.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub edge_sides: BTreeMap<String, u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub vertices: usize,
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genus: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<CutEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Vec<bool>>,
}

fn schema(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{path}: {msg}"))
}

fn parse_weight(s: &str) -> Result<Weight> {
    match s {
        "1" => Ok(Weight::One),
        "0" => Ok(Weight::Zero),
        _ => Var::parse_edge(s).map(Weight::Var),
    }
}

fn index_map(path: &str, m: &BTreeMap<String, u8>) -> Result<BTreeMap<usize, u8>> {
    m.iter()
        .map(|(k, &v)| {
            let i = k.parse().map_err(|_| schema(&format!("{path}.{k}"), "key must be an index"))?;
            Ok((i, v))
        })
        .collect()
}

impl InstanceFile {
    /// Parses JSON; errors name the offending path.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(if path.is_empty() { "." } else { &path }, e.into_inner())
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn graph(&self) -> Result<Graph> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            if e.u >= self.vertices || e.v >= self.vertices {
                return Err(schema(&format!("edges[{i}]"), "endpoint out of range"));
            }
            let w = match &e.var {
                Some(s) => parse_weight(s).map_err(|err| schema(&format!("edges[{i}].var"), err))?,
                None => Weight::Var(Var::X(i as u32 + 1)),
            };
            edges.push(Edge::new(e.u, e.v, w));
        }
        Graph::new(self.vertices, edges)
    }

    /// Genus defaults to 0; crossing vectors default to zero.
    pub fn embedded(&self) -> Result<EmbeddedGraph> {
        let graph = self.graph()?;
        let genus = self.genus.unwrap_or(0);
        let r = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| match &e.r {
                Some(r) if r.len() == 2 * genus => Ok(r.clone()),
                Some(r) => Err(schema(
                    &format!("edges[{i}].r"),
                    format!("length {} does not match genus {genus}", r.len()),
                )),
                None => Ok(vec![0; 2 * genus]),
            })
            .collect::<Result<_>>()?;
        EmbeddedGraph::new(graph, genus, r, self.rotation.clone())
    }

    pub fn cut(&self, g: &Graph) -> Result<Option<Cut>> {
        let Some(c) = &self.cut else { return Ok(None) };
        let side = index_map("cut.side", &c.side)?;
        let edge_sides = index_map("cut.edge_sides", &c.edge_sides)?;
        Cut::new(g, c.vertices.clone(), &side, &edge_sides).map(Some)
    }

    pub fn orientation(&self, g: &Graph) -> Result<Option<Orientation>> {
        match &self.orientation {
            None => Ok(None),
            Some(o) if o.len() == g.edge_count() => Ok(Some(Orientation(o.clone()))),
            Some(o) => Err(schema("orientation", format!("{} entries for {} edges", o.len(), g.edge_count()))),
        }
    }

    /// The file describing an embedded graph and, optionally, a cut.
    pub fn from_instance(name: Option<String>, eg: &EmbeddedGraph, cut: Option<&Cut>) -> Self {
        let g = eg.graph();
        let edges = g
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeEntry {
                u: e.u,
                v: e.v,
                var: Some(match e.weight {
                    Weight::Var(v) => v.to_string(),
                    Weight::One => "1".into(),
                    Weight::Zero => "0".into(),
                }),
                r: (eg.genus() > 0).then(|| eg.crossings(i).to_vec()),
            })
            .collect();
        let cut = cut.map(|c| {
            let mut side = BTreeMap::new();
            for v in 0..g.vertex_count() {
                if let Region::Side(s) = c.region(v) {
                    side.insert(v.to_string(), s);
                }
            }
            let edge_sides = g
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, e)| matches!((c.region(e.u), c.region(e.v)), (Region::Cut(_), Region::Cut(_))))
                .map(|(i, _)| (i.to_string(), c.edge_side(i)))
                .collect();
            CutEntry { vertices: c.vertices().to_vec(), side, edge_sides }
        });
        InstanceFile {
            name,
            vertices: g.vertex_count(),
            edges,
            genus: (eg.genus() > 0).then_some(eg.genus()),
            rotation: eg.rotation().map(|r| r.to_vec()),
            cut,
            orientation: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_cycle_roundtrip() {
        let text = r#"{"vertices": 4, "edges": [{"u":0,"v":1},{"u":1,"v":2},{"u":2,"v":3},{"u":3,"v":0}]}"#;
        let f = InstanceFile::parse(text).unwrap();
        let g = f.graph().unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.edge(2).weight, Weight::Var(Var::X(3)));
        let eg = f.embedded().unwrap();
        let back = InstanceFile::parse(&InstanceFile::from_instance(None, &eg, None).to_json().unwrap()).unwrap();
        assert_eq!(back.graph().unwrap(), g);
    }

    #[test]
    fn errors_carry_paths() {
        let bad = r#"{"vertices": 3, "edges": [{"u":0,"v":1},{"u":1,"v":"two"}]}"#;
        let msg = InstanceFile::parse(bad).unwrap_err().to_string();
        assert!(msg.contains("edges[1].v"), "{msg}");
        let f = InstanceFile::parse(r#"{"vertices": 2, "edges": [{"u":0,"v":1,"var":"y"}]}"#).unwrap();
        assert!(f.graph().unwrap_err().to_string().contains("edges[0].var"));
        let f = InstanceFile::parse(r#"{"vertices": 2, "genus": 1, "edges": [{"u":0,"v":1,"r":[1]}]}"#).unwrap();
        assert!(f.embedded().unwrap_err().to_string().contains("edges[0].r"));
        assert!(InstanceFile::parse(r#"{"vertices": 2, "edges": [], "extra": 1}"#).is_err());
    }

    #[test]
    fn cut_roundtrip() {
        let text = r#"{
            "vertices": 4,
            "edges": [{"u":0,"v":1},{"u":1,"v":3},{"u":3,"v":2},{"u":2,"v":1}],
            "cut": {"vertices": [1], "side": {"0": 1, "2": 2, "3": 2}}
        }"#;
        let f = InstanceFile::parse(text).unwrap();
        let g = f.graph().unwrap();
        let c = f.cut(&g).unwrap().unwrap();
        assert_eq!(c.edge_side(0), 1);
        assert_eq!(c.edge_side(3), 2);
        let eg = f.embedded().unwrap();
        let again = InstanceFile::from_instance(Some("t".into()), &eg, Some(&c));
        assert_eq!(again.cut.as_ref().unwrap().side, f.cut.as_ref().unwrap().side);
    }
}
