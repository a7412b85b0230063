//! Metric graph model: combinatorial graph plus positive edge lengths.
//!
//! A [`MetricGraph`] is immutable once built. All derived topology
//! (degrees, boundary, Betti number, length totals, incidence lists) is
//! computed eagerly by [`MetricGraph::build`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no vertices")]
    NoVertices,
    #[error("graph has no edges")]
    NoEdges,
    #[error("edge {edge} references vertex {vertex}, but the graph has {vertex_count} vertices")]
    InvalidVertex {
        edge: usize,
        vertex: usize,
        vertex_count: usize,
    },
    #[error("edge {edge} has non-positive length {length}")]
    NonPositiveLength { edge: usize, length: f64 },
    #[error("graph is disconnected: vertex {vertex} is unreachable from vertex 0")]
    Disconnected { vertex: usize },
    #[error("a single loop is not a valid standard graph")]
    SingleLoopGraph,
    #[error("vertex {vertex} has degree 2; such vertices are not allowed in a standard graph")]
    DegreeTwoVertex { vertex: usize },
    #[error("malformed graph document: {0}")]
    Parse(String),
}

/// One edge. Loops have `u == v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

/// Which end of an edge sits at a vertex. `Start` is the `u` end (arc
/// length 0), `End` is the `v` end (arc length `length`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Start,
    End,
}

/// An edge end attached to a vertex. A loop contributes two ends to its vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeEnd {
    pub edge: usize,
    pub side: Side,
}

/// On-disk graph description shared by every CLI command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub vertices: usize,
    pub edges: Vec<Edge>,
    #[serde(default = "default_standard")]
    pub standard: bool,
}

fn default_standard() -> bool {
    true
}

impl GraphDocument {
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    standard: bool,
    degree: Vec<usize>,
    incidence: Vec<Vec<EdgeEnd>>,
    boundary: Vec<usize>,
    total_length: f64,
    min_length: f64,
    max_length: f64,
    loop_length: f64,
}

impl MetricGraph {
    /// Builds a standard graph (degree-2 vertices rejected).
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        Self::build(vertex_count, edges, true)
    }

    /// Builds a graph. With `standard == false` degree-2 vertices are
    /// tolerated, which some intermediate fixtures need.
    pub fn build(vertex_count: usize, edges: Vec<Edge>, standard: bool) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::NoVertices);
        }
        if edges.is_empty() {
            return Err(GraphError::NoEdges);
        }
        for (i, e) in edges.iter().enumerate() {
            for vertex in [e.u, e.v] {
                if vertex >= vertex_count {
                    return Err(GraphError::InvalidVertex {
                        edge: i,
                        vertex,
                        vertex_count,
                    });
                }
            }
            // `!(x > 0)` also rejects NaN
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(GraphError::NonPositiveLength {
                    edge: i,
                    length: e.length,
                });
            }
        }
        if vertex_count == 1 && edges.len() == 1 {
            return Err(GraphError::SingleLoopGraph);
        }

        let mut degree = vec![0usize; vertex_count];
        let mut incidence = vec![Vec::new(); vertex_count];
        for (i, e) in edges.iter().enumerate() {
            degree[e.u] += 1;
            degree[e.v] += 1;
            incidence[e.u].push(EdgeEnd {
                edge: i,
                side: Side::Start,
            });
            incidence[e.v].push(EdgeEnd {
                edge: i,
                side: Side::End,
            });
        }

        let mut seen = vec![false; vertex_count];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for end in &incidence[x] {
                let e = edges[end.edge];
                let y = if end.side == Side::Start { e.v } else { e.u };
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        if let Some(vertex) = seen.iter().position(|s| !s) {
            return Err(GraphError::Disconnected { vertex });
        }

        if standard {
            if let Some(vertex) = degree.iter().position(|&d| d == 2) {
                return Err(GraphError::DegreeTwoVertex { vertex });
            }
        }

        let boundary = (0..vertex_count).filter(|&v| degree[v] == 1).collect();
        let total_length = edges.iter().map(|e| e.length).sum();
        let min_length = edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
        let max_length = edges.iter().map(|e| e.length).fold(0.0, f64::max);
        let loop_length = edges.iter().filter(|e| e.is_loop()).map(|e| e.length).sum();

        Ok(Self {
            vertex_count,
            edges,
            standard,
            degree,
            incidence,
            boundary,
            total_length,
            min_length,
            max_length,
            loop_length,
        })
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self, GraphError> {
        Self::build(doc.vertices, doc.edges.clone(), doc.standard)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Self::from_document(&GraphDocument::from_json(text)?)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self.vertex_count,
            edges: self.edges.clone(),
            standard: self.standard,
        }
    }

    /// Same topology with new edge lengths.
    pub fn with_lengths(&self, lengths: &[f64]) -> Result<Self, GraphError> {
        assert_eq!(lengths.len(), self.edges.len(), "one length per edge");
        let edges = self
            .edges
            .iter()
            .zip(lengths)
            .map(|(e, &length)| Edge { length, ..*e })
            .collect();
        Self::build(self.vertex_count, edges, self.standard)
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

    pub fn edge(&self, i: usize) -> Edge {
        self.edges[i]
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    pub fn is_standard(&self) -> bool {
        self.standard
    }

    /// Degree counting a loop twice.
    pub fn degree(&self, v: usize) -> usize {
        self.degree[v]
    }

    /// Edge ends at `v`; length equals `degree(v)`.
    pub fn ends(&self, v: usize) -> &[EdgeEnd] {
        &self.incidence[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.degree[v] == 1
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary.len()
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertex_count).filter(move |&v| self.degree[v] != 1)
    }

    /// First Betti number `E - V + 1`.
    pub fn betti(&self) -> usize {
        self.edges.len() + 1 - self.vertex_count
    }

    pub fn is_tree(&self) -> bool {
        self.betti() == 0
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn min_length(&self) -> f64 {
        self.min_length
    }

    pub fn max_length(&self) -> f64 {
        self.max_length
    }

    pub fn loop_length(&self) -> f64 {
        self.loop_length
    }

    pub fn loop_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_loop())
            .map(|(i, _)| i)
    }

    /// Vertex at the given end of an edge.
    pub fn end_vertex(&self, end: EdgeEnd) -> usize {
        let e = self.edges[end.edge];
        match end.side {
            Side::Start => e.u,
            Side::End => e.v,
        }
    }

    /// Every vertex has degree 1 or 3 and the graph is a tree.
    pub fn is_three_one_tree(&self) -> bool {
        self.is_tree() && self.degree.iter().all(|&d| d == 1 || d == 3)
    }
}

/// An integer relation `sum c_j l_j = 0` found among edge lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RationalDependence {
    pub coefficients: Vec<i64>,
}

/// Searches for a small integer relation among `lengths`.
///
/// Exhaustive over the box `|c_j| <= max_coefficient` when that box has at
/// most ~2e6 points; otherwise only relations supported on pairs and
/// triples are searched. Advisory only: a `None` proves nothing.
pub fn rational_dependence_warning(lengths: &[f64], max_coefficient: i64) -> Option<RationalDependence> {
    let n = lengths.len();
    if n < 2 {
        return None;
    }
    let side = (2 * max_coefficient + 1) as f64;
    if side.powi(n as i32) <= 2.0e6 {
        let idx: Vec<usize> = (0..n).collect();
        return search_subset(lengths, &idx, max_coefficient);
    }
    for i in 0..n {
        for j in i + 1..n {
            if let Some(r) = search_subset(lengths, &[i, j], max_coefficient) {
                return Some(r);
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for l in j + 1..n {
                if let Some(r) = search_subset(lengths, &[i, j, l], max_coefficient) {
                    return Some(r);
                }
            }
        }
    }
    None
}

fn search_subset(lengths: &[f64], subset: &[usize], max_coefficient: i64) -> Option<RationalDependence> {
    let m = subset.len();
    let mut coeffs = vec![-max_coefficient; m];
    loop {
        // canonical sign: first non-zero coefficient positive
        let first = coeffs.iter().find(|&&c| c != 0).copied().unwrap_or(0);
        if first > 0 {
            let mut sum = 0.0;
            let mut scale = 0.0;
            for (c, &i) in coeffs.iter().zip(subset) {
                sum += *c as f64 * lengths[i];
                scale += (*c as f64).abs() * lengths[i];
            }
            if sum.abs() <= 1e-9 * scale {
                let mut full = vec![0; lengths.len()];
                for (c, &i) in coeffs.iter().zip(subset) {
                    full[i] = *c;
                }
                return Some(RationalDependence { coefficients: full });
            }
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == m {
                return None;
            }
            coeffs[pos] += 1;
            if coeffs[pos] <= max_coefficient {
                break;
            }
            coeffs[pos] = -max_coefficient;
            pos += 1;
        }
    }
}
