//! Discretized vessel centerline graph.
//!
//! Nodes are sampled centerline points with a lumen radius; edges are straight
//! segments between them. Curvature is estimated per node with the Menger
//! formula on the node and its two path neighbours, and is zero at terminals
//! and bifurcations.

mod geodesic;
mod io;
mod phantom;
mod resample;

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::geometry::Point3;

pub use geodesic::{geodesic_from, project, GeodesicField, Projection};
pub use io::{load_centerline, to_centerline_document, CenterlineDocument, FORMAT_VERSION};
pub use phantom::{
    generate_complex_phantom, generate_simplified_phantom, generate_straight_vessel,
    ComplexPhantomParams, SimplifiedPhantomParams, StraightVesselParams,
};
pub use resample::resample;

/// Positions closer than this are treated as the same point.
pub const MIN_NODE_SEPARATION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed centerline document: {0}")]
    Malformed(String),
    #[error("unsupported format_version {0:?}")]
    UnsupportedVersion(String),
    #[error("unsupported unit {0:?}, expected \"mm\"")]
    UnsupportedUnit(String),
    #[error("node ids must be dense from 0: found id {found} at index {index}")]
    NonDenseIds { index: usize, found: usize },
    #[error("node {node}: radius must be positive and finite, got {radius}")]
    NonPositiveRadius { node: usize, radius: f64 },
    #[error("node {node}: non-finite position")]
    NonFinitePosition { node: usize },
    #[error("edge {edge}: references missing node {node}")]
    MissingNode { edge: usize, node: usize },
    #[error("edge {edge}: self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("edge {edge}: duplicates an earlier edge between {a} and {b}")]
    DuplicateEdge { edge: usize, a: usize, b: usize },
    #[error("node {node} is not attached to any edge")]
    IsolatedNode { node: usize },
    #[error("graph is disconnected: node {node} is unreachable from node 0")]
    Disconnected { node: usize },
    #[error("nodes {a} and {b} coincide")]
    CoincidentNodes { a: usize, b: usize },
    #[error("graph has no nodes")]
    Empty,
    #[error("label {label:?} refers to missing node {node}")]
    BadLabel { label: String, node: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("node {0} does not exist")]
    NoSuchNode(usize),
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("point {point:?} is {offset} mm from the centerline")]
    OffCenterline { point: [f64; 3], offset: f64 },
    #[error("spacing {spacing} mm exceeds the shortest branch ({shortest} mm)")]
    SpacingTooLarge { spacing: f64, shortest: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterlineNode {
    pub id: usize,
    pub position: Point3,
    /// Lumen radius, mm.
    pub radius: f64,
    /// Menger curvature, 1/mm.
    pub curvature: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterlineEdge {
    pub id: usize,
    pub endpoints: (usize, usize),
    /// Euclidean length, mm.
    pub length: f64,
}

impl CenterlineEdge {
    pub fn other(&self, node: usize) -> usize {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

/// Immutable, validated centerline graph.
#[derive(Clone, Debug, PartialEq)]
pub struct VesselGraph {
    nodes: Vec<CenterlineNode>,
    edges: Vec<CenterlineEdge>,
    adjacency: Vec<Vec<usize>>,
    terminals: Vec<usize>,
    bifurcations: Vec<usize>,
    labels: BTreeMap<String, usize>,
}

impl VesselGraph {
    /// Validates and builds a graph. Node `i` gets id `i`; edge `k` gets id `k`.
    pub fn new(
        nodes: Vec<(Point3, f64)>,
        edges: Vec<(usize, usize)>,
        labels: BTreeMap<String, usize>,
    ) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = nodes.len();
        for (i, (p, r)) in nodes.iter().enumerate() {
            if !p.is_finite() {
                return Err(GraphError::NonFinitePosition { node: i });
            }
            if !(*r > 0.0 && r.is_finite()) {
                return Err(GraphError::NonPositiveRadius { node: i, radius: *r });
            }
        }

        let mut seen = HashSet::new();
        let mut adjacency = vec![Vec::new(); n];
        let mut built = Vec::with_capacity(edges.len());
        for (k, &(a, b)) in edges.iter().enumerate() {
            for node in [a, b] {
                if node >= n {
                    return Err(GraphError::MissingNode { edge: k, node });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop { edge: k, node: a });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GraphError::DuplicateEdge { edge: k, a, b });
            }
            adjacency[a].push(k);
            adjacency[b].push(k);
            built.push(CenterlineEdge {
                id: k,
                endpoints: (a, b),
                length: nodes[a].0.distance(nodes[b].0),
            });
        }

        if let Some(i) = adjacency.iter().position(|adj| adj.is_empty()) {
            return Err(GraphError::IsolatedNode { node: i });
        }

        // Connectivity from node 0.
        let mut reached = vec![false; n];
        let mut stack = vec![0];
        reached[0] = true;
        while let Some(u) = stack.pop() {
            for &e in &adjacency[u] {
                let v = built[e].other(u);
                if !reached[v] {
                    reached[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(GraphError::Disconnected { node: i });
        }

        check_separation(&nodes)?;

        for (label, &node) in &labels {
            if node >= n {
                return Err(GraphError::BadLabel {
                    label: label.clone(),
                    node,
                });
            }
        }

        let terminals = (0..n).filter(|&i| adjacency[i].len() == 1).collect();
        let bifurcations = (0..n).filter(|&i| adjacency[i].len() >= 3).collect();
        let mut graph = VesselGraph {
            nodes: nodes
                .into_iter()
                .enumerate()
                .map(|(id, (position, radius))| CenterlineNode {
                    id,
                    position,
                    radius,
                    curvature: 0.0,
                })
                .collect(),
            edges: built,
            adjacency,
            terminals,
            bifurcations,
            labels,
        };
        for i in 0..n {
            graph.nodes[i].curvature = graph.node_curvature(i);
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[CenterlineNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &CenterlineNode {
        &self.nodes[id]
    }

    pub fn edges(&self) -> &[CenterlineEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &CenterlineEdge {
        &self.edges[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, id: usize) -> bool {
        id < self.nodes.len()
    }

    /// Incident edge ids of a node, ascending.
    pub fn incident(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Degree-1 nodes, ascending.
    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    /// Nodes of degree 3 or more, ascending.
    pub fn bifurcations(&self) -> &[usize] {
        &self.bifurcations
    }

    pub fn labels(&self) -> &BTreeMap<String, usize> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Result<usize, GraphError> {
        self.labels
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownLabel(name.to_string()))
    }

    pub fn position(&self, node: usize) -> Point3 {
        self.nodes[node].position
    }

    /// Effective edge weight `length * (1 + alpha * mean endpoint curvature)`.
    pub fn edge_weight(&self, edge: usize, alpha: f64) -> f64 {
        let e = &self.edges[edge];
        let (a, b) = e.endpoints;
        let mean_k = 0.5 * (self.nodes[a].curvature + self.nodes[b].curvature);
        e.length * (1.0 + alpha * mean_k)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for n in &self.nodes {
            let p = n.position;
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (lo, hi)
    }

    pub fn bounding_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.distance(hi)
    }

    /// Menger curvature at a degree-2 node; zero elsewhere.
    pub fn node_curvature(&self, node: usize) -> f64 {
        let adj = &self.adjacency[node];
        if adj.len() != 2 {
            return 0.0;
        }
        let prev = self.edges[adj[0]].other(node);
        let next = self.edges[adj[1]].other(node);
        menger_curvature(
            self.nodes[prev].position,
            self.nodes[node].position,
            self.nodes[next].position,
        )
    }

    /// Id of the node closest to `point`; ties go to the smaller id.
    pub fn nearest_node(&self, point: Point3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for n in &self.nodes {
            let d = n.position.distance(point);
            if d < best_d {
                best_d = d;
                best = n.id;
            }
        }
        best
    }

    /// Unit direction of `edge` when leaving `from`.
    pub fn edge_direction(&self, edge: usize, from: usize) -> Point3 {
        let to = self.edges[edge].other(from);
        (self.nodes[to].position - self.nodes[from].position) / self.edges[edge].length
    }

    /// Arc length of the path from `from` to `to` following the unique chain
    /// of edges in a tree (BFS with smallest-edge-id preference).
    pub fn path_length(&self, from: usize, to: usize) -> Option<f64> {
        self.edge_path(from, to)
            .map(|p| p.iter().map(|&e| self.edges[e].length).sum())
    }

    /// Edge ids along a fewest-edges path from `from` to `to`.
    pub fn edge_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        if !self.contains_node(from) || !self.contains_node(to) {
            return None;
        }
        let n = self.nodes.len();
        let mut via: Vec<Option<usize>> = vec![None; n];
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::from([from]);
        visited[from] = true;
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &e in &self.adjacency[u] {
                let v = self.edges[e].other(u);
                if !visited[v] {
                    visited[v] = true;
                    via[v] = Some(e);
                    queue.push_back(v);
                }
            }
        }
        if !visited[to] {
            return None;
        }
        let mut path = Vec::new();
        let mut cur = to;
        while cur != from {
            let e = via[cur]?;
            path.push(e);
            cur = self.edges[e].other(cur);
        }
        path.reverse();
        Some(path)
    }
}

/// Curvature of the circle through three points:
/// `4 * area / (|ab| * |bc| * |ca|)`. Zero for coincident or collinear points.
pub fn menger_curvature(a: Point3, b: Point3, c: Point3) -> f64 {
    let ab = b - a;
    let bc = c - b;
    let ca = a - c;
    let denom = ab.norm() * bc.norm() * ca.norm();
    if denom == 0.0 {
        return 0.0;
    }
    // 4 * (|ab x ac| / 2)
    2.0 * ab.cross(c - a).norm() / denom
}

fn check_separation(nodes: &[(Point3, f64)]) -> Result<(), GraphError> {
    // Sort by x so only a narrow window needs pairwise checks.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&i, &j| nodes[i].0.x.total_cmp(&nodes[j].0.x).then(i.cmp(&j)));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if nodes[j].0.x - nodes[i].0.x > MIN_NODE_SEPARATION {
                break;
            }
            if nodes[i].0.distance(nodes[j].0) <= MIN_NODE_SEPARATION {
                return Err(GraphError::CoincidentNodes {
                    a: i.min(j),
                    b: i.max(j),
                });
            }
        }
    }
    Ok(())
}
