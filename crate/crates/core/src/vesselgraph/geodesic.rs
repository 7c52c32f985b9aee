use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{GraphError, VesselGraph};
use crate::geometry::Point3;

/// Single-source shortest along-vessel distances to a goal node.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicField {
    goal: usize,
    alpha: f64,
    dist: Vec<f64>,
}

/// Closest point on the centerline polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub edge: usize,
    /// Fraction along the edge from its first endpoint, in [0, 1].
    pub t: f64,
    /// Euclidean distance from the query point to the polyline, mm.
    pub offset: f64,
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on (dist, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `goal` with edge weights `length * (1 + alpha * mean curvature)`.
pub fn geodesic_from(graph: &VesselGraph, goal: usize, alpha: f64) -> Result<GeodesicField, GraphError> {
    if !graph.contains_node(goal) {
        return Err(GraphError::NoSuchNode(goal));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(GraphError::Degenerate(format!("alpha must be >= 0, got {alpha}")));
    }
    let weights: Vec<f64> = (0..graph.edge_count()).map(|e| graph.edge_weight(e, alpha)).collect();
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    let mut done = vec![false; graph.node_count()];
    let mut heap = BinaryHeap::new();
    dist[goal] = 0.0;
    heap.push(Entry { dist: 0.0, node: goal });
    while let Some(Entry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &e in graph.incident(u) {
            let v = graph.edge(e).other(u);
            let nd = d + weights[e];
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry { dist: nd, node: v });
            }
        }
    }
    Ok(GeodesicField { goal, alpha, dist })
}

impl GeodesicField {
    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    pub fn node_distance(&self, node: usize) -> f64 {
        self.dist[node]
    }

    /// Distance at fraction `t` along `edge`, measured from its first endpoint.
    pub fn edge_distance(&self, graph: &VesselGraph, edge: usize, t: f64) -> f64 {
        let (a, b) = graph.edge(edge).endpoints;
        if t <= 0.0 {
            self.dist[a]
        } else if t >= 1.0 {
            self.dist[b]
        } else {
            self.dist[a] + (self.dist[b] - self.dist[a]) * t
        }
    }

    /// Distance from an arbitrary point on (or near) the centerline to the goal.
    pub fn manifold_distance(&self, graph: &VesselGraph, point: Point3) -> Result<f64, GraphError> {
        let p = project(graph, point)?;
        Ok(self.edge_distance(graph, p.edge, p.t))
    }
}

/// Projects a point onto the nearest edge; ties go to the smaller edge id.
/// Fails when the point is farther than one node spacing (longest edge) from
/// every edge.
pub fn project(graph: &VesselGraph, point: Point3) -> Result<Projection, GraphError> {
    let mut best: Option<Projection> = None;
    for e in graph.edges() {
        let (a, b) = e.endpoints;
        let pa = graph.position(a);
        let ab = graph.position(b) - pa;
        let t = ((point - pa).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
        let offset = point.distance(pa.lerp(graph.position(b), t));
        if best.is_none_or(|p| offset < p.offset) {
            best = Some(Projection { edge: e.id, t, offset });
        }
    }
    let best = best.expect("validated graphs have edges");
    if best.offset > graph.max_edge_length() {
        return Err(GraphError::OffCenterline {
            point: point.to_array(),
            offset: best.offset,
        });
    }
    Ok(best)
}
