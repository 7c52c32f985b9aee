use std::collections::BTreeMap;

use super::phantom::segment_count;
use super::{GraphError, VesselGraph};
use crate::geometry::Point3;

/// A maximal run of edges between two nodes of degree != 2.
struct Chain {
    nodes: Vec<usize>,
    cumulative: Vec<f64>,
}

impl Chain {
    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Position and radius at arc length `s` along the chain.
    fn sample(&self, graph: &VesselGraph, s: f64) -> (Point3, f64) {
        let k = self.cumulative.partition_point(|&c| c <= s).clamp(1, self.nodes.len() - 1);
        let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
        let t = if c1 > c0 { (s - c0) / (c1 - c0) } else { 0.0 };
        let a = graph.node(self.nodes[k - 1]);
        let b = graph.node(self.nodes[k]);
        (
            a.position.lerp(b.position, t),
            a.radius + (b.radius - a.radius) * t,
        )
    }
}

fn chains(graph: &VesselGraph) -> Vec<Chain> {
    let mut keys: Vec<usize> = (0..graph.node_count())
        .filter(|&i| graph.degree(i) != 2)
        .collect();
    if keys.is_empty() {
        keys.push(0);
    }
    let mut visited = vec![false; graph.edge_count()];
    let mut out = Vec::new();
    for &k in &keys {
        for &first in graph.incident(k) {
            if visited[first] {
                continue;
            }
            let mut nodes = vec![k];
            let mut cumulative = vec![0.0];
            let mut edge = first;
            let mut at = k;
            loop {
                visited[edge] = true;
                at = graph.edge(edge).other(at);
                nodes.push(at);
                cumulative.push(cumulative.last().unwrap() + graph.edge(edge).length);
                if graph.degree(at) != 2 || at == k {
                    break;
                }
                match graph.incident(at).iter().find(|&&e| !visited[e]) {
                    Some(&e) => edge = e,
                    None => break,
                }
            }
            out.push(Chain { nodes, cumulative });
        }
    }
    out
}

/// Resamples every branch to a uniform spacing close to `spacing`, keeping
/// terminals and bifurcations at their exact positions.
pub fn resample(graph: &VesselGraph, spacing: f64) -> Result<VesselGraph, GraphError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(GraphError::Degenerate(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let chains = chains(graph);
    let shortest = chains.iter().map(Chain::length).fold(f64::INFINITY, f64::min);
    if spacing > shortest {
        return Err(GraphError::SpacingTooLarge { spacing, shortest });
    }

    let mut new_id: Vec<Option<usize>> = vec![None; graph.node_count()];
    let mut nodes: Vec<(Point3, f64)> = Vec::new();
    let mut edges = Vec::new();
    let mut keep = |old: usize, nodes: &mut Vec<(Point3, f64)>| -> usize {
        *new_id[old].get_or_insert_with(|| {
            let n = graph.node(old);
            nodes.push((n.position, n.radius));
            nodes.len() - 1
        })
    };

    for chain in &chains {
        let first = keep(chain.nodes[0], &mut nodes);
        let len = chain.length();
        let n = segment_count(len, spacing);
        let mut prev = first;
        for i in 1..n {
            nodes.push(chain.sample(graph, len * i as f64 / n as f64));
            let id = nodes.len() - 1;
            edges.push((prev, id));
            prev = id;
        }
        let last = keep(*chain.nodes.last().unwrap(), &mut nodes);
        edges.push((prev, last));
    }

    let labels: BTreeMap<String, usize> = graph
        .labels()
        .iter()
        .map(|(name, &old)| {
            let id = new_id[old].unwrap_or_else(|| {
                let p = graph.position(old);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, (q, _)) in nodes.iter().enumerate() {
                    let d = q.distance(p);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                best
            });
            (name.clone(), id)
        })
        .collect();

    VesselGraph::new(nodes, edges, labels)
}
