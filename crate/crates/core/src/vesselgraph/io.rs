use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GraphError, VesselGraph};
use crate::geometry::Point3;

pub const FORMAT_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub radius: f64,
}

/// On-disk centerline schema (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterlineDocument {
    pub format_version: String,
    pub unit: String,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, usize>,
}

impl CenterlineDocument {
    pub fn into_graph(self) -> Result<VesselGraph, GraphError> {
        if self.format_version != FORMAT_VERSION {
            return Err(GraphError::UnsupportedVersion(self.format_version));
        }
        if self.unit != "mm" {
            return Err(GraphError::UnsupportedUnit(self.unit));
        }
        for (index, n) in self.nodes.iter().enumerate() {
            if n.id != index {
                return Err(GraphError::NonDenseIds { index, found: n.id });
            }
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| (Point3::new(n.x, n.y, n.z), n.radius))
            .collect();
        let edges = self.edges.iter().map(|e| (e[0], e[1])).collect();
        VesselGraph::new(nodes, edges, self.labels)
    }
}

/// Parses and validates a centerline document.
pub fn load_centerline(text: &str) -> Result<VesselGraph, GraphError> {
    let doc: CenterlineDocument =
        serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
    doc.into_graph()
}

pub fn to_centerline_document(graph: &VesselGraph) -> CenterlineDocument {
    CenterlineDocument {
        format_version: FORMAT_VERSION.to_string(),
        unit: "mm".to_string(),
        nodes: graph
            .nodes()
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                x: n.position.x,
                y: n.position.y,
                z: n.position.z,
                radius: n.radius,
            })
            .collect(),
        edges: graph
            .edges()
            .iter()
            .map(|e| [e.endpoints.0, e.endpoints.1])
            .collect(),
        labels: graph.labels().clone(),
    }
}
