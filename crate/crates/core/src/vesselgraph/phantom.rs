//! Procedural vascular phantoms.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{GraphError, VesselGraph};
use crate::geometry::Point3;

/// Number of segments for a length at a target spacing; edges end up within
/// `(0.75, 1.5] * spacing` whenever `length >= spacing`.
pub(crate) fn segment_count(length: f64, spacing: f64) -> usize {
    ((length / spacing).round() as usize).max(1)
}

/// Y-shaped bifurcation: a trunk along +z from the origin splitting into two
/// branches tilted towards +x (End Point A) and -x (End Point B).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplifiedPhantomParams {
    /// Half-angle between the branches and the trunk axis, radians.
    pub branch_angle: f64,
    pub trunk_length: f64,
    pub branch_length: f64,
    pub radius: f64,
    pub spacing: f64,
}

impl Default for SimplifiedPhantomParams {
    fn default() -> Self {
        Self {
            branch_angle: 0.5,
            trunk_length: 100.0,
            branch_length: 80.0,
            radius: 1.5,
            spacing: 2.0,
        }
    }
}

/// Inlet, a circular arch, then two successive bifurcations. End Point A
/// branches off at the first bifurcation, End Point B (and a distractor C) at
/// the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexPhantomParams {
    pub inlet_length: f64,
    pub arch_radius: f64,
    /// Swept angle of the arch, radians.
    pub arch_angle: f64,
    pub link_length: f64,
    pub first_branch_angle: f64,
    pub mid_length: f64,
    pub second_branch_angle: f64,
    pub branch_length: f64,
    pub radius: f64,
    pub spacing: f64,
}

impl Default for ComplexPhantomParams {
    fn default() -> Self {
        Self {
            inlet_length: 40.0,
            arch_radius: 40.0,
            arch_angle: FRAC_PI_2,
            link_length: 20.0,
            first_branch_angle: 0.6,
            mid_length: 40.0,
            second_branch_angle: 0.6,
            branch_length: 50.0,
            radius: 1.5,
            spacing: 1.0,
        }
    }
}

/// Single straight vessel along +z; labels `start` and `end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StraightVesselParams {
    pub length: f64,
    pub radius: f64,
    pub spacing: f64,
}

impl Default for StraightVesselParams {
    fn default() -> Self {
        Self {
            length: 100.0,
            radius: 1.5,
            spacing: 2.0,
        }
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<(Point3, f64)>,
    edges: Vec<(usize, usize)>,
    labels: BTreeMap<String, usize>,
}

impl Builder {
    fn node(&mut self, p: Point3, radius: f64) -> usize {
        self.nodes.push((p, radius));
        self.nodes.len() - 1
    }

    /// Appends `points` (excluding `from`) as a chain hanging off `from`.
    /// Returns the id of the last node.
    fn chain(&mut self, from: usize, points: impl IntoIterator<Item = Point3>, radius: f64) -> usize {
        let mut prev = from;
        for p in points {
            let id = self.node(p, radius);
            self.edges.push((prev, id));
            prev = id;
        }
        prev
    }

    fn straight(&mut self, from: usize, dir: Point3, length: f64, spacing: f64, radius: f64) -> usize {
        let origin = self.nodes[from].0;
        let n = segment_count(length, spacing);
        let pts: Vec<Point3> = (1..=n)
            .map(|i| origin + dir * (length * i as f64 / n as f64))
            .collect();
        self.chain(from, pts, radius)
    }

    fn label(&mut self, name: &str, node: usize) {
        self.labels.insert(name.to_string(), node);
    }

    fn finish(self) -> Result<VesselGraph, GraphError> {
        VesselGraph::new(self.nodes, self.edges, self.labels)
    }
}

fn positive(name: &str, v: f64) -> Result<(), GraphError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GraphError::Degenerate(format!("{name} must be positive, got {v}")))
    }
}

fn acute(name: &str, v: f64) -> Result<(), GraphError> {
    if v > 0.0 && v < FRAC_PI_2 {
        Ok(())
    } else {
        Err(GraphError::Degenerate(format!("{name} must lie in (0, pi/2), got {v}")))
    }
}

fn spacing_fits(spacing: f64, lengths: &[f64]) -> Result<(), GraphError> {
    let shortest = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    if spacing > shortest {
        return Err(GraphError::SpacingTooLarge { spacing, shortest });
    }
    Ok(())
}

pub fn generate_simplified_phantom(p: &SimplifiedPhantomParams) -> Result<VesselGraph, GraphError> {
    positive("trunk_length", p.trunk_length)?;
    positive("branch_length", p.branch_length)?;
    positive("radius", p.radius)?;
    positive("spacing", p.spacing)?;
    acute("branch_angle", p.branch_angle)?;
    if p.spacing > p.trunk_length / 2.0 {
        return Err(GraphError::Degenerate(format!(
            "spacing {} exceeds half the trunk length",
            p.spacing
        )));
    }
    spacing_fits(p.spacing, &[p.branch_length])?;

    let mut b = Builder::default();
    let start = b.node(Point3::ZERO, p.radius);
    let bif = b.straight(start, Point3::Z, p.trunk_length, p.spacing, p.radius);
    let (s, c) = p.branch_angle.sin_cos();
    let a = b.straight(bif, Point3::new(s, 0.0, c), p.branch_length, p.spacing, p.radius);
    let bb = b.straight(bif, Point3::new(-s, 0.0, c), p.branch_length, p.spacing, p.radius);
    b.label("start", start);
    b.label("bifurcation", bif);
    b.label("endpoint_a", a);
    b.label("endpoint_b", bb);
    b.finish()
}

pub fn generate_complex_phantom(p: &ComplexPhantomParams) -> Result<VesselGraph, GraphError> {
    positive("inlet_length", p.inlet_length)?;
    positive("arch_radius", p.arch_radius)?;
    positive("link_length", p.link_length)?;
    positive("mid_length", p.mid_length)?;
    positive("branch_length", p.branch_length)?;
    positive("radius", p.radius)?;
    positive("spacing", p.spacing)?;
    acute("first_branch_angle", p.first_branch_angle)?;
    acute("second_branch_angle", p.second_branch_angle)?;
    if !(p.arch_angle > 0.0 && p.arch_angle < std::f64::consts::PI) {
        return Err(GraphError::Degenerate(format!(
            "arch_angle must lie in (0, pi), got {}",
            p.arch_angle
        )));
    }
    let arc_length = p.arch_radius * p.arch_angle;
    spacing_fits(
        p.spacing,
        &[p.inlet_length, arc_length, p.link_length, p.mid_length, p.branch_length],
    )?;

    let mut b = Builder::default();
    let start = b.node(Point3::ZERO, p.radius);
    let inlet_end = b.straight(start, Point3::Z, p.inlet_length, p.spacing, p.radius);

    // Arch in the xz-plane, starting tangent to +z and bending towards +x.
    let r = p.arch_radius;
    let center = b.nodes[inlet_end].0 + Point3::X * r;
    let n = segment_count(arc_length, p.spacing);
    let arc: Vec<Point3> = (1..=n)
        .map(|i| {
            let phi = p.arch_angle * i as f64 / n as f64;
            center + Point3::new(-r * phi.cos(), 0.0, r * phi.sin())
        })
        .collect();
    let arch_end = b.chain(inlet_end, arc, p.radius);

    let (s, c) = p.arch_angle.sin_cos();
    let d1 = Point3::new(s, 0.0, c);
    let in_plane = Point3::new(c, 0.0, -s);
    let bif1 = b.straight(arch_end, d1, p.link_length, p.spacing, p.radius);

    let (s1, c1) = p.first_branch_angle.sin_cos();
    let end_a = b.straight(bif1, d1 * c1 + in_plane * s1, p.branch_length, p.spacing, p.radius);
    let d2 = d1 * c1 - in_plane * s1;
    let bif2 = b.straight(bif1, d2, p.mid_length, p.spacing, p.radius);

    let (s2, c2) = p.second_branch_angle.sin_cos();
    let end_b = b.straight(bif2, d2 * c2 + Point3::Y * s2, p.branch_length, p.spacing, p.radius);
    let end_c = b.straight(bif2, d2 * c2 - Point3::Y * s2, p.branch_length, p.spacing, p.radius);

    b.label("start", start);
    b.label("arch_start", inlet_end);
    b.label("arch_end", arch_end);
    b.label("bifurcation_1", bif1);
    b.label("bifurcation_2", bif2);
    b.label("endpoint_a", end_a);
    b.label("endpoint_b", end_b);
    b.label("endpoint_c", end_c);
    b.finish()
}

pub fn generate_straight_vessel(p: &StraightVesselParams) -> Result<VesselGraph, GraphError> {
    positive("length", p.length)?;
    positive("radius", p.radius)?;
    positive("spacing", p.spacing)?;
    spacing_fits(p.spacing, &[p.length])?;
    let mut b = Builder::default();
    let start = b.node(Point3::ZERO, p.radius);
    let end = b.straight(start, Point3::Z, p.length, p.spacing, p.radius);
    b.label("start", start);
    b.label("end", end);
    b.finish()
}
