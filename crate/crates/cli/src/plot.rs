//! Byte-stable SVG projections of the vessel tree and recorded trajectories.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{bail, Result};
use vasonav::env::TrajectoryRow;
use vasonav::vesselgraph::VesselGraph;
use vasonav::Point3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Plane {
    Xy,
    Xz,
    Yz,
}

impl Plane {
    fn project(self, p: Point3) -> (f64, f64) {
        match self {
            Plane::Xy => (p.x, p.y),
            Plane::Xz => (p.x, p.z),
            Plane::Yz => (p.y, p.z),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Xy => "xy",
            Plane::Xz => "xz",
            Plane::Yz => "yz",
        }
    }
}

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Renders the centerline (one `path` element, class `vessel`) and one
/// `path` per episode (class `trajectory`) projected onto `plane`.
pub fn render_svg(graph: &VesselGraph, rows: &[TrajectoryRow], plane: Plane) -> Result<String> {
    if rows.is_empty() {
        bail!("trajectory log is empty");
    }
    let pts: Vec<(f64, f64)> = graph
        .nodes()
        .iter()
        .map(|n| plane.project(n.position))
        .chain(rows.iter().map(|r| plane.project(r.p)))
        .collect();
    let (mut lo_u, mut lo_v, mut hi_u, mut hi_v) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(u, v) in &pts {
        lo_u = lo_u.min(u);
        lo_v = lo_v.min(v);
        hi_u = hi_u.max(u);
        hi_v = hi_v.max(v);
    }
    let span = (hi_u - lo_u).max(hi_v - lo_v).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    // SVG y grows downwards; flip so the second axis points up.
    let map = |p: Point3| {
        let (u, v) = plane.project(p);
        (MARGIN + (u - lo_u) * scale, SIZE - MARGIN - (v - lo_v) * scale)
    };

    let mut vessel = String::new();
    for e in graph.edges() {
        let (a, b) = e.endpoints;
        let (ax, ay) = map(graph.position(a));
        let (bx, by) = map(graph.position(b));
        let _ = write!(vessel, "M{ax:.3} {ay:.3}L{bx:.3} {by:.3}");
    }

    let mut episodes: BTreeMap<usize, Vec<&TrajectoryRow>> = BTreeMap::new();
    for r in rows {
        episodes.entry(r.episode).or_default().push(r);
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<title>trajectory ({} plane)</title>"#, plane.name());
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<path class="vessel" d="{vessel}" fill="none" stroke="#c04040" stroke-width="6" stroke-linecap="round" stroke-opacity="0.35"/>"##
    );
    for (ep, rows) in episodes {
        let mut d = String::new();
        for (i, r) in rows.iter().enumerate() {
            let (x, y) = map(r.p);
            let _ = write!(d, "{}{x:.3} {y:.3}", if i == 0 { 'M' } else { 'L' });
        }
        let _ = writeln!(
            svg,
            r##"<path class="trajectory" data-episode="{ep}" d="{d}" fill="none" stroke="#2040c0" stroke-width="1.5"/>"##
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
