//! Centerline-constrained guidewire kinematics.
//!
//! The tip slides along the centerline polyline. Insertion pushes edges onto a
//! path stack, retraction pops them. At a bifurcation the wire follows the
//! outgoing branch whose tangent best aligns with the bent-tip heading, which
//! is set by the roll angle around the transported (rotation-minimizing) frame.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Frame, Point3};
use crate::vesselgraph::VesselGraph;

/// Residual motion below this is treated as zero, so float round-off never
/// pushes the tip onto the next edge.
const MOTION_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("start node {0} is not a terminal")]
    StartNotTerminal(usize),
    #[error("node {0} does not exist")]
    NoSuchNode(usize),
    #[error("invalid guidewire config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidewireConfig {
    /// Angle between the tip and the shaft, radians.
    pub tip_bend: f64,
    /// Simulated time per environment step, seconds.
    pub step_period: f64,
    pub max_step_translation: f64,
    pub max_step_rotation: f64,
    /// Std-dev of Gaussian noise added to branch scores.
    pub branch_noise_sigma: f64,
}

impl Default for GuidewireConfig {
    fn default() -> Self {
        Self {
            tip_bend: 0.52,
            step_period: 0.1,
            max_step_translation: 2.0,
            max_step_rotation: 0.3,
            branch_noise_sigma: 0.0,
        }
    }
}

impl GuidewireConfig {
    pub fn validate(&self) -> Result<(), WireError> {
        let bad = |m: &str| Err(WireError::InvalidConfig(m.to_string()));
        if !(self.tip_bend > 0.0 && self.tip_bend < std::f64::consts::FRAC_PI_2) {
            return bad("tip_bend must lie in (0, pi/2)");
        }
        if !(self.step_period > 0.0 && self.step_period.is_finite()) {
            return bad("step_period must be positive");
        }
        if !(self.max_step_translation > 0.0 && self.max_step_translation.is_finite()) {
            return bad("max_step_translation must be positive");
        }
        if !(self.max_step_rotation > 0.0 && self.max_step_rotation.is_finite()) {
            return bad("max_step_rotation must be positive");
        }
        if !(self.branch_noise_sigma >= 0.0 && self.branch_noise_sigma.is_finite()) {
            return bad("branch_noise_sigma must be >= 0");
        }
        Ok(())
    }

    /// Clips an action to the per-step bounds. NaN components become 0.
    pub fn clip(&self, action: [f64; 2]) -> [f64; 2] {
        let c = |v: f64, m: f64| if v.is_nan() { 0.0 } else { v.clamp(-m, m) };
        [
            c(action[0], self.max_step_translation),
            c(action[1], self.max_step_rotation),
        ]
    }
}

/// One traversed edge on the path stack.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSegment {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
    /// Inserted length at which this edge was entered.
    pub start_length: f64,
    /// Transported frame while on this edge; tangent = edge direction.
    pub frame: Frame,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireEvent {
    None,
    BranchTaken { node: usize, edge: usize },
    ReachedTerminal { node: usize },
    WallCollision { node: usize },
}

impl WireEvent {
    fn priority(&self) -> u8 {
        match self {
            WireEvent::None => 0,
            WireEvent::BranchTaken { .. } => 1,
            WireEvent::ReachedTerminal { .. } => 2,
            WireEvent::WallCollision { .. } => 3,
        }
    }

    fn merge(self, other: WireEvent) -> WireEvent {
        if other.priority() > self.priority() {
            other
        } else {
            self
        }
    }

    pub fn is_collision(&self) -> bool {
        matches!(self, WireEvent::WallCollision { .. })
    }

    /// Short token used in logs and wire messages.
    pub fn name(&self) -> &'static str {
        match self {
            WireEvent::None => "none",
            WireEvent::BranchTaken { .. } => "branch_taken",
            WireEvent::ReachedTerminal { .. } => "reached_terminal",
            WireEvent::WallCollision { .. } => "wall_collision",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuidewireState {
    pub inserted_length: f64,
    /// Roll about the shaft, in [0, 2pi).
    pub roll: f64,
    pub tip: Point3,
    pub prev_tip: Point3,
    /// mm/s
    pub velocity: Point3,
    start: usize,
    path: Vec<PathSegment>,
    /// Arc length of the tip along the last path segment.
    offset: f64,
    base_frame: Frame,
}

impl GuidewireState {
    pub fn path(&self) -> &[PathSegment] {
        &self.path
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn frame(&self) -> Frame {
        self.path.last().map_or(self.base_frame, |s| s.frame)
    }

    /// Sum of traversed edge lengths plus the offset into the current edge.
    pub fn path_arc_length(&self, graph: &VesselGraph) -> f64 {
        match self.path.split_last() {
            None => 0.0,
            Some((_, done)) => done.iter().map(|s| graph.edge(s.edge).length).sum::<f64>() + self.offset,
        }
    }

    /// Edge containing the tip and the fraction along it measured from the
    /// edge's first endpoint. `None` before insertion.
    pub fn current_edge(&self, graph: &VesselGraph) -> Option<(usize, f64)> {
        let seg = self.path.last()?;
        let e = graph.edge(seg.edge);
        let frac = if self.offset >= e.length { 1.0 } else { self.offset / e.length };
        let t = if seg.from == e.endpoints.0 { frac } else { 1.0 - frac };
        Some((seg.edge, t))
    }

    /// Node the tip sits on exactly, if any, with the edge it arrived by.
    fn at_node(&self, graph: &VesselGraph) -> Option<(usize, Option<usize>)> {
        match self.path.last() {
            None => Some((self.start, None)),
            Some(seg) if self.offset >= graph.edge(seg.edge).length => Some((seg.to, Some(seg.edge))),
            Some(_) => None,
        }
    }

    fn update_tip(&mut self, graph: &VesselGraph) {
        self.tip = match self.path.last() {
            None => graph.position(self.start),
            Some(seg) => {
                let len = graph.edge(seg.edge).length;
                if self.offset >= len {
                    graph.position(seg.to)
                } else if self.offset <= 0.0 {
                    graph.position(seg.from)
                } else {
                    graph.position(seg.from).lerp(graph.position(seg.to), self.offset / len)
                }
            }
        };
        self.inserted_length = self.path.last().map_or(0.0, |s| s.start_length + self.offset);
    }

    /// Bent-tip direction: `cos(bend) t + sin(bend) (cos(roll) n + sin(roll) b)`.
    pub fn heading(&self, config: &GuidewireConfig) -> Point3 {
        heading_from(self.frame(), self.roll, config.tip_bend)
    }

    /// In-place rotation. Sets the step's displacement to zero.
    pub fn rotate_mut(&mut self, delta: f64) {
        self.roll = wrap_angle(self.roll + delta);
        self.prev_tip = self.tip;
        self.velocity = Point3::ZERO;
    }

    /// In-place translation along the centerline; see [`advance`].
    pub fn advance_mut<R: Rng + ?Sized>(
        &mut self,
        graph: &VesselGraph,
        config: &GuidewireConfig,
        delta: f64,
        rng: &mut R,
    ) -> WireEvent {
        let before = self.tip;
        let event = if delta > 0.0 {
            self.insert(graph, config, delta, rng)
        } else {
            if delta < 0.0 {
                self.retract(graph, -delta);
            }
            WireEvent::None
        };
        self.update_tip(graph);
        self.prev_tip = before;
        self.velocity = (self.tip - before) / config.step_period;
        event
    }

    fn insert<R: Rng + ?Sized>(
        &mut self,
        graph: &VesselGraph,
        config: &GuidewireConfig,
        delta: f64,
        rng: &mut R,
    ) -> WireEvent {
        let mut remaining = delta;
        let mut event = WireEvent::None;
        while remaining > MOTION_EPS {
            if let Some(seg) = self.path.last() {
                let len = graph.edge(seg.edge).length;
                if self.offset < len {
                    let room = len - self.offset;
                    // Arrivals within rounding distance of a node snap onto it,
                    // so accumulated steps land on nodes exactly.
                    if remaining >= room - MOTION_EPS {
                        self.offset = len;
                        remaining = (remaining - room).max(0.0);
                    } else {
                        self.offset += remaining;
                        remaining = 0.0;
                    }
                    continue;
                }
            }
            let (at, incoming) = self.at_node(graph).expect("tip is at a node here");
            let candidates: Vec<usize> = graph
                .incident(at)
                .iter()
                .copied()
                .filter(|&e| Some(e) != incoming)
                .collect();
            let chosen = match candidates.len() {
                0 => {
                    // Overrun at a terminal: the tip stays put.
                    event = event.merge(WireEvent::WallCollision { node: at });
                    break;
                }
                1 => candidates[0],
                _ => {
                    let heading = self.heading(config);
                    let tangents: Vec<(usize, Point3)> = candidates
                        .iter()
                        .map(|&e| (e, graph.edge_direction(e, at)))
                        .collect();
                    let noise: Vec<f64> = if config.branch_noise_sigma > 0.0 {
                        tangents
                            .iter()
                            .map(|_| config.branch_noise_sigma * rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    } else {
                        vec![0.0; tangents.len()]
                    };
                    let e = choose_branch(heading, &tangents, &noise);
                    event = event.merge(WireEvent::BranchTaken { node: at, edge: e });
                    e
                }
            };
            let start_length = self.path.last().map_or(0.0, |s| s.start_length + self.offset);
            let frame = self.frame().transport(graph.edge_direction(chosen, at));
            self.path.push(PathSegment {
                edge: chosen,
                from: at,
                to: graph.edge(chosen).other(at),
                start_length,
                frame,
            });
            self.offset = 0.0;
        }
        if let Some((at, Some(_))) = self.at_node(graph) {
            if graph.degree(at) == 1 {
                event = event.merge(WireEvent::ReachedTerminal { node: at });
            }
        }
        event
    }

    fn retract(&mut self, graph: &VesselGraph, amount: f64) {
        let mut remaining = amount;
        while remaining > MOTION_EPS {
            if self.path.is_empty() {
                break;
            }
            if remaining < self.offset {
                self.offset -= remaining;
                break;
            }
            remaining -= self.offset;
            self.path.pop();
            self.offset = self.path.last().map_or(0.0, |s| graph.edge(s.edge).length);
        }
        if self.path.is_empty() {
            self.offset = 0.0;
        }
    }
}

/// Wraps an angle into [0, 2pi).
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn heading_from(frame: Frame, roll: f64, tip_bend: f64) -> Point3 {
    let (sr, cr) = roll.sin_cos();
    let (sb, cb) = tip_bend.sin_cos();
    frame.tangent * cb + (frame.normal * cr + frame.binormal * sr) * sb
}

/// Index-free branch choice: the candidate edge maximizing
/// `heading . tangent + noise`; ties go to the smallest edge id.
pub fn choose_branch(heading: Point3, candidates: &[(usize, Point3)], noise: &[f64]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(edge, tangent)) in candidates.iter().enumerate() {
        let score = heading.dot(tangent) + noise.get(i).copied().unwrap_or(0.0);
        match best {
            Some((b, s)) if score < s || (score == s && edge > b) => {}
            _ => best = Some((edge, score)),
        }
    }
    best.expect("at least one candidate").0
}

/// Wire at the start terminal: nothing inserted, roll 0, frame tangent pointing
/// into the vessel.
pub fn reset_wire(graph: &VesselGraph, start: usize, config: &GuidewireConfig) -> Result<GuidewireState, WireError> {
    config.validate()?;
    if !graph.contains_node(start) {
        return Err(WireError::NoSuchNode(start));
    }
    if graph.degree(start) != 1 {
        return Err(WireError::StartNotTerminal(start));
    }
    let edge = graph.incident(start)[0];
    let p = graph.position(start);
    Ok(GuidewireState {
        inserted_length: 0.0,
        roll: 0.0,
        tip: p,
        prev_tip: p,
        velocity: Point3::ZERO,
        start,
        path: Vec::new(),
        offset: 0.0,
        base_frame: Frame::from_tangent(graph.edge_direction(edge, start)),
    })
}

pub fn heading(state: &GuidewireState, config: &GuidewireConfig) -> Point3 {
    state.heading(config)
}

/// Moves the tip `delta` mm along the centerline (negative retracts).
pub fn advance<R: Rng + ?Sized>(
    state: &GuidewireState,
    graph: &VesselGraph,
    config: &GuidewireConfig,
    delta: f64,
    rng: &mut R,
) -> (GuidewireState, WireEvent) {
    let mut next = state.clone();
    let event = next.advance_mut(graph, config, delta, rng);
    (next, event)
}

pub fn rotate(state: &GuidewireState, delta: f64) -> GuidewireState {
    let mut next = state.clone();
    next.rotate_mut(delta);
    next
}

/// One environment step: clip, rotate by the angular component, then advance.
pub fn step_wire<R: Rng + ?Sized>(
    state: &mut GuidewireState,
    graph: &VesselGraph,
    config: &GuidewireConfig,
    action: [f64; 2],
    rng: &mut R,
) -> WireEvent {
    let [dd, dtheta] = config.clip(action);
    state.rotate_mut(dtheta);
    state.advance_mut(graph, config, dd, rng)
}
