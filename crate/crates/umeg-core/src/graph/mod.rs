//! Unified multi-entity graph construction.
//!
//! Nodes are all person joints plus optional ball and court-corner keypoints
//! in the canonical order shared with the dataset format. Edges come in four
//! families: intra-person skeleton bones, person-ball, person-court, and the
//! court-corner rectangle. All edges are undirected and the topology is
//! static across frames.

pub mod coco;

use serde::{Deserialize, Serialize};

use crate::data::{EntityLayout, KeypointClip};
use crate::{CoreError, Result};

/// Sport profile: decides which joints connect to the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SportProfile {
    /// Racket sports: wrists connect to the ball.
    Racket,
    /// Soccer: ankles and shoulders connect to the ball, approximating
    /// lower- and upper-body ball control.
    Soccer,
    /// Single-athlete sports; wrists connect to the ball when one exists.
    Solo,
}

impl SportProfile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "racket" => Ok(Self::Racket),
            "soccer" => Ok(Self::Soccer),
            "solo" => Ok(Self::Solo),
            other => Err(CoreError::Config(format!("unknown sport profile `{other}`"))),
        }
    }

    fn ball_joints(self) -> &'static [usize] {
        match self {
            Self::Racket | Self::Solo => &[coco::LEFT_WRIST, coco::RIGHT_WRIST],
            Self::Soccer => &[
                coco::LEFT_ANKLE,
                coco::RIGHT_ANKLE,
                coco::LEFT_SHOULDER,
                coco::RIGHT_SHOULDER,
            ],
        }
    }
}

impl std::fmt::Display for SportProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Racket => "racket",
            Self::Soccer => "soccer",
            Self::Solo => "solo",
        })
    }
}

/// Which entities participate in the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityConfig {
    Pose,
    PoseBall,
    PoseCourt,
    PoseBallCourt,
}

impl EntityConfig {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pose" => Ok(Self::Pose),
            "pose+ball" => Ok(Self::PoseBall),
            "pose+court" => Ok(Self::PoseCourt),
            "pose+ball+court" => Ok(Self::PoseBallCourt),
            other => Err(CoreError::Config(format!("unknown entity config `{other}`"))),
        }
    }

    pub fn wants_ball(self) -> bool {
        matches!(self, Self::PoseBall | Self::PoseBallCourt)
    }

    pub fn wants_court(self) -> bool {
        matches!(self, Self::PoseCourt | Self::PoseBallCourt)
    }
}

impl std::fmt::Display for EntityConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pose => "pose",
            Self::PoseBall => "pose+ball",
            Self::PoseCourt => "pose+court",
            Self::PoseBallCourt => "pose+ball+court",
        })
    }
}

/// Edge family census, for audit dumps and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCensus {
    pub intra: usize,
    pub person_ball: usize,
    pub person_court: usize,
    pub court_court: usize,
}

impl EdgeCensus {
    pub fn total(&self) -> usize {
        self.intra + self.person_ball + self.person_court + self.court_court
    }
}

/// Static multi-entity graph: node indexing, undirected edge set, and the
/// 0/1 adjacency with unit self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    pub node_count: usize,
    /// Undirected edges as (low, high) index pairs, self-loops excluded.
    pub edges: Vec<(usize, usize)>,
    /// Symmetric 0/1 adjacency, row-major, with unit diagonal.
    pub adjacency: Vec<f64>,
    pub layout: EntityLayout,
    pub profile: SportProfile,
    pub entity_config: EntityConfig,
    pub census: EdgeCensus,
    /// For each graph node, its index in the layout's canonical node order.
    pub source_indices: Vec<usize>,
}

impl GraphTopology {
    pub fn adjacency_at(&self, row: usize, col: usize) -> f64 {
        self.adjacency[row * self.node_count + col]
    }

    /// Graph node index of the ball, if the entity config keeps it.
    pub fn ball_node(&self) -> Option<usize> {
        self.entity_config
            .wants_ball()
            .then(|| self.layout.num_persons * self.layout.joints_per_person)
    }
}

/// Builds the unified multi-entity graph for `layout` under `profile`,
/// keeping only the entities named by `entity_config`.
pub fn build_topology(
    layout: &EntityLayout,
    profile: SportProfile,
    entity_config: EntityConfig,
) -> Result<GraphTopology> {
    layout.validate()?;
    if layout.joints_per_person != coco::NUM_JOINTS {
        return Err(CoreError::Config(format!(
            "intra-person topology is COCO-17; layout has {} joints per person",
            layout.joints_per_person
        )));
    }
    if entity_config.wants_ball() && !layout.has_ball {
        return Err(CoreError::Config(format!(
            "entity config {entity_config} requires a ball the layout lacks"
        )));
    }
    if entity_config.wants_court() && layout.num_court_points != 4 {
        return Err(CoreError::Config(format!(
            "entity config {entity_config} requires 4 court corners, layout has {}",
            layout.num_court_points
        )));
    }

    let n = layout.num_persons;
    let k = layout.joints_per_person;
    let keep_ball = entity_config.wants_ball();
    let keep_court = entity_config.wants_court();
    let node_count = n * k + usize::from(keep_ball) + usize::from(keep_court) * 4;

    // Graph node order mirrors the canonical layout order with dropped
    // entities removed: persons, then ball, then court corners.
    let mut source_indices: Vec<usize> = (0..n * k).collect();
    let ball_node = keep_ball.then_some(n * k);
    if keep_ball {
        source_indices.push(layout.ball_index().expect("layout has ball"));
    }
    let court_base = n * k + usize::from(keep_ball);
    if keep_court {
        for i in 0..4 {
            source_indices.push(layout.court_index(i).expect("layout has court"));
        }
    }

    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut census = EdgeCensus {
        intra: 0,
        person_ball: 0,
        person_court: 0,
        court_court: 0,
    };

    for p in 0..n {
        for &(a, b) in coco::BONES {
            edges.push((p * k + a, p * k + b));
            census.intra += 1;
        }
    }
    if let Some(ball) = ball_node {
        for p in 0..n {
            for &j in profile.ball_joints() {
                edges.push((p * k + j, ball));
                census.person_ball += 1;
            }
        }
    }
    if keep_court {
        for p in 0..n {
            for &foot in &[coco::LEFT_ANKLE, coco::RIGHT_ANKLE] {
                for corner in 0..4 {
                    edges.push((p * k + foot, court_base + corner));
                    census.person_court += 1;
                }
            }
        }
        for corner in 0..4 {
            edges.push((court_base + corner, court_base + (corner + 1) % 4));
            census.court_court += 1;
        }
    }

    let mut adjacency = vec![0.0; node_count * node_count];
    for i in 0..node_count {
        adjacency[i * node_count + i] = 1.0;
    }
    for edge in &mut edges {
        let (a, b) = *edge;
        debug_assert_ne!(a, b);
        *edge = (a.min(b), a.max(b));
        adjacency[a * node_count + b] = 1.0;
        adjacency[b * node_count + a] = 1.0;
    }
    edges.sort();
    edges.dedup();

    Ok(GraphTopology {
        node_count,
        edges,
        adjacency,
        layout: *layout,
        profile,
        entity_config,
        census,
        source_indices,
    })
}

/// Symmetric degree normalization of the self-looped adjacency:
/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
/// The topology's adjacency already carries the unit diagonal.
pub fn normalize_adjacency(topology: &GraphTopology) -> Vec<f64> {
    let v = topology.node_count;
    let a = &topology.adjacency;
    let inv_sqrt_deg: Vec<f64> = (0..v)
        .map(|i| {
            let degree: f64 = a[i * v..(i + 1) * v].iter().sum();
            // Self-loops guarantee degree >= 1.
            1.0 / degree.sqrt()
        })
        .collect();
    let mut out = vec![0.0; v * v];
    for i in 0..v {
        for j in 0..v {
            out[i * v + j] = inv_sqrt_deg[i] * a[i * v + j] * inv_sqrt_deg[j];
        }
    }
    out
}

/// A clip rendered onto a topology: a T x |V| x 2 coordinate tensor plus the
/// static topology it follows.
#[derive(Debug, Clone)]
pub struct GraphSequence {
    /// Row-major (frame, node, axis) coordinates.
    pub coords: Vec<f64>,
    pub frames: usize,
    pub topology: GraphTopology,
}

impl GraphSequence {
    pub fn coord(&self, t: usize, node: usize, axis: usize) -> f64 {
        self.coords[(t * self.topology.node_count + node) * 2 + axis]
    }
}

/// Lays a clip's coordinates out in canonical graph node order. Undetected
/// nodes stay zero-filled; entities dropped by the entity config are omitted.
pub fn build_sequence(clip: &KeypointClip, topology: &GraphTopology) -> Result<GraphSequence> {
    if clip.layout != topology.layout {
        return Err(CoreError::Validation {
            clip: clip.clip_id.clone(),
            message: "clip layout does not match graph topology layout".into(),
        });
    }
    let v = topology.node_count;
    let mut coords = vec![0.0; clip.frames.len() * v * 2];
    for (t, frame) in clip.frames.iter().enumerate() {
        for (node, &src) in topology.source_indices.iter().enumerate() {
            let xy = frame.coords[src];
            coords[(t * v + node) * 2] = xy[0];
            coords[(t * v + node) * 2 + 1] = xy[1];
        }
    }
    Ok(GraphSequence {
        coords,
        frames: clip.frames.len(),
        topology: topology.clone(),
    })
}


#[cfg(test)]
impl GraphTopology {
    fn topology_sources(&self) -> &[usize] {
        &self.source_indices
    }
}
