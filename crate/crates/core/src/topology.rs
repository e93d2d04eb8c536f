//! Node deployment, geometry and the sink's authoritative node database.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackProfile;
use crate::energy::Femtojoules;
use crate::rng::{stream, Stream};
use crate::security::SecurityStatus;

/// One-byte logical node identity, as carried by every packet header.
#[derive(
    Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u8);

impl NodeId {
    /// Reserved for the sink; never assigned to a sensor.
    pub const SINK: NodeId = NodeId(0xFF);

    pub fn is_sink(self) -> bool {
        self == Self::SINK
    }
}

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.is_sink() {
            f.write_str("sink")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Planar position in meters.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Squared Euclidean distance. Every range and ordering decision in the
    /// simulator compares squared distances, so no square root is needed.
    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Inclusive unit-disk test: `d <= range`.
    pub fn within(&self, other: &Position, range: f64) -> bool {
        self.distance_sq(other) <= range * range
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sink,
    ClusterHead,
    Member,
    Flat,
    Dead,
    Blocked,
}

/// A sensor (or the sink) as known to the sink's database.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub pos: Position,
    pub initial: Femtojoules,
    pub residual: Femtojoules,
    pub role: Role,
    pub status: SecurityStatus,
    pub attack: Option<AttackProfile>,
}

impl NodeRecord {
    pub fn new(id: NodeId, pos: Position, energy: Femtojoules) -> Self {
        Self {
            id,
            pos,
            initial: energy,
            residual: energy,
            role: Role::Flat,
            status: SecurityStatus::default(),
            attack: None,
        }
    }

    /// Alive and not excluded by the sink.
    pub fn is_active(&self) -> bool {
        !matches!(self.role, Role::Dead | Role::Blocked)
    }

    pub fn is_dead(&self) -> bool {
        self.role == Role::Dead
    }

    pub fn is_blocked(&self) -> bool {
        self.role == Role::Blocked
    }

    pub fn energy_j(&self) -> f64 {
        self.residual.joules()
    }
}

/// Sensing field geometry and the unit-disk radio range.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSpec {
    pub width: f64,
    pub height: f64,
    pub radio_range: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            width: 1900.0,
            height: 1100.0,
            radio_range: 50.0,
        }
    }
}

impl FieldSpec {
    pub fn center(&self) -> Position {
        Position::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: &Position) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(TopologyError::ZeroArea);
        }
        if !(self.radio_range > 0.0) {
            return Err(TopologyError::InvalidRange(self.radio_range));
        }
        Ok(())
    }
}

/// One row of an explicit node table (used for hardware-testbed replays).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub id: u8,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "energy_mJ")]
    pub energy_mj: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("field has zero area")]
    ZeroArea,
    #[error("radio range must be positive, got {0}")]
    InvalidRange(f64),
    #[error("at least one node is required")]
    NoNodes,
    #[error("{0} nodes exceed the one-byte node id range (max 255)")]
    TooManyNodes(usize),
    #[error("initial energy must be positive, got {0} J")]
    NonPositiveEnergy(f64),
    #[error("node {0} lies outside the field")]
    OutOfField(NodeId),
    #[error("node id {0} appears twice")]
    DuplicateId(NodeId),
    #[error("node id 255 is reserved for the sink")]
    ReservedId,
    #[error("sink position lies outside the field")]
    SinkOutOfField,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Deployed sensors (sorted by id) plus the sink.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub field: FieldSpec,
    pub nodes: Vec<NodeRecord>,
    pub sink: NodeRecord,
}

/// Uniform random placement, sink at the field center.
pub fn deploy(
    spec: &FieldSpec,
    n_nodes: usize,
    initial_energy_j: f64,
    seed: u64,
) -> Result<Deployment, TopologyError> {
    check_counts(spec, n_nodes, initial_energy_j)?;
    let energy = Femtojoules::from_joules(initial_energy_j);
    let mut rng = stream(seed, Stream::Deployment);
    let nodes = (0..n_nodes)
        .map(|i| {
            let x = rng.random::<f64>() * spec.width;
            let y = rng.random::<f64>() * spec.height;
            NodeRecord::new(NodeId(i as u8), Position::new(x, y), energy)
        })
        .collect();
    Ok(Deployment::assemble(*spec, nodes))
}

/// Regular grid placement: nodes fill cell centers row by row.
pub fn deploy_grid(
    spec: &FieldSpec,
    n_nodes: usize,
    initial_energy_j: f64,
) -> Result<Deployment, TopologyError> {
    check_counts(spec, n_nodes, initial_energy_j)?;
    let energy = Femtojoules::from_joules(initial_energy_j);
    let mut cols = 1;
    while cols * cols < n_nodes {
        cols += 1;
    }
    let rows = n_nodes.div_ceil(cols);
    let dx = spec.width / cols as f64;
    let dy = spec.height / rows as f64;
    let nodes = (0..n_nodes)
        .map(|i| {
            let x = ((i % cols) as f64 + 0.5) * dx;
            let y = ((i / cols) as f64 + 0.5) * dy;
            NodeRecord::new(NodeId(i as u8), Position::new(x, y), energy)
        })
        .collect();
    Ok(Deployment::assemble(*spec, nodes))
}

/// Explicit node table. Ids may be sparse; energies are given in millijoules.
pub fn deploy_table(spec: &FieldSpec, table: &[TableEntry]) -> Result<Deployment, TopologyError> {
    spec.validate()?;
    if table.is_empty() {
        return Err(TopologyError::NoNodes);
    }
    let mut nodes: Vec<NodeRecord> = Vec::with_capacity(table.len());
    for row in table {
        let id = NodeId(row.id);
        if id.is_sink() {
            return Err(TopologyError::ReservedId);
        }
        if !(row.energy_mj > 0.0) {
            return Err(TopologyError::NonPositiveEnergy(row.energy_mj / 1e3));
        }
        let pos = Position::new(row.x, row.y);
        if !spec.contains(&pos) {
            return Err(TopologyError::OutOfField(id));
        }
        nodes.push(NodeRecord::new(id, pos, Femtojoules::from_joules(row.energy_mj / 1e3)));
    }
    nodes.sort_by_key(|n| n.id);
    if let Some(w) = nodes.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(TopologyError::DuplicateId(w[0].id));
    }
    Ok(Deployment::assemble(*spec, nodes))
}

fn check_counts(spec: &FieldSpec, n_nodes: usize, initial_energy_j: f64) -> Result<(), TopologyError> {
    spec.validate()?;
    if n_nodes == 0 {
        return Err(TopologyError::NoNodes);
    }
    if n_nodes > 255 {
        return Err(TopologyError::TooManyNodes(n_nodes));
    }
    if !(initial_energy_j > 0.0) {
        return Err(TopologyError::NonPositiveEnergy(initial_energy_j));
    }
    Ok(())
}

impl Deployment {
    fn assemble(field: FieldSpec, nodes: Vec<NodeRecord>) -> Self {
        let mut sink = NodeRecord::new(NodeId::SINK, field.center(), Femtojoules::ZERO);
        sink.role = Role::Sink;
        Self { field, nodes, sink }
    }

    /// Moves the sink. The default is the field center.
    pub fn with_sink_at(mut self, pos: Position) -> Result<Self, TopologyError> {
        if !self.field.contains(&pos) {
            return Err(TopologyError::SinkOutOfField);
        }
        self.sink.pos = pos;
        Ok(self)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        find(&self.nodes, id)
    }

    pub fn total_initial(&self) -> Femtojoules {
        self.nodes.iter().map(|n| n.initial).sum()
    }
}

/// Lookup in an id-sorted node slice.
pub fn find(nodes: &[NodeRecord], id: NodeId) -> Option<&NodeRecord> {
    nodes
        .binary_search_by_key(&id, |n| n.id)
        .ok()
        .map(|i| &nodes[i])
}

pub fn find_mut(nodes: &mut [NodeRecord], id: NodeId) -> Option<&mut NodeRecord> {
    nodes
        .binary_search_by_key(&id, |n| n.id)
        .ok()
        .map(move |i| &mut nodes[i])
}

/// Ids of active nodes within `range` of `node`, excluding the node itself.
pub fn neighbors(node: NodeId, nodes: &[NodeRecord], range: f64) -> Result<Vec<NodeId>, TopologyError> {
    let me = nodes
        .iter()
        .find(|n| n.id == node)
        .ok_or(TopologyError::UnknownNode(node))?;
    Ok(nodes
        .iter()
        .filter(|n| n.id != node && n.is_active() && me.pos.within(&n.pos, range))
        .map(|n| n.id)
        .collect())
}
