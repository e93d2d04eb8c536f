//! The sink's centralized cluster formation and reformation.
//!
//! Formation picks CH1 as the richest node the sink can hear, then keeps
//! opening clusters in the uncovered region farthest from the existing CHs.
//! A node joins a CH only when it is in range and holds no more energy than
//! that CH, so every CH is the richest node of its own cluster.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::Femtojoules;
use crate::topology::{find, find_mut, NodeId, NodeRecord, Role};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    /// Target cluster count.
    pub k: usize,
    /// Clusters smaller than this (CH included) are routed flat instead.
    pub min_cluster_size: usize,
    /// A region goes flat when two thirds of its nodes fall below this (J).
    pub flat_threshold_j: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            k: 5,
            min_cluster_size: 1,
            flat_threshold_j: 0.5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("no live node within radio range of the sink")]
    NoNodeInSinkRange,
    #[error("target cluster count must be at least 1")]
    ZeroClusters,
}

/// Next hop of a CH toward the sink.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hop {
    Sink,
    Ch(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub ch: NodeId,
    /// Sorted, excludes the CH.
    pub members: Vec<NodeId>,
}

impl Cluster {
    /// Node count including the CH.
    pub fn size(&self) -> usize {
        self.members.len() + 1
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPlan {
    /// In election order: the first entry is CH1.
    pub clusters: Vec<Cluster>,
    pub upstream: BTreeMap<NodeId, Hop>,
    /// Sorted.
    pub flat: Vec<NodeId>,
}

impl ClusterPlan {
    pub fn ch_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.clusters.iter().map(|c| c.ch)
    }

    pub fn cluster(&self, ch: NodeId) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.ch == ch)
    }

    /// The cluster a node belongs to, as CH or member.
    pub fn cluster_of(&self, node: NodeId) -> Option<&Cluster> {
        self.clusters
            .iter()
            .find(|c| c.ch == node || c.members.binary_search(&node).is_ok())
    }

    /// CHs whose upstream is `ch`, in id order.
    pub fn downstream(&self, ch: NodeId) -> Vec<NodeId> {
        self.upstream
            .iter()
            .filter(|(_, hop)| **hop == Hop::Ch(ch))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Hops from `ch` to the sink, or `None` for an unknown CH or a cycle.
    pub fn depth(&self, ch: NodeId) -> Option<usize> {
        let mut at = ch;
        for hops in 1..=self.upstream.len() {
            match self.upstream.get(&at)? {
                Hop::Sink => return Some(hops),
                Hop::Ch(next) => at = *next,
            }
        }
        None
    }

    /// Every node the plan places, CHs included.
    pub fn placed(&self) -> BTreeSet<NodeId> {
        let mut all: BTreeSet<NodeId> = self.flat.iter().copied().collect();
        for c in &self.clusters {
            all.insert(c.ch);
            all.extend(c.members.iter().copied());
        }
        all
    }
}

fn energy_key(n: &NodeRecord) -> (Femtojoules, Reverse<NodeId>) {
    (n.residual, Reverse(n.id))
}

fn joinable(node: &NodeRecord, ch: &NodeRecord, range: f64) -> bool {
    node.residual <= ch.residual && node.pos.within(&ch.pos, range)
}

/// Builds a fresh plan over the active nodes of `nodes`.
pub fn form_clusters(
    nodes: &[NodeRecord],
    sink: &NodeRecord,
    range: f64,
    params: &ClusterParams,
) -> Result<ClusterPlan, ClusterError> {
    if params.k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    let pool: Vec<&NodeRecord> = nodes.iter().filter(|n| n.is_active()).collect();
    let ch1 = pool
        .iter()
        .filter(|n| n.pos.within(&sink.pos, range))
        .max_by_key(|n| energy_key(n))
        .ok_or(ClusterError::NoNodeInSinkRange)?;
    Ok(grow(&pool, ch1, sink, range, params))
}

fn grow(
    pool: &[&NodeRecord],
    ch1: &NodeRecord,
    sink: &NodeRecord,
    range: f64,
    params: &ClusterParams,
) -> ClusterPlan {
    let mut chs: Vec<&NodeRecord> = Vec::from([ch1]);
    let mut flat: BTreeSet<NodeId> = BTreeSet::new();

    let is_ch = |chs: &[&NodeRecord], id: NodeId| chs.iter().any(|c| c.id == id);

    while chs.len() < params.k {
        let uncovered: Vec<&NodeRecord> = pool
            .iter()
            .copied()
            .filter(|n| {
                !is_ch(&chs, n.id)
                    && !flat.contains(&n.id)
                    && !chs.iter().any(|c| joinable(n, c, range))
            })
            .collect();
        let Some(anchor) = uncovered.iter().copied().max_by(|a, b| {
            let da = min_dist_sq(a, &chs);
            let db = min_dist_sq(b, &chs);
            da.total_cmp(&db).then_with(|| energy_key(a).cmp(&energy_key(b)))
        }) else {
            break;
        };
        let ch = uncovered
            .iter()
            .copied()
            .filter(|n| n.pos.within(&anchor.pos, range))
            .max_by_key(|n| energy_key(n))
            .unwrap_or(anchor);
        let cluster: Vec<NodeId> = uncovered
            .iter()
            .filter(|n| joinable(n, ch, range))
            .map(|n| n.id)
            .collect();
        // `cluster` contains `ch` itself, since a node is joinable to itself.
        if cluster.len() < params.min_cluster_size {
            flat.extend(cluster);
        } else {
            chs.push(ch);
        }
    }

    let mut members: BTreeMap<NodeId, Vec<NodeId>> = chs.iter().map(|c| (c.id, Vec::new())).collect();
    let mut common: Vec<(&NodeRecord, Vec<&NodeRecord>)> = Vec::new();
    for n in pool.iter().copied() {
        if is_ch(&chs, n.id) || flat.contains(&n.id) {
            continue;
        }
        let reachable: Vec<&NodeRecord> = chs.iter().copied().filter(|c| joinable(n, c, range)).collect();
        match reachable.len() {
            0 => {
                flat.insert(n.id);
            }
            1 => members.get_mut(&reachable[0].id).unwrap().push(n.id),
            _ => common.push((n, reachable)),
        }
    }
    for (n, reachable) in common {
        let pick = assign_common_node(n, &reachable, &members);
        members.get_mut(&pick).unwrap().push(n.id);
    }

    let mut clusters = Vec::new();
    for (i, ch) in chs.iter().enumerate() {
        let mut m = members.remove(&ch.id).unwrap_or_default();
        m.sort();
        // CH1 is the sink's gateway and stays a cluster whatever its size.
        if i > 0 && m.len() + 1 < params.min_cluster_size {
            flat.insert(ch.id);
            flat.extend(m);
        } else {
            clusters.push(Cluster { ch: ch.id, members: m });
        }
    }

    let upstream = link_upstream(&clusters, pool, sink);
    ClusterPlan {
        clusters,
        upstream,
        flat: flat.into_iter().collect(),
    }
}

fn min_dist_sq(n: &NodeRecord, chs: &[&NodeRecord]) -> f64 {
    chs.iter()
        .map(|c| n.pos.distance_sq(&c.pos))
        .fold(f64::INFINITY, f64::min)
}

/// Picks the CH for a node reachable from several: smallest current cluster,
/// then nearest, then lowest id.
pub fn assign_common_node(
    node: &NodeRecord,
    reachable: &[&NodeRecord],
    members: &BTreeMap<NodeId, Vec<NodeId>>,
) -> NodeId {
    reachable
        .iter()
        .min_by(|a, b| {
            let sa = members.get(&a.id).map_or(0, Vec::len);
            let sb = members.get(&b.id).map_or(0, Vec::len);
            sa.cmp(&sb)
                .then_with(|| node.pos.distance_sq(&a.pos).total_cmp(&node.pos.distance_sq(&b.pos)))
                .then_with(|| a.id.cmp(&b.id))
        })
        .map(|c| c.id)
        .expect("at least one reachable CH")
}

/// Nearest CH strictly closer to the sink, else the sink.
fn link_upstream(clusters: &[Cluster], pool: &[&NodeRecord], sink: &NodeRecord) -> BTreeMap<NodeId, Hop> {
    let pos_of = |id: NodeId| pool.iter().find(|n| n.id == id).map(|n| n.pos).unwrap();
    let heads: Vec<(NodeId, f64, crate::topology::Position)> = clusters
        .iter()
        .map(|c| {
            let p = pos_of(c.ch);
            (c.ch, p.distance_sq(&sink.pos), p)
        })
        .collect();
    heads
        .iter()
        .map(|&(id, to_sink, pos)| {
            let hop = heads
                .iter()
                .filter(|(_, other_to_sink, _)| *other_to_sink < to_sink)
                .min_by(|a, b| {
                    pos.distance_sq(&a.2)
                        .total_cmp(&pos.distance_sq(&b.2))
                        .then_with(|| a.0.cmp(&b.0))
                })
                .map_or(Hop::Sink, |other| Hop::Ch(other.0));
            (id, hop)
        })
        .collect()
}

/// True when at least two thirds of the region sits below `threshold_j`.
pub fn flat_region_check(residuals_j: &[f64], threshold_j: f64) -> bool {
    let len = residuals_j.len();
    let low = residuals_j.iter().filter(|e| **e < threshold_j).count();
    len > 0 && low >= (2 * len).div_ceil(3)
}

/// Re-plans after an iteration.
///
/// Blocked, dead and failed nodes leave the pool. A former cluster whose
/// region is mostly drained switches to flat routing, former flat nodes stay
/// flat while drained, and everything else is clustered afresh. When no pool
/// node can hear the sink, the node nearest the sink seeds the new plan.
pub fn reform_clusters(
    previous: &ClusterPlan,
    nodes: &[NodeRecord],
    sink: &NodeRecord,
    range: f64,
    params: &ClusterParams,
) -> ClusterPlan {
    let usable = |id: NodeId| find(nodes, id).filter(|n| n.is_active() && !n.status.has_fail());
    let threshold = Femtojoules::from_joules(params.flat_threshold_j);
    let mut flat: BTreeSet<NodeId> = BTreeSet::new();

    for c in &previous.clusters {
        let region: Vec<&NodeRecord> = core::iter::once(c.ch)
            .chain(c.members.iter().copied())
            .filter_map(usable)
            .collect();
        let energies: Vec<f64> = region.iter().map(|n| n.energy_j()).collect();
        if flat_region_check(&energies, params.flat_threshold_j) {
            flat.extend(region.iter().map(|n| n.id));
        }
    }
    for id in &previous.flat {
        if let Some(n) = usable(*id) {
            if n.residual < threshold {
                flat.insert(n.id);
            }
        }
    }

    let pool: Vec<&NodeRecord> = nodes
        .iter()
        .filter(|n| n.is_active() && !n.status.has_fail() && !flat.contains(&n.id))
        .collect();
    let seed = pool
        .iter()
        .filter(|n| n.pos.within(&sink.pos, range))
        .max_by_key(|n| energy_key(n))
        .or_else(|| {
            pool.iter().min_by(|a, b| {
                a.pos
                    .distance_sq(&sink.pos)
                    .total_cmp(&b.pos.distance_sq(&sink.pos))
                    .then_with(|| a.id.cmp(&b.id))
            })
        });
    let mut plan = match (seed, params.k) {
        (Some(ch1), k) if k > 0 => grow(&pool, ch1, sink, range, params),
        _ => ClusterPlan {
            flat: pool.iter().map(|n| n.id).collect(),
            ..ClusterPlan::default()
        },
    };
    flat.extend(plan.flat.iter().copied());
    plan.flat = flat.into_iter().collect();
    plan
}

/// Writes the plan's roles onto active nodes.
pub fn apply_plan(nodes: &mut [NodeRecord], plan: &ClusterPlan) {
    for c in &plan.clusters {
        if let Some(n) = find_mut(nodes, c.ch) {
            if n.is_active() {
                n.role = Role::ClusterHead;
            }
        }
        for m in &c.members {
            if let Some(n) = find_mut(nodes, *m) {
                if n.is_active() {
                    n.role = Role::Member;
                }
            }
        }
    }
    for id in &plan.flat {
        if let Some(n) = find_mut(nodes, *id) {
            if n.is_active() {
                n.role = Role::Flat;
            }
        }
    }
}
