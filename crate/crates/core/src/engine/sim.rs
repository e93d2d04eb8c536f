use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, Placement, RunConfig};
use super::event::{nanos, seconds, Body, Event, EventQueue, FrameTrip, Message, Nanos};
use super::trace::{BlockReason, SecurityEvent, SecurityRecord, TraceEntry, TraceKind};
use crate::adversary::{build_attack_set, perturb, AttackError, AttackKind, AttackProfile, Conduct, Duty};
use crate::clustering::{apply_plan, form_clusters, reform_clusters, ClusterError, ClusterPlan, Hop};
use crate::codec::{SignalPacket, CH_HEADER_LEN, CH_PAYLOAD_MAX, CM_HEADER_LEN, SIGNAL_LEN};
use crate::energy::{
    baseline_energy_per_second, cpu_energy, mem_energy, rx_energy, tx_energy_sq, EnergyCategory, EnergyLedger,
    Femtojoules, MemAccess,
};
use crate::metrics::{Baseline, IterationRow, MetricsReport};
use crate::rng::{stream, Stream};
use crate::security::{
    directional_entropy, draw_challenge, issue_keys_and_roles, mzkp_adjudicate, mzkp_answer, promiscuous_audit,
    spawn_dummy_traffic, Issuance, SecurityStatus, TriState, Verdict,
};
use crate::topology::{deploy, deploy_grid, deploy_table, find, find_mut, Deployment, NodeId, NodeRecord, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("deployment failed: {0}")]
    Topology(#[from] TopologyError),
    #[error("cluster formation failed: {0}")]
    Formation(#[from] ClusterError),
    #[error("attack set: {0}")]
    Attack(#[from] AttackError),
}

/// Packet counters by purpose.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub control: u64,
    pub security: u64,
    pub formation: u64,
    pub data: u64,
    pub overhead_bytes: u64,
    pub delivered: u64,
    pub toward_sink: u64,
    pub away_from_sink: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub deployment: Deployment,
    pub attack_set: Vec<(NodeId, AttackProfile)>,
    /// Every plan in force, with the iteration it took effect at.
    pub plans: Vec<(u32, ClusterPlan)>,
    pub issuances: Vec<Issuance>,
    pub nodes: Vec<NodeRecord>,
    /// Residual energy of every node after each iteration.
    pub residuals: Vec<Vec<Femtojoules>>,
    pub ledger: EnergyLedger,
    pub counters: Counters,
    pub trace: Vec<TraceEntry>,
    pub security_log: Vec<SecurityRecord>,
    pub warnings: Vec<String>,
}

/// Link delay of a `k`-bit message.
pub fn hop_delay(k: u32, cfg: &RunConfig) -> f64 {
    f64::from(k) / cfg.link_rate_bps + cfg.processing_delay_s
}

/// True once `fraction` of the deployed nodes sit below `threshold_j`.
pub fn check_termination(nodes: &[NodeRecord], threshold_j: f64, fraction: f64) -> bool {
    if nodes.is_empty() {
        return true;
    }
    let threshold = Femtojoules::from_joules(threshold_j);
    let below = nodes.iter().filter(|n| n.residual < threshold).count();
    below as f64 >= fraction * nodes.len() as f64 - 1e-9
}

pub fn deploy_for(cfg: &RunConfig) -> Result<Deployment, RunError> {
    let d = match cfg.placement {
        Placement::Random => deploy(&cfg.field, cfg.n_nodes, cfg.initial_energy_j, cfg.seed)?,
        Placement::Grid => deploy_grid(&cfg.field, cfg.n_nodes, cfg.initial_energy_j)?,
        Placement::Table => deploy_table(&cfg.field, &cfg.nodes)?,
    };
    Ok(match cfg.sink {
        Some(pos) => d.with_sink_at(pos)?,
        None => d,
    })
}

/// Deploys, assigns attackers and plans the first clusters without running.
pub fn initial_plan(cfg: &RunConfig) -> Result<(Deployment, ClusterPlan), RunError> {
    cfg.validate()?;
    let d = deploy_for(cfg)?;
    let plan = form_clusters(&d.nodes, &d.sink, cfg.field.radio_range, &cfg.clustering)?;
    Ok((d, plan))
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum Category {
    Control,
    Security,
    Formation,
    Data,
}

#[derive(Default)]
struct Aggregation {
    expected: usize,
    /// Members heard from; repeats of one member count once.
    reporters: BTreeSet<NodeId>,
    /// Distinct readings; redundant ones are merged into one payload entry.
    distinct: BTreeSet<[u8; 2]>,
    frame: Option<FrameTrip>,
    report_delay_s: f64,
}

struct Transfer {
    prover: NodeId,
    verifier: NodeId,
    q: u8,
    frames: Vec<FrameTrip>,
    acked: bool,
}

struct Sim<'a> {
    cfg: &'a RunConfig,
    nodes: Vec<NodeRecord>,
    sink: NodeRecord,
    plan: ClusterPlan,
    issuance: Issuance,
    ledger: EnergyLedger,
    queue: EventQueue,
    rng: ChaCha8Rng,
    key_rng: ChaCha8Rng,
    counters: Counters,
    iteration: u32,
    t0: Nanos,
    agg: BTreeMap<NodeId, Aggregation>,
    inbox: BTreeMap<NodeId, Vec<FrameTrip>>,
    transfers: BTreeMap<u32, Transfer>,
    next_transfer: u32,
    awaiting: BTreeMap<NodeId, (usize, BTreeSet<NodeId>)>,
    longest_s: f64,
    delay_ms: f64,
    rows: Vec<IterationRow>,
    plans: Vec<(u32, ClusterPlan)>,
    issuances: Vec<Issuance>,
    residuals: Vec<Vec<Femtojoules>>,
    trace: Vec<TraceEntry>,
    log: Vec<SecurityRecord>,
    terminated_early: bool,
    done: bool,
}

/// Runs the full protocol cycle: formation, then per iteration the intra
/// phase, security sweeps, the inter phase and (every `reform_every`
/// iterations) reformation, until the horizon or the termination rule.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let deployment = deploy_for(cfg)?;
    let mut nodes = deployment.nodes.clone();

    let mut attack_rng = stream(cfg.seed, Stream::Attacks);
    let mut attack_set: Vec<(NodeId, AttackProfile)> = Vec::new();
    for a in &cfg.attacks.assign {
        if find(&nodes, a.node).is_none() {
            return Err(AttackError::UnknownNode(a.node).into());
        }
        attack_set.push((a.node, a.profile()));
    }
    let fixed: BTreeSet<NodeId> = attack_set.iter().map(|(id, _)| *id).collect();
    let free: Vec<NodeRecord> = nodes.iter().filter(|n| !fixed.contains(&n.id)).cloned().collect();
    attack_set.extend(build_attack_set(&free, cfg.attacks.count, &cfg.attacks.mix, &mut attack_rng)?);
    attack_set.sort_by_key(|(id, _)| *id);
    for (id, profile) in &attack_set {
        if let Some(n) = find_mut(&mut nodes, *id) {
            n.attack = Some(*profile);
        }
    }

    let plan = form_clusters(&nodes, &deployment.sink, cfg.field.radio_range, &cfg.clustering)?;
    let mut warnings = Vec::new();
    if plan.clusters.len() < cfg.clustering.k {
        warnings.push(format!(
            "formed {} of {} requested clusters",
            plan.clusters.len(),
            cfg.clustering.k
        ));
    }
    apply_plan(&mut nodes, &plan);

    let mut sim = Sim {
        cfg,
        nodes,
        sink: deployment.sink.clone(),
        plan: plan.clone(),
        issuance: Issuance::default(),
        ledger: EnergyLedger::new(),
        queue: EventQueue::default(),
        rng: stream(cfg.seed, Stream::Engine),
        key_rng: stream(cfg.seed, Stream::Keys),
        counters: Counters::default(),
        iteration: 0,
        t0: 0,
        agg: BTreeMap::new(),
        inbox: BTreeMap::new(),
        transfers: BTreeMap::new(),
        next_transfer: 0,
        awaiting: BTreeMap::new(),
        longest_s: 0.0,
        delay_ms: 0.0,
        rows: Vec::new(),
        plans: Vec::from([(0, plan.clone())]),
        issuances: Vec::new(),
        residuals: Vec::new(),
        trace: Vec::new(),
        log: Vec::new(),
        terminated_early: false,
        done: false,
    };
    sim.issue_keys();
    if cfg.iterations > 0 {
        sim.queue.schedule(0, Event::IterationStart);
    }
    while let Some((t, ev)) = sim.queue.pop() {
        sim.handle(t, ev);
        if sim.done {
            break;
        }
    }

    let report = MetricsReport {
        baseline: Baseline {
            alive_start: deployment.nodes.len(),
            clusters_start: plan.clusters.len(),
            energy_budget_j: deployment.total_initial().joules(),
            horizon_s: cfg.horizon_s,
            max_overhead_bytes: cfg.max_overhead_bytes,
        },
        rows: sim.rows,
        terminated_early: sim.terminated_early,
    };
    Ok(RunOutput {
        report,
        deployment,
        attack_set,
        plans: sim.plans,
        issuances: sim.issuances,
        nodes: sim.nodes,
        residuals: sim.residuals,
        ledger: sim.ledger,
        counters: sim.counters,
        trace: sim.trace,
        security_log: sim.log,
        warnings,
    })
}

impl Sim<'_> {
    fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        if id.is_sink() {
            Some(&self.sink)
        } else {
            find(&self.nodes, id)
        }
    }

    fn active(&self, id: NodeId) -> bool {
        id.is_sink() || find(&self.nodes, id).is_some_and(NodeRecord::is_active)
    }

    fn blocked(&self, id: NodeId) -> bool {
        find(&self.nodes, id).is_some_and(NodeRecord::is_blocked)
    }

    fn now_s(&self) -> f64 {
        seconds(self.queue.now())
    }

    fn conduct(&mut self, id: NodeId, duty: Duty) -> Conduct {
        let profile = find(&self.nodes, id).and_then(|n| n.attack);
        let now = self.now_s();
        perturb(profile.as_ref(), now, duty, &mut self.rng)
    }

    fn attack_of(&self, id: NodeId) -> Option<AttackKind> {
        find(&self.nodes, id).and_then(|n| n.attack).map(|a| a.kind)
    }

    fn charge(&mut self, id: NodeId, cat: EnergyCategory, joules: f64) {
        if let Some(n) = find_mut(&mut self.nodes, id) {
            if n.is_active() {
                self.ledger.charge(n, cat, joules);
            }
        }
    }

    fn record(&mut self, event: SecurityEvent) {
        self.log.push(SecurityRecord {
            t_s: self.now_s(),
            iteration: self.iteration,
            event,
        });
    }

    fn trace(&mut self, kind: TraceKind, node: NodeId, peer: NodeId, msg: &'static str) {
        if self.cfg.trace {
            self.trace.push(TraceEntry {
                t_ns: self.queue.now(),
                kind,
                node,
                peer,
                msg,
            });
        }
    }

    fn bits(&self, body: &Body) -> u32 {
        let p = &self.cfg.energy;
        match body {
            Body::Report { .. } | Body::FlatData { .. } => p.k_data,
            Body::Bundle { frames, .. } => p.k_data * frames.len().max(1) as u32,
            _ => p.k_signal,
        }
    }

    fn shape(body: &Body) -> (Category, usize) {
        match body {
            Body::Poll | Body::FeedbackRequest | Body::StatusRequest => (Category::Control, SIGNAL_LEN),
            Body::Report { .. } => (Category::Control, CM_HEADER_LEN + 2),
            Body::FeedbackResponse | Body::StatusResponse => (Category::Control, CH_HEADER_LEN),
            Body::Signal => (Category::Formation, SIGNAL_LEN),
            Body::Bundle { frames, .. } => (Category::Data, frames.iter().map(|f| f.bytes).sum()),
            Body::FlatData { .. } => (Category::Data, CH_HEADER_LEN + 2),
            _ => (Category::Security, SIGNAL_LEN),
        }
    }

    /// One transmission heard by every listed receiver. The sender pays for
    /// the farthest receiver; blocked receivers are never addressed.
    fn send(&mut self, from: NodeId, to: &[NodeId], body: Body) {
        if !self.active(from) {
            return;
        }
        let to: Vec<NodeId> = to.iter().copied().filter(|id| !self.blocked(*id)).collect();
        if to.is_empty() {
            return;
        }
        let bits = self.bits(&body);
        let (category, bytes) = Self::shape(&body);
        if !from.is_sink() {
            let src = self.node(from).map(|n| n.pos).unwrap();
            let d_sq = to
                .iter()
                .filter_map(|id| self.node(*id))
                .map(|n| src.distance_sq(&n.pos))
                .fold(0.0, f64::max);
            let e = tx_energy_sq(bits, d_sq, &self.cfg.energy);
            self.charge(from, EnergyCategory::Tx, e);
        }
        match category {
            Category::Control => self.counters.control += 1,
            Category::Security => self.counters.security += 1,
            Category::Formation => self.counters.formation += 1,
            Category::Data => self.counters.data += 1,
        }
        if category != Category::Data {
            self.counters.overhead_bytes += bytes as u64;
        }
        match body {
            Body::Bundle { .. } => self.counters.toward_sink += 1,
            Body::Dummy { .. } => self.counters.away_from_sink += 1,
            _ => {}
        }
        let arrive = self.queue.now() + nanos(hop_delay(bits, self.cfg));
        for id in to {
            self.trace(TraceKind::Tx, from, id, body.name());
            if self.cfg.loss_rate > 0.0 && self.rng.random_bool(self.cfg.loss_rate) {
                self.trace(TraceKind::Drop, id, from, body.name());
                continue;
            }
            self.queue.schedule(
                arrive,
                Event::Arrive(Message {
                    from,
                    to: id,
                    body: body.clone(),
                }),
            );
        }
    }

    fn handle(&mut self, t: Nanos, ev: Event) {
        match ev {
            Event::IterationStart => self.iteration_start(t),
            Event::Slot { ch, member } => self.slot(ch, member),
            Event::AggregateCheck { ch } => {
                let quorum = self.quorum_met(ch);
                if quorum {
                    self.aggregate(ch);
                }
            }
            Event::AggregateDeadline { ch } => self.aggregate(ch),
            Event::SweepStart => self.sweep_start(),
            Event::SweepEnd => self.sweep_end(),
            Event::InterStart => self.inter_start(),
            Event::LevelSend { ch } => self.level_send(ch),
            Event::FlatSend => self.flat_send(),
            Event::AuditCheck {
                prover,
                verifier,
                transfer,
            } => self.audit(prover, verifier, transfer),
            Event::Arrive(msg) => self.arrive(msg),
            Event::IterationEnd => self.iteration_end(),
        }
    }

    fn iteration_start(&mut self, t: Nanos) {
        self.t0 = t;
        self.longest_s = 0.0;
        self.agg.clear();
        self.inbox.clear();
        self.transfers.clear();
        self.awaiting.clear();
        let slot = self.cfg.slot_s;
        let timeout = self.cfg.intra_timeout_s;
        let clusters = self.plan.clusters.clone();
        for c in &clusters {
            if !self.active(c.ch) {
                continue;
            }
            let polled: Vec<NodeId> = c
                .members
                .iter()
                .copied()
                .enumerate()
                .filter(|(j, _)| (*j as f64) * slot < timeout)
                .map(|(_, m)| m)
                .filter(|m| !self.blocked(*m))
                .collect();
            for (j, m) in polled.iter().enumerate() {
                self.queue
                    .schedule(t + nanos(j as f64 * slot), Event::Slot { ch: c.ch, member: *m });
            }
            self.agg.insert(
                c.ch,
                Aggregation {
                    expected: polled.len(),
                    ..Aggregation::default()
                },
            );
            let end = (polled.len() as f64 * slot).min(timeout);
            self.queue.schedule(t + nanos(end), Event::AggregateCheck { ch: c.ch });
            self.queue.schedule(t + nanos(timeout), Event::AggregateDeadline { ch: c.ch });
        }
        self.queue.schedule(t + nanos(timeout), Event::SweepStart);
        self.queue.schedule(t + nanos(timeout + self.cfg.ack_window_s), Event::SweepEnd);
        self.queue.schedule(t + nanos(self.cfg.inter_offset_s()), Event::InterStart);
        self.queue.schedule(t + nanos(self.cfg.iteration_s()), Event::IterationEnd);
    }

    fn slot(&mut self, ch: NodeId, member: NodeId) {
        let b = baseline_energy_per_second(&self.cfg.energy);
        let awake = self.cfg.slot_s;
        self.charge(member, EnergyCategory::RadioIdle, b.radio * awake);
        self.charge(member, EnergyCategory::Sensor, b.sensor * awake);
        self.send(ch, &[member], Body::Poll);
    }

    fn quorum_count(&self, expected: usize) -> usize {
        let q = self.cfg.quorum * expected as f64 - 1e-9;
        let whole = q as usize;
        if (whole as f64) < q {
            whole + 1
        } else {
            whole
        }
    }

    fn quorum_met(&self, ch: NodeId) -> bool {
        self.agg
            .get(&ch)
            .is_some_and(|a| a.reporters.len() >= self.quorum_count(a.expected))
    }

    fn aggregate(&mut self, ch: NodeId) {
        let Some(a) = self.agg.get_mut(&ch) else {
            return;
        };
        if a.frame.is_some() {
            return;
        }
        let payload = (a.distinct.len() * 2).min(CH_PAYLOAD_MAX);
        a.frame = Some(FrameTrip {
            origin: ch,
            reports: a.reporters.len(),
            bytes: CH_HEADER_LEN + payload,
            delay_s: a.report_delay_s,
        });
    }

    fn sweep_start(&mut self) {
        if !self.cfg.security.mine {
            return;
        }
        let clusters = self.plan.clusters.clone();
        for c in &clusters {
            if !self.active(c.ch) || !self.issuance.get(c.ch).mine_enable {
                continue;
            }
            let targets: Vec<NodeId> = c.members.iter().copied().filter(|m| !self.blocked(*m)).collect();
            if targets.is_empty() {
                continue;
            }
            self.awaiting.insert(c.ch, (targets.len(), targets.iter().copied().collect()));
            self.send(c.ch, &targets, Body::Probe);
        }
        let mut targets: Vec<NodeId> = self.plan.ch_ids().chain(self.plan.flat.iter().copied()).collect();
        targets.retain(|id| !self.blocked(*id));
        targets.sort();
        if !targets.is_empty() {
            self.awaiting
                .insert(NodeId::SINK, (targets.len(), targets.iter().copied().collect()));
            self.send(NodeId::SINK, &targets, Body::Probe);
        }
    }

    fn sweep_end(&mut self) {
        let awaiting = core::mem::take(&mut self.awaiting);
        for (prober, (probed, silent)) in awaiting {
            if !prober.is_sink() && !self.active(prober) {
                continue;
            }
            let asked: Vec<NodeId> = if prober.is_sink() {
                let mut v: Vec<NodeId> = self.plan.ch_ids().chain(self.plan.flat.iter().copied()).collect();
                v.sort();
                v
            } else {
                self.plan.cluster(prober).map(|c| c.members.clone()).unwrap_or_default()
            };
            for id in asked {
                if let Some(n) = find_mut(&mut self.nodes, id) {
                    if n.is_blocked() {
                        continue;
                    }
                    let outcome = if silent.contains(&id) { TriState::Fail } else { TriState::Pass };
                    n.status.mine.record(outcome);
                }
            }
            self.record(SecurityEvent::Sweep {
                prober,
                probed,
                flagged: silent.into_iter().collect(),
            });
        }
    }

    fn inter_start(&mut self) {
        let now = self.queue.now();
        let chs: Vec<NodeId> = self.plan.ch_ids().filter(|id| self.active(*id)).collect();
        if !chs.is_empty() {
            self.send(NodeId::SINK, &chs, Body::FeedbackRequest);
            for ch in &chs {
                self.send(NodeId::SINK, &[*ch], Body::StatusRequest);
            }
        }
        let depths: Vec<(NodeId, usize)> = chs
            .iter()
            .map(|ch| (*ch, self.plan.depth(*ch).unwrap_or(1)))
            .collect();
        let max_depth = depths.iter().map(|(_, d)| *d).max().unwrap_or(0);
        let start = now + nanos(self.cfg.ack_window_s);
        let level = self.cfg.level_slot_s;
        for (ch, depth) in depths {
            self.queue
                .schedule(start + nanos((max_depth - depth) as f64 * level), Event::LevelSend { ch });
        }
        self.queue.schedule(start + nanos(max_depth as f64 * level), Event::FlatSend);
    }

    /// The CH that should answer the route-feedback request.
    fn root_ch(&self) -> Option<NodeId> {
        self.plan
            .clusters
            .iter()
            .map(|c| c.ch)
            .find(|ch| self.plan.upstream.get(ch) == Some(&Hop::Sink) && self.active(*ch))
    }

    /// Next hop toward the sink, skipping CHs the sink has blocked.
    fn upstream_of(&self, ch: NodeId) -> NodeId {
        let mut at = ch;
        loop {
            match self.plan.upstream.get(&at) {
                Some(Hop::Ch(next)) if self.blocked(*next) => at = *next,
                Some(Hop::Ch(next)) => return *next,
                _ => return NodeId::SINK,
            }
        }
    }

    fn level_send(&mut self, ch: NodeId) {
        if !self.active(ch) {
            return;
        }
        let mut frames: Vec<FrameTrip> = self.inbox.remove(&ch).unwrap_or_default();
        self.aggregate(ch);
        if let Some(own) = self.agg.get(&ch).and_then(|a| a.frame.clone()) {
            frames.insert(0, own);
        }
        if self.issuance.get(ch).trap_enable {
            self.spawn_dummy(ch);
        }
        if self.attack_of(ch) == Some(AttackKind::BlackHole) && self.conduct(ch, Duty::Report) == Conduct::Refuse {
            return;
        }
        if frames.is_empty() {
            return;
        }
        let to = self.upstream_of(ch);
        if !to.is_sink() && self.cfg.security.mzkp && self.issuance.gated(ch, to) {
            let q = draw_challenge(self.issuance.public_n, &mut self.rng);
            let transfer = self.next_transfer;
            self.next_transfer += 1;
            self.transfers.insert(
                transfer,
                Transfer {
                    prover: ch,
                    verifier: to,
                    q,
                    frames,
                    acked: false,
                },
            );
            self.send(NodeId::SINK, &[to], Body::Challenge { prover: ch, q, transfer });
        } else {
            self.send_bundle(ch, to, frames, None);
        }
    }

    fn send_bundle(&mut self, from: NodeId, to: NodeId, mut frames: Vec<FrameTrip>, gated: Option<u32>) {
        let bits = self.cfg.energy.k_data * frames.len().max(1) as u32;
        let hop = hop_delay(bits, self.cfg);
        for f in &mut frames {
            f.delay_s += hop;
        }
        self.send(from, &[to], Body::Bundle { frames, gated });
    }

    fn spawn_dummy(&mut self, ch: NodeId) {
        let plan = &self.plan;
        let nodes = &self.nodes;
        let usable = |id: NodeId| find(nodes, id).is_some_and(NodeRecord::is_active);
        let (_, hops) = spawn_dummy_traffic(ch, self.cfg.dummy_ttl, plan, usable, &mut self.rng);
        self.record(SecurityEvent::Dummy {
            origin: ch,
            hops: hops.len(),
        });
        if let Some((_, first)) = hops.first() {
            let rest: Vec<NodeId> = hops.iter().skip(1).map(|(_, to)| *to).collect();
            self.send(ch, &[*first], Body::Dummy { rest });
        }
    }

    fn flat_send(&mut self) {
        let b = baseline_energy_per_second(&self.cfg.energy);
        let flat: Vec<NodeId> = self.plan.flat.clone();
        for id in flat {
            if !self.active(id) {
                continue;
            }
            self.charge(id, EnergyCategory::RadioIdle, b.radio * self.cfg.slot_s);
            self.charge(id, EnergyCategory::Sensor, b.sensor * self.cfg.slot_s);
            if self.conduct(id, Duty::Report) == Conduct::Refuse || !self.active(id) {
                continue;
            }
            let path = self.flat_path(id);
            let payload = self.reading();
            let delay_s = hop_delay(self.cfg.energy.k_data, self.cfg);
            self.send(
                id,
                &[path[0]],
                Body::FlatData {
                    origin: id,
                    payload,
                    rest: path[1..].to_vec(),
                    delay_s,
                },
            );
        }
    }

    /// Greedy route: hop to the in-range flat node nearest the sink that is
    /// strictly closer than the current holder, else straight to the sink.
    fn flat_path(&self, origin: NodeId) -> Vec<NodeId> {
        let range = self.cfg.field.radio_range;
        let sink = self.sink.pos;
        let mut path = Vec::new();
        let mut at = self.node(origin).unwrap().pos;
        loop {
            if at.within(&sink, range) {
                break;
            }
            let here = at.distance_sq(&sink);
            let next = self
                .plan
                .flat
                .iter()
                .filter_map(|id| find(&self.nodes, *id))
                .filter(|n| n.is_active() && n.pos.within(&at, range) && n.pos.distance_sq(&sink) < here)
                .min_by(|a, b| {
                    a.pos
                        .distance_sq(&sink)
                        .total_cmp(&b.pos.distance_sq(&sink))
                        .then(a.id.cmp(&b.id))
                });
            match next {
                Some(n) => {
                    path.push(n.id);
                    at = n.pos;
                }
                None => break,
            }
        }
        path.push(NodeId::SINK);
        path
    }

    fn reading(&mut self) -> [u8; 2] {
        let v: u16 = self.rng.random_range(0..64);
        v.to_be_bytes()
    }

    fn audit(&mut self, prover: NodeId, verifier: NodeId, transfer: u32) {
        if !self.active(prover) || !self.issuance.get(prover).promisc_enable || !self.cfg.security.promiscuous {
            return;
        }
        let acked = self.transfers.get(&transfer).is_some_and(|t| t.acked);
        let Some(v) = find_mut(&mut self.nodes, verifier) else {
            return;
        };
        if v.is_blocked() {
            return;
        }
        let outcome = promiscuous_audit(&mut v.status, acked);
        self.record(SecurityEvent::Audit {
            prover,
            verifier,
            outcome,
        });
    }

    fn block(&mut self, id: NodeId, reason: BlockReason) {
        let attack = self.attack_of(id);
        if let Some(n) = find_mut(&mut self.nodes, id) {
            if !n.is_active() {
                return;
            }
            n.role = crate::topology::Role::Blocked;
        } else {
            return;
        }
        self.trace(TraceKind::Block, id, NodeId::SINK, "block");
        self.record(SecurityEvent::Block {
            node: id,
            reason,
            attack,
        });
    }

    fn arrive(&mut self, msg: Message) {
        let Message { from, to, body } = msg;
        if to.is_sink() {
            self.trace(TraceKind::Rx, to, from, body.name());
            self.at_sink(from, body);
            return;
        }
        if !self.active(to) {
            self.trace(TraceKind::Drop, to, from, body.name());
            return;
        }
        let bits = self.bits(&body);
        self.charge(to, EnergyCategory::Rx, rx_energy(bits, &self.cfg.energy));
        self.charge(to, EnergyCategory::Cpu, cpu_energy(bits, &self.cfg.energy));
        self.trace(TraceKind::Rx, to, from, body.name());
        if !self.active(to) {
            return;
        }
        match body {
            Body::Poll => {
                if self.conduct(to, Duty::Report) == Conduct::Comply {
                    let payload = self.reading();
                    self.send(to, &[from], Body::Report { payload });
                }
            }
            Body::Report { payload } => {
                let hop = hop_delay(self.cfg.energy.k_data, self.cfg);
                if let Some(a) = self.agg.get_mut(&to) {
                    a.reporters.insert(from);
                    a.distinct.insert(payload);
                    a.report_delay_s = hop;
                }
            }
            Body::FeedbackRequest => {
                if self.root_ch() == Some(to) {
                    self.send(to, &[NodeId::SINK], Body::FeedbackResponse);
                }
            }
            Body::StatusRequest => {
                if self.conduct(to, Duty::Control) == Conduct::Comply {
                    self.send(to, &[NodeId::SINK], Body::StatusResponse);
                }
            }
            Body::Challenge { prover, q, transfer } => {
                self.send(to, &[prover], Body::ChallengeRelay { q, transfer });
            }
            Body::ChallengeRelay { q, transfer } => {
                let secret = self.issuance.get(to).secret;
                let used = match self.conduct(to, Duty::MzkpAnswer { secret }) {
                    Conduct::Answer(s) => s,
                    _ => secret,
                };
                self.charge(to, EnergyCategory::Mem, mem_energy(MemAccess::Read, self.cfg.energy.l_key, &self.cfg.energy));
                let answer = mzkp_answer(used, self.issuance.public_n, q).unwrap_or(0);
                self.send(to, &[from], Body::Answer { answer, transfer });
            }
            Body::Answer { answer, transfer } => {
                if let Some(q) = self.transfers.get(&transfer).map(|t| t.q) {
                    self.send(to, &[NodeId::SINK], Body::AnswerRelay { prover: from, answer, q, transfer });
                }
            }
            Body::Verdict { prover, accept, transfer } => {
                if accept && to == prover {
                    if let Some(t) = self.transfers.get(&transfer) {
                        let frames = t.frames.clone();
                        let verifier = t.verifier;
                        let handshake = 5.0 * hop_delay(self.cfg.energy.k_signal, self.cfg);
                        let frames = frames
                            .into_iter()
                            .map(|mut f| {
                                f.delay_s += handshake;
                                f
                            })
                            .collect();
                        self.send_bundle(to, verifier, frames, Some(transfer));
                        let at = self.queue.now() + nanos(self.cfg.ack_window_s);
                        self.queue.schedule(
                            at,
                            Event::AuditCheck {
                                prover: to,
                                verifier,
                                transfer,
                            },
                        );
                    }
                }
            }
            Body::Bundle { frames, gated } => {
                if self.conduct(to, Duty::Forward) == Conduct::Refuse {
                    self.trace(TraceKind::Drop, to, from, "bundle");
                    return;
                }
                if let Some(transfer) = gated {
                    self.send(to, &[from], Body::Ack { transfer });
                }
                self.inbox.entry(to).or_default().extend(frames);
            }
            Body::Ack { transfer } => {
                if let Some(t) = self.transfers.get_mut(&transfer) {
                    if t.prover == to {
                        t.acked = true;
                    }
                }
            }
            Body::Probe => {
                if self.conduct(to, Duty::DummyAck) == Conduct::Comply {
                    self.send(to, &[from], Body::DummyAck);
                }
            }
            Body::DummyAck => {
                if let Some((_, silent)) = self.awaiting.get_mut(&to) {
                    silent.remove(&from);
                }
            }
            Body::Dummy { rest } => {
                if let Some((next, tail)) = rest.split_first() {
                    if self.conduct(to, Duty::Forward) == Conduct::Comply {
                        let tail = tail.to_vec();
                        self.send(to, &[*next], Body::Dummy { rest: tail });
                    }
                }
            }
            Body::FlatData {
                origin,
                payload,
                rest,
                delay_s,
            } => {
                if self.conduct(to, Duty::Forward) == Conduct::Refuse {
                    self.trace(TraceKind::Drop, to, from, "flat_data");
                    return;
                }
                if let Some((next, tail)) = rest.split_first() {
                    let delay_s = delay_s + hop_delay(self.cfg.energy.k_data, self.cfg);
                    self.send(
                        to,
                        &[*next],
                        Body::FlatData {
                            origin,
                            payload,
                            rest: tail.to_vec(),
                            delay_s,
                        },
                    );
                }
            }
            Body::Signal => {
                self.charge(
                    to,
                    EnergyCategory::Mem,
                    mem_energy(MemAccess::Write, self.cfg.energy.l_key, &self.cfg.energy),
                );
            }
            Body::BlockNotice { .. }
            | Body::FeedbackResponse
            | Body::StatusResponse
            | Body::AnswerRelay { .. } => {}
        }
    }

    fn at_sink(&mut self, from: NodeId, body: Body) {
        match body {
            Body::AnswerRelay {
                prover,
                answer,
                q,
                transfer,
            } => {
                let verdict = mzkp_adjudicate(&self.issuance, prover, answer, q).unwrap_or(Verdict::Block);
                let keys = self.issuance.keys(prover);
                let expected = keys
                    .and_then(|k| mzkp_answer(k.secret_s, k.public_n, q).ok())
                    .unwrap_or(0);
                let attack = self.attack_of(prover);
                self.record(SecurityEvent::Challenge {
                    prover,
                    verifier: from,
                    q,
                    claimed: answer,
                    expected,
                    verdict,
                    attack,
                });
                let accept = verdict == Verdict::Accept;
                if let Some(n) = find_mut(&mut self.nodes, prover) {
                    n.status.mzkp.record(if accept { TriState::Pass } else { TriState::Fail });
                }
                if !accept {
                    self.block(prover, BlockReason::Mzkp);
                }
                self.send(NodeId::SINK, &[from, prover], Body::Verdict { prover, accept, transfer });
                if !accept {
                    let chs: Vec<NodeId> = self.plan.ch_ids().filter(|id| self.active(*id)).collect();
                    self.send(NodeId::SINK, &chs, Body::BlockNotice { blocked: prover });
                }
            }
            Body::Bundle { frames, .. } => {
                for f in &frames {
                    self.counters.delivered += f.reports as u64;
                    self.longest_s = self.longest_s.max(f.delay_s);
                }
            }
            Body::FlatData { delay_s, .. } => {
                self.counters.delivered += 1;
                self.longest_s = self.longest_s.max(delay_s);
            }
            Body::DummyAck => {
                if let Some((_, silent)) = self.awaiting.get_mut(&NodeId::SINK) {
                    silent.remove(&from);
                }
            }
            _ => {}
        }
    }

    fn iteration_end(&mut self) {
        let b = baseline_energy_per_second(&self.cfg.energy);
        let dur = self.cfg.iteration_s();
        let chs: Vec<NodeId> = self.plan.ch_ids().collect();
        for ch in chs {
            self.charge(ch, EnergyCategory::RadioIdle, b.radio * dur);
            self.charge(ch, EnergyCategory::Sensor, b.sensor * dur);
        }
        self.delay_ms += self.longest_s * 1e3;
        self.push_row();
        self.residuals.push(self.nodes.iter().map(|n| n.residual).collect());

        if check_termination(&self.nodes, self.cfg.termination_threshold_j, self.cfg.termination_fraction) {
            self.terminated_early = self.iteration + 1 < self.cfg.iterations;
            self.done = true;
            return;
        }
        let next = self.iteration + 1;
        if next >= self.cfg.iterations {
            self.done = true;
            return;
        }
        if next.is_multiple_of(self.cfg.reform_every) {
            self.reform();
        }
        self.iteration = next;
        let at = self.queue.now();
        self.queue.schedule(at, Event::IterationStart);
    }

    fn push_row(&mut self) {
        let threshold = Femtojoules::from_joules(self.cfg.termination_threshold_j);
        let c = self.counters;
        let row = IterationRow {
            iteration: self.iteration + 1,
            time_s: self.now_s(),
            alive: self.nodes.iter().filter(|n| n.is_active()).count(),
            below_threshold: self.nodes.iter().filter(|n| n.residual < threshold).count(),
            dead: self.nodes.iter().filter(|n| n.is_dead()).count(),
            blocked: self.nodes.iter().filter(|n| n.is_blocked()).count(),
            clusters: self.plan.ch_ids().filter(|id| self.active(*id)).count(),
            flat: self.plan.flat.iter().filter(|id| self.active(**id)).count(),
            energy_j: self.ledger.total().joules(),
            delay_ms: self.delay_ms,
            overhead_bytes: c.overhead_bytes,
            control_packets: c.control,
            security_packets: c.security,
            formation_packets: c.formation,
            data_delivered: c.delivered,
            directional_entropy: directional_entropy(c.away_from_sink, c.away_from_sink + c.toward_sink),
        };
        self.rows.push(row);
    }

    fn reform(&mut self) {
        let failing: Vec<(NodeId, SecurityStatus)> = self
            .nodes
            .iter()
            .filter(|n| n.is_active() && n.status.has_fail())
            .map(|n| (n.id, n.status))
            .collect();
        for (id, status) in failing {
            let reason = if status.mzkp == TriState::Fail {
                BlockReason::Mzkp
            } else if status.promisc == TriState::Fail {
                BlockReason::Promiscuous
            } else {
                BlockReason::Mine
            };
            self.block(id, reason);
        }
        let plan = reform_clusters(
            &self.plan,
            &self.nodes,
            &self.sink,
            self.cfg.field.radio_range,
            &self.cfg.clustering,
        );
        for n in &mut self.nodes {
            n.status = SecurityStatus::default();
        }
        apply_plan(&mut self.nodes, &plan);
        self.plan = plan.clone();
        self.plans.push((self.iteration + 1, plan));
        self.issue_keys();
    }

    fn issue_keys(&mut self) {
        let previous = self.issuances.last();
        let issuance = if self.cfg.security.any() {
            issue_keys_and_roles(
                &self.plan,
                &self.nodes,
                &self.cfg.thresholds,
                &self.cfg.security,
                previous,
                &mut self.key_rng,
            )
        } else {
            Issuance {
                epoch: previous.map_or(0, |p| p.epoch + 1),
                ..Issuance::default()
            }
        };
        self.issuance = issuance.clone();
        self.issuances.push(issuance);
        let clusters = self.plan.clusters.clone();
        for c in &clusters {
            let sec = self.issuance.get(c.ch);
            let neighbor = match self.plan.upstream.get(&c.ch) {
                Some(Hop::Ch(id)) => *id,
                _ => NodeId::SINK,
            };
            let packets = SignalPacket::for_cluster(c.ch, self.issuance.public_n, sec.secret, neighbor, &c.members);
            for _ in packets {
                self.send(NodeId::SINK, &[c.ch], Body::Signal);
            }
        }
    }
}
