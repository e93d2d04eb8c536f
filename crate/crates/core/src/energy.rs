//! First-order radio energy model plus CPU, memory and sensing-board costs.
//!
//! Every formula works in joules on `f64`. The [`EnergyLedger`] turns each
//! debit into whole femtojoules before applying it, which keeps the books
//! exact: a node's residual is always its initial energy minus the integer sum
//! of its debits.

use alloc::collections::BTreeMap;
use core::iter::Sum;
use core::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, NodeRecord, Role};

/// Radio model constants.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    /// Electronics energy per bit (J/bit).
    pub e_elec: f64,
    /// Amplifier energy per bit per square meter (J/bit/m²).
    pub e_amp: f64,
    /// Bits per data message.
    pub k_data: u32,
    /// Bits per signal message.
    pub k_signal: u32,
    /// Radio data rate used for the idle baseline (bit/s).
    pub data_rate: f64,
    /// Bits per stored key entry.
    pub l_key: u32,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_elec: 50e-9,
            e_amp: 100e-12,
            k_data: 1000,
            k_signal: 64,
            data_rate: 1000.0,
            l_key: 8,
        }
    }
}

impl EnergyParams {
    pub fn is_valid(&self) -> bool {
        self.e_elec > 0.0
            && self.e_amp > 0.0
            && self.k_data > 0
            && self.k_signal > 0
            && self.data_rate > 0.0
            && self.l_key > 0
    }
}

/// `E_elec·k + E_amp·k·d²`
pub fn tx_energy(k: u32, d: f64, p: &EnergyParams) -> f64 {
    tx_energy_sq(k, d * d, p)
}

/// [`tx_energy`] taking the squared distance directly.
pub fn tx_energy_sq(k: u32, d_sq: f64, p: &EnergyParams) -> f64 {
    let k = f64::from(k);
    p.e_elec * k + p.e_amp * k * d_sq
}

pub fn rx_energy(k: u32, p: &EnergyParams) -> f64 {
    p.e_elec * f64::from(k)
}

pub fn cpu_energy(k: u32, p: &EnergyParams) -> f64 {
    p.e_elec * f64::from(k)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum MemAccess {
    Read,
    Write,
}

pub fn mem_energy(kind: MemAccess, l: u32, p: &EnergyParams) -> f64 {
    let factor = match kind {
        MemAccess::Read => 2.0,
        MemAccess::Write => 0.5,
    };
    factor * p.e_elec * f64::from(l)
}

/// Per-second cost of an awake node.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Baseline {
    pub radio: f64,
    pub sensor: f64,
}

pub fn baseline_energy_per_second(p: &EnergyParams) -> Baseline {
    let radio = p.e_elec * p.data_rate;
    Baseline {
        radio,
        sensor: radio * 2.0 / 3.0,
    }
}

/// The worked per-node total: one data and one signal message each way,
/// CPU handling of both, one key read and one key write, and one second of
/// sensing.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct NodeEnergy {
    pub transceiver: f64,
    pub cpu: f64,
    pub sensor: f64,
    pub total: f64,
}

pub fn node_message_energy(p: &EnergyParams, d: f64) -> NodeEnergy {
    let transceiver = tx_energy(p.k_data, d, p)
        + tx_energy(p.k_signal, d, p)
        + rx_energy(p.k_data, p)
        + rx_energy(p.k_signal, p);
    let cpu = cpu_energy(p.k_data, p)
        + cpu_energy(p.k_signal, p)
        + mem_energy(MemAccess::Read, p.l_key, p)
        + mem_energy(MemAccess::Write, p.l_key, p);
    let sensor = baseline_energy_per_second(p).sensor;
    NodeEnergy {
        transceiver,
        cpu,
        sensor,
        total: transceiver + cpu + sensor,
    }
}

/// Network-wide consumption rate: per-node rate times node count.
pub fn network_rate(per_node_j_per_s: f64, nodes: usize) -> f64 {
    per_node_j_per_s * nodes as f64
}

/// Consumption over a period at a constant network rate.
pub fn network_budget(network_j_per_s: f64, seconds: f64) -> f64 {
    network_j_per_s * seconds
}

/// Energy in whole femtojoules.
#[derive(
    Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Femtojoules(pub u64);

impl Femtojoules {
    pub const ZERO: Femtojoules = Femtojoules(0);
    const PER_JOULE: f64 = 1e15;

    /// Rounds to the nearest femtojoule; negative and NaN inputs give zero.
    pub fn from_joules(j: f64) -> Self {
        let fj = j * Self::PER_JOULE;
        if fj > 0.0 {
            Femtojoules((fj + 0.5) as u64)
        } else {
            Femtojoules::ZERO
        }
    }

    pub fn joules(self) -> f64 {
        self.0 as f64 / Self::PER_JOULE
    }

    pub fn saturating_sub(self, other: Self) -> Self {
        Femtojoules(self.0.saturating_sub(other.0))
    }
}

impl Add for Femtojoules {
    type Output = Femtojoules;
    fn add(self, rhs: Self) -> Self {
        Femtojoules(self.0 + rhs.0)
    }
}

impl AddAssign for Femtojoules {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sum for Femtojoules {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Femtojoules::ZERO, Add::add)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyCategory {
    Tx,
    Rx,
    Cpu,
    Mem,
    RadioIdle,
    Sensor,
}

impl EnergyCategory {
    pub const ALL: [EnergyCategory; 6] = [
        EnergyCategory::Tx,
        EnergyCategory::Rx,
        EnergyCategory::Cpu,
        EnergyCategory::Mem,
        EnergyCategory::RadioIdle,
        EnergyCategory::Sensor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergyCategory::Tx => "tx",
            EnergyCategory::Rx => "rx",
            EnergyCategory::Cpu => "cpu",
            EnergyCategory::Mem => "mem",
            EnergyCategory::RadioIdle => "radio_idle",
            EnergyCategory::Sensor => "sensor",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Cumulative debits for one node, by category.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Debits(pub [Femtojoules; 6]);

impl Debits {
    pub fn get(&self, cat: EnergyCategory) -> Femtojoules {
        self.0[cat.index()]
    }

    pub fn total(&self) -> Femtojoules {
        self.0.iter().copied().sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    debits: BTreeMap<NodeId, Debits>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Debits `joules` from `node`, capped at its residual. A node drained to
    /// zero becomes [`Role::Dead`]. Returns the amount actually charged.
    pub fn charge(&mut self, node: &mut NodeRecord, cat: EnergyCategory, joules: f64) -> Femtojoules {
        if node.role == Role::Sink {
            return Femtojoules::ZERO;
        }
        let wanted = Femtojoules::from_joules(joules);
        let charged = Femtojoules(wanted.0.min(node.residual.0));
        if charged.0 > 0 {
            node.residual = node.residual.saturating_sub(charged);
            self.debits.entry(node.id).or_default().0[cat.index()] += charged;
        }
        if node.residual == Femtojoules::ZERO {
            node.role = Role::Dead;
        }
        charged
    }

    pub fn node(&self, id: NodeId) -> Debits {
        self.debits.get(&id).copied().unwrap_or_default()
    }

    pub fn total(&self) -> Femtojoules {
        self.debits.values().map(Debits::total).sum()
    }

    pub fn category_total(&self, cat: EnergyCategory) -> Femtojoules {
        self.debits.values().map(|d| d.get(cat)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Debits)> {
        self.debits.iter().map(|(id, d)| (*id, d))
    }
}
