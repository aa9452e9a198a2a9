use serde::{Deserialize, Serialize};

/// Position in meters; ground nodes keep `z = 0`.
pub type Vec3 = [f64; 3];

/// Index into the world's computing/relay node table.
pub type NodeId = usize;

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Execution modes of a partially offloaded task, in the order used by every
/// five-element per-mode vector in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Local,
    Rsu,
    Luav,
    HuavRsu,
    HuavBs,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Local, Mode::Rsu, Mode::Luav, Mode::HuavRsu, Mode::HuavBs];
    pub const REMOTE: [Mode; 4] = [Mode::Rsu, Mode::Luav, Mode::HuavRsu, Mode::HuavBs];

    /// Order in which remote modes are resolved; every mode hands unplaced
    /// mass to the one after it and [`Mode::Local`] absorbs the rest.
    pub const FALLBACK_CHAIN: [Mode; 5] =
        [Mode::Luav, Mode::Rsu, Mode::HuavRsu, Mode::HuavBs, Mode::Local];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_remote(self) -> bool {
        self != Mode::Local
    }

    pub fn is_relay(self) -> bool {
        matches!(self, Mode::HuavRsu | Mode::HuavBs)
    }

    /// Successor in the fallback chain; `None` for LOCAL.
    pub fn fallback(self) -> Option<Mode> {
        match self {
            Mode::Luav => Some(Mode::Rsu),
            Mode::Rsu => Some(Mode::HuavRsu),
            Mode::HuavRsu => Some(Mode::HuavBs),
            Mode::HuavBs => Some(Mode::Local),
            Mode::Local => None,
        }
    }

    /// Node class that executes this mode's share.
    pub fn target_kind(self) -> Option<NodeKind> {
        match self {
            Mode::Local => None,
            Mode::Rsu | Mode::HuavRsu => Some(NodeKind::Rsu),
            Mode::Luav => Some(NodeKind::Luav),
            Mode::HuavBs => Some(NodeKind::Bs),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Local => "local",
            Mode::Rsu => "rsu",
            Mode::Luav => "luav",
            Mode::HuavRsu => "huav_rsu",
            Mode::HuavBs => "huav_bs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Vehicle,
    Rsu,
    Luav,
    Huav,
    Bs,
}

/// One vehicle's computation job for the current slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub vehicle_id: usize,
    /// Input size in bits.
    pub data_size: f64,
    /// Required CPU cycles.
    pub cycles: f64,
    /// Maximum tolerable delay in seconds.
    pub deadline: f64,
    /// Larger is more urgent.
    pub priority: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Vec3,
    /// F^max, cycles/s.
    pub cpu_total: f64,
    /// f^remain, cycles/s; renewed every slot.
    pub cpu_remaining: f64,
    pub kappa: f64,
    /// Joules; only meaningful for UAVs.
    pub energy_remaining: f64,
    /// m/s for vehicles and LUAVs.
    pub velocity: f64,
    /// Heading in radians for LUAVs.
    pub heading: f64,
    pub depleted: bool,
}

impl NodeState {
    pub fn remain_fraction(&self) -> f64 {
        if self.cpu_total > 0.0 {
            (self.cpu_remaining / self.cpu_total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Per-vehicle split over the five modes plus resolved targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadDecision {
    pub vehicle_id: usize,
    pub lambda: [f64; 5],
    pub target: [Option<NodeId>; 5],
    /// CPU frequency granted on the target node for each remote mode.
    pub alloc: [f64; 5],
}

impl OffloadDecision {
    pub fn unresolved(vehicle_id: usize, lambda: [f64; 5]) -> Self {
        Self { vehicle_id, lambda, target: [None; 5], alloc: [0.0; 5] }
    }

    pub fn all_local(vehicle_id: usize) -> Self {
        Self::unresolved(vehicle_id, [1.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda.iter().sum()
    }
}

/// Heading/speed command for one LUAV in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuavControl {
    pub luav_id: usize,
    /// Radians in [0, 2π).
    pub heading: f64,
    /// m/s in [0, v_max].
    pub speed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub lambda_sum: u32,
    pub capacity: u32,
    pub displacement: u32,
    pub energy_monotone: u32,
    pub huav_budget: u32,
    /// Tasks that no combination of nodes can finish before their deadline.
    pub infeasible_tasks: u32,
}

impl Violations {
    /// Count of hard-constraint breaches; infeasible tasks and the soft HUAV
    /// budget are reported separately.
    pub fn hard(&self) -> u32 {
        self.lambda_sum + self.capacity + self.displacement + self.energy_monotone
    }

    pub fn add(&mut self, other: &Violations) {
        self.lambda_sum += other.lambda_sum;
        self.capacity += other.capacity;
        self.displacement += other.displacement;
        self.energy_monotone += other.energy_monotone;
        self.huav_budget += other.huav_budget;
        self.infeasible_tasks += other.infeasible_tasks;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub completion_rate: f64,
    /// Sum over vehicles of the max-over-modes delay, seconds.
    pub total_delay: f64,
    pub compute_energy: f64,
    pub uav_energy: f64,
    pub system_energy: f64,
    pub reward: f64,
    pub offload_mass: [f64; 5],
    /// Computation energy spent on each node this slot (indexed by NodeId).
    pub node_energy: Vec<f64>,
    pub violations: Violations,
}
