//! Physical switch model and the three-phase slot engine.
//!
//! An N x N crosspoint-buffered switch: each input holds N virtual output
//! queues (VOQs), each crosspoint holds a one-cell buffer. A slot runs in
//! three phases: (I) every port derives the shared random permutation for the
//! slot, (II) inputs move at most one cell each from a VOQ into an empty
//! crosspoint buffer, (III) outputs drain at most one occupied crosspoint
//! buffer each. The engine enforces those transmission constraints on every
//! slot regardless of which scheduler is driving it.

use crate::error::Error;
use crate::matching::Matching;
use crate::Result;
use std::collections::VecDeque;

/// Scheduler selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    Disquo,
    Mwm,
    RrRr,
    LqfRr,
    OqReference,
}

impl SchedulerKind {
    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Disquo => "disquo",
            SchedulerKind::Mwm => "mwm",
            SchedulerKind::RrRr => "rr_rr",
            SchedulerKind::LqfRr => "lqf_rr",
            SchedulerKind::OqReference => "oq_reference",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disquo" => Ok(SchedulerKind::Disquo),
            "mwm" => Ok(SchedulerKind::Mwm),
            "rr_rr" => Ok(SchedulerKind::RrRr),
            "lqf_rr" => Ok(SchedulerKind::LqfRr),
            "oq_reference" | "oq" => Ok(SchedulerKind::OqReference),
            other => Err(Error::InvalidConfig(format!("unknown scheduler `{other}`"))),
        }
    }
}

/// How faithfully DISQUO follows the published text (see [`crate::disquo`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    /// The published rules verbatim; input/output views may diverge and the
    /// divergence is counted per slot.
    Literal,
    /// Literal rules plus an implicit NACK: a join whose signaling packet was
    /// not drained is reverted. Views provably agree. Default.
    Consistent,
    /// The join test consults the true output state and the output side
    /// mirrors input decisions exactly; realizes the ideal schedule chain.
    Oracle,
}

impl std::str::FromStr for Fidelity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Fidelity::Literal),
            "consistent" => Ok(Fidelity::Consistent),
            "oracle" => Ok(Fidelity::Oracle),
            other => Err(Error::InvalidConfig(format!("unknown fidelity `{other}`"))),
        }
    }
}

/// Which queue statistic feeds the DISQUO weight floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Global maximum queue scanned exactly every slot.
    ExactQmax,
    /// Round-robin broadcast estimate of the maximum queue.
    EstimatedQmax,
    /// Purely local weights (no floor); the practical variant.
    Local,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_qmax" => Ok(WeightMode::ExactQmax),
            "estimated_qmax" => Ok(WeightMode::EstimatedQmax),
            "local" => Ok(WeightMode::Local),
            other => Err(Error::InvalidConfig(format!(
                "unknown weight mode `{other}`"
            ))),
        }
    }
}

/// Static configuration of a run.
#[derive(Debug, Clone)]
pub struct SwitchConfig {
    pub n_ports: usize,
    /// Crosspoint buffer depth; fixed at one cell.
    pub buffer_depth: usize,
    pub scheduler: SchedulerKind,
    pub fidelity: Fidelity,
    pub weight_mode: WeightMode,
    pub epsilon: f64,
    pub seed: u64,
    pub slots: u64,
    pub warmup_slots: u64,
}

impl SwitchConfig {
    pub fn new(n_ports: usize, scheduler: SchedulerKind, seed: u64, slots: u64) -> Self {
        SwitchConfig {
            n_ports,
            buffer_depth: 1,
            scheduler,
            fidelity: Fidelity::Consistent,
            weight_mode: WeightMode::Local,
            epsilon: 0.05,
            seed,
            slots,
            warmup_slots: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ports == 0 {
            return Err(Error::InvalidConfig("n_ports must be at least 1".into()));
        }
        if self.buffer_depth != 1 {
            return Err(Error::InvalidConfig(
                "buffer_depth is fixed at 1 cell per crosspoint".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        if self.slots <= self.warmup_slots {
            return Err(Error::InvalidConfig(format!(
                "slots ({}) must exceed warmup_slots ({})",
                self.slots, self.warmup_slots
            )));
        }
        Ok(())
    }
}

/// A fixed-size cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub input: usize,
    pub output: usize,
    pub arrival_slot: u64,
}

/// The N x N grid of per-(input, output) FIFOs.
#[derive(Debug, Clone)]
pub struct VoqMatrix {
    n: usize,
    queues: Vec<VecDeque<Packet>>,
}

impl VoqMatrix {
    pub fn new(n: usize) -> Self {
        VoqMatrix {
            n,
            queues: (0..n * n).map(|_| VecDeque::new()).collect(),
        }
    }

    #[inline]
    pub fn len(&self, input: usize, output: usize) -> u64 {
        self.queues[input * self.n + output].len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(|q| q.is_empty())
    }

    pub fn push(&mut self, packet: Packet) {
        self.queues[packet.input * self.n + packet.output].push_back(packet);
    }

    pub fn pop(&mut self, input: usize, output: usize) -> Option<Packet> {
        self.queues[input * self.n + output].pop_front()
    }

    pub fn total(&self) -> u64 {
        self.queues.iter().map(|q| q.len() as u64).sum()
    }

    /// Queue lengths as a row-major vector.
    pub fn lengths(&self) -> Vec<u64> {
        self.queues.iter().map(|q| q.len() as u64).collect()
    }

    pub fn max_len(&self) -> u64 {
        self.queues
            .iter()
            .map(|q| q.len() as u64)
            .max()
            .unwrap_or(0)
    }

    /// Longest queue at one input.
    pub fn row_max(&self, input: usize) -> u64 {
        (0..self.n).map(|j| self.len(input, j)).max().unwrap_or(0)
    }
}

/// Unit-depth crosspoint buffers.
#[derive(Debug, Clone)]
pub struct CrosspointGrid {
    n: usize,
    cells: Vec<Option<Packet>>,
}

impl CrosspointGrid {
    pub fn new(n: usize) -> Self {
        CrosspointGrid {
            n,
            cells: vec![None; n * n],
        }
    }

    #[inline]
    pub fn occupied(&self, input: usize, output: usize) -> bool {
        self.cells[input * self.n + output].is_some()
    }

    pub fn store(&mut self, packet: Packet) -> Result<()> {
        let idx = packet.input * self.n + packet.output;
        if self.cells[idx].is_some() {
            return Err(Error::ProtocolViolation {
                slot: packet.arrival_slot,
                detail: format!(
                    "write to occupied crosspoint buffer ({}, {})",
                    packet.input, packet.output
                ),
            });
        }
        self.cells[idx] = Some(packet);
        Ok(())
    }

    pub fn take(&mut self, input: usize, output: usize) -> Option<Packet> {
        self.cells[input * self.n + output].take()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().filter(|c| c.is_some()).count() as u64
    }

    /// Occupied cell count in one column.
    pub fn column_total(&self, output: usize) -> u64 {
        (0..self.n).filter(|&i| self.occupied(i, output)).count() as u64
    }
}

/// What a scheduler may observe when making its per-slot decisions.
pub struct SwitchView<'a> {
    pub slot: u64,
    pub n_ports: usize,
    pub queues: &'a VoqMatrix,
    pub buffers: &'a CrosspointGrid,
}

/// Per-input choice of the column to transmit into during Phase II.
pub type InputSchedule = Vec<Option<usize>>;
/// Per-output choice of the row to drain during Phase III.
pub type OutputSchedule = Vec<Option<usize>>;

/// End-of-slot information a scheduler reports back to the engine.
#[derive(Debug, Clone)]
pub struct SchedulerSlotInfo {
    pub x_input_view: Matching,
    pub x_output_view: Matching,
    pub divergence_count: u64,
}

impl SchedulerSlotInfo {
    pub fn none(n: usize) -> Self {
        SchedulerSlotInfo {
            x_input_view: Matching::empty(n),
            x_output_view: Matching::empty(n),
            divergence_count: 0,
        }
    }
}

/// The two-callback scheduler contract shared by DISQUO and the baselines.
///
/// `input_phase` runs after arrivals are enqueued and must name, per input,
/// the column to send into (subject to: buffer empty, queue nonempty).
/// `output_phase` runs after Phase II writes are visible; `arrived` marks the
/// cells written this slot. `end_slot` lets a scheduler reconcile its views
/// once drains are final.
pub trait SlotScheduler {
    fn input_phase(&mut self, view: &SwitchView<'_>) -> InputSchedule;
    fn output_phase(&mut self, view: &SwitchView<'_>, arrived: &[bool]) -> OutputSchedule;
    fn end_slot(&mut self, view: &SwitchView<'_>) -> SchedulerSlotInfo {
        SchedulerSlotInfo::none(view.n_ports)
    }
}

/// Full slotted-time state of one simulated switch.
#[derive(Debug, Clone)]
pub struct SwitchState {
    pub config: SwitchConfig,
    pub slot: u64,
    pub voqs: VoqMatrix,
    pub buffers: CrosspointGrid,
    pub x_input_view: Matching,
    pub x_output_view: Matching,
    pub injected: u64,
    pub departed: u64,
}

/// What happened in one slot.
#[derive(Debug, Clone)]
pub struct SlotReport {
    pub slot: u64,
    pub injected: Vec<Packet>,
    /// Cells written during Phase II.
    pub to_buffer: Vec<(usize, usize)>,
    /// Packets drained during Phase III, with their departure slot.
    pub departed: Vec<(Packet, u64)>,
    pub x_input_view: Matching,
    pub x_output_view: Matching,
    pub divergence_count: u64,
}

/// Initialize a switch: empty queues and buffers, empty schedule views.
pub fn init_switch(config: SwitchConfig) -> Result<SwitchState> {
    config.validate()?;
    let n = config.n_ports;
    Ok(SwitchState {
        config,
        slot: 0,
        voqs: VoqMatrix::new(n),
        buffers: CrosspointGrid::new(n),
        x_input_view: Matching::empty(n),
        x_output_view: Matching::empty(n),
        injected: 0,
        departed: 0,
    })
}

impl SwitchState {
    /// Saturation harness: top every VOQ up to at least `level` cells by
    /// injecting synthetic packets stamped with the current slot. Conservation
    /// accounting includes them.
    pub fn top_up_queues(&mut self, level: u64) {
        let n = self.config.n_ports;
        for i in 0..n {
            for j in 0..n {
                while self.voqs.len(i, j) < level {
                    self.voqs.push(Packet {
                        input: i,
                        output: j,
                        arrival_slot: self.slot,
                    });
                    self.injected += 1;
                }
            }
        }
    }
}

/// Advance one slot: enqueue arrivals, then run Phases I-III under `sched`.
///
/// Arrivals must carry at most one packet per input. The engine validates the
/// schedules it executes: a Phase II write needs an empty buffer and a
/// nonempty queue, a Phase III drain needs an occupied buffer.
pub fn advance_slot(
    state: &mut SwitchState,
    arrivals: &[Packet],
    sched: &mut dyn SlotScheduler,
) -> Result<SlotReport> {
    let n = state.config.n_ports;
    let slot = state.slot;

    // Arrivals enqueue before Phase I so this slot's weights see them.
    let mut seen_input = vec![false; n];
    for p in arrivals {
        if p.input >= n || p.output >= n {
            return Err(Error::InvalidConfig(format!(
                "arrival ({}, {}) out of range for {n} ports",
                p.input, p.output
            )));
        }
        if seen_input[p.input] {
            return Err(Error::InvalidConfig(format!(
                "more than one arrival at input {} in slot {slot}",
                p.input
            )));
        }
        seen_input[p.input] = true;
        state.voqs.push(*p);
        state.injected += 1;
    }

    // Phase I happens inside the scheduler: every port derives H(slot) from
    // the shared seed. Phase II: collect and execute the input schedule.
    let input_schedule = {
        let view = SwitchView {
            slot,
            n_ports: n,
            queues: &state.voqs,
            buffers: &state.buffers,
        };
        sched.input_phase(&view)
    };
    if input_schedule.len() != n {
        return Err(Error::ProtocolViolation {
            slot,
            detail: format!(
                "input schedule has {} rows, expected {n}",
                input_schedule.len()
            ),
        });
    }

    let mut to_buffer = Vec::new();
    let mut arrived = vec![false; n * n];
    for (i, &choice) in input_schedule.iter().enumerate() {
        let Some(j) = choice else { continue };
        if j >= n {
            return Err(Error::ProtocolViolation {
                slot,
                detail: format!("input {i} scheduled out-of-range column {j}"),
            });
        }
        if state.buffers.occupied(i, j) {
            return Err(Error::ProtocolViolation {
                slot,
                detail: format!("input {i} scheduled into occupied buffer ({i}, {j})"),
            });
        }
        let Some(packet) = state.voqs.pop(i, j) else {
            return Err(Error::ProtocolViolation {
                slot,
                detail: format!("input {i} scheduled empty VOQ ({i}, {j})"),
            });
        };
        state.buffers.store(packet)?;
        arrived[i * n + j] = true;
        to_buffer.push((i, j));
    }

    // Phase III: collect and execute the output schedule.
    let output_schedule = {
        let view = SwitchView {
            slot,
            n_ports: n,
            queues: &state.voqs,
            buffers: &state.buffers,
        };
        sched.output_phase(&view, &arrived)
    };
    if output_schedule.len() != n {
        return Err(Error::ProtocolViolation {
            slot,
            detail: format!(
                "output schedule has {} columns, expected {n}",
                output_schedule.len()
            ),
        });
    }

    let mut departed = Vec::new();
    for (j, &choice) in output_schedule.iter().enumerate() {
        let Some(i) = choice else { continue };
        if i >= n {
            return Err(Error::ProtocolViolation {
                slot,
                detail: format!("output {j} scheduled out-of-range row {i}"),
            });
        }
        let Some(packet) = state.buffers.take(i, j) else {
            return Err(Error::ProtocolViolation {
                slot,
                detail: format!("output {j} scheduled drain of empty buffer ({i}, {j})"),
            });
        };
        state.departed += 1;
        departed.push((packet, slot));
    }

    let info = {
        let view = SwitchView {
            slot,
            n_ports: n,
            queues: &state.voqs,
            buffers: &state.buffers,
        };
        sched.end_slot(&view)
    };
    state.x_input_view = info.x_input_view.clone();
    state.x_output_view = info.x_output_view.clone();
    state.slot += 1;

    Ok(SlotReport {
        slot,
        injected: arrivals.to_vec(),
        to_buffer,
        departed,
        x_input_view: info.x_input_view,
        x_output_view: info.x_output_view,
        divergence_count: info.divergence_count,
    })
}

/// Check every structural invariant of a state; returns human-readable
/// descriptors, empty when all hold. Reports, never errors.
pub fn validate_state(state: &SwitchState) -> Vec<String> {
    let mut violations = Vec::new();
    let n = state.config.n_ports;

    // Both schedule views must be partial matchings.
    if !state.x_input_view.is_valid() {
        violations.push("input-side schedule view is not a matching".to_string());
    }
    if !state.x_output_view.is_valid() {
        violations.push("output-side schedule view is not a matching".to_string());
    }
    // Row-sum check is structural in the representation, but a hand-built
    // state could still carry out-of-range columns; is_valid covers that.

    // Packet conservation: injected = in VOQs + in buffers + departed.
    let held = state.voqs.total() + state.buffers.total();
    if state.injected != held + state.departed {
        violations.push(format!(
            "conservation broken: injected {} != queued {} + buffered {} + departed {}",
            state.injected,
            state.voqs.total(),
            state.buffers.total(),
            state.departed
        ));
    }

    // Buffer depth is one by construction of CrosspointGrid; packets must sit
    // at their own crosspoint.
    for i in 0..n {
        for j in 0..n {
            if let Some(p) = state.buffers.cells_ref(i, j) {
                if p.input != i || p.output != j {
                    violations.push(format!(
                        "packet for ({}, {}) stored at crosspoint ({i}, {j})",
                        p.input, p.output
                    ));
                }
            }
        }
    }

    violations
}

impl CrosspointGrid {
    fn cells_ref(&self, input: usize, output: usize) -> Option<&Packet> {
        self.cells[input * self.n + output].as_ref()
    }
}
