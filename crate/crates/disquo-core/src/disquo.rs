//! The DISQUO scheduler: queue-weighted Glauber updates over the schedule,
//! with decisions signaled implicitly through crosspoint buffer occupancy.
//!
//! Per slot, every port derives the same random permutation H(n) from the
//! shared seed. Only pairs selected by H(n) may join or leave the schedule.
//! An input signals "keep" or "join" by placing a packet in the pair's
//! crosspoint buffer; the absence of a packet signals "leave" or "decline".
//! Ports without a serviceable match this slot — free ports, and matched
//! ports whose pair has nothing to move — transmit opportunistically: such
//! an input sends to some empty buffer with a backlogged queue, such an
//! output drains some occupied buffer, both preferring the pair H(n+1)
//! proposes. These augmentations never touch a cell that carries signaling
//! meaning this slot, so the two views of the schedule stay in sync.
//!
//! The published rules leave one gap: an empty buffer does not prove the
//! output is free, so a join against a busy output strands its signaling
//! packet and splits the two views of the schedule. The three fidelity modes
//! isolate that gap: `Literal` runs the text as written and counts
//! divergence, `Consistent` adds an implicit NACK (a join whose packet was
//! not drained is reverted), and `Oracle` gives the join test and the output
//! side perfect knowledge, realizing the ideal schedule chain.

use crate::matching::Matching;
use crate::rng::{self, CounterRng};
use crate::switch::{
    Fidelity, InputSchedule, OutputSchedule, SchedulerSlotInfo, SlotScheduler, SwitchConfig,
    SwitchView, WeightMode,
};
use crate::{Error, Result};
use std::collections::BTreeMap;

// ── Weight functions ────────────────────────────────────────────────────────

/// The concave queue-to-weight map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFn {
    /// Production form: log(1+x) / log(e + log(1+x)).
    LogOverDamping,
    /// Analysis hook with the damping term dropped: log(1+x). Its derivative
    /// is exactly 1/(1+x), which makes hand checks transparent.
    PlainLog,
}

/// The damping term g(x) = log(e + log(1+x)); g(x) >= 1 and g'(x) >= 0.
pub fn damping(x: f64) -> f64 {
    (std::f64::consts::E + (1.0 + x).ln()).ln()
}

impl WeightFn {
    /// f(x).
    pub fn eval(self, x: f64) -> f64 {
        match self {
            WeightFn::LogOverDamping => (1.0 + x).ln() / damping(x),
            WeightFn::PlainLog => (1.0 + x).ln(),
        }
    }

    /// f'(x), analytic.
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            WeightFn::LogOverDamping => {
                let l = (1.0 + x).ln();
                let g_arg = std::f64::consts::E + l;
                let ln_g = g_arg.ln();
                (ln_g - l / g_arg) / ((1.0 + x) * ln_g * ln_g)
            }
            WeightFn::PlainLog => 1.0 / (1.0 + x),
        }
    }

    /// f^{-1}(y) for y >= 0, by bisection on the increasing f.
    pub fn inverse(self, y: f64) -> f64 {
        assert!(y >= 0.0, "weight function inverse needs y >= 0");
        if y == 0.0 {
            return 0.0;
        }
        let mut hi = 1.0f64;
        while self.eval(hi) < y {
            hi *= 2.0;
            if hi > 1e300 {
                return hi;
            }
        }
        let mut lo = 0.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Activation probability p = e^w / (1 + e^w), written in the overflow-safe
/// form. p(0) = 1/2 exactly and p is strictly increasing.
pub fn activation_probability(w: f64) -> f64 {
    debug_assert!(w >= 0.0);
    1.0 / (1.0 + (-w).exp())
}

/// Everything needed to turn a queue length into an activation weight.
#[derive(Debug, Clone)]
pub struct WeightParams {
    pub mode: WeightMode,
    pub epsilon: f64,
    pub f: WeightFn,
    pub n_ports: usize,
}

impl WeightParams {
    pub fn new(mode: WeightMode, epsilon: f64, n_ports: usize) -> Self {
        WeightParams {
            mode,
            epsilon,
            f: WeightFn::LogOverDamping,
            n_ports,
        }
    }

    /// The weight floor (epsilon / 2N^2) * f(qmax) applied in the qmax modes.
    pub fn floor(&self, qmax: f64) -> f64 {
        let n2 = (self.n_ports * self.n_ports) as f64;
        self.epsilon / (2.0 * n2) * self.f.eval(qmax)
    }

    /// W = f(Q~) where Q~ = max{ f^{-1}(floor), q }. Since f is increasing
    /// this is just max{ floor, f(q) }; local mode drops the floor entirely.
    pub fn weight(&self, q: f64, qmax: f64) -> Result<f64> {
        if q < 0.0 {
            return Err(Error::InvalidConfig(format!("negative queue length {q}")));
        }
        Ok(match self.mode {
            WeightMode::Local => self.f.eval(q),
            WeightMode::ExactQmax | WeightMode::EstimatedQmax => {
                self.f.eval(q).max(self.floor(qmax))
            }
        })
    }

    /// The clamped queue value Q~ itself (needed by the convergence-rate
    /// quantities, which evaluate f' at Q~).
    pub fn q_tilde(&self, q: f64, qmax: f64) -> f64 {
        match self.mode {
            WeightMode::Local => q,
            WeightMode::ExactQmax | WeightMode::EstimatedQmax => {
                q.max(self.f.inverse(self.floor(qmax)))
            }
        }
    }
}

// ── Shared permutation schedule ─────────────────────────────────────────────

/// The input/output permutation H(n), derivable by any port from (seed, slot).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn from_forward(forward: Vec<usize>) -> Self {
        let mut inverse = vec![0; forward.len()];
        for (i, &j) in forward.iter().enumerate() {
            inverse[j] = i;
        }
        Permutation { forward, inverse }
    }

    pub fn n_ports(&self) -> usize {
        self.forward.len()
    }

    /// The output paired with `input`.
    pub fn col(&self, input: usize) -> usize {
        self.forward[input]
    }

    /// The input paired with `output`.
    pub fn row(&self, output: usize) -> usize {
        self.inverse[output]
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }
}

/// Uniform random permutation for a slot, a pure function of (seed, slot).
pub fn permutation(seed: u64, slot: u64, n_ports: usize) -> Permutation {
    let mut rng = CounterRng::from_words(&[seed, rng::TAG_PERM, slot]);
    Permutation::from_forward(rng::random_permutation(&mut rng, n_ports))
}

// ── Qmax broadcast estimation ───────────────────────────────────────────────

/// Round-robin broadcast estimate of the global maximum queue size: at slot
/// kN + i only linecard i reports its local maximum, and the estimate is the
/// max over the latest N reports. After one full round the estimate is within
/// 2N of the true maximum, since each queue moves by at most one per slot.
#[derive(Debug, Clone)]
pub struct QmaxEstimator {
    last_reported: Vec<u64>,
}

impl QmaxEstimator {
    pub fn new(n_ports: usize) -> Self {
        QmaxEstimator {
            last_reported: vec![0; n_ports],
        }
    }

    /// Record this slot's broadcast (linecard `slot % N`) and return the
    /// current estimate.
    pub fn observe(&mut self, slot: u64, view: &SwitchView<'_>) -> u64 {
        let n = self.last_reported.len();
        let reporter = (slot % n as u64) as usize;
        self.last_reported[reporter] = view.queues.row_max(reporter);
        self.estimate()
    }

    pub fn estimate(&self) -> u64 {
        self.last_reported.iter().copied().max().unwrap_or(0)
    }
}

// ── Randomness plumbing ─────────────────────────────────────────────────────

/// Coin and permutation source. Scripted entries override the counter stream;
/// anything unscripted falls through to it. Scripting exists so tests can
/// replay exact published traces.
#[derive(Debug, Clone)]
enum RandomSource {
    Counter {
        seed: u64,
    },
    Scripted {
        seed: u64,
        perms: BTreeMap<u64, Vec<usize>>,
        coins: BTreeMap<(u64, usize, usize), f64>,
    },
}

impl RandomSource {
    fn permutation(&self, slot: u64, n: usize) -> Permutation {
        match self {
            RandomSource::Counter { seed } => permutation(*seed, slot, n),
            RandomSource::Scripted { seed, perms, .. } => match perms.get(&slot) {
                Some(fwd) => Permutation::from_forward(fwd.clone()),
                None => permutation(*seed, slot, n),
            },
        }
    }

    fn coin(&self, slot: u64, i: usize, j: usize) -> f64 {
        match self {
            RandomSource::Counter { seed } => rng::coin(*seed, slot, i, j),
            RandomSource::Scripted { seed, coins, .. } => coins
                .get(&(slot, i, j))
                .copied()
                .unwrap_or_else(|| rng::coin(*seed, slot, i, j)),
        }
    }
}

// ── The scheduler ───────────────────────────────────────────────────────────

/// Per-run DISQUO state: both sides' view of the schedule, augmentation
/// pointers, and the qmax estimator.
#[derive(Debug, Clone)]
pub struct DisquoScheduler {
    fidelity: Fidelity,
    params: WeightParams,
    randomness: RandomSource,
    /// Input i's believed match (the row view of X).
    input_side: Vec<Option<usize>>,
    /// Output j's believed match (the column view of X).
    output_side: Vec<Option<usize>>,
    qmax_estimator: QmaxEstimator,
    in_rr: Vec<usize>,
    out_rr: Vec<usize>,
    /// Joins attempted this slot, checked against the buffer after Phase III.
    pending_joins: Vec<Option<usize>>,
    frozen_weights: Option<Vec<f64>>,
    divergent_slots: u64,
}

impl DisquoScheduler {
    pub fn new(config: &SwitchConfig) -> Self {
        Self::with_params(
            config.n_ports,
            config.fidelity,
            WeightParams::new(config.weight_mode, config.epsilon, config.n_ports),
            config.seed,
        )
    }

    pub fn with_params(n: usize, fidelity: Fidelity, params: WeightParams, seed: u64) -> Self {
        DisquoScheduler {
            fidelity,
            params,
            randomness: RandomSource::Counter { seed },
            input_side: vec![None; n],
            output_side: vec![None; n],
            qmax_estimator: QmaxEstimator::new(n),
            in_rr: vec![0; n],
            out_rr: vec![0; n],
            pending_joins: vec![None; n],
            frozen_weights: None,
            divergent_slots: 0,
        }
    }

    /// Fix the weight matrix (row-major), ignoring queue lengths. Harness hook
    /// for sampling the schedule chain at a chosen stationary point.
    pub fn with_frozen_weights(mut self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.input_side.len() * self.input_side.len());
        self.frozen_weights = Some(weights);
        self
    }

    /// Replace selected permutations and coins with scripted values; anything
    /// not scripted falls back to the counter stream for `seed`.
    pub fn with_scripted_randomness(
        mut self,
        seed: u64,
        perms: Vec<(u64, Vec<usize>)>,
        coins: Vec<((u64, usize, usize), f64)>,
    ) -> Self {
        self.randomness = RandomSource::Scripted {
            seed,
            perms: perms.into_iter().collect(),
            coins: coins.into_iter().collect(),
        };
        self
    }

    /// Seed an initial schedule (both views, which must agree).
    pub fn set_schedule(&mut self, x: &Matching) {
        let n = self.input_side.len();
        self.input_side = x.rows().to_vec();
        self.output_side = vec![None; n];
        for (i, j) in x.pairs() {
            self.output_side[j] = Some(i);
        }
    }

    pub fn input_view(&self) -> Matching {
        let mut m = Matching::empty(self.input_side.len());
        for (i, &c) in self.input_side.iter().enumerate() {
            m.set(i, c);
        }
        m
    }

    pub fn output_view(&self) -> Matching {
        let mut m = Matching::empty(self.output_side.len());
        for (j, &r) in self.output_side.iter().enumerate() {
            if let Some(i) = r {
                if m.col_of(i).is_none() {
                    m.set(i, Some(j));
                }
            }
        }
        m
    }

    /// Cells present in exactly one of the two views.
    pub fn view_mismatch_cells(&self) -> u64 {
        let mut count = 0;
        for (i, &c) in self.input_side.iter().enumerate() {
            if let Some(j) = c {
                if self.output_side[j] != Some(i) {
                    count += 1;
                }
            }
        }
        for (j, &r) in self.output_side.iter().enumerate() {
            if let Some(i) = r {
                if self.input_side[i] != Some(j) {
                    count += 1;
                }
            }
        }
        count
    }

    fn weight_at(&self, view: &SwitchView<'_>, i: usize, j: usize, qmax: u64) -> f64 {
        match &self.frozen_weights {
            Some(w) => w[i * view.n_ports + j],
            None => self
                .params
                .weight(view.queues.len(i, j) as f64, qmax as f64)
                .expect("queue lengths are nonnegative"),
        }
    }

    fn qmax_for_slot(&mut self, view: &SwitchView<'_>) -> u64 {
        match self.params.mode {
            WeightMode::Local => 0,
            WeightMode::ExactQmax => view.queues.max_len(),
            WeightMode::EstimatedQmax => self.qmax_estimator.observe(view.slot, view),
        }
    }

    /// Phase II: update the input side of the schedule along H(n) and decide
    /// the transmissions, including free-input augmentation guided by H(n+1).
    pub fn input_decisions(
        &mut self,
        view: &SwitchView<'_>,
        h_now: &Permutation,
        h_next: &Permutation,
        coin: &dyn Fn(usize, usize) -> f64,
    ) -> InputSchedule {
        let n = view.n_ports;
        let qmax = self.qmax_for_slot(view);
        self.pending_joins = vec![None; n];

        // Schedule updates: only the pair H(n) selects at each input may
        // join or leave; all other pairs carry over.
        for i in 0..n {
            let j = h_now.col(i);
            match self.input_side[i] {
                Some(jx) if jx == j => {
                    // Keep with probability p, else leave. A keep must be
                    // signaled by a packet, so an empty queue forces a leave.
                    if view.queues.len(i, j) == 0 {
                        self.input_side[i] = None;
                    } else {
                        let w = self.weight_at(view, i, j, qmax);
                        if coin(i, j) < activation_probability(w) {
                            // keep
                        } else {
                            self.input_side[i] = None;
                        }
                    }
                }
                Some(_) => {
                    // Busy elsewhere: hold.
                }
                None => {
                    // Free input. The join test depends on fidelity: the
                    // literal text reads buffer emptiness as output freedom;
                    // the oracle consults the true output state. Either way a
                    // join is signaled by a packet, so the buffer must be
                    // empty and the queue nonempty.
                    let output_free = match self.fidelity {
                        Fidelity::Oracle => self.output_side[j].is_none(),
                        Fidelity::Literal | Fidelity::Consistent => !view.buffers.occupied(i, j),
                    };
                    if output_free
                        && !view.buffers.occupied(i, j)
                        && view.queues.len(i, j) > 0
                        && coin(i, j) < activation_probability(self.weight_at(view, i, j, qmax))
                    {
                        self.input_side[i] = Some(j);
                        self.pending_joins[i] = Some(j);
                    }
                }
            }
        }

        // Transmissions: matched inputs serve their pair. Everyone else —
        // free inputs, and matched inputs whose pair is unserviceable this
        // slot — augments opportunistically, preferring the cell H(n+1)
        // proposes. No augmentation ever enters the H(n) column: silence
        // there is the leave/decline/hold signal, and a stray packet would
        // be read as a join.
        let mut schedule = vec![None; n];
        for i in 0..n {
            if let Some(j) = self.input_side[i] {
                if view.queues.len(i, j) > 0 && !view.buffers.occupied(i, j) {
                    schedule[i] = Some(j);
                    continue;
                }
            }
            let banned = h_now.col(i);
            let preferred = h_next.col(i);
            if preferred != banned
                && view.queues.len(i, preferred) > 0
                && !view.buffers.occupied(i, preferred)
            {
                schedule[i] = Some(preferred);
            } else {
                for off in 0..n {
                    let k = (self.in_rr[i] + off) % n;
                    if k == banned {
                        continue;
                    }
                    if view.queues.len(i, k) > 0 && !view.buffers.occupied(i, k) {
                        schedule[i] = Some(k);
                        self.in_rr[i] = (k + 1) % n;
                        break;
                    }
                }
            }
        }
        schedule
    }

    /// Phase III: update the output side from the Phase II arrivals (or, in
    /// oracle mode, from the true input decisions) and decide the drains,
    /// including free-output augmentation guided by H(n+1).
    pub fn output_decisions(
        &mut self,
        view: &SwitchView<'_>,
        arrived: &[bool],
        h_now: &Permutation,
        h_next: &Permutation,
    ) -> OutputSchedule {
        let n = view.n_ports;

        match self.fidelity {
            Fidelity::Oracle => {
                // Perfect information: outputs mirror the input decisions.
                self.output_side = vec![None; n];
                for (i, &c) in self.input_side.iter().enumerate() {
                    if let Some(j) = c {
                        self.output_side[j] = Some(i);
                    }
                }
            }
            Fidelity::Literal | Fidelity::Consistent => {
                for j in 0..n {
                    let i = h_now.row(j);
                    let got_packet = arrived[i * n + j];
                    match self.output_side[j] {
                        Some(ix) if ix == i => {
                            // Keep on arrival, leave on silence.
                            if !got_packet {
                                self.output_side[j] = None;
                            }
                        }
                        Some(_) => {
                            // Busy elsewhere: hold.
                        }
                        None => {
                            if got_packet {
                                self.output_side[j] = Some(i);
                            }
                        }
                    }
                }
            }
        }

        // Drains: matched outputs serve their pair when its buffer holds a
        // packet. Everyone else — free outputs, and matched outputs whose
        // pair sent nothing — drains some occupied buffer in the column,
        // preferring the cell H(n+1) proposes. The column's H(n) cell is
        // skipped when its packet arrived this slot: that packet is a join
        // signal, and draining it would forge an accept.
        let mut schedule = vec![None; n];
        for j in 0..n {
            if let Some(i) = self.output_side[j] {
                if view.buffers.occupied(i, j) {
                    schedule[j] = Some(i);
                    continue;
                }
            }
            let signal_row = h_now.row(j);
            let fresh_signal = arrived[signal_row * n + j];
            let preferred = h_next.row(j);
            if view.buffers.occupied(preferred, j) && !(fresh_signal && preferred == signal_row) {
                schedule[j] = Some(preferred);
            } else {
                for off in 0..n {
                    let k = (self.out_rr[j] + off) % n;
                    if fresh_signal && k == signal_row {
                        continue;
                    }
                    if view.buffers.occupied(k, j) {
                        schedule[j] = Some(k);
                        self.out_rr[j] = (k + 1) % n;
                        break;
                    }
                }
            }
        }
        schedule
    }

    /// After Phase III: in consistent mode, revert joins whose signaling
    /// packet was not drained (the implicit NACK), then measure divergence.
    pub fn reconcile(&mut self, view: &SwitchView<'_>) -> u64 {
        if self.fidelity == Fidelity::Consistent {
            for i in 0..view.n_ports {
                if let Some(j) = self.pending_joins[i] {
                    if view.buffers.occupied(i, j) {
                        self.input_side[i] = None;
                    }
                }
            }
        }
        let mismatch = self.view_mismatch_cells();
        if mismatch > 0 {
            self.divergent_slots += 1;
        }
        mismatch
    }

    pub fn params(&self) -> &WeightParams {
        &self.params
    }
}

impl SlotScheduler for DisquoScheduler {
    fn input_phase(&mut self, view: &SwitchView<'_>) -> InputSchedule {
        let n = view.n_ports;
        let h_now = self.randomness.permutation(view.slot, n);
        let h_next = self.randomness.permutation(view.slot + 1, n);
        let randomness = self.randomness.clone();
        let slot = view.slot;
        let coin = move |i: usize, j: usize| randomness.coin(slot, i, j);
        self.input_decisions(view, &h_now, &h_next, &coin)
    }

    fn output_phase(&mut self, view: &SwitchView<'_>, arrived: &[bool]) -> OutputSchedule {
        let n = view.n_ports;
        let h_now = self.randomness.permutation(view.slot, n);
        let h_next = self.randomness.permutation(view.slot + 1, n);
        self.output_decisions(view, arrived, &h_now, &h_next)
    }

    fn end_slot(&mut self, view: &SwitchView<'_>) -> SchedulerSlotInfo {
        let divergence = self.reconcile(view);
        SchedulerSlotInfo {
            x_input_view: self.input_view(),
            x_output_view: self.output_view(),
            divergence_count: divergence,
        }
    }
}
