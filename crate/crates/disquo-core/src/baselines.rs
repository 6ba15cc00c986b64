//! Reference schedulers: maximum-weight matching, round-robin at both sides,
//! longest-queue-first with round-robin outputs, and an output-queued switch
//! used as the delay baseline.

use crate::disquo::WeightParams;
use crate::matching::Matching;
use crate::switch::{InputSchedule, OutputSchedule, Packet, SlotScheduler, SwitchView, WeightMode};

// ── Exact assignment solver ─────────────────────────────────────────────────

/// Minimum-cost perfect assignment by shortest augmenting paths (the
/// Jonker-Volgenant form of the Hungarian algorithm), O(n^3).
/// Returns column -> row.
fn assignment_min(cost: &[f64], n: usize) -> Vec<usize> {
    let none = usize::MAX;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_row = vec![none; n + 1];
    let mut way = vec![n; n + 1];

    for i in 0..n {
        col_row[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 * n + j] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    if col_row[j] != none {
                        u[col_row[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == none {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    col_row.truncate(n);
    col_row
}

/// Maximum total weight of a perfect assignment.
fn assignment_max_value(weights: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let top = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cost: Vec<f64> = weights.iter().map(|&w| top - w).collect();
    let col_row = assignment_min(&cost, n);
    col_row
        .iter()
        .enumerate()
        .map(|(j, &i)| weights[i * n + j])
        .sum()
}

/// Best achievable weight over the free rows/columns, with row `fix_row`
/// forced onto column `fix_col`. Rows before `fix_row` are already decided.
fn completion_value(
    weights: &[f64],
    n: usize,
    fix_row: usize,
    used_cols: &[bool],
    fix_col: usize,
) -> f64 {
    let rows: Vec<usize> = (fix_row + 1..n).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| !used_cols[j] && j != fix_col).collect();
    let m = rows.len();
    debug_assert_eq!(m, cols.len());
    if m == 0 {
        return 0.0;
    }
    let sub: Vec<f64> = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| weights[r * n + c]))
        .collect();
    assignment_max_value(&sub, m)
}

/// The maximum-weight schedule: a perfect matching maximizing total weight,
/// ties broken toward the lexicographically smallest row-to-column map. With
/// all-zero weights this is the identity.
///
/// Weights must be finite and nonnegative; padding a partial matching to a
/// perfect one costs nothing since extra pairs carry weight >= 0 and the
/// total is unchanged at optimum.
pub fn mwm_schedule(weights: &[f64], n: usize) -> (Matching, f64) {
    assert_eq!(weights.len(), n * n);
    debug_assert!(weights.iter().all(|w| w.is_finite() && *w >= 0.0));
    let best = assignment_max_value(weights, n);
    let tol = 1e-9 * (1.0 + best.abs());

    let mut rows: Vec<Option<usize>> = vec![None; n];
    let mut used_cols = vec![false; n];
    let mut prefix = 0.0;
    for i in 0..n {
        for j in 0..n {
            if used_cols[j] {
                continue;
            }
            let rest = completion_value(weights, n, i, &used_cols, j);
            if prefix + weights[i * n + j] + rest >= best - tol {
                rows[i] = Some(j);
                used_cols[j] = true;
                prefix += weights[i * n + j];
                break;
            }
        }
        debug_assert!(rows[i].is_some(), "every row completes some optimum");
    }
    let matching = Matching::from_rows(rows).expect("columns assigned uniquely");
    (matching, best)
}

// ── Scheduler state ─────────────────────────────────────────────────────────

/// Per-port round-robin pointers.
#[derive(Debug, Clone)]
pub struct RrPointers {
    pub input_ptr: Vec<usize>,
    pub output_ptr: Vec<usize>,
}

impl RrPointers {
    pub fn new(n: usize) -> Self {
        RrPointers {
            input_ptr: vec![0; n],
            output_ptr: vec![0; n],
        }
    }
}

/// Round-robin at both sides: each input serves the first backlogged VOQ with
/// an empty buffer starting at its pointer; each output drains the first
/// occupied buffer starting at its pointer. Pointers advance one past the
/// served index.
#[derive(Debug, Clone)]
pub struct RrRrScheduler {
    ptrs: RrPointers,
}

impl RrRrScheduler {
    pub fn new(n: usize) -> Self {
        RrRrScheduler {
            ptrs: RrPointers::new(n),
        }
    }
}

fn rr_output_schedule(view: &SwitchView<'_>, output_ptr: &mut [usize]) -> OutputSchedule {
    let n = view.n_ports;
    (0..n)
        .map(|j| {
            for off in 0..n {
                let i = (output_ptr[j] + off) % n;
                if view.buffers.occupied(i, j) {
                    output_ptr[j] = (i + 1) % n;
                    return Some(i);
                }
            }
            None
        })
        .collect()
}

impl SlotScheduler for RrRrScheduler {
    fn input_phase(&mut self, view: &SwitchView<'_>) -> InputSchedule {
        let n = view.n_ports;
        (0..n)
            .map(|i| {
                for off in 0..n {
                    let j = (self.ptrs.input_ptr[i] + off) % n;
                    if view.queues.len(i, j) > 0 && !view.buffers.occupied(i, j) {
                        self.ptrs.input_ptr[i] = (j + 1) % n;
                        return Some(j);
                    }
                }
                None
            })
            .collect()
    }

    fn output_phase(&mut self, view: &SwitchView<'_>, _arrived: &[bool]) -> OutputSchedule {
        rr_output_schedule(view, &mut self.ptrs.output_ptr)
    }
}

/// Longest queue first at inputs (ties to the lowest column), round-robin at
/// outputs.
#[derive(Debug, Clone)]
pub struct LqfRrScheduler {
    ptrs: RrPointers,
}

impl LqfRrScheduler {
    pub fn new(n: usize) -> Self {
        LqfRrScheduler {
            ptrs: RrPointers::new(n),
        }
    }
}

impl SlotScheduler for LqfRrScheduler {
    fn input_phase(&mut self, view: &SwitchView<'_>) -> InputSchedule {
        let n = view.n_ports;
        (0..n)
            .map(|i| {
                let mut best: Option<(u64, usize)> = None;
                for j in 0..n {
                    let q = view.queues.len(i, j);
                    if q == 0 || view.buffers.occupied(i, j) {
                        continue;
                    }
                    // Strict > keeps the lowest index on ties.
                    if best.is_none_or(|(bq, _)| q > bq) {
                        best = Some((q, j));
                    }
                }
                best.map(|(_, j)| j)
            })
            .collect()
    }

    fn output_phase(&mut self, view: &SwitchView<'_>, _arrived: &[bool]) -> OutputSchedule {
        rr_output_schedule(view, &mut self.ptrs.output_ptr)
    }
}

/// Maximum-weight matching over f(Q), run bufferless: Phase II writes and
/// Phase III drains the same cells within the slot, so buffers never carry
/// state across slots.
#[derive(Debug, Clone)]
pub struct MwmScheduler {
    params: WeightParams,
}

impl MwmScheduler {
    pub fn new(n: usize, epsilon: f64) -> Self {
        MwmScheduler {
            params: WeightParams::new(WeightMode::Local, epsilon, n),
        }
    }
}

impl SlotScheduler for MwmScheduler {
    fn input_phase(&mut self, view: &SwitchView<'_>) -> InputSchedule {
        let n = view.n_ports;
        let weights: Vec<f64> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                self.params
                    .weight(view.queues.len(i, j) as f64, 0.0)
                    .expect("queue lengths are nonnegative")
            })
            .collect();
        let (matching, _) = mwm_schedule(&weights, n);
        (0..n)
            .map(|i| {
                matching
                    .col_of(i)
                    .filter(|&j| view.queues.len(i, j) > 0 && !view.buffers.occupied(i, j))
            })
            .collect()
    }

    fn output_phase(&mut self, view: &SwitchView<'_>, arrived: &[bool]) -> OutputSchedule {
        let n = view.n_ports;
        (0..n)
            .map(|j| (0..n).find(|&i| arrived[i * n + j]))
            .collect()
    }
}

// ── Output-queued reference ─────────────────────────────────────────────────

/// Ideal output-queued switch: arrivals go straight to per-output FIFOs and
/// each nonempty FIFO emits one cell per slot. A cell arriving at an empty
/// queue departs in the same slot with delay zero.
#[derive(Debug, Clone)]
pub struct OqState {
    pub slot: u64,
    queues: Vec<std::collections::VecDeque<Packet>>,
    pub injected: u64,
    pub departed: u64,
}

impl OqState {
    pub fn new(n: usize) -> Self {
        OqState {
            slot: 0,
            queues: (0..n).map(|_| std::collections::VecDeque::new()).collect(),
            injected: 0,
            departed: 0,
        }
    }

    pub fn queue_lengths(&self) -> Vec<u64> {
        self.queues.iter().map(|q| q.len() as u64).collect()
    }
}

/// One output-queued slot: append all arrivals, then serve one head cell per
/// output. Returns the departures with their departure slot.
pub fn oq_slot(oq: &mut OqState, arrivals: &[Packet]) -> Vec<(Packet, u64)> {
    for p in arrivals {
        oq.queues[p.output].push_back(*p);
        oq.injected += 1;
    }
    let slot = oq.slot;
    let mut out = Vec::new();
    for q in oq.queues.iter_mut() {
        if let Some(p) = q.pop_front() {
            oq.departed += 1;
            out.push((p, slot));
        }
    }
    oq.slot += 1;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::switch::{CrosspointGrid, VoqMatrix};

    fn brute_force_max(weights: &[f64], n: usize) -> f64 {
        fn recurse(
            weights: &[f64],
            n: usize,
            row: usize,
            used: &mut [bool],
            acc: f64,
            best: &mut f64,
        ) {
            if row == n {
                *best = best.max(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    recurse(weights, n, row + 1, used, acc + weights[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        recurse(weights, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn mwm_two_by_two() {
        let (m, value) = mwm_schedule(&[3.0, 1.0, 2.0, 4.0], 2);
        assert_eq!(value, 7.0);
        assert!(m.contains(0, 0) && m.contains(1, 1));
    }

    #[test]
    fn mwm_zero_weights_identity_tiebreak() {
        let (m, value) = mwm_schedule(&[0.0; 16], 4);
        assert_eq!(value, 0.0);
        for i in 0..4 {
            assert_eq!(m.col_of(i), Some(i));
        }
    }

    #[test]
    fn mwm_matches_brute_force() {
        let mut rng = CounterRng::new(17);
        for trial in 0..1000 {
            let n = 2 + (trial % 5); // 2..=6
            let weights: Vec<f64> = (0..n * n).map(|_| (rng.below(50)) as f64).collect();
            let (m, value) = mwm_schedule(&weights, n);
            let brute = brute_force_max(&weights, n);
            assert!(
                (value - brute).abs() < 1e-9,
                "n={n} value {value} brute {brute}"
            );
            assert!((m.weight(&weights) - value).abs() < 1e-9);
        }
    }

    #[test]
    fn mwm_lexicographic_among_ties() {
        // Both diagonals weigh 2; the identity map is lexicographically first.
        let (m, _) = mwm_schedule(&[1.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(m.col_of(0), Some(0));
        assert_eq!(m.col_of(1), Some(1));
    }

    #[test]
    fn rr_serves_single_backlogged_voq_regardless_of_pointer() {
        let n = 4;
        let mut voqs = VoqMatrix::new(n);
        voqs.push(Packet {
            input: 1,
            output: 3,
            arrival_slot: 0,
        });
        let buffers = CrosspointGrid::new(n);
        let mut sched = RrRrScheduler::new(n);
        sched.ptrs.input_ptr[1] = 2;
        let view = SwitchView {
            slot: 0,
            n_ports: n,
            queues: &voqs,
            buffers: &buffers,
        };
        let s = sched.input_phase(&view);
        assert_eq!(s[1], Some(3));
        assert_eq!(sched.ptrs.input_ptr[1], 0); // advanced one past 3
    }

    #[test]
    fn rr_pointer_mechanics_from_zero() {
        let n = 3;
        let mut voqs = VoqMatrix::new(n);
        for i in 0..n {
            for j in 0..n {
                voqs.push(Packet {
                    input: i,
                    output: j,
                    arrival_slot: 0,
                });
            }
        }
        let buffers = CrosspointGrid::new(n);
        let mut sched = RrRrScheduler::new(n);
        let view = SwitchView {
            slot: 0,
            n_ports: n,
            queues: &voqs,
            buffers: &buffers,
        };
        let s = sched.input_phase(&view);
        for i in 0..n {
            assert_eq!(s[i], Some(0));
            assert_eq!(sched.ptrs.input_ptr[i], 1);
        }
    }

    #[test]
    fn lqf_picks_longest_with_low_index_tiebreak() {
        let n = 3;
        let mut voqs = VoqMatrix::new(n);
        for (j, count) in [(0usize, 2u64), (1, 9), (2, 9)] {
            for _ in 0..count {
                voqs.push(Packet {
                    input: 0,
                    output: j,
                    arrival_slot: 0,
                });
            }
        }
        let buffers = CrosspointGrid::new(n);
        let mut sched = LqfRrScheduler::new(n);
        let view = SwitchView {
            slot: 0,
            n_ports: n,
            queues: &voqs,
            buffers: &buffers,
        };
        let s = sched.input_phase(&view);
        assert_eq!(s[0], Some(1));
        assert_eq!(s[1], None); // empty row idles
    }

    #[test]
    fn oq_fifo_delays() {
        let mut oq = OqState::new(2);
        let a = Packet {
            input: 0,
            output: 1,
            arrival_slot: 0,
        };
        let b = Packet {
            input: 1,
            output: 1,
            arrival_slot: 0,
        };
        let d0 = oq_slot(&mut oq, &[a, b]);
        assert_eq!(d0.len(), 1);
        assert_eq!(d0[0].0, a);
        assert_eq!(d0[0].1, 0); // delay 0
        let d1 = oq_slot(&mut oq, &[]);
        assert_eq!(d1.len(), 1);
        assert_eq!(d1[0].0, b);
        assert_eq!(d1[0].1, 1); // delay 1
    }
}
