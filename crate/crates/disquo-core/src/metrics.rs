//! Run instrumentation: delay statistics with batch-means confidence
//! intervals, queue-norm probes with a stability trend test, throughput
//! accounting, and the schedule weight ratio.

use crate::baselines::mwm_schedule;
use crate::matching::Matching;
use crate::switch::VoqMatrix;

/// Student-t 97.5% quantiles for 1..=30 degrees of freedom; beyond that the
/// normal 1.96 is close enough.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn t_quantile_975(df: usize) -> f64 {
    if df == 0 {
        f64::INFINITY
    } else if df <= 30 {
        T_975[df - 1]
    } else {
        1.96
    }
}

/// Packet delay accumulator over a measurement window, batched by departure
/// slot into equal spans for the 95% confidence interval.
#[derive(Debug, Clone)]
pub struct DelayStats {
    window_start: u64,
    window_end: u64,
    n_batches: usize,
    batch_sums: Vec<f64>,
    batch_counts: Vec<u64>,
    pub count: u64,
    sum: f64,
    sum_sq: f64,
}

impl DelayStats {
    pub fn new(window_start: u64, window_end: u64, n_batches: usize) -> Self {
        let n_batches = n_batches.max(1);
        DelayStats {
            window_start,
            window_end,
            n_batches,
            batch_sums: vec![0.0; n_batches],
            batch_counts: vec![0; n_batches],
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    pub fn record(&mut self, delay: u64, departure_slot: u64) {
        if departure_slot < self.window_start || departure_slot >= self.window_end {
            return;
        }
        let span = self.window_end - self.window_start;
        let idx = ((departure_slot - self.window_start) as u128 * self.n_batches as u128
            / span as u128) as usize;
        let idx = idx.min(self.n_batches - 1);
        let d = delay as f64;
        self.batch_sums[idx] += d;
        self.batch_counts[idx] += 1;
        self.count += 1;
        self.sum += d;
        self.sum_sq += d * d;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    /// Half-width of the 95% CI from the nonempty batch means; unavailable
    /// with fewer than two nonempty batches.
    pub fn ci95_half_width(&self) -> Option<f64> {
        let means: Vec<f64> = self
            .batch_sums
            .iter()
            .zip(&self.batch_counts)
            .filter(|(_, &c)| c > 0)
            .map(|(&s, &c)| s / c as f64)
            .collect();
        let b = means.len();
        if b < 2 {
            return None;
        }
        let grand = means.iter().sum::<f64>() / b as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
        Some(t_quantile_975(b - 1) * (var / b as f64).sqrt())
    }
}

/// Sampled time series of the queue norm and maximum queue, with the
/// quarter-trend stability test.
#[derive(Debug, Clone)]
pub struct StabilityProbe {
    pub interval: u64,
    pub qnorm_series: Vec<f64>,
    pub qmax_series: Vec<u64>,
}

impl StabilityProbe {
    pub fn new(interval: u64) -> Self {
        StabilityProbe {
            interval: interval.max(1),
            qnorm_series: Vec::new(),
            qmax_series: Vec::new(),
        }
    }

    pub fn observe(&mut self, slot: u64, queue_lengths: &[u64]) {
        if slot.is_multiple_of(self.interval) {
            self.qnorm_series.push(queue_norm_of(queue_lengths));
            self.qmax_series
                .push(queue_lengths.iter().copied().max().unwrap_or(0));
        }
    }

    pub fn max_qnorm(&self) -> f64 {
        self.qnorm_series.iter().cloned().fold(0.0, f64::max)
    }

    pub fn mean_qnorm(&self) -> f64 {
        if self.qnorm_series.is_empty() {
            0.0
        } else {
            self.qnorm_series.iter().sum::<f64>() / self.qnorm_series.len() as f64
        }
    }

    /// Trend test: stable iff the mean norm over the last quarter of the
    /// series is at most twice the mean over the second quarter.
    pub fn is_stable(&self) -> bool {
        let n = self.qnorm_series.len();
        if n < 8 {
            return true; // too short to call unstable
        }
        let quarter = n / 4;
        let second: f64 =
            self.qnorm_series[quarter..2 * quarter].iter().sum::<f64>() / quarter as f64;
        let last: f64 = self.qnorm_series[n - quarter..].iter().sum::<f64>() / quarter as f64;
        last <= 2.0 * second + 1e-12
    }
}

/// Euclidean norm of the queue matrix.
pub fn queue_norm(voqs: &VoqMatrix) -> f64 {
    queue_norm_of(&voqs.lengths())
}

/// Euclidean norm of raw queue lengths.
pub fn queue_norm_of(lengths: &[u64]) -> f64 {
    lengths
        .iter()
        .map(|&q| (q as f64) * (q as f64))
        .sum::<f64>()
        .sqrt()
}

/// W(X) / W*: the schedule's weight relative to the maximum-weight schedule.
/// Defined as 1 when the maximum weight is zero (every schedule is maximal).
pub fn weight_ratio(x: &Matching, weights: &[f64]) -> f64 {
    let n = x.n_ports();
    let (_, w_star) = mwm_schedule(weights, n);
    if w_star <= 0.0 {
        1.0
    } else {
        x.weight(weights) / w_star
    }
}

/// Final per-run metrics.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub scheduler: String,
    pub pattern: String,
    pub n_ports: usize,
    pub load: f64,
    pub omega: f64,
    pub bursty: bool,
    pub seed: u64,
    pub slots: u64,
    pub warmup_slots: u64,
    pub injected: u64,
    pub departed: u64,
    /// Mean delay over packets arriving after warmup; None when nothing
    /// departed in the window.
    pub mean_delay: Option<f64>,
    pub delay_ci95: Option<f64>,
    /// Aggregate departure rate per port over the measurement window.
    pub throughput: f64,
    pub per_port_throughput: Vec<f64>,
    pub max_qnorm: f64,
    pub mean_qnorm: f64,
    pub stable: bool,
    pub divergences: u64,
    /// Fraction of measured slots whose schedule weight reached (1 - threshold)
    /// of the maximum, when tracking was enabled.
    pub weight_ratio_frac: Option<f64>,
}
