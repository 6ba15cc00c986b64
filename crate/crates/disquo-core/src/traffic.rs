//! Admissible arrival-rate construction and arrival sampling.
//!
//! Rate matrices follow the three standard patterns (uniform, lin-diagonal,
//! hot-spot), all doubly sub-stochastic at load sigma < 1. Arrivals are drawn
//! either Bernoulli i.i.d. or as on/off bursts with truncated-Pareto lengths;
//! both enforce at most one arrival per input per slot while preserving the
//! per-VOQ marginal rates.

use crate::rng::{self, CounterRng};
use crate::switch::Packet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficPattern {
    Uniform,
    LinDiagonal,
    HotSpot,
}

impl TrafficPattern {
    pub fn name(self) -> &'static str {
        match self {
            TrafficPattern::Uniform => "uniform",
            TrafficPattern::LinDiagonal => "lin_diagonal",
            TrafficPattern::HotSpot => "hot_spot",
        }
    }
}

impl std::str::FromStr for TrafficPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(TrafficPattern::Uniform),
            "lin_diagonal" | "lin-diagonal" => Ok(TrafficPattern::LinDiagonal),
            "hot_spot" | "hot-spot" | "hotspot" => Ok(TrafficPattern::HotSpot),
            other => Err(Error::InvalidConfig(format!("unknown pattern `{other}`"))),
        }
    }
}

/// Per-VOQ arrival rates with the nominal load and pattern they came from.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub n_ports: usize,
    pub sigma: Vec<f64>,
    pub load: f64,
    pub pattern: TrafficPattern,
}

impl RateMatrix {
    pub fn rate(&self, input: usize, output: usize) -> f64 {
        self.sigma[input * self.n_ports + output]
    }

    pub fn row_sum(&self, input: usize) -> f64 {
        (0..self.n_ports).map(|j| self.rate(input, j)).sum()
    }

    pub fn col_sum(&self, output: usize) -> f64 {
        (0..self.n_ports).map(|i| self.rate(i, output)).sum()
    }
}

/// Build a rate matrix for one of the standard patterns.
///
/// * uniform: sigma/N everywhere.
/// * lin-diagonal: row entries along (i, i+k mod N) form the decreasing
///   arithmetic progression 2 sigma (N-k) / (N (N+1)), summing to sigma with
///   common difference 2 sigma / (N (N+1)).
/// * hot-spot: omega*sigma on the diagonal, (1-omega) sigma / (N-1) off it.
///   For a single port the whole load lands on the only queue.
pub fn build_rate_matrix(
    pattern: TrafficPattern,
    n_ports: usize,
    load: f64,
    omega: Option<f64>,
) -> Result<RateMatrix> {
    if n_ports == 0 {
        return Err(Error::InvalidConfig("n_ports must be at least 1".into()));
    }
    if !(load > 0.0 && load < 1.0) {
        return Err(Error::Inadmissible(format!(
            "load must lie in (0,1), got {load}"
        )));
    }
    let n = n_ports;
    let mut sigma = vec![0.0; n * n];
    match pattern {
        TrafficPattern::Uniform => {
            let r = load / n as f64;
            sigma.fill(r);
        }
        TrafficPattern::LinDiagonal => {
            for i in 0..n {
                for k in 0..n {
                    let j = (i + k) % n;
                    sigma[i * n + j] = 2.0 * load * (n - k) as f64 / (n as f64 * (n + 1) as f64);
                }
            }
        }
        TrafficPattern::HotSpot => {
            let omega = omega.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&omega) {
                return Err(Error::InvalidConfig(format!(
                    "hot-spot omega must lie in [0,1], got {omega}"
                )));
            }
            if n == 1 {
                sigma[0] = load;
            } else {
                let off = (1.0 - omega) * load / (n - 1) as f64;
                for i in 0..n {
                    for j in 0..n {
                        sigma[i * n + j] = if i == j { omega * load } else { off };
                    }
                }
            }
        }
    }
    let rates = RateMatrix {
        n_ports: n,
        sigma,
        load,
        pattern,
    };
    let (ok, slack) = check_admissible(&rates);
    if !ok {
        return Err(Error::Inadmissible(format!(
            "pattern {} at load {load} has slack {slack}",
            pattern.name()
        )));
    }
    Ok(rates)
}

/// Admissibility: every row and column sum strictly below one. Returns the
/// verdict and the slack 1 - max(row/col sums).
pub fn check_admissible(rates: &RateMatrix) -> (bool, f64) {
    let n = rates.n_ports;
    let mut max_sum = 0.0f64;
    for i in 0..n {
        max_sum = max_sum.max(rates.row_sum(i));
    }
    for j in 0..n {
        max_sum = max_sum.max(rates.col_sum(j));
    }
    let slack = 1.0 - max_sum;
    (slack > 0.0, slack)
}

// ── Truncated-Pareto burst lengths ──────────────────────────────────────────

/// Truncated-Pareto burst length law P(l) = c / l^alpha on 1..=l_max, with
/// exact inverse-CDF sampling.
#[derive(Debug, Clone)]
pub struct BurstModel {
    pub alpha: f64,
    pub l_max: u64,
    pub normalization: f64,
    pub mean: f64,
    cdf: Vec<f64>,
}

impl BurstModel {
    pub fn new(alpha: f64, l_max: u64) -> Result<Self> {
        if alpha <= 1.0 || l_max == 0 {
            return Err(Error::InvalidConfig(format!(
                "burst model needs alpha > 1 and l_max >= 1, got alpha={alpha} l_max={l_max}"
            )));
        }
        let raw: Vec<f64> = (1..=l_max).map(|l| (l as f64).powf(-alpha)).collect();
        let total: f64 = raw.iter().sum();
        let c = 1.0 / total;
        let mean = raw
            .iter()
            .enumerate()
            .map(|(idx, &p)| (idx + 1) as f64 * p * c)
            .sum();
        let mut cdf = Vec::with_capacity(l_max as usize);
        let mut acc = 0.0;
        for &p in &raw {
            acc += p * c;
            cdf.push(acc);
        }
        // Guard the tail against rounding so the last bucket is reachable.
        *cdf.last_mut().unwrap() = 1.0;
        Ok(BurstModel {
            alpha,
            l_max,
            normalization: c,
            mean,
            cdf,
        })
    }

    /// Defaults from the bursty experiments: alpha = 1.7, lengths over
    /// [1, 1000], mean about 11.6.
    pub fn standard() -> Self {
        BurstModel::new(1.7, 1000).expect("standard parameters are valid")
    }

    /// Exact inverse-CDF sample.
    pub fn sample(&self, rng: &mut CounterRng) -> u64 {
        let u = rng.unit_f64();
        // First index with cdf >= u.
        let idx = self.cdf.partition_point(|&c| c < u);
        (idx as u64 + 1).min(self.l_max)
    }
}

/// One-off sampling entry point.
pub fn pareto_burst_length(rng: &mut CounterRng, alpha: f64, l_max: u64) -> Result<u64> {
    Ok(BurstModel::new(alpha, l_max)?.sample(rng))
}

// ── Arrival processes ───────────────────────────────────────────────────────

#[derive(Debug, Clone)]
struct BurstState {
    remaining: u64,
    destination: usize,
}

/// Stateful arrival sampler: Bernoulli i.i.d. or on/off bursty per input.
///
/// Bernoulli mode draws, per input, one event with the row-sum probability
/// and a destination from the conditional row distribution — at most one
/// arrival per input per slot, per-VOQ marginals exactly sigma.
///
/// Bursty mode runs an on/off source per input: burst lengths follow the
/// truncated Pareto, destinations redraw per burst from the conditional row
/// distribution, and off periods are geometric with restart probability
/// r / (r + mean (1 - r)) so the long-run per-VOQ rates still equal sigma.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    rates: RateMatrix,
    seed: u64,
    row_sums: Vec<f64>,
    /// Per input: cumulative conditional destination distribution.
    dest_cdf: Vec<Vec<f64>>,
    burst: Option<(BurstModel, Vec<Option<BurstState>>, Vec<f64>)>,
}

impl ArrivalProcess {
    pub fn bernoulli(rates: RateMatrix, seed: u64) -> Result<Self> {
        Self::build(rates, seed, None)
    }

    pub fn bursty(rates: RateMatrix, model: BurstModel, seed: u64) -> Result<Self> {
        Self::build(rates, seed, Some(model))
    }

    fn build(rates: RateMatrix, seed: u64, model: Option<BurstModel>) -> Result<Self> {
        let (ok, slack) = check_admissible(&rates);
        if !ok {
            return Err(Error::Inadmissible(format!("slack {slack}")));
        }
        let n = rates.n_ports;
        let row_sums: Vec<f64> = (0..n).map(|i| rates.row_sum(i)).collect();
        let dest_cdf = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                let mut cdf = Vec::with_capacity(n);
                for j in 0..n {
                    acc += if row_sums[i] > 0.0 {
                        rates.rate(i, j) / row_sums[i]
                    } else {
                        0.0
                    };
                    cdf.push(acc);
                }
                if row_sums[i] > 0.0 {
                    *cdf.last_mut().unwrap() = 1.0;
                }
                cdf
            })
            .collect();
        let burst = model.map(|m| {
            let restart: Vec<f64> = row_sums
                .iter()
                .map(|&r| {
                    if r > 0.0 {
                        r / (r + m.mean * (1.0 - r))
                    } else {
                        0.0
                    }
                })
                .collect();
            (m, vec![None; n], restart)
        });
        Ok(ArrivalProcess {
            rates,
            seed,
            row_sums,
            dest_cdf,
            burst,
        })
    }

    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }

    /// Arrivals for one slot, at most one per input.
    pub fn sample(&mut self, slot: u64) -> Vec<Packet> {
        let ArrivalProcess {
            rates,
            seed,
            row_sums,
            dest_cdf,
            burst,
        } = self;
        let n = rates.n_ports;
        let pick = |input: usize, u: f64| -> usize {
            let cdf = &dest_cdf[input];
            cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
        };

        let mut out = Vec::new();
        match burst {
            None => {
                for i in 0..n {
                    if row_sums[i] == 0.0 {
                        continue;
                    }
                    let mut rng =
                        CounterRng::from_words(&[*seed, rng::TAG_ARRIVAL, slot, i as u64]);
                    if rng.unit_f64() < row_sums[i] {
                        let dest = pick(i, rng.unit_f64());
                        out.push(Packet {
                            input: i,
                            output: dest,
                            arrival_slot: slot,
                        });
                    }
                }
            }
            Some((model, states, restart)) => {
                for i in 0..n {
                    if row_sums[i] == 0.0 {
                        continue;
                    }
                    let mut rng = CounterRng::from_words(&[*seed, rng::TAG_BURST, slot, i as u64]);
                    let state = &mut states[i];
                    if state.is_none() && rng.unit_f64() < restart[i] {
                        let dest = pick(i, rng.unit_f64());
                        *state = Some(BurstState {
                            remaining: model.sample(&mut rng),
                            destination: dest,
                        });
                    }
                    if let Some(s) = state {
                        out.push(Packet {
                            input: i,
                            output: s.destination,
                            arrival_slot: slot,
                        });
                        s.remaining -= 1;
                        if s.remaining == 0 {
                            *state = None;
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_rates() {
        let r = build_rate_matrix(TrafficPattern::Uniform, 4, 0.8, None).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((r.rate(i, j) - 0.2).abs() < 1e-15);
            }
        }
        let (ok, slack) = check_admissible(&r);
        assert!(ok);
        assert!((slack - 0.2).abs() < 1e-12);
    }

    #[test]
    fn lin_diagonal_rates() {
        // N=2, sigma=0.6: row rates (0.4, 0.2).
        let r = build_rate_matrix(TrafficPattern::LinDiagonal, 2, 0.6, None).unwrap();
        assert!((r.rate(0, 0) - 0.4).abs() < 1e-12);
        assert!((r.rate(0, 1) - 0.2).abs() < 1e-12);
        assert!((r.rate(1, 1) - 0.4).abs() < 1e-12);
        assert!((r.rate(1, 0) - 0.2).abs() < 1e-12);
        // Common difference 2 sigma / (N (N+1)) and row sums sigma.
        for n in [3usize, 5, 8] {
            let sigma = 0.75;
            let r = build_rate_matrix(TrafficPattern::LinDiagonal, n, sigma, None).unwrap();
            let d = 2.0 * sigma / (n as f64 * (n + 1) as f64);
            for i in 0..n {
                assert!((r.row_sum(i) - sigma).abs() < 1e-12);
                assert!((r.col_sum(i) - sigma).abs() < 1e-12);
                for k in 0..n - 1 {
                    let a = r.rate(i, (i + k) % n);
                    let b = r.rate(i, (i + k + 1) % n);
                    assert!((a - b - d).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hot_spot_rates() {
        let r = build_rate_matrix(TrafficPattern::HotSpot, 4, 0.8, Some(0.5)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.4 } else { 0.4 / 3.0 };
                assert!((r.rate(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inadmissible_load_rejected() {
        assert!(build_rate_matrix(TrafficPattern::Uniform, 4, 1.0, None).is_err());
        assert!(build_rate_matrix(TrafficPattern::Uniform, 4, 1.2, None).is_err());
    }

    #[test]
    fn admissibility_edge_cases() {
        let mut r = build_rate_matrix(TrafficPattern::Uniform, 2, 0.9, None).unwrap();
        let (ok, slack) = check_admissible(&r);
        assert!(ok && (slack - 0.1).abs() < 1e-12);
        // Force a row to sum to exactly one.
        r.sigma[0] = 0.55;
        r.sigma[1] = 0.45;
        let (ok, slack) = check_admissible(&r);
        assert!(!ok);
        assert!(slack.abs() < 1e-12);
    }

    #[test]
    fn burst_model_normalizes() {
        let m = BurstModel::standard();
        // Direct-summation oracle for the normalization constant.
        let total: f64 = (1..=1000).map(|l| (l as f64).powf(-1.7)).sum();
        assert!((m.normalization - 1.0 / total).abs() < 1e-12);
        let sum: f64 = (1..=1000)
            .map(|l| m.normalization * (l as f64).powf(-1.7))
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(m.mean > 11.4 && m.mean < 11.8);
    }

    #[test]
    fn burst_length_bounds_and_degenerate_case() {
        let m = BurstModel::new(1.7, 1).unwrap();
        let mut rng = CounterRng::new(0);
        for _ in 0..100 {
            assert_eq!(m.sample(&mut rng), 1);
        }
        let m = BurstModel::standard();
        for seed in 0..1000 {
            let mut rng = CounterRng::new(seed);
            let l = m.sample(&mut rng);
            assert!((1..=1000).contains(&l));
        }
    }

    #[test]
    fn empirical_burst_mean_close_to_analytic() {
        let m = BurstModel::standard();
        let mut rng = CounterRng::new(9);
        let samples = 1_000_000u64;
        let total: u64 = (0..samples).map(|_| m.sample(&mut rng)).sum();
        let mean = total as f64 / samples as f64;
        assert!(mean > 11.4 && mean < 11.8, "mean {mean}");
    }

    #[test]
    fn burst_length_chi_square_goodness_of_fit() {
        // 1e6 samples against the exact law: lengths 1..=19 as individual
        // bins plus one tail bin, chi-square at the 0.01 level (19 degrees
        // of freedom -> critical value 36.19).
        let m = BurstModel::standard();
        let mut rng = CounterRng::new(31);
        let samples = 1_000_000u64;
        let mut counts = [0u64; 20];
        for _ in 0..samples {
            let l = m.sample(&mut rng) as usize;
            counts[(l - 1).min(19)] += 1;
        }
        let mut expected = [0.0f64; 20];
        for l in 1..=1000usize {
            expected[(l - 1).min(19)] += m.normalization * (l as f64).powf(-m.alpha);
        }
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&c, &p)| {
                let e = p * samples as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 36.19, "chi-square statistic {chi2}");
    }

    #[test]
    fn zero_rates_produce_no_arrivals() {
        let rates = RateMatrix {
            n_ports: 2,
            sigma: vec![0.0; 4],
            load: 0.0,
            pattern: TrafficPattern::Uniform,
        };
        let mut proc = ArrivalProcess::bernoulli(rates, 1).unwrap();
        for slot in 0..1000 {
            assert!(proc.sample(slot).is_empty());
        }
    }

    #[test]
    fn bernoulli_empirical_rates_match_sigma() {
        let n = 8;
        let r = build_rate_matrix(TrafficPattern::Uniform, n, 0.8, None).unwrap();
        let mut proc = ArrivalProcess::bernoulli(r, 12).unwrap();
        let slots = 1_000_000u64;
        let mut counts = vec![0u64; n * n];
        for slot in 0..slots {
            for p in proc.sample(slot) {
                counts[p.input * n + p.output] += 1;
            }
        }
        // 64 simultaneous cells: 4 sigma keeps the family-wise miss rate
        // negligible while still pinning the marginals.
        let expect = 0.1;
        let sigma4 = 4.0 * (expect * (1.0 - expect) / slots as f64).sqrt();
        for &c in &counts {
            let rate = c as f64 / slots as f64;
            assert!((rate - expect).abs() < sigma4, "rate {rate}");
        }
    }

    #[test]
    fn bursty_long_run_rates_match_sigma() {
        let n = 4;
        let r = build_rate_matrix(TrafficPattern::Uniform, n, 0.6, None).unwrap();
        let mut proc = ArrivalProcess::bursty(r, BurstModel::standard(), 3).unwrap();
        let slots = 2_000_000u64;
        let mut per_input = vec![0u64; n];
        for slot in 0..slots {
            for p in proc.sample(slot) {
                per_input[p.input] += 1;
            }
        }
        for &c in &per_input {
            let rate = c as f64 / slots as f64;
            // Renewal process: convergence is slower than i.i.d., allow 2%.
            assert!((rate - 0.6).abs() < 0.02, "rate {rate}");
        }
    }

    #[test]
    fn at_most_one_arrival_per_input() {
        let n = 4;
        let r = build_rate_matrix(TrafficPattern::HotSpot, n, 0.95, Some(0.7)).unwrap();
        let mut proc = ArrivalProcess::bursty(r, BurstModel::standard(), 5).unwrap();
        for slot in 0..10_000 {
            let arrivals = proc.sample(slot);
            let mut seen = vec![false; n];
            for p in arrivals {
                assert!(!seen[p.input]);
                seen[p.input] = true;
            }
        }
    }
}
