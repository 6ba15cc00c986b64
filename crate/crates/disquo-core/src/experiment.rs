//! Configuration-driven experiment runs: wire a traffic process, a scheduler,
//! and the metrics together and produce one report per run.

use crate::baselines::{oq_slot, LqfRrScheduler, MwmScheduler, OqState, RrRrScheduler};
use crate::chain::enumerate_matchings;
use crate::disquo::{DisquoScheduler, WeightParams};
use crate::matching::Matching;
use crate::metrics::{weight_ratio, DelayStats, ExperimentReport, StabilityProbe};
use crate::switch::{
    advance_slot, init_switch, validate_state, Fidelity, SchedulerKind, SlotScheduler, SwitchConfig,
};
use crate::traffic::{build_rate_matrix, ArrivalProcess, BurstModel, TrafficPattern};
use crate::{Error, Result};

/// Traffic side of an experiment.
#[derive(Debug, Clone)]
pub struct TrafficSpec {
    pub pattern: TrafficPattern,
    pub load: f64,
    pub omega: f64,
    pub bursty: bool,
    pub alpha: f64,
    pub l_max: u64,
}

impl TrafficSpec {
    pub fn new(pattern: TrafficPattern, load: f64) -> Self {
        TrafficSpec {
            pattern,
            load,
            omega: 0.5,
            bursty: false,
            alpha: 1.7,
            l_max: 1000,
        }
    }
}

/// Metrics side of an experiment.
#[derive(Debug, Clone)]
pub struct MetricsSpec {
    pub batches: usize,
    /// Queue probe spacing in slots; defaults to slots/1000.
    pub probe_interval: Option<u64>,
    pub track_weight_ratio: bool,
    /// The ratio test checks W(X) >= (1 - threshold) W*.
    pub weight_ratio_threshold: f64,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        MetricsSpec {
            batches: 30,
            probe_interval: None,
            track_weight_ratio: false,
            weight_ratio_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub switch: SwitchConfig,
    pub traffic: TrafficSpec,
    pub metrics: MetricsSpec,
}

fn probe_interval(spec: &ExperimentSpec) -> u64 {
    spec.metrics
        .probe_interval
        .unwrap_or_else(|| (spec.switch.slots / 1000).max(1))
}

/// Run one experiment to completion.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.switch.validate()?;
    let rates = build_rate_matrix(
        spec.traffic.pattern,
        spec.switch.n_ports,
        spec.traffic.load,
        Some(spec.traffic.omega),
    )?;
    let process = if spec.traffic.bursty {
        ArrivalProcess::bursty(
            rates,
            BurstModel::new(spec.traffic.alpha, spec.traffic.l_max)?,
            spec.switch.seed,
        )?
    } else {
        ArrivalProcess::bernoulli(rates, spec.switch.seed)?
    };

    match spec.switch.scheduler {
        SchedulerKind::OqReference => run_oq(spec, process),
        kind => {
            let mut sched: Box<dyn SlotScheduler> = match kind {
                SchedulerKind::Disquo => Box::new(DisquoScheduler::new(&spec.switch)),
                SchedulerKind::Mwm => {
                    Box::new(MwmScheduler::new(spec.switch.n_ports, spec.switch.epsilon))
                }
                SchedulerKind::RrRr => Box::new(RrRrScheduler::new(spec.switch.n_ports)),
                SchedulerKind::LqfRr => Box::new(LqfRrScheduler::new(spec.switch.n_ports)),
                SchedulerKind::OqReference => unreachable!(),
            };
            run_crossbar(spec, process, sched.as_mut())
        }
    }
}

fn run_crossbar(
    spec: &ExperimentSpec,
    mut process: ArrivalProcess,
    sched: &mut dyn SlotScheduler,
) -> Result<ExperimentReport> {
    let cfg = &spec.switch;
    let n = cfg.n_ports;
    let mut state = init_switch(cfg.clone())?;
    let mut delays = DelayStats::new(cfg.warmup_slots, cfg.slots, spec.metrics.batches);
    let mut probe = StabilityProbe::new(probe_interval(spec));
    let mut per_port_departures = vec![0u64; n];
    let mut divergences = 0u64;
    let mut ratio_hits = 0u64;
    let mut ratio_samples = 0u64;
    let params = WeightParams::new(cfg.weight_mode, cfg.epsilon, n);
    let validate_every = probe_interval(spec);

    for slot in 0..cfg.slots {
        let arrivals = process.sample(slot);
        let report = advance_slot(&mut state, &arrivals, sched)?;
        divergences += report.divergence_count;

        for &(packet, departure_slot) in &report.departed {
            if departure_slot >= cfg.warmup_slots {
                per_port_departures[packet.output] += 1;
                if packet.arrival_slot >= cfg.warmup_slots {
                    delays.record(departure_slot - packet.arrival_slot, departure_slot);
                }
            }
        }
        probe.observe(slot, &state.voqs.lengths());

        if spec.metrics.track_weight_ratio && slot >= cfg.warmup_slots {
            let qmax = state.voqs.max_len();
            let weights: Vec<f64> = (0..n * n)
                .map(|idx| {
                    let (i, j) = (idx / n, idx % n);
                    params
                        .weight(state.voqs.len(i, j) as f64, qmax as f64)
                        .expect("queue lengths are nonnegative")
                })
                .collect();
            let ratio = weight_ratio(&report.x_input_view, &weights);
            ratio_samples += 1;
            if ratio >= 1.0 - spec.metrics.weight_ratio_threshold {
                ratio_hits += 1;
            }
        }

        if slot % validate_every == 0 || slot + 1 == cfg.slots {
            let violations = validate_state(&state);
            if !violations.is_empty() && cfg.fidelity != Fidelity::Literal {
                return Err(Error::ProtocolViolation {
                    slot,
                    detail: violations.join("; "),
                });
            }
        }
    }

    let measured = (cfg.slots - cfg.warmup_slots) as f64;
    let per_port_throughput: Vec<f64> = per_port_departures
        .iter()
        .map(|&d| d as f64 / measured)
        .collect();
    let throughput = per_port_departures.iter().sum::<u64>() as f64 / (measured * n as f64);

    Ok(ExperimentReport {
        scheduler: cfg.scheduler.name().to_string(),
        pattern: spec.traffic.pattern.name().to_string(),
        n_ports: n,
        load: spec.traffic.load,
        omega: spec.traffic.omega,
        bursty: spec.traffic.bursty,
        seed: cfg.seed,
        slots: cfg.slots,
        warmup_slots: cfg.warmup_slots,
        injected: state.injected,
        departed: state.departed,
        mean_delay: delays.mean(),
        delay_ci95: delays.ci95_half_width(),
        throughput,
        per_port_throughput,
        max_qnorm: probe.max_qnorm(),
        mean_qnorm: probe.mean_qnorm(),
        stable: probe.is_stable(),
        divergences,
        weight_ratio_frac: (ratio_samples > 0).then(|| ratio_hits as f64 / ratio_samples as f64),
    })
}

fn run_oq(spec: &ExperimentSpec, mut process: ArrivalProcess) -> Result<ExperimentReport> {
    let cfg = &spec.switch;
    let n = cfg.n_ports;
    let mut oq = OqState::new(n);
    let mut delays = DelayStats::new(cfg.warmup_slots, cfg.slots, spec.metrics.batches);
    let mut probe = StabilityProbe::new(probe_interval(spec));
    let mut per_port_departures = vec![0u64; n];

    for slot in 0..cfg.slots {
        let arrivals = process.sample(slot);
        for (packet, departure_slot) in oq_slot(&mut oq, &arrivals) {
            if departure_slot >= cfg.warmup_slots {
                per_port_departures[packet.output] += 1;
                if packet.arrival_slot >= cfg.warmup_slots {
                    delays.record(departure_slot - packet.arrival_slot, departure_slot);
                }
            }
        }
        probe.observe(slot, &oq.queue_lengths());
    }

    let measured = (cfg.slots - cfg.warmup_slots) as f64;
    let per_port_throughput: Vec<f64> = per_port_departures
        .iter()
        .map(|&d| d as f64 / measured)
        .collect();
    let throughput = per_port_departures.iter().sum::<u64>() as f64 / (measured * n as f64);

    Ok(ExperimentReport {
        scheduler: cfg.scheduler.name().to_string(),
        pattern: spec.traffic.pattern.name().to_string(),
        n_ports: n,
        load: spec.traffic.load,
        omega: spec.traffic.omega,
        bursty: spec.traffic.bursty,
        seed: cfg.seed,
        slots: cfg.slots,
        warmup_slots: cfg.warmup_slots,
        injected: oq.injected,
        departed: oq.departed,
        mean_delay: delays.mean(),
        delay_ci95: delays.ci95_half_width(),
        throughput,
        per_port_throughput,
        max_qnorm: probe.max_qnorm(),
        mean_qnorm: probe.mean_qnorm(),
        stable: probe.is_stable(),
        divergences: 0,
        weight_ratio_frac: None,
    })
}

/// Saturation harness: run DISQUO with every VOQ topped up each slot and a
/// frozen weight matrix, and return the empirical distribution of the
/// schedule (input view) over canonical chain states, post burn-in.
pub fn saturated_schedule_distribution(
    n_ports: usize,
    fidelity: Fidelity,
    frozen_weights: &[f64],
    slots: u64,
    burn_in: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    assert!(slots > burn_in);
    let states = enumerate_matchings(n_ports)?;
    let index = |x: &Matching| -> usize {
        states
            .iter()
            .position(|s| s == x)
            .expect("view is a valid matching")
    };

    let mut cfg = SwitchConfig::new(n_ports, SchedulerKind::Disquo, seed, slots);
    cfg.fidelity = fidelity;
    let mut state = init_switch(cfg.clone())?;
    let mut sched = DisquoScheduler::new(&cfg).with_frozen_weights(frozen_weights.to_vec());

    let mut counts = vec![0u64; states.len()];
    for slot in 0..slots {
        state.top_up_queues(2);
        let report = advance_slot(&mut state, &[], &mut sched)?;
        if slot >= burn_in {
            counts[index(&report.x_input_view)] += 1;
        }
    }
    let total = (slots - burn_in) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}
