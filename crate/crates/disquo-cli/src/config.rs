//! TOML experiment configuration: schema-validated (unknown keys rejected),
//! with sweep lists expanding into one run per (load, omega, scheduler, seed)
//! combination.

use disquo_core::experiment::{ExperimentSpec, MetricsSpec, TrafficSpec};
use disquo_core::switch::{Fidelity, SchedulerKind, SwitchConfig, WeightMode};
use disquo_core::traffic::TrafficPattern;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub switch: SwitchSection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSection {
    pub n_ports: usize,
    pub scheduler: String,
    #[serde(default = "default_fidelity")]
    pub fidelity: String,
    #[serde(default = "default_weight_mode")]
    pub weight_mode: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub slots: u64,
    #[serde(default)]
    pub warmup_slots: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub pattern: String,
    #[serde(default)]
    pub load: Option<f64>,
    #[serde(default)]
    pub loads: Option<Vec<f64>>,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub omegas: Option<Vec<f64>>,
    #[serde(default)]
    pub bursty: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_l_max")]
    pub l_max: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub schedulers: Option<Vec<String>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub probe_interval: Option<u64>,
    #[serde(default)]
    pub track_weight_ratio: bool,
    #[serde(default = "default_ratio_threshold")]
    pub weight_ratio_threshold: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            batches: default_batches(),
            probe_interval: None,
            track_weight_ratio: false,
            weight_ratio_threshold: default_ratio_threshold(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<String>,
}

fn default_fidelity() -> String {
    "consistent".into()
}
fn default_weight_mode() -> String {
    "local".into()
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_seed() -> u64 {
    1
}
fn default_omega() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    1.7
}
fn default_l_max() -> u64 {
    1000
}
fn default_batches() -> usize {
    30
}
fn default_ratio_threshold() -> f64 {
    0.1
}

pub fn parse(text: &str) -> Result<ConfigFile, String> {
    toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
}

fn build_spec(
    cfg: &ConfigFile,
    scheduler: &str,
    load: f64,
    omega: f64,
    seed: u64,
) -> Result<ExperimentSpec, String> {
    let scheduler: SchedulerKind = scheduler.parse().map_err(|e| format!("{e}"))?;
    let fidelity: Fidelity = cfg.switch.fidelity.parse().map_err(|e| format!("{e}"))?;
    let weight_mode: WeightMode = cfg.switch.weight_mode.parse().map_err(|e| format!("{e}"))?;
    let pattern: TrafficPattern = cfg.traffic.pattern.parse().map_err(|e| format!("{e}"))?;

    let mut switch = SwitchConfig::new(cfg.switch.n_ports, scheduler, seed, cfg.switch.slots);
    switch.fidelity = fidelity;
    switch.weight_mode = weight_mode;
    switch.epsilon = cfg.switch.epsilon;
    switch.warmup_slots = cfg.switch.warmup_slots;
    switch.validate().map_err(|e| format!("{e}"))?;

    let traffic = TrafficSpec {
        pattern,
        load,
        omega,
        bursty: cfg.traffic.bursty,
        alpha: cfg.traffic.alpha,
        l_max: cfg.traffic.l_max,
    };
    // Surface inadmissible points before any run starts.
    disquo_core::traffic::build_rate_matrix(pattern, cfg.switch.n_ports, load, Some(omega))
        .map_err(|e| format!("{e}"))?;

    let metrics = MetricsSpec {
        batches: cfg.metrics.batches,
        probe_interval: cfg.metrics.probe_interval,
        track_weight_ratio: cfg.metrics.track_weight_ratio,
        weight_ratio_threshold: cfg.metrics.weight_ratio_threshold,
    };
    Ok(ExperimentSpec {
        switch,
        traffic,
        metrics,
    })
}

/// One run: requires a scalar load.
pub fn single_spec(cfg: &ConfigFile, seed_override: Option<u64>) -> Result<ExperimentSpec, String> {
    let load = cfg
        .traffic
        .load
        .ok_or("traffic.load is required for simulate")?;
    let seed = seed_override.unwrap_or(cfg.switch.seed);
    build_spec(cfg, &cfg.switch.scheduler, load, cfg.traffic.omega, seed)
}

/// Sweep expansion: the cartesian product of loads x omegas x schedulers x
/// seeds, each list defaulting to the scalar entry.
pub fn sweep_specs(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
) -> Result<Vec<ExperimentSpec>, String> {
    let loads: Vec<f64> = match (&cfg.traffic.loads, cfg.traffic.load) {
        (Some(list), _) => list.clone(),
        (None, Some(one)) => vec![one],
        (None, None) => return Err("traffic.load or traffic.loads required".into()),
    };
    if loads.is_empty() {
        return Err("traffic.loads must not be empty".into());
    }
    let omegas: Vec<f64> = cfg
        .traffic
        .omegas
        .clone()
        .unwrap_or_else(|| vec![cfg.traffic.omega]);
    if omegas.is_empty() {
        return Err("traffic.omegas must not be empty".into());
    }
    let schedulers: Vec<String> = cfg
        .sweep
        .schedulers
        .clone()
        .unwrap_or_else(|| vec![cfg.switch.scheduler.clone()]);
    if schedulers.is_empty() {
        return Err("sweep.schedulers must not be empty".into());
    }
    let seeds: Vec<u64> = match seed_override {
        Some(s) => vec![s],
        None => cfg
            .sweep
            .seeds
            .clone()
            .unwrap_or_else(|| vec![cfg.switch.seed]),
    };
    if seeds.is_empty() {
        return Err("sweep.seeds must not be empty".into());
    }

    let mut specs = Vec::new();
    for &load in &loads {
        for &omega in &omegas {
            for scheduler in &schedulers {
                for &seed in &seeds {
                    specs.push(build_spec(cfg, scheduler, load, omega, seed)?);
                }
            }
        }
    }
    Ok(specs)
}
