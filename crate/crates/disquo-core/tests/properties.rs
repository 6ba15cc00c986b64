//! Property tests over the chain identities, the assignment solver, traffic
//! admissibility, and the scheduler's structural invariants.

use disquo_core::baselines::mwm_schedule;
use disquo_core::chain::{
    chi2_distance, detailed_balance_residual, product_form, transition_matrix, tv_distance,
    ChainModel,
};
use disquo_core::disquo::DisquoScheduler;
use disquo_core::experiment::{run_experiment, ExperimentSpec, MetricsSpec, TrafficSpec};
use disquo_core::switch::{
    advance_slot, init_switch, validate_state, Fidelity, SchedulerKind, SwitchConfig,
};
use disquo_core::traffic::{build_rate_matrix, pareto_burst_length, TrafficPattern};
use proptest::prelude::*;

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

proptest! {
    #[test]
    fn chi2_at_least_twice_tv(
        raw_mu in prop::collection::vec(1e-3..1.0f64, 7),
        raw_nu in prop::collection::vec(1e-3..1.0f64, 7),
    ) {
        let mu = normalize(raw_mu);
        let nu = normalize(raw_nu);
        prop_assert!(chi2_distance(&nu, &mu) >= 2.0 * tv_distance(&mu, &nu) - 1e-12);
    }

    #[test]
    fn mwm_equals_brute_force(
        n in 2usize..=5,
        raw in prop::collection::vec(0.0..50.0f64, 25),
    ) {
        let weights = &raw[..n * n];
        let (matching, value) = mwm_schedule(weights, n);
        prop_assert!((matching.weight(weights) - value).abs() < 1e-9);
        // Exhaustive check over all permutations.
        let mut best = f64::NEG_INFINITY;
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let total: f64 = perm.iter().enumerate().map(|(i, &j)| weights[i * n + j]).sum();
            best = best.max(total);
            if !next_permutation(&mut perm) { break; }
        }
        prop_assert!((value - best).abs() < 1e-9, "value {value} brute {best}");
    }

    #[test]
    fn rate_matrices_admissible(
        n in 1usize..=16,
        load in 0.05..0.99f64,
        omega in 0.0..=1.0f64,
        which in 0usize..3,
    ) {
        let pattern = [TrafficPattern::Uniform, TrafficPattern::LinDiagonal, TrafficPattern::HotSpot][which];
        let rates = build_rate_matrix(pattern, n, load, Some(omega)).unwrap();
        for i in 0..n {
            prop_assert!(rates.row_sum(i) < 1.0);
            prop_assert!(rates.col_sum(i) < 1.0);
            prop_assert!((rates.row_sum(i) - load).abs() < 1e-9);
        }
    }

    #[test]
    fn burst_lengths_in_range(alpha in 1.05..3.0f64, l_max in 1u64..2000, seed: u64) {
        let mut rng = disquo_core::rng::CounterRng::new(seed);
        let l = pareto_burst_length(&mut rng, alpha, l_max).unwrap();
        prop_assert!((1..=l_max).contains(&l));
    }

    #[test]
    fn product_form_is_stationary_and_balanced(
        raw in prop::collection::vec(0.0..2.5f64, 4),
    ) {
        let model = ChainModel::build(raw.clone(), 2).unwrap();
        let pf = product_form(&raw, 2).unwrap();
        for (a, b) in model.pi.iter().zip(&pf) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!(detailed_balance_residual(&model.p, &model.pi) <= 1e-12);
    }

    #[test]
    fn transition_rows_sum_to_one(raw in prop::collection::vec(0.0..3.0f64, 4)) {
        let p = transition_matrix(&raw, 2).unwrap();
        for s in p.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Consistent-mode runs keep both views equal, keep them matchings, and
    /// conserve packets — across random sizes, loads, and seeds.
    #[test]
    fn consistent_runs_hold_invariants(
        n in 2usize..=6,
        load in 0.1..0.95f64,
        seed: u64,
        bursty: bool,
    ) {
        let mut cfg = SwitchConfig::new(n, SchedulerKind::Disquo, seed, 3_000);
        cfg.fidelity = Fidelity::Consistent;
        let mut state = init_switch(cfg.clone()).unwrap();
        let mut sched = DisquoScheduler::new(&cfg);
        let rates = build_rate_matrix(TrafficPattern::Uniform, n, load, None).unwrap();
        let mut process = if bursty {
            disquo_core::traffic::ArrivalProcess::bursty(
                rates,
                disquo_core::traffic::BurstModel::standard(),
                seed,
            ).unwrap()
        } else {
            disquo_core::traffic::ArrivalProcess::bernoulli(rates, seed).unwrap()
        };
        for slot in 0..cfg.slots {
            let arrivals = process.sample(slot);
            let report = advance_slot(&mut state, &arrivals, &mut sched).unwrap();
            prop_assert_eq!(report.divergence_count, 0);
            prop_assert_eq!(&report.x_input_view, &report.x_output_view);
            prop_assert!(report.x_input_view.is_valid());
        }
        prop_assert!(validate_state(&state).is_empty());
    }

    /// Every scheduler respects the per-port transmission constraints; the
    /// engine would error otherwise.
    #[test]
    fn all_schedulers_run_clean(
        kind in 0usize..4,
        load in 0.1..0.9f64,
        seed: u64,
    ) {
        let kind = [
            SchedulerKind::Disquo,
            SchedulerKind::Mwm,
            SchedulerKind::RrRr,
            SchedulerKind::LqfRr,
        ][kind];
        let spec = ExperimentSpec {
            switch: SwitchConfig::new(4, kind, seed, 2_000),
            traffic: TrafficSpec::new(TrafficPattern::LinDiagonal, load),
            metrics: MetricsSpec::default(),
        };
        let report = run_experiment(&spec).unwrap();
        prop_assert_eq!(report.injected, report.departed + (report.injected - report.departed));
        for &t in &report.per_port_throughput {
            prop_assert!(t <= 1.0 + 1e-12);
        }
    }
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}
