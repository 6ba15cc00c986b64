//! Named pass/fail checks over the analytic machinery, bundled for the
//! `verify` CLI subcommand. `Fast` stays exact and below ten seconds; `Full`
//! adds the three-port exact checks and the Monte Carlo comparisons.

use crate::chain::linalg::strongly_connected;
use crate::chain::{
    self, alpha_n, chi2_distance, conductance, conductance_sampled, detailed_balance_residual,
    enumerate_matchings, free_energy, free_energy_maximizer, log_partition, low_weight_mass,
    matrix_norm, mixing_slots, mixing_time, mugd_mixing_bound, product_form, simulate_mugd,
    spectral_gap_emax, stationary_residual, transition_matrix, transition_matrix_by_expansion,
    tv_distance, ChainModel,
};
use crate::disquo::{activation_probability, damping, WeightFn};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Fast,
    Full,
}

impl std::str::FromStr for VerifyLevel {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fast" => Ok(VerifyLevel::Fast),
            "full" => Ok(VerifyLevel::Full),
            other => Err(crate::Error::InvalidConfig(format!(
                "unknown verify level `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn run_check(
    out: &mut Vec<CheckResult>,
    name: &'static str,
    f: impl FnOnce() -> Result<String, String>,
) {
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    out.push(CheckResult {
        name,
        passed,
        detail,
    });
}

fn random_weights(rng: &mut CounterRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n * n).map(|_| rng.unit_f64() * scale).collect()
}

fn random_distribution(rng: &mut CounterRng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.unit_f64() + 1e-3).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

/// Run every check at the given level.
pub fn run_verification(level: VerifyLevel) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let reference_weights = vec![1.0, 2.0, 0.5, 1.5];

    run_check(&mut out, "matching-state-counts", || {
        for (n, expect) in [(1usize, 2usize), (2, 7), (3, 34)] {
            let got = enumerate_matchings(n).map_err(|e| e.to_string())?.len();
            if got != expect {
                return Err(format!("N={n}: {got} states, expected {expect}"));
            }
        }
        Ok("N=1,2,3 -> 2, 7, 34 states".into())
    });

    run_check(&mut out, "transition-row-sums", || {
        let p = transition_matrix(&reference_weights, 2).map_err(|e| e.to_string())?;
        let worst = p
            .row_sums()
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max);
        if worst <= 1e-12 {
            Ok(format!("max row-sum error {worst:.2e}"))
        } else {
            Err(format!("max row-sum error {worst:.2e} exceeds 1e-12"))
        }
    });

    run_check(&mut out, "chain-irreducible", || {
        let p = transition_matrix(&reference_weights, 2).map_err(|e| e.to_string())?;
        if strongly_connected(&p) {
            Ok("positive-entry digraph strongly connected".into())
        } else {
            Err("transition digraph not strongly connected".into())
        }
    });

    run_check(&mut out, "product-form-stationary", || {
        let p = transition_matrix(&reference_weights, 2).map_err(|e| e.to_string())?;
        let pi = product_form(&reference_weights, 2).map_err(|e| e.to_string())?;
        let residual = stationary_residual(&p, &pi);
        if residual <= 1e-10 {
            Ok(format!("residual {residual:.2e}"))
        } else {
            Err(format!("residual {residual:.2e} exceeds 1e-10"))
        }
    });

    run_check(&mut out, "solver-matches-product-form", || {
        let model = ChainModel::build(reference_weights.clone(), 2).map_err(|e| e.to_string())?;
        let pf = product_form(&reference_weights, 2).map_err(|e| e.to_string())?;
        let worst = model
            .pi
            .iter()
            .zip(&pf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if worst <= 1e-10 {
            Ok(format!("max difference {worst:.2e}"))
        } else {
            Err(format!("max difference {worst:.2e} exceeds 1e-10"))
        }
    });

    run_check(&mut out, "detailed-balance", || {
        let model = ChainModel::build(reference_weights.clone(), 2).map_err(|e| e.to_string())?;
        let residual = detailed_balance_residual(&model.p, &model.pi);
        if residual <= 1e-12 {
            Ok(format!("residual {residual:.2e}"))
        } else {
            Err(format!("residual {residual:.2e} exceeds 1e-12"))
        }
    });

    run_check(&mut out, "chi2-dominates-2tv", || {
        let mut rng = CounterRng::new(0xd15);
        for _ in 0..1000 {
            let mu = random_distribution(&mut rng, 7);
            let nu = random_distribution(&mut rng, 7);
            let chi = chi2_distance(&nu, &mu);
            let tv = tv_distance(&mu, &nu);
            if chi < 2.0 * tv - 1e-12 {
                return Err(format!("chi2 {chi} < 2 tv {tv}"));
            }
        }
        Ok("1000 random pairs".into())
    });

    run_check(&mut out, "matrix-norm-equals-emax", || {
        let mut rng = CounterRng::new(0x7a3);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let w = random_weights(&mut rng, 2, 2.0);
            let model = ChainModel::build(w, 2).map_err(|e| e.to_string())?;
            let e_max = spectral_gap_emax(&model.p, &model.pi).map_err(|e| e.to_string())?;
            let norm = matrix_norm(&model.p, &model.pi);
            worst = worst.max((norm - e_max).abs());
        }
        if worst <= 1e-8 {
            Ok(format!("20 instances, max |norm - e_max| {worst:.2e}"))
        } else {
            Err(format!("max |norm - e_max| {worst:.2e} exceeds 1e-8"))
        }
    });

    run_check(&mut out, "conductance-bound", || {
        let mut rng = CounterRng::new(0xc0d);
        for n in [1usize, 2] {
            for _ in 0..20 {
                let w = random_weights(&mut rng, n, 2.0);
                let model = ChainModel::build(w, n).map_err(|e| e.to_string())?;
                let e_max = spectral_gap_emax(&model.p, &model.pi).map_err(|e| e.to_string())?;
                let phi = conductance(&model.p, &model.pi).map_err(|e| e.to_string())?;
                if e_max > 1.0 - phi * phi / 2.0 + 1e-12 {
                    return Err(format!("N={n}: e_max {e_max} > 1 - phi^2/2, phi {phi}"));
                }
            }
        }
        Ok("40 instances across N=1,2".into())
    });

    run_check(&mut out, "mixing-time-bound", || {
        let mut rng = CounterRng::new(0xb0b);
        for n in [1usize, 2] {
            for _ in 0..20 {
                let w = random_weights(&mut rng, n, 1.5);
                let w_max = w.iter().cloned().fold(0.0, f64::max);
                let model = ChainModel::build(w, n).map_err(|e| e.to_string())?;
                let e_max = spectral_gap_emax(&model.p, &model.pi).map_err(|e| e.to_string())?;
                let bound = mugd_mixing_bound(n * n, w_max);
                if mixing_time(e_max) > bound {
                    return Err(format!(
                        "N={n}: mixing {} exceeds bound {bound}",
                        mixing_time(e_max)
                    ));
                }
            }
        }
        Ok("40 instances across N=1,2".into())
    });

    run_check(&mut out, "low-weight-mass-bound", || {
        let mut rng = CounterRng::new(0x10e);
        for n in [1usize, 2] {
            for _ in 0..20 {
                let w: Vec<f64> = (0..n * n).map(|_| 0.5 + rng.unit_f64() * 9.5).collect();
                let eps = 0.05 + rng.unit_f64() * 0.9;
                let (mass, bound) = low_weight_mass(&w, eps, n).map_err(|e| e.to_string())?;
                let bound = bound.ok_or("bound undefined with positive weights")?;
                if mass > bound {
                    return Err(format!("N={n}: mass {mass} exceeds bound {bound}"));
                }
            }
        }
        Ok("40 instances across N=1,2".into())
    });

    run_check(&mut out, "free-energy-maximizer", || {
        let mut rng = CounterRng::new(0xfee);
        let t: Vec<f64> = (0..7).map(|_| rng.unit_f64() * 3.0 - 0.5).collect();
        let mu_star = free_energy_maximizer(&t);
        let f_star = free_energy(&mu_star, &t);
        if (f_star - log_partition(&t)).abs() > 1e-10 {
            return Err(format!(
                "maximizer value {f_star} differs from log Z {}",
                log_partition(&t)
            ));
        }
        for _ in 0..100 {
            let mu = random_distribution(&mut rng, 7);
            if free_energy(&mu, &t) > f_star + 1e-12 {
                return Err("a random distribution beat the maximizer".into());
            }
        }
        Ok("100 random distributions stay below log Z".into())
    });

    run_check(&mut out, "weight-function-shape", || {
        let f = WeightFn::LogOverDamping;
        let mut x = 0.0f64;
        loop {
            let d = f.deriv(x);
            if d <= 0.0 {
                return Err(format!("f' not positive at {x}"));
            }
            if d > 1.0 / (1.0 + x) + 1e-12 {
                return Err(format!("f'(x) > 1/(1+x) at {x}"));
            }
            if damping(x) < 1.0 {
                return Err(format!("g(x) < 1 at {x}"));
            }
            if x > 1e9 {
                break;
            }
            x = (x + 1e-3) * 1.5;
        }
        Ok("f' bound and g >= 1 on the log grid".into())
    });

    run_check(&mut out, "activation-probability", || {
        if activation_probability(0.0) != 0.5 {
            return Err("p(0) != 1/2".into());
        }
        let mut prev = 0.0;
        for k in 0..200 {
            let p = activation_probability(k as f64 * 0.1);
            if p < prev {
                return Err(format!("not monotone at w={}", k as f64 * 0.1));
            }
            prev = p;
        }
        Ok("p(0) = 1/2, monotone on [0, 20]".into())
    });

    run_check(&mut out, "mixing-slots-formula", || {
        let got = mixing_slots(0.5, 0.25, 0.01);
        if got == 8 {
            Ok("worked example evaluates to 8".into())
        } else {
            Err(format!("worked example gave {got}, expected 8"))
        }
    });

    run_check(&mut out, "chi2-decay-rate", || {
        let model = ChainModel::build(vec![0.0; 4], 2).map_err(|e| e.to_string())?;
        let e_max = spectral_gap_emax(&model.p, &model.pi).map_err(|e| e.to_string())?;
        let mut mu = vec![0.0; 7];
        mu[6] = 1.0;
        let d0 = chi2_distance(&mu, &model.pi);
        for t in 1..=50 {
            mu = model.p.mul_left(&mu);
            let d = chi2_distance(&mu, &model.pi);
            if d > e_max.powi(t) * d0 + 1e-12 {
                return Err(format!("step {t}: chi2 {d} above e_max^t bound"));
            }
        }
        Ok(format!("geometric decay at e_max = {e_max:.4}"))
    });

    run_check(&mut out, "alpha-coefficient", || {
        let q = vec![9.0; 4];
        let plain = alpha_n(&q, &q, WeightFn::PlainLog);
        if (plain - 0.8).abs() > 1e-12 {
            return Err(format!("plain-log anchor gave {plain}, expected 0.8"));
        }
        let prod = alpha_n(&q, &q, WeightFn::LogOverDamping);
        if prod >= plain {
            return Err("production f' should sit below 1/(1+x)".into());
        }
        Ok(format!("anchor 0.8; production value {prod:.4}"))
    });

    if level == VerifyLevel::Full {
        run_check(&mut out, "n3-exact-stationarity", || {
            let mut rng = CounterRng::new(0x333);
            let w = random_weights(&mut rng, 3, 1.5);
            let model = ChainModel::build(w.clone(), 3).map_err(|e| e.to_string())?;
            let pf = product_form(&w, 3).map_err(|e| e.to_string())?;
            let worst = model
                .pi
                .iter()
                .zip(&pf)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let db = detailed_balance_residual(&model.p, &model.pi);
            if worst <= 1e-10 && db <= 1e-12 {
                Ok(format!(
                    "pi difference {worst:.2e}, balance residual {db:.2e}"
                ))
            } else {
                Err(format!(
                    "pi difference {worst:.2e}, balance residual {db:.2e}"
                ))
            }
        });

        run_check(&mut out, "n3-transition-cross-check", || {
            let mut rng = CounterRng::new(0x334);
            let w = random_weights(&mut rng, 3, 1.5);
            let a = transition_matrix(&w, 3).map_err(|e| e.to_string())?;
            let b = transition_matrix_by_expansion(&w, 3).map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for i in 0..a.n {
                for j in 0..a.n {
                    worst = worst.max((a.get(i, j) - b.get(i, j)).abs());
                }
            }
            if worst <= 1e-12 {
                Ok(format!("closed form vs expansion, max diff {worst:.2e}"))
            } else {
                Err(format!("constructions disagree by {worst:.2e}"))
            }
        });

        run_check(&mut out, "mugd-sampler-vs-stationary", || {
            let freq =
                simulate_mugd(&[0.0; 4], 2, 1_000_000, 10_000, 2024).map_err(|e| e.to_string())?;
            let uniform = vec![1.0 / 7.0; 7];
            let tv = tv_distance(&freq, &uniform);
            if tv <= 0.02 {
                Ok(format!("TV to uniform {tv:.4}"))
            } else {
                Err(format!("TV to uniform {tv:.4} exceeds 0.02"))
            }
        });

        run_check(&mut out, "mugd-random-weights", || {
            let w = vec![0.9, 0.2, 0.4, 1.3];
            let model = ChainModel::build(w.clone(), 2).map_err(|e| e.to_string())?;
            let freq = simulate_mugd(&w, 2, 1_000_000, 10_000, 99).map_err(|e| e.to_string())?;
            let tv = tv_distance(&freq, &model.pi);
            if tv <= 0.02 {
                Ok(format!("TV to product form {tv:.4}"))
            } else {
                Err(format!("TV to product form {tv:.4} exceeds 0.02"))
            }
        });

        run_check(&mut out, "n3-conductance-sampled", || {
            let mut rng = CounterRng::new(0x335);
            let w = random_weights(&mut rng, 3, 1.0);
            let model = ChainModel::build(w, 3).map_err(|e| e.to_string())?;
            let e_max = spectral_gap_emax(&model.p, &model.pi).map_err(|e| e.to_string())?;
            let phi = conductance_sampled(&model.p, &model.pi, 20_000, 7);
            if e_max <= 1.0 - phi * phi / 2.0 + 1e-12 {
                Ok(format!("e_max {e_max:.4}, sampled phi {phi:.4}"))
            } else {
                Err(format!(
                    "e_max {e_max:.4} above bound from sampled phi {phi:.4}"
                ))
            }
        });

        run_check(&mut out, "n4-state-count", || {
            let got = chain::enumerate_matchings(4)
                .map_err(|e| e.to_string())?
                .len();
            if got == 209 {
                Ok("209 states".into())
            } else {
                Err(format!("{got} states, expected 209"))
            }
        });
    }

    out
}
