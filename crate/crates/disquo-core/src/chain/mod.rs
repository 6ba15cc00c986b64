//! Exact verification machinery for the schedule Markov chain on small
//! switches: state enumeration, the multi-update Glauber transition matrix,
//! its product-form stationary distribution, detailed balance, distribution
//! distances, matrix norm, spectral gap, conductance, mixing bounds, free
//! energy, and an abstract multi-update Glauber sampler.
//!
//! States are partial matchings of the N x N bipartite graph, equivalently
//! independent sets of the conflict graph whose vertices are crosspoints and
//! whose edges join cells sharing a row or column. Everything here is exact
//! (up to f64) and restricted to N <= 5, where the state space has at most
//! 1546 elements.

pub mod linalg;

use crate::disquo::{activation_probability, permutation, WeightFn};
use crate::matching::Matching;
use crate::rng::{self, CounterRng};
use crate::{Error, Result};
use linalg::{solve_linear, strongly_connected, symmetric_eigenvalues, DenseMatrix};
use std::collections::HashMap;

/// Largest port count with exact enumeration (1546 states, 120 permutations).
pub const MAX_EXACT_PORTS: usize = 5;

fn guard_ports(n_ports: usize) -> Result<()> {
    if n_ports == 0 {
        return Err(Error::InvalidConfig("n_ports must be at least 1".into()));
    }
    if n_ports > MAX_EXACT_PORTS {
        return Err(Error::Capacity(format!(
            "exact chain analysis supports up to {MAX_EXACT_PORTS} ports, got {n_ports}"
        )));
    }
    Ok(())
}

/// All partial matchings of the N x N bipartite graph, canonically ordered
/// (rows assigned in order, `None` before ascending column indices). The
/// first state is always the empty schedule.
pub fn enumerate_matchings(n_ports: usize) -> Result<Vec<Matching>> {
    guard_ports(n_ports)?;
    let mut states = Vec::new();
    let mut current: Vec<Option<usize>> = Vec::with_capacity(n_ports);
    fn recurse(
        n: usize,
        used_cols: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        out: &mut Vec<Matching>,
    ) {
        if current.len() == n {
            out.push(Matching::from_rows(current.clone()).expect("columns unique"));
            return;
        }
        current.push(None);
        recurse(n, used_cols, current, out);
        current.pop();
        for j in 0..n {
            if !used_cols[j] {
                used_cols[j] = true;
                current.push(Some(j));
                recurse(n, used_cols, current, out);
                current.pop();
                used_cols[j] = false;
            }
        }
    }
    recurse(
        n_ports,
        &mut vec![false; n_ports],
        &mut current,
        &mut states,
    );
    Ok(states)
}

/// Cell bitmask of a matching (bit i*n + j per matched pair).
fn state_mask(m: &Matching, n: usize) -> u32 {
    let mut mask = 0u32;
    for (i, j) in m.pairs() {
        mask |= 1 << (i * n + j);
    }
    mask
}

fn mask_rows(mask: u32, n: usize) -> u32 {
    let mut rows = 0u32;
    for i in 0..n {
        for j in 0..n {
            if mask & (1 << (i * n + j)) != 0 {
                rows |= 1 << i;
            }
        }
    }
    rows
}

fn mask_cols(mask: u32, n: usize) -> u32 {
    let mut cols = 0u32;
    for i in 0..n {
        for j in 0..n {
            if mask & (1 << (i * n + j)) != 0 {
                cols |= 1 << j;
            }
        }
    }
    cols
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut items, &mut out);
    out
}

/// The one-slot transition matrix of the schedule chain, built from the
/// closed-form sum over permutations: for states X, X' reachable in one step,
///
///   P(X, X') = sum over H containing X diff X' of (1/N!)
///              * prod over leaves   (1 - p)
///              * prod over joins    p
///              * prod over kept pairs selected by H    p
///              * prod over H-cells outside X u X' with no neighbor
///                in X u X'                             (1 - p).
///
/// The last factor set uses the union form of the neighborhood (the corrected
/// construction); for cells of H it coincides with "no neighbor in X".
pub fn transition_matrix(weights: &[f64], n_ports: usize) -> Result<DenseMatrix> {
    guard_ports(n_ports)?;
    let n = n_ports;
    assert_eq!(weights.len(), n * n);
    let states = enumerate_matchings(n)?;
    let s = states.len();
    let p_cell: Vec<f64> = weights.iter().map(|&w| activation_probability(w)).collect();

    let masks: Vec<u32> = states.iter().map(|m| state_mask(m, n)).collect();
    let perms = all_permutations(n);
    let perm_masks: Vec<u32> = perms
        .iter()
        .map(|f| {
            f.iter()
                .enumerate()
                .fold(0u32, |m, (i, &j)| m | 1 << (i * n + j))
        })
        .collect();
    let inv_fact = 1.0 / perms.len() as f64;

    let mut p = DenseMatrix::zeros(s);
    for a in 0..s {
        let xa = masks[a];
        for b in 0..s {
            let xb = masks[b];
            let delta = xa ^ xb;
            let union = xa | xb;
            let rows_used = mask_rows(union, n);
            let cols_used = mask_cols(union, n);

            let mut total = 0.0;
            for (h, &h_mask) in perms.iter().zip(&perm_masks) {
                if delta & !h_mask != 0 {
                    continue; // H does not contain the symmetric difference
                }
                let mut prob = inv_fact;
                for (i, &j) in h.iter().enumerate() {
                    let bit = 1 << (i * n + j);
                    let pij = p_cell[i * n + j];
                    if xa & bit != 0 {
                        if xb & bit != 0 {
                            prob *= pij; // kept while selected
                        } else {
                            prob *= 1.0 - pij; // leave
                        }
                    } else if xb & bit != 0 {
                        prob *= pij; // join
                    } else if rows_used & (1 << i) == 0 && cols_used & (1 << j) == 0 {
                        prob *= 1.0 - pij; // eligible but declined
                    }
                }
                total += prob;
            }
            p.set(a, b, total);
        }
    }
    Ok(p)
}

/// Independent construction of the same matrix by expanding the update
/// process outcome-by-outcome: for every (state, permutation) pair, each
/// selected cell with a clear neighborhood flips a coin, and each outcome's
/// probability mass lands on its successor state. Used to cross-check
/// [`transition_matrix`].
pub fn transition_matrix_by_expansion(weights: &[f64], n_ports: usize) -> Result<DenseMatrix> {
    guard_ports(n_ports)?;
    let n = n_ports;
    let states = enumerate_matchings(n)?;
    let s = states.len();
    let p_cell: Vec<f64> = weights.iter().map(|&w| activation_probability(w)).collect();
    let masks: Vec<u32> = states.iter().map(|m| state_mask(m, n)).collect();
    let index: HashMap<u32, usize> = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let perms = all_permutations(n);
    let inv_fact = 1.0 / perms.len() as f64;

    let mut p = DenseMatrix::zeros(s);
    for a in 0..s {
        let xa = masks[a];
        let rows = mask_rows(xa, n);
        let cols = mask_cols(xa, n);
        for h in &perms {
            // Coin cells: members of X selected by H (keep/leave) and free
            // cells with clear neighborhoods (join/stay).
            let mut coin_cells: Vec<(u32, f64, bool)> = Vec::new(); // (bit, p, currently_active)
            for (i, &j) in h.iter().enumerate() {
                let bit = 1 << (i * n + j);
                if xa & bit != 0 {
                    coin_cells.push((bit, p_cell[i * n + j], true));
                } else if rows & (1 << i) == 0 && cols & (1 << j) == 0 {
                    coin_cells.push((bit, p_cell[i * n + j], false));
                }
            }
            let k = coin_cells.len();
            for outcome in 0u32..(1 << k) {
                let mut mask = xa;
                let mut prob = inv_fact;
                for (c, &(bit, pij, active)) in coin_cells.iter().enumerate() {
                    let on = outcome & (1 << c) != 0; // on = ends up active
                    prob *= if on { pij } else { 1.0 - pij };
                    if active && !on {
                        mask &= !bit;
                    } else if !active && on {
                        mask |= bit;
                    }
                }
                p.add(a, index[&mask], prob);
            }
        }
    }
    Ok(p)
}

/// Product-form distribution pi(X) proportional to exp(sum of matched
/// weights), the stationary law of the schedule chain.
pub fn product_form(weights: &[f64], n_ports: usize) -> Result<Vec<f64>> {
    let states = enumerate_matchings(n_ports)?;
    let exponents: Vec<f64> = states.iter().map(|x| x.weight(weights)).collect();
    Ok(softmax(&exponents))
}

fn softmax(exponents: &[f64]) -> Vec<f64> {
    let shift = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = exponents.iter().map(|&e| (e - shift).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|u| u / z).collect()
}

/// Solve pi P = pi, sum pi = 1. Fails if the chain is reducible or the
/// residual exceeds 1e-10.
pub fn stationary_distribution(p: &DenseMatrix) -> Result<Vec<f64>> {
    if !strongly_connected(p) {
        return Err(Error::ReducibleChain);
    }
    let n = p.n;
    // (P^T - I) pi = 0 with the last equation replaced by sum pi = 1.
    let mut a = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, p.get(j, i) - if i == j { 1.0 } else { 0.0 });
        }
    }
    for j in 0..n {
        a.set(n - 1, j, 1.0);
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let pi = solve_linear(&a, &b)?;

    let residual = stationary_residual(p, &pi);
    if residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "stationary solve residual {residual:e} exceeds 1e-10"
        )));
    }
    Ok(pi)
}

/// Max-norm of pi P - pi.
pub fn stationary_residual(p: &DenseMatrix, pi: &[f64]) -> f64 {
    p.mul_left(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Max over ordered pairs of |pi(X) P(X,X') - pi(X') P(X',X)|.
pub fn detailed_balance_residual(p: &DenseMatrix, pi: &[f64]) -> f64 {
    let n = p.n;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let diff = (pi[i] * p.get(i, j) - pi[j] * p.get(j, i)).abs();
            worst = worst.max(diff);
        }
    }
    worst
}

// ── Distribution distances ──────────────────────────────────────────────────

/// Total variation distance: half the L1 difference.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> f64 {
    0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Chi-square distance of nu from mu: sqrt(sum mu (nu/mu - 1)^2). Support of
/// nu outside the support of mu makes the distance infinite.
pub fn chi2_distance(nu: &[f64], mu: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&n, &m) in nu.iter().zip(mu) {
        if m == 0.0 {
            if n != 0.0 {
                return f64::INFINITY;
            }
        } else {
            let r = n / m - 1.0;
            sum += m * r * r;
        }
    }
    sum.sqrt()
}

/// The mu-weighted 2-norm: sqrt(sum mu nu^2).
pub fn weighted_norm(nu: &[f64], mu: &[f64]) -> f64 {
    nu.iter()
        .zip(mu)
        .map(|(&n, &m)| m * n * n)
        .sum::<f64>()
        .sqrt()
}

// ── Spectral quantities ─────────────────────────────────────────────────────

/// The matrix norm of A with respect to a positive vector mu: the operator
/// norm of v -> A v over mean-zero v in the mu-weighted 2-norm, computed
/// spectrally on the similarity-transformed matrix restricted to the
/// orthogonal complement of sqrt(mu).
pub fn matrix_norm(a: &DenseMatrix, mu: &[f64]) -> f64 {
    let n = a.n;
    if n == 1 {
        return 0.0; // no nonzero mean-zero vector exists
    }
    assert!(mu.iter().all(|&m| m > 0.0), "mu must be strictly positive");
    let sqrt_mu: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let s_norm: f64 = sqrt_mu.iter().map(|s| s * s).sum::<f64>().sqrt();
    let s: Vec<f64> = sqrt_mu.iter().map(|v| v / s_norm).collect();

    // M = D^{1/2} A D^{-1/2}; B = M (I - s s^T); norm = sqrt(lambda_max(B^T B)).
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, sqrt_mu[i] * a.get(i, j) / sqrt_mu[j]);
        }
    }
    let ms = m.mul_right(&s);
    let mut b = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            b.set(i, j, m.get(i, j) - ms[i] * s[j]);
        }
    }
    let g = b.transpose().matmul(&b);
    let lambda_max = symmetric_eigenvalues(&g)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    lambda_max.max(0.0).sqrt()
}

/// Second-largest eigenvalue modulus of a reversible transition matrix.
pub fn spectral_gap_emax(p: &DenseMatrix, pi: &[f64]) -> Result<f64> {
    let n = p.n;
    if n == 1 {
        return Ok(0.0);
    }
    // Similarity transform S = D^{1/2} P D^{-1/2} is symmetric exactly when
    // the chain is reversible with respect to pi.
    let mut s = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, (pi[i] / pi[j]).sqrt() * p.get(i, j));
        }
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if asym > 1e-8 {
        return Err(Error::Numerical(format!(
            "chain is not reversible w.r.t. pi (asymmetry {asym:e})"
        )));
    }
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (s.get(i, j) + s.get(j, i));
            s.set(i, j, avg);
            s.set(j, i, avg);
        }
    }
    let mut ev = symmetric_eigenvalues(&s);
    ev.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
    if (ev[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Numerical(format!(
            "leading eigenvalue {} is not 1",
            ev[0]
        )));
    }
    let e_max = ev[1].abs();
    if e_max >= 1.0 - 1e-12 {
        return Err(Error::Numerical(
            "second eigenvalue modulus is 1: chain periodic or reducible".into(),
        ));
    }
    Ok(e_max)
}

/// Mixing time proxy 1 / (1 - e_max).
pub fn mixing_time(e_max: f64) -> f64 {
    1.0 / (1.0 - e_max)
}

/// Slots needed to bring the chi-square distance below delta from a worst-case
/// start: ceil((log(1/pi_min)/2 + log(1/delta)) / log(1/e_max)).
pub fn mixing_slots(e_max: f64, pi_min: f64, delta: f64) -> u64 {
    assert!(pi_min > 0.0 && delta > 0.0);
    if e_max <= 0.0 {
        return 1;
    }
    let tau = (0.5 * (1.0 / pi_min).ln() + (1.0 / delta).ln()) / (1.0 / e_max).ln();
    tau.ceil().max(1.0) as u64
}

/// Exact conductance: min over subsets A with pi(A) <= 1/2 of F(A)/pi(A),
/// where F(A) is the ergodic flow out of A. Exponential in the state count,
/// so guarded to 16 states (all port counts up to 2).
pub fn conductance(p: &DenseMatrix, pi: &[f64]) -> Result<f64> {
    let n = p.n;
    if n > 16 {
        return Err(Error::Capacity(format!(
            "exact conductance enumerates 2^{n} subsets; limit is 2^16"
        )));
    }
    let mut best = f64::INFINITY;
    for subset in 1u32..(1 << n) - 1 {
        let mass: f64 = (0..n)
            .filter(|&i| subset & (1 << i) != 0)
            .map(|i| pi[i])
            .sum();
        if mass <= 0.0 || mass > 0.5 {
            continue;
        }
        let mut flow = 0.0;
        for i in 0..n {
            if subset & (1 << i) == 0 {
                continue;
            }
            for j in 0..n {
                if subset & (1 << j) == 0 {
                    flow += pi[i] * p.get(i, j);
                }
            }
        }
        best = best.min(flow / mass);
    }
    if best.is_infinite() {
        return Err(Error::Numerical("no subset with mass at most 1/2".into()));
    }
    Ok(best)
}

/// Sampled upper estimate of the conductance for spaces too large to
/// enumerate: the min over all singletons, their complements, and `samples`
/// random subsets. An estimate from above — adequate for spot checks, not a
/// certificate.
pub fn conductance_sampled(p: &DenseMatrix, pi: &[f64], samples: u64, seed: u64) -> f64 {
    let n = p.n;
    let ratio = |subset: &[bool]| -> Option<f64> {
        let mass: f64 = (0..n).filter(|&i| subset[i]).map(|i| pi[i]).sum();
        if mass <= 0.0 || mass > 0.5 {
            return None;
        }
        let mut flow = 0.0;
        for i in 0..n {
            if !subset[i] {
                continue;
            }
            for j in 0..n {
                if !subset[j] {
                    flow += pi[i] * p.get(i, j);
                }
            }
        }
        Some(flow / mass)
    };

    let mut best = f64::INFINITY;
    let mut consider = |subset: &[bool]| {
        if let Some(r) = ratio(subset) {
            best = best.min(r);
        }
        let flipped: Vec<bool> = subset.iter().map(|b| !b).collect();
        if let Some(r) = ratio(&flipped) {
            best = best.min(r);
        }
    };

    for i in 0..n {
        let mut subset = vec![false; n];
        subset[i] = true;
        consider(&subset);
    }
    let mut rng = CounterRng::from_words(&[seed, rng::TAG_MUGD, 0x5e75]);
    for _ in 0..samples {
        let subset: Vec<bool> = (0..n).map(|_| rng.next_u64() & 1 == 1).collect();
        consider(&subset);
    }
    best
}

/// Closed-form mixing-time bound for multi-update Glauber dynamics on a graph
/// with `n_vertices` vertices and maximum weight `w_max`:
/// 2^(6 n) * exp(4 n w_max). Overflows to +infinity.
pub fn mugd_mixing_bound(n_vertices: usize, w_max: f64) -> f64 {
    let n = n_vertices as f64;
    // Overflow saturates to the +infinity marker.
    (6.0 * n).exp2() * (4.0 * n * w_max).exp()
}

// ── Free energy and low-weight mass ─────────────────────────────────────────

/// F(mu, t) = E_mu\[t\] + H(mu) with natural-log entropy.
pub fn free_energy(mu: &[f64], t: &[f64]) -> f64 {
    let mut f = 0.0;
    for (&m, &ti) in mu.iter().zip(t) {
        if m > 0.0 {
            f += m * ti - m * m.ln();
        }
    }
    f
}

/// The unique maximizer of the free energy: mu*(X) = exp(T(X)) / Z. Its value
/// is log Z.
pub fn free_energy_maximizer(t: &[f64]) -> Vec<f64> {
    softmax(t)
}

/// log Z for the exponent vector t (the maximal free energy).
pub fn log_partition(t: &[f64]) -> f64 {
    let shift = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = t.iter().map(|&e| (e - shift).exp()).sum();
    shift + sum.ln()
}

/// Stationary mass of the low-weight set K = {X : W(X) <= (1-eps) W*} and
/// the bound log|states| / (eps W*). The bound is undefined when W* = 0.
pub fn low_weight_mass(
    weights: &[f64],
    epsilon: f64,
    n_ports: usize,
) -> Result<(f64, Option<f64>)> {
    let states = enumerate_matchings(n_ports)?;
    let state_weights: Vec<f64> = states.iter().map(|x| x.weight(weights)).collect();
    let w_star = state_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let pi = softmax(&state_weights);
    let mass: f64 = state_weights
        .iter()
        .zip(&pi)
        .filter(|(&w, _)| w <= (1.0 - epsilon) * w_star)
        .map(|(_, &p)| p)
        .sum();
    let bound = if w_star > 0.0 {
        Some((states.len() as f64).ln() / (epsilon * w_star))
    } else {
        None
    };
    Ok((mass, bound))
}

/// The per-slot drift coefficient: sum over cells of f'(Q~(n)) + f'(Q~(n+1)).
pub fn alpha_n(qtilde_now: &[f64], qtilde_next: &[f64], f: WeightFn) -> f64 {
    assert_eq!(qtilde_now.len(), qtilde_next.len());
    qtilde_now
        .iter()
        .zip(qtilde_next)
        .map(|(&a, &b)| f.deriv(a) + f.deriv(b))
        .sum()
}

// ── Abstract multi-update Glauber sampler ───────────────────────────────────

/// Simulate the abstract schedule chain (no queues or buffers): each slot
/// draws the shared permutation, and every selected cell with a clear
/// neighborhood activates with its cell probability. Returns post-burn-in
/// state frequencies in canonical state order.
pub fn simulate_mugd(
    weights: &[f64],
    n_ports: usize,
    slots: u64,
    burn_in: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    guard_ports(n_ports)?;
    assert!(slots > burn_in);
    let n = n_ports;
    let states = enumerate_matchings(n)?;
    let masks: Vec<u32> = states.iter().map(|m| state_mask(m, n)).collect();
    let index: HashMap<u32, usize> = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let p_cell: Vec<f64> = weights.iter().map(|&w| activation_probability(w)).collect();

    let mut mask = 0u32;
    let mut rows = 0u32;
    let mut cols = 0u32;
    let mut counts = vec![0u64; states.len()];
    for slot in 0..slots {
        let h = permutation(seed, slot, n);
        for i in 0..n {
            let j = h.col(i);
            let bit = 1 << (i * n + j);
            if mask & bit != 0 {
                // Selected and active: keep with probability p.
                if rng::coin(seed, slot, i, j) >= p_cell[i * n + j] {
                    mask &= !bit;
                    rows &= !(1 << i);
                    cols &= !(1 << j);
                }
            } else if rows & (1 << i) == 0 && cols & (1 << j) == 0 {
                // Clear neighborhood: activate with probability p.
                if rng::coin(seed, slot, i, j) < p_cell[i * n + j] {
                    mask |= bit;
                    rows |= 1 << i;
                    cols |= 1 << j;
                }
            }
        }
        if slot >= burn_in {
            counts[index[&mask]] += 1;
        }
    }
    let total = (slots - burn_in) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Convenience bundle: states, transition matrix, and both stationary
/// computations for one weight setting.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub n_ports: usize,
    pub states: Vec<Matching>,
    pub weights: Vec<f64>,
    pub p: DenseMatrix,
    pub pi: Vec<f64>,
}

impl ChainModel {
    pub fn build(weights: Vec<f64>, n_ports: usize) -> Result<Self> {
        let states = enumerate_matchings(n_ports)?;
        let p = transition_matrix(&weights, n_ports)?;
        let sums = p.row_sums();
        for (i, s) in sums.iter().enumerate() {
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Numerical(format!(
                    "transition row {i} sums to {s}, expected 1"
                )));
            }
        }
        let pi = stationary_distribution(&p)?;
        Ok(ChainModel {
            n_ports,
            states,
            weights,
            p,
            pi,
        })
    }

    /// Index of a schedule in canonical order.
    pub fn state_index(&self, x: &Matching) -> Option<usize> {
        self.states.iter().position(|s| s == x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_counts() {
        assert_eq!(enumerate_matchings(1).unwrap().len(), 2);
        assert_eq!(enumerate_matchings(2).unwrap().len(), 7);
        assert_eq!(enumerate_matchings(3).unwrap().len(), 34);
        assert_eq!(enumerate_matchings(4).unwrap().len(), 209);
        assert!(enumerate_matchings(6).is_err());
    }

    #[test]
    fn single_port_chain_is_two_state_glauber() {
        let w = 0.7;
        let p = transition_matrix(&[w], 1).unwrap();
        let pa = activation_probability(w);
        // State order: empty, then {(0,0)}.
        assert!((p.get(0, 1) - pa).abs() < 1e-15);
        assert!((p.get(0, 0) - (1.0 - pa)).abs() < 1e-15);
        assert!((p.get(1, 0) - (1.0 - pa)).abs() < 1e-15);
        assert!((p.get(1, 1) - pa).abs() < 1e-15);
    }

    #[test]
    fn structural_zeros_for_conflicting_moves() {
        // A symmetric difference with two cells sharing a row or column fits
        // in no permutation, so those transitions carry zero probability.
        let p = transition_matrix(&[0.3, 0.9, 0.1, 0.7], 2).unwrap();
        let states = enumerate_matchings(2).unwrap();
        for (a, xa) in states.iter().enumerate() {
            for (b, xb) in states.iter().enumerate() {
                let mut delta: Vec<(usize, usize)> =
                    xa.pairs().filter(|&(i, j)| !xb.contains(i, j)).collect();
                delta.extend(xb.pairs().filter(|&(i, j)| !xa.contains(i, j)));
                let conflict = delta
                    .iter()
                    .enumerate()
                    .any(|(k, &(i1, j1))| delta[..k].iter().any(|&(i2, j2)| i1 == i2 || j1 == j2));
                if conflict {
                    assert_eq!(p.get(a, b), 0.0, "states {a} -> {b}");
                }
            }
        }
    }

    #[test]
    fn formula_matches_process_expansion() {
        for (weights, n) in [
            (vec![0.4], 1usize),
            (vec![0.0; 4], 2),
            (vec![1.0, 2.0, 0.5, 1.5], 2),
            (vec![0.3, 1.2, 0.8, 2.0, 0.1, 0.6, 1.4, 0.9, 0.2], 3),
        ] {
            let a = transition_matrix(&weights, n).unwrap();
            let b = transition_matrix_by_expansion(&weights, n).unwrap();
            for i in 0..a.n {
                for j in 0..a.n {
                    assert!(
                        (a.get(i, j) - b.get(i, j)).abs() < 1e-12,
                        "n={n} entry ({i},{j}): {} vs {}",
                        a.get(i, j),
                        b.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let p = transition_matrix(&[1.0, 2.0, 0.5, 1.5], 2).unwrap();
        for s in p.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_matches_product_form() {
        for weights in [
            vec![0.0; 4],
            vec![1.0, 2.0, 0.5, 1.5],
            vec![3.0, 0.1, 0.1, 3.0],
        ] {
            let model = ChainModel::build(weights.clone(), 2).unwrap();
            let pf = product_form(&weights, 2).unwrap();
            for (a, b) in model.pi.iter().zip(&pf) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn uniform_weights_give_uniform_stationary() {
        let model = ChainModel::build(vec![0.0; 4], 2).unwrap();
        for &p in &model.pi {
            assert!((p - 1.0 / 7.0).abs() < 1e-12);
        }
        // Single port: pi({(0,0)}) = e^W / (1 + e^W).
        let model1 = ChainModel::build(vec![0.0], 1).unwrap();
        assert!((model1.pi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_form_argmax_is_max_weight_schedule() {
        let weights = vec![3.0, 1.0, 2.0, 4.0];
        let pf = product_form(&weights, 2).unwrap();
        let states = enumerate_matchings(2).unwrap();
        let argmax = pf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let best_weight = states
            .iter()
            .map(|x| x.weight(&weights))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((states[argmax].weight(&weights) - best_weight).abs() < 1e-12);
    }

    #[test]
    fn detailed_balance_holds_and_detector_fires() {
        let model = ChainModel::build(vec![1.0, 2.0, 0.5, 1.5], 2).unwrap();
        assert!(detailed_balance_residual(&model.p, &model.pi) <= 1e-12);
        // Perturb one transition out of the heaviest state; the detector must
        // light up at pi_max * 1e-3, well above 1e-4.
        let heaviest = model
            .pi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let mut bad = model.p.clone();
        let j = (heaviest + 1) % 7;
        bad.set(heaviest, j, bad.get(heaviest, j) + 1e-3);
        assert!(detailed_balance_residual(&bad, &model.pi) >= 1e-4);
    }

    #[test]
    fn reducible_chain_rejected() {
        let mut p = DenseMatrix::zeros(2);
        p.set(0, 0, 1.0);
        p.set(1, 1, 1.0);
        assert!(matches!(
            stationary_distribution(&p),
            Err(Error::ReducibleChain)
        ));
    }

    #[test]
    fn sign_error_in_exponent_caught_by_detailed_balance() {
        // Mutation check: a distribution built with negated exponents is far
        // from balancing the transition matrix.
        let weights = vec![1.0, 2.0, 0.5, 1.5];
        let p = transition_matrix(&weights, 2).unwrap();
        let negated: Vec<f64> = weights.iter().map(|w| -w).collect();
        let bad_pi = product_form(&negated, 2).unwrap();
        assert!(detailed_balance_residual(&p, &bad_pi) > 1e-3);
        assert!(stationary_residual(&p, &bad_pi) > 1e-3);
    }

    #[test]
    fn distances_basics() {
        let mu = [0.5, 0.5];
        assert_eq!(tv_distance(&mu, &mu), 0.0);
        assert_eq!(chi2_distance(&mu, &mu), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert!(chi2_distance(&[0.0, 1.0], &[1.0, 0.0]).is_infinite());
        // Pythagorean check for the weighted norm.
        let nu = [3.0, 4.0];
        let w = [1.0, 1.0];
        assert!((weighted_norm(&nu, &w) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_dominates_twice_tv() {
        let mut rng = CounterRng::new(11);
        for _ in 0..1000 {
            let mu = random_distribution(&mut rng, 7);
            let nu = random_distribution(&mut rng, 7);
            let chi = chi2_distance(&nu, &mu);
            let tv = tv_distance(&mu, &nu);
            assert!(chi >= 2.0 * tv - 1e-12, "chi {chi} < 2 tv {tv}");
        }
    }

    fn random_distribution(rng: &mut CounterRng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.unit_f64() + 1e-3).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / z).collect()
    }

    #[test]
    fn matrix_norm_identity_and_homogeneity() {
        let mu = vec![0.25, 0.5, 0.25];
        let id = DenseMatrix::identity(3);
        assert!((matrix_norm(&id, &mu) - 1.0).abs() < 1e-10);
        let model = ChainModel::build(vec![0.7, 0.2, 1.1, 0.4], 2).unwrap();
        let norm = matrix_norm(&model.p, &model.pi);
        let scaled = matrix_norm(&model.p.scale(-2.5), &model.pi);
        assert!((scaled - 2.5 * norm).abs() < 1e-9);
    }

    #[test]
    fn matrix_norm_equals_emax_for_reversible_chain() {
        for weights in [vec![0.0; 4], vec![1.0, 2.0, 0.5, 1.5]] {
            let model = ChainModel::build(weights, 2).unwrap();
            let e_max = spectral_gap_emax(&model.p, &model.pi).unwrap();
            let norm = matrix_norm(&model.p, &model.pi);
            assert!((norm - e_max).abs() < 1e-8, "norm {norm} vs e_max {e_max}");
        }
    }

    #[test]
    fn two_state_spectral_quantities() {
        // p = q = 1/2: eigenvalues 1 and 0.
        let p = DenseMatrix::from_rows(2, vec![0.5, 0.5, 0.5, 0.5]);
        let pi = vec![0.5, 0.5];
        let e_max = spectral_gap_emax(&p, &pi).unwrap();
        assert!(e_max.abs() < 1e-12);
        assert!((mixing_time(e_max) - 1.0).abs() < 1e-12);
        // Conductance: any split has flow 1/4 and mass 1/2.
        let phi = conductance(&p, &pi).unwrap();
        assert!((phi - 0.5).abs() < 1e-12);
        assert!(e_max <= 1.0 - phi * phi / 2.0);
    }

    #[test]
    fn mixing_slots_formula() {
        assert_eq!(mixing_slots(0.5, 0.25, 0.01), 8);
    }

    #[test]
    fn chi2_below_delta_at_mixing_horizon() {
        // The computed slot count really does bring every worst-case start
        // within delta in chi-square distance.
        let model = ChainModel::build(vec![0.7, 0.2, 1.1, 0.4], 2).unwrap();
        let e_max = spectral_gap_emax(&model.p, &model.pi).unwrap();
        let pi_min = model.pi.iter().cloned().fold(f64::INFINITY, f64::min);
        let delta = 0.01;
        let horizon = mixing_slots(e_max, pi_min, delta);
        for start in 0..7 {
            let mut mu = vec![0.0; 7];
            mu[start] = 1.0;
            for _ in 0..horizon {
                mu = model.p.mul_left(&mu);
            }
            let d = chi2_distance(&mu, &model.pi);
            assert!(
                d <= delta,
                "start {start}: chi2 {d} above {delta} at {horizon}"
            );
        }
    }

    #[test]
    fn matrix_norm_submultiplicative_for_powers() {
        // Two reversible kernels sharing a stationary law compose with norm
        // at most the product; checked on P and P^2.
        let model = ChainModel::build(vec![0.9, 0.1, 0.6, 1.2], 2).unwrap();
        let norm_p = matrix_norm(&model.p, &model.pi);
        let p2 = model.p.matmul(&model.p);
        let norm_p2 = matrix_norm(&p2, &model.pi);
        assert!(norm_p2 <= norm_p * norm_p + 1e-12);
    }

    #[test]
    fn chi2_decay_follows_emax_power() {
        // Iterate mu P^t from a point mass; the chi-square distance to pi is
        // bounded by e_max^t times the initial distance.
        let model = ChainModel::build(vec![0.0; 4], 2).unwrap();
        let e_max = spectral_gap_emax(&model.p, &model.pi).unwrap();
        let mut mu = vec![0.0; 7];
        mu[6] = 1.0;
        let d0 = chi2_distance(&mu, &model.pi);
        for t in 1..=50 {
            mu = model.p.mul_left(&mu);
            let d = chi2_distance(&mu, &model.pi);
            assert!(
                d <= e_max.powi(t) * d0 + 1e-12,
                "t={t}: {d} > {} * {d0}",
                e_max.powi(t)
            );
        }
    }

    #[test]
    fn conductance_bound_on_small_chains() {
        let mut rng = CounterRng::new(21);
        for _ in 0..25 {
            let weights: Vec<f64> = (0..4).map(|_| rng.unit_f64() * 2.0).collect();
            let model = ChainModel::build(weights, 2).unwrap();
            let e_max = spectral_gap_emax(&model.p, &model.pi).unwrap();
            let phi = conductance(&model.p, &model.pi).unwrap();
            assert!(
                e_max <= 1.0 - phi * phi / 2.0 + 1e-12,
                "e_max {e_max} vs phi {phi}"
            );
        }
    }

    #[test]
    fn mixing_bound_anchors() {
        assert_eq!(mugd_mixing_bound(4, 0.0), 16_777_216.0);
        assert!(mugd_mixing_bound(4, 1.0) > mugd_mixing_bound(4, 0.5));
        assert!(mugd_mixing_bound(100, 50.0).is_infinite());
        // The bound dominates the true mixing time on computable instances.
        for weights in [vec![0.0], vec![1.5]] {
            let model = ChainModel::build(weights.clone(), 1).unwrap();
            let e_max = spectral_gap_emax(&model.p, &model.pi).unwrap();
            let w_max = weights.iter().cloned().fold(0.0, f64::max);
            assert!(mixing_time(e_max) <= mugd_mixing_bound(1, w_max));
        }
    }

    #[test]
    fn free_energy_maximizer_and_value() {
        // T = 0 over 7 states: maximum is log 7 at the uniform distribution.
        let t = vec![0.0; 7];
        let mu_star = free_energy_maximizer(&t);
        for &m in &mu_star {
            assert!((m - 1.0 / 7.0).abs() < 1e-12);
        }
        let f_star = free_energy(&mu_star, &t);
        assert!((f_star - 7f64.ln()).abs() < 1e-12);
        assert!((f_star - log_partition(&t)).abs() < 1e-12);

        // Random distributions never beat the maximizer.
        let t: Vec<f64> = vec![0.3, 1.9, -0.4, 0.0, 2.2, 1.1, 0.5];
        let mu_star = free_energy_maximizer(&t);
        let f_star = free_energy(&mu_star, &t);
        assert!((f_star - log_partition(&t)).abs() < 1e-10);
        let mut rng = CounterRng::new(33);
        for _ in 0..100 {
            let mu = random_distribution(&mut rng, 7);
            assert!(free_energy(&mu, &t) <= f_star + 1e-12);
        }
        // Point mass on the argmax of T has free energy exactly max T.
        let argmax = 4;
        let mut point = vec![0.0; 7];
        point[argmax] = 1.0;
        assert!((free_energy(&point, &t) - 2.2).abs() < 1e-15);
    }

    #[test]
    fn low_weight_mass_single_port() {
        // W = 5, eps = 0.5: K = {empty}, pi(K) = 1/(1+e^5); bound = ln 2 / 2.5.
        let (mass, bound) = low_weight_mass(&[5.0], 0.5, 1).unwrap();
        assert!((mass - 1.0 / (1.0 + 5f64.exp())).abs() < 1e-12);
        let bound = bound.unwrap();
        assert!((bound - 2f64.ln() / 2.5).abs() < 1e-12);
        assert!(mass <= bound);
    }

    #[test]
    fn low_weight_mass_excludes_perfect_matchings() {
        // Uniform weight 10 on a 2x2 switch: both perfect matchings have
        // weight 20; everything else is at most 10 <= 0.9 * 20.
        let (mass, bound) = low_weight_mass(&[10.0; 4], 0.1, 2).unwrap();
        let pf = product_form(&[10.0; 4], 2).unwrap();
        let states = enumerate_matchings(2).unwrap();
        let expected: f64 = states
            .iter()
            .zip(&pf)
            .filter(|(x, _)| x.size() < 2)
            .map(|(_, &p)| p)
            .sum();
        assert!((mass - expected).abs() < 1e-12);
        assert!(mass <= bound.unwrap());
    }

    #[test]
    fn low_weight_mass_undefined_for_zero_weights() {
        let (mass, bound) = low_weight_mass(&[0.0; 4], 0.5, 2).unwrap();
        assert!(bound.is_none());
        assert!(mass > 0.0);
    }

    #[test]
    fn alpha_n_plain_log_anchor() {
        // With f = log(1+x), f' = 1/(1+x); all Q~ = 9 on a 2x2 switch gives
        // alpha = 8 * 0.1.
        let q = vec![9.0; 4];
        let a = alpha_n(&q, &q, WeightFn::PlainLog);
        assert!((a - 0.8).abs() < 1e-12);
        // The production f sits strictly below, and vanishes in the limit.
        let ap = alpha_n(&q, &q, WeightFn::LogOverDamping);
        assert!(ap < 0.8);
        let huge = vec![1e12; 4];
        assert!(alpha_n(&huge, &huge, WeightFn::LogOverDamping) < 1e-9);
    }

    #[test]
    fn mugd_single_port_matches_activation() {
        let w = 1.3;
        let freq = simulate_mugd(&[w], 1, 200_000, 1_000, 42).unwrap();
        let p = activation_probability(w);
        let sigma = (p * (1.0 - p) / 199_000f64).sqrt();
        // Autocorrelated samples; allow a wide band.
        assert!((freq[1] - p).abs() < 10.0 * sigma, "{} vs {p}", freq[1]);
    }

    #[test]
    fn mugd_matches_stationary_for_random_weights() {
        let weights = vec![0.8, 0.3, 1.1, 0.5];
        let model = ChainModel::build(weights.clone(), 2).unwrap();
        let freq = simulate_mugd(&weights, 2, 400_000, 10_000, 7).unwrap();
        let tv = tv_distance(&freq, &model.pi);
        assert!(tv <= 0.02, "tv = {tv}");
    }
}
