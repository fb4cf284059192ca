//! Independent oracles for the integration suites. These re-derive the
//! quantities under test from first principles and deliberately avoid the
//! library's computation paths (own indexing, own tallies).

use rand::prelude::*;

use catdag::{CausalQuery, GaussianSem, Theta};

/// Truncated-factorization contrast by exhaustive enumeration: for each
/// treatment arm, sum `1{X_y = benchmark} * prod_{j != v} theta(x_j | pa)`
/// over all joint cells with the treatment pinned. Own mixed-radix walk.
pub fn truncation_contrast(theta: &Theta, query: &CausalQuery) -> f64 {
    let q = theta.q();
    let cards: Vec<usize> = (0..q).map(|j| theta.node(j).card).collect();
    let total: usize = cards.iter().product();
    let arm_mean = |level: usize| -> f64 {
        let mut mass = 0.0;
        let mut hit = 0.0;
        for cell in 0..total {
            let mut rem = cell;
            let mut x = vec![0usize; q];
            for j in 0..q {
                x[j] = rem % cards[j];
                rem /= cards[j];
            }
            if x[query.treatment] != level {
                continue;
            }
            let mut p = 1.0;
            for j in 0..q {
                if j == query.treatment {
                    continue;
                }
                let node = theta.node(j);
                let mut k = 0u64;
                let mut stride = 1u64;
                for (&pn, &pc) in node.parents.iter().zip(&node.parent_cards) {
                    k += x[pn] as u64 * stride;
                    stride *= pc as u64;
                }
                p *= theta.conditional(j, k)[x[j]];
            }
            mass += p;
            if x[query.response] == query.benchmark {
                hit += p;
            }
        }
        assert!((mass - 1.0).abs() < 1e-9, "truncated mass {mass}");
        hit
    };
    arm_mean(query.high) - arm_mean(query.low)
}

/// Interventional-simulation oracle for the dichotomized-Gaussian ground
/// truth: forward-simulate the structural equations, stratify on the
/// treatment's parent sign pattern, and combine the stratum conditionals
/// with the parent-marginal weights (when the treatment has no parents this
/// is literally simulation of the mutilated model). Standard error from ten
/// independent batches.
pub fn interventional_sim_effect(
    sem: &GaussianSem,
    v: usize,
    y: usize,
    draws: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    use std::collections::HashMap;
    let pa: Vec<usize> = sem.dag().parents(v).to_vec();
    let batches = 10usize;
    let per_batch = (draws / batches).max(1);
    let mut z = vec![0.0; sem.q()];
    let mut means = Vec::with_capacity(batches);
    for _ in 0..batches {
        // per parent sign pattern: [n_k, n_v1, n_v0, n_y1v1, n_y1v0]
        let mut tally: HashMap<u64, [f64; 5]> = HashMap::new();
        for _ in 0..per_batch {
            sem.sample_z(rng, &mut z);
            let mut k = 0u64;
            for (bit, &p) in pa.iter().enumerate() {
                if z[p] >= 0.0 {
                    k |= 1 << bit;
                }
            }
            let t = tally.entry(k).or_default();
            t[0] += 1.0;
            let y1 = z[y] >= 0.0;
            if z[v] >= 0.0 {
                t[1] += 1.0;
                if y1 {
                    t[3] += 1.0;
                }
            } else {
                t[2] += 1.0;
                if y1 {
                    t[4] += 1.0;
                }
            }
        }
        let mut est = 0.0;
        for t in tally.values() {
            if t[1] > 0.0 && t[2] > 0.0 {
                est += (t[0] / per_batch as f64) * (t[3] / t[1] - t[4] / t[2]);
            }
        }
        means.push(est);
    }
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (mean, (var / batches as f64).sqrt())
}
