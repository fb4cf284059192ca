//! Interventional distributions via the truncated factorization, per-draw
//! causal effects through parent adjustment, and posterior (BMA) summaries
//! of causal coefficients.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::mcmc::{mix64, Theta, Trace};

/// Largest joint state space enumerated exactly; larger models fall back to
/// forward (ancestral) Monte Carlo.
pub const EXACT_STATE_LIMIT: u64 = 1 << 22;

/// Default draw count of the Monte Carlo fallback.
pub const DEFAULT_MC_DRAWS: usize = 100_000;

/// A causal question: effect on `response` of moving `treatment` from level
/// `low` (reference) to level `high`, measured as the change in probability
/// that the response attains `benchmark`. For binary responses with
/// `benchmark = 1` this is the usual difference of interventional means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalQuery {
    pub response: usize,
    pub treatment: usize,
    pub high: usize,
    pub low: usize,
    pub benchmark: usize,
}

impl CausalQuery {
    /// Binary convention: treatment 1 vs 0, response benchmark 1.
    pub fn binary(response: usize, treatment: usize) -> Self {
        CausalQuery {
            response,
            treatment,
            high: 1,
            low: 0,
            benchmark: 1,
        }
    }

    pub fn validate(&self, cards: &[usize]) -> Result<()> {
        let q = cards.len();
        if self.response >= q || self.treatment >= q {
            return Err(Error::config("query node index out of range"));
        }
        if self.response == self.treatment {
            return Err(Error::config(
                "response and treatment must be distinct variables",
            ));
        }
        if self.high >= cards[self.treatment] || self.low >= cards[self.treatment] {
            return Err(Error::config("treatment level out of range"));
        }
        if self.benchmark >= cards[self.response] {
            return Err(Error::config("benchmark level out of range"));
        }
        Ok(())
    }
}

/// Dense joint probability table over all variables, mixed-radix indexed
/// with variable 0 as the least significant digit.
#[derive(Debug, Clone)]
pub struct JointTable {
    pub cards: Vec<usize>,
    pub probs: Vec<f64>,
}

impl JointTable {
    pub fn state_space(cards: &[usize]) -> Option<u64> {
        let mut acc: u64 = 1;
        for &c in cards {
            acc = acc.checked_mul(c as u64)?;
            if acc > EXACT_STATE_LIMIT {
                return Some(acc);
            }
        }
        Some(acc)
    }

    pub fn index(&self, assignment: &[usize]) -> usize {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for (&x, &c) in assignment.iter().zip(&self.cards) {
            idx += x * stride;
            stride *= c;
        }
        idx
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        self.cards
            .iter()
            .map(|&c| {
                let digit = idx % c;
                idx /= c;
                digit
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginal probability of variable `j` taking each level.
    pub fn marginal(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cards[j]];
        let mut digits = vec![0usize; self.cards.len()];
        for &p in &self.probs {
            out[digits[j]] += p;
            increment(&mut digits, &self.cards);
        }
        out
    }
}

#[inline]
fn increment(digits: &mut [usize], cards: &[usize]) {
    for (d, &c) in digits.iter_mut().zip(cards) {
        *d += 1;
        if *d < c {
            return;
        }
        *d = 0;
    }
}

/// Dense per-node conditional tables materialized from a theta draw
/// (including lazily drawn unobserved configurations).
struct DenseConditionals {
    /// For each node, `table[k * card + m] = P(X_j = m | pa config k)`.
    tables: Vec<Vec<f64>>,
    parent_strides: Vec<Vec<(usize, u64)>>,
    cards: Vec<usize>,
}

impl DenseConditionals {
    fn build(theta: &Theta, dag: &Dag) -> Result<Self> {
        let q = theta.q();
        let cards = theta.cards();
        let mut tables = Vec::with_capacity(q);
        let mut parent_strides = Vec::with_capacity(q);
        for j in 0..q {
            let node = theta.node(j);
            debug_assert_eq!(node.parents.as_slice(), dag.parents(j));
            let mut space: u64 = 1;
            let mut strides = Vec::with_capacity(node.parents.len());
            for (&p, &c) in node.parents.iter().zip(&node.parent_cards) {
                strides.push((p, space));
                space = space
                    .checked_mul(c as u64)
                    .ok_or_else(|| Error::input("parent configuration space overflows"))?;
            }
            let mut table = vec![0.0; (space as usize) * node.card];
            for k in 0..space {
                let probs = theta.conditional(j, k);
                table[(k as usize) * node.card..(k as usize + 1) * node.card]
                    .copy_from_slice(&probs);
            }
            tables.push(table);
            parent_strides.push(strides);
        }
        Ok(DenseConditionals {
            tables,
            parent_strides,
            cards,
        })
    }

    #[inline]
    fn prob(&self, j: usize, assignment: &[usize]) -> f64 {
        let mut k = 0u64;
        for &(p, stride) in &self.parent_strides[j] {
            k += assignment[p] as u64 * stride;
        }
        self.tables[j][(k as usize) * self.cards[j] + assignment[j]]
    }

    #[inline]
    fn sample_level(&self, j: usize, assignment: &[usize], rng: &mut impl Rng) -> usize {
        let mut k = 0u64;
        for &(p, stride) in &self.parent_strides[j] {
            k += assignment[p] as u64 * stride;
        }
        let row = &self.tables[j][(k as usize) * self.cards[j]..(k as usize + 1) * self.cards[j]];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (m, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return m;
            }
        }
        row.len() - 1
    }
}

/// The observational joint induced by `(dag, theta)`, as a dense table.
/// Errors when the state space exceeds [`EXACT_STATE_LIMIT`].
pub fn observational_joint(theta: &Theta, dag: &Dag) -> Result<JointTable> {
    let cards = theta.cards();
    let space = JointTable::state_space(&cards)
        .filter(|&s| s <= EXACT_STATE_LIMIT)
        .ok_or_else(|| Error::input("joint state space exceeds the exact-computation limit"))?;
    let dense = DenseConditionals::build(theta, dag)?;
    let mut probs = vec![0.0; space as usize];
    let mut digits = vec![0usize; cards.len()];
    for slot in probs.iter_mut() {
        let mut p = 1.0;
        for j in 0..cards.len() {
            p *= dense.prob(j, &digits);
        }
        *slot = p;
        increment(&mut digits, &cards);
    }
    Ok(JointTable { cards, probs })
}

/// Interventional distribution `p(x | do(X_v = level))`: the truncated
/// factorization drops `v`'s factor and pins its value. Exact table when the
/// state space permits, otherwise a forward sampler over the mutilated DAG.
pub enum InterventionalDistribution<'a> {
    Exact(JointTable),
    Sampler(InterventionalSampler<'a>),
}

pub struct InterventionalSampler<'a> {
    theta: &'a Theta,
    dag: &'a Dag,
    pub node: usize,
    pub level: usize,
}

impl InterventionalSampler<'_> {
    /// One ancestral draw from the mutilated model.
    pub fn draw(&self, rng: &mut impl Rng) -> Vec<usize> {
        let dense = DenseConditionals::build(self.theta, self.dag).expect("state space checked");
        self.draw_with(&dense, rng)
    }

    fn draw_with(&self, dense: &DenseConditionals, rng: &mut impl Rng) -> Vec<usize> {
        let order = self.dag.topological_order();
        let mut x = vec![0usize; self.dag.q()];
        for &j in &order {
            x[j] = if j == self.node {
                self.level
            } else {
                dense.sample_level(j, &x, rng)
            };
        }
        x
    }
}

pub fn interventional_distribution<'a>(
    theta: &'a Theta,
    dag: &'a Dag,
    v: usize,
    level: usize,
) -> Result<InterventionalDistribution<'a>> {
    let cards = theta.cards();
    if v >= cards.len() || level >= cards[v] {
        return Err(Error::config("intervention node or level out of range"));
    }
    let space = JointTable::state_space(&cards);
    if space.is_some_and(|s| s <= EXACT_STATE_LIMIT) {
        let dense = DenseConditionals::build(theta, dag)?;
        let total = space.unwrap() as usize;
        let mut probs = vec![0.0; total];
        let mut digits = vec![0usize; cards.len()];
        for slot in probs.iter_mut() {
            if digits[v] == level {
                let mut p = 1.0;
                for j in 0..cards.len() {
                    if j != v {
                        p *= dense.prob(j, &digits);
                    }
                }
                *slot = p;
            }
            increment(&mut digits, &cards);
        }
        Ok(InterventionalDistribution::Exact(JointTable { cards, probs }))
    } else {
        Ok(InterventionalDistribution::Sampler(InterventionalSampler {
            theta,
            dag,
            node: v,
            level,
        }))
    }
}

/// A causal-effect evaluation. `se` is populated only by the Monte Carlo
/// fallback; `response_is_parent` flags the short-circuit case where the
/// response is a graphical parent of the treatment (the effect is exactly
/// zero because interventions cannot reach non-descendants).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaValue {
    pub value: f64,
    pub se: Option<f64>,
    pub response_is_parent: bool,
}

/// Evaluates the parent-adjustment form of the causal effect on a single
/// theta draw:
/// `sum_k [P(Y = b | X_v = high, pa = k) - P(Y = b | X_v = low, pa = k)] P(pa = k)`.
/// The two probabilities are derived from the theta-induced joint (they are
/// not components of theta). Exact summation when the joint fits in
/// [`EXACT_STATE_LIMIT`]; otherwise ancestral Monte Carlo with
/// [`DEFAULT_MC_DRAWS`] draws seeded deterministically from the theta draw.
pub fn gamma_v(theta: &Theta, dag: &Dag, query: &CausalQuery) -> Result<GammaValue> {
    gamma_v_with(theta, dag, query, EXACT_STATE_LIMIT, DEFAULT_MC_DRAWS)
}

pub fn gamma_v_with(
    theta: &Theta,
    dag: &Dag,
    query: &CausalQuery,
    exact_limit: u64,
    mc_draws: usize,
) -> Result<GammaValue> {
    let cards = theta.cards();
    query.validate(&cards)?;
    let v = query.treatment;
    let y = query.response;
    if dag.parents(v).contains(&y) {
        return Ok(GammaValue {
            value: 0.0,
            se: None,
            response_is_parent: true,
        });
    }
    let space = JointTable::state_space(&cards);
    if space.is_some_and(|s| s <= exact_limit) {
        gamma_exact(theta, dag, query)
    } else {
        let seed = mix64(theta.lazy_seed() ^ ((v as u64) << 32 | y as u64));
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        gamma_mc(theta, dag, query, mc_draws, &mut rng)
    }
}

/// Evaluates several queries on one draw with a single joint scan; the
/// chain runner calls this once per retained draw.
pub(crate) fn gamma_batch(
    theta: &Theta,
    dag: &Dag,
    queries: &[CausalQuery],
) -> Result<Vec<GammaValue>> {
    let cards = theta.cards();
    let space = JointTable::state_space(&cards);
    if !space.is_some_and(|s| s <= EXACT_STATE_LIMIT) {
        return queries.iter().map(|q| gamma_v(theta, dag, q)).collect();
    }
    struct Slot {
        pa: Vec<usize>,
        pa_cards: Vec<usize>,
        pa_prob: Vec<f64>,
        den: Vec<f64>,
        num: Vec<f64>,
        short_circuit: bool,
    }
    let mut slots = Vec::with_capacity(queries.len());
    for query in queries {
        query.validate(&cards)?;
        let pa: Vec<usize> = dag.parents(query.treatment).to_vec();
        let short_circuit = pa.contains(&query.response);
        let pa_cards: Vec<usize> = pa.iter().map(|&p| cards[p]).collect();
        let pa_space: usize = pa_cards.iter().product::<usize>().max(1);
        slots.push(Slot {
            pa,
            pa_cards,
            pa_prob: vec![0.0; pa_space],
            den: vec![0.0; pa_space * 2],
            num: vec![0.0; pa_space * 2],
            short_circuit,
        });
    }
    let dense = DenseConditionals::build(theta, dag)?;
    let total: usize = cards.iter().product();
    let mut digits = vec![0usize; cards.len()];
    for _ in 0..total {
        let mut p = 1.0;
        for j in 0..cards.len() {
            p *= dense.prob(j, &digits);
        }
        for (query, slot) in queries.iter().zip(slots.iter_mut()) {
            if slot.short_circuit {
                continue;
            }
            let mut k = 0usize;
            let mut stride = 1usize;
            for (&pn, &pc) in slot.pa.iter().zip(&slot.pa_cards) {
                k += digits[pn] * stride;
                stride *= pc;
            }
            slot.pa_prob[k] += p;
            let arm = if digits[query.treatment] == query.high {
                Some(0)
            } else if digits[query.treatment] == query.low {
                Some(1)
            } else {
                None
            };
            if let Some(a) = arm {
                slot.den[k * 2 + a] += p;
                if digits[query.response] == query.benchmark {
                    slot.num[k * 2 + a] += p;
                }
            }
        }
        increment(&mut digits, &cards);
    }
    Ok(slots
        .into_iter()
        .map(|slot| {
            if slot.short_circuit {
                return GammaValue {
                    value: 0.0,
                    se: None,
                    response_is_parent: true,
                };
            }
            let norm: f64 = slot.pa_prob.iter().sum();
            let mut gamma = 0.0;
            for k in 0..slot.pa_prob.len() {
                if slot.pa_prob[k] <= 0.0 {
                    continue;
                }
                let (d_hi, d_lo) = (slot.den[k * 2], slot.den[k * 2 + 1]);
                if d_hi <= 0.0 || d_lo <= 0.0 {
                    continue;
                }
                gamma += (slot.pa_prob[k] / norm) * (slot.num[k * 2] / d_hi - slot.num[k * 2 + 1] / d_lo);
            }
            GammaValue {
                value: gamma,
                se: None,
                response_is_parent: false,
            }
        })
        .collect())
}

fn gamma_exact(theta: &Theta, dag: &Dag, query: &CausalQuery) -> Result<GammaValue> {
    let cards = theta.cards();
    let dense = DenseConditionals::build(theta, dag)?;
    let v = query.treatment;
    let pa: Vec<usize> = dag.parents(v).to_vec();
    let pa_cards: Vec<usize> = pa.iter().map(|&p| cards[p]).collect();
    let pa_space: usize = pa_cards.iter().product::<usize>().max(1);

    let mut pa_prob = vec![0.0; pa_space];
    let mut den = vec![0.0; pa_space * 2];
    let mut num = vec![0.0; pa_space * 2];

    let total: usize = cards.iter().product();
    let mut digits = vec![0usize; cards.len()];
    for _ in 0..total {
        let mut p = 1.0;
        for j in 0..cards.len() {
            p *= dense.prob(j, &digits);
        }
        let mut k = 0usize;
        let mut stride = 1usize;
        for (&pn, &pc) in pa.iter().zip(&pa_cards) {
            k += digits[pn] * stride;
            stride *= pc;
        }
        pa_prob[k] += p;
        let arm = if digits[v] == query.high {
            Some(0)
        } else if digits[v] == query.low {
            Some(1)
        } else {
            None
        };
        if let Some(a) = arm {
            den[k * 2 + a] += p;
            if digits[query.response] == query.benchmark {
                num[k * 2 + a] += p;
            }
        }
        increment(&mut digits, &cards);
    }

    let norm: f64 = pa_prob.iter().sum();
    let mut gamma = 0.0;
    for k in 0..pa_space {
        if pa_prob[k] <= 0.0 {
            continue;
        }
        let (d_hi, d_lo) = (den[k * 2], den[k * 2 + 1]);
        if d_hi <= 0.0 || d_lo <= 0.0 {
            continue;
        }
        gamma += (pa_prob[k] / norm) * (num[k * 2] / d_hi - num[k * 2 + 1] / d_lo);
    }
    Ok(GammaValue {
        value: gamma,
        se: None,
        response_is_parent: false,
    })
}

fn gamma_mc(
    theta: &Theta,
    dag: &Dag,
    query: &CausalQuery,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<GammaValue> {
    use std::collections::HashMap;
    let dense = DenseConditionals::build(theta, dag)?;
    let order = dag.topological_order();
    let v = query.treatment;
    let pa: Vec<usize> = dag.parents(v).to_vec();
    let pa_cards: Vec<usize> = pa.iter().map(|&p| theta.node(p).card).collect();

    let batches = 10usize.min(draws.max(1));
    let per_batch = (draws / batches).max(1);
    let mut batch_means = Vec::with_capacity(batches);
    let mut x = vec![0usize; dag.q()];
    for _ in 0..batches {
        // tallies per parent config: [n_k, n_hi, n_lo, y_hi, y_lo]
        let mut tally: HashMap<u64, [f64; 5]> = HashMap::new();
        for _ in 0..per_batch {
            for &j in &order {
                x[j] = dense.sample_level(j, &x, rng);
            }
            let mut k = 0u64;
            let mut stride = 1u64;
            for (&pn, &pc) in pa.iter().zip(&pa_cards) {
                k += x[pn] as u64 * stride;
                stride *= pc as u64;
            }
            let t = tally.entry(k).or_default();
            t[0] += 1.0;
            if x[v] == query.high {
                t[1] += 1.0;
                if x[query.response] == query.benchmark {
                    t[3] += 1.0;
                }
            } else if x[v] == query.low {
                t[2] += 1.0;
                if x[query.response] == query.benchmark {
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
        batch_means.push(est);
    }
    let mean = batch_means.iter().sum::<f64>() / batches as f64;
    let var = batch_means
        .iter()
        .map(|m| (m - mean).powi(2))
        .sum::<f64>()
        / (batches as f64 - 1.0).max(1.0);
    Ok(GammaValue {
        value: mean,
        se: Some((var / batches as f64).sqrt()),
        response_is_parent: false,
    })
}

/// One causal effect per non-reference treatment level.
pub fn effect_battery(
    theta: &Theta,
    dag: &Dag,
    v: usize,
    y: usize,
    reference: usize,
    benchmark: usize,
) -> Result<Vec<((usize, usize), GammaValue)>> {
    let cards = theta.cards();
    if v >= cards.len() {
        return Err(Error::config("treatment node out of range"));
    }
    let mut out = Vec::new();
    for m in 0..cards[v] {
        if m == reference {
            continue;
        }
        let query = CausalQuery {
            response: y,
            treatment: v,
            high: m,
            low: reference,
            benchmark,
        };
        out.push(((m, reference), gamma_v(theta, dag, &query)?));
    }
    Ok(out)
}

/// Posterior summary of a causal coefficient across a trace.
#[derive(Debug, Clone, Serialize)]
pub struct CausalEstimate {
    pub mean: f64,
    pub sd: f64,
    /// `(probability, value)` pairs, ascending in probability.
    pub quantiles: Vec<(f64, f64)>,
    pub draws_used: usize,
}

impl CausalEstimate {
    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|(q, _)| (q - p).abs() < 1e-12)
            .map(|&(_, v)| v)
    }
}

/// Empirical quantile with linear interpolation between order statistics.
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Evaluates the per-draw effect over the whole trace and summarizes it.
/// The mean is the Bayesian-model-averaged point estimate. Uses the trace's
/// stored effect series when the query was registered at run time, otherwise
/// recomputes from stored theta draws.
pub fn bma_estimate(trace: &Trace, query: &CausalQuery) -> Result<CausalEstimate> {
    bma_estimate_with_quantiles(trace, query, &[0.05, 0.95])
}

pub fn bma_estimate_with_quantiles(
    trace: &Trace,
    query: &CausalQuery,
    probs: &[f64],
) -> Result<CausalEstimate> {
    if trace.is_empty() {
        return Err(Error::input("empty trace"));
    }
    let values: Vec<f64> = if let Some(series) =
        trace.effects.iter().find(|s| s.query == *query)
    {
        series.draws.clone()
    } else if let Some(thetas) = &trace.thetas {
        let mut vals = Vec::with_capacity(thetas.len());
        for (theta, dag) in thetas.iter().zip(&trace.dags) {
            vals.push(gamma_v(theta, dag, query)?.value);
        }
        vals
    } else {
        return Err(Error::config(
            "trace stores neither theta draws nor an effect series for this query; \
             rerun with store-theta set to all or causal-only",
        ));
    };
    Ok(summarize_draws(&values, probs))
}

pub fn summarize_draws(values: &[f64], probs: &[f64]) -> CausalEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut quantiles: Vec<(f64, f64)> = probs
        .iter()
        .map(|&p| (p, empirical_quantile(&sorted, p)))
        .collect();
    quantiles.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    CausalEstimate {
        mean,
        sd,
        quantiles,
        draws_used: n,
    }
}
