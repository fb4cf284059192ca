//! The PAS reversible-jump sampler over (DAG, theta): a Metropolis-Hastings
//! structure update whose acceptance ratio integrates out the locally
//! changed families in closed form, alternated with a conjugate Dirichlet
//! draw of the full DAG parameter.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::causal::{self, CausalQuery};
use crate::dag::{Dag, Operator};
use crate::data::{config_index, Dataset, DEFAULT_CACHE_CAP};
use crate::error::{Error, Result};
use crate::priors::{log_dag_prior, DagPriorParams, DirichletHyper};
use crate::scores::ScoreCache;

/// Stable 64-bit mixer (splitmix64 finalizer); used to derive independent
/// seeds so results do not depend on platform hashers.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix3(a: u64, b: u64, c: u64) -> u64 {
    mix64(mix64(mix64(a) ^ b) ^ c)
}

/// Draws Dirichlet(alpha) by normalizing independent Gamma draws. Retries on
/// the (astronomically rare) event that every component underflows to zero.
pub(crate) fn sample_dirichlet(alphas: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = alphas
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 && s.is_finite() {
            for x in &mut v {
                *x /= s;
            }
            return v;
        }
    }
}

/// One node's block of the DAG parameter: a conditional probability vector
/// per materialized parent configuration.
#[derive(Debug, Clone)]
pub struct ThetaNode {
    /// Sorted ascending; configuration indices are mixed-radix over this order.
    pub parents: Vec<usize>,
    pub parent_cards: Vec<usize>,
    pub card: usize,
    /// BDEu entry `a / |X_fa(j)|` for this family.
    pub prior_entry: f64,
    /// Conditionals for parent configurations observed in the data.
    pub table: BTreeMap<u64, Vec<f64>>,
}

/// A draw of the full DAG parameter. Conditionals exist for every parent
/// configuration observed in the data; any other configuration is drawn
/// lazily from its prior Dirichlet (its posterior, since it has zero counts)
/// using a deterministic per-(draw, node, configuration) sub-seed, so the
/// value is reproducible and identical on repeated lookups.
#[derive(Debug, Clone)]
pub struct Theta {
    nodes: Vec<ThetaNode>,
    lazy_seed: u64,
}

impl Theta {
    pub fn q(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, j: usize) -> &ThetaNode {
        &self.nodes[j]
    }

    pub fn cards(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.card).collect()
    }

    pub fn lazy_seed(&self) -> u64 {
        self.lazy_seed
    }

    /// Conditional probability vector of node `j` given parent configuration
    /// `k` (mixed-radix over the sorted parents).
    pub fn conditional(&self, j: usize, k: u64) -> Cow<'_, [f64]> {
        let node = &self.nodes[j];
        match node.table.get(&k) {
            Some(v) => Cow::Borrowed(v.as_slice()),
            None => {
                let mut rng = ChaCha12Rng::seed_from_u64(mix3(self.lazy_seed, j as u64, k));
                let alphas = vec![node.prior_entry; node.card];
                Cow::Owned(sample_dirichlet(&alphas, &mut rng))
            }
        }
    }

    /// Configuration index of node `j`'s parents in a full assignment.
    pub fn parent_config(&self, j: usize, assignment: &[usize]) -> u64 {
        let node = &self.nodes[j];
        config_index(&node.parents, &node.parent_cards, |p| assignment[p])
    }

    /// Builds a Theta with explicitly given conditionals (used by tests and
    /// hand-set examples). Tables must cover every parent configuration.
    pub fn from_tables(
        dag: &Dag,
        cards: &[usize],
        tables: Vec<BTreeMap<u64, Vec<f64>>>,
        hyper: &DirichletHyper,
    ) -> Result<Self> {
        if tables.len() != dag.q() || cards.len() != dag.q() {
            return Err(Error::input("tables/cards length mismatch"));
        }
        let mut nodes = Vec::with_capacity(dag.q());
        for j in 0..dag.q() {
            let parents: Vec<usize> = dag.parents(j).to_vec();
            let parent_cards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
            let card_fa = cards[j] as f64 * parent_cards.iter().map(|&c| c as f64).product::<f64>();
            nodes.push(ThetaNode {
                parents,
                parent_cards,
                card: cards[j],
                prior_entry: hyper.entry(card_fa),
                table: tables[j].clone(),
            });
        }
        Ok(Theta {
            nodes,
            lazy_seed: 0,
        })
    }
}

/// Which parts of the parameter draws a chain retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreTheta {
    /// Keep every theta draw (memory-heavy).
    All,
    /// Keep structure draws only.
    None,
    /// Keep only the causal-effect values of registered queries.
    CausalOnly,
}

/// Chain initialization.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitDag {
    Empty,
    Random { edge_prob: f64 },
    Fixed(Dag),
}

#[derive(Debug, Clone, Serialize)]
pub struct McmcConfig {
    /// Total sweeps S.
    pub iterations: usize,
    /// Burn-in B (discarded), must be < S.
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub hyper: DirichletHyper,
    pub dag_prior: DagPriorParams,
    pub init: InitDag,
    pub store_theta: StoreTheta,
    pub cache_cap: usize,
}

impl McmcConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        McmcConfig {
            iterations,
            burn_in,
            thin: 1,
            seed,
            hyper: DirichletHyper::default(),
            dag_prior: DagPriorParams::default(),
            init: InitDag::Empty,
            store_theta: StoreTheta::None,
            cache_cap: DEFAULT_CACHE_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iteration count must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than the iteration count ({}); the trace would be empty",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::config("thinning interval must be positive"));
        }
        if let InitDag::Random { edge_prob } = self.init {
            if !(edge_prob > 0.0 && edge_prob < 1.0) {
                return Err(Error::config("initial edge probability must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Per-query causal-effect values evaluated on each retained draw.
#[derive(Debug, Clone, Serialize)]
pub struct EffectSeries {
    pub query: CausalQuery,
    pub draws: Vec<f64>,
}

/// Posterior sample: retained DAG draws, optionally the matching theta draws
/// and/or per-draw causal effect evaluations, plus chain metadata.
#[derive(Debug, Clone)]
pub struct Trace {
    pub config: McmcConfig,
    pub dags: Vec<Dag>,
    pub thetas: Option<Vec<Theta>>,
    pub effects: Vec<EffectSeries>,
    pub accepted: u64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.dags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dags.is_empty()
    }

    pub fn q(&self) -> usize {
        self.dags.first().map_or(0, Dag::q)
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.config.iterations as f64
    }
}

/// Uniform draw from the valid-operator set plus the log proposal ratio
/// `log |O(D)| - log |O(D~)|`.
pub fn propose(dag: &Dag, rng: &mut impl Rng) -> Result<(Operator, f64)> {
    let ops = dag.valid_operators();
    if ops.is_empty() {
        return Err(Error::logic("no valid operators (single-node graph)"));
    }
    let op = ops[rng.random_range(0..ops.len())];
    let proposed = dag.apply(op)?;
    let backward = proposed.valid_operators().len();
    Ok((op, (ops.len() as f64).ln() - (backward as f64).ln()))
}

/// Log Metropolis-Hastings ratio for applying `op` to `dag`: family-score
/// differences over the affected nodes, the skeleton-prior difference, and
/// the proposal ratio. Insert/Delete touch one family; Reverse touches the
/// two endpoint families.
pub fn log_accept_ratio(
    ds: &Dataset,
    dag: &Dag,
    op: Operator,
    hyper: &DirichletHyper,
    dag_prior: &DagPriorParams,
) -> Result<f64> {
    let mut cache = ScoreCache::new(ds, *hyper, 64);
    let proposed = dag.apply(op)?;
    let forward = dag.valid_operators().len();
    let backward = proposed.valid_operators().len();
    log_accept_ratio_cached(&mut cache, dag, &proposed, op, dag_prior, forward, backward)
}

fn log_accept_ratio_cached(
    cache: &mut ScoreCache<'_>,
    dag: &Dag,
    proposed: &Dag,
    op: Operator,
    dag_prior: &DagPriorParams,
    forward_ops: usize,
    backward_ops: usize,
) -> Result<f64> {
    let mut delta = 0.0;
    for j in op.affected_nodes() {
        delta += cache.family_score(j, proposed.parents(j))?
            - cache.family_score(j, dag.parents(j))?;
    }
    delta += log_dag_prior(proposed, dag_prior) - log_dag_prior(dag, dag_prior);
    delta += (forward_ops as f64).ln() - (backward_ops as f64).ln();
    Ok(delta)
}

/// Samples theta from its full conditional given `dag`: independent
/// Dirichlet(a_k + N_k) draws for every observed parent configuration of
/// every node, plus a sub-seed for lazily drawn unobserved configurations.
pub fn sample_theta(
    ds: &Dataset,
    dag: &Dag,
    hyper: &DirichletHyper,
    rng: &mut impl Rng,
) -> Result<Theta> {
    let mut cache = ScoreCache::new(ds, *hyper, dag.q().max(64));
    sample_theta_cached(&mut cache, dag, rng)
}

pub(crate) fn sample_theta_cached(
    cache: &mut ScoreCache<'_>,
    dag: &Dag,
    rng: &mut impl Rng,
) -> Result<Theta> {
    let ds = cache.dataset();
    if dag.q() != ds.q() {
        return Err(Error::input("DAG and dataset dimension mismatch"));
    }
    let hyper = cache.hyper();
    let lazy_seed = rng.next_u64();
    let mut nodes = Vec::with_capacity(dag.q());
    for j in 0..dag.q() {
        let counts = cache.counts(j, dag.parents(j))?;
        let card_fa = counts.node_card as f64
            * counts
                .parent_cards
                .iter()
                .map(|&c| c as f64)
                .product::<f64>();
        let entry = hyper.entry(card_fa);
        let mut table = BTreeMap::new();
        for (&k, cells) in &counts.table {
            let alphas: Vec<f64> = cells.iter().map(|&n| entry + n as f64).collect();
            table.insert(k, sample_dirichlet(&alphas, rng));
        }
        nodes.push(ThetaNode {
            parents: counts.parents.clone(),
            parent_cards: counts.parent_cards.clone(),
            card: counts.node_card,
            prior_entry: entry,
            table,
        });
    }
    Ok(Theta { nodes, lazy_seed })
}

/// Runs the sampler and retains post-burn-in, thinned draws.
pub fn run_chain(ds: &Dataset, config: &McmcConfig) -> Result<Trace> {
    run_chain_with_queries(ds, config, &[])
}

/// As `run_chain`, additionally evaluating each query's causal effect on
/// every retained draw (regardless of whether theta itself is stored).
pub fn run_chain_with_queries(
    ds: &Dataset,
    config: &McmcConfig,
    queries: &[CausalQuery],
) -> Result<Trace> {
    config.validate()?;
    for query in queries {
        query.validate(&ds.cards())?;
    }
    let mut rng_dag = ChaCha12Rng::seed_from_u64(config.seed);
    // Separate stream for parameter draws keeps the structure chain
    // identical across store-theta modes.
    let mut rng_theta = ChaCha12Rng::seed_from_u64(mix3(config.seed, 0x7468_6574, 0));

    let mut dag = match &config.init {
        InitDag::Empty => Dag::empty(ds.q())?,
        InitDag::Random { edge_prob } => {
            crate::simgen::random_dag(ds.q(), *edge_prob, &mut rng_dag)?
        }
        InitDag::Fixed(d) => {
            if d.q() != ds.q() {
                return Err(Error::config("initial DAG has the wrong node count"));
            }
            d.clone()
        }
    };

    let mut cache = ScoreCache::new(ds, config.hyper, config.cache_cap);
    let store_all = config.store_theta == StoreTheta::All;
    let need_theta = store_all || !queries.is_empty();
    let mut dags = Vec::with_capacity(config.retained());
    let mut thetas: Option<Vec<Theta>> = store_all.then(Vec::new);
    let mut effects: Vec<EffectSeries> = queries
        .iter()
        .map(|&query| EffectSeries {
            query,
            draws: Vec::with_capacity(config.retained()),
        })
        .collect();
    let mut accepted = 0u64;

    for s in 0..config.iterations {
        let ops = dag.valid_operators();
        if !ops.is_empty() {
            let op = ops[rng_dag.random_range(0..ops.len())];
            let proposed = dag.apply(op)?;
            let backward = proposed.valid_operators().len();
            let log_r = log_accept_ratio_cached(
                &mut cache,
                &dag,
                &proposed,
                op,
                &config.dag_prior,
                ops.len(),
                backward,
            )?;
            let u: f64 = rng_dag.random();
            // Comparison in log space; exp(log_r) may overflow but ln u < 0.
            if u.ln() < log_r {
                dag = proposed;
                accepted += 1;
            }
        }

        if s >= config.burn_in && (s - config.burn_in) % config.thin == 0 {
            // The structure kernel never reads theta (the changed family is
            // integrated out), so drawing theta at retained sweeps yields the
            // same joint law as drawing it every sweep.
            if need_theta {
                let theta = sample_theta_cached(&mut cache, &dag, &mut rng_theta)?;
                if !queries.is_empty() {
                    let gammas = causal::gamma_batch(&theta, &dag, queries)?;
                    for (series, g) in effects.iter_mut().zip(gammas) {
                        series.draws.push(g.value);
                    }
                }
                if let Some(ts) = thetas.as_mut() {
                    ts.push(theta);
                }
            }
            dags.push(dag.clone());
        }
    }

    let trace = Trace {
        config: config.clone(),
        dags,
        thetas,
        effects,
        accepted,
    };
    debug_assert_eq!(trace.len(), config.retained());
    Ok(trace)
}
