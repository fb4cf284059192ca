//! Exact enumeration-based ground truth for small graphs: the full DAG
//! posterior, exact edge-inclusion probabilities, and reference causal-effect
//! posterior means. Used by the acceptance suite to validate the sampler.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::causal::{gamma_v, CausalQuery};
use crate::dag::Dag;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::{mix64, sample_theta};
use crate::priors::{log_dag_prior, DagPriorParams, DirichletHyper};
use crate::scores::ScoreCache;
use crate::summaries::PpiMatrix;

/// Hard cap on exact enumeration; the DAG count explodes beyond this.
pub const MAX_ENUM_NODES: usize = 5;

/// All DAGs on `q <= 5` nodes, enumerated by assigning each unordered node
/// pair one of {absent, forward, backward} and filtering out cyclic graphs.
pub fn enumerate_dags(q: usize) -> Result<Vec<Dag>> {
    if q == 0 || q > MAX_ENUM_NODES {
        return Err(Error::config(format!(
            "exact enumeration supports 1..={MAX_ENUM_NODES} nodes, got {q}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..q)
        .flat_map(|u| ((u + 1)..q).map(move |v| (u, v)))
        .collect();
    let m = pairs.len();
    let total = 3usize.pow(m as u32);
    let mut out = Vec::new();
    let mut edges = Vec::with_capacity(m);
    for code in 0..total {
        edges.clear();
        let mut rem = code;
        for &(u, v) in &pairs {
            match rem % 3 {
                0 => {}
                1 => edges.push((u, v)),
                _ => edges.push((v, u)),
            }
            rem /= 3;
        }
        if crate::dag::is_acyclic(q, &edges)? {
            out.push(Dag::from_edges(q, &edges)?);
        }
    }
    Ok(out)
}

/// The exact posterior over all DAGs: log unnormalized scores and normalized
/// probabilities (log-sum-exp).
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub entries: Vec<(Dag, f64, f64)>,
}

impl ExactPosterior {
    pub fn q(&self) -> usize {
        self.entries.first().map_or(0, |(d, _, _)| d.q())
    }

    /// Posterior probability of each directed edge.
    pub fn ppi(&self) -> PpiMatrix {
        let q = self.q();
        let mut m = PpiMatrix::zeros(q);
        for (dag, _, prob) in &self.entries {
            for (u, v) in dag.edges() {
                m.set(u, v, m.get(u, v) + prob);
            }
        }
        m
    }

    /// Posterior law of the edge count, indexed 0..=q(q-1)/2.
    pub fn edge_count_distribution(&self) -> Vec<f64> {
        let q = self.q();
        let mut out = vec![0.0; q * (q - 1) / 2 + 1];
        for (dag, _, prob) in &self.entries {
            out[dag.edge_count()] += prob;
        }
        out
    }

    pub fn prob_of(&self, dag: &Dag) -> f64 {
        self.entries
            .iter()
            .find(|(d, _, _)| d == dag)
            .map_or(0.0, |&(_, _, p)| p)
    }
}

/// Scores every DAG with the closed-form marginal likelihood plus the
/// skeleton prior and normalizes in log space.
pub fn exact_posterior(
    ds: &Dataset,
    hyper: &DirichletHyper,
    dag_prior: &DagPriorParams,
) -> Result<ExactPosterior> {
    let dags = enumerate_dags(ds.q())?;
    let mut cache = ScoreCache::new(ds, *hyper, crate::data::DEFAULT_CACHE_CAP);
    let mut logs = Vec::with_capacity(dags.len());
    for dag in &dags {
        logs.push(cache.dag_score(dag)? + log_dag_prior(dag, dag_prior));
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    let entries = dags
        .into_iter()
        .zip(&logs)
        .map(|(dag, &l)| (dag, l, ((l - max).exp()) / total))
        .collect();
    Ok(ExactPosterior { entries })
}

/// Reference value and Monte Carlo standard error for the model-averaged
/// causal effect.
#[derive(Debug, Clone, Copy)]
pub struct OracleEffect {
    pub mean: f64,
    pub se: f64,
}

/// The posterior-mean causal effect by exhaustive model averaging: for each
/// DAG, average the effect over conjugate theta draws, then mix with the
/// exact posterior weights. The theta-level integral has no closed form
/// (the effect is nonlinear in theta), hence the per-DAG sampling.
pub fn exact_causal_mean(
    ds: &Dataset,
    query: &CausalQuery,
    hyper: &DirichletHyper,
    dag_prior: &DagPriorParams,
    theta_draws_per_dag: usize,
    seed: u64,
) -> Result<OracleEffect> {
    if theta_draws_per_dag == 0 {
        return Err(Error::config("need at least one theta draw per DAG"));
    }
    query.validate(&ds.cards())?;
    let posterior = exact_posterior(ds, hyper, dag_prior)?;
    let mut mean = 0.0;
    let mut var = 0.0;
    for (idx, (dag, _, prob)) in posterior.entries.iter().enumerate() {
        if *prob == 0.0 {
            continue;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(mix64(seed ^ (idx as u64) << 17));
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..theta_draws_per_dag {
            let theta = sample_theta(ds, dag, hyper, &mut rng)?;
            let g = gamma_v(&theta, dag, query)?.value;
            acc += g;
            acc2 += g * g;
        }
        let t = theta_draws_per_dag as f64;
        let dag_mean = acc / t;
        let dag_var = (acc2 / t - dag_mean * dag_mean).max(0.0);
        mean += prob * dag_mean;
        var += prob * prob * dag_var / t;
    }
    Ok(OracleEffect {
        mean,
        se: var.sqrt(),
    })
}
