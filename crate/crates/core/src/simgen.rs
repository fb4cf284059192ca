//! Synthetic-scenario engine: random DAGs, Gaussian structural equation
//! models, dichotomized datasets, ground-truth causal effects via Gaussian
//! orthant probabilities, and the replicated benchmark runner.

use std::collections::{BTreeMap, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::causal::CausalQuery;
use crate::dag::Dag;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::{mix64, run_chain_with_queries, McmcConfig, StoreTheta};
use crate::priors::{DagPriorParams, DirichletHyper};
use crate::summaries::{abs_error, mpm, mpm_repaired, ppi, sen_spe, shd, Digraph};

/// Linear Gaussian data-generating process attached to a DAG: each node is a
/// coefficient-weighted sum of its parents plus independent Gaussian noise.
#[derive(Debug, Clone)]
pub struct GaussianSem {
    dag: Dag,
    /// Keyed by `(child, parent)`, exactly one entry per DAG edge.
    coeffs: BTreeMap<(usize, usize), f64>,
    variances: Vec<f64>,
    topo: Vec<usize>,
}

impl GaussianSem {
    pub fn new(
        dag: Dag,
        coeffs: BTreeMap<(usize, usize), f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        let q = dag.q();
        if variances.len() != q {
            return Err(Error::input("variance vector length mismatch"));
        }
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::input("noise variances must be positive"));
        }
        let mut expected = 0usize;
        for (u, v) in dag.edges() {
            if !coeffs.contains_key(&(v, u)) {
                return Err(Error::input(format!(
                    "missing coefficient for edge {} -> {}",
                    u + 1,
                    v + 1
                )));
            }
            expected += 1;
        }
        if coeffs.len() != expected {
            return Err(Error::input("coefficients must be keyed exactly by DAG edges"));
        }
        let topo = dag.topological_order();
        Ok(GaussianSem {
            dag,
            coeffs,
            variances,
            topo,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn q(&self) -> usize {
        self.dag.q()
    }

    pub fn coeff(&self, child: usize, parent: usize) -> f64 {
        self.coeffs[&(child, parent)]
    }

    /// One forward draw of the latent Gaussian vector.
    pub fn sample_z(&self, rng: &mut impl Rng, z: &mut [f64]) {
        for &j in &self.topo {
            let mut acc: f64 = 0.0;
            for &u in self.dag.parents(j) {
                acc += self.coeffs[&(j, u)] * z[u];
            }
            let noise: f64 = rng.sample(StandardNormal);
            z[j] = acc + self.variances[j].sqrt() * noise;
        }
    }
}

/// Order-consistent random DAG: with the identity topological order, each
/// edge `u -> j` (`u < j`) is included independently with probability `p`.
pub fn random_dag(q: usize, p: f64, rng: &mut impl Rng) -> Result<Dag> {
    if q == 0 {
        return Err(Error::input("node count must be positive"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::config("edge probability must lie in (0, 1]"));
    }
    let mut edges = Vec::new();
    for u in 0..q {
        for j in (u + 1)..q {
            if rng.random::<f64>() < p {
                edges.push((u, j));
            }
        }
    }
    Dag::from_edges(q, &edges)
}

/// Edge coefficients drawn uniformly from `[-1, -0.1] u [0.1, 1]` with unit
/// noise variances.
pub fn random_sem(dag: &Dag, rng: &mut impl Rng) -> GaussianSem {
    let mut coeffs = BTreeMap::new();
    for (u, v) in dag.edges() {
        let magnitude: f64 = rng.random_range(0.1..=1.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        coeffs.insert((v, u), sign * magnitude);
    }
    GaussianSem::new(dag.clone(), coeffs, vec![1.0; dag.q()]).expect("keys match dag edges")
}

/// Exact covariance of the latent Gaussian vector. With `Z = B Z + eps` the
/// rows of `A = (I - B)^{-1}` accumulate along the topological order, and
/// `Sigma = A D A^T`.
pub fn sem_covariance(sem: &GaussianSem) -> Vec<Vec<f64>> {
    let q = sem.q();
    let mut a = vec![vec![0.0; q]; q];
    for &j in &sem.topo {
        a[j][j] = 1.0;
        for &u in sem.dag.parents(j) {
            let b = sem.coeffs[&(j, u)];
            for t in 0..q {
                a[j][t] += b * a[u][t];
            }
        }
        debug_assert!((a[j][j] - 1.0).abs() < 1e-12);
    }
    let mut sigma = vec![vec![0.0; q]; q];
    for i in 0..q {
        for j in i..q {
            let mut acc = 0.0;
            for t in 0..q {
                acc += a[i][t] * sem.variances[t] * a[j][t];
            }
            sigma[i][j] = acc;
            sigma[j][i] = acc;
        }
    }
    sigma
}

/// Binary dataset obtained by thresholding the latent Gaussians at zero.
pub fn sample_binary(sem: &GaussianSem, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    let q = sem.q();
    let mut z = vec![0.0; q];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        sem.sample_z(rng, &mut z);
        rows.push(z.iter().map(|&x| u32::from(x >= 0.0)).collect::<Vec<u32>>());
    }
    Dataset::binary(q, &rows)
}

fn cholesky(mat: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = mat.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = mat[i][j];
            for t in 0..j {
                acc -= l[i][t] * l[j][t];
            }
            if i == j {
                if acc <= 0.0 {
                    return Err(Error::logic("covariance matrix is not positive definite"));
                }
                l[i][j] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    Ok(l)
}

/// A Monte Carlo effect estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EffectEstimate {
    pub value: f64,
    pub se: f64,
}

/// Ground-truth causal effect of `do(X_v = 1)` vs `do(X_v = 0)` on
/// `Y = X_y` in the dichotomized model: the parent-adjustment sum over all
/// sign patterns `k` of the parents, with every orthant probability
/// estimated by Monte Carlo over the exact Gaussian sub-covariance of
/// `(y, fa(v))`. The standard error comes from ten independent batches.
pub fn true_causal_effect(
    sem: &GaussianSem,
    v: usize,
    y: usize,
    mc_draws: usize,
    rng: &mut impl Rng,
) -> Result<EffectEstimate> {
    let q = sem.q();
    if v >= q || y >= q {
        return Err(Error::input("node index out of range"));
    }
    if v == y {
        return Err(Error::input("treatment and response must differ"));
    }
    let pa: Vec<usize> = sem.dag.parents(v).to_vec();
    if pa.len() > 20 {
        return Err(Error::config(
            "treatment has more than 20 parents (2^|pa| adjustment terms); \
             use direct interventional simulation instead",
        ));
    }
    let mut vars: Vec<usize> = pa.clone();
    vars.push(v);
    vars.push(y);
    vars.sort_unstable();
    vars.dedup();
    let sigma = sem_covariance(sem);
    let sub: Vec<Vec<f64>> = vars
        .iter()
        .map(|&i| vars.iter().map(|&j| sigma[i][j]).collect())
        .collect();
    let l = cholesky(&sub)?;
    let d = vars.len();
    let pos_of = |node: usize| vars.binary_search(&node).expect("member");
    let v_pos = pos_of(v);
    let y_pos = pos_of(y);
    let pa_pos: Vec<usize> = pa.iter().map(|&p| pos_of(p)).collect();

    let batches = 10usize;
    let per_batch = (mc_draws / batches).max(1);
    let mut batch_means = Vec::with_capacity(batches);
    let mut g = vec![0.0; d];
    let mut z = vec![0.0; d];
    for _ in 0..batches {
        // per parent pattern: [n_k, n_v1, n_v0, n_y1v1, n_y1v0]
        let mut tally: HashMap<u64, [f64; 5]> = HashMap::new();
        for _ in 0..per_batch {
            for gi in g.iter_mut() {
                *gi = rng.sample(StandardNormal);
            }
            for i in 0..d {
                let mut acc = 0.0;
                for t in 0..=i {
                    acc += l[i][t] * g[t];
                }
                z[i] = acc;
            }
            let mut k = 0u64;
            for (bit, &p) in pa_pos.iter().enumerate() {
                if z[p] >= 0.0 {
                    k |= 1 << bit;
                }
            }
            let t = tally.entry(k).or_default();
            t[0] += 1.0;
            let y1 = z[y_pos] >= 0.0;
            if z[v_pos] >= 0.0 {
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
        batch_means.push(est);
    }
    let value = batch_means.iter().sum::<f64>() / batches as f64;
    let var = batch_means
        .iter()
        .map(|m| (m - value).powi(2))
        .sum::<f64>()
        / (batches as f64 - 1.0);
    Ok(EffectEstimate {
        value,
        se: (var / batches as f64).sqrt(),
    })
}

/// A full benchmark grid: `reps` independent (DAG, SEM, dataset) replicates
/// for each sample size, each scored for structure recovery and causal-effect
/// accuracy against the known truth.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub q: usize,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub edge_prob: f64,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub hyper: DirichletHyper,
    pub dag_prior: DagPriorParams,
    pub true_effect_draws: usize,
    pub cache_cap: usize,
}

impl ScenarioConfig {
    /// Defaults mirror the benchmark setup: edge probability `2/q`, chain
    /// length 5000/1000 up to ten nodes and 10000/2000 beyond.
    pub fn new(q: usize, ns: Vec<usize>, reps: usize, seed: u64) -> Self {
        let (iterations, burn_in) = if q <= 10 { (5000, 1000) } else { (10000, 2000) };
        ScenarioConfig {
            q,
            ns,
            reps,
            edge_prob: 2.0 / q as f64,
            seed,
            iterations,
            burn_in,
            thin: 1,
            hyper: DirichletHyper::default(),
            dag_prior: DagPriorParams::default(),
            true_effect_draws: 200_000,
            cache_cap: crate::data::DEFAULT_CACHE_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::config("scenarios need at least two variables"));
        }
        if self.ns.is_empty() || self.reps == 0 {
            return Err(Error::config("empty scenario grid"));
        }
        if !(self.edge_prob > 0.0 && self.edge_prob < 1.0) {
            return Err(Error::config("edge probability must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-treatment-node causal accuracy within one replicate. Node indices are
/// 1-based in reports; the response is always variable 1.
#[derive(Debug, Clone, Serialize)]
pub struct NodeEffect {
    pub node: usize,
    pub true_effect: f64,
    pub true_se: f64,
    pub bma: f64,
    pub ae: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRecord {
    pub q: usize,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub shd: usize,
    pub sen: f64,
    pub spe: f64,
    pub mpm_cyclic: bool,
    pub accept_rate: f64,
    pub effects: Vec<NodeEffect>,
}

impl ReplicateRecord {
    pub fn mean_ae(&self) -> f64 {
        self.effects.iter().map(|e| e.ae).sum::<f64>() / self.effects.len() as f64
    }
}

/// Runs one replicate: simulate truth, learn, summarize, compare.
pub fn run_replicate(cfg: &ScenarioConfig, n: usize, rep: usize) -> Result<ReplicateRecord> {
    let seed = mix64(cfg.seed ^ mix64((n as u64) << 20 | rep as u64));
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let truth = random_dag(cfg.q, cfg.edge_prob, &mut rng)?;
    let sem = random_sem(&truth, &mut rng);
    let ds = sample_binary(&sem, n, &mut rng)?;

    let chain_cfg = McmcConfig {
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        seed: mix64(seed ^ 0xC0FFEE),
        hyper: cfg.hyper,
        dag_prior: cfg.dag_prior,
        init: crate::mcmc::InitDag::Empty,
        store_theta: StoreTheta::CausalOnly,
        cache_cap: cfg.cache_cap,
    };
    // Response is variable 1 (index 0); one query per other node.
    let queries: Vec<CausalQuery> = (1..cfg.q).map(|v| CausalQuery::binary(0, v)).collect();
    let trace = run_chain_with_queries(&ds, &chain_cfg, &queries)?;

    let ppi_m = ppi(&trace)?;
    let mpm_res = mpm(&ppi_m);
    let quality = sen_spe(&mpm_res.graph, &Digraph::from_dag(&truth))?;
    let (mpm_dag, _) = mpm_repaired(&ppi_m)?;
    let shd_val = shd(&mpm_dag.to_cpdag(), &truth.to_cpdag())?;

    let mut rng_true = ChaCha12Rng::seed_from_u64(mix64(seed ^ 0x0E_FFEC));
    let mut effects = Vec::with_capacity(cfg.q - 1);
    for (v, query) in (1..cfg.q).zip(&queries) {
        let te = true_causal_effect(&sem, v, 0, cfg.true_effect_draws, &mut rng_true)?;
        let est = crate::causal::bma_estimate(&trace, query)?;
        effects.push(NodeEffect {
            node: v + 1,
            true_effect: te.value,
            true_se: te.se,
            bma: est.mean,
            ae: abs_error(te.value, est.mean),
        });
    }

    Ok(ReplicateRecord {
        q: cfg.q,
        n,
        rep,
        seed,
        shd: shd_val,
        sen: quality.sen,
        spe: quality.spe,
        mpm_cyclic: mpm_res.cyclic,
        accept_rate: trace.acceptance_rate(),
        effects,
    })
}

/// Runs the whole grid; replicates are independent jobs with derived seeds
/// and run in parallel, collected in deterministic `(n, rep)` order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ReplicateRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .ns
        .iter()
        .flat_map(|&n| (0..cfg.reps).map(move |rep| (n, rep)))
        .collect();
    jobs.par_iter()
        .map(|&(n, rep)| run_replicate(cfg, n, rep))
        .collect()
}

/// One row of the aggregate table (sensitivity, specificity and absolute
/// error scaled by 100, matching the usual reporting convention).
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub q: usize,
    pub n: usize,
    pub shd: f64,
    pub sen: f64,
    pub spe: f64,
    pub ae100: f64,
}

pub fn aggregate(records: &[ReplicateRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, usize)> = records.iter().map(|r| (r.q, r.n)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|&(q, n)| {
            let group: Vec<&ReplicateRecord> =
                records.iter().filter(|r| r.q == q && r.n == n).collect();
            let g = group.len() as f64;
            let shd = group.iter().map(|r| r.shd as f64).sum::<f64>() / g;
            let sen = group.iter().map(|r| r.sen).sum::<f64>() / g * 100.0;
            let spe = group.iter().map(|r| r.spe).sum::<f64>() / g * 100.0;
            let all_ae: Vec<f64> = group
                .iter()
                .flat_map(|r| r.effects.iter().map(|e| e.ae))
                .collect();
            let ae100 = all_ae.iter().sum::<f64>() / all_ae.len() as f64 * 100.0;
            AggregateRow {
                q,
                n,
                shd,
                sen,
                spe,
                ae100,
            }
        })
        .collect()
}
