//! Dirichlet hyperparameters (the score-equivalent BDEu scheme), Dirichlet
//! normalizing constants, and the Beta-Binomial prior over DAG skeletons.
//!
//! Everything is computed and stored in log space; gamma functions overflow
//! for all but trivial counts.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dag::Dag;
use crate::error::{Error, Result};

/// Global BDEu mass `a`; per-family entries are `a / |X_fa(j)|`, which makes
/// Markov-equivalent DAGs score-equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletHyper {
    a: f64,
}

impl DirichletHyper {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::config(format!("BDEu mass must be positive, got {a}")));
        }
        Ok(DirichletHyper { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// The common hyperparameter entry for a family with joint cardinality
    /// `card_fa` (node levels times all parent levels).
    pub fn entry(&self, card_fa: f64) -> f64 {
        bdeu_entry(self.a, card_fa)
    }
}

impl Default for DirichletHyper {
    fn default() -> Self {
        DirichletHyper { a: 1.0 }
    }
}

/// `a / |X_fa(j)|`.
pub fn bdeu_entry(a: f64, card_fa: f64) -> f64 {
    a / card_fa
}

/// Log normalizing constant of a Dirichlet with parameter vector `avec`:
/// `log Gamma(sum a_m) - sum log Gamma(a_m)`.
pub fn log_dirichlet_norm(avec: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    let mut acc = 0.0;
    for &a in avec {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::input(format!(
                "Dirichlet parameters must be positive, got {a}"
            )));
        }
        sum += a;
        acc += ln_gamma(a);
    }
    Ok(ln_gamma(sum) - acc)
}

/// Same constant for a symmetric vector with `len` entries equal to `entry`;
/// avoids allocating inside scoring loops.
pub fn log_dirichlet_norm_symmetric(entry: f64, len: usize) -> f64 {
    ln_gamma(entry * len as f64) - len as f64 * ln_gamma(entry)
}

/// Beta(c, d) hyperparameters of the prior edge-inclusion probability; the
/// probability itself is integrated out analytically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DagPriorParams {
    c: f64,
    d: f64,
}

impl DagPriorParams {
    pub fn new(c: f64, d: f64) -> Result<Self> {
        if !(c > 0.0) || !(d > 0.0) || !c.is_finite() || !d.is_finite() {
            return Err(Error::config(format!(
                "Beta-Binomial parameters must be positive, got c = {c}, d = {d}"
            )));
        }
        Ok(DagPriorParams { c, d })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}

impl Default for DagPriorParams {
    fn default() -> Self {
        DagPriorParams { c: 1.0, d: 1.0 }
    }
}

/// Log Beta-Binomial skeleton mass for a DAG with `edge_count` edges on `q`
/// nodes. Unnormalized over DAG space (the normalizer cancels in every
/// Metropolis-Hastings ratio), but exact as a skeleton-pattern probability.
pub fn log_dag_prior_by_edges(edge_count: usize, q: usize, params: &DagPriorParams) -> f64 {
    let m = (q * (q - 1) / 2) as f64;
    let k = edge_count as f64;
    ln_gamma(k + params.c) + ln_gamma(m - k + params.d) - ln_gamma(m + params.c + params.d)
        + ln_gamma(params.c + params.d)
        - ln_gamma(params.c)
        - ln_gamma(params.d)
}

/// Log prior of a DAG; depends on the edge count only.
pub fn log_dag_prior(dag: &Dag, params: &DagPriorParams) -> f64 {
    log_dag_prior_by_edges(dag.edge_count(), dag.q(), params)
}
