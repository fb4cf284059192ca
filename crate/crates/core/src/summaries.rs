//! Posterior-over-graphs summaries (edge inclusion probabilities, median
//! probability model, MAP graph) and the evaluation metrics used by the
//! synthetic benchmarks.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::dag::{Cpdag, Dag};
use crate::error::{Error, Result};
use crate::mcmc::Trace;

/// Marginal posterior probability of inclusion per directed edge, as a dense
/// `q x q` matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpiMatrix {
    pub q: usize,
    vals: Vec<f64>,
}

impl PpiMatrix {
    pub fn zeros(q: usize) -> Self {
        PpiMatrix {
            q,
            vals: vec![0.0; q * q],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.vals[u * self.q + v]
    }

    pub fn set(&mut self, u: usize, v: usize, p: f64) {
        self.vals[u * self.q + v] = p;
    }
}

/// Edge-inclusion frequencies over the retained draws.
pub fn ppi(trace: &Trace) -> Result<PpiMatrix> {
    if trace.is_empty() {
        return Err(Error::input("empty trace"));
    }
    let q = trace.q();
    let mut m = PpiMatrix::zeros(q);
    for dag in &trace.dags {
        for (u, v) in dag.edges() {
            m.vals[u * q + v] += 1.0;
        }
    }
    let n = trace.len() as f64;
    for v in m.vals.iter_mut() {
        *v /= n;
    }
    Ok(m)
}

/// A plain directed graph (possibly cyclic), as produced by the median
/// probability model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Digraph {
    pub q: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    pub fn from_dag(dag: &Dag) -> Self {
        Digraph {
            q: dag.q(),
            edges: dag.edges().into_iter().collect(),
        }
    }

    pub fn is_cyclic(&self) -> bool {
        let edges: Vec<(usize, usize)> = self.edges.iter().copied().collect();
        !crate::dag::is_acyclic(self.q, &edges).unwrap_or(false)
    }

    /// Some directed cycle as an edge list, if one exists (deterministic).
    fn find_cycle(&self) -> Option<Vec<(usize, usize)>> {
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.q];
        for &(u, v) in &self.edges {
            children[u].push(v);
        }
        // colors: 0 unvisited, 1 on stack, 2 done
        let mut color = vec![0u8; self.q];
        let mut parent: Vec<Option<usize>> = vec![None; self.q];
        for start in 0..self.q {
            if color[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = 1;
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                if *next < children[u].len() {
                    let v = children[u][*next];
                    *next += 1;
                    match color[v] {
                        0 => {
                            color[v] = 1;
                            parent[v] = Some(u);
                            stack.push((v, 0));
                        }
                        1 => {
                            // back edge u -> v closes a cycle
                            let mut cycle = vec![(u, v)];
                            let mut w = u;
                            while w != v {
                                let p = parent[w].expect("path to cycle head");
                                cycle.push((p, w));
                                w = p;
                            }
                            cycle.reverse();
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    color[u] = 2;
                    stack.pop();
                }
            }
        }
        None
    }
}

/// Median probability model plus a cyclicity flag. The MPM keeps exactly the
/// edges with inclusion probability strictly above one half; nothing forces
/// the result to be acyclic, so it is returned as-is with the flag set.
#[derive(Debug, Clone, Serialize)]
pub struct MpmResult {
    pub graph: Digraph,
    pub cyclic: bool,
}

pub fn mpm(ppi: &PpiMatrix) -> MpmResult {
    let mut edges = BTreeSet::new();
    for u in 0..ppi.q {
        for v in 0..ppi.q {
            if u != v && ppi.get(u, v) > 0.5 {
                edges.insert((u, v));
            }
        }
    }
    let graph = Digraph { q: ppi.q, edges };
    let cyclic = graph.is_cyclic();
    MpmResult { graph, cyclic }
}

/// Repair mode: while cycles remain, drop the lowest-PPI edge of some cycle
/// (ties broken by smallest `(u, v)`), then return the resulting DAG and
/// whether any repair was needed.
pub fn mpm_repaired(ppi: &PpiMatrix) -> Result<(Dag, bool)> {
    let mut result = mpm(ppi);
    let repaired = result.cyclic;
    while let Some(cycle) = result.graph.find_cycle() {
        let victim = cycle
            .iter()
            .copied()
            .min_by(|&a, &b| {
                ppi.get(a.0, a.1)
                    .partial_cmp(&ppi.get(b.0, b.1))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .expect("cycle is nonempty");
        result.graph.edges.remove(&victim);
    }
    let edges: Vec<(usize, usize)> = result.graph.edges.iter().copied().collect();
    Ok((Dag::from_edges(ppi.q, &edges)?, repaired))
}

/// Most frequently visited DAG; ties broken by fewest edges, then by
/// canonical edge-list order.
pub fn map_dag(trace: &Trace) -> Result<Dag> {
    if trace.is_empty() {
        return Err(Error::input("empty trace"));
    }
    let mut counts: HashMap<Vec<(usize, usize)>, u64> = HashMap::new();
    for dag in &trace.dags {
        *counts.entry(dag.edges()).or_insert(0) += 1;
    }
    let mut entries: Vec<(Vec<(usize, usize)>, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(a.0.len().cmp(&b.0.len()))
            .then(a.0.cmp(&b.0))
    });
    Dag::from_edges(trace.q(), &entries[0].0)
}

/// Structural Hamming distance between two CPDAGs: the number of node pairs
/// whose status (absent / undirected / directed with orientation) differs.
pub fn shd(a: &Cpdag, b: &Cpdag) -> Result<usize> {
    if a.q != b.q {
        return Err(Error::input("CPDAGs have different node counts"));
    }
    let mut dist = 0;
    for u in 0..a.q {
        for v in (u + 1)..a.q {
            if a.pair_status(u, v) != b.pair_status(u, v) {
                dist += 1;
            }
        }
    }
    Ok(dist)
}

/// Sensitivity and specificity of a directed-adjacency estimate. The flags
/// mark the 0/0 = 1 convention for empty classes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SenSpe {
    pub sen: f64,
    pub spe: f64,
    pub sen_degenerate: bool,
    pub spe_degenerate: bool,
}

/// Confusion-matrix rates over the `q(q-1)` ordered node pairs of the 0-1
/// adjacency matrices.
pub fn sen_spe(est: &Digraph, truth: &Digraph) -> Result<SenSpe> {
    if est.q != truth.q {
        return Err(Error::input("graphs have different node counts"));
    }
    let (mut tp, mut tn, mut fp, mut fnn) = (0u64, 0u64, 0u64, 0u64);
    for u in 0..est.q {
        for v in 0..est.q {
            if u == v {
                continue;
            }
            let e = est.edges.contains(&(u, v));
            let t = truth.edges.contains(&(u, v));
            match (e, t) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fnn += 1,
            }
        }
    }
    let sen_degenerate = tp + fnn == 0;
    let spe_degenerate = tn + fp == 0;
    let sen = if sen_degenerate {
        1.0
    } else {
        tp as f64 / (tp + fnn) as f64
    };
    let spe = if spe_degenerate {
        1.0
    } else {
        tn as f64 / (tn + fp) as f64
    };
    Ok(SenSpe {
        sen,
        spe,
        sen_degenerate,
        spe_degenerate,
    })
}

/// Absolute error between a true effect and its estimate.
pub fn abs_error(true_effect: f64, estimate: f64) -> f64 {
    (true_effect - estimate).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::McmcConfig;

    fn trace_of(dags: Vec<Dag>) -> Trace {
        Trace {
            config: McmcConfig::new(dags.len(), 0, 0),
            dags,
            thetas: None,
            effects: vec![],
            accepted: 0,
        }
    }

    #[test]
    fn ppi_counts_edge_frequencies() {
        let d = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let t = trace_of(vec![d.clone(), d.clone(), d]);
        let m = ppi(&t).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 0.0);

        let half = trace_of(vec![
            Dag::from_edges(2, &[(0, 1)]).unwrap(),
            Dag::from_edges(2, &[(1, 0)]).unwrap(),
        ]);
        let m = ppi(&half).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
    }

    #[test]
    fn ppi_of_concatenation_is_length_weighted_average() {
        let a = trace_of(vec![Dag::from_edges(2, &[(0, 1)]).unwrap(); 3]);
        let b = trace_of(vec![Dag::empty(2).unwrap(); 1]);
        let mut all = a.dags.clone();
        all.extend(b.dags.clone());
        let joint = ppi(&trace_of(all)).unwrap();
        let pa = ppi(&a).unwrap();
        let pb = ppi(&b).unwrap();
        let expect = (3.0 * pa.get(0, 1) + 1.0 * pb.get(0, 1)) / 4.0;
        assert_eq!(joint.get(0, 1), expect);
    }

    #[test]
    fn mpm_threshold_is_strict() {
        let mut m = PpiMatrix::zeros(2);
        m.set(0, 1, 0.51);
        assert_eq!(mpm(&m).graph.edges.len(), 1);
        m.set(0, 1, 0.5);
        assert!(mpm(&m).graph.edges.is_empty());
    }

    #[test]
    fn mpm_flags_cycles_and_repair_breaks_them() {
        let mut m = PpiMatrix::zeros(2);
        m.set(0, 1, 0.7);
        m.set(1, 0, 0.6);
        let res = mpm(&m);
        assert!(res.cyclic);
        assert_eq!(res.graph.edges.len(), 2);
        let (dag, repaired) = mpm_repaired(&m).unwrap();
        assert!(repaired);
        // Lowest-PPI edge of the cycle is dropped.
        assert_eq!(dag.edges(), vec![(0, 1)]);

        let mut acyclic = PpiMatrix::zeros(2);
        acyclic.set(0, 1, 0.9);
        let (dag, repaired) = mpm_repaired(&acyclic).unwrap();
        assert!(!repaired);
        assert_eq!(dag.edges(), vec![(0, 1)]);
    }

    #[test]
    fn map_dag_picks_mode_and_breaks_ties() {
        let a = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let b = Dag::empty(2).unwrap();
        let t = trace_of(vec![a.clone(), a.clone(), a.clone(), b.clone(), b.clone()]);
        assert_eq!(map_dag(&t).unwrap(), a);
        // Exact tie: the graph with fewer edges wins.
        let tie = trace_of(vec![a.clone(), b.clone()]);
        assert_eq!(map_dag(&tie).unwrap(), b);
        let single = trace_of(vec![a.clone()]);
        assert_eq!(map_dag(&single).unwrap(), a);
    }

    #[test]
    fn shd_identity_symmetry_and_hand_example() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap().to_cpdag();
        let collider = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap().to_cpdag();
        assert_eq!(shd(&chain, &chain).unwrap(), 0);
        assert_eq!(shd(&chain, &collider).unwrap(), shd(&collider, &chain).unwrap());
        // Hand count: pair (0,1) present vs absent, (0,2) absent vs present,
        // (1,2) undirected vs directed -> 3 differences.
        assert_eq!(shd(&chain, &collider).unwrap(), 3);
        // One extra undirected edge costs exactly 1.
        let single = Dag::from_edges(3, &[(0, 1)]).unwrap().to_cpdag();
        let empty = Dag::empty(3).unwrap().to_cpdag();
        assert_eq!(shd(&single, &empty).unwrap(), 1);
        let wrong_q = Dag::empty(2).unwrap().to_cpdag();
        assert!(shd(&empty, &wrong_q).is_err());
    }

    #[test]
    fn shd_triangle_inequality_on_small_enumeration() {
        let dags = crate::oracle::enumerate_dags(3).unwrap();
        let cpdags: Vec<Cpdag> = dags.iter().map(Dag::to_cpdag).collect();
        for a in cpdags.iter().step_by(3) {
            for b in cpdags.iter().step_by(4) {
                for c in cpdags.iter().step_by(5) {
                    let ab = shd(a, b).unwrap();
                    let bc = shd(b, c).unwrap();
                    let ac = shd(a, c).unwrap();
                    assert!(ac <= ab + bc);
                }
            }
        }
    }

    #[test]
    fn sen_spe_examples() {
        let truth = Digraph::from_dag(&Dag::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        let perfect = sen_spe(&truth, &truth).unwrap();
        assert_eq!((perfect.sen, perfect.spe), (1.0, 1.0));

        let empty = Digraph::from_dag(&Dag::empty(3).unwrap());
        let s = sen_spe(&empty, &truth).unwrap();
        assert_eq!((s.sen, s.spe), (0.0, 1.0));
        assert!(!s.sen_degenerate);

        // Single-pair graphs in full disagreement.
        let a = Digraph::from_dag(&Dag::from_edges(2, &[(0, 1)]).unwrap());
        let b = Digraph::from_dag(&Dag::from_edges(2, &[(1, 0)]).unwrap());
        let s = sen_spe(&a, &b).unwrap();
        assert_eq!(s.sen, 0.0);
        assert_eq!(s.spe, 0.0);

        // Empty truth: sensitivity is degenerate and reported as 1.
        let s = sen_spe(&empty, &empty).unwrap();
        assert!(s.sen_degenerate);
        assert_eq!(s.sen, 1.0);
    }

    #[test]
    fn sen_spe_invariant_under_joint_relabelling() {
        let est = Digraph::from_dag(&Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap());
        let truth = Digraph::from_dag(&Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap());
        let base = sen_spe(&est, &truth).unwrap();
        let sigma = [1usize, 2, 0];
        let relabel = |g: &Digraph| Digraph {
            q: g.q,
            edges: g.edges.iter().map(|&(u, v)| (sigma[u], sigma[v])).collect(),
        };
        let new = sen_spe(&relabel(&est), &relabel(&truth)).unwrap();
        assert_eq!((base.sen, base.spe), (new.sen, new.spe));
    }

    #[test]
    fn abs_error_basics() {
        assert_eq!(abs_error(0.5, 0.5), 0.0);
        assert!((abs_error(0.5, 0.46) - 0.04).abs() < 1e-15);
        assert_eq!(abs_error(0.2, 0.7), abs_error(0.7, 0.2));
    }
}
