//! Directed acyclic graphs over node indices `0..q`, the single-edge
//! mutation operators used by the structure sampler, and conversion to the
//! CPDAG representing a Markov equivalence class.

use std::collections::BTreeSet;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A labelled DAG. Nodes are `0..q`; adjacency is kept both as per-node
/// parent and child lists (sorted) so that mutation proposals can run an
/// incremental reachability check instead of a full acyclicity pass.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    q: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

/// Single-edge mutation. Variant order (Insert < Delete < Reverse) together
/// with lexicographic `(u, v)` gives the canonical operator ordering, so the
/// derived `Ord` is part of the contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operator {
    Insert(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

impl Operator {
    /// Nodes whose parent set changes when the operator is applied.
    pub fn affected_nodes(&self) -> Vec<usize> {
        match *self {
            Operator::Insert(_, v) | Operator::Delete(_, v) => vec![v],
            Operator::Reverse(u, v) => vec![u, v],
        }
    }

    pub fn endpoints(&self) -> (usize, usize) {
        match *self {
            Operator::Insert(u, v) | Operator::Delete(u, v) | Operator::Reverse(u, v) => (u, v),
        }
    }
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Operator::Insert(u, v) => write!(f, "insert {} -> {}", u + 1, v + 1),
            Operator::Delete(u, v) => write!(f, "delete {} -> {}", u + 1, v + 1),
            Operator::Reverse(u, v) => write!(f, "reverse {} -> {}", u + 1, v + 1),
        }
    }
}

/// True iff the directed graph on `q` nodes admits a topological order
/// (Kahn's algorithm). Self-loops count as cycles.
pub fn is_acyclic(q: usize, edges: &[(usize, usize)]) -> Result<bool> {
    let mut indegree = vec![0usize; q];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); q];
    for &(u, v) in edges {
        if u >= q || v >= q {
            return Err(Error::input(format!(
                "edge ({u}, {v}) out of range for q = {q}"
            )));
        }
        if u == v {
            return Ok(false);
        }
        indegree[v] += 1;
        children[u].push(v);
    }
    let mut stack: Vec<usize> = (0..q).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0usize;
    while let Some(u) = stack.pop() {
        seen += 1;
        for &v in &children[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                stack.push(v);
            }
        }
    }
    Ok(seen == q)
}

impl Dag {
    /// The edgeless DAG on `q` nodes.
    pub fn empty(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::input("node count must be positive"));
        }
        Ok(Dag {
            q,
            parents: vec![Vec::new(); q],
            children: vec![Vec::new(); q],
        })
    }

    /// Builds and validates a DAG from an edge list. Rejects out-of-range
    /// indices, duplicate or opposing edge pairs, and cycles.
    pub fn from_edges(q: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= q || v >= q {
                return Err(Error::input(format!(
                    "edge ({u}, {v}) out of range for q = {q}"
                )));
            }
            if u == v {
                return Err(Error::input(format!("self-loop at node {u}")));
            }
            if !seen.insert((u, v)) {
                return Err(Error::input(format!("duplicate edge ({u}, {v})")));
            }
            if seen.contains(&(v, u)) {
                return Err(Error::input(format!(
                    "both ({u}, {v}) and ({v}, {u}) present"
                )));
            }
        }
        if !is_acyclic(q, edges)? {
            return Err(Error::input("edge list contains a directed cycle"));
        }
        let mut dag = Dag::empty(q)?;
        for &(u, v) in edges {
            dag.insert_unchecked(u, v);
        }
        Ok(dag)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Sorted parent set of `v`.
    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    /// Sorted child set of `v`.
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Family of `v`: the node together with its parents, sorted.
    pub fn family(&self, v: usize) -> Vec<usize> {
        let mut fa = self.parents[v].clone();
        let pos = fa.partition_point(|&u| u < v);
        fa.insert(pos, v);
        fa
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.children[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// All edges in canonical `(u, v)` order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.q {
            for &v in &self.children[u] {
                out.push((u, v));
            }
        }
        out
    }

    fn insert_unchecked(&mut self, u: usize, v: usize) {
        let pos = self.children[u].partition_point(|&w| w < v);
        self.children[u].insert(pos, v);
        let pos = self.parents[v].partition_point(|&w| w < u);
        self.parents[v].insert(pos, u);
    }

    fn remove_unchecked(&mut self, u: usize, v: usize) {
        if let Ok(pos) = self.children[u].binary_search(&v) {
            self.children[u].remove(pos);
        }
        if let Ok(pos) = self.parents[v].binary_search(&u) {
            self.parents[v].remove(pos);
        }
    }

    /// Directed reachability `from ⇝ to`, optionally ignoring one edge.
    fn reaches(&self, from: usize, to: usize, skip: Option<(usize, usize)>) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.q];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &w in &self.children[u] {
                if skip == Some((u, w)) {
                    continue;
                }
                if w == to {
                    return true;
                }
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    /// Checks the operator's preconditions against this DAG, including that
    /// the mutated graph stays acyclic.
    pub fn is_valid_operator(&self, op: Operator) -> bool {
        let (u, v) = op.endpoints();
        if u >= self.q || v >= self.q || u == v {
            return false;
        }
        match op {
            // u -> v creates a cycle iff v already reaches u.
            Operator::Insert(u, v) => {
                !self.has_edge(u, v) && !self.has_edge(v, u) && !self.reaches(v, u, None)
            }
            Operator::Delete(u, v) => self.has_edge(u, v),
            // v -> u creates a cycle iff u reaches v via some other path.
            Operator::Reverse(u, v) => {
                self.has_edge(u, v) && !self.reaches(u, v, Some((u, v)))
            }
        }
    }

    /// Every Insert/Delete/Reverse whose application yields a DAG, in
    /// canonical order (kind, then `(u, v)` lexicographic).
    pub fn valid_operators(&self) -> Vec<Operator> {
        let mut ops = Vec::new();
        for u in 0..self.q {
            for v in 0..self.q {
                if u == v || self.has_edge(u, v) || self.has_edge(v, u) {
                    continue;
                }
                if !self.reaches(v, u, None) {
                    ops.push(Operator::Insert(u, v));
                }
            }
        }
        for (u, v) in self.edges() {
            ops.push(Operator::Delete(u, v));
        }
        for (u, v) in self.edges() {
            if !self.reaches(u, v, Some((u, v))) {
                ops.push(Operator::Reverse(u, v));
            }
        }
        ops
    }

    /// Applies a single-edge operator, returning the mutated DAG.
    pub fn apply(&self, op: Operator) -> Result<Self> {
        if !self.is_valid_operator(op) {
            return Err(Error::logic(format!("invalid operator: {op}")));
        }
        let mut out = self.clone();
        match op {
            Operator::Insert(u, v) => out.insert_unchecked(u, v),
            Operator::Delete(u, v) => out.remove_unchecked(u, v),
            Operator::Reverse(u, v) => {
                out.remove_unchecked(u, v);
                out.insert_unchecked(v, u);
            }
        }
        Ok(out)
    }

    /// A topological order (smallest node index first among ready nodes).
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = (0..self.q).map(|v| self.parents[v].len()).collect();
        let mut ready: BTreeSet<usize> = (0..self.q).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.q);
        while let Some(&u) = ready.iter().next() {
            ready.remove(&u);
            order.push(u);
            for &w in &self.children[u] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        debug_assert_eq!(order.len(), self.q);
        order
    }

    /// V-structures `u -> w <- v` with `u`, `v` non-adjacent, as
    /// `(min(u,v), max(u,v), w)` triples.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for w in 0..self.q {
            let pa = &self.parents[w];
            for i in 0..pa.len() {
                for j in (i + 1)..pa.len() {
                    let (u, v) = (pa[i], pa[j]);
                    if !self.has_edge(u, v) && !self.has_edge(v, u) {
                        out.insert((u, v, w));
                    }
                }
            }
        }
        out
    }

    /// Undirected skeleton as `(min, max)` pairs.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges()
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect()
    }

    /// CPDAG of this DAG's Markov equivalence class: skeleton plus
    /// v-structures, closed under the Meek orientation rules. An edge stays
    /// directed exactly when it is compelled in every equivalent DAG.
    pub fn to_cpdag(&self) -> Cpdag {
        let q = self.q;
        let mut dir: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut und: BTreeSet<(usize, usize)> = self.skeleton();

        let orient = |und: &mut BTreeSet<(usize, usize)>,
                          dir: &mut BTreeSet<(usize, usize)>,
                          u: usize,
                          v: usize|
         -> bool {
            if und.remove(&(u.min(v), u.max(v))) {
                dir.insert((u, v));
                true
            } else {
                false
            }
        };

        for &(u, v, w) in &self.v_structures() {
            orient(&mut und, &mut dir, u, w);
            orient(&mut und, &mut dir, v, w);
        }

        let adjacent = |dir: &BTreeSet<(usize, usize)>,
                        und: &BTreeSet<(usize, usize)>,
                        a: usize,
                        b: usize| {
            dir.contains(&(a, b)) || dir.contains(&(b, a)) || und.contains(&(a.min(b), a.max(b)))
        };

        // Meek rules R1-R3. Starting from the pattern of a DAG, these close
        // the orientation; R4 only fires under background knowledge.
        loop {
            let mut changed = false;
            let und_snapshot: Vec<(usize, usize)> = und.iter().copied().collect();
            for &(x, y) in &und_snapshot {
                if !und.contains(&(x, y)) {
                    continue;
                }
                for (a, b) in [(x, y), (y, x)] {
                    // R1: c -> a, a -- b, c and b non-adjacent  =>  a -> b
                    let r1 = dir
                        .iter()
                        .any(|&(c, t)| t == a && c != b && !adjacent(&dir, &und, c, b));
                    if r1 {
                        orient(&mut und, &mut dir, a, b);
                        changed = true;
                        break;
                    }
                    // R2: a -> w -> b and a -- b  =>  a -> b
                    let r2 = (0..q).any(|w| dir.contains(&(a, w)) && dir.contains(&(w, b)));
                    if r2 {
                        orient(&mut und, &mut dir, a, b);
                        changed = true;
                        break;
                    }
                    // R3: a -- c -> b, a -- d -> b, c and d non-adjacent  =>  a -> b
                    let mut r3 = false;
                    let into_b: Vec<usize> =
                        dir.iter().filter(|&&(_, t)| t == b).map(|&(s, _)| s).collect();
                    'outer: for (i, &c) in into_b.iter().enumerate() {
                        for &d in &into_b[i + 1..] {
                            if und.contains(&(a.min(c), a.max(c)))
                                && und.contains(&(a.min(d), a.max(d)))
                                && !adjacent(&dir, &und, c, d)
                            {
                                r3 = true;
                                break 'outer;
                            }
                        }
                    }
                    if r3 {
                        orient(&mut und, &mut dir, a, b);
                        changed = true;
                        break;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        Cpdag {
            q,
            directed: dir,
            undirected: und,
        }
    }
}

impl Serialize for Dag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Dag", 2)?;
        s.serialize_field("q", &self.q)?;
        let edges: Vec<(usize, usize)> =
            self.edges().into_iter().map(|(u, v)| (u + 1, v + 1)).collect();
        s.serialize_field("edges", &edges)?;
        s.end()
    }
}

/// Completed partially directed acyclic graph: the canonical representative
/// of a Markov equivalence class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    pub q: usize,
    /// Compelled edges, as ordered pairs.
    pub directed: BTreeSet<(usize, usize)>,
    /// Reversible edges, as `(min, max)` pairs.
    pub undirected: BTreeSet<(usize, usize)>,
}

impl Cpdag {
    /// Edge status of an unordered node pair, used by SHD.
    pub fn pair_status(&self, a: usize, b: usize) -> PairStatus {
        let (lo, hi) = (a.min(b), a.max(b));
        if self.undirected.contains(&(lo, hi)) {
            PairStatus::Undirected
        } else if self.directed.contains(&(lo, hi)) {
            PairStatus::Forward
        } else if self.directed.contains(&(hi, lo)) {
            PairStatus::Backward
        } else {
            PairStatus::Absent
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStatus {
    Absent,
    Undirected,
    /// Directed from the smaller to the larger index.
    Forward,
    /// Directed from the larger to the smaller index.
    Backward,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(q: usize, edges: &[(usize, usize)]) -> Dag {
        Dag::from_edges(q, edges).unwrap()
    }

    #[test]
    fn acyclicity_basics() {
        assert!(is_acyclic(3, &[]).unwrap());
        assert!(!is_acyclic(3, &[(0, 1), (1, 2), (2, 0)]).unwrap());
        assert!(is_acyclic(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        assert!(is_acyclic(2, &[(0, 3)]).is_err());
        assert!(!is_acyclic(2, &[(1, 1)]).unwrap());
    }

    #[test]
    fn parents_and_family() {
        let chain = dag(3, &[(0, 1), (1, 2)]);
        assert_eq!(chain.parents(2), &[1]);
        let empty = Dag::empty(2).unwrap();
        assert_eq!(empty.parents(0), &[] as &[usize]);
        let collider = dag(3, &[(0, 2), (1, 2)]);
        assert_eq!(collider.parents(2), &[0, 1]);
        assert_eq!(collider.family(2), vec![0, 1, 2]);
        assert_eq!(collider.family(0), vec![0]);
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(Dag::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Dag::from_edges(3, &[(0, 1), (0, 1)]).is_err());
        assert!(Dag::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(Dag::from_edges(2, &[(0, 0)]).is_err());
        assert!(Dag::from_edges(0, &[]).is_err());
    }

    #[test]
    fn operators_on_tiny_graphs() {
        let empty2 = Dag::empty(2).unwrap();
        assert_eq!(
            empty2.valid_operators(),
            vec![Operator::Insert(0, 1), Operator::Insert(1, 0)]
        );
        let one = dag(2, &[(0, 1)]);
        assert_eq!(
            one.valid_operators(),
            vec![Operator::Delete(0, 1), Operator::Reverse(0, 1)]
        );
    }

    /// Independent route: enumerate every single-edge modification and check
    /// acyclicity with the standalone Kahn pass.
    fn brute_force_operators(d: &Dag) -> Vec<Operator> {
        let q = d.q();
        let edges: BTreeSet<(usize, usize)> = d.edges().into_iter().collect();
        let mut ops = Vec::new();
        let mut consider = |op: Operator, new_edges: Vec<(usize, usize)>| {
            if is_acyclic(q, &new_edges).unwrap() {
                ops.push(op);
            }
        };
        for u in 0..q {
            for v in 0..q {
                if u == v || edges.contains(&(u, v)) || edges.contains(&(v, u)) {
                    continue;
                }
                let mut e: Vec<_> = edges.iter().copied().collect();
                e.push((u, v));
                consider(Operator::Insert(u, v), e);
            }
        }
        for &(u, v) in &edges {
            let e: Vec<_> = edges.iter().copied().filter(|&p| p != (u, v)).collect();
            consider(Operator::Delete(u, v), e);
        }
        for &(u, v) in &edges {
            let mut e: Vec<_> = edges.iter().copied().filter(|&p| p != (u, v)).collect();
            e.push((v, u));
            consider(Operator::Reverse(u, v), e);
        }
        ops.sort();
        ops
    }

    #[test]
    fn operators_match_brute_force_on_complete_triangle() {
        let d = dag(3, &[(0, 1), (1, 2), (0, 2)]);
        let ops = d.valid_operators();
        assert_eq!(ops.len(), 5);
        assert_eq!(ops, brute_force_operators(&d));
        // Reversing 0 -> 2 would close a cycle through 0 -> 1 -> 2.
        assert!(!ops.contains(&Operator::Reverse(0, 2)));
    }

    #[test]
    fn operators_match_brute_force_on_random_dags() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let q = rng.random_range(2..6);
            let mut d = Dag::empty(q).unwrap();
            for _ in 0..rng.random_range(0..8) {
                let ops = d.valid_operators();
                if ops.is_empty() {
                    break;
                }
                d = d.apply(ops[rng.random_range(0..ops.len())]).unwrap();
            }
            assert_eq!(d.valid_operators(), brute_force_operators(&d));
            for op in d.valid_operators() {
                let next = d.apply(op).unwrap();
                assert!(is_acyclic(q, &next.edges()).unwrap());
                assert_ne!(next, d, "operator must change the graph");
            }
        }
    }

    #[test]
    fn apply_examples() {
        let d = dag(2, &[(0, 1)]);
        assert_eq!(d.apply(Operator::Reverse(0, 1)).unwrap().edges(), vec![(1, 0)]);
        let e = Dag::empty(2).unwrap();
        assert_eq!(e.apply(Operator::Insert(0, 1)).unwrap().edges(), vec![(0, 1)]);
        let t = dag(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(
            t.apply(Operator::Delete(0, 2)).unwrap().edges(),
            vec![(0, 1), (1, 2)]
        );
        assert!(e.apply(Operator::Delete(0, 1)).is_err());
        assert!(d.apply(Operator::Insert(1, 0)).is_err());
    }

    #[test]
    fn reverse_twice_round_trips() {
        let d = dag(4, &[(0, 1), (1, 2), (0, 3)]);
        for op in d.valid_operators() {
            if let Operator::Reverse(u, v) = op {
                let once = d.apply(op).unwrap();
                let back = Operator::Reverse(v, u);
                if once.is_valid_operator(back) {
                    assert_eq!(once.apply(back).unwrap(), d);
                }
            }
        }
    }

    #[test]
    fn affected_nodes_per_kind() {
        assert_eq!(Operator::Insert(0, 1).affected_nodes(), vec![1]);
        assert_eq!(Operator::Delete(2, 0).affected_nodes(), vec![0]);
        assert_eq!(Operator::Reverse(0, 1).affected_nodes(), vec![0, 1]);
    }

    #[test]
    fn cpdag_collider_is_fully_compelled() {
        let c = dag(3, &[(0, 2), (1, 2)]).to_cpdag();
        assert_eq!(
            c.directed.iter().copied().collect::<Vec<_>>(),
            vec![(0, 2), (1, 2)]
        );
        assert!(c.undirected.is_empty());
    }

    #[test]
    fn cpdag_chain_is_fully_reversible() {
        let c = dag(3, &[(0, 1), (1, 2)]).to_cpdag();
        assert!(c.directed.is_empty());
        assert_eq!(
            c.undirected.iter().copied().collect::<Vec<_>>(),
            vec![(0, 1), (1, 2)]
        );
        // The three order-compatible DAGs on this skeleton share the CPDAG.
        for d in [
            dag(3, &[(1, 0), (1, 2)]),
            dag(3, &[(2, 1), (1, 0)]),
        ] {
            assert_eq!(d.to_cpdag(), c);
        }
    }

    #[test]
    fn cpdag_single_edge_undirected() {
        let c = dag(2, &[(0, 1)]).to_cpdag();
        assert!(c.directed.is_empty());
        assert_eq!(c.undirected.iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn cpdag_meek_r1_fires_past_a_vstructure() {
        // 0 -> 2 <- 1 plus 2 -> 3: the tail edge is compelled by R1.
        let c = dag(4, &[(0, 2), (1, 2), (2, 3)]).to_cpdag();
        assert!(c.directed.contains(&(2, 3)));
        assert!(c.undirected.is_empty());
    }

    /// Exhaustive q <= 4 check of the equivalence-class characterisation:
    /// two DAGs share a CPDAG iff they share skeleton and v-structures.
    #[test]
    fn cpdag_characterises_equivalence_classes() {
        for q in 2..=4 {
            let dags = crate::oracle::enumerate_dags(q).unwrap();
            let keyed: Vec<_> = dags
                .iter()
                .map(|d| ((d.skeleton(), d.v_structures()), d.to_cpdag()))
                .collect();
            for (i, (ki, ci)) in keyed.iter().enumerate() {
                for (kj, cj) in keyed.iter().skip(i + 1) {
                    assert_eq!(ki == kj, ci == cj);
                }
                // The CPDAG preserves the skeleton.
                let mut skel: BTreeSet<(usize, usize)> = ci.undirected.clone();
                skel.extend(ci.directed.iter().map(|&(u, v)| (u.min(v), u.max(v))));
                assert_eq!(&skel, &ki.0);
            }
        }
    }
}
