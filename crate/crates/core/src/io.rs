//! Text formats shared by the library and the CLI: edge lists, CPDAG text,
//! PPI matrices as CSV, and line-delimited trace records. All node indices
//! are 1-based on disk; floats are printed with 17 significant digits so
//! that outputs round-trip bit-exactly.

use std::fmt::Write as _;

use serde_json::json;

use crate::dag::{Cpdag, Dag};
use crate::error::{Error, Result};
use crate::mcmc::{StoreTheta, Trace};
use crate::summaries::{Digraph, PpiMatrix};

/// 17-significant-digit scientific notation; round-trips any f64.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Edge list, one `u v` pair per line, 1-based.
pub fn edges_to_text(q: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> String {
    let mut out = format!("# q = {q}\n");
    for (u, v) in edges {
        let _ = writeln!(out, "{} {}", u + 1, v + 1);
    }
    out
}

pub fn dag_to_text(dag: &Dag) -> String {
    edges_to_text(dag.q(), dag.edges())
}

pub fn digraph_to_text(g: &Digraph) -> String {
    edges_to_text(g.q, g.edges.iter().copied())
}

/// Parses the edge-list format back into a DAG. Accepts `# q = N` headers
/// and blank lines; without a header the node count is the largest index.
pub fn dag_from_text(text: &str) -> Result<Dag> {
    let mut q: Option<usize> = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(eq) = rest.find('=') {
                if rest[..eq].trim() == "q" {
                    q = Some(rest[eq + 1..].trim().parse().map_err(|_| {
                        Error::input(format!("bad node count on line {}", lineno + 1))
                    })?);
                }
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (u, v) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::input(format!(
                    "expected 'u v' on line {}",
                    lineno + 1
                )))
            }
        };
        let parse = |s: &str| -> Result<usize> {
            let n: usize = s
                .parse()
                .map_err(|_| Error::input(format!("bad node index '{s}' on line {}", lineno + 1)))?;
            if n == 0 {
                return Err(Error::input("node indices are 1-based"));
            }
            Ok(n - 1)
        };
        edges.push((parse(u)?, parse(v)?));
    }
    let q = q.unwrap_or_else(|| {
        edges
            .iter()
            .map(|&(u, v)| u.max(v) + 1)
            .max()
            .unwrap_or(1)
    });
    Dag::from_edges(q, &edges)
}

/// CPDAG text: compelled edges as `u -> v`, reversible ones as `u -- v`.
pub fn cpdag_to_text(c: &Cpdag) -> String {
    let mut out = format!("# q = {}\n", c.q);
    for &(u, v) in &c.directed {
        let _ = writeln!(out, "{} -> {}", u + 1, v + 1);
    }
    for &(u, v) in &c.undirected {
        let _ = writeln!(out, "{} -- {}", u + 1, v + 1);
    }
    out
}

/// Dense labelled CSV of the PPI matrix.
pub fn ppi_to_csv(ppi: &PpiMatrix, names: &[String]) -> String {
    let mut out = String::from("from\\to");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for u in 0..ppi.q {
        out.push_str(&names[u]);
        for v in 0..ppi.q {
            out.push(',');
            out.push_str(&fmt_g17(ppi.get(u, v)));
        }
        out.push('\n');
    }
    out
}

/// Line-delimited JSON trace: one record per retained draw with the DAG edge
/// list (1-based) and, when stored, the theta tables keyed by node and
/// parent-configuration index.
pub fn trace_to_jsonl(trace: &Trace) -> String {
    let mut out = String::new();
    for (i, dag) in trace.dags.iter().enumerate() {
        let edges: Vec<[usize; 2]> = dag.edges().iter().map(|&(u, v)| [u + 1, v + 1]).collect();
        let mut record = json!({ "draw": i, "edges": edges });
        if trace.config.store_theta == StoreTheta::All {
            if let Some(thetas) = &trace.thetas {
                let theta = &thetas[i];
                let mut nodes = Vec::with_capacity(theta.q());
                for j in 0..theta.q() {
                    let node = theta.node(j);
                    let table: serde_json::Map<String, serde_json::Value> = node
                        .table
                        .iter()
                        .map(|(k, probs)| (k.to_string(), json!(probs)))
                        .collect();
                    nodes.push(json!({
                        "node": j + 1,
                        "parents": node.parents.iter().map(|&p| p + 1).collect::<Vec<_>>(),
                        "table": table,
                    }));
                }
                record["theta"] = json!(nodes);
            }
        }
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.5e-17, -123.456e100, 0.0] {
            let s = fmt_g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn edge_list_round_trips() {
        let dag = Dag::from_edges(4, &[(0, 1), (2, 3), (0, 3)]).unwrap();
        let text = dag_to_text(&dag);
        assert!(text.contains("1 2"));
        let back = dag_from_text(&text).unwrap();
        assert_eq!(back, dag);
        // Isolated trailing node survives via the header.
        let lonely = Dag::from_edges(5, &[(0, 1)]).unwrap();
        assert_eq!(dag_from_text(&dag_to_text(&lonely)).unwrap(), lonely);
    }

    #[test]
    fn edge_list_rejects_garbage() {
        assert!(dag_from_text("1 2 3\n").is_err());
        assert!(dag_from_text("0 1\n").is_err());
        assert!(dag_from_text("a b\n").is_err());
        // Cycle:
        assert!(dag_from_text("1 2\n2 1\n").is_err());
    }

    #[test]
    fn cpdag_text_shapes() {
        let c = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap().to_cpdag();
        let text = cpdag_to_text(&c);
        assert!(text.contains("1 -> 3"));
        assert!(text.contains("2 -> 3"));
        let chain = Dag::from_edges(2, &[(0, 1)]).unwrap().to_cpdag();
        assert!(cpdag_to_text(&chain).contains("1 -- 2"));
    }

    #[test]
    fn ppi_csv_layout() {
        let mut m = PpiMatrix::zeros(2);
        m.set(0, 1, 0.25);
        let names = vec!["A".to_string(), "B".to_string()];
        let csv = ppi_to_csv(&m, &names);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("from\\to,A,B"));
        assert!(lines[1].contains(&fmt_g17(0.25)));
    }
}
