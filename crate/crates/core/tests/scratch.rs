//! Temporary diagnostics (deleted before release).

use catdag::mcmc::{run_chain, McmcConfig};
use catdag::simgen::{random_dag, random_sem, sample_binary};
use catdag::summaries::{mpm, ppi, sen_spe, Digraph};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

#[test]
#[ignore]
fn mixing_probe() {
    for rep in 0..3u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(1000 + rep);
        let truth = random_dag(10, 0.2, &mut rng).unwrap();
        let sem = random_sem(&truth, &mut rng);
        let ds = sample_binary(&sem, 2000, &mut rng).unwrap();
        println!("rep {rep}: true edges = {}", truth.edge_count());
        for (s, b) in [(5000, 1000), (20000, 4000), (60000, 10000)] {
            let cfg = McmcConfig::new(s, b, 7777 + rep);
            let trace = run_chain(&ds, &cfg).unwrap();
            let m = ppi(&trace).unwrap();
            let est = mpm(&m);
            let quality = sen_spe(&est.graph, &Digraph::from_dag(&truth)).unwrap();
            println!(
                "  S={s:>6} B={b:>5}: accept {:.3}, mpm edges {:>2}, SEN {:.1} SPE {:.1}",
                trace.acceptance_rate(),
                est.graph.edges.len(),
                quality.sen * 100.0,
                quality.spe * 100.0
            );
        }
    }
}
