//! Fixed inputs for the criterion benchmarks.

use treevne_core::bench::BenchCase;
use treevne_core::generators::{random_instance, RandomParams};
use treevne_core::Instance;

/// Fat tree with `f` ports and an Erdős–Rényi request of `r` nodes.
pub fn fat_tree_instance(f: usize, r: usize, seed: u64) -> Instance {
    BenchCase { f, r, p: 0.5, seed }
        .instance()
        .expect("valid grid point")
}

/// Small random tree sized for the exhaustive oracle.
pub fn small_instance(s: usize, r: usize, seed: u64) -> Instance {
    let params = RandomParams {
        substrate_nodes: s,
        request_nodes: r,
        edge_prob: 0.5,
        tau: 1,
        one_way_prob: 0.0,
    };
    random_instance(&params, seed).expect("valid parameters")
}
