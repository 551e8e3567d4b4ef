#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treevne_core::generators::{random_instance, RandomParams};
use treevne_core::{Instance, Request, ResourceVec, Substrate};

pub fn units(v: u64) -> ResourceVec {
    ResourceVec::from_units(&[v])
}

/// Star p - {l1, l2}; u (2) and w (1) joined by u -> w (1). Optimum 3.
pub fn t1() -> Instance {
    let mut s = Substrate::new(1);
    s.add_node("p", units(0), units(0)).unwrap();
    s.add_node("l1", units(3), units(1)).unwrap();
    s.add_node("l2", units(3), units(2)).unwrap();
    for (a, b) in [(0, 1), (1, 0), (0, 2), (2, 0)] {
        s.add_edge(a, b, units(10), units(1)).unwrap();
    }
    let mut r = Request::new(1);
    r.add_node("u", units(2)).unwrap();
    r.add_node("w", units(1)).unwrap();
    r.add_edge(0, 1, units(1)).unwrap();
    Instance::new(s, r).unwrap()
}

/// Instance `i` of the mixed random family: s in [2, 9], r in [1, 6],
/// p in {0.3, 0.7, 1.0}, tau in {1, 2}, both directions on every link.
pub fn family(i: u64) -> (RandomParams, Instance) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    rng.set_stream(i);
    let params = RandomParams {
        substrate_nodes: rng.random_range(2..=9),
        request_nodes: rng.random_range(1..=6),
        edge_prob: [0.3, 0.7, 1.0][rng.random_range(0..3)],
        tau: rng.random_range(1..=2),
        one_way_prob: 0.0,
    };
    (params, random_instance(&params, i).unwrap())
}

/// Same request with nodes reordered by `perm` and renamed.
pub fn relabel(request: &Request, seed: u64) -> Request {
    let mut perm: Vec<usize> = (0..request.node_count()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut at = vec![0; perm.len()];
    let mut out = Request::new(request.tau());
    for (k, &old) in perm.iter().enumerate() {
        at[old] = k;
        out.add_node(
            format!("n{k}_{}", request.node(old).id),
            request.node(old).demand.clone(),
        )
        .unwrap();
    }
    for e in request.edges() {
        out.add_edge(at[e.src], at[e.dst], e.demand.clone())
            .unwrap();
    }
    out
}

/// Every node and edge cost multiplied by `lambda`.
pub fn scale_costs(substrate: &Substrate, lambda: u64) -> Substrate {
    let mut out = substrate.clone();
    for i in 0..out.node_count() {
        let n = out.node(i).clone();
        out.set_node_resources(i, n.capacity, n.cost.saturating_scale(lambda));
    }
    for e in 0..out.edge_count() {
        let edge = out.edge(e).clone();
        out.set_edge_resources(e, edge.capacity, edge.cost.saturating_scale(lambda));
    }
    out
}
