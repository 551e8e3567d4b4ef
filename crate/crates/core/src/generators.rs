//! Seeded instance generators.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. Each
//! element class draws from its own stream (see the `STREAM_*` constants), so
//! changing how one class is drawn never shifts another. Continuous draws are
//! integers in micro-units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Instance, ModelError, Request, Substrate};
use crate::quantity::{Quantity, ResourceVec, MICROS_PER_UNIT};

pub const STREAM_FAT_TREE_NODES: u64 = 0;
pub const STREAM_FAT_TREE_EDGES: u64 = 1;
pub const STREAM_ER_STRUCTURE: u64 = 2;
pub const STREAM_ER_DEMANDS: u64 = 3;
pub const STREAM_ER_BANDWIDTH: u64 = 4;
pub const STREAM_RANDOM_SUBSTRATE: u64 = 5;
pub const STREAM_RANDOM_REQUEST: u64 = 6;

pub const DEFAULT_MAX_RESAMPLE: u32 = 1000;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no connected request after {0} draws")]
    ResampleExhausted(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `[lo, hi]` units, in micro-units.
fn micros_between(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    rng.random_range(lo * MICROS_PER_UNIT..=hi * MICROS_PER_UNIT)
}

fn scalar(micros: u64) -> ResourceVec {
    ResourceVec::new(vec![
        Quantity::from_micros(micros).expect("generated values are small")
    ])
}

/// `base` units scaled by a factor given in micro-units.
fn perturbed(base: u64, factor_micros: u64) -> ResourceVec {
    scalar(base * factor_micros)
}

/// Three-level fat-tree forwarding abstraction with `f` ports per switch.
///
/// Nodes, in breadth-first order: `root`, `pod{i}` for `i < f`,
/// `tor{i}_{j}` for `j < f/2`, `srv{i}_{j}_{k}` for `k < f/2`. The node
/// stream draws, per node in that order, a capacity factor (servers only)
/// and a cost. The edge stream draws, per non-root node in the same order,
/// factor and cost for the edge from its parent, then for the edge back.
pub fn fat_tree(f: usize, seed: u64) -> Result<Substrate, GenError> {
    if !(4..=16).contains(&f) || !f.is_multiple_of(2) {
        return Err(GenError::InvalidParameter(format!(
            "ports must be even in 4..=16, got {f}"
        )));
    }
    let half = f / 2;
    let mut nodes: Vec<(String, Option<usize>, u64)> = vec![("root".into(), None, 0)];
    for i in 0..f {
        nodes.push((format!("pod{i}"), Some(0), (half * half) as u64));
    }
    for i in 0..f {
        for j in 0..half {
            nodes.push((format!("tor{i}_{j}"), Some(1 + i), half as u64));
        }
    }
    let tor_base = 1 + f;
    for i in 0..f {
        for j in 0..half {
            for k in 0..half {
                nodes.push((format!("srv{i}_{j}_{k}"), Some(tor_base + i * half + j), 1));
            }
        }
    }
    let server_base = tor_base + f * half;

    let mut node_rng = rng(seed, STREAM_FAT_TREE_NODES);
    let mut sub = Substrate::new(1);
    for (idx, (id, _, _)) in nodes.iter().enumerate() {
        let capacity = if idx >= server_base {
            perturbed(1, micros_between(&mut node_rng, 1, 10))
        } else {
            ResourceVec::zeros(1)
        };
        let cost = scalar(micros_between(&mut node_rng, 1, 10));
        sub.add_node(id.clone(), capacity, cost)?;
    }

    let mut edge_rng = rng(seed, STREAM_FAT_TREE_EDGES);
    for (child, (_, parent, base)) in nodes.iter().enumerate() {
        let Some(parent) = *parent else { continue };
        for (a, b) in [(parent, child), (child, parent)] {
            let capacity = perturbed(*base, micros_between(&mut edge_rng, 1, 10));
            let cost = scalar(micros_between(&mut edge_rng, 1, 10));
            sub.add_edge(a, b, capacity, cost)?;
        }
    }
    Ok(sub)
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Directed Erdős–Rényi request over ordered pairs, redrawn until the
/// underlying undirected graph is connected.
///
/// Node demands are uniform on [1, 5]. Each node with outgoing edges draws a
/// total on [1, 5] and integer weights on [1, 10^6], one per outgoing edge in
/// target order; edge `k` gets `floor(total * w_k / W)` and the last edge also
/// takes the rounding remainder.
pub fn er_request(n: usize, p: f64, seed: u64, max_resample: u32) -> Result<Request, GenError> {
    if n == 0 || n > crate::model::MAX_REQUEST_NODES {
        return Err(GenError::InvalidParameter(format!(
            "node count must be in 1..={}, got {n}",
            crate::model::MAX_REQUEST_NODES
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GenError::InvalidParameter(format!(
            "probability must be in (0, 1], got {p}"
        )));
    }
    let mut structure = rng(seed, STREAM_ER_STRUCTURE);
    let mut draws = 0;
    let edges = loop {
        draws += 1;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && structure.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        if connected(n, &edges) {
            break edges;
        }
        if draws > max_resample {
            return Err(GenError::ResampleExhausted(draws));
        }
    };

    let mut req = Request::new(1);
    let mut demands = rng(seed, STREAM_ER_DEMANDS);
    for i in 0..n {
        req.add_node(format!("r{i}"), scalar(micros_between(&mut demands, 1, 5)))?;
    }
    let mut bandwidth = rng(seed, STREAM_ER_BANDWIDTH);
    for i in 0..n {
        let targets: Vec<usize> = edges.iter().filter(|e| e.0 == i).map(|e| e.1).collect();
        if targets.is_empty() {
            continue;
        }
        let total = micros_between(&mut bandwidth, 1, 5) as u128;
        let weights: Vec<u128> = targets
            .iter()
            .map(|_| bandwidth.random_range(1..=1_000_000u64) as u128)
            .collect();
        let sum: u128 = weights.iter().sum();
        let mut left = total;
        for (k, (&j, &w)) in targets.iter().zip(&weights).enumerate() {
            let share = if k + 1 == targets.len() {
                left
            } else {
                total * w / sum
            };
            left -= share;
            req.add_edge(i, j, scalar(share as u64))?;
        }
    }
    Ok(req)
}

/// Two hosts of capacity `B/2` joined by zero-capacity edges, and one request
/// node per item. Feasible (at cost zero) iff the items split evenly.
pub fn partition_gadget(items: &[u64]) -> Result<Instance, GenError> {
    if items.is_empty() {
        return Err(GenError::InvalidParameter("item list is empty".into()));
    }
    if items.len() > crate::model::MAX_REQUEST_NODES {
        return Err(GenError::InvalidParameter(format!(
            "at most {} items",
            crate::model::MAX_REQUEST_NODES
        )));
    }
    if items.contains(&0) {
        return Err(GenError::InvalidParameter("items must be positive".into()));
    }
    let total: u64 = items.iter().sum();
    let half = scalar(total * (MICROS_PER_UNIT / 2));
    let mut sub = Substrate::new(1);
    let a = sub.add_node("a", half.clone(), ResourceVec::zeros(1))?;
    let b = sub.add_node("b", half, ResourceVec::zeros(1))?;
    sub.add_edge(a, b, ResourceVec::zeros(1), ResourceVec::zeros(1))?;
    sub.add_edge(b, a, ResourceVec::zeros(1), ResourceVec::zeros(1))?;
    let mut req = Request::new(1);
    for (i, &x) in items.iter().enumerate() {
        req.add_node(format!("x{i}"), scalar(x * MICROS_PER_UNIT))?;
    }
    Ok(Instance::new(sub, req)?)
}

/// Parameters of the small random family used for equivalence checks.
#[derive(Debug, Clone, Copy)]
pub struct RandomParams {
    pub substrate_nodes: usize,
    pub request_nodes: usize,
    pub edge_prob: f64,
    pub tau: usize,
    /// Chance that one direction of a substrate link is left out.
    pub one_way_prob: f64,
}

/// Multiples of one half in `[0, hi]`.
fn halves(rng: &mut ChaCha8Rng, hi: u64) -> Quantity {
    Quantity::from_micros(rng.random_range(0..=2 * hi) * (MICROS_PER_UNIT / 2)).expect("small")
}

fn halves_vec(rng: &mut ChaCha8Rng, tau: usize, hi: u64) -> ResourceVec {
    ResourceVec::new((0..tau).map(|_| halves(rng, hi)).collect())
}

/// A random tree (node `i` hangs off a uniform earlier node) with capacities
/// and costs in [0, 10] drawn independently per element and direction, and a
/// random directed request with node demands in [0, 5] and edge demands in
/// [0, 3], each in steps of 0.5.
pub fn random_instance(params: &RandomParams, seed: u64) -> Result<Instance, GenError> {
    let RandomParams {
        substrate_nodes: s,
        request_nodes: r,
        edge_prob,
        tau,
        one_way_prob,
    } = *params;
    if s == 0 || tau == 0 || r > crate::model::MAX_REQUEST_NODES {
        return Err(GenError::InvalidParameter(
            "need s >= 1, tau >= 1, r <= 30".into(),
        ));
    }
    let mut g = rng(seed, STREAM_RANDOM_SUBSTRATE);
    let mut sub = Substrate::new(tau);
    for i in 0..s {
        let cap = halves_vec(&mut g, tau, 10);
        let cost = halves_vec(&mut g, tau, 10);
        sub.add_node(format!("s{i}"), cap, cost)?;
    }
    for child in 1..s {
        let parent = g.random_range(0..child);
        let pair = if g.random_bool(0.5) {
            (parent, child)
        } else {
            (child, parent)
        };
        let keep_both = !g.random_bool(one_way_prob.clamp(0.0, 1.0));
        let dirs: &[(usize, usize)] = if keep_both {
            &[pair, (pair.1, pair.0)]
        } else {
            &[pair]
        };
        for &(a, b) in dirs {
            let cap = halves_vec(&mut g, tau, 10);
            let cost = halves_vec(&mut g, tau, 10);
            sub.add_edge(a, b, cap, cost)?;
        }
    }

    let mut h = rng(seed, STREAM_RANDOM_REQUEST);
    let mut req = Request::new(tau);
    for i in 0..r {
        req.add_node(format!("q{i}"), halves_vec(&mut h, tau, 5))?;
    }
    for i in 0..r {
        for j in 0..r {
            if i != j && h.random_bool(edge_prob.clamp(0.0, 1.0)) {
                let d = halves_vec(&mut h, tau, 3);
                req.add_edge(i, j, d)?;
            }
        }
    }
    Ok(Instance::new(sub, req)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{check_tree, RootedTree};

    #[test]
    fn fat_tree_shape() {
        for f in [4, 6, 8, 16] {
            let t = fat_tree(f, 1).unwrap();
            check_tree(&t).unwrap();
            let servers = t.nodes().iter().filter(|n| n.id.starts_with("srv")).count();
            assert_eq!(servers, f * f * f / 4);
            assert_eq!(t.node_count() - servers, 1 + f + f * f / 2);
            for n in t.nodes() {
                assert_eq!(n.id.starts_with("srv"), !n.capacity.is_zero(), "{}", n.id);
            }
            assert_eq!(t.edge_count(), 2 * (t.node_count() - 1));
            let tree = RootedTree::new(&t, 0).unwrap();
            assert!(tree
                .children
                .iter()
                .enumerate()
                .all(|(v, c)| c.is_empty() == t.node_id(v).starts_with("srv")));
        }
        assert_eq!(
            fat_tree(16, 0)
                .unwrap()
                .nodes()
                .iter()
                .filter(|n| n.id.starts_with("srv"))
                .count(),
            1024
        );
        assert!(fat_tree(5, 0).is_err());
        assert!(fat_tree(18, 0).is_err());
    }

    #[test]
    fn fat_tree_layers_scale_base_bandwidth() {
        let t = fat_tree(4, 3).unwrap();
        let units = |id: &str, other: &str| {
            let e = t
                .find_edge(t.find_node(id).unwrap(), t.find_node(other).unwrap())
                .unwrap();
            t.edge(e).capacity.get(0).micros().unwrap() as f64 / 1e6
        };
        // base 1, 2, 4 times a factor in [1, 10]
        let (srv, tor, pod) = (
            units("srv0_0_0", "tor0_0"),
            units("tor0_0", "pod0"),
            units("pod0", "root"),
        );
        assert!((1.0..=10.0).contains(&srv));
        assert!((2.0..=20.0).contains(&tor));
        assert!((4.0..=40.0).contains(&pod));
    }

    #[test]
    fn fat_tree_is_deterministic_per_seed() {
        assert_eq!(fat_tree(6, 9).unwrap(), fat_tree(6, 9).unwrap());
        assert_ne!(fat_tree(6, 9).unwrap(), fat_tree(6, 10).unwrap());
    }

    #[test]
    fn er_examples() {
        let one = er_request(1, 0.3, 4, 10).unwrap();
        assert_eq!((one.node_count(), one.edge_count()), (1, 0));
        let full = er_request(5, 1.0, 4, 10).unwrap();
        assert_eq!(full.edge_count(), 20);
        assert!(er_request(0, 0.5, 0, 10).is_err());
        assert!(er_request(3, 0.0, 0, 10).is_err());
        assert!(matches!(
            er_request(12, 0.01, 0, 2),
            Err(GenError::ResampleExhausted(_))
        ));
    }

    #[test]
    fn er_bandwidth_per_node_is_in_range_and_connected() {
        for seed in 0..30 {
            let r = er_request(7, 0.4, seed, DEFAULT_MAX_RESAMPLE).unwrap();
            let pairs: Vec<(usize, usize)> = r.edges().iter().map(|e| (e.src, e.dst)).collect();
            assert!(connected(7, &pairs));
            for i in 0..7 {
                let out: Vec<u64> = r
                    .edges()
                    .iter()
                    .filter(|e| e.src == i)
                    .map(|e| e.demand.get(0).micros().unwrap())
                    .collect();
                if !out.is_empty() {
                    let total: u64 = out.iter().sum();
                    assert!((1_000_000..=5_000_000).contains(&total));
                }
            }
            for n in r.nodes() {
                assert!((1_000_000..=5_000_000).contains(&n.demand.get(0).micros().unwrap()));
            }
        }
    }

    #[test]
    fn partition_gadget_halves_capacity() {
        let odd = partition_gadget(&[1, 2]).unwrap();
        assert_eq!(odd.substrate.node(0).capacity.to_string(), "[1.5]");
        assert_eq!(odd.request.node_count(), 2);
        assert!(partition_gadget(&[]).is_err());
    }

    #[test]
    fn random_family_respects_parameters() {
        let p = RandomParams {
            substrate_nodes: 6,
            request_nodes: 4,
            edge_prob: 1.0,
            tau: 2,
            one_way_prob: 0.0,
        };
        let inst = random_instance(&p, 11).unwrap();
        check_tree(&inst.substrate).unwrap();
        assert_eq!(inst.substrate.edge_count(), 10);
        assert_eq!(inst.request.edge_count(), 12);
        assert_eq!(inst.substrate.tau(), 2);
        let one_way = RandomParams {
            one_way_prob: 1.0,
            ..p
        };
        assert_eq!(
            random_instance(&one_way, 11)
                .unwrap()
                .substrate
                .edge_count(),
            5
        );
    }
}
