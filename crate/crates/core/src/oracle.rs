//! Exhaustive search over node placements on a tree substrate.
//!
//! Every request edge is routed on the unique tree path between its hosts.
//! Placements are enumerated depth-first in lexicographic order of substrate
//! indices; partial placements that already overload an element or cannot
//! beat the incumbent are cut. The first cheapest placement wins.

use std::time::Instant;

use thiserror::Error;

use crate::model::{Mapping, ModelError, Outcome, Request, SolveResult, SolveStats, Substrate};
use crate::quantity::Cost;
use crate::tree::TreePaths;
use crate::validation::{is_feasible, mapping_cost};

/// Largest accepted product of per-node candidate counts.
pub const DEFAULT_BUDGET: u128 = 100_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("search space of {0} placements exceeds the budget of {1}")]
    BudgetExceeded(u128, u128),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

struct Search<'a> {
    sub: &'a Substrate,
    req: &'a Request,
    tau: usize,
    candidates: Vec<Vec<usize>>,
    /// Directed paths between every host pair; `None` when a direction is missing.
    paths: Vec<Vec<Option<Vec<usize>>>>,
    /// Request edges whose later endpoint (in index order) is the key.
    closing: Vec<Vec<usize>>,
    node_load: Vec<u128>,
    edge_load: Vec<u128>,
    placement: Vec<usize>,
    best: Option<(Cost, Vec<usize>)>,
    visited: u64,
}

impl Search<'_> {
    fn bound(&self, cost: Cost) -> bool {
        self.best.as_ref().is_some_and(|(b, _)| cost >= *b)
    }

    fn descend(&mut self, i: usize, cost: Cost) {
        self.visited += 1;
        if i == self.req.node_count() {
            self.best = Some((cost, self.placement.clone()));
            return;
        }
        let tau = self.tau;
        let node = self.req.node(i);
        for k in 0..self.candidates[i].len() {
            let v = self.candidates[i][k];
            let cap = &self.sub.node(v).capacity;
            let load = &mut self.node_load[v * tau..(v + 1) * tau];
            node.demand.accumulate_into(load);
            let mut next = cost.saturating_add(Cost::dot_vec(&node.demand, &self.sub.node(v).cost));
            let mut ok = cap.admits(load) && !next.is_saturated() && !self.bound(next);
            self.placement[i] = v;

            let mut routed = 0;
            if ok {
                for &e in &self.closing[i] {
                    let edge = self.req.edge(e);
                    let (a, b) = (self.placement[edge.src], self.placement[edge.dst]);
                    let Some(path) = &self.paths[a][b] else {
                        ok = false;
                        break;
                    };
                    for &s in path {
                        edge.demand
                            .accumulate_into(&mut self.edge_load[s * tau..(s + 1) * tau]);
                        next = next
                            .saturating_add(Cost::dot_vec(&edge.demand, &self.sub.edge(s).cost));
                    }
                    routed += 1;
                    let fits = path.iter().all(|&s| {
                        self.sub
                            .edge(s)
                            .capacity
                            .admits(&self.edge_load[s * tau..(s + 1) * tau])
                    });
                    if !fits || next.is_saturated() || self.bound(next) {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                self.descend(i + 1, next);
            }

            for &e in self.closing[i][..routed].iter().rev() {
                let edge = self.req.edge(e);
                let (a, b) = (self.placement[edge.src], self.placement[edge.dst]);
                for &s in self.paths[a][b].as_ref().expect("routed above") {
                    subtract(&mut self.edge_load[s * tau..(s + 1) * tau], &edge.demand);
                }
            }
            subtract(&mut self.node_load[v * tau..(v + 1) * tau], &node.demand);
        }
    }
}

fn subtract(load: &mut [u128], demand: &crate::quantity::ResourceVec) {
    for (l, q) in load.iter_mut().zip(demand.components()) {
        *l -= q.micros().expect("request demands are finite") as u128;
    }
}

/// Exact optimum by exhaustive search, with the default budget.
pub fn brute_force(substrate: &Substrate, request: &Request) -> Result<SolveResult, OracleError> {
    brute_force_with_budget(substrate, request, DEFAULT_BUDGET)
}

pub fn brute_force_with_budget(
    substrate: &Substrate,
    request: &Request,
    budget: u128,
) -> Result<SolveResult, OracleError> {
    let start = Instant::now();
    if substrate.tau() != request.tau() {
        return Err(ModelError::Dimension {
            expected: substrate.tau(),
            got: request.tau(),
        }
        .into());
    }
    let tree_paths = TreePaths::new(substrate)?;
    let s = substrate.node_count();
    let r = request.node_count();

    let candidates: Vec<Vec<usize>> = request
        .nodes()
        .iter()
        .map(|n| {
            (0..s)
                .filter(|&v| n.demand.leq(&substrate.node(v).capacity).unwrap_or(false))
                .collect()
        })
        .collect();
    let space = candidates
        .iter()
        .map(|c| c.len() as u128)
        .fold(1u128, |acc, n| acc.saturating_mul(n));
    if space > budget {
        return Err(OracleError::BudgetExceeded(space, budget));
    }

    let paths = (0..s)
        .map(|a| (0..s).map(|b| tree_paths.path(a, b).ok()).collect())
        .collect();
    let mut closing = vec![Vec::new(); r];
    for (e, edge) in request.edges().iter().enumerate() {
        closing[edge.src.max(edge.dst)].push(e);
    }

    let tau = substrate.tau();
    let mut search = Search {
        sub: substrate,
        req: request,
        tau,
        candidates,
        paths,
        closing,
        node_load: vec![0; s * tau],
        edge_load: vec![0; substrate.edge_count() * tau],
        placement: vec![0; r],
        best: None,
        visited: 0,
    };
    search.descend(0, Cost::ZERO);

    let outcome = match search.best.take() {
        None => Outcome::Infeasible,
        Some((cost, node_map)) => {
            let edge_map = request
                .edges()
                .iter()
                .map(|e| {
                    search.paths[node_map[e.src]][node_map[e.dst]]
                        .clone()
                        .expect("routed during search")
                })
                .collect();
            let mapping = Mapping { node_map, edge_map };
            if !is_feasible(substrate, request, &mapping)?
                || mapping_cost(substrate, request, &mapping) != cost
            {
                return Err(OracleError::Internal(
                    "incremental bookkeeping disagrees with validation".into(),
                ));
            }
            Outcome::Optimal { cost, mapping }
        }
    };
    Ok(SolveResult {
        outcome,
        stats: SolveStats {
            transformed_nodes: s,
            table_entries: 0,
            inner_iterations: search.visited,
            elapsed: start.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Status;
    use crate::quantity::ResourceVec;

    fn units(v: u64) -> ResourceVec {
        ResourceVec::from_units(&[v])
    }

    fn t1() -> (Substrate, Request) {
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
        (s, r)
    }

    /// Hand enumeration of the four placements of T1:
    /// (l1,l1) = 2+1 = 3; (l2,l2) = 4+2 = 6; (l1,l2) = 2+2+2 = 6; (l2,l1) = 4+1+2 = 7.
    #[test]
    fn t1_optimum_is_three() {
        let (s, r) = t1();
        let res = brute_force(&s, &r).unwrap();
        assert_eq!(res.cost(), Some(Cost::from_units(3)));
        assert_eq!(res.mapping().unwrap().node_map, [1, 1]);
    }

    #[test]
    fn single_node_substrate_uses_empty_path() {
        let mut s = Substrate::new(1);
        s.add_node("x", units(5), units(2)).unwrap();
        let mut r = Request::new(1);
        r.add_node("u", units(1)).unwrap();
        r.add_node("w", units(1)).unwrap();
        r.add_edge(0, 1, units(1)).unwrap();
        let res = brute_force(&s, &r).unwrap();
        assert_eq!(res.cost(), Some(Cost::from_units(4)));
        assert_eq!(res.mapping().unwrap().edge_map, [Vec::<usize>::new()]);
    }

    #[test]
    fn partition_like_instances() {
        let gadget = |items: &[u64], half: u64| {
            let mut s = Substrate::new(1);
            s.add_node("a", units(half), units(0)).unwrap();
            s.add_node("b", units(half), units(0)).unwrap();
            s.add_edge(0, 1, units(0), units(0)).unwrap();
            s.add_edge(1, 0, units(0), units(0)).unwrap();
            let mut r = Request::new(1);
            for (i, &x) in items.iter().enumerate() {
                r.add_node(format!("x{i}"), units(x)).unwrap();
            }
            brute_force(&s, &r).unwrap().status()
        };
        assert_eq!(gadget(&[1, 1], 1), Status::Optimal);
        assert_eq!(gadget(&[3, 1, 2, 2], 4), Status::Optimal);
        assert_eq!(gadget(&[2, 2, 2], 3), Status::Infeasible);
    }

    #[test]
    fn budget_is_enforced() {
        let (s, r) = t1();
        assert!(matches!(
            brute_force_with_budget(&s, &r, 3),
            Err(OracleError::BudgetExceeded(4, 3))
        ));
    }

    #[test]
    fn never_worse_than_a_handmade_feasible_mapping() {
        let (s, r) = t1();
        let hand = Mapping {
            node_map: vec![2, 1],
            edge_map: vec![vec![s.find_edge(2, 0).unwrap(), s.find_edge(0, 1).unwrap()]],
        };
        assert!(is_feasible(&s, &r, &hand).unwrap());
        let best = brute_force(&s, &r).unwrap().cost().unwrap();
        assert!(best <= mapping_cost(&s, &r, &hand));
    }

    #[test]
    fn missing_direction_rules_out_placements() {
        let mut s = Substrate::new(1);
        s.add_node("a", units(2), units(0)).unwrap();
        s.add_node("b", units(1), units(0)).unwrap();
        s.add_edge(0, 1, units(5), units(1)).unwrap();
        let mut r = Request::new(1);
        r.add_node("r0", units(2)).unwrap();
        r.add_node("r1", units(1)).unwrap();
        r.add_edge(1, 0, units(0)).unwrap();
        assert_eq!(brute_force(&s, &r).unwrap().status(), Status::Infeasible);
    }
}
