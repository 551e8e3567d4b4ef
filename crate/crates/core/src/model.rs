//! Instances, mappings and solve results.
//!
//! Identifiers are opaque strings at the file boundary and dense indices
//! everywhere else. Node `i` of a [`Substrate`] is `substrate.node(i)`, edge
//! `e` is `substrate.edge(e)`; the same goes for [`Request`].

use std::collections::HashMap;
use std::time::Duration;

use thiserror::Error;

use crate::quantity::{Cost, QuantityError, ResourceVec};

/// Hard upper bound on request size; subsets are indexed by `u32` masks.
pub const MAX_REQUEST_NODES: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate edge `{0}->{1}`")]
    DuplicateEdge(String, String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("expected {expected} resource components, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("request demand of `{0}` must be finite")]
    UnboundedDemand(String),
    #[error("request has more than {MAX_REQUEST_NODES} nodes")]
    RequestTooLarge,
    #[error("substrate is not a tree: {0}")]
    NotATree(String),
    #[error("substrate is not binary: `{0}` has {1} children")]
    NotBinary(String, usize),
    #[error("substrate has no edge `{0}->{1}`")]
    MissingEdge(String, String),
    #[error("mapping is not total: {0}")]
    IncompleteMapping(String),
    #[error(transparent)]
    Quantity(#[from] QuantityError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstrateNode {
    pub id: String,
    pub capacity: ResourceVec,
    pub cost: ResourceVec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstrateEdge {
    pub src: usize,
    pub dst: usize,
    pub capacity: ResourceVec,
    pub cost: ResourceVec,
}

/// The physical network: a directed graph with capacity and cost vectors on
/// every node and edge.
#[derive(Debug, Clone)]
pub struct Substrate {
    tau: usize,
    nodes: Vec<SubstrateNode>,
    edges: Vec<SubstrateEdge>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl PartialEq for Substrate {
    fn eq(&self, other: &Self) -> bool {
        self.tau == other.tau && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for Substrate {}

impl Substrate {
    pub fn new(tau: usize) -> Self {
        Substrate {
            tau,
            nodes: Vec::new(),
            edges: Vec::new(),
            node_index: HashMap::new(),
            edge_index: HashMap::new(),
        }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[SubstrateEdge] {
        &self.edges
    }

    pub fn node(&self, i: usize) -> &SubstrateNode {
        &self.nodes[i]
    }

    pub fn edge(&self, e: usize) -> &SubstrateEdge {
        &self.edges[e]
    }

    pub fn find_node(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn find_edge(&self, src: usize, dst: usize) -> Option<usize> {
        self.edge_index.get(&(src, dst)).copied()
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.nodes[i].id
    }

    /// `"src->dst"` label of an edge.
    pub fn edge_label(&self, e: usize) -> String {
        let edge = &self.edges[e];
        format!("{}->{}", self.nodes[edge.src].id, self.nodes[edge.dst].id)
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        capacity: ResourceVec,
        cost: ResourceVec,
    ) -> Result<usize, ModelError> {
        let id = id.into();
        self.check_tau(&capacity)?;
        self.check_tau(&cost)?;
        if self.node_index.contains_key(&id) {
            return Err(ModelError::DuplicateNode(id));
        }
        let idx = self.nodes.len();
        self.node_index.insert(id.clone(), idx);
        self.nodes.push(SubstrateNode { id, capacity, cost });
        Ok(idx)
    }

    pub fn add_edge(
        &mut self,
        src: usize,
        dst: usize,
        capacity: ResourceVec,
        cost: ResourceVec,
    ) -> Result<usize, ModelError> {
        self.check_tau(&capacity)?;
        self.check_tau(&cost)?;
        if src == dst {
            return Err(ModelError::SelfLoop(self.nodes[src].id.clone()));
        }
        if self.edge_index.contains_key(&(src, dst)) {
            return Err(ModelError::DuplicateEdge(
                self.nodes[src].id.clone(),
                self.nodes[dst].id.clone(),
            ));
        }
        let idx = self.edges.len();
        self.edge_index.insert((src, dst), idx);
        self.edges.push(SubstrateEdge {
            src,
            dst,
            capacity,
            cost,
        });
        Ok(idx)
    }

    /// Adds an edge by endpoint identifiers.
    pub fn add_edge_by_id(
        &mut self,
        src: &str,
        dst: &str,
        capacity: ResourceVec,
        cost: ResourceVec,
    ) -> Result<usize, ModelError> {
        let s = self.require_node(src)?;
        let d = self.require_node(dst)?;
        self.add_edge(s, d, capacity, cost)
    }

    pub fn require_node(&self, id: &str) -> Result<usize, ModelError> {
        self.find_node(id)
            .ok_or_else(|| ModelError::UnknownNode(id.to_string()))
    }

    pub fn set_node_resources(&mut self, i: usize, capacity: ResourceVec, cost: ResourceVec) {
        assert_eq!(capacity.tau(), self.tau);
        assert_eq!(cost.tau(), self.tau);
        self.nodes[i].capacity = capacity;
        self.nodes[i].cost = cost;
    }

    pub fn set_edge_resources(&mut self, e: usize, capacity: ResourceVec, cost: ResourceVec) {
        assert_eq!(capacity.tau(), self.tau);
        assert_eq!(cost.tau(), self.tau);
        self.edges[e].capacity = capacity;
        self.edges[e].cost = cost;
    }

    /// Moves an existing edge onto new endpoints, keeping its resources and
    /// its position in the edge list.
    pub(crate) fn rewire_edge(
        &mut self,
        e: usize,
        src: usize,
        dst: usize,
    ) -> Result<(), ModelError> {
        if self.edge_index.contains_key(&(src, dst)) {
            return Err(ModelError::DuplicateEdge(
                self.nodes[src].id.clone(),
                self.nodes[dst].id.clone(),
            ));
        }
        let old = (self.edges[e].src, self.edges[e].dst);
        self.edge_index.remove(&old);
        self.edge_index.insert((src, dst), e);
        self.edges[e].src = src;
        self.edges[e].dst = dst;
        Ok(())
    }

    /// Distinct undirected neighbours of every node, in first-edge order.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            // a tree has at most two directed edges per pair
            if !adj[e.src].contains(&e.dst) {
                adj[e.src].push(e.dst);
                adj[e.dst].push(e.src);
            }
        }
        adj
    }

    fn check_tau(&self, v: &ResourceVec) -> Result<(), ModelError> {
        if v.tau() != self.tau {
            Err(ModelError::Dimension {
                expected: self.tau,
                got: v.tau(),
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestNode {
    pub id: String,
    pub demand: ResourceVec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestEdge {
    pub src: usize,
    pub dst: usize,
    pub demand: ResourceVec,
}

/// The virtual network to embed. Demands are always finite.
#[derive(Debug, Clone)]
pub struct Request {
    tau: usize,
    nodes: Vec<RequestNode>,
    edges: Vec<RequestEdge>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl PartialEq for Request {
    fn eq(&self, other: &Self) -> bool {
        self.tau == other.tau && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for Request {}

impl Request {
    pub fn new(tau: usize) -> Self {
        Request {
            tau,
            nodes: Vec::new(),
            edges: Vec::new(),
            node_index: HashMap::new(),
            edge_index: HashMap::new(),
        }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[RequestNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RequestEdge] {
        &self.edges
    }

    pub fn node(&self, i: usize) -> &RequestNode {
        &self.nodes[i]
    }

    pub fn edge(&self, e: usize) -> &RequestEdge {
        &self.edges[e]
    }

    pub fn find_node(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn find_edge(&self, src: usize, dst: usize) -> Option<usize> {
        self.edge_index.get(&(src, dst)).copied()
    }

    pub fn edge_label(&self, e: usize) -> String {
        let edge = &self.edges[e];
        format!("{}->{}", self.nodes[edge.src].id, self.nodes[edge.dst].id)
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        demand: ResourceVec,
    ) -> Result<usize, ModelError> {
        let id = id.into();
        self.check_demand(&id, &demand)?;
        if self.node_index.contains_key(&id) {
            return Err(ModelError::DuplicateNode(id));
        }
        if self.nodes.len() == MAX_REQUEST_NODES {
            return Err(ModelError::RequestTooLarge);
        }
        let idx = self.nodes.len();
        self.node_index.insert(id.clone(), idx);
        self.nodes.push(RequestNode { id, demand });
        Ok(idx)
    }

    pub fn add_edge(
        &mut self,
        src: usize,
        dst: usize,
        demand: ResourceVec,
    ) -> Result<usize, ModelError> {
        let label = format!("{}->{}", self.nodes[src].id, self.nodes[dst].id);
        self.check_demand(&label, &demand)?;
        if src == dst {
            return Err(ModelError::SelfLoop(self.nodes[src].id.clone()));
        }
        if self.edge_index.contains_key(&(src, dst)) {
            return Err(ModelError::DuplicateEdge(
                self.nodes[src].id.clone(),
                self.nodes[dst].id.clone(),
            ));
        }
        let idx = self.edges.len();
        self.edge_index.insert((src, dst), idx);
        self.edges.push(RequestEdge { src, dst, demand });
        Ok(idx)
    }

    pub fn add_edge_by_id(
        &mut self,
        src: &str,
        dst: &str,
        demand: ResourceVec,
    ) -> Result<usize, ModelError> {
        let s = self.require_node(src)?;
        let d = self.require_node(dst)?;
        self.add_edge(s, d, demand)
    }

    pub fn require_node(&self, id: &str) -> Result<usize, ModelError> {
        self.find_node(id)
            .ok_or_else(|| ModelError::UnknownNode(id.to_string()))
    }

    fn check_demand(&self, label: &str, demand: &ResourceVec) -> Result<(), ModelError> {
        if demand.tau() != self.tau {
            return Err(ModelError::Dimension {
                expected: self.tau,
                got: demand.tau(),
            });
        }
        if demand.has_unbounded() {
            return Err(ModelError::UnboundedDemand(label.to_string()));
        }
        Ok(())
    }
}

/// A substrate paired with the request to embed into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub substrate: Substrate,
    pub request: Request,
}

impl Instance {
    pub fn new(substrate: Substrate, request: Request) -> Result<Self, ModelError> {
        if substrate.tau() != request.tau() {
            return Err(ModelError::Dimension {
                expected: substrate.tau(),
                got: request.tau(),
            });
        }
        Ok(Instance { substrate, request })
    }
}

/// Node placement plus one directed substrate walk (edge indices) per
/// request edge. An empty walk means both endpoints share a substrate node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Mapping {
    pub node_map: Vec<usize>,
    pub edge_map: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Optimal { cost: Cost, mapping: Mapping },
    Infeasible,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    /// Substrate size after transformation (equal to `s` for the oracle).
    pub transformed_nodes: usize,
    pub table_entries: u64,
    pub inner_iterations: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub outcome: Outcome,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn status(&self) -> Status {
        match self.outcome {
            Outcome::Optimal { .. } => Status::Optimal,
            Outcome::Infeasible => Status::Infeasible,
        }
    }

    pub fn cost(&self) -> Option<Cost> {
        match &self.outcome {
            Outcome::Optimal { cost, .. } => Some(*cost),
            Outcome::Infeasible => None,
        }
    }

    pub fn mapping(&self) -> Option<&Mapping> {
        match &self.outcome {
            Outcome::Optimal { mapping, .. } => Some(mapping),
            Outcome::Infeasible => None,
        }
    }
}
