//! Validity and feasibility of mappings, and their exact cost.
//!
//! A mapping is *valid* when every request edge follows a simple directed
//! walk between the hosts of its endpoints and every single request element
//! fits the capacity of each substrate element it uses. It is *feasible*
//! when, in addition, the summed demands on every substrate node and edge fit.

use std::fmt;

use serde::Serialize;

use crate::model::{Mapping, ModelError, Request, Substrate};
use crate::quantity::{Cost, Quantity, ResourceVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    NodeCapacity,
    EdgeCapacity,
    PathEndpoints,
    PathDisconnected,
    PerElementCapacity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Request and/or substrate identifiers involved.
    pub elements: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allowed: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}", self.kind, self.elements.join(", "))?;
        if let (Some(o), Some(a)) = (&self.observed, &self.allowed) {
            write!(f, ": {o} exceeds {a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

fn check_shape(
    substrate: &Substrate,
    request: &Request,
    mapping: &Mapping,
) -> Result<(), ModelError> {
    if mapping.node_map.len() != request.node_count() {
        return Err(ModelError::IncompleteMapping(format!(
            "{} node placements for {} request nodes",
            mapping.node_map.len(),
            request.node_count()
        )));
    }
    if mapping.edge_map.len() != request.edge_count() {
        return Err(ModelError::IncompleteMapping(format!(
            "{} edge paths for {} request edges",
            mapping.edge_map.len(),
            request.edge_count()
        )));
    }
    if let Some(&bad) = mapping
        .node_map
        .iter()
        .find(|&&v| v >= substrate.node_count())
    {
        return Err(ModelError::UnknownNode(format!("#{bad}")));
    }
    if let Some(&bad) = mapping
        .edge_map
        .iter()
        .flatten()
        .find(|&&e| e >= substrate.edge_count())
    {
        return Err(ModelError::IncompleteMapping(format!(
            "unknown substrate edge #{bad}"
        )));
    }
    Ok(())
}

/// Per-element checks; no summation over request elements.
pub fn check_valid(
    substrate: &Substrate,
    request: &Request,
    mapping: &Mapping,
) -> Result<ValidationReport, ModelError> {
    check_shape(substrate, request, mapping)?;
    let mut report = ValidationReport::default();

    for (i, node) in request.nodes().iter().enumerate() {
        let host = substrate.node(mapping.node_map[i]);
        if !node.demand.leq(&host.capacity)? {
            report.violations.push(Violation {
                kind: ViolationKind::PerElementCapacity,
                elements: vec![node.id.clone(), host.id.clone()],
                observed: Some(node.demand.to_string()),
                allowed: Some(host.capacity.to_string()),
            });
        }
    }

    for (e, edge) in request.edges().iter().enumerate() {
        let path = &mapping.edge_map[e];
        let from = mapping.node_map[edge.src];
        let to = mapping.node_map[edge.dst];
        let label = request.edge_label(e);

        let (start, end) = match (path.first(), path.last()) {
            (Some(&first), Some(&last)) => (substrate.edge(first).src, substrate.edge(last).dst),
            _ => (from, from),
        };
        if start != from || end != to {
            report.violations.push(Violation {
                kind: ViolationKind::PathEndpoints,
                elements: vec![label.clone()],
                observed: Some(format!(
                    "{}..{}",
                    substrate.node_id(start),
                    substrate.node_id(end)
                )),
                allowed: Some(format!(
                    "{}..{}",
                    substrate.node_id(from),
                    substrate.node_id(to)
                )),
            });
        }

        let broken = path
            .windows(2)
            .any(|w| substrate.edge(w[0]).dst != substrate.edge(w[1]).src);
        let mut visited = Vec::with_capacity(path.len() + 1);
        if let Some(&first) = path.first() {
            visited.push(substrate.edge(first).src);
        }
        visited.extend(path.iter().map(|&s| substrate.edge(s).dst));
        visited.sort_unstable();
        let revisits = visited.windows(2).any(|w| w[0] == w[1]);
        if broken || revisits {
            report.violations.push(Violation {
                kind: ViolationKind::PathDisconnected,
                elements: vec![label.clone()],
                observed: None,
                allowed: None,
            });
        }

        for &s in path {
            let sub_edge = substrate.edge(s);
            if !edge.demand.leq(&sub_edge.capacity)? {
                report.violations.push(Violation {
                    kind: ViolationKind::PerElementCapacity,
                    elements: vec![label.clone(), substrate.edge_label(s)],
                    observed: Some(edge.demand.to_string()),
                    allowed: Some(sub_edge.capacity.to_string()),
                });
            }
        }
    }
    Ok(report)
}

/// Wide per-component loads on every substrate node and edge.
struct Loads {
    tau: usize,
    nodes: Vec<u128>,
    edges: Vec<u128>,
}

impl Loads {
    fn compute(substrate: &Substrate, request: &Request, mapping: &Mapping) -> Loads {
        let tau = substrate.tau();
        let mut nodes = vec![0u128; substrate.node_count() * tau];
        let mut edges = vec![0u128; substrate.edge_count() * tau];
        for (i, node) in request.nodes().iter().enumerate() {
            let v = mapping.node_map[i];
            node.demand
                .accumulate_into(&mut nodes[v * tau..(v + 1) * tau]);
        }
        for (e, edge) in request.edges().iter().enumerate() {
            for &s in &mapping.edge_map[e] {
                edge.demand
                    .accumulate_into(&mut edges[s * tau..(s + 1) * tau]);
            }
        }
        Loads { tau, nodes, edges }
    }

    fn node(&self, v: usize) -> &[u128] {
        &self.nodes[v * self.tau..(v + 1) * self.tau]
    }

    fn edge(&self, e: usize) -> &[u128] {
        &self.edges[e * self.tau..(e + 1) * self.tau]
    }
}

fn wide_to_vec(wide: &[u128]) -> ResourceVec {
    ResourceVec::new(wide.iter().map(|&w| Quantity::saturate_wide(w)).collect())
}

/// Summed-capacity checks. An invalid mapping is refused: its validity
/// violations are returned instead.
pub fn check_feasible(
    substrate: &Substrate,
    request: &Request,
    mapping: &Mapping,
) -> Result<ValidationReport, ModelError> {
    let mut report = check_valid(substrate, request, mapping)?;
    if !report.ok() {
        return Ok(report);
    }
    let loads = Loads::compute(substrate, request, mapping);
    for (v, node) in substrate.nodes().iter().enumerate() {
        if !node.capacity.admits(loads.node(v)) {
            report.violations.push(Violation {
                kind: ViolationKind::NodeCapacity,
                elements: vec![node.id.clone()],
                observed: Some(wide_to_vec(loads.node(v)).to_string()),
                allowed: Some(node.capacity.to_string()),
            });
        }
    }
    for (e, edge) in substrate.edges().iter().enumerate() {
        if !edge.capacity.admits(loads.edge(e)) {
            report.violations.push(Violation {
                kind: ViolationKind::EdgeCapacity,
                elements: vec![substrate.edge_label(e)],
                observed: Some(wide_to_vec(loads.edge(e)).to_string()),
                allowed: Some(edge.capacity.to_string()),
            });
        }
    }
    Ok(report)
}

/// Same verdict as `check_feasible(..).ok()` without building a report.
pub fn is_feasible(
    substrate: &Substrate,
    request: &Request,
    mapping: &Mapping,
) -> Result<bool, ModelError> {
    if !check_valid(substrate, request, mapping)?.ok() {
        return Ok(false);
    }
    let loads = Loads::compute(substrate, request, mapping);
    let nodes_fit =
        (0..substrate.node_count()).all(|v| substrate.node(v).capacity.admits(loads.node(v)));
    let edges_fit =
        (0..substrate.edge_count()).all(|e| substrate.edge(e).capacity.admits(loads.edge(e)));
    Ok(nodes_fit && edges_fit)
}

/// Σ_v d(v)ᵀc(host(v)) + Σ_e Σ_{e′ on path(e)} d(e)ᵀc(e′), exactly.
/// Returns [`Cost::SATURATED`] when the sum does not fit.
pub fn mapping_cost(substrate: &Substrate, request: &Request, mapping: &Mapping) -> Cost {
    let nodes =
        request.nodes().iter().enumerate().map(|(i, node)| {
            Cost::dot_vec(&node.demand, &substrate.node(mapping.node_map[i]).cost)
        });
    let edges = request.edges().iter().enumerate().flat_map(|(e, edge)| {
        mapping.edge_map[e]
            .iter()
            .map(move |&s| Cost::dot_vec(&edge.demand, &substrate.edge(s).cost))
    });
    nodes.chain(edges).fold(Cost::ZERO, Cost::saturating_add)
}
