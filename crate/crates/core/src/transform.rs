//! Substrate rewrites that bring a tree into the shape the dynamic program
//! expects, and the lift of mappings back onto the original tree.
//!
//! Every rewrite is recorded as a [`TraceRecord`]; the transforms themselves
//! are implemented by applying those records to a working copy, so replaying
//! a trace reproduces the transformed substrate exactly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{Mapping, ModelError, Request, Substrate};
use crate::quantity::ResourceVec;
use crate::tree::{RootedTree, TreePaths};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    AddedReverseEdge {
        src: String,
        dst: String,
    },
    LeafAdded {
        node: String,
        leaf: String,
    },
    NodeSplit {
        node: String,
        left: String,
        right: String,
        left_children: Vec<String>,
        right_children: Vec<String>,
    },
    LeafPadded {
        node: String,
        leaf: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformTrace {
    pub records: Vec<TraceRecord>,
}

impl TransformTrace {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Applies the records in order to a copy of `input`.
    pub fn replay(&self, input: &Substrate) -> Result<Substrate, ModelError> {
        let mut out = input.clone();
        for rec in &self.records {
            apply(&mut out, rec)?;
        }
        Ok(out)
    }
}

fn sentinel_node(tau: usize) -> (ResourceVec, ResourceVec) {
    (ResourceVec::zeros(tau), ResourceVec::unbounded(tau))
}

fn apply(sub: &mut Substrate, rec: &TraceRecord) -> Result<(), ModelError> {
    let tau = sub.tau();
    match rec {
        TraceRecord::AddedReverseEdge { src, dst } => {
            sub.add_edge_by_id(src, dst, ResourceVec::zeros(tau), ResourceVec::zeros(tau))?;
        }
        TraceRecord::LeafAdded { node, leaf } => {
            let v = sub.require_node(node)?;
            let (cap, cost) = (sub.node(v).capacity.clone(), sub.node(v).cost.clone());
            let l = sub.add_node(leaf.clone(), cap, cost)?;
            let (zero, max) = sentinel_node(tau);
            sub.set_node_resources(v, zero, max);
            link(sub, v, l, ResourceVec::unbounded(tau))?;
        }
        TraceRecord::NodeSplit {
            node,
            left,
            right,
            left_children,
            right_children,
        } => {
            let v = sub.require_node(node)?;
            for (fresh, children) in [(left, left_children), (right, right_children)] {
                let (zero, max) = sentinel_node(tau);
                let w = sub.add_node(fresh.clone(), zero, max)?;
                link(sub, v, w, ResourceVec::unbounded(tau))?;
                for child in children {
                    let c = sub.require_node(child)?;
                    let mut moved = false;
                    if let Some(e) = sub.find_edge(v, c) {
                        sub.rewire_edge(e, w, c)?;
                        moved = true;
                    }
                    if let Some(e) = sub.find_edge(c, v) {
                        sub.rewire_edge(e, c, w)?;
                        moved = true;
                    }
                    if !moved {
                        return Err(ModelError::MissingEdge(node.clone(), child.clone()));
                    }
                }
            }
        }
        TraceRecord::LeafPadded { node, leaf } => {
            let v = sub.require_node(node)?;
            let (zero, max) = sentinel_node(tau);
            let l = sub.add_node(leaf.clone(), zero, max)?;
            link(sub, v, l, ResourceVec::zeros(tau))?;
        }
    }
    Ok(())
}

/// Adds `a->b` and `b->a` with the given capacity and zero cost.
fn link(sub: &mut Substrate, a: usize, b: usize, capacity: ResourceVec) -> Result<(), ModelError> {
    let tau = sub.tau();
    sub.add_edge(a, b, capacity.clone(), ResourceVec::zeros(tau))?;
    sub.add_edge(b, a, capacity, ResourceVec::zeros(tau))?;
    Ok(())
}

fn fresh_id(sub: &Substrate, base: &str, suffix: &str) -> String {
    let id = format!("{base}~{suffix}");
    if sub.find_node(&id).is_none() {
        return id;
    }
    (2..)
        .map(|k| format!("{base}~{suffix}{k}"))
        .find(|id| sub.find_node(id).is_none())
        .expect("unbounded search")
}

/// Adds every missing reverse edge with zero capacity and zero cost.
pub fn bidirectionalize(substrate: &Substrate) -> (Substrate, TransformTrace) {
    let mut out = substrate.clone();
    let mut trace = TransformTrace::default();
    for e in substrate.edges() {
        if substrate.find_edge(e.dst, e.src).is_none() {
            let rec = TraceRecord::AddedReverseEdge {
                src: substrate.node_id(e.dst).to_string(),
                dst: substrate.node_id(e.src).to_string(),
            };
            apply(&mut out, &rec).expect("reverse edge is new");
            trace.records.push(rec);
        }
    }
    (out, trace)
}

/// Which nodes with children get a fresh leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafPolicy {
    /// Only nodes with nonzero capacity in some component.
    #[default]
    NonzeroCapacity,
    /// Every node with children. Needed when all-zero-demand request nodes
    /// may sit on zero-capacity inner nodes.
    AllInternal,
}

/// Moves the resources of every qualifying inner node to a fresh child leaf.
pub fn leafify(
    substrate: &Substrate,
    root: usize,
    policy: LeafPolicy,
) -> Result<(Substrate, TransformTrace), ModelError> {
    let tree = RootedTree::new(substrate, root)?;
    let mut out = substrate.clone();
    let mut trace = TransformTrace::default();
    for &v in &tree.bfs_order {
        if tree.is_leaf(v) {
            continue;
        }
        if policy == LeafPolicy::NonzeroCapacity && substrate.node(v).capacity.is_zero() {
            continue;
        }
        let node = substrate.node_id(v);
        let rec = TraceRecord::LeafAdded {
            node: node.to_string(),
            leaf: fresh_id(&out, node, "leaf"),
        };
        apply(&mut out, &rec)?;
        trace.records.push(rec);
    }
    Ok((out, trace))
}

/// Splits every node with more than two children into a binary tree of
/// zero-capacity helper nodes.
pub fn binarize(
    substrate: &Substrate,
    root: usize,
) -> Result<(Substrate, TransformTrace), ModelError> {
    let tree = RootedTree::new(substrate, root)?;
    let mut out = substrate.clone();
    let mut trace = TransformTrace::default();
    let mut counters: HashMap<String, usize> = HashMap::new();
    for &v in &tree.bfs_order {
        if tree.children[v].len() > 2 {
            let base = substrate.node_id(v).to_string();
            let children: Vec<String> = tree.children[v]
                .iter()
                .map(|&c| substrate.node_id(c).to_string())
                .collect();
            split(
                &mut out,
                &mut trace,
                &mut counters,
                &base,
                base.clone(),
                children,
            )?;
        }
    }
    Ok((out, trace))
}

fn split(
    out: &mut Substrate,
    trace: &mut TransformTrace,
    counters: &mut HashMap<String, usize>,
    base: &str,
    node: String,
    mut children: Vec<String>,
) -> Result<(), ModelError> {
    let mut next = |out: &Substrate| loop {
        let n = counters.entry(base.to_string()).or_insert(0);
        *n += 1;
        let id = format!("{base}~s{n}");
        if out.find_node(&id).is_none() {
            return id;
        }
    };
    let left = next(out);
    let right = next(out);
    let right_children = children.split_off(children.len() / 2);
    let left_children = children;
    let rec = TraceRecord::NodeSplit {
        node,
        left: left.clone(),
        right: right.clone(),
        left_children: left_children.clone(),
        right_children: right_children.clone(),
    };
    apply(out, &rec)?;
    trace.records.push(rec);
    if left_children.len() > 2 {
        split(out, trace, counters, base, left, left_children)?;
    }
    if right_children.len() > 2 {
        split(out, trace, counters, base, right, right_children)?;
    }
    Ok(())
}

/// Gives every one-child node a dummy leaf that can neither host nor route.
pub fn pad_full_binary(
    substrate: &Substrate,
    root: usize,
) -> Result<(Substrate, TransformTrace), ModelError> {
    let tree = RootedTree::new(substrate, root)?;
    let mut out = substrate.clone();
    let mut trace = TransformTrace::default();
    for &v in &tree.bfs_order {
        let k = tree.children[v].len();
        if k > 2 {
            return Err(ModelError::NotBinary(substrate.node_id(v).to_string(), k));
        }
        if k == 1 {
            let node = substrate.node_id(v);
            let rec = TraceRecord::LeafPadded {
                node: node.to_string(),
                leaf: fresh_id(&out, node, "pad"),
            };
            apply(&mut out, &rec)?;
            trace.records.push(rec);
        }
    }
    Ok((out, trace))
}

/// For every node of `transformed`, the index of the original node it stands
/// for. `traces` is the chain that produced `transformed` from `original`.
pub fn origin_map(
    original: &Substrate,
    transformed: &Substrate,
    traces: &[TransformTrace],
) -> Result<Vec<usize>, ModelError> {
    let mut origin: HashMap<&str, usize> = HashMap::new();
    for (i, n) in original.nodes().iter().enumerate() {
        origin.insert(&n.id, i);
    }
    let resolve = |origin: &HashMap<&str, usize>, id: &str| {
        origin
            .get(id)
            .copied()
            .ok_or_else(|| ModelError::UnknownNode(id.to_string()))
    };
    for rec in traces.iter().flat_map(|t| &t.records) {
        match rec {
            TraceRecord::AddedReverseEdge { .. } => {}
            TraceRecord::LeafAdded { node, leaf } | TraceRecord::LeafPadded { node, leaf } => {
                let o = resolve(&origin, node)?;
                origin.insert(leaf, o);
            }
            TraceRecord::NodeSplit {
                node, left, right, ..
            } => {
                let o = resolve(&origin, node)?;
                origin.insert(left, o);
                origin.insert(right, o);
            }
        }
    }
    transformed
        .nodes()
        .iter()
        .map(|n| resolve(&origin, &n.id))
        .collect()
}

/// Maps a mapping on `transformed` back onto `original`: every node moves to
/// the original node it was derived from and every edge follows the unique
/// original tree path between the lifted endpoints.
pub fn lift_mapping(
    original: &Substrate,
    transformed: &Substrate,
    traces: &[TransformTrace],
    request: &Request,
    mapping: &Mapping,
) -> Result<Mapping, ModelError> {
    let origin = origin_map(original, transformed, traces)?;
    lift_with_origin(original, &origin, request, mapping)
}

pub(crate) fn lift_with_origin(
    original: &Substrate,
    origin: &[usize],
    request: &Request,
    mapping: &Mapping,
) -> Result<Mapping, ModelError> {
    if mapping.node_map.len() != request.node_count() {
        return Err(ModelError::IncompleteMapping(
            "node map does not cover the request".into(),
        ));
    }
    let node_map: Vec<usize> = mapping
        .node_map
        .iter()
        .map(|&v| {
            origin
                .get(v)
                .copied()
                .ok_or_else(|| ModelError::UnknownNode(format!("#{v}")))
        })
        .collect::<Result<_, _>>()?;
    let paths = TreePaths::new(original)?;
    let edge_map = request
        .edges()
        .iter()
        .map(|e| paths.path(node_map[e.src], node_map[e.dst]))
        .collect::<Result<_, _>>()?;
    Ok(Mapping { node_map, edge_map })
}

/// The full rewrite chain used by the solver.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub substrate: Substrate,
    pub root: usize,
    /// One trace per stage, in application order.
    pub traces: Vec<TransformTrace>,
    /// Original node index of every transformed node.
    pub origin: Vec<usize>,
}

impl Pipeline {
    /// bidirectionalize, leafify, binarize, pad_full_binary.
    pub fn run(
        original: &Substrate,
        root: usize,
        policy: LeafPolicy,
    ) -> Result<Pipeline, ModelError> {
        let (s1, t1) = bidirectionalize(original);
        let (s2, t2) = leafify(&s1, root, policy)?;
        let (s3, t3) = binarize(&s2, root)?;
        let (s4, t4) = pad_full_binary(&s3, root)?;
        let traces = vec![t1, t2, t3, t4];
        let origin = origin_map(original, &s4, &traces)?;
        Ok(Pipeline {
            substrate: s4,
            root,
            traces,
            origin,
        })
    }

    /// Whether each transformed edge stands for a usable original edge.
    /// Edges inside one origin class always count; edges between classes
    /// count only when the original has that direction.
    pub fn edge_present(&self, original: &Substrate) -> Vec<bool> {
        self.substrate
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = (self.origin[e.src], self.origin[e.dst]);
                a == b || original.find_edge(a, b).is_some()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::{is_feasible, mapping_cost};

    fn node(s: &mut Substrate, id: &str, cap: u64, cost: u64) -> usize {
        s.add_node(
            id,
            ResourceVec::from_units(&[cap]),
            ResourceVec::from_units(&[cost]),
        )
        .unwrap()
    }

    fn both(s: &mut Substrate, a: usize, b: usize, cap: u64, cost: u64) {
        for (x, y) in [(a, b), (b, a)] {
            s.add_edge(
                x,
                y,
                ResourceVec::from_units(&[cap]),
                ResourceVec::from_units(&[cost]),
            )
            .unwrap();
        }
    }

    fn star(t: usize) -> Substrate {
        let mut s = Substrate::new(1);
        node(&mut s, "v", 0, 0);
        for i in 1..=t {
            let u = node(&mut s, &format!("u{i}"), 1, 1);
            both(&mut s, 0, u, 1, 1);
        }
        s
    }

    fn child_ids(s: &Substrate, v: &str) -> Vec<String> {
        let root = s.find_node("v").unwrap();
        let tree = RootedTree::new(s, root).unwrap();
        let v = s.find_node(v).unwrap();
        tree.children[v]
            .iter()
            .map(|&c| s.node_id(c).to_string())
            .collect()
    }

    #[test]
    fn bidirectionalize_adds_zero_reverse_edge() {
        let mut s = Substrate::new(1);
        node(&mut s, "a", 1, 1);
        node(&mut s, "b", 1, 1);
        s.add_edge(
            0,
            1,
            ResourceVec::from_units(&[4]),
            ResourceVec::from_units(&[2]),
        )
        .unwrap();
        let (out, trace) = bidirectionalize(&s);
        let e = out.find_edge(1, 0).unwrap();
        assert_eq!(out.edge(e).capacity, ResourceVec::zeros(1));
        assert_eq!(out.edge(e).cost, ResourceVec::zeros(1));
        assert_eq!(trace.records.len(), 1);
        let (again, t2) = bidirectionalize(&out);
        assert_eq!(again, out);
        assert!(t2.is_empty());

        let lone = star(0);
        assert_eq!(bidirectionalize(&lone).0, lone);
    }

    #[test]
    fn leafify_path_example() {
        let mut s = Substrate::new(1);
        node(&mut s, "a", 1, 3);
        node(&mut s, "b", 2, 1);
        both(&mut s, 0, 1, 5, 1);
        let (out, trace) = leafify(&s, 0, LeafPolicy::NonzeroCapacity).unwrap();
        assert_eq!(
            trace.records,
            [TraceRecord::LeafAdded {
                node: "a".into(),
                leaf: "a~leaf".into()
            }]
        );
        let leaf = out.find_node("a~leaf").unwrap();
        assert_eq!(out.node(leaf).capacity, ResourceVec::from_units(&[1]));
        assert_eq!(out.node(leaf).cost, ResourceVec::from_units(&[3]));
        assert_eq!(out.node(0).capacity, ResourceVec::zeros(1));
        assert_eq!(out.node(0).cost, ResourceVec::unbounded(1));
        assert_eq!(out.node(1), s.node(1));
        let e = out.find_edge(leaf, 0).unwrap();
        assert_eq!(out.edge(e).capacity, ResourceVec::unbounded(1));

        let (twice, t2) = leafify(&out, 0, LeafPolicy::NonzeroCapacity).unwrap();
        assert_eq!(twice, out);
        assert!(t2.is_empty());

        let single = star(0);
        assert!(leafify(&single, 0, LeafPolicy::AllInternal)
            .unwrap()
            .1
            .is_empty());
    }

    #[test]
    fn leafify_policies_differ_on_zero_capacity_inner_nodes() {
        let s = star(2);
        assert!(leafify(&s, 0, LeafPolicy::NonzeroCapacity)
            .unwrap()
            .1
            .is_empty());
        let (out, trace) = leafify(&s, 0, LeafPolicy::AllInternal).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(out.node_count(), 4);
    }

    #[test]
    fn split_three_children() {
        let (out, trace) = binarize(&star(3), 0).unwrap();
        assert_eq!(
            trace.records,
            [TraceRecord::NodeSplit {
                node: "v".into(),
                left: "v~s1".into(),
                right: "v~s2".into(),
                left_children: vec!["u1".into()],
                right_children: vec!["u2".into(), "u3".into()],
            }]
        );
        assert_eq!(child_ids(&out, "v"), ["v~s1", "v~s2"]);
        assert_eq!(child_ids(&out, "v~s1"), ["u1"]);
        assert_eq!(child_ids(&out, "v~s2"), ["u2", "u3"]);
        let s1 = out.find_node("v~s1").unwrap();
        assert_eq!(out.node(s1).capacity, ResourceVec::zeros(1));
        assert_eq!(out.node(s1).cost, ResourceVec::unbounded(1));
        // the moved edge keeps its resources
        let u1 = out.find_node("u1").unwrap();
        assert_eq!(
            out.edge(out.find_edge(s1, u1).unwrap()).cost,
            ResourceVec::from_units(&[1])
        );
    }

    #[test]
    fn split_four_children_once() {
        let (out, trace) = binarize(&star(4), 0).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(child_ids(&out, "v~s1"), ["u1", "u2"]);
        assert_eq!(child_ids(&out, "v~s2"), ["u3", "u4"]);
        assert!(binarize(&star(2), 0).unwrap().1.is_empty());
    }

    #[test]
    fn split_recurses_on_wide_nodes() {
        let (out, trace) = binarize(&star(7), 0).unwrap();
        assert_eq!(trace.records.len(), 3);
        let tree = RootedTree::new(&out, 0).unwrap();
        assert!(tree.children.iter().all(|c| c.len() <= 2));
        assert_eq!(out.node_count(), 8 + 6);
        assert_eq!(trace.replay(&star(7)).unwrap(), out);
        let (again, t2) = binarize(&out, 0).unwrap();
        assert_eq!(again, out);
        assert!(t2.is_empty());
    }

    #[test]
    fn pad_examples() {
        let mut s = Substrate::new(1);
        node(&mut s, "a", 0, 0);
        node(&mut s, "b", 1, 1);
        both(&mut s, 0, 1, 1, 1);
        let (out, trace) = pad_full_binary(&s, 0).unwrap();
        assert_eq!(
            trace.records,
            [TraceRecord::LeafPadded {
                node: "a".into(),
                leaf: "a~pad".into()
            }]
        );
        let pad = out.find_node("a~pad").unwrap();
        assert_eq!(out.node(pad).capacity, ResourceVec::zeros(1));
        assert_eq!(
            out.edge(out.find_edge(0, pad).unwrap()).capacity,
            ResourceVec::zeros(1)
        );
        assert!(pad_full_binary(&out, 0).unwrap().1.is_empty());
        assert!(pad_full_binary(&star(0), 0).unwrap().1.is_empty());
        assert!(matches!(
            pad_full_binary(&star(3), 0),
            Err(ModelError::NotBinary(..))
        ));
    }

    #[test]
    fn pipeline_replays_and_bounds_size() {
        let s = star(5);
        let p = Pipeline::run(&s, 0, LeafPolicy::AllInternal).unwrap();
        let mut replayed = s.clone();
        for t in &p.traces {
            replayed = t.replay(&replayed).unwrap();
        }
        assert_eq!(replayed, p.substrate);
        assert!(p.substrate.node_count() <= 3 * s.node_count() + 2);
        let tree = RootedTree::new(&p.substrate, p.root).unwrap();
        assert!(tree.children.iter().all(|c| c.is_empty() || c.len() == 2));
    }

    #[test]
    fn lift_moves_leaf_hosts_to_parent_and_keeps_cost() {
        let mut s = Substrate::new(1);
        node(&mut s, "a", 4, 3);
        node(&mut s, "b", 4, 1);
        node(&mut s, "c", 4, 2);
        both(&mut s, 0, 1, 5, 1);
        both(&mut s, 0, 2, 5, 2);
        let p = Pipeline::run(&s, 0, LeafPolicy::NonzeroCapacity).unwrap();
        let mut r = Request::new(1);
        r.add_node("x", ResourceVec::from_units(&[1])).unwrap();
        r.add_node("y", ResourceVec::from_units(&[1])).unwrap();
        r.add_edge(0, 1, ResourceVec::from_units(&[1])).unwrap();

        let leaf = p.substrate.find_node("a~leaf").unwrap();
        let b = p.substrate.find_node("b").unwrap();
        let paths = TreePaths::new(&p.substrate).unwrap();
        let m = Mapping {
            node_map: vec![leaf, b],
            edge_map: vec![paths.path(leaf, b).unwrap()],
        };
        assert!(m.edge_map[0].len() > 1);
        assert!(is_feasible(&p.substrate, &r, &m).unwrap());

        let lifted = lift_mapping(&s, &p.substrate, &p.traces, &r, &m).unwrap();
        assert_eq!(lifted.node_map, [0, 1]);
        assert_eq!(lifted.edge_map, [vec![s.find_edge(0, 1).unwrap()]]);
        assert!(is_feasible(&s, &r, &lifted).unwrap());
        assert_eq!(
            mapping_cost(&s, &r, &lifted),
            mapping_cost(&p.substrate, &r, &m)
        );
    }

    #[test]
    fn empty_trace_lift_is_identity() {
        let s = star(2);
        let mut r = Request::new(1);
        r.add_node("x", ResourceVec::from_units(&[1])).unwrap();
        r.add_node("y", ResourceVec::from_units(&[1])).unwrap();
        r.add_edge(0, 1, ResourceVec::from_units(&[1])).unwrap();
        let m = Mapping {
            node_map: vec![1, 2],
            edge_map: vec![crate::tree::unique_tree_path(&s, 1, 2).unwrap()],
        };
        assert_eq!(lift_mapping(&s, &s, &[], &r, &m).unwrap(), m);
    }

    #[test]
    fn trace_serializes_with_kind_tag() {
        let rec = TraceRecord::LeafAdded {
            node: "a".into(),
            leaf: "a~leaf".into(),
        };
        let text = serde_json::to_string(&rec).unwrap();
        assert_eq!(text, r#"{"kind":"leaf_added","node":"a","leaf":"a~leaf"}"#);
        assert_eq!(serde_json::from_str::<TraceRecord>(&text).unwrap(), rec);
    }

    #[test]
    fn edge_presence_tracks_original_directions() {
        let mut s = Substrate::new(1);
        node(&mut s, "a", 1, 1);
        node(&mut s, "b", 1, 1);
        s.add_edge(0, 1, ResourceVec::from_units(&[1]), ResourceVec::zeros(1))
            .unwrap();
        let p = Pipeline::run(&s, 0, LeafPolicy::NonzeroCapacity).unwrap();
        let present = p.edge_present(&s);
        for (e, edge) in p.substrate.edges().iter().enumerate() {
            let label = p.substrate.edge_label(e);
            let expect = !(p.origin[edge.src] == 1 && p.origin[edge.dst] == 0);
            assert_eq!(present[e], expect, "{label}");
        }
    }
}
